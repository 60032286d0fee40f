"""Pilot-stream monitoring: adaptive training, online reconstruction with a
bound-violation tripwire, batch scoring and event localization.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decomp import ErrorCertificate, RowId, build_row_id, id_from_dict, id_to_dict
from .errors import DegeneracyError, ParameterError, TrainingFailure, ValidationError
from .linalg_core import DROP_TOL, DataMatrix, _svd_full, as_array, compute_svd, numerical_rank
from .selection import PilotSet, deim_steps, error_factor, qdeim_select

THETA_PRESETS = {"default": 1.0, "sensitive": 1e-2}
DETECT_WINDOW_S = 1.0
PRE_EVENT_S = 0.5
POST_EVENT_S = 1.0


@dataclass(frozen=True)
class TrainedModel:
    row_id: RowId
    eta_S: float
    sigma_next: float
    monitored_streams: tuple
    tau: float
    K: int
    stream_labels: tuple = None
    trace: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "monitored_streams", tuple(int(i) for i in self.monitored_streams))
        if set(self.monitored_streams) & set(self.pilots):
            raise ValidationError("monitored streams must not be pilots")
        if self.stream_labels is None:
            n = self.row_id.Z.shape[0]
            object.__setattr__(self, "stream_labels", tuple(str(i + 1) for i in range(n)))

    @property
    def pilots(self):
        return self.row_id.pilots.indices

    @property
    def n_streams(self):
        return self.row_id.Z.shape[0]

    @property
    def bound(self):
        return self.eta_S * self.sigma_next

    def threshold(self, theta=1.0):
        return theta * self.eta_S * self.sigma_next


@dataclass(frozen=True)
class Alert:
    stream: int
    sample: int
    residual: float
    threshold: float


@dataclass(frozen=True)
class ScenarioResult:
    outcome: str  # TP, FP, FN, or TN for scenarios without an event
    first_alert_sample: int = None
    n_alert_samples: int = 0
    id: str = None


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    f2: float
    undefined: tuple = ()
    tn: int = 0

    def to_dict(self):
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "f2": self.f2, "undefined": list(self.undefined),
        }


@dataclass(frozen=True)
class Localization:
    indices: tuple
    labels: tuple
    short_rank: bool = False


# -- training -------------------------------------------------------------------


def _sigma_after(s, K, drop_tol=DROP_TOL):
    """sigma_{K+1} from a full singular value list, zero past the numerical rank."""
    return float(s[K]) if K < numerical_rank(s, drop_tol) else 0.0


def train_pilots(Y_trn, tau, K_max=10, M=2):
    """Grow a DEIM pilot set until ``eta_S * sigma_{K+1} <= tau``.

    The next ``M`` DEIM indices after acceptance become the monitored
    non-pilot streams. Raises ``TrainingFailure`` carrying the full
    ``(K, eta, bound)`` trace when ``K_max`` pilots are not enough.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    A = as_array(Y_trn)
    N, T = A.shape
    if K_max < 1 or M < 0 or K_max + M > min(N, T):
        raise ParameterError(f"K_max + M = {K_max + M} must lie in 1..{min(N, T)}")
    # the full thin basis so DEIM can run past the numerical rank for monitors
    U, s, _ = _svd_full(A)
    order = [idx for idx, _ in deim_steps(U[:, : K_max + M])]
    trace = []
    for K in range(1, K_max + 1):
        eta = error_factor(U[:, :K], order[:K]).eta
        sigma = _sigma_after(s, K)
        trace.append((K, eta, eta * sigma))
        if eta * sigma <= tau:
            break
    else:
        raise TrainingFailure(
            f"tolerance {tau:g} not reached with {K_max} pilots "
            f"(best bound {min(b for _, _, b in trace):.4g})",
            trace,
        )
    pilots = PilotSet(order[:K], N, "rows", "deim")
    labels = Y_trn.stream_labels if isinstance(Y_trn, DataMatrix) else None
    return TrainedModel(
        build_row_id(Y_trn, pilots),
        eta,
        sigma,
        order[K : K + M],
        float(tau),
        K,
        labels,
        tuple(trace),
    )


def recertify(model, Y_new):
    """``eta_S * sigma_{K+1}`` for the trained pilots on fresh data.

    Returns ``inf`` when the pilot rows of the new singular basis are singular.
    """
    A = as_array(Y_new)
    if A.shape[0] != model.n_streams:
        raise ParameterError(f"model has {model.n_streams} streams, data has {A.shape[0]}")
    U, s, _ = _svd_full(A)
    if model.K > U.shape[1]:
        return math.inf
    try:
        eta = error_factor(U[:, : model.K], model.pilots).eta
    except DegeneracyError:
        return math.inf
    return eta * _sigma_after(s, model.K)


# -- online detection -------------------------------------------------------------


def monitor_step(model, sample, theta=1.0, sample_index=0):
    """Alerts raised by one snapshot; reads only pilot and monitored entries."""
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (model.n_streams,):
        raise ParameterError(f"expected a sample of {model.n_streams} streams, got {sample.shape}")
    pilot_samples = sample[list(model.pilots)]
    thr = model.threshold(theta)
    alerts = []
    for i in model.monitored_streams:
        res = abs(sample[i] - float(model.row_id.Z[i] @ pilot_samples))
        if res > thr:
            alerts.append(Alert(i, sample_index, res, thr))
    return alerts


def residuals(model, Y_obs):
    """``|y_i - Z_i y_S|`` for every monitored stream and snapshot (M x T)."""
    A = as_array(Y_obs)
    if A.shape[0] != model.n_streams:
        raise ParameterError(f"model has {model.n_streams} streams, data has {A.shape[0]}")
    mon = list(model.monitored_streams)
    return np.abs(A[mon] - model.row_id.Z[mon] @ A[list(model.pilots)])


def alert_mask(model, Y_obs, theta=1.0):
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    return residuals(model, Y_obs) > model.threshold(theta)


def run_scenario(model, Y_obs, theta, truth=None, detect_window_s=DETECT_WINDOW_S, scenario_id=None):
    """Stream ``Y_obs`` through the detector and classify the first alert.

    With ground truth: first alert on ``[onset, onset + window]`` is TP, any
    other first alert FP, no alert FN. Without an event: an alert is FP and
    silence TN.
    """
    hits = alert_mask(model, Y_obs, theta).any(axis=0)
    when = np.flatnonzero(hits)
    n = int(hits.sum())
    if when.size == 0:
        return ScenarioResult("FN" if truth is not None else "TN", None, 0, scenario_id)
    first = int(when[0])
    if truth is None:
        return ScenarioResult("FP", first, n, scenario_id)
    rate = Y_obs.sample_rate_hz if isinstance(Y_obs, DataMatrix) else 1.0
    onset = truth.onset_sample
    end = onset + int(round(detect_window_s * rate))
    outcome = "TP" if onset <= first <= end else "FP"
    return ScenarioResult(outcome, first, n, scenario_id)


def f_beta(precision, recall, beta):
    b2 = beta * beta
    denom = b2 * precision + recall
    return (1 + b2) * precision * recall / denom if denom > 0 else 0.0


def f_scores(tp, fp, fn, tn=0):
    """Precision, recall, F1 and F2. A 0/0 ratio is reported as 0 and named
    in ``undefined``."""
    if min(tp, fp, fn, tn) < 0:
        raise ParameterError("counts must be nonnegative")
    undefined = []
    if tp + fp:
        prec = tp / (tp + fp)
    else:
        prec = 0.0
        undefined.append("precision")
    if tp + fn:
        rec = tp / (tp + fn)
    else:
        rec = 0.0
        undefined.append("recall")
    if prec + rec == 0:
        undefined += ["f1", "f2"]
    return MetricsReport(tp, fp, fn, prec, rec, f_beta(prec, rec, 1.0), f_beta(prec, rec, 2.0),
                         tuple(undefined), tn)


def score(results):
    counts = {k: 0 for k in ("TP", "FP", "FN", "TN")}
    for r in results:
        counts[r.outcome] += 1
    return f_scores(counts["TP"], counts["FP"], counts["FN"], counts["TN"])


def run_batch(model, scenarios, theta=1.0, detect_window_s=DETECT_WINDOW_S, jobs=1):
    """Run ``(Y_obs, truth)`` or ``(Y_obs, truth, theta)`` scenarios; results
    keep input order whatever ``jobs`` is."""

    def one(item):
        i, sc = item
        Y, truth = sc[0], sc[1]
        th = sc[2] if len(sc) > 2 and sc[2] is not None else theta
        sid = sc[3] if len(sc) > 3 else str(i)
        return run_scenario(model, Y, th, truth, detect_window_s, sid)

    items = list(enumerate(scenarios))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    return results, score(results)


# -- localization -----------------------------------------------------------------


def event_window(Y_obs, onset_sample, pre_s=PRE_EVENT_S, post_s=POST_EVENT_S):
    """Columns around an event and the count of pre-event columns among them."""
    pre = int(round(pre_s * Y_obs.sample_rate_hz))
    post = int(round(post_s * Y_obs.sample_rate_hz))
    start = max(onset_sample - pre, 0)
    stop = min(onset_sample + post, Y_obs.n_snapshots)
    return Y_obs.window(start, stop), onset_sample - start


def localize_event(Y_window, pre_event_samples, k, strategy="deim"):
    """Rank candidate source streams by DEIM on the mean-removed window.

    The per-stream mean of the first ``pre_event_samples`` columns is
    removed before the SVD. If the deviation has rank below ``k`` every
    obtainable index is returned and ``short_rank`` is set.
    """
    A = as_array(Y_window)
    N, T = A.shape
    if not 0 < pre_event_samples < T:
        raise ParameterError(f"pre-event samples {pre_event_samples} must lie in 1..{T - 1}")
    if not 1 <= k <= N:
        raise ParameterError(f"k={k} outside 1..{N}")
    dev = A - A[:, :pre_event_samples].mean(axis=1, keepdims=True)
    svd = compute_svd(dev)
    kk = min(k, svd.rank)
    if kk == 0:
        idx = []
    elif strategy == "qdeim":
        idx = list(qdeim_select(svd.U[:, :kk]).indices)
    elif strategy == "deim":
        idx = [i for i, _ in deim_steps(svd.U[:, :kk])]
    else:
        raise ParameterError(f"unknown localization strategy {strategy!r}")
    labels = Y_window.stream_labels if isinstance(Y_window, DataMatrix) else [str(i + 1) for i in range(N)]
    return Localization(tuple(idx), tuple(labels[i] for i in idx), kk < k)


# -- model documents ---------------------------------------------------------------


def model_to_dict(model, provenance=None):
    cert = ErrorCertificate(model.eta_S, None, model.sigma_next, model.sigma_next,
                            model.bound, model.K, "bound")
    prov = {"K": model.K, "tau": model.tau, **(provenance or {})}
    doc = id_to_dict(model.row_id, cert, prov, model.stream_labels)
    doc["stream_labels"] = list(model.stream_labels)
    doc["monitor"] = {
        "K": model.K,
        "tau": model.tau,
        "eta_S": model.eta_S,
        "sigma_next": model.sigma_next,
        "bound": model.bound,
        "monitored_streams": list(model.monitored_streams),
        "monitored_labels": [model.stream_labels[i] for i in model.monitored_streams],
        "trace": [{"K": K, "eta": eta, "bound": b} for K, eta, b in model.trace],
    }
    return doc


def model_from_dict(doc):
    try:
        mon = doc["monitor"]
        row_id = id_from_dict(doc)
        if not isinstance(row_id, RowId):
            raise ValidationError("a monitoring model must be a row ID")
        return TrainedModel(
            row_id,
            float(mon["eta_S"]),
            float(mon["sigma_next"]),
            mon["monitored_streams"],
            float(mon["tau"]),
            int(mon["K"]),
            tuple(doc.get("stream_labels") or ()) or None,
            tuple((int(t["K"]), float(t["eta"]), float(t["bound"])) for t in mon.get("trace", [])),
        )
    except KeyError as exc:
        raise ValidationError(f"model document lacks field {exc.args[0]!r}") from None
