"""Row, column and two-sided interpolatory decompositions and their
error certificates.

A row ID reproduces every stream from a few pilot streams,
``Y ~ Z @ Y[S, :]``; a column ID reproduces every snapshot from a few pilot
snapshots, ``Y ~ Y[:, T] @ W``; the two-sided form uses both,
``Y ~ Y[:, T] @ X @ Y[S, :]``.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ParameterError, ValidationError
from .linalg_core import DataMatrix, as_array, check_finite, compute_svd, pinv, solve_weights_row
from .selection import PilotSet, error_factor

#: Slack (relative to sigma_1) allowed on certified upper bounds.
BOUND_SLACK = 1e-10


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _labels(Y, n):
    if isinstance(Y, DataMatrix):
        return Y.stream_labels
    return tuple(str(i + 1) for i in range(n))


@dataclass(frozen=True)
class RowId:
    pilots: PilotSet
    Z: np.ndarray
    R_S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Z", _ro(self.Z))
        object.__setattr__(self, "R_S", _ro(self.R_S))

    variant = "row"

    @property
    def K(self):
        return len(self.pilots)

    def reconstruct(self, pilot_rows=None):
        """``Z @ pilot_rows``; defaults to the training pilot rows."""
        rows = self.R_S if pilot_rows is None else np.asarray(pilot_rows, dtype=float)
        return self.Z @ rows

    @property
    def weights(self):
        return self.Z


@dataclass(frozen=True)
class ColId:
    pilots: PilotSet
    W: np.ndarray
    C_T: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _ro(self.W))
        object.__setattr__(self, "C_T", _ro(self.C_T))

    variant = "column"

    @property
    def K(self):
        return len(self.pilots)

    def reconstruct(self, pilot_cols=None):
        cols = self.C_T if pilot_cols is None else np.asarray(pilot_cols, dtype=float)
        return cols @ self.W

    @property
    def weights(self):
        return self.W


@dataclass(frozen=True)
class TwoSidedId:
    row_pilots: PilotSet
    col_pilots: PilotSet
    X: np.ndarray
    C_T: np.ndarray
    R_S: np.ndarray

    def __post_init__(self):
        for name in ("X", "C_T", "R_S"):
            object.__setattr__(self, name, _ro(getattr(self, name)))

    variant = "two-sided"

    @property
    def K(self):
        return len(self.row_pilots)

    def reconstruct(self):
        return self.C_T @ self.X @ self.R_S

    @property
    def weights(self):
        return self.X


@dataclass(frozen=True)
class ErrorCertificate:
    """``lower_bound = sigma_{K+1} <= error <= upper_bound``.

    ``kind`` is ``"bound"`` when certifying the matrix the SVD came from and
    ``"estimate"`` when the numbers are used as a predictor for other data.
    """

    eta_S: float
    eta_T: float
    sigma_next: float
    lower_bound: float
    upper_bound: float
    K: int
    kind: str = "bound"

    def to_dict(self):
        return {
            "eta_S": self.eta_S,
            "eta_T": self.eta_T,
            "sigma_next": self.sigma_next,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "K": self.K,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            doc.get("eta_S"),
            doc.get("eta_T"),
            float(doc["sigma_next"]),
            float(doc["lower_bound"]),
            float(doc["upper_bound"]),
            int(doc["K"]),
            doc.get("kind", "bound"),
        )


def _as_pilots(P, n, axis):
    if isinstance(P, PilotSet):
        if P.n != n:
            raise ParameterError(f"pilot set indexes an axis of {P.n}, data axis has {n}")
        return P if P.axis == axis else PilotSet(P.indices, n, axis, P.strategy)
    return PilotSet(list(P), n, axis, "manual")


def _name_dependent(err, pilots, labels, what):
    bad = [pilots.indices[p] for p in getattr(err, "positions", [])]
    names = [labels[i] for i in bad] if labels is not None else bad
    raise DegeneracyError(f"dependent pilot {what} {names}: {err}") from None


def build_row_id(Y, S):
    """Row ID from pilot streams ``S``; weights are the least-squares fit."""
    A = check_finite(as_array(Y))
    S = _as_pilots(S, A.shape[0], "rows")
    R_S = A[list(S.indices), :]
    try:
        Z = solve_weights_row(A, R_S)
    except DegeneracyError as err:
        _name_dependent(err, S, _labels(Y, A.shape[0]), "streams")
    return RowId(S, Z, R_S)


def build_col_id(Y, T):
    """Column ID from pilot snapshots ``T``: ``W = pinv(C_T) @ Y``."""
    A = check_finite(as_array(Y))
    T = _as_pilots(T, A.shape[1], "columns")
    C_T = A[:, list(T.indices)]
    try:
        W = solve_weights_row(A.T, C_T.T).T
    except DegeneracyError as err:
        _name_dependent(err, T, None, "snapshots")
    return ColId(T, W, C_T)


def build_two_sided_id(Y, S, T):
    """Two-sided ID with ``X = pinv(C_T) @ Y @ pinv(R_S)``."""
    A = check_finite(as_array(Y))
    S = _as_pilots(S, A.shape[0], "rows")
    T = _as_pilots(T, A.shape[1], "columns")
    if len(S) != len(T):
        raise ParameterError(f"two-sided ID needs |S| = |T|, got {len(S)} and {len(T)}")
    R_S = A[list(S.indices), :]
    C_T = A[:, list(T.indices)]
    for M, what, P in ((R_S, "streams", S), (C_T.T, "snapshots", T)):
        if compute_svd(M).rank < len(P):
            raise DegeneracyError(f"pilot {what} {list(P.indices)} are linearly dependent")
    X = pinv(C_T) @ A @ pinv(R_S)
    return TwoSidedId(S, T, X, C_T, R_S)


def reconstruct_entry(row_id, pilot_samples, i):
    """Online estimate of stream ``i`` from current pilot samples."""
    pilot_samples = np.asarray(pilot_samples, dtype=float)
    if pilot_samples.shape != (row_id.K,):
        raise ParameterError(
            f"expected {row_id.K} pilot samples, got shape {pilot_samples.shape}"
        )
    if not 0 <= i < row_id.Z.shape[0]:
        raise ParameterError(f"stream index {i} outside 0..{row_id.Z.shape[0] - 1}")
    return float(row_id.Z[i] @ pilot_samples)


def certify(svd, S=None, T=None, K=None, kind="bound"):
    """Sandwich certificate from the SVD alone; no reconstruction is formed."""
    if S is None and T is None:
        raise ParameterError("certify needs row pilots, column pilots, or both")
    if K is None:
        K = len(S) if S is not None else len(T)
    for P in (S, T):
        if P is not None and len(P) != K:
            raise ParameterError(f"pilot set of size {len(P)} does not match K={K}")
    if K > svd.rank:
        raise DegeneracyError(f"K={K} exceeds the numerical rank {svd.rank}")
    eta_S = error_factor(svd.U[:, :K], S).eta if S is not None else None
    eta_T = error_factor(svd.V[:, :K], T).eta if T is not None else None
    sigma = svd.sigma_next(K)
    factor = (eta_S or 0.0) + (eta_T or 0.0)
    return ErrorCertificate(eta_S, eta_T, sigma, sigma, factor * sigma, K, kind)


# -- JSON documents -------------------------------------------------------------


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _pilot_doc(P, labels):
    doc = {"axis": P.axis, "strategy": P.strategy, "n": P.n, "indices": list(P.indices)}
    if P.axis == "rows" and labels is not None:
        doc["labels"] = [labels[i] for i in P.indices]
    else:
        doc["labels"] = [str(i + 1) for i in P.indices]
    return doc


def _pilot_from(doc):
    return PilotSet(doc["indices"], doc["n"], doc["axis"], doc.get("strategy", "manual"))


def _matrix_doc(M):
    return {"shape": list(M.shape), "data": [float(v) for v in np.ravel(M)]}


def _matrix_from(doc, name):
    shape = tuple(doc["shape"])
    data = np.asarray(doc["data"], dtype=float)
    if data.size != int(np.prod(shape)):
        raise ValidationError(f"{name}: {data.size} values for shape {list(shape)}")
    return data.reshape(shape)


def id_to_dict(model, certificate=None, provenance=None, labels=None, include_factors=False):
    """JSON-ready document for an ID; weights are stored row-major with shape.

    The pilot row/column snapshots are large and only kept for provenance,
    so they are written only when ``include_factors`` is set.
    """
    doc = {"variant": model.variant}
    if isinstance(model, TwoSidedId):
        doc["pilots"] = {"rows": _pilot_doc(model.row_pilots, labels),
                         "columns": _pilot_doc(model.col_pilots, labels)}
        factors = {"C_T": model.C_T, "R_S": model.R_S}
    elif isinstance(model, RowId):
        doc["pilots"] = _pilot_doc(model.pilots, labels)
        factors = {"R_S": model.R_S}
    else:
        doc["pilots"] = _pilot_doc(model.pilots, labels)
        factors = {"C_T": model.C_T}
    doc["weights"] = _matrix_doc(model.weights)
    if include_factors:
        doc["factors"] = {k: _matrix_doc(v) for k, v in factors.items()}
    doc["certificate"] = certificate.to_dict() if certificate is not None else None
    doc["provenance"] = dict(provenance or {})
    return doc


def _factor(doc, name, shape):
    factors = doc.get("factors") or {}
    if name in factors:
        return _matrix_from(factors[name], name)
    return np.zeros(shape)


def id_from_dict(doc):
    variant = doc.get("variant")
    try:
        weights = _matrix_from(doc["weights"], "weights")
        pilots = doc["pilots"]
        if variant == "row":
            return RowId(_pilot_from(pilots), weights, _factor(doc, "R_S", (weights.shape[1], 0)))
        if variant == "column":
            return ColId(_pilot_from(pilots), weights, _factor(doc, "C_T", (0, weights.shape[0])))
        if variant == "two-sided":
            K = weights.shape[0]
            return TwoSidedId(_pilot_from(pilots["rows"]), _pilot_from(pilots["columns"]), weights,
                              _factor(doc, "C_T", (0, K)), _factor(doc, "R_S", (K, 0)))
    except KeyError as exc:
        raise ValidationError(f"model document lacks field {exc.args[0]!r}") from None
    raise ValidationError(f"unknown ID variant {variant!r}")
