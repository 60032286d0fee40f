"""``pmuid`` command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 validation or parameter error,
3 numerical degeneracy, 4 training failure.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import datagen, decomp, monitor, schemas
from .errors import DegeneracyError, ParameterError, PmuIdError, ValidationError
from .linalg_core import _svd_full, compute_svd, pinv, rank_for_tolerance, spectral_norm
from .selection import PilotSet, error_factor, random_select, select


# -- output helpers ---------------------------------------------------------------


def _num(x):
    """JSON has no infinity; write it as the string ``"inf"``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _json_text(doc, schema=None):
    if schema is not None:
        schemas.validate(doc, schema)
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[h] for h in header])
    return buf.getvalue()


def _read_json(path, schema=None):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if schema is not None:
        schemas.validate(doc, schema)
    return doc


def _label_indices(Y, text):
    pos = {lab: i for i, lab in enumerate(Y.stream_labels)}
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if tok not in pos:
            raise ValidationError(f"unknown stream label {tok!r}")
        out.append(pos[tok])
    return out


def _provenance(path, K=None, tau=None):
    return {"source": os.path.basename(path), "source_sha256": decomp.file_sha256(path),
            "K": K, "tau": tau}


# -- commands ---------------------------------------------------------------------


def _config(args, **over):
    kw = dict(
        n_streams=args.streams, duration_s=args.duration, sample_rate_hz=args.rate,
        true_rank=args.rank, noise_std=args.noise, baseline=args.baseline, seed=args.seed,
        network_seed=args.network_seed, t0=args.t0,
    )
    kw.update(over)
    return datagen.ScenarioConfig(**kw)


def cmd_gen(args):
    if not args.out or args.out == "-":
        raise ParameterError("gen needs an output path (--out)")
    if args.batch:
        return _gen_batch(args)
    Y = datagen.generate_ambient(_config(args))
    truth = None
    if args.fault:
        fault = datagen.FaultSpec(
            affected_streams=_label_indices(Y, args.fault),
            onset_s=args.onset,
            clear_s=args.clear,
            dip_depth=args.dip,
            ring_freq_hz=args.ring_freq,
            ring_decay_s=args.ring_decay,
        )
        Y, truth = datagen.inject_fault(Y, fault)
    datagen.save_csv(Y, args.out)
    if truth is not None:
        path = args.truth or _truth_path(args.out)
        _emit(_json_text(truth.to_dict(), "truth"), path)
    return 0


def _truth_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".truth.json"


def _gen_batch(args):
    os.makedirs(args.out, exist_ok=True)
    batch = datagen.golden_batch(
        n_scenarios=args.batch, seed=args.seed, n_streams=args.streams,
        train_s=args.duration, obs_s=args.obs_duration, noise_std=args.noise,
        sample_rate_hz=args.rate, true_rank=args.rank, baseline=args.baseline,
    )
    datagen.save_csv(batch.training, os.path.join(args.out, "train.csv"))
    manifest = []
    for i, (Y, truth) in enumerate(batch.scenarios):
        name = f"scenario_{i:03d}"
        datagen.save_csv(Y, os.path.join(args.out, name + ".csv"))
        _emit(_json_text(truth.to_dict(), "truth"), os.path.join(args.out, name + ".truth.json"))
        manifest.append({"id": name, "data_csv": name + ".csv",
                         "truth_json": name + ".truth.json", "theta": args.theta})
    _emit(_json_text(manifest, "manifest"), os.path.join(args.out, "manifest.json"))
    return 0


def cmd_svd(args):
    Y = datagen.load_csv(args.input)
    svd = compute_svd(Y)
    doc = {"shape": list(Y.shape), "rank": svd.rank,
           "singular_values": [float(s) for s in svd.singular_values]}
    if args.alpha is not None:
        doc["alpha"] = args.alpha
        doc["rank_for_alpha"] = rank_for_tolerance(svd, args.alpha)
    if args.format == "csv":
        rows = [{"k": k + 1, "sigma": repr(float(s))} for k, s in enumerate(svd.singular_values)]
        _emit(_csv_text(rows, ["k", "sigma"]), args.out)
    else:
        _emit(_json_text(doc, "svd"), args.out)
    return 0


def _pick(Y, svd_U, svd_V, k, strategy, axis, seed):
    basis = svd_U if axis == "rows" else svd_V
    if k > basis.shape[1]:
        raise ParameterError(f"k={k} exceeds the available rank {basis.shape[1]}")
    return select(basis[:, :k], strategy, seed=seed, axis=axis)


def cmd_select(args):
    Y = datagen.load_csv(args.input)
    U, _, V = _svd_full(Y.values)
    P = _pick(Y, U, V, args.k, args.strategy, args.axis, args.seed)
    doc = decomp._pilot_doc(P, Y.stream_labels)
    if args.format == "csv":
        rows = [{"position": p + 1, "index": i, "label": lab}
                for p, (i, lab) in enumerate(zip(doc["indices"], doc["labels"]))]
        _emit(_csv_text(rows, ["position", "index", "label"]), args.out)
    else:
        _emit(_json_text(doc, "pilots"), args.out)
    return 0


def _pilots_from_args(Y, args, U, V):
    S = T = None
    if args.rows:
        S = PilotSet(_label_indices(Y, args.rows), Y.n_streams, "rows", "manual")
    if args.cols:
        T = PilotSet([int(c) - 1 for c in args.cols.split(",")], Y.n_snapshots, "columns", "manual")
    if S is None and args.variant in ("row", "two-sided"):
        S = _pick(Y, U, V, args.k, args.strategy, "rows", args.seed)
    if T is None and args.variant in ("column", "two-sided"):
        T = _pick(Y, U, V, args.k, args.strategy, "columns", args.seed)
    return S, T


def _build(Y, variant, S, T):
    if variant == "row":
        return decomp.build_row_id(Y, S)
    if variant == "column":
        return decomp.build_col_id(Y, T)
    return decomp.build_two_sided_id(Y, S, T)


def cmd_id(args):
    Y = datagen.load_csv(args.input)
    U, _, V = _svd_full(Y.values)
    S, T = _pilots_from_args(Y, args, U, V)
    model = _build(Y, args.variant, S, T)
    K = model.K
    cert = decomp.certify(compute_svd(Y), S, T, K)
    doc = decomp.id_to_dict(model, cert, _provenance(args.input, K), Y.stream_labels,
                            include_factors=args.include_factors)
    _emit(_json_text(doc, "id"), args.out)
    return 0


def cmd_certify(args):
    Y = datagen.load_csv(args.input)
    U, _, V = _svd_full(Y.values)
    S, T = _pilots_from_args(Y, args, U, V)
    if args.variant == "row":
        T = None
    elif args.variant == "column":
        S = None
    cert = decomp.certify(compute_svd(Y), S, T)
    doc = cert.to_dict()
    if args.measure:
        model = _build(Y, args.variant, S, T)
        doc["measured_error"] = spectral_norm(Y.values - model.reconstruct())
    _emit(_json_text(doc, "certificate"), args.out)
    return 0


BENCH_FIELDS = ["k", "strategy", "axis", "rel_error", "svd_baseline", "eta", "bound"]


def benchmark(Y, k_max, strategies=("deim", "qdeim", "random"), axes=("rows", "columns"), seed=0):
    """Relative 2-norm error of rank-``k`` row/column IDs per selection strategy.

    ``svd_baseline`` is ``sigma_{k+1} / sigma_1`` and ``bound`` is
    ``eta * sigma_{k+1} / sigma_1``; an infinite ``eta`` marks a singular
    selected submatrix.
    """
    A = Y.values if hasattr(Y, "values") else np.asarray(Y, dtype=float)
    N, T = A.shape
    if not 1 <= k_max <= min(N, T):
        raise ParameterError(f"k_max={k_max} outside 1..{min(N, T)}")
    U, s, V = _svd_full(A)
    svd = compute_svd(A)
    s1 = svd.sigma(1)
    if s1 == 0:
        raise DegeneracyError("benchmark needs a nonzero matrix")
    rows = []
    for k in range(1, k_max + 1):
        base = svd.sigma_next(k) / s1
        for axis in axes:
            basis = U if axis == "rows" else V
            for strategy in strategies:
                if strategy == "random":
                    P = random_select(basis.shape[0], k, seed)
                else:
                    P = select(basis[:, :k], strategy, axis=axis)
                idx = list(P.indices)
                if axis == "rows":
                    R = A[idx, :]
                    approx = (A @ pinv(R)) @ R
                else:
                    C = A[:, idx]
                    approx = C @ (pinv(C) @ A)
                try:
                    eta = error_factor(basis[:, :k], idx).eta
                except DegeneracyError:
                    eta = math.inf
                bound = eta * base if base > 0 or math.isfinite(eta) else math.inf
                rows.append({
                    "k": k, "strategy": strategy, "axis": axis,
                    "rel_error": spectral_norm(A - approx) / s1,
                    "svd_baseline": base, "eta": eta, "bound": bound,
                })
    return rows


def cmd_benchmark(args):
    Y = datagen.load_csv(args.input)
    rows = benchmark(Y, args.kmax, tuple(args.strategies.split(",")), tuple(args.axes.split(",")),
                     args.seed)
    if args.format == "json":
        doc = [{k: (_num(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows]
        _emit(_json_text(doc, "benchmark"), args.out)
    else:
        text_rows = [{k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()}
                     for r in rows]
        _emit(_csv_text(text_rows, BENCH_FIELDS), args.out)
    return 0


def cmd_train(args):
    Y = datagen.load_csv(args.input)
    model = monitor.train_pilots(Y, args.tau, args.kmax, args.monitors)
    doc = monitor.model_to_dict(model, _provenance(args.input, model.K, args.tau))
    _emit(_json_text(doc, "model"), args.out)
    return 0


def _load_model(path):
    return monitor.model_from_dict(_read_json(path, "model"))


def cmd_recertify(args):
    model = _load_model(args.model)
    Y = datagen.load_csv(args.input)
    bound = monitor.recertify(model, Y)
    threshold = args.threshold if args.threshold is not None else model.tau
    doc = {"bound": _num(bound), "training_bound": model.bound, "threshold": threshold,
           "accept": bool(bound <= threshold)}
    _emit(_json_text(doc, "recertify"), args.out)
    return 0


def cmd_monitor(args):
    model = _load_model(args.model)
    entries = _read_json(args.manifest, "manifest")
    root = os.path.dirname(os.path.abspath(args.manifest))
    scenarios = []
    for i, entry in enumerate(entries):
        Y = datagen.load_csv(os.path.join(root, entry["data_csv"]))
        truth = None
        if entry["truth_json"]:
            tdoc = _read_json(os.path.join(root, entry["truth_json"]), "truth")
            truth = datagen.FaultTruth.from_dict(tdoc, Y.stream_labels, Y.sample_rate_hz, Y.t0)
        theta = args.theta if args.theta is not None else entry["theta"]
        scenarios.append((Y, truth, theta, entry.get("id", str(i))))
    results, report = monitor.run_batch(model, scenarios, detect_window_s=args.window, jobs=args.jobs)
    doc = {
        "per_scenario": [
            {"id": r.id, "outcome": r.outcome, "first_alert_sample": r.first_alert_sample,
             "theta": sc[2]}
            for r, sc in zip(results, scenarios)
        ],
        "aggregate": report.to_dict(),
    }
    _emit(_json_text(doc, "report"), args.out)
    return 0


def cmd_localize(args):
    Y = datagen.load_csv(args.input)
    if args.truth:
        truth = datagen.FaultTruth.from_dict(_read_json(args.truth, "truth"), Y.stream_labels,
                                             Y.sample_rate_hz, Y.t0)
        onset = truth.onset_sample
    elif args.onset is not None:
        onset = Y.sample_index(args.onset)
    else:
        onset = None
    if onset is None:
        # the file already is the event window
        W, pre = Y, int(round(args.pre * Y.sample_rate_hz))
        onset = pre
    else:
        W, pre = monitor.event_window(Y, onset, args.pre, args.post)
    loc = monitor.localize_event(W, pre, args.k, args.strategy)
    doc = {"k": args.k, "strategy": args.strategy, "indices": list(loc.indices),
           "labels": list(loc.labels), "short_rank": loc.short_rank,
           "onset_sample": int(onset), "pre_event_samples": int(pre)}
    if args.format == "csv":
        rows = [{"rank": r + 1, "index": i, "label": lab}
                for r, (i, lab) in enumerate(zip(loc.indices, loc.labels))]
        _emit(_csv_text(rows, ["rank", "index", "label"]), args.out)
    else:
        _emit(_json_text(doc, "ranking"), args.out)
    if args.out not in (None, "-"):
        print("ranked streams: " + " ".join(loc.labels))
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-o", "--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    p = argparse.ArgumentParser(prog="pmuid", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic scenario data")
    g.add_argument("--streams", type=int, default=68)
    g.add_argument("--duration", type=float, default=120.0, help="seconds (training span for --batch)")
    g.add_argument("--rate", type=float, default=100.0)
    g.add_argument("--rank", type=int, default=4)
    g.add_argument("--noise", type=float, default=datagen.ScenarioConfig.noise_std)
    g.add_argument("--baseline", type=float, default=1.0)
    g.add_argument("--network-seed", type=int, default=0)
    g.add_argument("--t0", type=float, default=0.0)
    g.add_argument("--fault", help="comma-separated labels of affected streams")
    g.add_argument("--onset", type=float, default=30.0)
    g.add_argument("--clear", type=float, default=None, help="default onset + 0.2 s")
    g.add_argument("--dip", type=float, default=0.3)
    g.add_argument("--ring-freq", type=float, default=1.2)
    g.add_argument("--ring-decay", type=float, default=1.0)
    g.add_argument("--truth", help="truth JSON path (default <out>.truth.json)")
    g.add_argument("--batch", type=int, default=0, help="write a batch of N faulted scenarios into --out")
    g.add_argument("--obs-duration", type=float, default=60.0)
    g.add_argument("--theta", type=float, default=1e-2, help="theta written to the batch manifest")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("svd", parents=[common], help="singular values of a data file")
    s.add_argument("input")
    s.add_argument("--alpha", type=float)
    s.set_defaults(func=cmd_svd)

    def pilot_opts(q):
        q.add_argument("input")
        q.add_argument("-k", type=int, default=5)
        q.add_argument("--strategy", choices=("deim", "qdeim", "random"), default="deim")

    q = sub.add_parser("select", parents=[common], help="select pilot rows or columns")
    pilot_opts(q)
    q.add_argument("--axis", choices=("rows", "columns"), default="rows")
    q.set_defaults(func=cmd_select)

    for name, func, help_ in (("id", cmd_id, "build an interpolatory decomposition"),
                              ("certify", cmd_certify, "error certificate for a pilot set")):
        q = sub.add_parser(name, parents=[common], help=help_)
        pilot_opts(q)
        q.add_argument("--variant", choices=("row", "column", "two-sided"), default="row")
        q.add_argument("--rows", help="explicit pilot stream labels")
        q.add_argument("--cols", help="explicit 1-based pilot snapshot numbers")
        if name == "id":
            q.add_argument("--include-factors", action="store_true")
        else:
            q.add_argument("--measure", action="store_true", help="also report the true 2-norm error")
        q.set_defaults(func=func)

    b = sub.add_parser("benchmark", parents=[common], help="compare selection strategies over k")
    b.add_argument("input")
    b.add_argument("--kmax", type=int, default=20)
    b.add_argument("--strategies", default="deim,qdeim,random")
    b.add_argument("--axes", default="rows,columns")
    b.set_defaults(func=cmd_benchmark)

    t = sub.add_parser("train", parents=[common], help="adaptive DEIM pilot training")
    t.add_argument("input")
    t.add_argument("--tau", type=float, default=0.05)
    t.add_argument("--kmax", type=int, default=10)
    t.add_argument("--monitors", type=int, default=2)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("recertify", parents=[common], help="re-evaluate the bound on new data")
    r.add_argument("input")
    r.add_argument("--model", required=True)
    r.add_argument("--threshold", type=float, help="acceptance threshold (default: model tau)")
    r.set_defaults(func=cmd_recertify)

    m = sub.add_parser("monitor", parents=[common], help="run the detector over a scenario batch")
    m.add_argument("--model", required=True)
    m.add_argument("--manifest", required=True)
    m.add_argument("--theta", type=float, help="override the manifest theta")
    m.add_argument("--window", type=float, default=monitor.DETECT_WINDOW_S)
    m.add_argument("--jobs", type=int, default=1)
    m.set_defaults(func=cmd_monitor)

    lo = sub.add_parser("localize", parents=[common], help="rank likely event source streams")
    lo.add_argument("input")
    lo.add_argument("--truth", help="truth JSON giving the onset")
    lo.add_argument("--onset", type=float, help="event onset in seconds")
    lo.add_argument("--pre", type=float, default=monitor.PRE_EVENT_S)
    lo.add_argument("--post", type=float, default=monitor.POST_EVENT_S)
    lo.add_argument("-k", type=int, default=5)
    lo.add_argument("--strategy", choices=("deim", "qdeim"), default="deim")
    lo.set_defaults(func=cmd_localize)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PmuIdError as exc:
        print(f"pmuid {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"pmuid {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
