"""Synthetic PMU-like voltage-magnitude scenarios and the CSV file format.

Ambient data is a constant nominal level plus a few network-wide
oscillation modes plus noise. The noise has two parts, both scaled by
``noise_std``: weak spatially coherent modes (what dynamic input noise
looks like after passing through the grid) and a small white measurement
term. Stream loadings come from ``network_seed`` so that training and
observation scenarios share one network; time courses and noise come
from ``seed``.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ParseError, ValidationError
from .linalg_core import DataMatrix


@dataclass(frozen=True)
class ScenarioConfig:
    n_streams: int = 68
    duration_s: float = 120.0
    sample_rate_hz: float = 100.0
    true_rank: int = 4
    noise_std: float = 2e-5
    baseline: float = 1.0
    seed: int = 0
    network_seed: int = 0
    t0: float = 0.0
    # leading mode amplitude (per-unit, per-stream std) and geometric decay
    mode_amplitude: float = 0.015
    mode_decay: float = 0.85
    max_freq_hz: float = 2.0
    # coherent part of the noise: tail_rank modes with weights tail_decay**j, j >= 1
    tail_rank: int = 8
    tail_decay: float = 0.5
    white_fraction: float = 0.2

    def __post_init__(self):
        positive = ("n_streams", "duration_s", "sample_rate_hz", "true_rank", "baseline", "max_freq_hz")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.true_rank > self.n_streams:
            raise ParameterError(
                f"true_rank {self.true_rank} exceeds n_streams {self.n_streams}"
            )
        if self.noise_std < 0 or self.tail_rank < 0 or self.white_fraction < 0:
            raise ParameterError("noise parameters must be nonnegative")

    @property
    def n_snapshots(self):
        return int(round(self.duration_s * self.sample_rate_hz))

    def replace(self, **changes):
        fields = {**self.__dict__, **changes}
        return ScenarioConfig(**fields)


@dataclass(frozen=True)
class FaultSpec:
    """A line fault touching ``affected_streams`` (0-based indices)."""

    affected_streams: tuple
    onset_s: float
    clear_s: float = None
    dip_depth: float = 0.3
    ring_freq_hz: float = 1.2
    ring_decay_s: float = 1.0
    ring_gain: float = 0.5
    coupling: float = 0.25
    coupling_exponent: float = 1.0

    def __post_init__(self):
        streams = tuple(int(i) for i in self.affected_streams)
        object.__setattr__(self, "affected_streams", streams)
        if self.clear_s is None:
            object.__setattr__(self, "clear_s", self.onset_s + 0.2)
        if len(streams) < 2 or len(set(streams)) != len(streams):
            raise ParameterError("a fault needs at least two distinct affected streams")
        if not self.onset_s < self.clear_s:
            raise ParameterError(f"fault onset {self.onset_s} must precede clearing {self.clear_s}")
        if not 0 <= self.dip_depth < 1:
            raise ParameterError(f"dip depth must lie in [0, 1), got {self.dip_depth}")
        if self.ring_decay_s <= 0:
            raise ParameterError("ring decay must be positive")


@dataclass(frozen=True)
class FaultTruth:
    affected_indices: tuple
    affected_labels: tuple
    onset_s: float
    clear_s: float
    onset_sample: int

    def to_dict(self):
        return {
            "affected_streams": list(self.affected_labels),
            "affected_indices": list(self.affected_indices),
            "onset_s": self.onset_s,
            "clear_s": self.clear_s,
            "onset_sample": self.onset_sample,
        }

    @classmethod
    def from_dict(cls, doc, labels=None, sample_rate_hz=None, t0=0.0):
        if "affected_indices" in doc:
            idx = tuple(int(i) for i in doc["affected_indices"])
        elif labels is not None:
            pos = {lab: i for i, lab in enumerate(labels)}
            try:
                idx = tuple(pos[str(lab)] for lab in doc["affected_streams"])
            except KeyError as exc:
                raise ValidationError(f"truth names unknown stream {exc.args[0]!r}") from None
        else:
            raise ValidationError("truth needs affected_indices or matching stream labels")
        onset_sample = doc.get("onset_sample")
        if onset_sample is None:
            if sample_rate_hz is None:
                raise ValidationError("truth lacks onset_sample and no sample rate is known")
            onset_sample = int(round((doc["onset_s"] - t0) * sample_rate_hz))
        return cls(
            idx,
            tuple(str(lab) for lab in doc["affected_streams"]),
            float(doc["onset_s"]),
            float(doc["clear_s"]),
            int(onset_sample),
        )


def _network(cfg):
    rng = np.random.default_rng([cfg.network_seed, 0x6E6574])
    modes = rng.standard_normal((cfg.n_streams, cfg.true_rank))
    tail = rng.standard_normal((cfg.n_streams, cfg.tail_rank))
    return modes, tail


def _waves(rng, n, t, max_freq):
    freqs = rng.uniform(0.05, max_freq, size=n)
    phases = rng.uniform(0, 2 * np.pi, size=n)
    return np.sqrt(2) * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])


def generate_ambient(cfg):
    """Ambient (fault-free) scenario for ``cfg`` as a DataMatrix."""
    T = cfg.n_snapshots
    t = cfg.t0 + np.arange(T) / cfg.sample_rate_hz
    modes, tail = _network(cfg)
    rng = np.random.default_rng([cfg.seed, 0x616D62])
    amps = cfg.mode_amplitude * cfg.mode_decay ** np.arange(cfg.true_rank)
    Y = np.full((cfg.n_streams, T), float(cfg.baseline))
    Y += (modes * amps) @ _waves(rng, cfg.true_rank, t, cfg.max_freq_hz)
    tail_waves = _waves(rng, cfg.tail_rank, t, cfg.max_freq_hz)
    white = rng.standard_normal((cfg.n_streams, T))
    if cfg.noise_std > 0:
        weights = cfg.noise_std * cfg.tail_decay ** np.arange(1, cfg.tail_rank + 1)
        Y += (tail * weights) @ tail_waves
        Y += cfg.noise_std * cfg.white_fraction * white
    labels = tuple(str(i + 1) for i in range(cfg.n_streams))
    return DataMatrix(Y, labels, cfg.sample_rate_hz, cfg.t0)


def coupling_weights(n, affected, coupling=0.25, exponent=1.0):
    """Per-stream fault weight: 1 on affected streams, ``coupling / d**exponent``
    elsewhere with ``d`` the index distance to the nearest affected stream."""
    idx = np.arange(n)
    dist = np.min(np.abs(idx[:, None] - np.asarray(affected)[None, :]), axis=1)
    w = np.where(dist == 0, 1.0, coupling / np.maximum(dist, 1).astype(float) ** exponent)
    return w, dist


def inject_fault(Y, fault):
    """Apply ``fault`` to ``Y``; returns ``(faulted, FaultTruth)``.

    Affected streams are scaled by ``1 - dip_depth`` on ``[onset, clear)`` and
    ring with a decaying sinusoid afterwards, each with its own phase. Other
    streams see the same signature attenuated by index distance.
    """
    N, T = Y.shape
    if any(not 0 <= i < N for i in fault.affected_streams):
        raise ParameterError(f"affected streams {fault.affected_streams} outside 0..{N - 1}")
    on, off = Y.sample_index(fault.onset_s), Y.sample_index(fault.clear_s)
    if not 0 <= on < off < T:
        raise ParameterError(
            f"fault window [{fault.onset_s}, {fault.clear_s}] s outside the data span"
        )
    affected = np.asarray(fault.affected_streams)
    w, _ = coupling_weights(N, affected, fault.coupling, fault.coupling_exponent)
    nearest = affected[np.argmin(np.abs(np.arange(N)[:, None] - affected[None, :]), axis=1)]
    rank_of = {int(a): k for k, a in enumerate(affected)}
    phase = np.array([np.pi * rank_of[int(a)] / len(affected) for a in nearest])

    out = np.array(Y.values)
    out[:, on:off] *= 1.0 - fault.dip_depth * w[:, None]
    tau = (np.arange(off, T) - off) / Y.sample_rate_hz
    envelope = fault.dip_depth * fault.ring_gain * np.exp(-tau / fault.ring_decay_s)
    ring = np.sin(2 * np.pi * fault.ring_freq_hz * tau[None, :] + phase[:, None])
    out[:, off:] += (w[:, None] * envelope[None, :]) * ring

    truth = FaultTruth(
        tuple(int(a) for a in affected),
        tuple(Y.stream_labels[a] for a in affected),
        float(fault.onset_s),
        float(fault.clear_s),
        on,
    )
    return Y.with_values(out), truth


def random_fault(rng, n_streams, duration_s, t0=0.0, margin_s=5.0, dip_range=(0.2, 0.6)):
    """Random adjacent-pair fault with randomised shape parameters."""
    if duration_s <= 2 * margin_s:
        raise ParameterError(
            f"scenario of {duration_s} s leaves no room for a fault with {margin_s} s margins"
        )
    if n_streams < 2:
        raise ParameterError("a fault needs at least two streams")
    a = int(rng.integers(0, n_streams - 1))
    onset = float(np.round(rng.uniform(t0 + margin_s, t0 + duration_s - margin_s), 2))
    return FaultSpec(
        affected_streams=(a, a + 1),
        onset_s=onset,
        dip_depth=float(rng.uniform(*dip_range)),
        ring_freq_hz=float(rng.uniform(0.5, 2.0)),
        ring_decay_s=float(rng.uniform(0.5, 2.0)),
    )


@dataclass
class GoldenBatch:
    training: DataMatrix
    scenarios: list = field(default_factory=list)  # (DataMatrix, FaultTruth) pairs


def golden_batch(
    n_scenarios=50, seed=2024, n_streams=68, train_s=120.0, obs_s=60.0, dip_range=(0.2, 0.6), **cfg_kw
):
    """One training matrix plus ``n_scenarios`` faulted observation scenarios.

    Everything shares the network drawn from ``seed``; scenario ``i`` uses
    time-course seed ``seed + 1 + i``.
    """
    base = ScenarioConfig(n_streams=n_streams, duration_s=train_s, seed=seed, network_seed=seed, **cfg_kw)
    batch = GoldenBatch(generate_ambient(base))
    rng = np.random.default_rng([seed, 0x626174])
    for i in range(n_scenarios):
        cfg = base.replace(duration_s=obs_s, seed=seed + 1 + i)
        fault = random_fault(rng, n_streams, obs_s, dip_range=dip_range)
        batch.scenarios.append(inject_fault(generate_ambient(cfg), fault))
    return batch


# -- CSV format ---------------------------------------------------------------
#
#   # streams=N rate_hz=F t0=T0
#   label_1,label_2,...,label_N
#   one row of T comma-separated samples per stream


def save_csv(Y, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# streams={Y.n_streams} rate_hz={Y.sample_rate_hz!r} t0={Y.t0!r}\n")
        fh.write(",".join(Y.stream_labels) + "\n")
        for row in Y.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _parse_header(line):
    if not line.startswith("#"):
        raise ParseError("header must start with '#'", 1)
    fields = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"malformed header token {token!r}", 1)
        fields[key] = value
    try:
        return int(fields["streams"]), float(fields["rate_hz"]), float(fields.get("t0", 0.0))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed header {line.strip()!r}: {exc}", 1) from None


def load_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty file", 1)
    n, rate, t0 = _parse_header(lines[0])
    if len(lines) < 2:
        raise ParseError("missing stream label line", 2)
    labels = lines[1].split(",")
    rows = [ln for ln in lines[2:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(labels) != n:
        raise ParseError(f"header declares {n} streams but label line has {len(labels)}", 2)
    if len(rows) != n:
        raise ParseError(f"header declares {n} streams but file has {len(rows)} data rows", 3)
    values = []
    width = None
    for lineno, row in enumerate(rows, start=3):
        cells = row.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"ragged row: {len(cells)} samples, expected {width}", lineno)
        try:
            values.append(np.array(cells, dtype=float))
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(f"non-numeric cell {bad!r}", lineno) from None
    try:
        return DataMatrix(np.vstack(values), labels, rate, t0)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def save_truth(truth, path):
    with open(path, "w") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_truth(path, Y=None):
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("affected_streams", "onset_s", "clear_s"):
        if key not in doc:
            raise ValidationError(f"truth file {os.fspath(path)!r} lacks field {key!r}")
    if Y is None:
        return FaultTruth.from_dict(doc)
    return FaultTruth.from_dict(doc, Y.stream_labels, Y.sample_rate_hz, Y.t0)
