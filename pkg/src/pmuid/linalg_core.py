"""Dense linear-algebra kernels: SVD, truncation, rank choice, pseudoinverse
and least-squares weights.

All results are immutable; arrays handed out are marked read-only.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, DegeneracyError, ParameterError, ValidationError

#: Singular values below ``DROP_TOL * sigma_1`` are treated as zero.
DROP_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_finite(values, what="matrix", labels=None):
    """Raise ``ValidationError`` naming the first non-finite entry."""
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        pos = tuple(int(i) for i in np.argwhere(bad)[0])
        if values.ndim == 2:
            stream = labels[pos[0]] if labels is not None else pos[0]
            raise ValidationError(
                f"non-finite {what} entry {values[pos]!r} at stream {stream}, snapshot {pos[1]}"
            )
        raise ValidationError(f"non-finite {what} entry {values[pos]!r} at position {pos}")
    return values


@dataclass(frozen=True)
class DataMatrix:
    """``N`` streams by ``T`` snapshots of real samples.

    Row ``i`` is one data stream; column ``j`` is the snapshot taken at
    ``t0 + j / sample_rate_hz`` seconds.
    """

    values: np.ndarray
    stream_labels: tuple = None
    sample_rate_hz: float = 100.0
    t0: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError(f"data matrix must be 2-D and non-empty, got shape {values.shape}")
        labels = self.stream_labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(values.shape[0]))
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != values.shape[0]:
            raise ValidationError(
                f"{len(labels)} stream labels given for {values.shape[0]} streams"
            )
        if len(set(labels)) != len(labels):
            raise ValidationError("stream labels must be distinct")
        check_finite(values, labels=labels)
        if not (self.sample_rate_hz > 0 and np.isfinite(self.sample_rate_hz)):
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "stream_labels", labels)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_streams(self):
        return self.values.shape[0]

    @property
    def n_snapshots(self):
        return self.values.shape[1]

    def sample_index(self, t):
        """Column index of the snapshot at absolute time ``t`` (seconds)."""
        return int(round((t - self.t0) * self.sample_rate_hz))

    def window(self, start, stop):
        """Columns ``start:stop`` as a new DataMatrix with shifted ``t0``."""
        if not 0 <= start < stop <= self.n_snapshots:
            raise BoundsError(f"window [{start}, {stop}) outside 0..{self.n_snapshots}")
        return DataMatrix(
            self.values[:, start:stop],
            self.stream_labels,
            self.sample_rate_hz,
            self.t0 + start / self.sample_rate_hz,
        )

    def with_values(self, values):
        return DataMatrix(values, self.stream_labels, self.sample_rate_hz, self.t0)


def as_array(Y):
    """Plain float array view of a DataMatrix or array-like."""
    if isinstance(Y, DataMatrix):
        return Y.values
    return np.asarray(Y, dtype=float)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``Y = U diag(singular_values) V^T`` truncated to numerical rank."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray
    shape: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(self.U))
        object.__setattr__(self, "singular_values", _frozen(self.singular_values))
        object.__setattr__(self, "V", _frozen(self.V))
        if self.shape is None:
            object.__setattr__(self, "shape", (self.U.shape[0], self.V.shape[0]))

    @property
    def rank(self):
        return len(self.singular_values)

    def sigma(self, k):
        """``k``-th singular value, 1-based; zero beyond the rank."""
        if k < 1:
            raise BoundsError(f"singular value index must be >= 1, got {k}")
        return float(self.singular_values[k - 1]) if k <= self.rank else 0.0

    def sigma_next(self, K):
        """``sigma_{K+1}``, the spectral error of the best rank-``K`` approximation."""
        return self.sigma(K + 1)


def _svd_full(A):
    """Untruncated thin SVD with a finiteness check."""
    A = check_finite(A)
    if A.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {A.shape}")
    if A.size == 0:
        return np.zeros((A.shape[0], 0)), np.zeros(0), np.zeros((A.shape[1], 0))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def numerical_rank(s, drop_tol=DROP_TOL):
    if len(s) == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > drop_tol * s[0]))


def compute_svd(Y, drop_tol=DROP_TOL):
    """Thin SVD of ``Y`` with singular values below ``drop_tol * sigma_1`` dropped.

    A zero matrix yields rank-0 factors (empty arrays).
    """
    labels = Y.stream_labels if isinstance(Y, DataMatrix) else None
    A = as_array(Y)
    check_finite(A, labels=labels)
    U, s, V = _svd_full(A)
    R = numerical_rank(s, drop_tol)
    return SvdFactors(U[:, :R], s[:R], V[:, :R], shape=A.shape)


def truncate(svd, K):
    """Best rank-``K`` approximation ``U_K diag(sigma_K) V_K^T``."""
    if not isinstance(K, (int, np.integer)) or not 1 <= K <= svd.rank:
        raise BoundsError(f"truncation rank K={K} outside 1..{svd.rank}")
    return (svd.U[:, :K] * svd.singular_values[:K]) @ svd.V[:, :K].T


def rank_for_tolerance(svd, alpha):
    """Smallest ``K`` whose relative Frobenius truncation error is at most ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if svd.rank == 0:
        raise BoundsError("rank selection needs a nonzero matrix")
    s2 = svd.singular_values**2
    # tail[K] = sum_{k > K} sigma_k^2 for K = 0..R
    tail = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]])
    ratio = np.sqrt(tail / s2.sum())
    for K in range(1, svd.rank + 1):
        if ratio[K] <= alpha:
            return K
    return svd.rank


def spectral_norm(A):
    """Largest singular value of ``A``."""
    A = check_finite(A)
    if A.size == 0:
        return 0.0
    if A.ndim == 1:
        return float(np.linalg.norm(A))
    return float(np.linalg.svd(A, compute_uv=False)[0])


def pinv(A, drop_tol=DROP_TOL):
    """Moore-Penrose pseudoinverse using the same drop tolerance as ``compute_svd``."""
    A = check_finite(A)
    svd = compute_svd(A, drop_tol)
    if svd.rank == 0:
        return np.zeros(A.shape[::-1])
    return (svd.V / svd.singular_values) @ svd.U.T


def dependent_rows(A, drop_tol=DROP_TOL):
    """Positions of rows that do not raise the rank when taken in order."""
    A = np.asarray(A, dtype=float)
    kept, dependent = [], []
    for i in range(A.shape[0]):
        trial = kept + [i]
        if numerical_rank(np.linalg.svd(A[trial], compute_uv=False), drop_tol) == len(trial):
            kept.append(i)
        else:
            dependent.append(i)
    return dependent


def solve_weights_row(Y, R_S, drop_tol=DROP_TOL):
    """Least-squares weights ``Z = argmin ||Y - Z R_S||_F = Y R_S^+``.

    Raises ``DegeneracyError`` listing the dependent row positions of ``R_S``
    when its rows are linearly dependent.
    """
    Y = check_finite(as_array(Y))
    R_S = check_finite(np.atleast_2d(as_array(R_S)))
    if Y.shape[1] != R_S.shape[1]:
        raise ParameterError(
            f"pilot rows have {R_S.shape[1]} snapshots but data has {Y.shape[1]}"
        )
    svd = compute_svd(R_S, drop_tol)
    if svd.rank < R_S.shape[0]:
        bad = dependent_rows(R_S, drop_tol)
        err = DegeneracyError(
            f"pilot rows are linearly dependent (rank {svd.rank} < {R_S.shape[0]}); "
            f"dependent positions {bad}"
        )
        err.positions = bad
        raise err
    R_pinv = (svd.V / svd.singular_values) @ svd.U.T
    return Y @ R_pinv
