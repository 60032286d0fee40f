"""Pilot index selection (DEIM, QDEIM, random) and error factors.

Indices are 0-based throughout. DEIM ties go to the smallest index, which
is what ``np.argmax`` does on exact ties.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BoundsError, DegeneracyError, ParameterError, ValidationError
from .linalg_core import check_finite

#: Maximum ``|U^T U - I|`` accepted as orthonormal.
ORTHO_TOL = 1e-8
#: Condition number above which a selected submatrix counts as singular.
COND_LIMIT = 1e14

AXES = ("rows", "columns")
STRATEGIES = ("deim", "qdeim", "random")


@dataclass(frozen=True)
class PilotSet:
    """Ordered distinct indices into an axis of length ``n``."""

    indices: tuple
    n: int
    axis: str = "rows"
    strategy: str = "deim"

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.axis not in AXES:
            raise ParameterError(f"axis must be one of {AXES}, got {self.axis!r}")
        if len(set(idx)) != len(idx):
            raise ValidationError(f"pilot indices must be distinct, got {list(idx)}")
        out = [i for i in idx if not 0 <= i < self.n]
        if out:
            raise BoundsError(f"pilot indices {out} outside 0..{self.n - 1}")

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @property
    def K(self):
        return len(self.indices)

    def prefix(self, k):
        return PilotSet(self.indices[:k], self.n, self.axis, self.strategy)

    def labels(self, stream_labels):
        return [stream_labels[i] for i in self.indices]


@dataclass(frozen=True)
class ErrorFactor:
    """``eta = ||(S^T U_K)^{-1}||_2`` for a ``K``-element pilot set."""

    eta: float
    K: int

    def __post_init__(self):
        if not self.eta >= 1.0 - 1e-12:
            raise ValidationError(f"error factor must be >= 1, got {self.eta}")


def _check_basis(U, ortho_tol=ORTHO_TOL):
    U = check_finite(np.asarray(U, dtype=float))
    if U.ndim == 1:
        U = U[:, None]
    N, K = U.shape
    if K > N:
        raise BoundsError(f"cannot select {K} indices from {N}")
    dev = np.abs(U.T @ U - np.eye(K)).max() if K else 0.0
    if dev > ortho_tol:
        raise ValidationError(f"basis columns are not orthonormal (max |U^T U - I| = {dev:.3g})")
    return U


def deim_steps(U, ortho_tol=ORTHO_TOL):
    """Run DEIM, yielding ``(index, residual)`` for each column of ``U``.

    The residual of step ``k`` is ``u_k - P_{k-1} u_k``; for ``k = 1`` it is
    ``u_1`` itself. Each step solves the ``(k-1)``-square interpolation
    system afresh.
    """
    U = _check_basis(U, ortho_tol)
    chosen = []
    for k in range(U.shape[1]):
        u = U[:, k]
        if k == 0:
            r = u.copy()
        else:
            coeffs = np.linalg.solve(U[chosen, :k], u[chosen])
            r = u - U[:, :k] @ coeffs
        s = int(np.argmax(np.abs(r)))
        if abs(r[s]) <= 1e-14 or s in chosen:
            raise DegeneracyError(f"DEIM residual vanished at step {k + 1}")
        chosen.append(s)
        yield s, r


def deim_select(U, ortho_tol=ORTHO_TOL):
    """DEIM pilot indices for the orthonormal columns of ``U``, in selection order."""
    U = _check_basis(U, ortho_tol)
    idx = [s for s, _ in deim_steps(U, ortho_tol)]
    return PilotSet(idx, U.shape[0], strategy="deim")


def qdeim_select(U, ortho_tol=ORTHO_TOL):
    """QDEIM: the first ``K`` pivots of column-pivoted QR applied to ``U^T``."""
    U = _check_basis(U, ortho_tol)
    K = U.shape[1]
    _, _, piv = scipy.linalg.qr(U.T, mode="economic", pivoting=True)
    return PilotSet(piv[:K], U.shape[0], strategy="qdeim")


def random_select(N, K, seed):
    """``K`` distinct indices drawn uniformly from ``range(N)``."""
    if not 0 <= K <= N:
        raise BoundsError(f"cannot draw {K} indices from {N}")
    rng = np.random.default_rng(seed)
    return PilotSet(rng.choice(N, size=K, replace=False), N, strategy="random")


def select(U, strategy="deim", seed=0, axis="rows"):
    """Dispatch on ``strategy``; ``seed`` only matters for ``random``."""
    if strategy == "deim":
        ps = deim_select(U)
    elif strategy == "qdeim":
        ps = qdeim_select(U)
    elif strategy == "random":
        U = np.atleast_2d(np.asarray(U))
        ps = random_select(U.shape[0], U.shape[1], seed)
    else:
        raise ParameterError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    return PilotSet(ps.indices, ps.n, axis, ps.strategy)


def interp_project(U_k, S_k, x):
    """Apply the oblique interpolatory projector ``U_k (S^T U_k)^{-1} S^T`` to ``x``.

    Only the ``k``-square system is solved; the projected vector matches
    ``x`` at the selected indices.
    """
    U_k = np.asarray(U_k, dtype=float)
    if U_k.ndim == 1:
        U_k = U_k[:, None]
    x = np.asarray(x, dtype=float)
    idx = list(S_k)
    if len(idx) != U_k.shape[1]:
        raise ParameterError(f"{len(idx)} indices for a basis of {U_k.shape[1]} vectors")
    block = U_k[idx, :]
    if np.linalg.cond(block) > COND_LIMIT:
        raise DegeneracyError(f"selected submatrix at indices {idx} is singular")
    return U_k @ np.linalg.solve(block, x[idx])


def error_factor(U_K, S):
    """Error factor ``||(S^T U_K)^{-1}||_2``, ordering of ``S`` irrelevant."""
    U_K = np.asarray(U_K, dtype=float)
    if U_K.ndim == 1:
        U_K = U_K[:, None]
    idx = list(S)
    K = U_K.shape[1]
    if len(idx) != K:
        raise ParameterError(f"pilot set has {len(idx)} indices but basis has {K} columns")
    sv = np.linalg.svd(U_K[idx, :], compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > COND_LIMIT:
        raise DegeneracyError(f"selected submatrix at indices {idx} is singular")
    return ErrorFactor(float(1.0 / sv[-1]), K)
