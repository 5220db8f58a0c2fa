"""Balanced truncation of stable LTI models.

The pipeline is ``gramians -> balance -> select_order -> truncate``; ``reduce``
chains the four steps. Reduced models keep the static gain of the original
model exactly.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur, solve_triangular

from .errors import (DimensionError, MinimalityWarning, ReductionError, SplitError,
                     StabilityError)
from .statespace import StateSpaceModel, dc_gain, is_stable

# directions below this fraction of sigma_1 cannot be balanced reliably
MINIMALITY_RTOL = 1e-12
# sigma values closer than this fraction of sigma_1 are treated as one cluster
CLUSTER_RTOL = 1e-10


def solve_lyapunov(A, Q):
    """Solve ``A W + W A^T + Q = 0`` for stable ``A``.

    Bartels-Stewart on the complex Schur form ``A = U T U^H``: the
    transformed equation ``T Y + Y T^H = -U^H Q U`` is triangular and is
    solved one column at a time from the last column backwards. Diagonal
    ``A`` uses the closed form ``w_ij = -q_ij / (a_i + a_j)``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise DimensionError("A and Q must be square and of equal size")
    if not is_stable(A):
        raise StabilityError("Lyapunov equation needs a stable A")
    if n == 0:
        return np.zeros((0, 0))
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        a = np.diag(A)
        W = -Q / (a[:, None] + a[None, :])
        return 0.5 * (W + W.T)

    T, U = schur(A, output="complex")
    F = -(U.conj().T @ Q @ U)
    Y = np.zeros((n, n), dtype=complex)
    tc = T.conj()
    eye = np.eye(n)
    for j in range(n - 1, -1, -1):
        rhs = F[:, j].copy()
        if j < n - 1:
            rhs -= Y[:, j + 1:] @ tc[j, j + 1:]
        Y[:, j] = solve_triangular(T + tc[j, j] * eye, rhs, check_finite=False)
    W = (U @ Y @ U.conj().T).real
    return 0.5 * (W + W.T)


def gramians(model):
    """Controllability and observability Gramians ``(Wc, Wo)``."""
    A, B, C = model.A, model.B, model.C
    if not is_stable(A):
        raise StabilityError("Gramians need a stable A")
    Wc = solve_lyapunov(A, B @ B.T)
    Wo = solve_lyapunov(A.T, C.T @ C)
    return Wc, Wo


def _psd_factor(W):
    # W = L L^T via a clipped eigendecomposition; tolerant of rank deficiency
    lam, V = np.linalg.eigh(W)
    lam = np.clip(lam, 0.0, None)
    return V * np.sqrt(lam)


@dataclass(frozen=True, eq=False)
class BalancedRealization:
    """Balanced coordinates of a model.

    ``transform`` maps balanced states to original ones (``x = M z``) and
    ``inverse`` is its left inverse. When the model is not numerically
    minimal only the ``rank`` leading directions are balanced, so both are
    rectangular; ``minimal`` is then False.
    """

    balanced: StateSpaceModel
    transform: np.ndarray
    inverse: np.ndarray
    hsv: np.ndarray
    rank: int
    minimal: bool = True
    warnings: tuple = field(default=())


def balance(model):
    """Square-root balancing.

    With ``Wc = Lc Lc^T`` and ``Wo = Lo Lo^T``, the SVD ``Lo^T Lc = U S V^T``
    gives the Hankel singular values ``S`` and the transform
    ``M = Lc V S^{-1/2}``, ``M^+ = S^{-1/2} U^T Lo^T``.
    """
    Wc, Wo = gramians(model)
    Lc = _psd_factor(Wc)
    Lo = _psd_factor(Wo)
    U, s, Vt = np.linalg.svd(Lo.T @ Lc)
    hsv = s
    if hsv.size == 0 or hsv[0] <= 0.0:
        raise ReductionError("model has no controllable and observable part")
    rank = int(np.count_nonzero(hsv >= MINIMALITY_RTOL * hsv[0]))
    notes = ()
    if rank < model.n:
        msg = (f"realization is not minimal: {model.n - rank} Hankel singular values "
               f"below {MINIMALITY_RTOL:g}*sigma_1 will always be truncated")
        warnings.warn(msg, MinimalityWarning, stacklevel=2)
        notes = (msg,)
    scale = 1.0 / np.sqrt(hsv[:rank])
    M = (Lc @ Vt[:rank].T) * scale
    Minv = scale[:, None] * (U[:, :rank].T @ Lo.T)
    bal = StateSpaceModel(Minv @ model.A @ M, Minv @ model.B, model.C @ M, model.D,
                          input_labels=model.input_labels)
    return BalancedRealization(bal, M, Minv, hsv, rank, rank == model.n, notes)


def select_order(hsv, eps):
    """Largest ``i`` with ``sigma_i > eps`` (1-based), at least 1.

    The order is widened to cover a cluster of (nearly) equal values at
    the cut, and never includes directions below the minimality threshold.
    """
    hsv = np.asarray(hsv, dtype=float)
    if hsv.size == 0:
        raise ValueError("hsv is empty")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    n = hsv.size
    nr = max(int(np.count_nonzero(hsv > eps)), 1)
    while nr < n and abs(hsv[nr - 1] - hsv[nr]) < CLUSTER_RTOL * hsv[0]:
        nr += 1
    rank = max(int(np.count_nonzero(hsv >= MINIMALITY_RTOL * hsv[0])), 1)
    return min(nr, rank)


def error_bound(hsv, nr):
    """A-priori H-infinity bound ``2 * sum(sigma_{nr+1..n})``."""
    hsv = np.asarray(hsv, dtype=float)
    if not 1 <= nr <= hsv.size:
        raise ValueError(f"nr={nr} outside 1..{hsv.size}")
    return float(2.0 * hsv[nr:].sum())


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Truncated model ``(Ar, Br, Cr, Dr)`` of order ``nr``."""

    Ar: np.ndarray
    Br: np.ndarray
    Cr: np.ndarray
    Dr: np.ndarray
    nr: int
    bound: float
    hsv: np.ndarray = None
    full_order: int = 0
    model: StateSpaceModel = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "model", StateSpaceModel(self.Ar, self.Br, self.Cr, self.Dr))


def truncate(bal, model, nr):
    """Reduce a balanced realization to order ``nr``, keeping the static gain.

    The discarded balanced states are residualized (their derivatives set
    to zero) rather than dropped::

        Ar = A11 - A12 A22^{-1} A21     Br = B1 - A12 A22^{-1} B2
        Cr = C1 - C2 A22^{-1} A21       Dr = D  - C2 A22^{-1} B2

    so ``-Cr Ar^{-1} Br + Dr`` equals the static gain of ``model`` and the
    twice-the-tail bound on the H-infinity error still holds.
    """
    if not 1 <= nr <= bal.rank:
        raise ValueError(f"nr={nr} outside 1..{bal.rank}")
    b = bal.balanced
    A11, A12 = b.A[:nr, :nr], b.A[:nr, nr:]
    A21, A22 = b.A[nr:, :nr], b.A[nr:, nr:]
    B1, B2 = b.B[:nr], b.B[nr:]
    C1, C2 = b.C[:, :nr], b.C[:, nr:]
    if nr < bal.rank:
        try:
            X = np.linalg.solve(A22, np.hstack([A21, B2]))
        except np.linalg.LinAlgError as exc:
            raise SplitError(f"discarded block is singular at nr={nr}; choose another order") from exc
        Ar = A11 - A12 @ X[:, :nr]
        Br = B1 - A12 @ X[:, nr:]
        Cr = C1 - C2 @ X[:, :nr]
        Dr = b.D - C2 @ X[:, nr:]
    else:
        Ar, Br, Cr, Dr = A11.copy(), B1.copy(), C1.copy(), b.D.copy()
    if not is_stable(Ar):
        raise SplitError(f"reduced {nr}x{nr} system is unstable; choose another order")
    if bal.rank < model.n:
        # non-minimal directions were never balanced; restore their static contribution
        Dr = Dr + (dc_gain(model) - (Dr - Cr @ np.linalg.solve(Ar, Br)))
    return ReducedModel(Ar, Br, Cr, Dr, nr, error_bound(bal.hsv, nr), bal.hsv, model.n)


def reduce(model, eps, input_scale=None):
    """Balance, pick the order for tolerance ``eps`` and truncate.

    Parameters
    ----------
    model : StateSpaceModel
    eps : float
        Hankel singular values at or below ``eps`` are discarded.
    input_scale : array_like, optional
        Nominal magnitude of each input. Balancing is done on the model
        driven by ``u / input_scale`` so that inputs in different units
        (K, W/m2, W) weigh alike; the returned ``Br``/``Dr`` act on the
        unscaled inputs again. Singular values and the bound then refer to
        the scaled inputs.
    """
    if input_scale is not None:
        S = np.asarray(input_scale, dtype=float)
        if S.shape != (model.m,) or np.any(S <= 0):
            raise ValueError("input_scale must hold one positive value per input")
        red = reduce(StateSpaceModel(model.A, model.B * S, model.C, model.D * S), eps)
        return ReducedModel(red.Ar, red.Br / S, red.Cr, red.Dr / S, red.nr, red.bound,
                            red.hsv, red.full_order)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MinimalityWarning)
        bal = balance(model)
    nr = select_order(bal.hsv, eps)
    return truncate(bal, model, nr)
