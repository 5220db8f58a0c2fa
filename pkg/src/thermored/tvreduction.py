"""Reduction strategies for zone models whose air row varies in time.

Two strategies are provided:

* conditional re-reduction: keep one reduced model of the whole zone and
  rebuild it only when the airflows drift beyond a tolerance, re-estimating
  the reduced state from the last temperatures by least squares;
* separate reduction: reduce the constant-coefficient envelope block once,
  keep the air node at full order, and couple both by fixed-point
  iteration at every step.
"""
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import qr, solve_triangular

from . import balred
from .errors import ConvergenceError, DimensionError, RankWarning
from .statespace import DEFAULT_DT, StateSpaceModel, is_stable

DEFAULT_ITERATION_EPS = 1e-3
DEFAULT_MAX_ITERATIONS = 50


def _provider(value):
    if callable(value):
        return value
    arr = np.array(value, dtype=float, ndmin=2)
    arr.setflags(write=False)
    return lambda t: arr


class PartitionedModel:
    """Zone model split into envelope states ``X1`` and air states ``X2``::

        d/dt [X1]   [A11     A12   ] [X1]   [B1   ]
             [X2] = [A21(t)  A22(t)] [X2] + [B2(t)] u

    ``A11``, ``A12`` and ``B1`` are constant. ``a21``, ``a22`` and ``b2`` may
    be constant arrays or callables of time returning arrays.
    """

    def __init__(self, A11, A12, B1, a21, a22, b2, state_labels=(), input_labels=()):
        self.A11 = np.array(A11, dtype=float, ndmin=2)
        self.A12 = np.array(A12, dtype=float, ndmin=2)
        self.B1 = np.array(B1, dtype=float, ndmin=2)
        n1 = self.A11.shape[0]
        if self.A11.shape != (n1, n1) or self.A12.shape[0] != n1 or self.B1.shape[0] != n1:
            raise DimensionError("A11, A12 and B1 must share the envelope dimension")
        self.n1 = n1
        self.n2 = self.A12.shape[1]
        self.m = self.B1.shape[1]
        self._a21 = _provider(a21)
        self._a22 = _provider(a22)
        self._b2 = _provider(b2)
        self.state_labels = tuple(state_labels)
        self.input_labels = tuple(input_labels)

    def a21(self, t=0.0):
        return self._check(self._a21(t), (self.n2, self.n1), "a21")

    def a22(self, t=0.0):
        return self._check(self._a22(t), (self.n2, self.n2), "a22")

    def b2(self, t=0.0):
        return self._check(self._b2(t), (self.n2, self.m), "b2")

    @staticmethod
    def _check(value, shape, name):
        value = np.asarray(value, dtype=float).reshape(shape) if np.size(value) == np.prod(
            shape) else np.asarray(value)
        if value.shape != shape:
            raise DimensionError(f"{name} provider returned shape {value.shape}, expected {shape}")
        return value

    @property
    def n(self):
        return self.n1 + self.n2

    def model_at(self, t=0.0):
        """Full model at time ``t`` with all nodal temperatures as outputs."""
        A = np.block([[self.A11, self.A12], [self.a21(t), self.a22(t)]])
        B = np.vstack([self.B1, self.b2(t)])
        return StateSpaceModel.from_dynamics(A, B, state_labels=self.state_labels,
                                             input_labels=self.input_labels)

    def envelope_model(self):
        """Constant envelope subsystem with extended input ``(u, X2)``."""
        B = np.hstack([self.B1, self.A12])
        labels = self.input_labels + tuple(f"X2[{i}]" for i in range(self.n2)) \
            if self.input_labels else ()
        return StateSpaceModel.from_dynamics(self.A11, B, state_labels=self.state_labels[:self.n1],
                                             input_labels=labels)


class LeastSquaresState(NamedTuple):
    x: np.ndarray
    residual: float
    rank: int


def recover_reduced_state(Cr, Dr, T_prev, u_prev):
    """Reduced state minimizing ``||Cr x - (T_prev - Dr u_prev)||_2``.

    Solved with a column-pivoted QR factorization. A rank-deficient ``Cr``
    falls back to the minimum-norm solution and emits a ``RankWarning``.
    """
    Cr = np.atleast_2d(np.asarray(Cr, dtype=float))
    Dr = np.atleast_2d(np.asarray(Dr, dtype=float))
    T_prev = np.asarray(T_prev, dtype=float)
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    p, nr = Cr.shape
    if T_prev.shape != (p,) or Dr.shape != (p, u_prev.size):
        raise DimensionError("T_prev, Dr and u_prev do not match the rows of Cr")
    rhs = T_prev - Dr @ u_prev
    Q, R, piv = qr(Cr, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(p, nr) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.count_nonzero(diag > tol))
    if rank < nr:
        warnings.warn(f"Cr has rank {rank} < {nr}; using the minimum-norm solution",
                      RankWarning, stacklevel=2)
        x = np.linalg.lstsq(Cr, rhs, rcond=None)[0]
    else:
        x = np.empty(nr)
        x[piv] = solve_triangular(R, Q.T @ rhs, check_finite=False)
    residual = float(np.linalg.norm(Cr @ x - rhs))
    return LeastSquaresState(x, residual, rank)


@dataclass
class ConditionalReducer:
    """Reduced model of a time-varying zone, rebuilt when flows drift.

    ``reference_flows`` are the flows at the last reduction; the model is
    rebuilt when any flow differs from its reference by more than
    ``flow_tolerance`` (kg/s).
    """

    eps: float
    flow_tolerance: float
    current: balred.ReducedModel = None
    reference_flows: np.ndarray = None
    x_r: np.ndarray = None
    reductions: int = 0
    last_residual: float = 0.0
    input_scale: np.ndarray = None

    def needs_update(self, flows):
        if self.current is None:
            return True
        flows = np.asarray(flows, dtype=float)
        if flows.shape != self.reference_flows.shape:
            raise DimensionError("flow vector changed length")
        if flows.size == 0:
            return False
        return bool(np.max(np.abs(flows - self.reference_flows)) > self.flow_tolerance)

    def rereduce(self, model, flows, T_prev, u_prev):
        """Rebuild the reduced model and re-estimate the reduced state."""
        red = balred.reduce(model, self.eps, self.input_scale)
        self.current = red
        self.reference_flows = np.array(flows, dtype=float)
        est = recover_reduced_state(red.Cr, red.Dr, T_prev, u_prev)
        self.x_r = est.x
        self.last_residual = est.residual
        self.reductions += 1
        return est


def conditional_step(reducer, full_model_now, flows_now, u_now, T_prev, u_prev, dt=DEFAULT_DT):
    """Advance one step, re-reducing first if the flows drifted.

    Returns ``(T_now, did_rereduce)`` where ``T_now`` are the reduced model
    outputs (all nodal temperatures).
    """
    did = reducer.needs_update(flows_now)
    if did:
        reducer.rereduce(full_model_now, flows_now, T_prev, u_prev)
    x, y = reducer.current.model.stepper(dt).step(reducer.x_r, np.asarray(u_now, dtype=float))
    reducer.x_r = x
    return y, did


@dataclass
class CoupledReducedModel:
    """Reduced envelope subsystem plus the settings of the coupling loop."""

    envelope: balred.ReducedModel
    iteration_eps: float = DEFAULT_ITERATION_EPS
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    m: int = 0
    n2: int = 1

    @property
    def feedback(self):
        """False when the envelope does not see ``X2`` at all."""
        s = slice(self.m, self.m + self.n2)
        return bool(np.any(self.envelope.Br[:, s]) or np.any(self.envelope.Dr[:, s]))


@dataclass
class CoupledState:
    """Per-run state of the separate strategy: reduced envelope and air."""

    x_r: np.ndarray
    x2: np.ndarray
    history: list = field(default_factory=list)

    @classmethod
    def from_temperatures(cls, crm, x1, x2, u):
        """Estimate the reduced envelope state from nodal temperatures."""
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        ext = np.concatenate([np.asarray(u, dtype=float), x2])
        est = recover_reduced_state(crm.envelope.Cr, crm.envelope.Dr, x1, ext)
        return cls(est.x, x2.copy())


def separate_reduce(pm, eps, iteration_eps=DEFAULT_ITERATION_EPS,
                    max_iterations=DEFAULT_MAX_ITERATIONS, input_scale=None):
    """Reduce the constant envelope subsystem once (air block kept full).

    ``input_scale`` gives nominal magnitudes for ``u``; the air temperature
    inputs of the envelope are taken at scale 1.
    """
    env = pm.envelope_model()
    if not is_stable(env.A):
        raise balred.StabilityError("envelope block A11 is not stable")
    if input_scale is not None:
        input_scale = np.concatenate([np.asarray(input_scale, dtype=float), np.ones(pm.n2)])
    red = balred.reduce(env, eps, input_scale)
    return CoupledReducedModel(red, iteration_eps, max_iterations, pm.m, pm.n2)


def coupled_step(crm, pm, t, u_now, state, dt=DEFAULT_DT):
    """One fixed-point coupled step; returns ``(X1_hat, X2, iterations)``.

    Each pass steps the reduced envelope with ``(u, X2_hat)``, rebuilds the
    envelope temperatures, steps the air equation with them and compares the
    new ``X2`` with ``X2_hat``. ``state`` is advanced in place on success.
    """
    u_now = np.asarray(u_now, dtype=float)
    env = crm.envelope.model
    stepper = env.stepper(dt)
    a21, a22, b2 = pm.a21(t), pm.a22(t), pm.b2(t)
    lhs = np.eye(pm.n2) - dt * a22
    air_rhs = state.x2 + dt * (b2 @ u_now)
    feedback = crm.feedback and np.any(a21)
    x2_hat = state.x2.copy()
    residual = np.inf
    for it in range(1, crm.max_iterations + 1):
        ext = np.concatenate([u_now, x2_hat])
        x_r, x1_hat = stepper.step(state.x_r, ext)
        x2 = np.linalg.solve(lhs, air_rhs + dt * (a21 @ x1_hat))
        residual = float(np.max(np.abs(x2_hat - x2)))
        if residual < crm.iteration_eps or not feedback:
            state.x_r = x_r
            state.x2 = x2
            return x1_hat, x2, it
        x2_hat = x2
    raise ConvergenceError(f"coupled step did not converge in {crm.max_iterations} iterations "
                           f"(residual {residual:.3g})", residual=residual, where=t)
