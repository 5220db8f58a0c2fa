"""Continuous-time state-space models and implicit Euler simulation."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, StabilityError, StepError

DEFAULT_DT = 3600.0


def _matrix(name, value):
    arr = np.array(value, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Linear model ``dx/dt = A x + B u``, ``y = C x + D u``.

    Matrices are stored read-only, so a model can be shared freely between
    simulation runs. ``state_labels`` and ``input_labels`` are optional
    names used in reports.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    _steppers: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        a = _matrix("A", self.A)
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionError(f"A must be square, got {a.shape}")
        b = _matrix("B", self.B) if np.size(self.B) else np.zeros((n, 0))
        if b.shape[0] != n:
            raise DimensionError(f"B has {b.shape[0]} rows, expected {n}")
        c = _matrix("C", self.C) if np.size(self.C) else np.zeros((0, n))
        if c.shape[1] != n:
            raise DimensionError(f"C has {c.shape[1]} columns, expected {n}")
        d = _matrix("D", self.D) if np.size(self.D) else np.zeros((c.shape[0], b.shape[1]))
        if d.shape != (c.shape[0], b.shape[1]):
            raise DimensionError(f"D must be {c.shape[0]}x{b.shape[1]}, got {d.shape}")
        b.setflags(write=False)
        c.setflags(write=False)
        d.setflags(write=False)
        for name, value in (("A", a), ("B", b), ("C", c), ("D", d)):
            object.__setattr__(self, name, value)
        if self.state_labels and len(self.state_labels) != n:
            raise DimensionError("state_labels length does not match the state dimension")
        if self.input_labels and len(self.input_labels) != b.shape[1]:
            raise DimensionError("input_labels length does not match the input dimension")
        object.__setattr__(self, "state_labels", tuple(self.state_labels))
        object.__setattr__(self, "input_labels", tuple(self.input_labels))

    @classmethod
    def from_dynamics(cls, A, B, **labels):
        """Model with all states as outputs (C = I, D = 0)."""
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        n = A.shape[0]
        return cls(A, B, np.eye(n), np.zeros((n, B.shape[1])), **labels)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def with_output(self, C, D=None):
        """Same dynamics, different output map."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if D is None:
            D = np.zeros((C.shape[0], self.m))
        return StateSpaceModel(self.A, self.B, C, D, self.state_labels, self.input_labels)

    def stepper(self, dt):
        """Cached implicit Euler stepper for time step ``dt``."""
        dt = float(dt)
        if dt <= 0:
            raise ValueError("dt must be positive")
        st = self._steppers.get(dt)
        if st is None:
            try:
                st = kernels.LTIStepper(self.A, self.B, self.C, self.D, dt)
            except np.linalg.LinAlgError as exc:
                raise StepError(f"I - dt*A is singular for dt={dt}") from exc
            self._steppers[dt] = st
        return st


@dataclass
class Trajectory:
    """Simulated time history; row ``j`` of each array belongs to ``times[j]``."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        k = len(self.times)
        if not (len(self.states) == len(self.outputs) == len(self.inputs) == k):
            raise DimensionError("trajectory arrays must have equal row counts")
        if k > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")


def is_stable(A):
    """True iff every eigenvalue of ``A`` has real part below ``-1e-12*||A||``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A has non-finite entries")
    if A.size == 0:
        return True
    scale = np.linalg.norm(A, 2)
    return bool(np.all(np.linalg.eigvals(A).real < -1e-12 * scale))


def dc_gain(model):
    """Static gain ``-C A^{-1} B + D``."""
    if not is_stable(model.A):
        raise StabilityError("dc_gain requires a stable A")
    return model.D - model.C @ np.linalg.solve(model.A, model.B)


def freqresp(model, omega):
    """Frequency response ``G(jw)`` for each ``w`` in ``omega``; shape (k, p, m)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n = model.n
    eye = np.eye(n)
    out = np.empty((len(omega), model.p, model.m), dtype=complex)
    for i, w in enumerate(omega):
        out[i] = model.C @ np.linalg.solve(1j * w * eye - model.A, model.B) + model.D
    return out


def steady_state(model, u):
    """Equilibrium state ``-A^{-1} B u`` for a constant input."""
    return -np.linalg.solve(model.A, model.B @ np.asarray(u, dtype=float))


def step(model, x_prev, u_now, dt=DEFAULT_DT):
    """One implicit Euler step; returns ``(x_now, y_now)``."""
    x_prev = np.asarray(x_prev, dtype=float)
    u_now = np.asarray(u_now, dtype=float)
    if x_prev.shape != (model.n,) or u_now.shape != (model.m,):
        raise DimensionError("x_prev/u_now do not match the model dimensions")
    return model.stepper(dt).step(x_prev, u_now)


def simulate(model, inputs, x0, dt=DEFAULT_DT, t0=0.0):
    """Fold :func:`step` over the rows of ``inputs`` (k x m).

    Row ``j`` of the result is the state after consuming input row ``j``.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, model.m)
    if inputs.shape[0] < 1:
        raise ValueError("simulate needs at least one input row")
    if inputs.shape[1] != model.m:
        raise DimensionError(f"inputs have {inputs.shape[1]} columns, expected {model.m}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise DimensionError("x0 does not match the state dimension")
    xs, ys = model.stepper(dt).run(inputs, x0)
    times = t0 + dt * np.arange(1, inputs.shape[0] + 1)
    return Trajectory(times, xs, ys, inputs)
