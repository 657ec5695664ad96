"""Discrete-time LPV and LTI state-space models, scheduling signals, simulation.

Models are of the form

    x(t+1) = A(p(t)) x(t) + B(p(t)) u(t)
    y(t)   = C(p(t)) x(t)

where the scheduling value p(t) lives in a compact box.  Fixing p to a
constant value gives the frozen LTI model (A(p), B(p), C(p)).  All signals
here are finite-horizon sequences indexed t = 0..T; suprema over time in
any derived quantity therefore become maxima over the horizon.

Matrix-valued parameter maps come in two flavours: affine in p, or
multilinear interpolation of matrices stored on a rectangular grid.  Both
are continuous on the box.  Out-of-box scheduling values are hard errors,
never clamped.

All types are immutable after construction and every operation is a pure
function, so everything is safe to share across threads.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OutOfDomainError",
    "SchedulingBox",
    "MatrixFamily",
    "AffineFamily",
    "GridFamily",
    "constant_family",
    "eval_family",
    "LtiModel",
    "LpvModel",
    "SchedulingSignal",
    "InputSignal",
    "Trajectory",
    "freeze",
    "simulate_lti",
    "simulate_lpv",
    "io_map",
    "signal_piecewise_constant",
    "signal_sinusoid",
    "classify_signal",
    "in_dwell_class",
    "default_grid_points",
]

# Slack for floating-point membership tests (CSV round-trips etc.); this is
# noise tolerance, not clamping.
_BOX_EPS = 1e-12

_DEFAULT_GRID_POINTS = 31


class OutOfDomainError(ValueError):
    """A scheduling value fell outside the admissible parameter box."""


def default_grid_points() -> int:
    """Grid resolution per scheduling axis; override with LPV_GRID_POINTS."""
    return int(os.environ.get("LPV_GRID_POINTS", _DEFAULT_GRID_POINTS))


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    return M


def _freeze_array(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class SchedulingBox:
    """Compact axis-aligned box of admissible scheduling values.

    Carries the grid resolution used whenever a supremum over the box has
    to be replaced by a maximum over finitely many points.
    """

    def __init__(self, p_min, p_max, grid_points_per_axis: int | None = None):
        self.p_min = _freeze_array(np.atleast_1d(p_min))
        self.p_max = _freeze_array(np.atleast_1d(p_max))
        if self.p_min.shape != self.p_max.shape or self.p_min.ndim != 1:
            raise ValueError("p_min and p_max must be vectors of equal length")
        if np.any(self.p_min > self.p_max):
            raise ValueError("box requires p_min[i] <= p_max[i]")
        if grid_points_per_axis is None:
            grid_points_per_axis = default_grid_points()
        if grid_points_per_axis < 2:
            raise ValueError("grid_points_per_axis must be >= 2")
        self.grid_points_per_axis = int(grid_points_per_axis)

    @property
    def n_p(self) -> int:
        return self.p_min.size

    def contains(self, p) -> bool:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.shape != self.p_min.shape:
            return False
        return bool(
            np.all(p >= self.p_min - _BOX_EPS) and np.all(p <= self.p_max + _BOX_EPS)
        )

    def require(self, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if not self.contains(p):
            raise OutOfDomainError(
                f"scheduling value {p} outside box [{self.p_min}, {self.p_max}]"
            )
        return p

    def grid_axes(self) -> list[np.ndarray]:
        """Per-axis grid nodes, endpoints included."""
        return [
            np.linspace(self.p_min[i], self.p_max[i], self.grid_points_per_axis)
            for i in range(self.n_p)
        ]

    def grid_points(self) -> np.ndarray:
        """All grid nodes as an (N, n_p) array (Cartesian product of axes)."""
        axes = self.grid_axes()
        if self.n_p == 1:
            return axes[0].reshape(-1, 1)
        return np.array(list(itertools.product(*axes)))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p_min + self.p_max)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.p_max - self.p_min))

    def __repr__(self) -> str:
        return (
            f"SchedulingBox(p_min={self.p_min.tolist()}, p_max={self.p_max.tolist()}, "
            f"grid_points_per_axis={self.grid_points_per_axis})"
        )


class MatrixFamily:
    """Continuous map p -> matrix over a scheduling box.

    Subclasses implement ``_eval``.  Calling the family evaluates it; the
    family checks its own intrinsic domain (grid families are only defined
    on the span of their nodes).
    """

    rows: int
    cols: int
    n_p: int

    def _eval(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.shape != (self.n_p,):
            raise ValueError(f"scheduling value has shape {p.shape}, expected ({self.n_p},)")
        return self._eval(p)

    def transform(self, left: np.ndarray | None = None, right: np.ndarray | None = None):
        """Family evaluating to left @ M(p) @ right.

        Exact for both variants: matrix multiplication is linear, so applying
        it to the stored coefficients/nodes equals applying it pointwise.
        """
        raise NotImplementedError


class AffineFamily(MatrixFamily):
    """M(p) = M0 + p_1 M_1 + ... + p_np M_np."""

    def __init__(self, coefficients):
        mats = [_as_matrix(M) for M in coefficients]
        if not mats:
            raise ValueError("need at least the constant coefficient M0")
        shape = mats[0].shape
        if any(M.shape != shape for M in mats):
            raise ValueError("all coefficient matrices must share one shape")
        self.coefficients = tuple(_freeze_array(M) for M in mats)
        self.rows, self.cols = shape
        self.n_p = len(mats) - 1

    def _eval(self, p: np.ndarray) -> np.ndarray:
        M = self.coefficients[0].copy()
        for pi, Mi in zip(p, self.coefficients[1:]):
            M += pi * Mi
        return M

    def transform(self, left=None, right=None) -> "AffineFamily":
        return AffineFamily([_apply_lr(M, left, right) for M in self.coefficients])

    def __repr__(self) -> str:
        return f"AffineFamily({self.rows}x{self.cols}, n_p={self.n_p})"


class GridFamily(MatrixFamily):
    """Matrices stored on a rectangular grid, evaluated by multilinear interpolation.

    ``axes`` is one strictly increasing 1-D node array per scheduling axis and
    ``values`` has shape ``(len(axes[0]), ..., len(axes[-1]), rows, cols)``.
    Evaluation outside the span of the nodes raises OutOfDomainError.
    """

    def __init__(self, axes, values):
        self.axes = tuple(_freeze_array(np.atleast_1d(a)) for a in axes)
        for a in self.axes:
            if a.ndim != 1 or a.size < 1:
                raise ValueError("each axis must be a non-empty 1-D array")
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise ValueError("axis nodes must be strictly increasing")
        values = np.asarray(values, dtype=float)
        expected_lead = tuple(a.size for a in self.axes)
        if values.ndim != len(self.axes) + 2 or values.shape[: len(self.axes)] != expected_lead:
            raise ValueError(
                f"values shape {values.shape} does not match grid {expected_lead} + (rows, cols)"
            )
        self.values = _freeze_array(values)
        self.rows, self.cols = values.shape[-2:]
        self.n_p = len(self.axes)

    def _eval(self, p: np.ndarray) -> np.ndarray:
        idx = []
        weights = []
        for pi, a in zip(p, self.axes):
            if pi < a[0] - _BOX_EPS or pi > a[-1] + _BOX_EPS:
                raise OutOfDomainError(f"value {pi} outside grid span [{a[0]}, {a[-1]}]")
            if a.size == 1:
                idx.append(0)
                weights.append(0.0)
                continue
            k = int(np.clip(np.searchsorted(a, pi, side="right") - 1, 0, a.size - 2))
            idx.append(k)
            weights.append((pi - a[k]) / (a[k + 1] - a[k]))
        M = np.zeros((self.rows, self.cols))
        for corner in itertools.product(*[(0, 1) if self.axes[i].size > 1 else (0,)
                                          for i in range(self.n_p)]):
            w = 1.0
            pos = []
            for k, wk, c in zip(idx, weights, corner):
                w *= wk if c else (1.0 - wk)
                pos.append(k + c)
            if w != 0.0:
                M += w * self.values[tuple(pos)]
        return M

    def transform(self, left=None, right=None) -> "GridFamily":
        vals = self.values
        if left is not None:
            vals = np.einsum("ij,...jk->...ik", np.asarray(left, dtype=float), vals)
        if right is not None:
            vals = np.einsum("...ij,jk->...ik", vals, np.asarray(right, dtype=float))
        return GridFamily(self.axes, vals)

    def __repr__(self) -> str:
        return f"GridFamily({self.rows}x{self.cols}, nodes={tuple(a.size for a in self.axes)})"


def _apply_lr(M, left, right):
    out = M
    if left is not None:
        out = np.asarray(left, dtype=float) @ out
    if right is not None:
        out = out @ np.asarray(right, dtype=float)
    return out


def constant_family(M, n_p: int) -> AffineFamily:
    """Wrap a constant matrix as an affine family on an n_p-dimensional box."""
    M = _as_matrix(M)
    return AffineFamily([M] + [np.zeros_like(M) for _ in range(n_p)])


def eval_family(family: MatrixFamily, p) -> np.ndarray:
    """Evaluate a matrix family at a scheduling value."""
    return family(p)


@dataclass(frozen=True)
class LtiModel:
    """Constant state-space triple (A, B, C)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze_array(_as_matrix(self.A)))
        object.__setattr__(self, "B", _freeze_array(_as_matrix(self.B)))
        object.__setattr__(self, "C", _freeze_array(_as_matrix(self.C)))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n:
            raise ValueError("B must have as many rows as A")
        if self.C.shape[1] != n:
            raise ValueError("C must have as many columns as A")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


class LpvModel:
    """Parameter-varying triple (A(.), B(.), C(.)) over a scheduling box."""

    def __init__(self, A_family: MatrixFamily, B_family: MatrixFamily,
                 C_family: MatrixFamily, box: SchedulingBox):
        n_x = A_family.rows
        if A_family.cols != n_x:
            raise ValueError("A family must be square")
        if B_family.rows != n_x:
            raise ValueError("B family must have n_x rows")
        if C_family.cols != n_x:
            raise ValueError("C family must have n_x columns")
        for fam in (A_family, B_family, C_family):
            if fam.n_p != box.n_p:
                raise ValueError("family scheduling dimension differs from box")
            if isinstance(fam, GridFamily):
                for a, lo, hi in zip(fam.axes, box.p_min, box.p_max):
                    if a[0] > lo + _BOX_EPS or a[-1] < hi - _BOX_EPS:
                        raise ValueError("grid family nodes do not cover the box")
        self.A_family = A_family
        self.B_family = B_family
        self.C_family = C_family
        self.box = box

    @property
    def n_x(self) -> int:
        return self.A_family.rows

    @property
    def n_u(self) -> int:
        return self.B_family.cols

    @property
    def n_y(self) -> int:
        return self.C_family.rows

    @property
    def n_p(self) -> int:
        return self.box.n_p

    def A(self, p) -> np.ndarray:
        return self.A_family(self.box.require(p))

    def B(self, p) -> np.ndarray:
        return self.B_family(self.box.require(p))

    def C(self, p) -> np.ndarray:
        return self.C_family(self.box.require(p))

    def freeze(self, p) -> LtiModel:
        p = self.box.require(p)
        return LtiModel(self.A_family(p), self.B_family(p), self.C_family(p))

    def transform(self, S: np.ndarray) -> "LpvModel":
        """State similarity x -> S x applied pointwise: (S A S^-1, S B, C S^-1)."""
        S = _as_matrix(S)
        S_inv = np.linalg.inv(S)
        return LpvModel(
            self.A_family.transform(S, S_inv),
            self.B_family.transform(S, None),
            self.C_family.transform(None, S_inv),
            self.box,
        )

    def __repr__(self) -> str:
        return (
            f"LpvModel(n_x={self.n_x}, n_u={self.n_u}, n_y={self.n_y}, "
            f"n_p={self.n_p}, box={self.box!r})"
        )


def freeze(sigma: LpvModel, p) -> LtiModel:
    """Frozen LTI model of sigma at the constant scheduling value p."""
    return sigma.freeze(p)


class SchedulingSignal:
    """Finite-horizon scheduling sequence p(0..T) with every sample in the box."""

    def __init__(self, samples, box: SchedulingBox):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("samples must be a non-empty (T+1, n_p) array")
        if samples.shape[1] != box.n_p:
            raise ValueError("sample dimension differs from box dimension")
        for k in range(samples.shape[0]):
            box.require(samples[k])
        self.samples = _freeze_array(samples)
        self.box = box

    @property
    def horizon(self) -> int:
        return self.samples.shape[0] - 1

    def __len__(self) -> int:
        return self.samples.shape[0]


class InputSignal:
    """Finite-horizon input sequence u(0..T) with cached norms."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("samples must be a non-empty (T+1, n_u) array")
        self.samples = _freeze_array(samples)
        norms = np.linalg.norm(samples, axis=1)
        self.linf_norm = float(norms.max())
        self.l2_norm = float(np.sqrt(np.sum(norms**2)))

    @classmethod
    def constant(cls, value, horizon: int, n_u: int | None = None) -> "InputSignal":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if n_u is not None and value.size == 1 and n_u > 1:
            value = np.full(n_u, value[0])
        return cls(np.tile(value, (horizon + 1, 1)))

    @property
    def horizon(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def n_u(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """States x(0..T+1) and outputs y(0..T) of one simulation run."""

    states: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _freeze_array(self.states))
        object.__setattr__(self, "outputs", _freeze_array(self.outputs))
        if self.states.shape[0] != self.outputs.shape[0] + 1:
            raise ValueError("need exactly one more state than outputs")


def simulate_lti(model: LtiModel, u: InputSignal, x0) -> Trajectory:
    """Run x(t+1) = A x(t) + B u(t), y(t) = C x(t) over the input horizon."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.n_x,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n_x},)")
    if u.n_u != model.n_u:
        raise ValueError("input dimension differs from model")
    T = u.horizon
    states = np.empty((T + 2, model.n_x))
    outputs = np.empty((T + 1, model.n_y))
    x = x0
    for t in range(T + 1):
        states[t] = x
        outputs[t] = model.C @ x
        x = model.A @ x + model.B @ u.samples[t]
    states[T + 1] = x
    return Trajectory(states, outputs)


def simulate_lpv(sigma: LpvModel, u: InputSignal, p: SchedulingSignal, x0) -> Trajectory:
    """Run the parameter-varying recursion sample by sample.

    Matrices are re-evaluated only when the scheduling value changes, which
    makes piecewise-constant schedules cheap.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sigma.n_x,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({sigma.n_x},)")
    if u.n_u != sigma.n_u:
        raise ValueError("input dimension differs from model")
    if u.horizon != p.horizon:
        raise ValueError(
            f"input horizon {u.horizon} differs from scheduling horizon {p.horizon}"
        )
    T = u.horizon
    states = np.empty((T + 2, sigma.n_x))
    outputs = np.empty((T + 1, sigma.n_y))
    x = x0
    prev = None
    At = Bt = Ct = None
    for t in range(T + 1):
        pt = p.samples[t]
        if prev is None or not np.array_equal(pt, prev):
            pt_checked = sigma.box.require(pt)
            At = sigma.A_family(pt_checked)
            Bt = sigma.B_family(pt_checked)
            Ct = sigma.C_family(pt_checked)
            prev = pt
        states[t] = x
        outputs[t] = Ct @ x
        x = At @ x + Bt @ u.samples[t]
    states[T + 1] = x
    return Trajectory(states, outputs)


def io_map(sigma: LpvModel, u: InputSignal, p: SchedulingSignal) -> np.ndarray:
    """Zero-initial-state response: the input-output map evaluated at (u, p)."""
    return simulate_lpv(sigma, u, p, np.zeros(sigma.n_x)).outputs


def signal_piecewise_constant(box: SchedulingBox, delta: int, values,
                              horizon: int) -> SchedulingSignal:
    """Schedule constant on consecutive blocks of length delta.

    p(k*delta + i) = values[k] for i = 0..delta-1; the result is in the
    dwell class of every divisor of delta by construction.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    n_blocks = (horizon + delta) // delta  # ceil((horizon+1)/delta)
    if values.shape[0] < n_blocks:
        raise ValueError(
            f"need at least {n_blocks} block values for horizon {horizon}, "
            f"got {values.shape[0]}"
        )
    samples = np.repeat(values[:n_blocks], delta, axis=0)[: horizon + 1]
    return SchedulingSignal(samples, box)


def signal_sinusoid(box: SchedulingBox, center, amplitude, time_scale: float,
                    horizon: int) -> SchedulingSignal:
    """Schedule p(t) = center + amplitude * sin(t / time_scale).

    The whole range center +/- |amplitude| must fit in the box; leaving the
    box is an error, never a clamp.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    amplitude = np.atleast_1d(np.asarray(amplitude, dtype=float))
    if time_scale <= 0:
        raise ValueError("time_scale must be positive")
    for extreme in (center + np.abs(amplitude), center - np.abs(amplitude)):
        if not box.contains(extreme):
            raise OutOfDomainError(
                f"sinusoid range reaches {extreme}, outside the box"
            )
    t = np.arange(horizon + 1, dtype=float)
    samples = center[None, :] + amplitude[None, :] * np.sin(t / time_scale)[:, None]
    return SchedulingSignal(samples, box)


def in_dwell_class(p: SchedulingSignal, delta: int) -> bool:
    """Whether p is constant on every block {k*delta, ..., k*delta + delta - 1}."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    s = p.samples
    for start in range(0, s.shape[0], delta):
        block = s[start : start + delta]
        if not np.all(block == block[0]):
            return False
    return True


@dataclass(frozen=True)
class SignalClass:
    max_step: float
    dwell: int


def classify_signal(p: SchedulingSignal) -> SignalClass:
    """Largest consecutive-sample jump and the largest dwell class containing p.

    The dwell search runs over 1..horizon; a constant signal therefore
    classifies with dwell equal to the horizon.
    """
    if p.horizon < 1:
        raise ValueError("need horizon >= 1 to classify a signal")
    steps = np.linalg.norm(np.diff(p.samples, axis=0), axis=1)
    max_step = float(steps.max())
    dwell = 1
    for delta in range(p.horizon, 1, -1):
        if in_dwell_class(p, delta):
            dwell = delta
            break
    return SignalClass(max_step=max_step, dwell=dwell)
