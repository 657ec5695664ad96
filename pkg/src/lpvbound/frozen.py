"""Frozen minimality, frozen equivalence, and the pointwise isomorphism map.

Two LPV models are frozen equivalent when their frozen LTI models share the
same transfer function at every admissible scheduling value.  For minimal
frozen models of equal order there is then a unique state-space similarity
T(p) per value, satisfying

    T(p) A_hat(p) T(p)^-1 = A(p),   T(p) B_hat(p) = B(p),   C(p) T(p) = C_hat(p),

computable from the reachability matrices R and R_hat of the two frozen
models as T = R R_hat' (R_hat R_hat')^-1.  The basis mismatch between two
scheduling values is M = T(p1) T(p2)^-1; its distance from the identity is
what drives the global output-error envelope.

Suprema over the box are certified on the box grid only; every report
records the grid resolution used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GridFamily,
    LpvModel,
    LtiModel,
    SchedulingSignal,
)

__all__ = [
    "MinimalityError",
    "EquivalenceError",
    "FrozenIsomorphism",
    "MismatchMatrix",
    "MinimalityReport",
    "EquivalenceReport",
    "reachability_matrix",
    "observability_matrix",
    "markov_parameters",
    "is_frozen_minimal",
    "are_frozen_equivalent",
    "isomorphism_between",
    "frozen_isomorphism",
    "mismatch",
    "check_lpv_isomorphism",
    "make_frozen_equivalent",
    "DEFAULT_RANK_TOL",
    "DEFAULT_RESIDUAL_TOL",
]

# Rank decisions are relative to the largest singular value of the matrix
# under test; similarity residuals are relative to max(1, ||T||).
DEFAULT_RANK_TOL = 1e-8
DEFAULT_RESIDUAL_TOL = 1e-6


class MinimalityError(RuntimeError):
    """A frozen model failed a controllability/observability rank test."""


class EquivalenceError(RuntimeError):
    """Two frozen models are not input-output equivalent within tolerance."""


def reachability_matrix(model: LtiModel) -> np.ndarray:
    """[B, AB, ..., A^(n_x-1) B], shape (n_x, n_x*n_u)."""
    blocks = [model.B]
    for _ in range(model.n_x - 1):
        blocks.append(model.A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(model: LtiModel) -> np.ndarray:
    """[C; CA; ...; C A^(n_x-1)], shape (n_x*n_y, n_x)."""
    blocks = [model.C]
    for _ in range(model.n_x - 1):
        blocks.append(blocks[-1] @ model.A)
    return np.vstack(blocks)


def markov_parameters(model: LtiModel, count: int) -> np.ndarray:
    """C A^k B for k = 0..count-1, shape (count, n_y, n_u)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    out = np.empty((count, model.n_y, model.n_u))
    CAk = model.C
    for k in range(count):
        out[k] = CAk @ model.B
        CAk = CAk @ model.A
    return out


@dataclass(frozen=True)
class MinimalityReport:
    minimal: bool
    worst_p: np.ndarray
    worst_sigma_min: float
    grid_resolution: int
    rank_tol: float

    def as_dict(self) -> dict:
        return {
            "minimal": self.minimal,
            "worst_p": self.worst_p.tolist(),
            "worst_sigma_min": self.worst_sigma_min,
            "grid_resolution": self.grid_resolution,
            "tolerances": {"rank_tol": self.rank_tol},
        }


def is_frozen_minimal(sigma: LpvModel, rank_tol: float = DEFAULT_RANK_TOL) -> MinimalityReport:
    """Grid check that every frozen model is controllable and observable.

    At each grid node both the reachability and the observability matrix
    must have smallest singular value above rank_tol times their largest
    one.  Reports the node with the smallest margin rather than erroring.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    worst_margin = np.inf
    worst_p = None
    worst_sigma = np.inf
    for p in sigma.box.grid_points():
        frozen = sigma.freeze(p)
        margin_here = np.inf
        sigma_here = np.inf
        for mat in (reachability_matrix(frozen), observability_matrix(frozen)):
            s = np.linalg.svd(mat, compute_uv=False)
            margin = s[-1] - rank_tol * s[0]
            if margin < margin_here:
                margin_here = margin
                sigma_here = s[-1]
        if margin_here < worst_margin:
            worst_margin = margin_here
            worst_p = p
            worst_sigma = sigma_here
    return MinimalityReport(
        minimal=bool(worst_margin > 0),
        worst_p=np.asarray(worst_p),
        worst_sigma_min=float(worst_sigma),
        grid_resolution=sigma.box.grid_points_per_axis,
        rank_tol=rank_tol,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    worst_p: np.ndarray
    worst_residual: float
    grid_resolution: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "worst_p": self.worst_p.tolist(),
            "worst_residual": self.worst_residual,
            "grid_resolution": self.grid_resolution,
            "tolerances": {"markov_tol": self.tol},
        }


def are_frozen_equivalent(s1: LpvModel, s2: LpvModel, tol: float = 1e-8) -> EquivalenceReport:
    """Compare the first 2*n_x Markov parameters of both frozen models per grid node.

    Equal Markov parameters up to index 2*n_x - 1 certify equal transfer
    functions for minimal models of equal order, so this is a finite, exact
    certificate rather than a rational-function comparison.
    """
    if (s1.n_x, s1.n_u, s1.n_y, s1.n_p) != (s2.n_x, s2.n_u, s2.n_y, s2.n_p):
        raise ValueError("models must share all dimensions")
    count = 2 * s1.n_x
    worst = -1.0
    worst_p = None
    for p in s1.box.grid_points():
        m1 = markov_parameters(s1.freeze(p), count)
        m2 = markov_parameters(s2.freeze(p), count)
        residual = float(np.max(np.abs(m1 - m2)))
        if residual > worst:
            worst = residual
            worst_p = p
    return EquivalenceReport(
        equivalent=bool(worst <= tol),
        worst_p=np.asarray(worst_p),
        worst_residual=worst,
        grid_resolution=s1.box.grid_points_per_axis,
        tol=tol,
    )


@dataclass(frozen=True)
class FrozenIsomorphism:
    """State-space similarity from one frozen model's basis to another's."""

    p: np.ndarray
    T: np.ndarray
    condition_number: float
    residual: float


@dataclass(frozen=True)
class MismatchMatrix:
    """Basis mismatch M = T(p1) T(p2)^-1 and its distance from identity."""

    p1: np.ndarray
    p2: np.ndarray
    M: np.ndarray
    deviation: float


def isomorphism_between(model_hat: LtiModel, model: LtiModel,
                        rank_tol: float = DEFAULT_RANK_TOL,
                        residual_tol: float | None = DEFAULT_RESIDUAL_TOL,
                        ) -> tuple[np.ndarray, float, float]:
    """Similarity T with T A_hat T^-1 = A, T B_hat = B, C T = C_hat.

    Solves T R_hat = R in the least-squares sense via orthogonal
    factorization, which equals the Gram-inverse formula in exact
    arithmetic but behaves better near rank deficiency.  Returns
    (T, condition number of T, similarity residual).

    Raises MinimalityError when R_hat is numerically rank deficient or the
    computed T is singular, and EquivalenceError when the similarity
    residual exceeds residual_tol (pass residual_tol=None to skip that
    check and let the caller judge the returned residual).
    """
    R = reachability_matrix(model)
    R_hat = reachability_matrix(model_hat)
    s_hat = np.linalg.svd(R_hat, compute_uv=False)
    if s_hat[0] == 0.0 or s_hat[-1] < rank_tol * s_hat[0]:
        raise MinimalityError(
            f"reachability matrix numerically rank deficient "
            f"(sigma_min/sigma_max = {s_hat[-1] / max(s_hat[0], 1e-300):.3e})"
        )
    T = np.linalg.lstsq(R_hat.T, R.T, rcond=None)[0].T
    sT = np.linalg.svd(T, compute_uv=False)
    if sT[-1] <= 1e-14 * sT[0]:
        raise MinimalityError("computed similarity is numerically singular")
    cond = float(sT[0] / sT[-1])
    scale = max(1.0, float(sT[0]))
    residual = max(
        float(np.linalg.norm(T @ model_hat.A - model.A @ T, 2)),
        float(np.linalg.norm(T @ model_hat.B - model.B, 2)),
        float(np.linalg.norm(model.C @ T - model_hat.C, 2)),
    ) / scale
    if residual_tol is not None and residual > residual_tol:
        raise EquivalenceError(
            f"similarity residual {residual:.3e} exceeds tolerance {residual_tol:.1e}; "
            "models are not input-output equivalent at this point"
        )
    return T, cond, residual


def frozen_isomorphism(s_hat: LpvModel, s: LpvModel, p,
                       rank_tol: float = DEFAULT_RANK_TOL,
                       residual_tol: float | None = DEFAULT_RESIDUAL_TOL,
                       ) -> FrozenIsomorphism:
    """The unique similarity linking the frozen models of s_hat and s at p."""
    p = s.box.require(p)
    T, cond, residual = isomorphism_between(
        s_hat.freeze(p), s.freeze(p), rank_tol=rank_tol, residual_tol=residual_tol
    )
    return FrozenIsomorphism(p=p, T=T, condition_number=cond, residual=residual)


def mismatch(s_hat: LpvModel, s: LpvModel, p1, p2,
             rank_tol: float = DEFAULT_RANK_TOL,
             residual_tol: float | None = DEFAULT_RESIDUAL_TOL) -> MismatchMatrix:
    """Basis mismatch M = T(p1) T(p2)^-1 between two scheduling values."""
    iso1 = frozen_isomorphism(s_hat, s, p1, rank_tol, residual_tol)
    iso2 = frozen_isomorphism(s_hat, s, p2, rank_tol, residual_tol)
    M = np.linalg.solve(iso2.T.T, iso1.T.T).T  # T(p1) @ inv(T(p2))
    deviation = float(np.linalg.norm(np.eye(M.shape[0]) - M, 2))
    return MismatchMatrix(p1=iso1.p, p2=iso2.p, M=M, deviation=deviation)


def check_lpv_isomorphism(s_hat: LpvModel, s: LpvModel, p: SchedulingSignal,
                          tol: float = 1e-8) -> bool:
    """Whether the frozen similarity map acts as a time-varying isomorphism along p.

    Checks A(p(t)) T(p(t)) = T(p(t+1)) A_hat(p(t)) for every step of the
    signal.  This holds for constant schedules by construction but fails in
    general when T genuinely depends on p, which is exactly why frozen
    equivalence does not imply equal global behavior.
    """
    isos = [frozen_isomorphism(s_hat, s, p.samples[t]) for t in range(len(p))]
    for t in range(p.horizon):
        pt = p.samples[t]
        lhs = s.A(pt) @ isos[t].T
        rhs = isos[t + 1].T @ s_hat.A(pt)
        scale = max(1.0, float(np.linalg.norm(isos[t].T, 2)))
        if np.linalg.norm(lhs - rhs, 2) / scale > tol:
            return False
    return True


def make_frozen_equivalent(s: LpvModel, T_family) -> LpvModel:
    """Synthesize a partner model frozen-equivalent to s at every grid node.

    Applies the state similarity T(p) pointwise on the box grid,

        A_hat = T^-1 A T,   B_hat = T^-1 B,   C_hat = C T,

    and wraps the node matrices as grid-interpolated families.  The result
    is exactly equivalent to s at the nodes; between nodes interpolation
    only approximates the similarity-transformed matrices.
    """
    axes = s.box.grid_axes()
    grid_shape = tuple(a.size for a in axes)
    n_x, n_u, n_y = s.n_x, s.n_u, s.n_y
    A_vals = np.empty(grid_shape + (n_x, n_x))
    B_vals = np.empty(grid_shape + (n_x, n_u))
    C_vals = np.empty(grid_shape + (n_y, n_x))
    for idx in np.ndindex(grid_shape):
        p = np.array([axes[i][idx[i]] for i in range(len(axes))])
        T = T_family(p)
        sT = np.linalg.svd(T, compute_uv=False)
        if sT[-1] <= 1e-12 * sT[0]:
            raise ValueError(f"similarity family is singular at grid node {p}")
        frozen = s.freeze(p)
        A_vals[idx] = np.linalg.solve(T, frozen.A @ T)
        B_vals[idx] = np.linalg.solve(T, frozen.B)
        C_vals[idx] = frozen.C @ T
    return LpvModel(
        GridFamily(axes, A_vals),
        GridFamily(axes, B_vals),
        GridFamily(axes, C_vals),
        s.box,
    )
