"""Quadratic stability certificates and contraction normalization.

A model family A(.) is quadratically stable when one positive definite P
satisfies A(p)' P A(p) - P < 0 over the whole box.  Factoring P = S' S and
changing state coordinates by S makes every A(p) a strict contraction in
the Euclidean norm:

    alpha = max_p || S A(p) S^-1 ||_2 < 1.

alpha bounds the decay rate of the autonomous dynamics; together with the
worst-case input gain

    mu1 = max_p || S_hat B_hat(p) ||_2 / (1 - alpha_hat)

(a geometric-series bound on the zero-initial-state state norm per unit of
peak input) it feeds the output-error envelope.

No semidefinite-programming solver here: stability is established by the
trivial P = I test or a midpoint Lyapunov heuristic, always followed by a
full grid verification.  All box suprema are grid maxima and carry the
grid resolution used.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import GridFamily, LpvModel, SchedulingBox

__all__ = [
    "StabilityError",
    "QuadStabCertificate",
    "ContractionData",
    "NormalizedModel",
    "verify_quadratic_stability",
    "find_common_lyapunov",
    "normalize_contractive",
    "state_gain_mu1",
    "contraction_for_pair",
    "grid_sup_norm",
    "refined_sup_probe",
]


class StabilityError(RuntimeError):
    """Quadratic stability could not be certified."""


def grid_sup_norm(sigma: LpvModel, which: str = "A") -> float:
    """Supremum of the induced 2-norm of one matrix family over the box.

    Exact for both family representations, not just a grid approximation:
    the norm of an affine family is convex in p, so its maximum sits at a
    box vertex (which the grid contains), and interpolated families take
    convex combinations of their node matrices, so their maximum sits at a
    node.  Grid nodes are swept as well for the margin diagnostics.
    """
    fam = {"A": sigma.A_family, "B": sigma.B_family, "C": sigma.C_family}[which]
    worst = max(
        float(np.linalg.norm(fam(p), 2)) for p in sigma.box.grid_points()
    )
    if isinstance(fam, GridFamily):
        flat = fam.values.reshape(-1, fam.rows, fam.cols)
        worst = max(worst, float(np.linalg.svd(flat, compute_uv=False)[..., 0].max()))
    return worst


def refined_sup_probe(sigma: LpvModel, which: str = "A", rel_tol: float = 0.01):
    """Re-evaluate a family supremum at doubled grid resolution.

    Warns when the refined value grows by more than rel_tol, which would
    expose discretization conservatism.  For the two current family
    representations the coarse value is already exact (see grid_sup_norm),
    so this is a tripwire for future representations and for sanity checks.
    Returns (coarse, refined).
    """
    coarse = grid_sup_norm(sigma, which)
    finer_box = SchedulingBox(
        sigma.box.p_min, sigma.box.p_max, 2 * sigma.box.grid_points_per_axis
    )
    finer = LpvModel(sigma.A_family, sigma.B_family, sigma.C_family, finer_box)
    refined = grid_sup_norm(finer, which)
    if refined > coarse * (1.0 + rel_tol):
        warnings.warn(
            f"grid supremum of {which} grew from {coarse:.6g} to {refined:.6g} "
            "under refinement; increase LPV_GRID_POINTS",
            RuntimeWarning,
            stacklevel=2,
        )
    return coarse, refined


@dataclass(frozen=True)
class QuadStabCertificate:
    """Verified common Lyapunov matrix P with Cholesky-type factor P = S' S."""

    P: np.ndarray
    S: np.ndarray
    margin: float
    grid_resolution: int

    def as_dict(self) -> dict:
        return {
            "P": self.P.tolist(),
            "S": self.S.tolist(),
            "margin": self.margin,
            "grid_resolution": self.grid_resolution,
        }


def verify_quadratic_stability(sigma: LpvModel, P) -> QuadStabCertificate:
    """Check P > 0 and P - A(p)' P A(p) > 0 at every grid node.

    The margin is the smallest eigenvalue of P - A(p)' P A(p) over the
    grid; a nonpositive margin refuses the certificate.  S is the upper
    triangular factor with P = S' S.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (sigma.n_x, sigma.n_x):
        raise ValueError("P has wrong shape")
    if np.linalg.norm(P - P.T) > 1e-10 * max(1.0, np.linalg.norm(P)):
        raise StabilityError("P is not symmetric")
    P = 0.5 * (P + P.T)
    eigs = np.linalg.eigvalsh(P)
    if eigs[0] <= 0:
        raise StabilityError(f"P is not positive definite (min eig {eigs[0]:.3e})")
    margin = np.inf
    for p in sigma.box.grid_points():
        A = sigma.A(p)
        gap = np.linalg.eigvalsh(P - A.T @ P @ A)[0]
        margin = min(margin, float(gap))
    if margin <= 0:
        raise StabilityError(
            f"Lyapunov decrease fails on the grid (worst margin {margin:.3e})"
        )
    S = np.linalg.cholesky(P).T  # upper triangular, P = S' S
    return QuadStabCertificate(
        P=P, S=S, margin=margin, grid_resolution=sigma.box.grid_points_per_axis
    )


def find_common_lyapunov(sigma: LpvModel) -> np.ndarray | None:
    """Search for a common Lyapunov matrix; None when the search fails.

    Cheap first: if the family is already contractive in the Euclidean
    norm, P = I works.  Otherwise solve the discrete Lyapunov equation
    A_mid' P A_mid - P = -I at the box midpoint, rescale so the smallest
    eigenvalue is one, and keep P only if the grid verification accepts it.
    """
    if grid_sup_norm(sigma, "A") < 1.0:
        return np.eye(sigma.n_x)
    A_mid = sigma.A(sigma.box.midpoint())
    if np.max(np.abs(np.linalg.eigvals(A_mid))) >= 1.0:
        return None
    P = scipy.linalg.solve_discrete_lyapunov(A_mid.T, np.eye(sigma.n_x))
    P = 0.5 * (P + P.T)
    P /= np.linalg.eigvalsh(P)[0]
    try:
        verify_quadratic_stability(sigma, P)
    except StabilityError:
        return None
    return P


@dataclass(frozen=True)
class NormalizedModel:
    model: LpvModel
    S: np.ndarray
    alpha: float


def normalize_contractive(sigma: LpvModel, cert: QuadStabCertificate) -> NormalizedModel:
    """Similarity-transform sigma by the certificate factor S.

    The transformed family (S A S^-1, S B, C S^-1) is contractive with
    alpha = max grid ||S A(p) S^-1||_2 < 1, and the zero-initial-state
    input-output map is unchanged by the state similarity.
    """
    transformed = sigma.transform(cert.S)
    alpha = grid_sup_norm(transformed, "A")
    if alpha >= 1.0:
        raise StabilityError(
            f"normalized family is not contractive on the grid (alpha = {alpha:.6f})"
        )
    return NormalizedModel(model=transformed, S=cert.S, alpha=alpha)


def state_gain_mu1(sigma_hat: LpvModel, alpha_hat: float) -> float:
    """Peak state gain of sigma_hat per unit of peak input, from zero state.

    With every ||A_hat(p)|| <= alpha_hat < 1, iterating the state recursion
    gives ||x(t)|| <= sum_k alpha_hat^k * K_B * ||u||_inf, hence the
    geometric-series constant K_B / (1 - alpha_hat).  One admissible
    constant, possibly conservative.
    """
    if not 0.0 <= alpha_hat < 1.0:
        raise ValueError(f"alpha_hat must be in [0, 1), got {alpha_hat}")
    sup_A = grid_sup_norm(sigma_hat, "A")
    if sup_A > alpha_hat + 1e-12:
        raise ValueError(
            f"alpha_hat={alpha_hat} does not dominate the grid norm {sup_A} of A_hat"
        )
    K_B = grid_sup_norm(sigma_hat, "B")
    return K_B / (1.0 - alpha_hat)


@dataclass(frozen=True)
class ContractionData:
    """Contraction constants of a certified model pair.

    S and S_hat are the normalizing similarities (identity when the raw
    families are already contractive); alpha/alpha_hat are the grid
    suprema of the normalized A-families, and mu1 the state gain of the
    normalized second model.
    """

    alpha: float
    alpha_hat: float
    mu1: float
    S: np.ndarray
    S_hat: np.ndarray
    grid_resolution: int

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "alpha_hat": self.alpha_hat,
            "mu1": self.mu1,
            "S": self.S.tolist(),
            "S_hat": self.S_hat.tolist(),
            "grid_resolution": self.grid_resolution,
        }


def _normalize_single(sigma: LpvModel) -> NormalizedModel:
    sup = grid_sup_norm(sigma, "A")
    if sup < 1.0:
        return NormalizedModel(model=sigma, S=np.eye(sigma.n_x), alpha=sup)
    P = find_common_lyapunov(sigma)
    if P is None:
        raise StabilityError("no common Lyapunov matrix found for the model")
    cert = verify_quadratic_stability(sigma, P)
    return normalize_contractive(sigma, cert)


def contraction_for_pair(s: LpvModel, s_hat: LpvModel) -> ContractionData:
    """Certify both models and assemble the contraction constants.

    Each model is normalized independently (S = I whenever it is already
    contractive in the Euclidean norm).
    """
    norm_s = _normalize_single(s)
    norm_hat = _normalize_single(s_hat)
    mu1 = state_gain_mu1(norm_hat.model, norm_hat.alpha)
    return ContractionData(
        alpha=norm_s.alpha,
        alpha_hat=norm_hat.alpha,
        mu1=mu1,
        S=norm_s.S,
        S_hat=norm_hat.S,
        grid_resolution=s.box.grid_points_per_axis,
    )
