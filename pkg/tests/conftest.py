"""Shared fixtures: the builtin example pair plus randomized model generators.

Synthesized pairs are exactly frozen-equivalent at the box grid nodes (the
similarity is applied node by node), so randomized schedules draw their
values from those nodes; on that finite scheduling set the pair is exactly
equivalent and every grid supremum is an exact supremum.
"""

import numpy as np
import pytest

from lpvbound.cli import builtin_example_model, builtin_example_pair
from lpvbound.core import (
    AffineFamily,
    InputSignal,
    LpvModel,
    SchedulingBox,
    SchedulingSignal,
    constant_family,
    signal_piecewise_constant,
)
from lpvbound.frozen import is_frozen_minimal, make_frozen_equivalent
from lpvbound.stability import grid_sup_norm


@pytest.fixture(scope="session")
def example_model():
    return builtin_example_model()

@pytest.fixture(scope="session")
def example_pair():
    sigma, sigma_hat, result = builtin_example_pair()
    return sigma, sigma_hat, result


def random_affine_family(rng, rows, cols, n_p):
    return AffineFamily([rng.standard_normal((rows, cols)) for _ in range(n_p + 1)])


def _rescale_affine(fam, box, target):
    worst = max(np.linalg.norm(fam(p), 2) for p in box.grid_points())
    scale = target / worst
    return AffineFamily([scale * M for M in fam.coefficients])


def random_contractive_model(rng, n_x, n_p=1, sup_norm=0.8, n_u=1, n_y=1,
                             box=None, grid_points=None):
    """Random affine model with max grid ||A(p)|| equal to sup_norm, frozen-minimal."""
    if box is None:
        box = SchedulingBox([0.0] * n_p, [1.0] * n_p, grid_points or 11)
    for _ in range(20):
        A = _rescale_affine(random_affine_family(rng, n_x, n_x, n_p), box, sup_norm)
        B = random_affine_family(rng, n_x, n_u, n_p)
        C = random_affine_family(rng, n_y, n_x, n_p)
        model = LpvModel(A, B, C, box)
        if is_frozen_minimal(model).minimal:
            return model
    raise RuntimeError("could not draw a frozen-minimal model")


def random_smooth_similarity(rng, n_x, box, strength=0.05):
    """T(p) = I + small affine perturbation, kept well conditioned on the box."""
    pert = _rescale_affine(random_affine_family(rng, n_x, n_x, box.n_p), box, strength)
    coeffs = list(pert.coefficients)
    coeffs[0] = coeffs[0] + np.eye(n_x)
    return AffineFamily(coeffs)


def random_equivalent_pair(rng, n_x, n_p=1, sup_norm=0.8, strength=0.05,
                           grid_points=None):
    """Model plus a node-exact frozen-equivalent partner in a mismatched basis.

    The perturbation strength keeps the partner contractive as well, so no
    Lyapunov renormalization is needed and both contraction factors come
    straight from grid norms.
    """
    sigma = random_contractive_model(rng, n_x, n_p, sup_norm,
                                     grid_points=grid_points)
    T_fam = random_smooth_similarity(rng, n_x, sigma.box, strength)
    sigma_hat = make_frozen_equivalent(sigma, T_fam)
    assert grid_sup_norm(sigma_hat, "A") < 1.0
    return sigma, sigma_hat, T_fam


def random_node_schedule(rng, box, delta, horizon):
    """Dwell-delta schedule whose values are drawn from the box grid nodes."""
    nodes = box.grid_points()
    n_blocks = (horizon + delta) // delta
    values = nodes[rng.integers(0, nodes.shape[0], size=n_blocks)]
    return signal_piecewise_constant(box, delta, values, horizon)


def random_bounded_input(rng, n_u, horizon, linf=1.0):
    samples = rng.standard_normal((horizon + 1, n_u))
    peak = np.linalg.norm(samples, axis=1).max()
    return InputSignal(samples * (linf / peak))


def constant_lpv(A, B, C, box):
    return LpvModel(
        constant_family(np.asarray(A, dtype=float), box.n_p),
        constant_family(np.asarray(B, dtype=float), box.n_p),
        constant_family(np.asarray(C, dtype=float), box.n_p),
        box,
    )
