"""Quadratic stability certificates, contraction normalization, state gain."""

import numpy as np
import pytest

from lpvbound.core import (
    AffineFamily,
    GridFamily,
    InputSignal,
    LpvModel,
    SchedulingBox,
    SchedulingSignal,
    constant_family,
    io_map,
    simulate_lpv,
)
from lpvbound.stability import (
    StabilityError,
    contraction_for_pair,
    find_common_lyapunov,
    grid_sup_norm,
    normalize_contractive,
    state_gain_mu1,
    verify_quadratic_stability,
)

from conftest import (
    constant_lpv,
    random_bounded_input,
    random_contractive_model,
)


def box01(grid=9):
    return SchedulingBox([0.0], [1.0], grid)


def random_schedule(rng, box, horizon):
    lo, hi = box.p_min, box.p_max
    samples = lo + (hi - lo) * rng.random((horizon + 1, box.n_p))
    return SchedulingSignal(samples, box)


def test_certificate_zero_A():
    model = constant_lpv(np.zeros((2, 2)), np.ones((2, 1)), np.ones((1, 2)), box01())
    cert = verify_quadratic_stability(model, np.eye(2))
    assert np.isclose(cert.margin, 1.0)
    assert np.allclose(cert.S, np.eye(2))


def test_certificate_scalar_lyapunov():
    a = 0.6
    model = constant_lpv([[a]], [[1.0]], [[1.0]], box01())
    cert = verify_quadratic_stability(model, np.eye(1))
    assert np.isclose(cert.margin, 1.0 - a**2)


def test_certificate_example_model(example_model):
    cert = verify_quadratic_stability(example_model, np.eye(2))
    assert cert.margin > 0.0
    # the example family is contractive with spectral norm about 0.453
    assert abs(grid_sup_norm(example_model, "A") - 0.4529) < 1e-3


def test_certificate_refuses_indefinite_P(example_model):
    with pytest.raises(StabilityError):
        verify_quadratic_stability(example_model, np.diag([1.0, -1.0]))


def test_certificate_refuses_unstable_family():
    model = constant_lpv(np.diag([1.2, 0.3]), np.ones((2, 1)), np.ones((1, 2)), box01())
    with pytest.raises(StabilityError):
        verify_quadratic_stability(model, np.eye(2))


def test_find_lyapunov_example_model(example_model):
    P = find_common_lyapunov(example_model)
    assert np.allclose(P, np.eye(2))


def test_find_lyapunov_scaled_rotation():
    # 0.9 * rotation has Euclidean norm 0.9 everywhere: P = I immediately
    angles = np.linspace(0.0, 1.0, 9)
    vals = np.stack([
        0.9 * np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        for a in angles
    ])
    box = SchedulingBox([0.0], [1.0], 9)
    model = LpvModel(
        GridFamily([angles], vals),
        constant_family(np.ones((2, 1)), 1),
        constant_family(np.ones((1, 2)), 1),
        box,
    )
    P = find_common_lyapunov(model)
    assert np.allclose(P, np.eye(2))


def test_find_lyapunov_unstable_returns_none():
    # spectral radius exceeds one at the upper box edge
    A = AffineFamily([np.diag([0.5, 0.2]), np.diag([0.6, 0.0])])
    model = LpvModel(
        A, constant_family(np.ones((2, 1)), 1), constant_family(np.ones((1, 2)), 1),
        box01(),
    )
    assert find_common_lyapunov(model) is None


def test_find_lyapunov_companion_family(example_pair):
    # the identified companion-form family needs the midpoint heuristic
    _, sigma_hat, _ = example_pair
    assert grid_sup_norm(sigma_hat, "A") > 1.0
    P = find_common_lyapunov(sigma_hat)
    assert P is not None
    cert = verify_quadratic_stability(sigma_hat, P)
    norm = normalize_contractive(sigma_hat, cert)
    assert norm.alpha < 1.0


def test_normalize_identity_certificate(example_model):
    cert = verify_quadratic_stability(example_model, np.eye(2))
    norm = normalize_contractive(example_model, cert)
    assert np.allclose(norm.S, np.eye(2))
    for p in (0.1, 0.25, 0.4):
        assert np.allclose(norm.model.A(p), example_model.A(p), atol=1e-12)


def test_normalize_scalar_similarity():
    model = constant_lpv([[0.5]], [[1.0]], [[1.0]], box01())
    cert = verify_quadratic_stability(model, np.array([[4.0]]))
    norm = normalize_contractive(model, cert)
    assert np.isclose(norm.S[0, 0], 2.0)
    assert np.isclose(norm.model.A(0.3)[0, 0], 0.5)  # scalar similarity is a no-op on A
    assert np.isclose(norm.alpha, 0.5)


def test_normalize_preserves_io_random_model():
    rng = np.random.default_rng(21)
    model = random_contractive_model(rng, 3, sup_norm=0.9)
    P = find_common_lyapunov(model)
    cert = verify_quadratic_stability(model, P)
    norm = normalize_contractive(model, cert)
    for _ in range(100):
        horizon = 25
        u = random_bounded_input(rng, 1, horizon)
        p = random_schedule(rng, model.box, horizon)
        y0 = io_map(model, u, p)
        y1 = io_map(norm.model, u, p)
        assert np.max(np.abs(y0 - y1)) <= 1e-9


def test_certificate_soundness_autonomous_decay():
    rng = np.random.default_rng(13)
    model = random_contractive_model(rng, 3, sup_norm=0.95)
    cert = verify_quadratic_stability(model, np.eye(3))
    u = InputSignal(np.zeros((40, 1)))
    for _ in range(20):
        p = random_schedule(rng, model.box, 39)
        x0 = rng.standard_normal(3)
        traj = simulate_lpv(model, u, p, x0)
        norms = np.linalg.norm(traj.states @ cert.S.T, axis=1)
        assert np.all(np.diff(norms) <= 1e-10)


def test_mu1_zero_input_matrix():
    model = constant_lpv([[0.5]], [[0.0]], [[1.0]], box01())
    assert state_gain_mu1(model, 0.5) == 0.0


def test_mu1_scalar_geometric_series():
    model = constant_lpv([[0.5]], [[1.0]], [[1.0]], box01())
    mu1 = state_gain_mu1(model, 0.5)
    assert np.isclose(mu1, 2.0)
    # the unit step response converges to exactly that constant
    horizon = 60
    u = InputSignal.constant([1.0], horizon)
    p = SchedulingSignal(np.full((horizon + 1, 1), 0.5), model.box)
    traj = simulate_lpv(model, u, p, np.zeros(1))
    assert traj.states[:, 0].max() <= mu1 + 1e-12
    assert np.isclose(traj.states[-1, 0], 2.0, atol=1e-8)


def test_mu1_formula_for_constant_B():
    # with B = [1; 1] the gain is sqrt(2) / (1 - alpha_hat)
    model = constant_lpv(0.5 * np.eye(2), np.ones((2, 1)), np.ones((1, 2)), box01())
    mu1 = state_gain_mu1(model, 0.5)
    assert np.isclose(mu1, np.sqrt(2.0) / 0.5)


def test_mu1_rejects_bad_alpha(example_model):
    with pytest.raises(ValueError):
        state_gain_mu1(example_model, 1.0)
    with pytest.raises(ValueError):
        state_gain_mu1(example_model, 0.1)  # does not dominate the family norm


def test_mu1_soundness_random_runs():
    rng = np.random.default_rng(77)
    model = random_contractive_model(rng, 3, sup_norm=0.85, n_u=2)
    alpha_hat = grid_sup_norm(model, "A")
    mu1 = state_gain_mu1(model, alpha_hat)
    for _ in range(100):
        horizon = 60
        u = random_bounded_input(rng, 2, horizon, linf=rng.uniform(0.5, 2.0))
        p = random_schedule(rng, model.box, horizon)
        traj = simulate_lpv(model, u, p, np.zeros(3))
        sup_state = np.linalg.norm(traj.states, axis=1).max()
        assert sup_state <= mu1 * u.linf_norm + 1e-9


def test_alpha_monotone_under_scaling():
    rng = np.random.default_rng(5)
    for sup in (0.7, 0.95):
        model = random_contractive_model(rng, 3, sup_norm=sup)
        alphas = []
        for c in (1.0, 0.8, 0.5, 0.2):
            scaled = LpvModel(
                model.A_family.transform(c * np.eye(3), None),
                model.B_family,
                model.C_family,
                model.box,
            )
            P = find_common_lyapunov(scaled)
            cert = verify_quadratic_stability(scaled, P)
            alphas.append(normalize_contractive(scaled, cert).alpha)
        assert all(a2 <= a1 + 1e-12 for a1, a2 in zip(alphas, alphas[1:]))


def test_contraction_for_pair_example(example_pair):
    sigma, sigma_hat, _ = example_pair
    data = contraction_for_pair(sigma, sigma_hat)
    assert np.allclose(data.S, np.eye(2))  # source family already contractive
    assert not np.allclose(data.S_hat, np.eye(2))  # companion family is not
    assert 0.0 < data.alpha < 1.0
    assert 0.0 < data.alpha_hat < 1.0
    assert data.mu1 > 0.0


def test_refined_sup_probe_is_quiet_for_exact_families(example_pair):
    import warnings

    from lpvbound.stability import refined_sup_probe

    sigma, sigma_hat, _ = example_pair
    for model in (sigma, sigma_hat):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            coarse, refined = refined_sup_probe(model, "A")
        assert refined <= coarse * 1.01


def test_contraction_rejects_unstable_pair(example_model):
    unstable = constant_lpv(
        np.diag([1.1, 0.2]), np.ones((2, 1)), np.ones((1, 2)), example_model.box
    )
    with pytest.raises(StabilityError):
        contraction_for_pair(example_model, unstable)
