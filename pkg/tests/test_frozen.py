"""Minimality, equivalence, the frozen similarity map, basis mismatch."""

import numpy as np
import pytest

from lpvbound.core import (
    AffineFamily,
    InputSignal,
    LpvModel,
    LtiModel,
    SchedulingBox,
    SchedulingSignal,
    constant_family,
    signal_piecewise_constant,
)
from lpvbound.frozen import (
    EquivalenceError,
    MinimalityError,
    are_frozen_equivalent,
    check_lpv_isomorphism,
    frozen_isomorphism,
    is_frozen_minimal,
    isomorphism_between,
    make_frozen_equivalent,
    markov_parameters,
    mismatch,
    observability_matrix,
    reachability_matrix,
)

from conftest import constant_lpv, random_contractive_model, random_equivalent_pair


def nilpotent_similarity(n_x):
    N = np.zeros((n_x, n_x))
    for k in range(n_x - 1):
        N[k, k + 1] = 1.0
    return AffineFamily([np.eye(n_x), N])  # T(p) = I + p N


def test_reachability_zero_A():
    model = LtiModel(np.zeros((3, 3)), np.arange(3, dtype=float).reshape(3, 1), np.ones((1, 3)))
    R = reachability_matrix(model)
    assert np.allclose(R[:, :1], model.B)
    assert np.all(R[:, 1:] == 0.0)


def test_reachability_scalar():
    model = LtiModel([[0.7]], [[2.5]], [[1.0]])
    assert np.allclose(reachability_matrix(model), [[2.5]])


def test_reachability_oracle(example_model):
    # repeated-multiplication oracle, column block by column block
    frozen = example_model.freeze(0.1)
    R = reachability_matrix(frozen)
    for k in range(frozen.n_x):
        expected = np.linalg.matrix_power(frozen.A, k) @ frozen.B
        assert np.allclose(R[:, k : k + 1], expected, atol=1e-14)


def test_observability_zero_A():
    model = LtiModel(np.zeros((2, 2)), np.ones((2, 1)), np.array([[1.0, 2.0]]))
    O = observability_matrix(model)
    assert np.allclose(O[0], [1.0, 2.0])
    assert np.all(O[1:] == 0.0)


def test_observability_identity_stack():
    model = LtiModel(np.eye(3), np.ones((3, 1)), np.eye(3))
    O = observability_matrix(model)
    assert np.allclose(O, np.vstack([np.eye(3)] * 3))


def test_observability_oracle(example_model):
    frozen = example_model.freeze(0.4)
    O = observability_matrix(frozen)
    for k in range(frozen.n_x):
        expected = frozen.C @ np.linalg.matrix_power(frozen.A, k)
        assert np.allclose(O[k : k + 1, :], expected, atol=1e-14)


def test_minimality_unreachable_model():
    box = SchedulingBox([0.0], [1.0], 5)
    model = constant_lpv(np.zeros((2, 2)), np.zeros((2, 1)), np.ones((1, 2)), box)
    report = is_frozen_minimal(model)
    assert not report.minimal


def test_minimality_scalar_always():
    box = SchedulingBox([0.0], [1.0], 7)
    model = LpvModel(
        AffineFamily([np.array([[0.0]]), np.array([[1.0]])]),  # A(p) = p
        constant_family(np.array([[1.0]]), 1),
        constant_family(np.array([[1.0]]), 1),
        box,
    )
    assert is_frozen_minimal(model).minimal


def test_minimality_example_model(example_model):
    report = is_frozen_minimal(example_model, rank_tol=1e-8)
    assert report.minimal
    assert report.grid_resolution == 31
    assert example_model.box.contains(report.worst_p)


def test_markov_zero_A():
    model = LtiModel(np.zeros((2, 2)), np.ones((2, 1)), np.array([[1.0, 1.0]]))
    m = markov_parameters(model, 4)
    assert np.isclose(m[0, 0, 0], 2.0)
    assert np.all(m[1:] == 0.0)


def test_markov_example_values(example_model):
    frozen = example_model.freeze(0.1)
    m = markov_parameters(frozen, 2)
    assert np.isclose(m[0, 0, 0], 2.0)   # C B = [1 1] [1; 1]
    assert np.isclose(m[1, 0, 0], 0.32)  # C A B at p = 0.1


def test_equivalence_self(example_model):
    report = are_frozen_equivalent(example_model, example_model, tol=1e-10)
    assert report.equivalent and report.worst_residual == 0.0


def test_equivalence_under_constant_similarity(example_model):
    T0 = np.array([[2.0, 1.0], [0.0, 1.0]])
    partner = make_frozen_equivalent(example_model, constant_family(T0, 1))
    report = are_frozen_equivalent(example_model, partner, tol=1e-9)
    assert report.equivalent


def test_equivalence_fails_on_doubled_B(example_model):
    doubled = LpvModel(
        example_model.A_family,
        example_model.B_family.transform(2.0 * np.eye(2), None),
        example_model.C_family,
        example_model.box,
    )
    report = are_frozen_equivalent(example_model, doubled, tol=1e-9)
    assert not report.equivalent
    assert report.worst_residual > 1.0  # first Markov parameter doubles


def test_isomorphism_identity(example_model):
    iso = frozen_isomorphism(example_model, example_model, 0.2)
    assert np.allclose(iso.T, np.eye(2), atol=1e-12)
    assert iso.residual <= 1e-12
    assert iso.condition_number < 1.0 + 1e-10


def test_isomorphism_recovers_constant_similarity(example_model):
    T0 = np.array([[1.0, 0.5], [-0.3, 1.2]])
    partner = make_frozen_equivalent(example_model, constant_family(T0, 1))
    for p in (0.1, 0.25, 0.4):
        iso = frozen_isomorphism(partner, example_model, p)
        assert np.linalg.norm(iso.T - T0) / np.linalg.norm(T0) <= 1e-8


def test_isomorphism_recovers_p_dependent_similarity(example_model):
    T_fam = nilpotent_similarity(2)
    partner = make_frozen_equivalent(example_model, T_fam)
    for p in example_model.box.grid_axes()[0]:
        iso = frozen_isomorphism(partner, example_model, p)
        expected = T_fam([p])
        assert np.linalg.norm(iso.T - expected) / np.linalg.norm(expected) <= 1e-8


def test_isomorphism_rejects_unreachable():
    L = LtiModel(np.diag([0.5, 0.4]), np.array([[1.0], [0.0]]), np.ones((1, 2)))
    with pytest.raises(MinimalityError):
        isomorphism_between(L, L)


def test_isomorphism_rejects_inequivalent(example_model):
    box = example_model.box
    other = constant_lpv(np.diag([0.5, 0.1]), np.ones((2, 1)), np.ones((1, 2)), box)
    with pytest.raises(EquivalenceError):
        frozen_isomorphism(other, example_model, 0.2)


def test_mismatch_same_point_is_identity(example_model):
    m = mismatch(example_model, example_model, 0.2, 0.2)
    assert m.deviation <= 1e-12


def test_mismatch_constant_similarity_everywhere(example_model):
    T0 = np.array([[1.4, 0.0], [0.2, 0.8]])
    partner = make_frozen_equivalent(example_model, constant_family(T0, 1))
    for p1, p2 in [(0.1, 0.4), (0.15, 0.3), (0.2, 0.25)]:
        assert mismatch(partner, example_model, p1, p2).deviation <= 1e-9


def test_mismatch_example_pair_positive(example_pair):
    sigma, sigma_hat, _ = example_pair
    m = mismatch(sigma_hat, sigma, 0.1, 0.2)
    assert m.deviation > 1e-3
    assert np.allclose(m.M, m.M)  # finite


def test_lpv_isomorphism_constant_schedule(example_pair):
    sigma, sigma_hat, _ = example_pair
    p = SchedulingSignal(np.full((15, 1), 0.2), sigma.box)
    assert check_lpv_isomorphism(sigma_hat, sigma, p, tol=1e-8)


def test_lpv_isomorphism_constant_T_any_schedule(example_model):
    T0 = np.array([[1.0, 0.3], [0.1, 0.9]])
    partner = make_frozen_equivalent(example_model, constant_family(T0, 1))
    p = signal_piecewise_constant(
        example_model.box, 1, [[0.1], [0.4], [0.2], [0.3], [0.1]], 4
    )
    assert check_lpv_isomorphism(partner, example_model, p, tol=1e-7)


def test_lpv_isomorphism_fails_for_varying_T(example_model):
    partner = make_frozen_equivalent(example_model, nilpotent_similarity(2))
    p = signal_piecewise_constant(
        example_model.box, 1, [[0.1], [0.4], [0.1], [0.4], [0.1]], 4
    )
    assert not check_lpv_isomorphism(partner, example_model, p, tol=1e-6)


def test_make_frozen_equivalent_identity(example_model):
    partner = make_frozen_equivalent(example_model, constant_family(np.eye(2), 1))
    for p in example_model.box.grid_axes()[0]:
        assert np.allclose(partner.A(p), example_model.A(p), atol=1e-13)


def test_make_frozen_equivalent_rejects_singular(example_model):
    T_fam = AffineFamily([np.diag([1.0, 0.0]), np.zeros((2, 2))])
    with pytest.raises(ValueError):
        make_frozen_equivalent(example_model, T_fam)


def test_round_trip_recovery_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(5):
        sigma, sigma_hat, T_fam = random_equivalent_pair(rng, 3, grid_points=7)
        for p in sigma.box.grid_points()[::2]:
            iso = frozen_isomorphism(sigma_hat, sigma, p)
            expected = T_fam(p)
            rel = np.linalg.norm(iso.T - expected) / np.linalg.norm(expected)
            assert rel <= 1e-8


def test_isomorphism_continuity_probe(example_pair):
    # || T(p + h) - T(p) || decreases monotonically as h halves
    sigma, sigma_hat, _ = example_pair
    p = 0.2
    gaps = []
    h = 0.04
    for _ in range(4):
        T1 = frozen_isomorphism(sigma_hat, sigma, p).T
        T2 = frozen_isomorphism(sigma_hat, sigma, p + h).T
        gaps.append(np.linalg.norm(T2 - T1, 2))
        h /= 2.0
    assert gaps[0] > gaps[1] > gaps[2] > gaps[3]


def test_markov_similarity_invariance():
    rng = np.random.default_rng(9)
    A = 0.6 * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    C = rng.standard_normal((2, 3))
    model = LtiModel(A, B, C)
    T = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    similar = LtiModel(
        np.linalg.solve(T, A @ T), np.linalg.solve(T, B), C @ T
    )
    m1 = markov_parameters(model, 8)
    m2 = markov_parameters(similar, 8)
    assert np.max(np.abs(m1 - m2)) <= 1e-10
