import numpy as np
import pytest

import oracles
from uqfv.basis import build_basis, build_partition
from uqfv.euler import GasModel, InadmissibleStateError, admissible_mask
from uqfv.fv import deterministic_solve, grid_1d
from uqfv.problems import project_initial_data
from uqfv.sg import (
    FilterConfig,
    LimiterConfig,
    apply_filter,
    apply_limiter,
    filter_gain,
    filter_gains,
    limiter_theta,
    run_sg,
    sg_update,
)

GAS = GasModel(1.4)
SOD_L = np.array([1.0, 0.0, 2.5])
SOD_R = np.array([0.125, 0.0, 0.25])


def degree_one_basis():
    # two Gauss nodes where phi_1 = -1 and +1: node states are c0 -+ c1
    return build_basis(build_partition(-1.0, 1.0, 1), 1, quad_count=2)


def coeffs_for_nodes(node_lo, node_hi):
    c0 = 0.5 * (np.asarray(node_lo) + np.asarray(node_hi))
    c1 = 0.5 * (np.asarray(node_hi) - np.asarray(node_lo))
    return np.stack([c0, c1])


def test_limiter_zero_for_admissible_nodes():
    basis = degree_one_basis()
    coeffs = coeffs_for_nodes([0.9, 0.0, 2.4], [1.1, 0.0, 2.6])
    assert limiter_theta(coeffs, basis, GAS) == 0.0


def test_limiter_density_violation_hand_value():
    # node density -0.1 against cell-mean density 1.0: theta = 1/11 + eps
    basis = degree_one_basis()
    node_lo = np.array([-0.1, 0.0, 2.0])
    node_hi = np.array([2.1, 0.0, 3.0])
    coeffs = coeffs_for_nodes(node_lo, node_hi)
    np.testing.assert_allclose(coeffs[0], [1.0, 0.0, 2.5], atol=1e-15)
    theta = limiter_theta(coeffs, basis, GAS)
    assert theta == pytest.approx(0.1 / 1.1 + 1e-10, abs=1e-12)


def test_limiter_requires_admissible_mean():
    basis = degree_one_basis()
    coeffs = coeffs_for_nodes([-1.0, 0.0, 2.0], [-3.0, 0.0, 3.0])
    with pytest.raises(InadmissibleStateError):
        limiter_theta(coeffs, basis, GAS)


def test_limiter_matches_bisection_oracle():
    # 500 random violating nodes; closed form vs bisection to 1e-8
    rng = np.random.default_rng(42)
    basis = degree_one_basis()
    checked = 0
    while checked < 500:
        mean = np.array(
            [rng.uniform(0.1, 3.0), rng.uniform(-2.0, 2.0), rng.uniform(0.5, 6.0)]
        )
        if not np.all(admissible_mask(mean, GAS)):
            continue
        node = mean + rng.uniform(-4.0, 4.0, 3)
        if np.all(admissible_mask(node, GAS)):
            continue
        other = 2.0 * mean - node  # keeps the cell mean in place
        coeffs = coeffs_for_nodes(node, other)
        oracle_lo = oracles.limiter_theta_bisection(node, mean, GAS.gamma)
        oracle_hi = oracles.limiter_theta_bisection(other, mean, GAS.gamma)
        oracle = max(oracle_lo, oracle_hi)
        theta = limiter_theta(coeffs, basis, GAS)
        assert theta == pytest.approx(oracle, abs=1e-8)
        checked += 1


def test_apply_limiter_identity_when_inactive():
    basis = build_basis(build_partition(-1, 1, 2), 3)
    coeffs = np.zeros((4, 2, 4, 3))
    coeffs[..., 0, :] = SOD_L
    coeffs[..., 1, :] = 0.01
    limited, theta = apply_limiter(coeffs, basis, GAS)
    np.testing.assert_array_equal(limited, coeffs)
    np.testing.assert_array_equal(theta, 0.0)


def _violating_field():
    basis = build_basis(build_partition(-1, 1, 2), 4)
    grid = grid_1d(8, 0.0, 1.0)
    rng = np.random.default_rng(9)
    coeffs = np.zeros((8, 2, 5, 3))
    coeffs[..., 0, :] = SOD_L
    coeffs[..., 1:, :] = 0.8 * rng.standard_normal((8, 2, 4, 3))
    return basis, grid, coeffs


def test_apply_limiter_preserves_means_bitwise():
    basis, _, coeffs = _violating_field()
    limited, theta = apply_limiter(coeffs, basis, GAS)
    assert np.any(theta > 0.0)
    np.testing.assert_array_equal(limited[..., 0, :], coeffs[..., 0, :])


def test_apply_limiter_restores_admissibility_everywhere():
    basis, _, coeffs = _violating_field()
    limited, _ = apply_limiter(coeffs, basis, GAS)
    nodes = np.einsum("...kd,kq->...qd", limited, basis.phi)
    assert np.all(admissible_mask(nodes, GAS))


def test_apply_limiter_idempotent():
    basis, _, coeffs = _violating_field()
    once, _ = apply_limiter(coeffs, basis, GAS)
    twice, theta2 = apply_limiter(once, basis, GAS)
    np.testing.assert_array_equal(theta2, 0.0)
    np.testing.assert_array_equal(twice, once)


def test_apply_limiter_full_damping_keeps_mean():
    # node density -1 against mean 1 gives a raw factor 0.5; with a large
    # offset it caps at 1 and all higher moments vanish
    basis = degree_one_basis()
    node = np.array([-1.0, 0.0, 2.0])
    other = 2.0 * np.array([1.0, 0.0, 2.5]) - node
    coeffs = coeffs_for_nodes(node, other)[None, None]
    limited, theta = apply_limiter(coeffs, basis, GAS, LimiterConfig(epsilon=0.6))
    assert theta[0, 0] == 1.0
    np.testing.assert_array_equal(limited[0, 0, 0], coeffs[0, 0, 0])
    np.testing.assert_array_equal(limited[0, 0, 1:], 0.0)


def test_filter_gain_k0_is_one_for_all_kinds():
    for cfg in (
        FilterConfig("none"),
        FilterConfig("l2", strength=3.0),
        FilterConfig("exponential", strength=2.0, order=10),
    ):
        assert filter_gain(0, 4, cfg, dt=0.1) == 1.0


def test_filter_gain_l2_hand_value():
    cfg = FilterConfig("l2", strength=1.0)
    assert filter_gain(1, 4, cfg) == pytest.approx(0.2, abs=1e-15)


def test_filter_gain_exponential_reaches_machine_eps():
    # net exponent one at k=K gives exp(log eps) = machine epsilon
    cfg = FilterConfig("exponential", strength=2.0, order=4, dt_scaled=True)
    gain = filter_gain(4, 4, cfg, dt=0.5)
    assert gain == pytest.approx(np.finfo(float).eps, rel=1e-12)
    raw = FilterConfig("exponential", strength=1.0, order=4, dt_scaled=False)
    assert filter_gain(4, 4, raw) == pytest.approx(np.finfo(float).eps, rel=1e-12)


def test_filter_gains_monotone_nonincreasing():
    for cfg in (
        FilterConfig("l2", strength=0.7),
        FilterConfig("exponential", strength=2.0, order=10),
    ):
        gains = filter_gains(14, cfg, dt=0.01)
        assert np.all(np.diff(gains) <= 1e-15)


def test_apply_filter_identity_cases():
    rng = np.random.default_rng(1)
    coeffs = rng.standard_normal((5, 2, 4, 3))
    np.testing.assert_array_equal(apply_filter(coeffs, None), coeffs)
    np.testing.assert_array_equal(apply_filter(coeffs, FilterConfig("none")), coeffs)
    np.testing.assert_array_equal(
        apply_filter(coeffs, FilterConfig("l2", strength=0.0)), coeffs
    )
    np.testing.assert_array_equal(
        apply_filter(coeffs, FilterConfig("exponential", strength=0.0, order=2)), coeffs
    )


def test_apply_filter_keeps_zeroth_moment_bitwise():
    rng = np.random.default_rng(6)
    coeffs = rng.standard_normal((5, 3, 6, 3))
    out = apply_filter(coeffs, FilterConfig("exponential", strength=2.0, order=10), dt=0.3)
    np.testing.assert_array_equal(out[..., 0, :], coeffs[..., 0, :])
    assert np.all(np.abs(out[..., 1:, :]) <= np.abs(coeffs[..., 1:, :]) + 1e-18)


def sod_initial(x, xi, x0=0.5, sigma=0.05):
    x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
    return np.where((x < x0 + sigma * xi)[..., None], SOD_L, SOD_R)


def test_sg_update_constant_field_unchanged():
    basis = build_basis(build_partition(-1, 1, 3), 4)
    grid = grid_1d(6, 0.0, 1.0, bc="periodic")
    coeffs = np.zeros((6, 3, 5, 3))
    coeffs[..., 0, :] = SOD_L
    out = sg_update(coeffs, grid, basis, GAS, dt=1e-3)
    np.testing.assert_allclose(out, coeffs, atol=1e-16)


def test_run_sg_t0_returns_projection_exactly():
    basis = build_basis(build_partition(-1, 1, 3), 4)
    grid = grid_1d(16, 0.0, 1.0)
    field = project_initial_data(sod_initial, grid, basis)
    result = run_sg(field, GAS, t_end=0.0)
    np.testing.assert_array_equal(result.field.coeffs, field.coeffs)
    assert result.stats.steps == 0


def test_run_sg_degenerate_equals_deterministic():
    # K=0, N=1 collapses to the plain FV scheme on cell means
    nx = 50
    basis = build_basis(build_partition(-1, 1, 1), 0)
    grid = grid_1d(nx, 0.0, 1.0)
    field = project_initial_data(lambda x, xi: sod_initial(x, xi, sigma=0.0), grid, basis)
    result = run_sg(field, GAS, t_end=0.05)
    x = grid.cell_centers(0)
    u0 = np.where(x[:, None] < 0.5, SOD_L, SOD_R)
    ref = deterministic_solve(u0, grid, GAS, 0.05, cfl=0.9)
    np.testing.assert_allclose(result.field.coeffs[:, 0, 0, :], ref, atol=1e-13)


def test_run_sg_limiter_noop_on_smooth_data():
    # no shock forms at tiny T: enabled and disabled limiter runs coincide
    def smooth(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        rho = 1.0 + 0.1 * np.sin(2 * np.pi * x) * (1.0 + 0.3 * xi)
        u = np.empty(x.shape + (3,))
        u[..., 0] = rho
        u[..., 1] = 0.0
        u[..., 2] = 2.5
        return u

    basis = build_basis(build_partition(-1, 1, 2), 3)
    grid = grid_1d(24, 0.0, 1.0, bc="periodic")
    field = project_initial_data(smooth, grid, basis)
    on = run_sg(field, GAS, t_end=0.01, limiter_config=LimiterConfig(enabled=True))
    off = run_sg(field, GAS, t_end=0.01, limiter_config=LimiterConfig(enabled=False))
    np.testing.assert_allclose(on.field.coeffs, off.field.coeffs, atol=1e-12)


def test_run_sg_limiter_disabled_fails_on_sod():
    # without the limiter the degree-14 reconstruction leaves the admissible
    # set near the discontinuity and the run aborts
    basis = build_basis(build_partition(-1, 1, 1), 14)
    grid = grid_1d(64, 0.0, 1.0)
    field = project_initial_data(sod_initial, grid, basis)
    with pytest.raises((InadmissibleStateError, Exception)):
        run_sg(field, GAS, t_end=0.05, limiter_config=LimiterConfig(enabled=False))


def test_run_sg_single_element_matches_classical_oracle():
    # ME machinery at N=1 against an independently written global-basis hSG
    nx, degree, t_end = 40, 4, 0.03
    basis = build_basis(build_partition(-1, 1, 1), degree)
    grid = grid_1d(nx, 0.0, 1.0)
    field = project_initial_data(sod_initial, grid, basis)
    result = run_sg(field, GAS, t_end=t_end)
    oracle = oracles.classical_hsg_run(
        sod_initial, nx, 1.0 / nx, t_end, GAS.gamma, degree, basis.n_nodes
    )
    np.testing.assert_allclose(result.field.coeffs[:, 0], oracle, atol=1e-13)


def test_run_sg_mass_conservation_periodic():
    def smooth(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        rho = 1.0 + 0.2 * np.sin(2 * np.pi * x) * (1.0 + 0.5 * xi)
        u = np.empty(x.shape + (3,))
        u[..., 0] = rho
        u[..., 1] = 0.3 * rho
        u[..., 2] = 2.5 + 0.5 * rho * 0.3**2
        return u

    basis = build_basis(build_partition(-1, 1, 2), 3)
    grid = grid_1d(40, 0.0, 1.0, bc="periodic")
    field = project_initial_data(smooth, grid, basis)
    result = run_sg(field, GAS, t_end=1e9, max_steps=100)

    def total_mass(coeffs):
        return grid.cell_volume * np.einsum(
            "xl,l->", coeffs[:, :, 0, 0], basis.element_weights
        )

    drift = abs(total_mass(result.field.coeffs) - total_mass(field.coeffs))
    assert drift < 1e-11


def test_run_sg_lax_friedrichs_flux():
    basis = build_basis(build_partition(-1, 1, 2), 3)
    grid = grid_1d(60, 0.0, 1.0)
    field = project_initial_data(sod_initial, grid, basis)
    lf = run_sg(field, GAS, t_end=0.05, flux="lax-friedrichs")
    hll = run_sg(field, GAS, t_end=0.05, flux="hll")
    assert lf.stats.steps > 0
    means_gap = np.abs(lf.field.coeffs[..., 0, :] - hll.field.coeffs[..., 0, :]).mean()
    assert 0.0 < means_gap < 0.02


def test_run_sg_clenshaw_curtis_quadrature():
    # nested-rule basis: level 4 gives 17 points, plenty for degree 4
    basis = build_basis(build_partition(-1, 1, 2), 4, "clenshaw-curtis", 4)
    assert basis.n_nodes == 17
    gram = np.einsum("kq,jq,q->kj", basis.phi, basis.phi, basis.rule.weights)
    assert np.abs(gram - np.eye(5)).max() < 1e-13
    grid = grid_1d(40, 0.0, 1.0)
    field = project_initial_data(sod_initial, grid, basis)
    result = run_sg(field, GAS, t_end=0.03)
    assert result.stats.steps > 0
    assert np.all(np.isfinite(result.field.coeffs))


def test_sg_update_rejects_inadmissible_reconstruction():
    basis = degree_one_basis()
    grid = grid_1d(1, 0.0, 1.0)
    coeffs = coeffs_for_nodes([-0.1, 0.0, 2.0], [2.1, 0.0, 3.0])[None, None]
    with pytest.raises(InadmissibleStateError):
        sg_update(coeffs, grid, basis, GAS, dt=1e-3)


def test_filter_config_validation():
    with pytest.raises(ValueError):
        FilterConfig("lanczos")
    with pytest.raises(ValueError):
        FilterConfig("exponential", strength=-1.0, order=2)
    with pytest.raises(ValueError):
        FilterConfig("exponential", strength=1.0, order=0)
    with pytest.raises(ValueError):
        LimiterConfig(epsilon=0.0)


def test_apply_limiter_stress_random_extreme_fields():
    # large random higher moments on admissible means: limited reconstructions
    # must come out admissible at every node, for any violation severity
    rng = np.random.default_rng(99)
    basis = build_basis(build_partition(-1, 1, 3), 6)
    for _ in range(300):
        coeffs = np.zeros((1, 3, 7, 3))
        rho = rng.uniform(0.01, 5.0)
        v = rng.uniform(-4.0, 4.0)
        p = rng.uniform(0.01, 5.0)
        coeffs[0, :, 0, :] = [rho, rho * v, p / 0.4 + 0.5 * rho * v * v]
        scale = rng.choice([0.1, 1.0, 10.0, 1000.0])
        coeffs[0, :, 1:, :] = scale * rng.standard_normal((3, 6, 3))
        limited, _ = apply_limiter(coeffs, basis, GAS)
        nodes = np.einsum("...kd,kq->...qd", limited, basis.phi)
        assert np.all(admissible_mask(nodes, GAS))
