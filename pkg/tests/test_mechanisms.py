import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from iclp.errors import ConfigError, DataError, PrivacyInfeasibleError
from iclp.grid import FunctionOnGrid, inner_product, l2_norm, unit_interval_grid
from iclp.kernels import KernelSpec, gram, trace_normalized
from iclp.mechanisms import (MechanismConfig, _solve_sanitized, clip_to_tau,
                             dp_covariance, dp_fos_regression, dp_kde,
                             frl_mean, gp_adp_mean, iclp_ar_mean,
                             iclp_qr_mean, mean_release_max_log_ratio,
                             rerm_sensitivity, sanitize_mean,
                             worst_case_neighbors)
from iclp.noise import PrivacyBudget, calibrate
from iclp.spectral import decompose, partial_trace, project

from conftest import make_synthetic_basis

PURE = PrivacyBudget(1.0)
HUGE = PrivacyBudget(1e12)


def constant_curves(basis, coef, n):
    """n identical curves equal to coef * phi_1."""
    phi1 = basis.eigenfunction(1).values
    return np.tile(coef * phi1, (n, 1))


# --- clipping ----------------------------------------------------------------


def test_clip_leaves_small_curves_alone(grid101):
    f = FunctionOnGrid(grid101, 0.5 * np.ones(101))
    (out,) = clip_to_tau([f], 1.0)
    assert np.array_equal(out.values, f.values)


def test_clip_projects_onto_tau_sphere(grid101):
    f = FunctionOnGrid(grid101, 2.0 * np.ones(101))
    (out,) = clip_to_tau([f], 1.0)
    assert abs(l2_norm(out) - 1.0) < 1e-12


def test_clip_is_idempotent(grid101):
    rng = np.random.default_rng(0)
    curves = [FunctionOnGrid(grid101, 3 * rng.standard_normal(101))
              for _ in range(5)]
    once = clip_to_tau(curves, 1.0)
    twice = clip_to_tau(once, 1.0)
    for a, b in zip(once, twice):
        assert_allclose(a.values, b.values, rtol=1e-12)


# --- frl ----------------------------------------------------------------------


def test_frl_sensitivity_formula(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 100)
    rel = frl_mean(curves, matern_basis_120, 10, 1.0, PURE, seed=1)
    assert rel.delta_gs == 2 * 10 * 1.0 / 100
    assert rel.sigma == rel.delta_gs / 1.0


def test_frl_zero_noise_limit(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 20)
    rel = frl_mean(curves, matern_basis_120, 5, 1.0, HUGE, seed=2)
    assert l2_norm(rel.summary - rel.non_private) < 1e-9


def test_frl_mean_of_identical_curves(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.7, 50)
    rel = frl_mean(curves, matern_basis_120, 5, 1.0, HUGE, seed=3)
    c = project(rel.non_private, matern_basis_120)
    assert abs(c[0] - 0.7) < 1e-10


def test_frl_m_exceeding_span_rejected(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 10)
    with pytest.raises(ConfigError):
        frl_mean(curves, matern_basis_120, matern_basis_120.floor_index + 1,
                 1.0, PURE, seed=1)


def test_pure_mechanisms_reject_positive_delta(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 10)
    approx = PrivacyBudget(1.0, 0.01)
    with pytest.raises(ConfigError):
        frl_mean(curves, matern_basis_120, 3, 1.0, approx, seed=1)
    with pytest.raises(ConfigError):
        iclp_qr_mean(curves, matern_basis_120, 0.01, 1.6, 1.0, approx, seed=1)


# --- iclp-ar ------------------------------------------------------------------


def test_ar_hand_computed_truncation_and_sensitivity():
    # lambda = (0.5, 0.25, 0.125), eta = 1, psi = 0.4, tau = 1:
    # thresholds psi/(2 sqrt(lambda)) = (0.2828, 0.4, 0.5657), none reaches
    # tau, so J* caps at 3 and delta = (2/n) (1/sqrt(.5) + 2 + 1/sqrt(.125))
    basis = make_synthetic_basis([0.5, 0.25, 0.125])
    n = 40
    curves = constant_curves(basis, 0.9, n)
    rel = iclp_ar_mean(curves, basis, 0.4, 1.0, 1.0, PURE, seed=5)
    assert rel.config["j_star"] == 3
    expected = (2.0 / n) * (0.5 ** -0.5 + 0.25 ** -0.5 + 0.125 ** -0.5)
    assert abs(rel.delta_gs - expected) < 1e-12


def test_ar_soft_threshold_values():
    basis = make_synthetic_basis([1.0, 1.0])
    n = 10
    # coefficient 0.5 with threshold psi/(2 sqrt(1)) = 0.2 shrinks to 0.3
    for coef, want in ((0.5, 0.3), (-0.5, -0.3)):
        curves = constant_curves(basis, coef, n)
        rel = iclp_ar_mean(curves, basis, 0.4, 1.0, 1.0, HUGE, seed=6)
        c = project(rel.non_private, basis)
        assert abs(c[0] - want) < 1e-9


def test_ar_zero_coefficient_stays_zero():
    basis = make_synthetic_basis([0.5, 0.25])
    curves = np.zeros((10, basis.grid.n_nodes))
    rel = iclp_ar_mean(curves, basis, 0.4, 1.0, 1.0, HUGE, seed=7)
    assert l2_norm(rel.non_private) == 0.0


def test_ar_coefficients_beyond_jstar_exactly_zero(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(8)
    curves = rng.standard_normal((30, b.grid.n_nodes))
    rel = iclp_ar_mean(curves, b, 0.5, 1.5, 1.0, PURE, seed=8)
    jstar = rel.config["j_star"]
    assert jstar < b.floor_index
    c = project(rel.non_private, b)
    assert np.all(c[jstar:] == 0.0)
    assert rel.noise_span == jstar


def test_ar_rejects_bad_psi(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 10)
    with pytest.raises(ConfigError):
        iclp_ar_mean(curves, matern_basis_120, 0.0, 1.0, 1.0, PURE, seed=1)


# --- iclp-qr ------------------------------------------------------------------


def test_qr_filter_limit_recovers_truncated_mean(matern_basis_120):
    b = matern_basis_120
    curves = constant_curves(b, 0.6, 25)
    rel = iclp_qr_mean(curves, b, 1e-15, 1.6, 1.0, HUGE, seed=9)
    c = project(rel.non_private, b)
    assert abs(c[0] - 0.6) < 1e-9


def test_qr_filter_arithmetic():
    # lambda_1 = 0.5, eta = 2, psi = 0.25 -> filter = 0.25 / 0.5 = 0.5
    basis = make_synthetic_basis([0.5, 0.25])
    curves = constant_curves(basis, 1.0, 10)
    rel = iclp_qr_mean(curves, basis, 0.25, 2.0, 2.0, HUGE, seed=10)
    c = project(rel.non_private, basis)
    assert abs(c[0] - 0.5) < 1e-9


def test_qr_hand_computed_sensitivity():
    # n=200, tau=1, lambda=(0.5, 0.25), eta=2, psi=0.1
    basis = make_synthetic_basis([0.5, 0.25])
    curves = constant_curves(basis, 0.5, 200)
    rel = iclp_qr_mean(curves, basis, 0.1, 2.0, 1.0, PURE, seed=11)
    expected = 0.01 * (0.5 ** 1.5 / 0.35 + 0.25 ** 1.5 / 0.1625)
    assert abs(rel.delta_gs - expected) < 1e-12
    assert abs(rel.delta_gs - 0.0177938) < 1e-6


def test_qr_filter_monotone_and_psi_monotone(matern_basis_120):
    b = matern_basis_120
    lam = b.lam
    filt = lam ** 1.6 / (lam ** 1.6 + 0.01)
    assert np.all(np.diff(filt) <= 1e-15)
    curves = constant_curves(b, 0.5, 50)
    deltas = [iclp_qr_mean(curves, b, psi, 1.6, 1.0, PURE, seed=1).delta_gs
              for psi in (0.001, 0.01, 0.1)]
    assert deltas[0] >= deltas[1] >= deltas[2]


def test_qr_warns_when_eta_too_low(matern_basis_200):
    curves = constant_curves(matern_basis_200, 0.5, 20)
    with pytest.warns(UserWarning, match="beta_hat"):
        iclp_qr_mean(curves, matern_basis_200, 0.01, 1.01, 1.0, PURE, seed=1)


# --- gp-adp -------------------------------------------------------------------


def test_gp_adp_requires_positive_delta(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 10)
    with pytest.raises(ConfigError):
        gp_adp_mean(curves, matern_basis_120, 0.01, 1.6, 1.0, PURE, seed=1)


def test_gp_adp_estimator_matches_qr(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(12)
    curves = rng.standard_normal((30, b.grid.n_nodes))
    qr = iclp_qr_mean(curves, b, 0.01, 1.6, 1.0, PURE, seed=13)
    gp = gp_adp_mean(curves, b, 0.01, 1.6, 1.0, PrivacyBudget(1.0, 0.01),
                     seed=13)
    assert np.array_equal(qr.non_private.values, gp.non_private.values)


def test_gp_adp_sigma_consistent_and_monotone_in_delta(matern_basis_120):
    b = matern_basis_120
    curves = constant_curves(b, 0.5, 40)
    rels = [gp_adp_mean(curves, b, 0.01, 1.6, 1.0, PrivacyBudget(1.0, d), 14)
            for d in (0.01, 0.5)]
    for rel, d in zip(rels, (0.01, 0.5)):
        assert rel.sigma == calibrate(rel.delta_gs, PrivacyBudget(1.0, d), "gp")
    assert rels[1].sigma < rels[0].sigma


# --- the release certificate ---------------------------------------------------


@pytest.mark.parametrize("strategy,kwargs", [
    ("frl", {"M": 10}),
    ("iclp-ar", {"psi": 0.002, "eta": 1.5}),
    ("iclp-qr", {"psi": 0.001, "eta": 1.6}),
])
def test_release_passes_its_own_certificate(matern_basis_120, strategy, kwargs):
    max_ratio = mean_release_max_log_ratio(
        strategy, matern_basis_120, tau=1.0, n=100, budget=PURE,
        n_draws=2000, seed=21, **kwargs)
    assert max_ratio <= 1.0 + 1e-9


def test_worst_case_neighbors_differ_in_one_curve(matern_basis_120):
    d, dp = worst_case_neighbors(matern_basis_120, 2.0, 5)
    assert d.shape == dp.shape == (5, matern_basis_120.grid.n_nodes)
    assert np.array_equal(d[1:], dp[1:])
    f = FunctionOnGrid(matern_basis_120.grid, d[0] - dp[0])
    assert abs(l2_norm(f) - 4.0) < 1e-9


def test_post_processing_leaves_metadata_unchanged(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 30)
    rel = iclp_qr_mean(curves, matern_basis_120, 0.01, 1.6, 1.0, PURE, seed=15)
    before = json.dumps(rel.metadata(), sort_keys=True)
    _ = rel.summary.values[7]                        # pointwise evaluation
    _ = inner_product(rel.summary, rel.non_private)  # linear functional
    assert json.dumps(rel.metadata(), sort_keys=True) == before


def test_save_csv_accepts_a_release(tmp_path, matern_basis_120):
    from iclp.grid import load_csv, save_csv
    curves = constant_curves(matern_basis_120, 0.5, 30)
    rel = iclp_qr_mean(curves, matern_basis_120, 0.01, 1.6, 1.0, PURE, seed=44)
    save_csv(rel, tmp_path / "rel.csv")
    (back,) = load_csv(tmp_path / "rel.csv")
    assert np.array_equal(back.values, rel.summary.values)


def test_dispatcher_routes_all_strategies(matern_basis_120):
    curves = constant_curves(matern_basis_120, 0.5, 30)
    for strategy, budget in (("frl", PURE), ("iclp-ar", PURE),
                             ("iclp-qr", PURE),
                             ("gp-adp", PrivacyBudget(1.0, 0.01))):
        cfg = MechanismConfig(strategy, 1.0, M=5, psi=0.01, eta=1.6)
        rel = sanitize_mean(curves, matern_basis_120, cfg, budget, seed=16)
        assert rel.config["strategy"] == strategy


# --- kde -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def gaussian_basis_200():
    grid = unit_interval_grid(200)
    spec = trace_normalized(KernelSpec.gaussian(0.1), grid)
    return decompose(gram(spec, grid), grid)


def test_kde_single_point_bump_integrates_to_one(gaussian_basis_200):
    rel = dp_kde(np.array([[0.5]]), gaussian_basis_200, 1.5, 1.0, HUGE, seed=17)
    mass = float(np.dot(rel.summary.grid.weights, rel.summary.values))
    assert abs(mass - 1.0) < 1e-2


def test_kde_sensitivity_scales_exactly(gaussian_basis_200):
    rng = np.random.default_rng(18)
    pts = rng.uniform(0.2, 0.8, 500)[:, None]
    d_n = dp_kde(pts, gaussian_basis_200, 1.5, 0.25, PURE, 1).delta_gs
    d_2n = dp_kde(np.vstack([pts, pts]), gaussian_basis_200, 1.5, 0.25,
                  PURE, 1).delta_gs
    assert d_n == 2.0 * d_2n
    d_h2 = dp_kde(pts, gaussian_basis_200, 1.5, 0.125, PURE, 1).delta_gs
    assert d_h2 == 2.0 * d_n


def test_kde_sensitivity_formula(gaussian_basis_200):
    b = gaussian_basis_200
    rel = dp_kde(np.array([[0.4], [0.6]]), b, 1.5, 0.2, PURE, seed=19)
    expected = 2.0 * rel.config["m_k"] * np.sqrt(partial_trace(b, 0.5)) \
        / (2 * 0.2)
    assert abs(rel.delta_gs - expected) < 1e-12


def test_kde_rejects_point_outside_domain(gaussian_basis_200):
    with pytest.raises(DataError, match="outside"):
        dp_kde(np.array([[1.2]]), gaussian_basis_200, 1.5, 0.2, PURE, seed=1)


def test_kde_requires_oversmoothing(gaussian_basis_200):
    with pytest.raises(ConfigError):
        dp_kde(np.array([[0.5]]), gaussian_basis_200, 1.0, 0.2, PURE, seed=1)


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_kde_2d_bump_has_unit_mass():
    from iclp.grid import GridSpec
    grid = GridSpec(dim=2, points_per_axis=21, bounds=((-5, 5), (-5, 5)))
    spec = KernelSpec.exponential(0.5)
    basis = decompose(gram(spec, grid), grid)
    rel = dp_kde(np.array([[0.0, 0.0]]), basis, 1.2, 1.0, HUGE, seed=20)
    mass = float(np.dot(grid.weights, rel.summary.values))
    assert abs(mass - 1.0) < 5e-2


# --- rerm -----------------------------------------------------------------------


def test_rerm_bound_scales_linearly(matern_basis_120):
    b = matern_basis_120
    one = rerm_sensitivity(1.0, 0.1, b, 1.5, 100)
    assert abs(rerm_sensitivity(2.0, 0.1, b, 1.5, 100) - 2 * one) < 1e-12
    assert rerm_sensitivity(1.0, 1e9, b, 1.5, 10 ** 9) < 1e-12


def test_rerm_bound_formula(matern_basis_120):
    b = matern_basis_120
    lam_eta = b.lam ** 1.5
    sup_c = np.max((b.phi ** 2) @ lam_eta)
    expected = (1.0 / (0.1 * 100)) * np.sqrt(sup_c) * \
        np.sqrt(partial_trace(b, 0.5))
    assert abs(rerm_sensitivity(1.0, 0.1, b, 1.5, 100) - expected) < 1e-12


# --- covariance ------------------------------------------------------------------


def test_cov_identical_curves_release_pure_noise(matern_basis_120):
    b = matern_basis_120
    curves = constant_curves(b, 0.5, 10)
    rel = dp_covariance(curves, b, 0.01, 1.5, 1.0, PURE, seed=22)
    assert np.max(np.abs(rel.non_private.values)) < 1e-20
    assert l2_norm(rel.summary) > 0.0


def test_cov_non_private_exactly_symmetric(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(23)
    curves = rng.standard_normal((25, b.grid.n_nodes))
    rel = dp_covariance(curves, b, 0.01, 1.5, 2.0, PURE, seed=23)
    k = b.grid.points_per_axis
    surf = rel.non_private.values.reshape(k, k)
    assert np.max(np.abs(surf - surf.T)) == 0.0


def test_cov_filter_limit_recovers_projected_covariance(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(24)
    curves = 0.2 * rng.standard_normal((40, b.grid.n_nodes))
    # psi far below min(lambda_j lambda_l)^eta ~ 1e-17 so the filter is ~1
    rel = dp_covariance(curves, b, 1e-22, 1.5, 5.0, PrivacyBudget(1e100),
                        seed=24)
    # oracle: project the empirical covariance onto the retained tensor span
    v = curves - curves.mean(axis=0)
    cbar = (v.T @ v) / 40
    a = b.grid.weights[:, None] * b.phi
    coeff = a.T @ cbar @ a
    target = b.phi @ coeff @ b.phi.T
    k = b.grid.points_per_axis
    assert np.max(np.abs(rel.summary.values.reshape(k, k) - target)) < 1e-6


def test_cov_needs_two_curves(matern_basis_120):
    with pytest.raises(DataError):
        dp_covariance(constant_curves(matern_basis_120, 0.5, 1),
                      matern_basis_120, 0.01, 1.5, 1.0, PURE, seed=1)


def test_cov_sensitivity_uses_tensor_eigenvalues():
    basis = make_synthetic_basis([0.5, 0.25])
    curves = constant_curves(basis, 0.5, 50)
    rel = dp_covariance(curves, basis, 0.1, 1.5, 1.0, PURE, seed=25)
    lam_prod = np.outer([0.5, 0.25], [0.5, 0.25])
    expected = (2.0 / 50) * np.sum(lam_prod ** 1.0 / (lam_prod ** 1.5 + 0.1))
    assert abs(rel.delta_gs - expected) < 1e-12


# --- function-on-scalar regression ----------------------------------------------


def test_fos_noiseless_limit_recovers_ols(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(26)
    n, p = 60, 2
    x = rng.uniform(-1, 1, (n, p))
    beta_true = np.vstack([np.sin(np.pi * b.grid.axis(0)),
                           np.cos(np.pi * b.grid.axis(0))])
    y = x @ beta_true + 0.05 * rng.standard_normal((n, b.grid.n_nodes))
    rel = dp_fos_regression(x, y, b, 0.5, 0.01, 1.6, 10.0, HUGE, seed=27)
    for priv, ols in zip(rel.beta, rel.non_private_beta):
        assert l2_norm(priv - ols) < 1e-8


def test_fos_intercept_only_reduces_to_dp_mean(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(28)
    n = 40
    y = 0.3 + 0.1 * rng.standard_normal((n, b.grid.n_nodes))
    x = np.ones((n, 1))
    rel = dp_fos_regression(x, y, b, 0.5, 0.01, 1.6, 2.0, HUGE, seed=29)
    qr = iclp_qr_mean(y, b, 0.01, 1.6, 2.0, HUGE, seed=30)
    assert l2_norm(rel.t2_sanitized[0] - qr.non_private) < 1e-8


def test_fos_budget_split_noise_monotone_in_gamma(matern_basis_120):
    b = matern_basis_120
    rng = np.random.default_rng(31)
    n, p = 50, 2
    x = rng.uniform(-1, 1, (n, p))
    y = 0.2 * rng.standard_normal((n, b.grid.n_nodes))
    budget = PrivacyBudget(1.0)
    t1_err = {}
    t2_err = {}
    t1 = np.clip(x, -1, 1).T @ np.clip(x, -1, 1) / n
    for gamma in (0.2, 0.5, 0.8):
        e1 = e2 = 0.0
        for r in range(200):
            rel = dp_fos_regression(x, y, b, gamma, 0.01, 1.6, 2.0, budget,
                                    seed=1000 * r + int(10 * gamma))
            e1 += np.sum((rel.t1_sanitized - t1) ** 2)
            e2 += sum(l2_norm(t2) ** 2 for t2 in rel.t2_sanitized)
        t1_err[gamma] = e1
        t2_err[gamma] = e2
    assert t1_err[0.2] > t1_err[0.5] > t1_err[0.8]
    assert t2_err[0.2] < t2_err[0.5] < t2_err[0.8]


def test_fos_rejects_singular_design(matern_basis_120):
    b = matern_basis_120
    n = 30
    x = np.ones((n, 2))          # perfectly collinear columns
    y = np.zeros((n, b.grid.n_nodes))
    with pytest.raises(DataError, match="singular"):
        dp_fos_regression(x, y, b, 0.5, 0.01, 1.6, 1.0, PURE, seed=1)


def test_singular_sanitized_gram_is_reported_not_redrawn():
    with pytest.raises(PrivacyInfeasibleError, match="re-draw"):
        _solve_sanitized(np.zeros((2, 2)), np.eye(2))


def test_fos_gamma_validation(matern_basis_120):
    y = np.zeros((10, matern_basis_120.grid.n_nodes))
    x = np.ones((10, 1))
    with pytest.raises(ConfigError):
        dp_fos_regression(x, y, matern_basis_120, 1.0, 0.01, 1.6, 1.0,
                          PURE, seed=1)


# --- config -----------------------------------------------------------------------


def test_mechanism_config_validation():
    with pytest.raises(ConfigError):
        MechanismConfig("frl", 1.0)                 # missing M
    with pytest.raises(ConfigError):
        MechanismConfig("iclp-qr", 1.0, psi=0.1, eta=1.0)   # eta must be > 1
    with pytest.raises(ConfigError):
        MechanismConfig("iclp-ar", 1.0, psi=0.1, eta=0.9)
    with pytest.raises(ConfigError):
        MechanismConfig("nope", 1.0, psi=0.1, eta=1.5)
    with pytest.raises(ConfigError):
        MechanismConfig("iclp-qr", -1.0, psi=0.1, eta=1.5)
