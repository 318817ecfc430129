"""Sanitizers for functional summaries.

Four mean-function mechanisms (truncated coefficient-wise Laplace, Laplace
process with absolute or quadratic regularization, and a Gaussian-process
(epsilon, delta) baseline), a private kernel density estimator, the
regularized-ERM sensitivity bound, and the covariance-surface and
function-on-scalar regression extensions.

Sensitivities are always the analytic worst-case bounds, never empirical
suprema over the data: an empirical sensitivity would itself leak. The
norm bound tau is enforced by rescaling (projection onto the tau-ball),
which keeps the bound valid without rejecting records.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, DataError, PrivacyInfeasibleError
from .grid import FunctionOnGrid, GridSpec
from .noise import (PrivacyBudget, calibrate, draw_rng,
                    gp_coefficient_draws, iclp_coefficient_draws,
                    max_laplace_log_ratio, standard_laplace, unit_laplace)
from .selection import fit_decay
from .spectral import SpectralBasis, partial_trace, reconstruct

__all__ = [
    "STRATEGIES",
    "MechanismConfig",
    "SanitizedRelease",
    "FosRelease",
    "clip_to_tau",
    "frl_mean",
    "iclp_ar_mean",
    "iclp_qr_mean",
    "gp_adp_mean",
    "sanitize_mean",
    "dp_kde",
    "rerm_sensitivity",
    "dp_covariance",
    "dp_fos_regression",
    "worst_case_neighbors",
    "mean_release_max_log_ratio",
]

STRATEGIES = ("frl", "iclp-ar", "iclp-qr", "gp-adp")


@dataclass(frozen=True)
class MechanismConfig:
    """Strategy tag plus its tuning parameters.

    ``M`` is the truncation level for "frl"; ``psi``/``eta`` are the
    regularization strength and kernel power for the other strategies.
    ``tau`` bounds the L2 norm of every input curve.
    """

    strategy: str
    tau: float
    M: int = None
    psi: float = None
    eta: float = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.strategy == "frl":
            if self.M is None or self.M < 1:
                raise ConfigError("frl needs a truncation level M >= 1")
        else:
            if self.psi is None or not self.psi > 0:
                raise ConfigError(f"{self.strategy} needs psi > 0")
            if self.eta is None:
                raise ConfigError(f"{self.strategy} needs eta")
            if self.strategy == "iclp-ar":
                if not self.eta >= 1:
                    raise ConfigError("iclp-ar needs eta >= 1")
            elif not self.eta > 1:
                raise ConfigError(f"{self.strategy} needs eta > 1")

    def as_dict(self) -> dict:
        return {"strategy": self.strategy, "tau": self.tau, "M": self.M,
                "psi": self.psi, "eta": self.eta}


@dataclass(frozen=True, eq=False)
class SanitizedRelease:
    """A private summary plus everything needed to audit it."""

    summary: FunctionOnGrid
    non_private: FunctionOnGrid
    delta_gs: float
    sigma: float
    budget: PrivacyBudget
    config: dict
    seed: int
    n: int
    noise_span: int

    def metadata(self) -> dict:
        """JSON-ready audit record."""
        return {
            "epsilon": self.budget.epsilon,
            "delta": self.budget.delta,
            "delta_gs": self.delta_gs,
            "sigma": self.sigma,
            "seed": self.seed,
            "n": self.n,
            "noise_span": self.noise_span,
            "config": dict(self.config),
        }


def _curves_matrix(curves, grid: GridSpec) -> np.ndarray:
    """Stack curves into an (n, n_nodes) matrix, validating grids."""
    if isinstance(curves, np.ndarray):
        v = np.asarray(curves, dtype=float)
        if v.ndim != 2 or v.shape[1] != grid.n_nodes:
            raise DataError(
                f"curve matrix must be (n, {grid.n_nodes}), got {v.shape}")
        return v
    if isinstance(curves, FunctionOnGrid):
        curves = [curves]
    rows = []
    for c in curves:
        if c.grid != grid:
            raise DataError("curve grid does not match the basis grid")
        rows.append(c.values)
    if not rows:
        raise DataError("need at least one curve")
    return np.vstack(rows)


def _clip_matrix(v: np.ndarray, weights: np.ndarray, tau: float) -> np.ndarray:
    norms = np.sqrt(np.maximum((v * v) @ weights, 0.0))
    scale = np.where(norms > tau, tau / np.where(norms > 0, norms, 1.0), 1.0)
    return v * scale[:, None]


def clip_to_tau(curves: Sequence[FunctionOnGrid], tau: float):
    """Rescale every curve with L2 norm above tau onto the tau-sphere."""
    if not tau > 0:
        raise ConfigError("tau must be positive")
    single = isinstance(curves, FunctionOnGrid)
    items = [curves] if single else list(curves)
    if not items:
        return items
    grid = items[0].grid
    v = _clip_matrix(_curves_matrix(items, grid), grid.weights, tau)
    out = [FunctionOnGrid(grid, row) for row in v]
    return out[0] if single else out


def _clipped_mean_coeffs(curves, basis: SpectralBasis, tau: float):
    """Clip, average, and project; returns (coefficients, n)."""
    v = _curves_matrix(curves, basis.grid)
    v = _clip_matrix(v, basis.grid.weights, tau)
    n = v.shape[0]
    xbar = v.mean(axis=0)
    cbar = (basis.grid.weights * xbar) @ basis.phi
    return cbar, n


def _pad(coeffs: np.ndarray, j_max: int) -> np.ndarray:
    out = np.zeros(j_max)
    out[: coeffs.size] = coeffs
    return out


# --- estimator cores, shared by the mechanisms and the DP verifier --------


def _soft_threshold(x: np.ndarray, thr: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def _ar_thresholds(lam: np.ndarray, psi: float, eta: float) -> np.ndarray:
    return psi / (2.0 * np.power(lam, eta / 2.0))


def _ar_truncation(lam: np.ndarray, psi: float, eta: float, tau: float) -> int:
    """Smallest 1-based j with tau <= psi / (2 lambda_j^{eta/2}), capped."""
    thr = _ar_thresholds(lam, psi, eta)
    hits = np.nonzero(thr >= tau)[0]
    return int(hits[0]) + 1 if hits.size else lam.size


def _ar_estimate(cbar, lam, psi, eta, tau):
    thr = _ar_thresholds(lam, psi, eta)
    jstar = _ar_truncation(lam, psi, eta, tau)
    chat = _soft_threshold(cbar, thr)
    chat[jstar:] = 0.0
    return chat, jstar


def _qr_filter(lam: np.ndarray, psi: float, eta: float) -> np.ndarray:
    lam_eta = np.power(lam, eta)
    return lam_eta / (lam_eta + psi)


def _qr_delta(lam, psi, eta, tau, n) -> float:
    return (2.0 * tau / n) * float(
        np.sum(np.power(lam, eta - 0.5) / (np.power(lam, eta) + psi)))


def _gp_delta(lam, psi, eta, tau, n) -> float:
    # C-norm operator bound of the spectral filter applied to a 2tau/n shift
    return (2.0 * tau / n) * float(
        np.max(np.power(lam, eta - 0.5) / (np.power(lam, eta) + psi)))


def _warn_if_undersmoothed(basis: SpectralBasis, eta: float) -> None:
    j_hi = min(50, basis.floor_index)
    if j_hi < 7:
        return
    beta_hat = fit_decay(basis, 5, j_hi)
    if beta_hat > 0 and eta <= 1.0 + 1.0 / beta_hat:
        warnings.warn(
            f"eta = {eta:g} is at or below 1 + 1/beta_hat = "
            f"{1 + 1 / beta_hat:.3f}; the sensitivity series may diverge "
            "as the spectral floor is refined", UserWarning, stacklevel=3)


# --- mean-function mechanisms ----------------------------------------------


def frl_mean(curves, basis: SpectralBasis, M: int, tau: float,
             budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Truncate to M coefficients and add i.i.d. Laplace(delta_gs/eps) noise.

    The global sensitivity of the truncated sample mean in the coefficient
    l1 distance is 2 M tau / n.
    """
    if budget.delta != 0:
        raise ConfigError("frl is a pure-DP mechanism; delta must be 0")
    if not 1 <= M <= basis.floor_index:
        raise ConfigError(
            f"M = {M} exceeds the retained span {basis.floor_index}")
    if not tau > 0:
        raise ConfigError("tau must be positive")
    cbar, n = _clipped_mean_coeffs(curves, basis, tau)
    delta_gs = 2.0 * M * tau / n
    sigma = calibrate(delta_gs, budget, "iclp")
    noise = sigma * standard_laplace(draw_rng(seed, 0), M)
    cfg = {"strategy": "frl", "M": int(M), "tau": tau}
    return SanitizedRelease(
        summary=reconstruct(_pad(cbar[:M] + noise, basis.floor_index), basis),
        non_private=reconstruct(_pad(cbar[:M], basis.floor_index), basis),
        delta_gs=delta_gs, sigma=sigma, budget=budget, config=cfg,
        seed=int(seed), n=n, noise_span=int(M))


def iclp_ar_mean(curves, basis: SpectralBasis, psi: float, eta: float,
                 tau: float, budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Soft-threshold each coefficient at psi / (2 lambda_j^{eta/2}).

    Coefficients past the truncation index J* (where the threshold reaches
    tau) are exactly zero, so noise is confined to the leading J*
    components; the sensitivity is (2 tau / n) sum_{j<=J*} lambda_j^{-eta/2}.
    """
    if budget.delta != 0:
        raise ConfigError("iclp-ar is a pure-DP mechanism; delta must be 0")
    if not psi > 0:
        raise ConfigError("psi must be positive")
    if not eta >= 1:
        raise ConfigError("iclp-ar needs eta >= 1")
    if not tau > 0:
        raise ConfigError("tau must be positive")
    cbar, n = _clipped_mean_coeffs(curves, basis, tau)
    lam = basis.lam
    chat, jstar = _ar_estimate(cbar, lam, psi, eta, tau)
    delta_gs = (2.0 * tau / n) * float(np.sum(np.power(lam[:jstar], -eta / 2.0)))
    sigma = calibrate(delta_gs, budget, "iclp")
    noise = sigma * np.sqrt(lam[:jstar]) * unit_laplace(draw_rng(seed, 0), jstar)
    noisy = chat.copy()
    noisy[:jstar] += noise
    cfg = {"strategy": "iclp-ar", "psi": psi, "eta": eta, "tau": tau,
           "j_star": jstar}
    return SanitizedRelease(
        summary=reconstruct(noisy, basis),
        non_private=reconstruct(chat, basis),
        delta_gs=delta_gs, sigma=sigma, budget=budget, config=cfg,
        seed=int(seed), n=n, noise_span=jstar)


def iclp_qr_mean(curves, basis: SpectralBasis, psi: float, eta: float,
                 tau: float, budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Spectral-filter the mean coefficients and add full-span Laplace-process noise.

    The filter is lambda_j^eta / (lambda_j^eta + psi); the sensitivity is
    (2 tau / n) sum_j lambda_j^{eta - 1/2} / (lambda_j^eta + psi).
    """
    if budget.delta != 0:
        raise ConfigError("iclp-qr is a pure-DP mechanism; delta must be 0")
    if not psi > 0:
        raise ConfigError("psi must be positive")
    if not eta > 1:
        raise ConfigError("iclp-qr needs eta > 1")
    if not tau > 0:
        raise ConfigError("tau must be positive")
    _warn_if_undersmoothed(basis, eta)
    cbar, n = _clipped_mean_coeffs(curves, basis, tau)
    lam = basis.lam
    chat = _qr_filter(lam, psi, eta) * cbar
    delta_gs = _qr_delta(lam, psi, eta, tau, n)
    sigma = calibrate(delta_gs, budget, "iclp")
    noise = iclp_coefficient_draws(basis, sigma, seed, 1)[0]
    cfg = {"strategy": "iclp-qr", "psi": psi, "eta": eta, "tau": tau}
    return SanitizedRelease(
        summary=reconstruct(chat + noise, basis),
        non_private=reconstruct(chat, basis),
        delta_gs=delta_gs, sigma=sigma, budget=budget, config=cfg,
        seed=int(seed), n=n, noise_span=basis.floor_index)


def gp_adp_mean(curves, basis: SpectralBasis, psi: float, eta: float,
                tau: float, budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """(epsilon, delta) baseline: same spectral filter, Gaussian-process noise.

    The l2-type sensitivity is the Cameron-Martin operator bound of the
    filter applied to the worst 2 tau / n coefficient shift.
    """
    if not budget.delta > 0:
        raise ConfigError("gp-adp needs delta > 0")
    if not psi > 0:
        raise ConfigError("psi must be positive")
    if not eta > 1:
        raise ConfigError("gp-adp needs eta > 1")
    if not tau > 0:
        raise ConfigError("tau must be positive")
    _warn_if_undersmoothed(basis, eta)
    cbar, n = _clipped_mean_coeffs(curves, basis, tau)
    lam = basis.lam
    chat = _qr_filter(lam, psi, eta) * cbar
    delta_gs = _gp_delta(lam, psi, eta, tau, n)
    sigma = calibrate(delta_gs, budget, "gp")
    noise = gp_coefficient_draws(basis, sigma, seed, 1)[0]
    cfg = {"strategy": "gp-adp", "psi": psi, "eta": eta, "tau": tau}
    return SanitizedRelease(
        summary=reconstruct(chat + noise, basis),
        non_private=reconstruct(chat, basis),
        delta_gs=delta_gs, sigma=sigma, budget=budget, config=cfg,
        seed=int(seed), n=n, noise_span=basis.floor_index)


_MEAN_MECHANISMS = {
    "frl": lambda curves, basis, cfg, budget, seed: frl_mean(
        curves, basis, cfg.M, cfg.tau, budget, seed),
    "iclp-ar": lambda curves, basis, cfg, budget, seed: iclp_ar_mean(
        curves, basis, cfg.psi, cfg.eta, cfg.tau, budget, seed),
    "iclp-qr": lambda curves, basis, cfg, budget, seed: iclp_qr_mean(
        curves, basis, cfg.psi, cfg.eta, cfg.tau, budget, seed),
    "gp-adp": lambda curves, basis, cfg, budget, seed: gp_adp_mean(
        curves, basis, cfg.psi, cfg.eta, cfg.tau, budget, seed),
}


def sanitize_mean(curves, basis: SpectralBasis, config: MechanismConfig,
                  budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Dispatch to the configured mean-function mechanism."""
    return _MEAN_MECHANISMS[config.strategy](curves, basis, config, budget, seed)


# --- kernel density estimation ---------------------------------------------


def _kde_profile(kernel_basis: SpectralBasis, eta: float):
    """Normalized power-kernel bump centered at the domain midpoint.

    Returns (profile values on the grid, center node index, max value).
    The profile integrates to one under the grid quadrature.
    """
    grid = kernel_basis.grid
    nodes = grid.nodes
    center = np.array([0.5 * (a + b) for a, b in grid.bounds])
    c_idx = int(np.argmin(np.sum((nodes - center) ** 2, axis=1)))
    lam_eta = np.power(kernel_basis.lam, eta)
    p_raw = kernel_basis.phi @ (lam_eta * kernel_basis.phi[c_idx, :])
    integral = float(np.dot(grid.weights, p_raw))
    if integral <= 0:
        raise DataError("power-kernel bump has nonpositive mass")
    p = p_raw / integral
    return p, c_idx, float(np.max(p))


def _kde_evaluate(profile, c_idx, grid: GridSpec, points: np.ndarray,
                  h: float) -> np.ndarray:
    n = points.shape[0]
    if grid.dim == 1:
        axis = grid.axis(0)
        lag = axis - axis[c_idx]
        u = (axis[:, None] - points[:, 0][None, :]) / h
        vals = np.interp(u.ravel(), lag, profile, left=0.0, right=0.0)
        return vals.reshape(axis.size, n).sum(axis=1) / (n * h)
    k = grid.points_per_axis
    lag_axes = [grid.axis(i) - grid.axis(i)[idx]
                for i, idx in enumerate(np.unravel_index(c_idx, (k, k)))]
    interp = RegularGridInterpolator(
        lag_axes, profile.reshape(k, k), method="linear",
        bounds_error=False, fill_value=0.0)
    out = np.zeros(grid.n_nodes)
    nodes = grid.nodes
    for start in range(0, n, 64):
        pts = points[start:start + 64]
        u = (nodes[None, :, :] - pts[:, None, :]) / h
        out += interp(u.reshape(-1, 2)).reshape(pts.shape[0], -1).sum(axis=0)
    return out / (n * h ** 2)


def dp_kde(points, kernel_basis: SpectralBasis, eta: float, h: float,
           budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Private kernel density estimate using the power kernel as the bump.

    The estimation kernel is the power kernel C^eta (same eigenfunctions,
    eigenvalues raised to eta) normalized to unit mass; the bump for a
    sample point x_i is the profile evaluated at lag (x - x_i)/h. The
    sensitivity is 2 M_K sqrt(tr(C^{eta-1})) / (n h^d) with M_K the grid
    maximum of the normalized bump, and the noise is a Laplace process
    with covariance C.
    """
    if budget.delta != 0:
        raise ConfigError("dp_kde is a pure-DP mechanism; delta must be 0")
    if not eta > 1:
        raise ConfigError("dp_kde needs eta > 1")
    if not h > 0:
        raise ConfigError("bandwidth h must be positive")
    grid = kernel_basis.grid
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != grid.dim:
        raise DataError(
            f"points must be (n, {grid.dim}), got {pts.shape}")
    if pts.shape[0] < 1:
        raise DataError("need at least one sample point")
    for axis_i, (a, b) in enumerate(grid.bounds):
        bad = (pts[:, axis_i] < a) | (pts[:, axis_i] > b)
        if np.any(bad):
            raise DataError(
                f"point {int(np.argmax(bad))} lies outside [{a}, {b}] "
                f"on axis {axis_i}")
    n = pts.shape[0]
    _warn_if_undersmoothed(kernel_basis, eta)

    profile, c_idx, m_k = _kde_profile(kernel_basis, eta)
    density = _kde_evaluate(profile, c_idx, grid, pts, h)
    delta_gs = 2.0 * m_k * np.sqrt(partial_trace(kernel_basis, eta - 1.0)) \
        / (n * h ** grid.dim)
    sigma = calibrate(delta_gs, budget, "iclp")
    noise = iclp_coefficient_draws(kernel_basis, sigma, seed, 1)[0]
    non_private = FunctionOnGrid(grid, density)
    summary = FunctionOnGrid(grid, density + kernel_basis.phi @ noise)
    cfg = {"strategy": "kde", "eta": eta, "h": h, "m_k": m_k}
    return SanitizedRelease(
        summary=summary, non_private=non_private, delta_gs=delta_gs,
        sigma=sigma, budget=budget, config=cfg, seed=int(seed), n=n,
        noise_span=kernel_basis.floor_index)


# --- regularized empirical risk minimization --------------------------------


def rerm_sensitivity(loss_admissible_m: float, psi: float,
                     basis: SpectralBasis, eta: float, n: int) -> float:
    """Sensitivity bound for an M-admissible loss minimized with a
    quadratic power-kernel penalty:

        (M / (psi n)) sqrt(sup_x C^eta(x, x)) sqrt(tr(C^{eta-1})).

    sup_x C^eta(x, x) is taken over the grid as max_x sum_j lambda_j^eta
    phi_j(x)^2.
    """
    if not (loss_admissible_m > 0 and psi > 0 and n > 0):
        raise ConfigError("all rerm_sensitivity arguments must be positive")
    if not eta > 1:
        raise ConfigError("rerm_sensitivity needs eta > 1")
    lam_eta = np.power(basis.lam, eta)
    sup_c_eta = float(np.max((basis.phi ** 2) @ lam_eta))
    return (loss_admissible_m / (psi * n)) * np.sqrt(sup_c_eta) \
        * np.sqrt(partial_trace(basis, eta - 1.0))


# --- covariance surfaces -----------------------------------------------------


def dp_covariance(curves, basis: SpectralBasis, psi: float, eta: float,
                  tau: float, budget: PrivacyBudget, seed: int) -> SanitizedRelease:
    """Private covariance surface via the tensor-product spectral filter.

    The empirical covariance of the centered (and tau-clipped) curves is
    filtered coefficient-wise with (lambda_j lambda_l)^eta /
    ((lambda_j lambda_l)^eta + psi) and perturbed with a tensor Laplace
    process whose component (j, l) has scale sigma sqrt(lambda_j lambda_l).
    The sensitivity applies the quadratic-regularization formula to the
    tensor eigenvalues with norm bound tau^2.
    """
    if budget.delta != 0:
        raise ConfigError("dp_covariance is pure-DP; delta must be 0")
    if not psi > 0:
        raise ConfigError("psi must be positive")
    if not eta > 1:
        raise ConfigError("dp_covariance needs eta > 1")
    if not tau > 0:
        raise ConfigError("tau must be positive")
    grid = basis.grid
    if grid.dim != 1:
        raise DataError("dp_covariance expects curves on a 1D grid")
    v = _curves_matrix(curves, grid)
    n = v.shape[0]
    if n < 2:
        raise DataError("need at least two curves for a covariance")
    v = _clip_matrix(v, grid.weights, tau)
    y = v - v.mean(axis=0)
    cbar = (y.T @ y) / n
    cbar = 0.5 * (cbar + cbar.T)

    a = grid.weights[:, None] * basis.phi
    coeff = a.T @ cbar @ a
    coeff = 0.5 * (coeff + coeff.T)

    lam = basis.lam
    lam_prod = np.outer(lam, lam)
    lam_eta = np.power(lam_prod, eta)
    filt = lam_eta / (lam_eta + psi)
    chat = filt * coeff

    delta_gs = (2.0 * tau * tau / n) * float(
        np.sum(np.power(lam_prod, eta - 0.5) / (lam_eta + psi)))
    sigma = calibrate(delta_gs, budget, "iclp")
    j = basis.floor_index
    z = unit_laplace(draw_rng(seed, 0), (j, j))
    noise_coeff = sigma * np.sqrt(lam_prod) * z

    non_private = basis.phi @ chat @ basis.phi.T
    non_private = 0.5 * (non_private + non_private.T)
    summary = basis.phi @ (chat + noise_coeff) @ basis.phi.T

    grid2d = GridSpec(dim=2, points_per_axis=grid.points_per_axis,
                      bounds=(grid.bounds[0], grid.bounds[0]))
    cfg = {"strategy": "covariance-qr", "psi": psi, "eta": eta, "tau": tau}
    return SanitizedRelease(
        summary=FunctionOnGrid(grid2d, summary.ravel(order="C")),
        non_private=FunctionOnGrid(grid2d, non_private.ravel(order="C")),
        delta_gs=delta_gs, sigma=sigma, budget=budget, config=cfg,
        seed=int(seed), n=n, noise_span=j * j)


# --- function-on-scalar regression ------------------------------------------


def _solve_sanitized(t1_tilde: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve against the sanitized Gram matrix, failing loudly when singular.

    Re-drawing the noise after observing a singular outcome would condition
    the release on the output and break DP, so the failure is surfaced.
    """
    sv = np.linalg.svd(t1_tilde, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise PrivacyInfeasibleError(
            "sanitized T1 is singular; a re-draw would break DP, "
            "report failure instead")
    return np.linalg.solve(t1_tilde, rhs)


@dataclass(frozen=True, eq=False)
class FosRelease:
    """Sanitized function-on-scalar regression output."""

    beta: list                 # p sanitized coefficient curves
    t1_sanitized: np.ndarray   # sanitized (1/n) X'X
    t2_sanitized: list         # p sanitized mean curves of Y_i X_ik
    non_private_beta: list     # OLS coefficient curves
    delta_t1: float
    delta_t2: float
    sigma_t1: float
    sigma_t2: float
    gamma: float
    budget: PrivacyBudget
    seed: int

    def metadata(self) -> dict:
        return {
            "epsilon": self.budget.epsilon, "delta": self.budget.delta,
            "gamma": self.gamma, "delta_t1": self.delta_t1,
            "delta_t2": self.delta_t2, "sigma_t1": self.sigma_t1,
            "sigma_t2": self.sigma_t2, "seed": self.seed,
            "p": len(self.beta),
        }


def dp_fos_regression(x: np.ndarray, y_curves, basis: SpectralBasis,
                      gamma: float, psi: float, eta: float, tau: float,
                      budget: PrivacyBudget, seed: int,
                      bx: float = 1.0) -> FosRelease:
    """Sanitized function-on-scalar linear regression.

    Splits the budget: the scalar Gram matrix T1 = (1/n) sum X_i X_i'
    gets gamma * epsilon via entrywise Laplace noise (covariates are
    clamped to the declared bound |X_ij| <= bx, so each of the
    p(p+1)/2 distinct entries moves by at most 2 bx^2 / n under a swap);
    the curve block T2 (per-column means of Y_i(t) X_ik) gets
    (1 - gamma) * epsilon split evenly over the p columns and is
    sanitized with the quadratic-regularization machinery at norm bound
    tau * bx. The release is beta = T1~^{-1} T2~.

    A singular sanitized T1 is reported as an error: re-drawing the noise
    conditioned on the output would break differential privacy.
    """
    if budget.delta != 0:
        raise ConfigError("dp_fos_regression is pure-DP; delta must be 0")
    if not 0 < gamma < 1:
        raise ConfigError("gamma must lie in (0, 1)")
    if not (psi > 0 and eta > 1 and tau > 0 and bx > 0):
        raise ConfigError("psi, tau, bx must be positive and eta > 1")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError("covariates must form an (n, p) matrix")
    n, p = x.shape
    v = _curves_matrix(y_curves, basis.grid)
    if v.shape[0] != n:
        raise DataError(
            f"{n} covariate rows but {v.shape[0]} response curves")
    x = np.clip(x, -bx, bx)
    v = _clip_matrix(v, basis.grid.weights, tau)

    t1 = (x.T @ x) / n
    if np.linalg.cond(t1) > 1e12:
        raise DataError("X'X is singular; the regression is not identified")

    # T1: symmetric entrywise Laplace on the p(p+1)/2 distinct entries
    q = p * (p + 1) // 2
    delta_t1 = 2.0 * bx * bx * q / n
    eps_t1 = gamma * budget.epsilon
    sigma_t1 = delta_t1 / eps_t1
    iu = np.triu_indices(p)
    upper_noise = sigma_t1 * standard_laplace(draw_rng(seed, 0), q)
    noise_mat = np.zeros((p, p))
    noise_mat[iu] = upper_noise
    noise_mat = noise_mat + np.triu(noise_mat, 1).T
    t1_tilde = t1 + noise_mat

    # T2: one quadratic-regularized DP mean per column at (1-gamma) eps / p
    lam = basis.lam
    filt = _qr_filter(lam, psi, eta)
    delta_t2 = _qr_delta(lam, psi, eta, tau * bx, n)
    eps_col = (1.0 - gamma) * budget.epsilon / p
    sigma_t2 = delta_t2 / eps_col
    w = basis.grid.weights
    t2_coeffs = np.empty((p, basis.floor_index))
    t2_hat = np.empty_like(t2_coeffs)
    for k in range(p):
        wbar = (v * x[:, k][:, None]).mean(axis=0)
        c = (w * wbar) @ basis.phi
        t2_hat[k] = filt * c
        z = unit_laplace(draw_rng(seed, 1 + k), basis.floor_index)
        t2_coeffs[k] = t2_hat[k] + sigma_t2 * np.sqrt(lam) * z

    beta_coeffs = _solve_sanitized(t1_tilde, t2_coeffs)
    ols_coeffs = np.linalg.solve(t1, t2_hat)

    to_curves = lambda mat: [reconstruct(row, basis) for row in mat]
    return FosRelease(
        beta=to_curves(beta_coeffs), t1_sanitized=t1_tilde,
        t2_sanitized=to_curves(t2_coeffs),
        non_private_beta=to_curves(ols_coeffs),
        delta_t1=delta_t1, delta_t2=delta_t2, sigma_t1=sigma_t1,
        sigma_t2=sigma_t2, gamma=gamma, budget=budget, seed=int(seed))


# --- verification helpers ----------------------------------------------------


def worst_case_neighbors(basis: SpectralBasis, tau: float, n: int):
    """Neighbor datasets differing in one curve: tau phi_1 vs -tau phi_1.

    The remaining n - 1 curves are zero; this realizes the extreme
    one-record L2 displacement 2 tau used by the acceptance certificate.
    """
    if n < 1:
        raise ConfigError("need n >= 1")
    phi1 = basis.eigenfunction(1).values
    base = np.zeros((n, basis.grid.n_nodes))
    d = base.copy()
    d[0] = tau * phi1
    dp = base.copy()
    dp[0] = -tau * phi1
    return d, dp


def mean_release_max_log_ratio(strategy: str, basis: SpectralBasis,
                               tau: float, n: int, budget: PrivacyBudget,
                               n_draws: int, seed: int = 0, M: int = None,
                               psi: float = None, eta: float = None) -> float:
    """Exact log-density-ratio certificate for a mean mechanism.

    Builds the worst-case neighbor pair, runs the mechanism's noiseless
    estimator on both, and probes the analytic log ratio of the two noise
    measures with ``n_draws`` samples. For every pure-DP mechanism the
    result is bounded by delta_gs / sigma = epsilon.
    """
    cfg = MechanismConfig(strategy=strategy, tau=tau, M=M, psi=psi, eta=eta)
    if strategy == "gp-adp":
        raise ConfigError("the Laplace ratio certificate applies to pure DP")
    d, dp = worst_case_neighbors(basis, tau, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rel_d = sanitize_mean(d, basis, cfg, budget, seed)
        rel_dp = sanitize_mean(dp, basis, cfg, budget, seed)
    w = basis.grid.weights
    c_d = (w * rel_d.non_private.values) @ basis.phi
    c_dp = (w * rel_dp.non_private.values) @ basis.phi
    span = rel_d.noise_span
    if strategy == "frl":
        scales = np.full(span, rel_d.sigma)
    else:
        scales = rel_d.sigma * np.sqrt(basis.lam[:span])
    return max_laplace_log_ratio(c_d[:span], c_dp[:span], scales,
                                 n_draws, seed=seed)
