"""Privacy-safe selection of regularization parameters, plus a plainly
labeled NON-private cross-validation baseline.

Privacy-safe choices depend only on the sample size, the privacy budget,
and the noise covariance (through its fitted eigenvalue decay rate); they
never read curve values, so spending them carries no extra budget.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .noise import draw_rng
from .spectral import SpectralBasis

__all__ = ["PssChoice", "fit_decay", "pss_qr", "pss_frl", "cv_psi",
           "default_cv_grid"]


@dataclass(frozen=True)
class PssChoice:
    """A data-independent parameter choice and its provenance."""

    strategy: str
    eta: float
    beta_hat: float
    psi: float = None
    psi_min: float = None          # admissible lower edge, documentation only
    m_range: tuple = None          # (lo, hi) truncation window for frl
    note: str = "data-independent"

    def as_dict(self) -> dict:
        return asdict(self)


def fit_decay(basis: SpectralBasis, j_lo: int = 5, j_hi: int = 50) -> float:
    """Polynomial eigenvalue decay rate beta_hat.

    Least-squares slope of log(lambda_j) against log(j) over the 1-based
    index window [j_lo, j_hi], negated so that decaying spectra give a
    positive rate.
    """
    if not (2 <= j_lo < j_hi <= basis.floor_index):
        raise ConfigError(
            f"fit window [{j_lo}, {j_hi}] must sit inside "
            f"[2, {basis.floor_index}]")
    if j_hi - j_lo + 1 < 3:
        raise ConfigError("decay fit needs at least 3 points")
    j = np.arange(j_lo, j_hi + 1, dtype=float)
    lam = basis.lam[j_lo - 1: j_hi]
    slope = np.polyfit(np.log(j), np.log(lam), 1)[0]
    return float(-slope)


def pss_qr(n: int, epsilon: float, beta_hat: float) -> PssChoice:
    """Privacy-safe (psi, eta) for the quadratic-regularization mechanism.

    psi = 1/n (constant one after trace normalization) and
    eta = 1 + 2/beta_hat + 0.1; the 0.1 margin keeps the oversmoothing
    strict so the privacy error stays a lower order than the statistical
    error. Also reports the admissible lower edge
    psi_min = (n epsilon^2)^(-eta beta / (beta + 2)).
    """
    if n < 2:
        raise ConfigError("need n >= 2")
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if not beta_hat > 1:
        raise ConfigError(
            f"eigenvalue decay rate {beta_hat:g} violates the EDR "
            "requirement beta > 1")
    eta = 1.0 + 2.0 / beta_hat + 0.1
    psi = 1.0 / n
    psi_min = float((n * epsilon ** 2) ** (-eta * beta_hat / (beta_hat + 2.0)))
    if psi_min > psi:
        warnings.warn(
            f"admissibility window is empty at n={n}, eps={epsilon:g}: "
            f"psi_min={psi_min:.3g} exceeds psi={psi:.3g}", UserWarning)
    return PssChoice(strategy="qr", eta=eta, beta_hat=beta_hat,
                     psi=psi, psi_min=psi_min)


def _int_root_floor(n: int, k: int) -> int:
    """floor(n^(1/k)) without float truncation artifacts."""
    r = int(round(n ** (1.0 / k)))
    while r ** k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


def pss_frl(n: int, beta_hat: float, eta: float,
            j_max: int = None) -> PssChoice:
    """Privacy-safe truncation window for the coefficient-wise mechanism.

    Integer range [ceil(n^{1/(eta beta)}), floor(n^{1/3})], clipped to
    [1, j_max] when a retained-span cap is supplied. An empty window is
    reported as-is (lo > hi).
    """
    if n < 2:
        raise ConfigError("need n >= 2")
    if not beta_hat > 1:
        raise ConfigError("EDR violation: beta_hat must exceed 1")
    if not eta >= 1:
        raise ConfigError("eta must be at least 1")
    lo = int(np.ceil(n ** (1.0 / (eta * beta_hat)) - 1e-9))
    hi = _int_root_floor(n, 3)
    lo = max(lo, 1)
    if j_max is not None:
        lo = min(lo, j_max)
        hi = min(hi, j_max)
    return PssChoice(strategy="frl", eta=eta, beta_hat=beta_hat,
                     m_range=(lo, hi))


def default_cv_grid(psi_pss: float, n_points: int = 10) -> np.ndarray:
    """Log-spaced candidate grid [0.1 psi, 10 psi] around a PSS value."""
    return np.geomspace(0.1 * psi_pss, 10.0 * psi_pss, n_points)


def cv_psi(curves, basis: SpectralBasis, eta: float, candidate_psis,
           folds: int, seed: int = 0) -> float:
    """NON-PRIVATE k-fold cross-validation over psi. Baseline only.

    Reads the data, so it enjoys no privacy guarantee; provided for
    comparison against privacy-safe selection. Fold assignment is a
    deterministic shuffle from ``seed``; ties go to the smallest psi.
    """
    candidates = np.sort(np.asarray(list(candidate_psis), dtype=float))
    if candidates.size == 0:
        raise ConfigError("need at least one candidate psi")
    if np.any(candidates <= 0):
        raise ConfigError("candidate psis must be positive")
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    grid = curves[0].grid if not isinstance(curves, np.ndarray) else basis.grid
    if isinstance(curves, np.ndarray):
        v = np.asarray(curves, dtype=float)
    else:
        v = np.vstack([c.values for c in curves])
    n = v.shape[0]
    if n < folds:
        raise ConfigError(f"{folds}-fold CV needs at least {folds} curves")
    if grid != basis.grid:
        raise ConfigError("curves and basis live on different grids")

    perm = draw_rng(seed).permutation(n)
    w = basis.grid.weights
    lam_eta = np.power(basis.lam, eta)
    coeffs = (v * w) @ basis.phi
    scores = np.zeros(candidates.size)
    for k in range(folds):
        held = perm[k::folds]
        train = np.setdiff1d(perm, held)
        c_train = coeffs[train].mean(axis=0)
        held_v = v[held]
        for i, psi in enumerate(candidates):
            mu_hat = basis.phi @ (lam_eta / (lam_eta + psi) * c_train)
            resid = held_v - mu_hat
            scores[i] += np.mean((resid * resid) @ w)
    return float(candidates[int(np.argmin(scores))])
