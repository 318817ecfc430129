"""Synthetic data generators, Monte-Carlo evaluation, and experiment drivers.

Every generator and driver is deterministic given its seed: replicate r of
a run draws data and noise from independent Philox streams keyed by
(master seed, r), so results are identical no matter how replicates are
scheduled. Reports are CSV rows with a fixed header; a companion figure is
rendered next to each CSV unless disabled.
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .grid import FunctionOnGrid, GridSpec, unit_interval_grid
from .kernels import KernelSpec, gram, trace_normalized
from .mechanisms import MechanismConfig, dp_kde, sanitize_mean
from .noise import PrivacyBudget, child_seed, draw_rng
from .selection import fit_decay, pss_frl, pss_qr
from .spectral import SpectralBasis, decompose

__all__ = [
    "ScenarioSpec",
    "MCResult",
    "TimingRow",
    "gen_mean",
    "gen_curves",
    "gen_mixture_points",
    "mixture_density_1d",
    "mc_mse",
    "kde_risk",
    "timing",
    "run_experiment",
    "CSV_HEADER",
]

CSV_HEADER = ("scenario,strategy,n,eps,psi_or_M,eta,"
              "mse_mean,mse_se,priv_err_mean,stat_err_mean,seconds")

_MEAN_SCENARIOS = ("S1", "S2", "S3", "S4")
_ERROR_PROCESSES = ("gp-rbf", "gp-exp", "basis-t5", "none")


@dataclass(frozen=True)
class ScenarioSpec:
    """A synthetic mean-protection setting: true mean plus error process."""

    mean_scenario: str
    n: int
    grid: GridSpec
    error_process: str = "gp-rbf"
    error_rho: float = 0.1
    error_scale: float = 1.0
    s4_seed: int = 0
    t5_terms: int = 100

    def __post_init__(self):
        if self.mean_scenario not in _MEAN_SCENARIOS:
            raise ConfigError(
                f"unknown mean scenario {self.mean_scenario!r}")
        if self.error_process not in _ERROR_PROCESSES:
            raise ConfigError(
                f"unknown error process {self.error_process!r}")
        if self.n < 1:
            raise ConfigError("scenario needs n >= 1")


def _normal_pdf(t: np.ndarray, mean: float, sd: float) -> np.ndarray:
    z = (t - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * np.sqrt(2.0 * np.pi))


def gen_mean(scenario: ScenarioSpec, grid: GridSpec,
             basis: SpectralBasis = None) -> FunctionOnGrid:
    """True mean function of a scenario on a 1D grid.

    S1 is a monotone bump 10 t exp(-t); S2 and S3 are Gaussian-bump
    mixtures of rising complexity; S4 is a random 25-term expansion in the
    supplied eigenbasis with U[-1, 1] coefficients frozen by the scenario
    seed.
    """
    if grid.dim != 1:
        raise DataError("mean scenarios are defined on 1D grids")
    t = grid.axis(0)
    name = scenario.mean_scenario
    if name == "S1":
        vals = 10.0 * t * np.exp(-t)
    elif name == "S2":
        vals = (0.3 * _normal_pdf(t, 0.3, 0.05)
                + 0.7 * _normal_pdf(t, 0.8, 0.05))
    elif name == "S3":
        vals = 0.2 * (_normal_pdf(t, 0.0, 0.03)
                      + _normal_pdf(t, 0.2, 0.05)
                      + _normal_pdf(t, 0.5, 0.05)
                      - _normal_pdf(t, 0.75, 0.03)
                      + _normal_pdf(t, 1.0, 0.03))
    else:
        if basis is None:
            raise ConfigError("scenario S4 needs a spectral basis")
        if basis.floor_index < 25:
            raise ConfigError("S4 needs at least 25 retained eigenfunctions")
        r = draw_rng(scenario.s4_seed).uniform(-1.0, 1.0, 25)
        vals = basis.phi[:, :25] @ r
    return FunctionOnGrid(grid, vals)


def _error_matrix(scenario: ScenarioSpec, seed: int,
                  basis: SpectralBasis = None) -> np.ndarray:
    """(n, K) error paths for one replicate."""
    grid = scenario.grid
    n, k = scenario.n, grid.n_nodes
    if scenario.error_process == "none" or scenario.error_scale == 0:
        return np.zeros((n, k))
    rng = draw_rng(seed)
    if scenario.error_process == "basis-t5":
        if basis is None:
            raise ConfigError("basis-t5 errors need a spectral basis")
        terms = min(scenario.t5_terms, basis.floor_index)
        u = rng.standard_t(5, size=(n, terms)) * scenario.error_scale
        return u @ basis.phi[:, :terms].T
    family = "gaussian" if scenario.error_process == "gp-rbf" else "exponential"
    spec = KernelSpec(family, scenario.error_rho,
                      amplitude=scenario.error_scale ** 2)
    g = gram(spec, grid)
    g[np.diag_indices_from(g)] += 1e-10 * spec.amplitude
    chol = np.linalg.cholesky(g)
    return rng.standard_normal((n, k)) @ chol.T


def gen_curves(scenario: ScenarioSpec, seed: int,
               basis: SpectralBasis = None) -> list:
    """n sample curves X_i = mu_0 + e_i for one replicate."""
    mu = gen_mean(scenario, scenario.grid, basis=basis)
    e = _error_matrix(scenario, seed, basis=basis)
    return [FunctionOnGrid(scenario.grid, mu.values + row) for row in e]


def _curve_matrix(scenario: ScenarioSpec, seed: int,
                  mu_values: np.ndarray, basis: SpectralBasis = None) -> np.ndarray:
    return mu_values[None, :] + _error_matrix(scenario, seed, basis=basis)


# --- mixture samples for the KDE experiments --------------------------------

_MIX_1D = {"p": (0.6, 0.4), "mean": (0.3, 0.7), "sd": 0.1, "lo": 0.0, "hi": 1.0}
_MIX_2D = {"p": (0.6, 0.4), "mean": ((-3.0, -3.0), (3.0, 2.0)),
           "cov": ((1.0, 0.5), (0.5, 1.0)), "lo": -5.0, "hi": 5.0}


def gen_mixture_points(setting: str, n: int, seed: int) -> np.ndarray:
    """Truncated-normal mixture samples for the density experiments.

    "1d": 0.6 N(0.3, 0.1^2) + 0.4 N(0.7, 0.1^2) truncated to [0, 1].
    "2d": 0.6 N((-3,-3), S) + 0.4 N((3,2), S), S = [[1,.5],[.5,1]],
    truncated to [-5, 5]^2. Sampling is rejection from the untruncated
    law (acceptance is above 99% for these parameters).
    """
    if setting not in ("1d", "2d"):
        raise ConfigError(f"unknown mixture setting {setting!r}")
    if n < 0:
        raise ConfigError("n must be nonnegative")
    dim = 1 if setting == "1d" else 2
    if n == 0:
        return np.empty((0, dim))
    rng = draw_rng(seed)
    out = np.empty((n, dim))
    filled = 0
    if setting == "2d":
        chol = np.linalg.cholesky(np.asarray(_MIX_2D["cov"]))
    while filled < n:
        m = max(n - filled, 64)
        if setting == "1d":
            comp = rng.random(m) < _MIX_1D["p"][0]
            means = np.where(comp, _MIX_1D["mean"][0], _MIX_1D["mean"][1])
            cand = (means + _MIX_1D["sd"] * rng.standard_normal(m))[:, None]
            ok = (cand[:, 0] >= _MIX_1D["lo"]) & (cand[:, 0] <= _MIX_1D["hi"])
        else:
            comp = rng.random(m) < _MIX_2D["p"][0]
            means = np.where(comp[:, None], _MIX_2D["mean"][0],
                             _MIX_2D["mean"][1])
            cand = means + rng.standard_normal((m, 2)) @ chol.T
            ok = np.all((cand >= _MIX_2D["lo"]) & (cand <= _MIX_2D["hi"]),
                        axis=1)
        take = min(int(np.sum(ok)), n - filled)
        out[filled:filled + take] = cand[ok][:take]
        filled += take
    return out


def mixture_density_1d(t: np.ndarray) -> np.ndarray:
    """True density of the 1D mixture setting (truncation renormalized)."""
    from scipy.stats import norm
    p1, p2 = _MIX_1D["p"]
    sd = _MIX_1D["sd"]
    lo, hi = _MIX_1D["lo"], _MIX_1D["hi"]
    total = np.zeros_like(np.asarray(t, dtype=float))
    for p, m in zip((p1, p2), _MIX_1D["mean"]):
        mass = norm.cdf(hi, m, sd) - norm.cdf(lo, m, sd)
        total = total + p * norm.pdf(t, m, sd) / mass
    return total


# --- Monte-Carlo evaluation ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class MCResult:
    """Per-replicate squared L2 errors of one (scenario, mechanism) cell."""

    mse: np.ndarray
    priv_err: np.ndarray
    stat_err: np.ndarray
    priv_err_expected: float
    config: dict
    seconds: float

    @property
    def mse_mean(self) -> float:
        return float(np.mean(self.mse))

    @property
    def mse_se(self) -> float:
        return float(np.std(self.mse, ddof=1) / np.sqrt(self.mse.size))

    @property
    def priv_err_mean(self) -> float:
        return float(np.mean(self.priv_err))

    @property
    def stat_err_mean(self) -> float:
        return float(np.mean(self.stat_err))


def _expected_noise_l2(release, basis: SpectralBasis) -> float:
    """Closed-form E||summary - non_private||^2 for a release."""
    span = release.noise_span
    if release.config.get("strategy") == "frl":
        return 2.0 * release.sigma ** 2 * span
    return release.sigma ** 2 * float(np.sum(basis.lam[:span]))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ICLP_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, count: int):
    """Run fn(i) for i in range(count), in parallel if allowed, in order."""
    workers = _workers()
    if workers == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def mc_mse(scenario: ScenarioSpec, basis: SpectralBasis,
           mech_config: MechanismConfig, budget: PrivacyBudget,
           replicates: int, seed: int) -> MCResult:
    """Monte-Carlo squared-error study of one sanitizer on one scenario.

    Each replicate draws fresh data and fresh noise and records
    ||mu~ - mu_0||^2 along with its privacy part ||mu~ - mu^||^2 and
    statistical part ||mu^ - mu_0||^2.
    """
    if replicates < 2:
        raise ConfigError("need at least 2 replicates")
    t0 = time.perf_counter()
    mu0 = gen_mean(scenario, scenario.grid, basis=basis)
    w = scenario.grid.weights

    def one(r: int):
        v = _curve_matrix(scenario, child_seed(seed, r, 0), mu0.values,
                          basis=basis)
        rel = sanitize_mean(v, basis, mech_config, budget,
                            child_seed(seed, r, 1))
        d_priv = rel.summary.values - rel.non_private.values
        d_stat = rel.non_private.values - mu0.values
        d_tot = rel.summary.values - mu0.values
        return (float((d_tot * d_tot) @ w), float((d_priv * d_priv) @ w),
                float((d_stat * d_stat) @ w), rel)

    rows = _map_ordered(one, replicates)
    mse, priv, stat, _ = zip(*rows)
    return MCResult(
        mse=np.asarray(mse, dtype=float),
        priv_err=np.asarray(priv, dtype=float),
        stat_err=np.asarray(stat, dtype=float),
        priv_err_expected=_expected_noise_l2(rows[0][3], basis),
        config=mech_config.as_dict(), seconds=time.perf_counter() - t0)


def kde_risk(setting: str, basis: SpectralBasis, eta: float, h: float,
             n: int, budget: PrivacyBudget, replicates: int,
             seed: int) -> MCResult:
    """Monte-Carlo L2 risk of the private KDE on the mixture setting."""
    if setting != "1d":
        raise ConfigError("the risk study covers the 1d setting")
    if replicates < 2:
        raise ConfigError("need at least 2 replicates")
    t0 = time.perf_counter()
    grid = basis.grid
    f0 = mixture_density_1d(grid.axis(0))
    w = grid.weights

    def one(r: int):
        pts = gen_mixture_points(setting, n, child_seed(seed, r, 0))
        rel = dp_kde(pts, basis, eta, h, budget, child_seed(seed, r, 1))
        d_tot = rel.summary.values - f0
        d_priv = rel.summary.values - rel.non_private.values
        d_stat = rel.non_private.values - f0
        return (float((d_tot * d_tot) @ w), float((d_priv * d_priv) @ w),
                float((d_stat * d_stat) @ w), rel)

    rows = _map_ordered(one, replicates)
    mse, priv, stat, _ = zip(*rows)
    return MCResult(
        mse=np.asarray(mse, dtype=float),
        priv_err=np.asarray(priv, dtype=float),
        stat_err=np.asarray(stat, dtype=float),
        priv_err_expected=_expected_noise_l2(rows[0][3], basis),
        config={"strategy": "kde", "eta": eta, "h": h, "n": n},
        seconds=time.perf_counter() - t0)


# --- timing -------------------------------------------------------------------


@dataclass(frozen=True)
class TimingRow:
    k: int
    decompose_seconds: float
    iclp_seconds: float
    gp_seconds: float

    @property
    def ratio(self) -> float:
        return self.iclp_seconds / self.gp_seconds if self.gp_seconds else 0.0


def timing(k_list, draws: int, seed: int,
           kernel: KernelSpec = None) -> list:
    """Wall-clock comparison of Laplace-process vs Gaussian-process batches.

    Per grid size: decomposition time is reported separately; each batch
    generates ``draws`` full paths, so the per-draw cost after
    decomposition is O(K * J_max).
    """
    from .noise import sample_gp, sample_iclp
    if draws < 0:
        raise ConfigError("draws must be nonnegative")
    spec = kernel or KernelSpec.matern(1.5, 0.1)
    rows = []
    for k in k_list:
        grid = unit_interval_grid(int(k))
        g = gram(spec, grid)
        t0 = time.perf_counter()
        basis = decompose(g, grid)
        t_dec = time.perf_counter() - t0
        t_iclp = t_gp = 0.0
        if draws > 0:
            sample_iclp(basis, 1.0, seed, 0)   # warmup
            t0 = time.perf_counter()
            for i in range(draws):
                sample_iclp(basis, 1.0, seed, i)
            t_iclp = time.perf_counter() - t0
            sample_gp(basis, 1.0, seed, 0)
            t0 = time.perf_counter()
            for i in range(draws):
                sample_gp(basis, 1.0, seed, i)
            t_gp = time.perf_counter() - t0
        rows.append(TimingRow(int(k), t_dec, t_iclp, t_gp))
    return rows


# --- experiment driver --------------------------------------------------------

_MEAN_KEYS = {
    "experiment", "scenario", "strategies", "n_values", "eps_values",
    "replicates", "seed", "grid_points", "kernel", "rho", "tau",
    "floor_rel", "error_process", "error_rho", "error_scale", "s4_seed",
    "psi", "eta", "M", "delta", "out", "plot", "record_seconds",
}
_KDE_KEYS = {
    "experiment", "setting", "n_values", "eps_values", "replicates",
    "seed", "grid_points", "kernel", "rho", "eta", "h_values",
    "floor_rel", "out", "plot", "record_seconds",
}

_DEFAULTS = {
    "kernel": "matern32", "rho": 0.1, "grid_points": 200,
    "floor_rel": 1e-12, "tau": 4.0, "error_process": "gp-rbf",
    "error_rho": 0.1, "error_scale": 1.0, "s4_seed": 0,
    "eps_values": [1.0], "replicates": 100, "plot": True,
    "record_seconds": False, "setting": "1d", "eta": None,
    "psi": None, "M": None, "h_values": None, "scenario": "S1",
    "strategies": ["iclp-qr"], "out": None, "delta": 0.01,
}


def _load_config(config) -> dict:
    if isinstance(config, (str, os.PathLike)):
        with open(config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    if not isinstance(config, dict):
        raise ConfigError("experiment config must be a JSON object")
    return dict(config)


def _check_keys(cfg: dict, allowed: set) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _build_basis(cfg: dict) -> SpectralBasis:
    grid = unit_interval_grid(int(cfg["grid_points"]))
    spec = KernelSpec.from_cli_name(cfg["kernel"], float(cfg["rho"]))
    spec = trace_normalized(spec, grid)
    return decompose(gram(spec, grid), grid, floor_rel=float(cfg["floor_rel"]))


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _mean_config_for(strategy: str, cfg: dict, basis: SpectralBasis,
                     n: int, eps: float) -> MechanismConfig:
    """Resolve mechanism parameters, falling back to privacy-safe selection."""
    tau = float(cfg["tau"])
    beta_hat = fit_decay(basis, 5, min(50, basis.floor_index))
    if strategy == "frl":
        m = cfg.get("M")
        if m is None:
            lo, hi = pss_frl(n, beta_hat, pss_qr(n, eps, beta_hat).eta,
                             j_max=basis.floor_index).m_range
            m = max(lo, min(hi, basis.floor_index))
        return MechanismConfig("frl", tau, M=int(m))
    psi, eta = cfg.get("psi"), cfg.get("eta")
    if psi is None or eta is None:
        choice = pss_qr(n, eps, beta_hat)
        psi = choice.psi if psi is None else psi
        eta = choice.eta if eta is None else eta
    return MechanismConfig(strategy, tau, psi=float(psi), eta=float(eta))


def _write_report(rows, out, plot: bool, kind: str) -> None:
    lines = [CSV_HEADER] + [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if plot:
            from .plots import plot_report
            plot_report(rows, os.path.splitext(str(out))[0] + ".png",
                        kind=kind)
    else:
        sys.stdout.write(text)


def run_experiment(config) -> list:
    """Drive a full benchmark from a flat JSON config; returns CSV rows.

    Deterministic given the master seed: the ``seconds`` column is written
    as 0.0 unless ``record_seconds`` is set, so that reruns are
    bit-identical (wall-clock always goes to stderr).
    """
    cfg = _load_config(config)
    kind = cfg.get("experiment")
    if kind not in ("mean", "kde"):
        raise ConfigError("config needs experiment: 'mean' or 'kde'")
    _check_keys(cfg, _MEAN_KEYS if kind == "mean" else _KDE_KEYS)
    merged = dict(_DEFAULTS)
    merged.update(cfg)
    cfg = merged
    if "seed" not in cfg:
        raise ConfigError("config needs a master seed")
    if "n_values" not in cfg:
        raise ConfigError("config needs n_values")
    seed = int(cfg["seed"])
    basis = _build_basis(cfg)
    rows = []
    if kind == "mean":
        for n in cfg["n_values"]:
            scenario = ScenarioSpec(
                mean_scenario=cfg["scenario"], n=int(n), grid=basis.grid,
                error_process=cfg["error_process"],
                error_rho=float(cfg["error_rho"]),
                error_scale=float(cfg["error_scale"]),
                s4_seed=int(cfg["s4_seed"]))
            for eps in cfg["eps_values"]:
                for strategy in cfg["strategies"]:
                    # only the approximate-DP baseline spends a delta
                    delta = float(cfg["delta"]) if strategy == "gp-adp" else 0.0
                    budget = PrivacyBudget(float(eps), delta)
                    mech = _mean_config_for(strategy, cfg, basis, int(n),
                                            float(eps))
                    cell_seed = child_seed(seed, int(n), int(round(1e6 * eps)))
                    res = mc_mse(scenario, basis, mech, budget,
                                 int(cfg["replicates"]), cell_seed)
                    psi_or_m = mech.M if strategy == "frl" else mech.psi
                    secs = res.seconds if cfg["record_seconds"] else 0.0
                    print(f"[bench] {cfg['scenario']} {strategy} n={n} "
                          f"eps={eps} took {res.seconds:.2f}s",
                          file=sys.stderr)
                    rows.append((cfg["scenario"], strategy, int(n),
                                 float(eps), psi_or_m, mech.eta,
                                 res.mse_mean, res.mse_se,
                                 res.priv_err_mean, res.stat_err_mean,
                                 round(secs, 3)))
    else:
        eta = cfg["eta"] if cfg["eta"] is not None else 1.5
        h_values = cfg["h_values"]
        for i, n in enumerate(cfg["n_values"]):
            d = basis.grid.dim
            h = (float(h_values[i]) if h_values
                 else float(n) ** (-1.0 / (4 + d)))
            for eps in cfg["eps_values"]:
                budget = PrivacyBudget(float(eps))
                cell_seed = child_seed(seed, int(n), int(round(1e6 * eps)))
                res = kde_risk(cfg["setting"], basis, float(eta), h,
                               int(n), budget, int(cfg["replicates"]),
                               cell_seed)
                secs = res.seconds if cfg["record_seconds"] else 0.0
                print(f"[bench] kde n={n} eps={eps} h={h:.4f} took "
                      f"{res.seconds:.2f}s", file=sys.stderr)
                rows.append((f"KDE-{cfg['setting']}", "iclp-qr", int(n),
                             float(eps), h, float(eta), res.mse_mean,
                             res.mse_se, res.priv_err_mean,
                             res.stat_err_mean, round(secs, 3)))
    _write_report(rows, cfg["out"], bool(cfg["plot"]), kind)
    return rows
