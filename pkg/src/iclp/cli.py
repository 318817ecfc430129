"""Command-line interface.

One binary, audited subcommands:

    iclp kernel eig       eigendecompose a kernel on a grid
    iclp noise sample     draw Laplace-process or Gaussian-process paths
    iclp mean sanitize    release a private mean function
    iclp kde sanitize     release a private kernel density estimate
    iclp cov sanitize     release a private covariance surface
    iclp fos sanitize     release private function-on-scalar coefficients
    iclp select pss       privacy-safe parameter selection
    iclp verify dp        density-ratio certificate for two summaries
    iclp bench mean|kde|timing   reproducible experiment drivers

Exit codes: 0 success, 2 config error, 3 data error, 4 privacy infeasible.
Every randomized subcommand requires an explicit --seed; every
sanitization writes a metadata JSON next to its CSV and refuses to run
again onto an existing metadata file unless --i-know-this-composes is
given (a second release under "the same" budget composes, it does not
replace).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench
from .errors import ConfigError, DataError, IclpError, PrivacyInfeasibleError
from .grid import GridSpec, load_csv, save_csv, unit_interval_grid
from .kernels import CLI_KERNELS, KernelSpec, gram, trace_normalized
from .mechanisms import (MechanismConfig, dp_covariance, dp_fos_regression,
                         dp_kde, sanitize_mean)
from .noise import PrivacyBudget, dp_ratio_check, sample_gp, sample_iclp
from .selection import fit_decay, pss_frl, pss_qr
from .spectral import decompose, save_basis_csv, weighted_l1_norm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PRIVACY = 4


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", default="matern32", choices=sorted(CLI_KERNELS),
                   help="covariance kernel family (default matern32)")
    p.add_argument("--rho", type=float, default=0.1,
                   help="kernel length scale (default 0.1)")
    p.add_argument("--amplitude", type=float, default=1.0,
                   help="kernel amplitude at lag zero (default 1)")
    p.add_argument("--normalize-trace", action="store_true",
                   help="rescale so the quadrature trace equals 1")
    p.add_argument("--floor-rel", type=float, default=1e-12,
                   help="relative eigenvalue floor (default 1e-12)")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-points", type=int, default=200,
                   help="nodes per axis (default 200)")
    p.add_argument("--bounds", default="0:1",
                   help="axis bounds a:b, or a:b,a:b for 2D (default 0:1); "
                        "use --bounds=-5:5 for negative bounds")
    p.add_argument("--dim", type=int, default=1, choices=(1, 2),
                   help="domain dimension (default 1)")


def _grid_from_args(args) -> GridSpec:
    pairs = []
    for part in args.bounds.split(","):
        a, b = part.split(":")
        pairs.append((float(a), float(b)))
    if len(pairs) == 1 and args.dim == 2:
        pairs = pairs * 2
    return GridSpec(dim=args.dim, points_per_axis=args.grid_points,
                    bounds=tuple(pairs))


def _kernel_from_args(args) -> KernelSpec:
    return KernelSpec.from_cli_name(args.kernel, args.rho,
                                    amplitude=args.amplitude)


def _basis_from_args(args, grid: GridSpec):
    spec = _kernel_from_args(args)
    if args.normalize_trace:
        spec = trace_normalized(spec, grid)
    return decompose(gram(spec, grid), grid, floor_rel=args.floor_rel)


def _budget_from_args(args) -> PrivacyBudget:
    return PrivacyBudget(args.eps, getattr(args, "delta", 0.0) or 0.0)


def _compose_guard(args) -> None:
    meta = getattr(args, "meta", None)
    if meta and os.path.exists(meta) and not args.i_know_this_composes:
        raise ConfigError(
            f"metadata file {meta!r} already exists: a repeated release "
            "composes budgets; pass --i-know-this-composes to proceed")


def _write_meta(args, payload: dict) -> None:
    if getattr(args, "meta", None):
        payload = dict(payload)
        payload["floor_rel"] = args.floor_rel
        payload["kernel"] = {"name": args.kernel, "rho": args.rho,
                             "amplitude": args.amplitude,
                             "normalize_trace": bool(args.normalize_trace)}
        with open(args.meta, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _maybe_plot(args, release) -> None:
    if getattr(args, "plot", None):
        from .plots import plot_release
        plot_release(release, args.plot)


# --- subcommand handlers -----------------------------------------------------


def _cmd_kernel_eig(args) -> int:
    grid = _grid_from_args(args)
    basis = _basis_from_args(args, grid)
    save_basis_csv(basis, args.out)
    print(f"retained {basis.floor_index} eigenpairs; "
          f"lambda_1 = {basis.lam[0]:.6g}")
    return EXIT_OK


def _cmd_noise_sample(args) -> int:
    grid = _grid_from_args(args)
    basis = _basis_from_args(args, grid)
    sampler = sample_iclp if args.process == "iclp" else sample_gp
    draws = [sampler(basis, args.sigma, args.seed, i).path
             for i in range(args.draws)]
    save_csv(draws, args.out)
    print(f"wrote {len(draws)} {args.process} draw(s) to {args.out}")
    return EXIT_OK


def _cmd_mean_sanitize(args) -> int:
    budget = _budget_from_args(args)
    if args.strategy == "frl" and args.M is None:
        raise ConfigError("frl needs an explicit --M (see `iclp select pss`)")
    _compose_guard(args)
    curves = load_csv(args.infile)
    grid = curves[0].grid
    basis = _basis_from_args(args, grid)
    psi, eta = args.psi, args.eta
    if args.strategy in ("iclp-qr", "gp-adp") and (psi is None or eta is None):
        choice = pss_qr(len(curves), args.eps,
                        fit_decay(basis, 5, min(50, basis.floor_index)))
        psi = choice.psi if psi is None else psi
        eta = choice.eta if eta is None else eta
        print(f"privacy-safe selection: psi={psi:g}, eta={eta:g}",
              file=sys.stderr)
    if args.strategy == "iclp-ar" and (psi is None or eta is None):
        raise ConfigError("iclp-ar needs explicit --psi and --eta")
    cfg = MechanismConfig(args.strategy, args.tau, M=args.M, psi=psi, eta=eta)
    release = sanitize_mean(curves, basis, cfg, budget, args.seed)
    save_csv(release.summary, args.out)
    _write_meta(args, release.metadata())
    _maybe_plot(args, release)
    print(f"delta_gs={release.delta_gs:.6g} sigma={release.sigma:.6g} "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_kde_sanitize(args) -> int:
    budget = _budget_from_args(args)
    _compose_guard(args)
    points = np.loadtxt(args.infile, delimiter=",", comments="#", ndmin=2)
    grid = _grid_from_args(args)
    basis = _basis_from_args(args, grid)
    release = dp_kde(points, basis, args.eta, args.h, budget, args.seed)
    save_csv(release.summary, args.out)
    _write_meta(args, release.metadata())
    _maybe_plot(args, release)
    print(f"delta_gs={release.delta_gs:.6g} sigma={release.sigma:.6g} "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_cov_sanitize(args) -> int:
    budget = _budget_from_args(args)
    _compose_guard(args)
    curves = load_csv(args.infile)
    basis = _basis_from_args(args, curves[0].grid)
    psi, eta = args.psi, args.eta
    if psi is None or eta is None:
        choice = pss_qr(len(curves), args.eps,
                        fit_decay(basis, 5, min(50, basis.floor_index)))
        psi = choice.psi if psi is None else psi
        eta = choice.eta if eta is None else eta
        print(f"privacy-safe selection: psi={psi:g}, eta={eta:g}",
              file=sys.stderr)
    release = dp_covariance(curves, basis, psi, eta, args.tau, budget,
                            args.seed)
    save_csv(release.summary, args.out)
    _write_meta(args, release.metadata())
    _maybe_plot(args, release)
    print(f"delta_gs={release.delta_gs:.6g} sigma={release.sigma:.6g} "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_fos_sanitize(args) -> int:
    budget = _budget_from_args(args)
    _compose_guard(args)
    y = load_csv(args.in_y)
    x = np.loadtxt(args.in_x, delimiter=",", comments="#", ndmin=2)
    basis = _basis_from_args(args, y[0].grid)
    release = dp_fos_regression(x, y, basis, args.gamma, args.psi, args.eta,
                                args.tau, budget, args.seed, bx=args.bx)
    save_csv(release.beta, args.out)
    np.savetxt(args.out_t1, release.t1_sanitized, delimiter=",", fmt="%.17g")
    _write_meta(args, release.metadata())
    print(f"delta_t1={release.delta_t1:.6g} delta_t2={release.delta_t2:.6g} "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_select_pss(args) -> int:
    if args.beta_hat is not None:
        beta_hat = args.beta_hat
    else:
        grid = unit_interval_grid(args.grid_points)
        basis = _basis_from_args(args, grid)
        beta_hat = fit_decay(basis, 5, min(50, basis.floor_index))
    if args.strategy == "qr":
        choice = pss_qr(args.n, args.eps, beta_hat)
    else:
        eta = args.eta if args.eta is not None else pss_qr(
            args.n, args.eps, beta_hat).eta
        choice = pss_frl(args.n, beta_hat, eta)
    print(json.dumps(choice.as_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_verify_dp(args) -> int:
    f_d = load_csv(args.infile)[0]
    f_dp = load_csv(args.neighbor)[0]
    basis = _basis_from_args(args, f_d.grid)
    budget = PrivacyBudget(args.eps)
    max_ratio = dp_ratio_check(f_d, f_dp, basis, args.sigma, budget,
                               args.draws, seed=args.seed)
    bound = (weighted_l1_norm(f_d - f_dp, basis) / args.sigma
             if args.sigma > 0 else 0.0)
    print(json.dumps({"max_log_ratio": max_ratio, "analytic_bound": bound,
                      "epsilon": args.eps}, sort_keys=True))
    return EXIT_OK if max_ratio <= args.eps + 1e-9 else EXIT_PRIVACY


def _cmd_bench_mean(args) -> int:
    bench.run_experiment(args.config)
    return EXIT_OK


def _cmd_bench_kde(args) -> int:
    bench.run_experiment(args.config)
    return EXIT_OK


def _cmd_bench_timing(args) -> int:
    k_list = [int(k) for k in args.K.split(",")]
    rows = bench.timing(k_list, args.draws, args.seed)
    print("K,decompose_seconds,iclp_seconds,gp_seconds,ratio")
    for r in rows:
        print(f"{r.k},{r.decompose_seconds:.6f},{r.iclp_seconds:.6f},"
              f"{r.gp_seconds:.6f},{r.ratio:.4f}")
    if args.plot:
        from .plots import plot_timing
        plot_timing(rows, args.plot)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _sanitize_common(p, meta_required=True):
    p.add_argument("--eps", type=float, required=True,
                   help="privacy budget epsilon")
    p.add_argument("--seed", type=int, required=True,
                   help="noise seed (mandatory: no wall-clock seeding)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--meta", required=meta_required,
                   help="metadata JSON path written beside the CSV")
    p.add_argument("--plot", help="optional PNG rendering of the release")
    p.add_argument("--i-know-this-composes", action="store_true",
                   help="allow re-releasing onto an existing metadata file")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="iclp", description=__doc__,
                  formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="kernel operations")
    ksub = p.add_subparsers(dest="action", required=True)
    pk = ksub.add_parser("eig", help="eigendecompose a kernel on a grid")
    _add_kernel_flags(pk)
    _add_grid_flags(pk)
    pk.add_argument("--out", required=True)
    pk.set_defaults(func=_cmd_kernel_eig)

    p = sub.add_parser("noise", help="noise sampling")
    nsub = p.add_subparsers(dest="action", required=True)
    pn = nsub.add_parser("sample", help="draw noise paths")
    _add_kernel_flags(pn)
    _add_grid_flags(pn)
    pn.add_argument("--process", choices=("iclp", "gp"), required=True)
    pn.add_argument("--sigma", type=float, required=True)
    pn.add_argument("--seed", type=int, required=True)
    pn.add_argument("--draws", type=int, default=1)
    pn.add_argument("--out", required=True)
    pn.set_defaults(func=_cmd_noise_sample)

    p = sub.add_parser("mean", help="mean-function release")
    msub = p.add_subparsers(dest="action", required=True)
    pm = msub.add_parser("sanitize", help="release a private mean function")
    _add_kernel_flags(pm)
    pm.add_argument("--strategy", required=True,
                    choices=("frl", "iclp-ar", "iclp-qr", "gp-adp"))
    pm.add_argument("--delta", type=float, default=0.0,
                    help="delta (> 0 only for gp-adp)")
    pm.add_argument("--tau", type=float, required=True,
                    help="L2 norm bound enforced by clipping")
    pm.add_argument("--M", type=int, help="frl truncation level")
    pm.add_argument("--psi", type=float, help="regularization strength")
    pm.add_argument("--eta", type=float, help="kernel power")
    pm.add_argument("--in", dest="infile", required=True,
                    help="input curves CSV")
    _sanitize_common(pm)
    pm.set_defaults(func=_cmd_mean_sanitize)

    p = sub.add_parser("kde", help="density release")
    ksub2 = p.add_subparsers(dest="action", required=True)
    pd = ksub2.add_parser("sanitize", help="release a private KDE")
    _add_kernel_flags(pd)
    _add_grid_flags(pd)
    pd.add_argument("--h", type=float, required=True, help="bandwidth")
    pd.add_argument("--eta", type=float, required=True, help="kernel power")
    pd.add_argument("--in", dest="infile", required=True,
                    help="sample points CSV, one point per row")
    _sanitize_common(pd)
    pd.set_defaults(func=_cmd_kde_sanitize)

    p = sub.add_parser("cov", help="covariance-surface release")
    csub = p.add_subparsers(dest="action", required=True)
    pc = csub.add_parser("sanitize", help="release a private covariance")
    _add_kernel_flags(pc)
    pc.add_argument("--tau", type=float, required=True)
    pc.add_argument("--psi", type=float)
    pc.add_argument("--eta", type=float)
    pc.add_argument("--in", dest="infile", required=True)
    _sanitize_common(pc)
    pc.set_defaults(func=_cmd_cov_sanitize)

    p = sub.add_parser("fos", help="function-on-scalar regression release")
    fsub = p.add_subparsers(dest="action", required=True)
    pf = fsub.add_parser("sanitize")
    _add_kernel_flags(pf)
    pf.add_argument("--in-y", dest="in_y", required=True,
                    help="response curves CSV")
    pf.add_argument("--in-x", dest="in_x", required=True,
                    help="covariate matrix CSV, one row per unit")
    pf.add_argument("--gamma", type=float, required=True,
                    help="budget share for the scalar Gram matrix")
    pf.add_argument("--bx", type=float, required=True,
                    help="declared covariate sup-norm bound")
    pf.add_argument("--tau", type=float, required=True)
    pf.add_argument("--psi", type=float, required=True)
    pf.add_argument("--eta", type=float, required=True)
    pf.add_argument("--out-t1", required=True,
                    help="sanitized Gram matrix CSV")
    _sanitize_common(pf)
    pf.set_defaults(func=_cmd_fos_sanitize)

    p = sub.add_parser("select", help="parameter selection")
    ssub = p.add_subparsers(dest="action", required=True)
    ps = ssub.add_parser("pss", help="privacy-safe selection")
    _add_kernel_flags(ps)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--eps", type=float, required=True)
    ps.add_argument("--strategy", choices=("qr", "frl"), required=True)
    ps.add_argument("--eta", type=float, help="power for the frl window")
    ps.add_argument("--beta-hat", type=float,
                    help="eigenvalue decay rate; fitted from the kernel "
                         "when omitted")
    ps.add_argument("--grid-points", type=int, default=200)
    ps.set_defaults(func=_cmd_select_pss, dim=1, bounds="0:1")

    p = sub.add_parser("verify", help="privacy verification")
    vsub = p.add_subparsers(dest="action", required=True)
    pv = vsub.add_parser("dp", help="density-ratio certificate")
    _add_kernel_flags(pv)
    pv.add_argument("--in", dest="infile", required=True)
    pv.add_argument("--neighbor", required=True)
    pv.add_argument("--eps", type=float, required=True)
    pv.add_argument("--sigma", type=float, required=True,
                    help="noise scale used by the release")
    pv.add_argument("--draws", type=int, default=10000)
    pv.add_argument("--seed", type=int, required=True)
    pv.set_defaults(func=_cmd_verify_dp)

    p = sub.add_parser("bench", help="benchmark drivers")
    bsub = p.add_subparsers(dest="action", required=True)
    pb = bsub.add_parser("mean", help="mean-protection experiment")
    pb.add_argument("--config", required=True, help="flat JSON config")
    pb.set_defaults(func=_cmd_bench_mean)
    pb = bsub.add_parser("kde", help="density experiment")
    pb.add_argument("--config", required=True)
    pb.set_defaults(func=_cmd_bench_kde)
    pb = bsub.add_parser("timing", help="noise-generation timing table")
    pb.add_argument("--K", default="100,200,500",
                    help="comma-separated grid sizes")
    pb.add_argument("--draws", type=int, default=100)
    pb.add_argument("--seed", type=int, required=True)
    pb.add_argument("--plot", help="optional PNG path")
    pb.set_defaults(func=_cmd_bench_timing)

    return top


def dispatch(argv) -> int:
    """Route argv to a subcommand handler; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse --help or usage error
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"iclp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrivacyInfeasibleError as exc:
        print(f"iclp: privacy infeasible: {exc}", file=sys.stderr)
        return EXIT_PRIVACY
    except DataError as exc:
        print(f"iclp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IclpError as exc:
        print(f"iclp: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"iclp: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
