"""Command line entry point.

Subcommands cover basis inspection, spectra, the classicality /
Markovianity / detailed-balance / entropy diagnostics, the synthetic
banded-ensemble scaling study, size sweeps and power-law fits.

Exit codes: 0 success, 2 configuration error, 3 capacity exceeded,
4 empty macrostate subspace.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from slowobs.basis import CapacityError, SectorError, build_basis
from slowobs.eth_synth import build_synth, estimate_q_terms, random_walk_check
from slowobs.experiments import (
    ConfigError,
    ScenarioConfig,
    _fmt,
    _row,
    build_context,
    fit_alpha,
    run_scenario,
    sweep_q_tau,
    thermalization_window,
    write_csv,
)
from slowobs.markov import sample_kernel_column, stationarity_residual, haar_average_kernel, stationary_distribution
from slowobs.operators import build_density_wave, coarse_grain
from slowobs.spectral import EmptySubspaceError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="scenario config file (YAML)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="root random seed")
    parser.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    parser.add_argument("--l-max", type=int, default=14, help="largest chain length for sweeps")


def _load_config(args) -> ScenarioConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    return ScenarioConfig.from_yaml(args.config)


def _cmd_basis_info(args) -> int:
    L = args.L if args.L is not None else args.l_max
    basis = build_basis(L)
    print(f"L = {L}  sector dimension D = {basis.dim}")
    if args.q is not None:
        lam, norm = build_density_wave(basis, args.q)
        obs = coarse_grain(lam, args.delta_x, norm, basis_tag=f"L{L}")
        print(f"q = {args.q}  normalization = {norm:.6g}  delta_X = {args.delta_x}")
        print("x\tV_x")
        for x in obs.xs:
            print(f"{int(x)}\t{obs.volumes[int(x)]}")
    return 0


def _cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    ctx = build_context(cfg)
    e = ctx.spec.energies
    print(f"D = {ctx.dim}  E in [{e[0]:.6g}, {e[-1]:.6g}]")
    print(f"Delta_E (std) = {ctx.spec.delta_E:.6g}  mean spacing = {ctx.spec.delta_e:.6g}")
    rows = [_row(cfg, "", float(k), None, float(E)) for k, E in enumerate(e)]
    write_csv(args.out / "spectrum.csv", rows)
    print(f"wrote {args.out / 'spectrum.csv'}")
    return 0


def _run_subset(args, which: tuple) -> int:
    cfg = _load_config(args)
    paths = run_scenario(cfg, args.out, which=which)
    for key, path in paths.items():
        print(f"wrote {path}")
    return 0


def _cmd_classicality(args) -> int:
    return _run_subset(args, ("expectation", "q_tau"))


def _cmd_ldb(args) -> int:
    return _run_subset(args, ("expectation", "delta"))


def _cmd_entropy(args) -> int:
    return _run_subset(args, ("expectation", "entropy"))


def _cmd_markov(args) -> int:
    cfg = _load_config(args)
    ctx = build_context(cfg)
    _, tau, _ = thermalization_window(ctx)
    y = args.y
    report = sample_kernel_column(
        ctx.obs, ctx.spec, tau, y, n_samples=args.n_samples, seed=args.seed
    )
    P = haar_average_kernel(ctx.obs, ctx.spec, tau)
    pi = stationary_distribution(ctx.obs)
    print(f"tau = {tau:.6g}  V_y = {report.V_y}  n = {report.n_samples}")
    print(f"stationarity residual of Haar kernel: {stationarity_residual(P, pi):.3e}")
    rows, mean_rows = [], []
    for i, x in enumerate(report.xs):
        rows.append(_row(cfg, "", float(x), tau, float(report.sample_std[i])))
        mean_rows.append(_row(cfg, "", float(x), tau, float(report.haar_mean[i])))
    write_csv(args.out / "markov_std.csv", rows)
    write_csv(args.out / "markov_mean.csv", mean_rows)
    print(f"wrote {args.out / 'markov_std.csv'} and {args.out / 'markov_mean.csv'}")
    return 0


def _cmd_eth_synth(args) -> int:
    dims = [int(s) for s in args.dims.split(",")]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    path = out / "eth_synth.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["D", "M", "d", "term", "magnitude", "seed"])
        for D in dims:
            for s in range(args.n_seeds):
                model = build_synth(D, args.M, args.d, seed=args.seed + s)
                q = estimate_q_terms(model, args.t1, args.t2)
                for term, mag in q.items():
                    writer.writerow([D, args.M, args.d, term, _fmt(mag), args.seed + s])
    medians = {}
    with open(path) as fh:
        data = list(csv.DictReader(fh))
    for D in dims:
        vals = [float(r["magnitude"]) for r in data if int(r["D"]) == D and r["term"] == "q1"]
        medians[D] = float(np.median(vals))
    fit = fit_alpha(sorted(medians.items()))
    print(f"q1 median fit: alpha = {fit.alpha:.4f} +- {fit.stderr:.4f}")
    walk = random_walk_check(10000, 100, seed0=args.seed)
    print(f"random walk std ratio = {walk['ratio']:.4f}")
    print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg_raw = {}
    if args.config is not None:
        import yaml

        with open(args.config) as fh:
            cfg_raw = yaml.safe_load(fh) or {}
    cfg_raw.setdefault("model", "xxz")
    cfg_raw.setdefault("q", 1)
    Ls = [L for L in range(8, args.l_max + 1, 2)]
    result = sweep_q_tau(Ls, cfg_raw, out_dir=args.out)
    for name, fit in result["fits"].items():
        print(f"{name}: alpha = {fit.alpha:.4f} +- {fit.stderr:.4f}")
    print(f"wrote {args.out / 'sweep.json'}")
    return 0


def _cmd_fit(args) -> int:
    with open(args.points) as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "D" not in cols or "value" not in cols:
            raise ConfigError(f"fit input needs columns D,value; found {cols}")
        points = [(float(r["D"]), float(r["value"])) for r in reader]
    fit = fit_alpha(points)
    print(f"alpha = {fit.alpha:.6g} +- {fit.stderr:.6g}  intercept = {fit.intercept:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slowobs",
        description="coarse-grained observable dynamics of nonintegrable spin chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis-info", help="sector dimension and macrostate volumes")
    _add_common(p)
    p.add_argument("-L", type=int, default=None, help="chain length")
    p.add_argument("-q", type=int, default=None, help="density wave number")
    p.add_argument("--delta-x", type=float, default=0.74)
    p.set_defaults(func=_cmd_basis_info)

    for name, func, help_text in (
        ("spectrum", _cmd_spectrum, "diagonalize the configured model"),
        ("classicality", _cmd_classicality, "Q_tau coherence series"),
        ("ldb", _cmd_ldb, "detailed-balance residual series"),
        ("entropy", _cmd_entropy, "rescaled entropy series"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("markov", help="kernel concentration sampling")
    _add_common(p)
    p.add_argument("-y", type=int, default=0, help="conditioning macrostate")
    p.add_argument("--n-samples", type=int, default=200)
    p.set_defaults(func=_cmd_markov)

    p = sub.add_parser("eth-synth", help="banded-ensemble scaling study")
    _add_common(p)
    p.add_argument("--dims", default="512,1024,2048,4096")
    p.add_argument("-M", type=int, default=4)
    p.add_argument("-d", type=int, default=16)
    p.add_argument("--n-seeds", type=int, default=50)
    p.add_argument("--t1", type=float, default=200.0)
    p.add_argument("--t2", type=float, default=200.0)
    p.set_defaults(func=_cmd_eth_synth)

    p = sub.add_parser("sweep", help="size sweep with power-law fit")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fit", help="power-law fit of a (D, value) CSV")
    _add_common(p)
    p.add_argument("--points", type=Path, required=True)
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        # best effort: honored by BLAS pools created after this point
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError,) as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except EmptySubspaceError as exc:
        print(f"empty subspace: {exc}", file=sys.stderr)
        return 4
    except SectorError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
