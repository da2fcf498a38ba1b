"""Command-line front end.

Every subcommand writes a data CSV, ``config.json`` (the effective options,
reusable with ``--config``) and ``metadata.json`` (config echo, library
versions, seed, wall time, summary numbers) into ``--out``.

Exit codes: 0 success, 2 input error, 3 resource error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .gp_lll import (
    GPConvergenceError,
    compare_gp_exact,
    minimize_gp,
    tf_profile_and_energy,
    vortex_zeros,
)
from .lanczos import ConvergenceError
from .meanfield import MeanFieldConvergenceError, default_grid, minimize_mf
from .basis import sector_dimension
from .operators import HamiltonianParams, ResourceError
from .plasma_mc import ks_distance_thermal, radial_density, run_metropolis
from .spectra import InsufficientRangeError, SolverConfig, ground_state_scan, spectral_gap_scan, yrast_curve
from .trial_states import numeric_optimal_m, optimal_m, trial_energy, trial_support

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOURCE = 3
EXIT_CONVERGENCE = 4


class InputError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _solver(args) -> SolverConfig:
    return SolverConfig(backend=args.backend)


# ----------------------------------------------------------------------------
# subcommands; each returns (summary dict, seed or None)


def cmd_yrast(args, out: Path):
    pts = yrast_curve(args.n, args.lmax, workers=args.workers, config=_solver(args), cache_dir=args.cache_dir)
    _write_csv(
        out / "yrast.csv",
        ["L", "I_of_L", "gap", "kernel_dim", "dim"],
        [(p.L, p.I_of_L, p.gap, p.kernel_dim, p.dim) for p in pts],
    )
    return {"I_0": pts[0].I_of_L, "rows": len(pts)}, None


def cmd_gaps(args, out: Path):
    lmax = args.n * (args.n - 1) if args.lmax is None else args.lmax
    scan = spectral_gap_scan(args.n, lmax, workers=args.workers, config=_solver(args))
    _write_csv(out / "gaps.csv", ["L", "gap"], list(enumerate(scan.gaps)))
    return {
        "min_gap": scan.min_gap,
        "conjecture_holds": scan.conjecture_holds,
        "reference_L": scan.reference_L,
        "reference_gap": scan.reference_gap,
    }, None


def _ground_lmax(N: int, omega: float, k: float, lmax: int | None) -> int:
    if lmax is not None:
        return lmax
    m = optimal_m(omega, k, N) if k > 0 else 0
    return N * (N - 1) + N * (m + 2)


def cmd_ground(args, out: Path):
    p = HamiltonianParams(args.omega, args.g, args.k)
    rec = ground_state_scan(
        args.n, p, _ground_lmax(args.n, args.omega, args.k, args.lmax), workers=args.workers, config=_solver(args)
    )
    _write_csv(out / "sectors.csv", ["L", "E"], sorted(rec.sector_energies.items()))
    return {
        "L_star": rec.L_star,
        "energy": rec.energy,
        "correlation_defect": rec.correlation_defect,
        "filling_factor": rec.filling_factor,
        "touching": list(rec.touching),
    }, None


def regime_of(N: int, m_opt: int) -> str:
    if m_opt == 0:
        return "laughlin"
    if m_opt <= N * N:
        return "annulus"
    return "thermal"


def _window_top(p: HamiltonianParams, N: int, upper: float) -> int:
    """Largest L whose sector lower bound does not exceed ``upper``."""
    a, b = p.k / N, p.omega + 3.0 * p.k
    if a == 0:
        return int(math.floor(upper / b)) if b > 0 else 10**9
    return int(math.floor((-b + math.sqrt(b * b + 4 * a * upper)) / (2 * a)))


def cmd_phases(args, out: Path):
    rows = []
    skipped = 0
    for omega in args.omega_grid:
        for k in args.k_grid:
            p = HamiltonianParams(omega, args.g, k)
            m = optimal_m(omega, k, args.n) if k > 0 else 0
            # the optimal giant vortex has zero interaction energy: an upper bound
            upper = trial_energy(args.n, m, p).E
            top = _window_top(p, args.n, upper)
            row = [omega, k, "", "", "", "", m, regime_of(args.n, m)]
            if sector_dimension(args.n, top) <= args.ed_max_dim:
                rec = ground_state_scan(
                    args.n, p, top + 1, workers=args.workers, config=_solver(args), upper_bound=upper
                )
                row[2:6] = [rec.L_star, rec.energy, rec.correlation_defect, rec.filling_factor]
            else:
                skipped += 1
            rows.append(row)
    _write_csv(
        out / "phases.csv",
        ["omega", "k", "L_star", "energy", "correlation_defect", "filling_factor", "m_opt", "regime"],
        rows,
    )
    return {"points": len(rows), "ed_skipped": skipped, "regimes": sorted({r[-1] for r in rows})}, None


def cmd_trial(args, out: Path):
    summary = {}
    m = args.m
    if args.omega is not None:
        p = HamiltonianParams(args.omega, 0.0, args.k)
        if args.k > 0:
            summary["m_opt_closed_form"] = optimal_m(args.omega, args.k, args.n)
            summary["m_opt_numeric"] = numeric_optimal_m(args.omega, args.k, args.n)
        if m is None:
            m = summary.get("m_opt_closed_form", 0)
        rec = trial_energy(args.n, m, p)
        summary.update(energy=rec.E, L2_expectation=rec.L2_expect)
        scan = [trial_energy(args.n, j, p) for j in range(max(2 * m, 10) + 1)]
        _write_csv(out / "scan.csv", ["m", "L_m", "E", "L2_expect"], [(r.m, r.L_m, r.E, r.L2_expect) for r in scan])
    m = 0 if m is None else m
    sup = trial_support(args.n, m)
    _write_csv(
        out / "amplitudes.csv",
        ["partition", "amplitude"],
        [(" ".join(str(int(x)) for x in part), float(a)) for part, a in zip(sup.parts, sup.amplitudes)],
    )
    summary.update(m=m, L=sup.L, terms=len(sup.amplitudes))
    return summary, None


def _chain(job):
    N, m, sweeps, burn_in, stride, seed = job
    return run_metropolis(N, m, sweeps, seed=seed, burn_in=burn_in, stride=stride)


def cmd_plasma(args, out: Path):
    if args.chains == 1:
        seeds = [args.seed]
    else:
        seeds = [int(s) for s in np.random.SeedSequence(args.seed).generate_state(args.chains)]
    jobs = [(args.n, args.m, args.sweeps, args.burn_in, args.stride, s) for s in seeds]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            runs = list(ex.map(_chain, jobs))
    else:
        runs = [_chain(j) for j in jobs]
    samples = np.concatenate([r.samples for r in runs])
    r_max = math.sqrt(2.0 + args.m / args.n) + 5.0 / math.sqrt(args.n)
    edges = np.linspace(0.0, max(r_max, float(np.abs(samples).max()) * (1 + 1e-12)), args.bins + 1)
    dens = radial_density(samples, edges)
    _write_csv(
        out / "density.csv",
        ["r_lo", "r_hi", "rho", "mc_error"],
        zip(edges[:-1].tolist(), edges[1:].tolist(), dens.values.tolist(), dens.mc_error.tolist()),
    )
    summary = {
        "chains": [r.metadata() for r in runs],
        "retained_particle_samples": int(samples.size),
        "mean_r2": float(np.mean(np.abs(samples) ** 2)),
    }
    if args.m >= 1:
        summary["ks_thermal"] = ks_distance_thermal(samples, args.n, args.m)
    return summary, args.seed


def cmd_meanfield(args, out: Path):
    grid = default_grid(args.n, args.m, args.points)
    prof = minimize_mf(args.n, args.m, grid, tol=args.tol, max_iter=args.max_iter)
    _write_csv(
        out / "profile.csv",
        ["r", "rho", "regime"],
        ((float(r), float(x), prof.regime) for r, x in zip(prof.r, prof.rho)),
    )
    return {
        "N": args.n,
        "m": args.m,
        "mu": prof.mu,
        "energy": prof.energy,
        "iterations": prof.iterations,
        "residual": prof.residual,
        "regime": prof.regime,
    }, None


def cmd_gp(args, out: Path):
    s = minimize_gp(args.omega, args.ng, l_max=args.lmax, restarts=args.restarts, seed=args.seed)
    tf, e_tf = tf_profile_and_energy(args.omega, args.ng)
    _write_csv(
        out / "coefficients.csv",
        ["l", "re", "im"],
        ((l, float(c.real), float(c.imag)) for l, c in enumerate(s.coeffs)),
    )
    summary = {"energy": s.energy, "tf_energy": e_tf, "tf_lambda": tf.lam, "tf_radius": tf.radius,
               "l_max": s.l_max, "mean_L": s.mean_L(), "grad_norm": s.grad_norm, "restart": s.restart}
    if np.any(np.abs(s.coeffs[1:]) > 0):
        z = vortex_zeros(s, tf.radius)
        _write_csv(
            out / "zeros.csv",
            ["re", "im", "bulk"],
            ((float(r.real), float(r.imag), int(abs(r) < tf.radius)) for r in z.roots),
        )
        summary["bulk_vortices"] = z.bulk_count
    return summary, args.seed


def cmd_compare(args, out: Path):
    rows = []
    for omega in args.omega_grid:
        c = compare_gp_exact(args.n, omega, args.g, restarts=args.restarts, seed=args.seed, config=_solver(args))
        rows.append((omega, c.E_GP, c.E_exact, c.ratio, c.L_star))
    _write_csv(out / "compare.csv", ["omega", "E_GP", "E_exact", "ratio", "L_star"], rows)
    return {"upper_bound_holds": all(r[1] >= r[2] - 1e-8 for r in rows)}, args.seed


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lllab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of option defaults (flags override)")
        p.add_argument("--out", required=False, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=func)
        return p

    def solver_opts(p):
        p.add_argument("--backend", choices=["arpack", "block-lanczos"], default="arpack")

    p = add("yrast", cmd_yrast, "lowest interaction energy per angular momentum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lmax", type=int, required=True)
    p.add_argument("--cache-dir", default=None)
    solver_opts(p)

    p = add("gaps", cmd_gaps, "spectral gaps above the kernel")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lmax", type=int, default=None)
    solver_opts(p)

    p = add("ground", cmd_ground, "global ground state over sectors")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--lmax", type=int, default=None)
    solver_opts(p)

    p = add("phases", cmd_phases, "sweep (omega, k) and tag regimes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--omega-grid", type=_float_list, required=True)
    p.add_argument("--k-grid", type=_float_list, required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--ed-max-dim", type=int, default=60000, help="skip exact diagonalization above this sector size")
    solver_opts(p)

    p = add("trial", cmd_trial, "Laughlin / giant-vortex trial state")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--k", type=float, default=0.0)

    p = add("plasma", cmd_plasma, "Metropolis sampling of the plasma")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--sweeps", type=int, default=20000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--chains", type=int, default=1)

    p = add("meanfield", cmd_meanfield, "radial mean-field minimizer")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200000)

    p = add("gp", cmd_gp, "Gross-Pitaevskii minimizer")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--ng", type=float, required=True)
    p.add_argument("--lmax", type=int, default=32)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)

    p = add("compare", cmd_compare, "GP energy against exact diagonalization")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--omega-grid", type=_float_list, required=True)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    solver_opts(p)
    return parser


def _parse(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    try:
        with open(known.config) as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(conf, dict):
        raise InputError("config must be a JSON object")
    if conf.pop("command", command) != command:
        raise InputError(f"config is for another subcommand than {command!r}")
    choices = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if command not in choices:
        return parser.parse_args(argv)
    sub = choices[command]
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    dests = {a.dest: a for a in sub._actions}  # noqa: SLF001
    unknown = sorted(k for k in conf if k not in dests or k in ("help", "config"))
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    # config values become defaults, explicit flags still win
    for k in conf:
        dests[k].required = False
    sub.set_defaults(**conf)
    return parser.parse_args(argv)


def _effective_config(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INPUT if exc.code else EXIT_OK
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out or f"lllab-{args.command}")
    t0 = time.perf_counter()
    try:
        if args.workers < 1:
            raise InputError("--workers must be >= 1")
        out.mkdir(parents=True, exist_ok=True)
        summary, seed = args.func(args, out)
    except (InputError, ValueError, InsufficientRangeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ResourceError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConvergenceError, MeanFieldConvergenceError, GPConvergenceError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    config = _effective_config(args)
    config["command"] = args.command
    meta = {
        "command": args.command,
        "config": config,
        "seed": seed,
        "wall_time_s": time.perf_counter() - t0,
        "versions": {
            "lllab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "summary": summary,
    }
    with open(out / "config.json", "w") as fh:
        json.dump(_jsonable(config), fh, indent=2, sort_keys=True)
    with open(out / "metadata.json", "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
