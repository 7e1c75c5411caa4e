"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 diverged, 4 iteration cap reached,
5 collision, 6 unstable (or conservation drift above tolerance).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import documents as docs
from .dynamics import (
    ENERGY_TOLERANCE,
    Classification,
    ProbeConfig,
    initial_state_from_orbit,
    integrate,
    stability_probe,
)
from .orbit_model import FourierOrbit, RotationAxis, generating_curve, to_fixed_frame
from .perturbation import (
    BETA_MAX,
    ChartValidityWarning,
    contraction_factors,
    fixed_point,
    iterations_estimate,
    seed_orbit,
)
from .solver import (
    BranchFlipError,
    SeedError,
    SolverConfig,
    SolveStatus,
    cold_start,
    continuation_sweep,
    default_delta_s,
    solve,
    sweep_omegas,
)

OUTPUT_DIR_ENV = "ROTATING_EIGHTS_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_MAX_ITERS = 4
EXIT_COLLISION = 5
EXIT_UNSTABLE = 6

STATUS_EXIT = {
    SolveStatus.CONVERGED: EXIT_OK,
    SolveStatus.DIVERGED: EXIT_DIVERGED,
    SolveStatus.MAX_ITERS: EXIT_MAX_ITERS,
    SolveStatus.COLLISION: EXIT_COLLISION,
}

TRAJECTORY_SAMPLES = 512

log = logging.getLogger("rotating_eights")


class UsageError(Exception):
    pass


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _odd_n(text: str) -> int:
    value = int(text)
    if value < 3 or value % 2 == 0:
        raise argparse.ArgumentTypeError(f"n must be odd and >= 3, got {text}")
    return value


def _fmt(x: float) -> str:
    return format(x, ".6g")


# -- seeds ------------------------------------------------------------------


def resolve_seed(spec: str | None, axis: RotationAxis, omega: float, n: int,
                 k_max: int | None) -> FourierOrbit:
    """``perturb``, ``cold``, a path to an orbit/family document, or None for automatic."""
    if spec is None:
        spec = "perturb" if axis is RotationAxis.X and 0.0 <= 1.0 - omega <= BETA_MAX else "cold"
    if spec == "perturb":
        if axis is not RotationAxis.X:
            raise UsageError("--seed perturb is only available for --axis x")
        beta = 1.0 - omega
        if not 0.0 <= beta <= BETA_MAX:
            raise UsageError(f"--seed perturb needs omega in [{1 - BETA_MAX}, 1], got {omega}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ChartValidityWarning)
            return seed_orbit(beta, n, k_max)
    if spec == "cold":
        return cold_start(axis, omega, n, k_max)
    try:
        orbit = docs.load_any_orbit(spec, omega)
    except docs.DocumentError as exc:
        raise UsageError(str(exc)) from None
    if orbit.n_bodies != n:
        raise UsageError(f"seed file has n={orbit.n_bodies}, requested n={n}")
    if orbit.axis is not axis:
        orbit = orbit.with_axis(axis)
    if k_max is not None and k_max != orbit.k_max:
        orbit = orbit.with_k_max(k_max)
    return orbit.replace(omega=omega)


def _solver_config(args, axis: RotationAxis) -> SolverConfig:
    delta_s = args.delta_s if args.delta_s is not None else default_delta_s(axis)
    try:
        return SolverConfig(delta_s=delta_s, tol=args.tol, max_iters=args.max_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _summary(outcome) -> str:
    lines = [
        f"status: {outcome.status.value}",
        f"iterations: {outcome.iterations}",
        f"step norm: {_fmt(outcome.final_step_norm)}",
        f"gradient norm: {_fmt(outcome.final_gradient_norm)}",
    ]
    if outcome.action is not None:
        parts = outcome.action.as_dict()
        lines.append("action: " + ", ".join(f"{k}={_fmt(v)}" for k, v in parts.items()))
    return "\n".join(lines)


# -- commands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    axis = RotationAxis.parse(args.axis)
    seed = resolve_seed(args.seed, axis, args.omega, args.n, args.kmax)
    config = _solver_config(args, axis)
    outcome = solve(seed, args.omega, config)
    out = Path(args.out) if args.out else output_dir() / f"orbit_{axis.value}_n{args.n}_{args.omega:g}.json"
    meta = {**config.as_dict(), "seed": args.seed or "auto", "k_max": seed.k_max}
    docs.save(docs.orbit_document(outcome.orbit, outcome, meta), out)
    print(_summary(outcome))
    print(f"wrote {out}")
    return STATUS_EXIT[outcome.status]


def trajectory_text(orbit: FourierOrbit, samples: int = TRAJECTORY_SAMPLES) -> str:
    """One period of body 0: rotating-frame then inertial-frame coordinates."""
    t = 2.0 * np.pi * np.arange(samples + 1) / samples
    pos, _ = generating_curve(orbit, t)
    fixed = to_fixed_frame(orbit, 0, t)
    lines = [f"# omega={docs._float_text(orbit.omega)} axis={orbit.axis.value} n={orbit.n_bodies}",
             "# t x y z x_inertial y_inertial z_inertial"]
    for i in range(len(t)):
        row = [t[i], *pos[i], *fixed[i]]
        lines.append(" ".join(format(v, ".10g") for v in row))
    return "\n".join(lines) + "\n"


def plot_script(header: list[str], csv_name: str, traj_names: list[str]) -> str:
    """Gnuplot text: coefficient panels per block plus trajectory projections."""
    lines = [
        "# coefficient curves against omega, one panel per block, and x-y projections",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'Omega'",
    ]
    blocks: dict[str, list[int]] = {}
    for col, name in enumerate(header[1:], start=2):
        blocks.setdefault(name.rstrip("0123456789"), []).append(col)
    lines.append(f"set multiplot layout 1,{max(len(blocks), 1)}")
    for block, cols in blocks.items():
        plots = ", ".join(f"'{csv_name}' using 1:{c} with linespoints" for c in cols)
        lines += [f"set title '{block} coefficients'", f"plot {plots}"]
    lines += ["unset multiplot", "pause -1", "", "set datafile separator whitespace",
              "set size ratio -1", "set xlabel 'x'", "set ylabel 'y'", "unset key"]
    if traj_names:
        plots = ", ".join(f"'{name}' using 2:3 with lines" for name in traj_names)
        lines += ["set title 'rotating frame'", f"plot {plots}", "pause -1",
                  "set title 'inertial frame'",
                  "plot " + ", ".join(f"'{name}' using 5:6 with lines" for name in traj_names),
                  "pause -1"]
    return "\n".join(lines) + "\n"


def write_family_outputs(record, out_dir: Path, config: dict | None) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"family": docs.save(docs.family_document(record, config), out_dir / "family.json")}
    header, rows = docs.coefficient_table(record)
    paths["csv"] = out_dir / "coefficients.csv"
    paths["csv"].write_text(docs.table_csv(header, rows))
    traj = []
    for om, outcome in sorted(record.converged(), key=lambda item: item[0]):
        name = f"trajectory_{om:.4f}.dat"
        (out_dir / name).write_text(trajectory_text(outcome.orbit))
        traj.append(name)
    paths["plot"] = out_dir / "plot.gp"
    paths["plot"].write_text(plot_script(header, "coefficients.csv", traj))
    return paths


def cmd_sweep(args) -> int:
    axis = RotationAxis.parse(args.axis)
    try:
        omegas = sweep_omegas(args.omega_start, args.omega_end, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if min(omegas) < 0:
        raise UsageError("omega must be >= 0")
    seed = resolve_seed(args.seed, axis, omegas[0], args.n, args.kmax)
    config = _solver_config(args, axis)

    def progress(om, outcome):
        print(f"omega={_fmt(om)} {outcome.status.value} iterations={outcome.iterations} "
              f"gradient={_fmt(outcome.final_gradient_norm)}", flush=True)

    try:
        record = continuation_sweep(axis, args.n, omegas, config, seed=seed, progress=progress)
    except BranchFlipError as exc:
        print(f"sweep stopped: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out_dir = Path(args.out) if args.out else output_dir() / f"family_{axis.value}_n{args.n}"
    meta = {**config.as_dict(), "seed": args.seed or "auto", "k_max": seed.k_max,
            "omega_start": args.omega_start, "omega_end": args.omega_end, "step": args.step}
    paths = write_family_outputs(record, out_dir, meta)
    print(f"wrote {paths['family']}, {paths['csv']}, {paths['plot']}")
    if record.boundary is not None:
        last = record.converged()[-1][0] if record.converged() else None
        failed = record.entries[-1][1]
        print(f"boundary: no convergence at omega={_fmt(record.boundary)} "
              f"({failed.status.value}); last converged omega={last}")
        return STATUS_EXIT[failed.status]
    return EXIT_OK


def cmd_integrate(args) -> int:
    try:
        orbit, _ = docs.load_orbit(args.orbit)
    except docs.DocumentError as exc:
        raise UsageError(str(exc)) from None
    prefix = Path(args.out_prefix) if args.out_prefix else output_dir() / Path(args.orbit).stem
    prefix.parent.mkdir(parents=True, exist_ok=True)
    total_steps = int(round(args.periods * args.steps_per_period))
    sample_every = max(1, total_steps // args.samples)
    cfg = ProbeConfig(periods=args.periods, steps_per_period=args.steps_per_period,
                      rng_seed=args.rng_seed, sample_every=sample_every)
    if args.perturb > 0:
        report = stability_probe(orbit, args.perturb, cfg)
        result = report.result
        summary = report.as_dict()
        if report.classification is Classification.STABLE:
            code = EXIT_OK
        elif report.classification is Classification.COLLISION:
            code = EXIT_COLLISION
        else:
            code = EXIT_UNSTABLE
    else:
        result = integrate(initial_state_from_orbit(orbit), args.periods, args.steps_per_period, sample_every)
        drift = result.ledger.energy_drift
        summary = {"omega": orbit.omega, "periods_run": args.periods, "energy_drift": drift,
                   "momentum_drift": result.ledger.momentum_drift, "perturbation_scale": 0.0}
        if result.collided:
            code = EXIT_COLLISION
        else:
            code = EXIT_OK if drift <= ENERGY_TOLERANCE else EXIT_UNSTABLE
    doc = {
        "schema_version": docs.SCHEMA_VERSION,
        "kind": "stability_report",
        "orbit_file": str(args.orbit),
        "settings": {"periods": args.periods, "steps_per_period": args.steps_per_period,
                     "perturb": args.perturb, "rng_seed": args.rng_seed, "sample_every": sample_every},
        "report": summary,
        "ledger": result.ledger.as_dict(),
        "collision": None if result.collision is None else str(result.collision),
    }
    report_path = docs.save(doc, prefix.with_name(prefix.name + "_report.json"))
    traj_path = prefix.with_name(prefix.name + "_trajectory.dat")
    n = orbit.n_bodies
    cols = " ".join(f"x{j} y{j} z{j}" for j in range(n))
    flat = result.samples.reshape(len(result.samples), 3 * n)
    data = np.column_stack([result.sample_times, flat]) if len(flat) else np.zeros((0, 3 * n + 1))
    np.savetxt(traj_path, data, fmt="%.10g", header=f"t {cols}")
    for key, value in summary.items():
        print(f"{key}: {_fmt(value) if isinstance(value, float) else value}")
    print(f"wrote {report_path}, {traj_path}")
    return code


def cmd_perturb(args) -> int:
    if not args.beta > 0:
        raise UsageError(f"--beta must be > 0, got {args.beta}")
    if args.beta > BETA_MAX:
        raise UsageError(f"--beta must be <= {BETA_MAX} (chart validity)")
    fp = fixed_point(args.beta)
    factors = contraction_factors(args.beta)
    print(f"beta: {_fmt(args.beta)}")
    print(f"eps_f: {_fmt(fp.eps)}")
    print(f"b2_f: {_fmt(fp.b2)}")
    print(f"b4_f: {_fmt(fp.b4)}")
    print("contraction factors: " + ", ".join(_fmt(f) for f in factors))
    print(f"iterations estimate ({args.digits} digits): {iterations_estimate(args.digits, args.beta)}")
    return EXIT_OK


def cmd_coeffs(args) -> int:
    try:
        record = docs.load_family(args.family)
    except (docs.DocumentError, KeyError) as exc:
        raise UsageError(f"bad family document: {exc}") from None
    header, rows = docs.coefficient_table(record)
    text = docs.table_csv(header, rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--axis", choices=[a.value for a in RotationAxis], required=True)
    p.add_argument("--n", type=_odd_n, default=3, help="number of bodies (odd, default 3)")
    p.add_argument("--kmax", type=_positive_int, default=None,
                   help="harmonic truncation (default depends on n and axis)")
    p.add_argument("--tol", type=_positive_float, default=SolverConfig.tol)
    p.add_argument("--max-iters", type=_positive_int, default=SolverConfig.max_iters)
    p.add_argument("--delta-s", type=_positive_float, default=None,
                   help="step scale (default 0.05 for axis z, 0.2 otherwise)")
    p.add_argument("--seed", default=None,
                   help="perturb, cold, or an orbit/family document (default: perturb near the "
                        "x-axis Lagrange limit, else cold)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotating-eights",
                                     description="Choreographies periodic in a rotating frame.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one orbit")
    _add_solver_flags(p)
    p.add_argument("--omega", type=_nonneg_float, required=True)
    p.add_argument("--out", default=None, help="orbit document path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="continue a family in omega")
    _add_solver_flags(p)
    p.add_argument("--omega-start", type=_nonneg_float, required=True)
    p.add_argument("--omega-end", type=_nonneg_float, required=True)
    p.add_argument("--step", type=_positive_float, required=True)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("integrate", help="integrate an orbit, optionally perturbed")
    p.add_argument("--orbit", required=True)
    p.add_argument("--periods", type=_positive_float, default=ProbeConfig.periods)
    p.add_argument("--steps-per-period", type=_positive_int, default=ProbeConfig.steps_per_period)
    p.add_argument("--perturb", type=_nonneg_float, default=0.0, help="relative perturbation scale s")
    p.add_argument("--rng-seed", type=int, default=ProbeConfig.rng_seed)
    p.add_argument("--samples", type=_positive_int, default=2000, help="trajectory rows kept")
    p.add_argument("--out-prefix", default=None)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("perturb", help="print the Lagrange-limit chart")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--digits", type=_positive_int, default=4)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("coeffs", help="coefficient table from a family document")
    p.add_argument("--family", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_coeffs)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reports bad flags with status 2, the usage code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, SeedError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
