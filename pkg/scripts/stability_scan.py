"""Nonlinear stability of family members under a small random perturbation.

Each omega is probed with scale s and, as a control, without perturbation;
both reports are printed so drift-driven and excursion-driven verdicts can
be told apart.
"""
import argparse
import json
from pathlib import Path

from rotating_eights.dynamics import ProbeConfig, threshold_scan
from rotating_eights.orbit_model import default_k_max
from rotating_eights.solver import (
    SolverConfig,
    cold_start,
    continuation_sweep,
    default_delta_s,
    solve,
    sweep_omegas,
)

DEFAULT_OMEGAS = {"x": [0.05, 0.1, 0.15, 0.2], "y": [0.05, 0.1, 0.15, 0.2], "z": [0.5, 0.55, 0.6]}


def family_orbits(axis, omegas, coarse_kmax=128):
    """Converged orbits at ``omegas`` for the chosen axis, each at the default truncation."""
    cfg = SolverConfig(delta_s=default_delta_s(axis))
    step = 0.05
    top = max(omegas)
    if axis == "x":
        rec = continuation_sweep("x", 3, sweep_omegas(1.0, 0.0, step), cfg)
        return {om: rec.orbit_at(om) for om in omegas}
    kmax = coarse_kmax if axis == "z" else None
    rec = continuation_sweep(axis, 3, sweep_omegas(0.0, round(top / step) * step, step), cfg,
                             seed=cold_start(axis, 0.0, k_max=kmax))
    out = {}
    for om in omegas:
        orbit = rec.orbit_at(om)
        if orbit.k_max != default_k_max(3, axis):
            refined = solve(orbit.with_k_max(default_k_max(3, axis)), None, cfg)
            orbit = refined.orbit
        out[om] = orbit
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--axis", choices=["x", "y", "z"], required=True)
    p.add_argument("--omegas", type=float, nargs="+", default=None)
    p.add_argument("--periods", type=float, default=60)
    p.add_argument("--perturb", type=float, default=1e-3)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="optional JSON summary")
    args = p.parse_args()

    omegas = args.omegas or DEFAULT_OMEGAS[args.axis]
    orbits = family_orbits(args.axis, omegas)
    cfg = ProbeConfig(periods=args.periods, rng_seed=args.rng_seed)
    summary = {}
    for s in (args.perturb, 0.0):
        scan = threshold_scan(orbits, omegas, s, cfg)
        for om, rep in scan.reports:
            print(f"s={s:g} omega={om:g} {rep.classification.value:>9} energy drift {rep.energy_drift:.2e} "
                  f"excursion {rep.max_excursion:.4f}")
        print(f"s={s:g} bracket {scan.bracket}\n")
        summary[str(s)] = {"bracket": scan.bracket, "reports": [rep.as_dict() for _, rep in scan.reports]}
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
