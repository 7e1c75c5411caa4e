"""Sweep the axis-X family at a step and at half that step and compare coefficient jumps.

For a continuous family the largest jump between neighbours should roughly
halve under refinement. Writes both families with their tables and plots.
"""
import argparse
from pathlib import Path

import numpy as np

from rotating_eights.cli import write_family_outputs
from rotating_eights.solver import SolverConfig, continuation_sweep, sweep_omegas


def max_jumps(record, skip_first=0):
    keys, table = record.leading_coefficients()
    return keys, np.max(np.abs(np.diff(table[skip_first:, 1:], axis=0)), axis=0)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("results/family_refinement"))
    args = p.parse_args()

    cfg = SolverConfig()
    records = {}
    for step in (args.step, args.step / 2):
        rec = continuation_sweep("x", args.n, sweep_omegas(1.0, 0.0, step), cfg, k_max=args.kmax)
        conv = len(rec.converged())
        print(f"step {step:g}: {conv}/{len(rec.entries)} converged, boundary {rec.boundary}")
        write_family_outputs(rec, args.out / f"step_{step:g}", cfg.as_dict())
        records[step] = rec

    coarse, fine = records[args.step], records[args.step / 2]
    keys, jc = max_jumps(coarse)
    _, jf = max_jumps(fine)
    # the first interval holds the sqrt(1 - omega) growth of a1 off the Lagrange orbit
    _, jc1 = max_jumps(coarse, 1)
    _, jf1 = max_jumps(fine, 2)
    print(f"{'coef':>6} {'coarse':>10} {'fine':>10} {'ratio':>7} {'ratio(omega<1-step)':>20}")
    for k, a, b, a1, b1 in zip(keys, jc, jf, jc1, jf1):
        print(f"{k:>6} {a:10.3e} {b:10.3e} {b / a:7.3f} {b1 / a1:20.3f}")


if __name__ == "__main__":
    main()
