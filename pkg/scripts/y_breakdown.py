"""Locate where the axis-Y family stops converging, for several step scales.

The sweep starts from a cold guess at omega = 0 and stops at the first failure.
"""
import argparse

from rotating_eights.solver import SolverConfig, cold_start, continuation_sweep, sweep_omegas


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--end", type=float, default=0.9)
    p.add_argument("--delta-s", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    p.add_argument("--max-iters", type=int, default=200_000)
    args = p.parse_args()

    for ds in args.delta_s:
        cfg = SolverConfig(delta_s=ds, max_iters=args.max_iters)
        rec = continuation_sweep("y", 3, sweep_omegas(0.0, args.end, args.step), cfg, seed=cold_start("y", 0.0))
        for om, out in rec.entries:
            print(f"delta_s={ds:g} omega={om:.3f} {out.status.value:>18} iterations={out.iterations}")
        last = rec.converged()[-1][0] if rec.converged() else None
        print(f"delta_s={ds:g}: last converged {last}, boundary {rec.boundary}\n")


if __name__ == "__main__":
    main()
