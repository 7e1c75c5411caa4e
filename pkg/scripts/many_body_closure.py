"""Solve an n-body member of the axis-X family and measure its one-period closure.

Closure is reported against integrator resolution and against solver
tolerance, which separates RK4 truncation from residual orbit error.
"""
import argparse

from rotating_eights.dynamics import closure_error
from rotating_eights.solver import SolverConfig, continuation_sweep, solve, sweep_omegas


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=21)
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--steps", type=int, nargs="+", default=[4096, 16384, 65536])
    p.add_argument("--tols", type=float, nargs="+", default=[1e-12, 1e-14])
    args = p.parse_args()

    rec = continuation_sweep("x", args.n, sweep_omegas(1.0, args.omega, args.step), k_max=args.kmax)
    for om, out in rec.entries:
        print(f"omega={om:.3f} {out.status.value} iterations={out.iterations}")
    orbit = rec.orbit_at(args.omega)
    for tol in args.tols:
        out = solve(orbit, None, SolverConfig(tol=tol))
        orbit = out.orbit
        errs = ", ".join(f"{spp}: {closure_error(orbit, spp):.2e}" for spp in args.steps)
        print(f"tol={tol:g} ({out.status.value}, k_max={orbit.k_max}) closure {errs}")


if __name__ == "__main__":
    main()
