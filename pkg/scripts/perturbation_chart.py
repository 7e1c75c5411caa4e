"""Check the Lagrange-limit chart against the full map and against the solver."""
import argparse
import warnings

import numpy as np

from rotating_eights.perturbation import (
    LENGTH_SCALE,
    LagrangeChart,
    deviation_map,
    fixed_point,
    iterate_deviation,
    iterations_estimate,
    perturbation_map,
    seed_orbit,
)
from rotating_eights.solver import SolverConfig, solve


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--betas", type=float, nargs="+", default=[0.01, 0.005, 0.0025])
    args = p.parse_args()

    chart = LagrangeChart(1e-4, 0.02, 1.0, 0.0)
    for _ in range(23_000):
        chart = perturbation_map(chart)
    print(f"map from (0.02, 1, 0) at beta=1e-4 after 23000 steps: eps={chart.eps:.7f} "
          f"(closed form {fixed_point(1e-4).eps:.7f})")

    for beta in (1e-4, 1e-3, 1e-2):
        fp = fixed_point(beta)
        res = perturbation_map(fp).as_array() - fp.as_array()
        print(f"fixed-point residual beta={beta:g}: {res} (10 beta^2 = {10 * beta**2:.1e})")

    beta = 1e-3
    fp = fixed_point(beta)
    for i in range(3):
        d = np.zeros(3)
        d[i] = 1e-6
        full = perturbation_map(LagrangeChart(beta, *(fp.as_array() + d))).as_array() - perturbation_map(fp).as_array()
        print(f"linearization, component {i}: full map {full[i] / 1e-6:.5f}, deviation map "
              f"{deviation_map(d, beta)[i] / 1e-6:.5f}")

    print(f"deviation-map iterations to 4 digits at beta=1e-3: {iterate_deviation([1e-3, 0, 0], 1e-3, 4)} "
          f"(estimate {iterations_estimate(4, 1e-3)})")

    for beta in args.betas:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = solve(seed_orbit(beta), None, SolverConfig())
        fp = fixed_point(beta)
        chart = np.array([out.orbit.coefficient(k) for k in ("a1", "b2", "b4")]) / LENGTH_SCALE
        scaled = (chart - fp.as_array()) / np.array([beta**1.5, beta**2, beta**2])
        print(f"beta={beta:g} {out.status.value} in {out.iterations}: eps={chart[0]:.6f} "
              f"(chart {fp.eps:.6f}); scaled deviations {np.round(scaled, 3)}")


if __name__ == "__main__":
    main()
