"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Run directly with ``python3 tests/test_acceptance.py``.
"""
import math
import sys

import numpy as np
import pytest

from rotating_eights import documents as docs
from rotating_eights.action import QuadratureGrid, action, action_gradient
from rotating_eights.cli import main
from rotating_eights.dynamics import (
    Classification,
    ProbeConfig,
    closure_error,
    initial_state_from_orbit,
    integrate,
    stability_probe,
    threshold_scan,
    total_angular_momentum,
)
from rotating_eights.orbit_model import FourierOrbit
from rotating_eights.perturbation import LENGTH_SCALE, fixed_point, iterate_deviation, seed_orbit
from rotating_eights.solver import SolverConfig, leading_keys, solve

FD_STEP = 1e-6


def check(log, name, passed, detail):
    log.append((name, bool(passed), detail))
    assert passed, detail


def test_lagrange_endpoint(acceptance_log, tmp_path):
    out = tmp_path / "lagrange.json"
    code = main(["solve", "--axis", "x", "--omega", "1.0", "--n", "3", "--out", str(out)])
    orbit, meta = docs.load_orbit(out)
    b2, c2 = orbit.coefficient("b2"), orbit.coefficient("c2")
    rest = max(abs(v) for k, v in zip(orbit.active_keys(), orbit.active_vector()) if k not in ("b2", "c2"))
    ok = (code == 0 and abs(b2 - LENGTH_SCALE) <= 1e-6 and abs(abs(c2) - LENGTH_SCALE) <= 1e-6 and rest < 1e-6)
    check(acceptance_log, "Lagrange endpoint", ok,
          f"exit {code}, b2={b2:.9f}, c2={c2:.9f}, target {LENGTH_SCALE:.9f}, others max {rest:.1e}")


def test_perturbation_oracle(acceptance_log):
    eps_f = fixed_point(1e-4).eps
    beta = 0.01
    out = solve(seed_orbit(beta), None, SolverConfig())
    eps = out.orbit.coefficient("a1") / LENGTH_SCALE
    predicted = math.sqrt(19 * beta / 3)
    rel = abs(eps - predicted) / predicted
    ok = abs(eps_f - 0.025166) <= 1e-6 and out.converged and rel <= 0.10
    check(acceptance_log, "perturbation oracle", ok,
          f"eps_f(1e-4)={eps_f:.7f}; solver eps at 0.99 = {eps:.5f} vs {predicted:.5f} ({100 * rel:.1f}% off, "
          f"{out.status.value} in {out.iterations} iterations)")


def test_iteration_count_law(acceptance_log):
    beta = 1e-3
    estimate = 2.3 * 4 / (4 * beta)
    measured = iterate_deviation([1e-3, 0.0, 0.0], beta, 4)
    ok = estimate / 2 <= measured <= 2 * estimate
    check(acceptance_log, "iteration-count law", ok, f"{measured} iterations vs estimate {estimate:.0f}")


def _random_orbit(rng, axis):
    orbit = FourierOrbit.zeros(axis, float(rng.uniform(0, 1)), 3, 8)
    vec = 0.02 * rng.standard_normal(len(orbit.active_keys())) / (1.0 + orbit.active_harmonics())
    keys = orbit.active_keys()
    vec[keys.index("a1")] += 1.0
    vec[keys.index("b2")] += 0.35
    return orbit.with_active_vector(vec)


def test_gradient_correctness(acceptance_log):
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for axis in ("x", "y", "z"):
        for _ in range(20):
            orbit = _random_orbit(rng, axis)
            grid = QuadratureGrid.for_orbit(orbit)
            grad = action_gradient(orbit, grid).values
            vec = orbit.active_vector()
            for i in range(vec.size):
                up, down = vec.copy(), vec.copy()
                up[i] += FD_STEP
                down[i] -= FD_STEP
                fd = (action(orbit.with_active_vector(up), grid).total
                      - action(orbit.with_active_vector(down), grid).total) / (2 * FD_STEP)
                worst = max(worst, abs(grad[i] - fd) / abs(fd))
                checked += 1
    check(acceptance_log, "gradient correctness", worst <= 1e-5,
          f"{checked} entries over 60 orbits, worst relative mismatch {worst:.1e}")


def _max_jumps(record):
    keys, table = record.leading_coefficients()
    return keys, np.max(np.abs(np.diff(table[:, 1:], axis=0)), axis=0)


def test_family_continuity(acceptance_log, x_family, x_family_fine):
    all_conv = all(out.converged for _, out in x_family.entries + x_family_fine.entries)
    counts = (len(x_family.entries), len(x_family_fine.entries))
    keys, coarse = _max_jumps(x_family)
    _, fine = _max_jumps(x_family_fine)
    ratios = fine / coarse
    bad = [f"{k} {r:.3f}" for k, r in zip(keys, ratios) if not r <= 0.6]
    ok = all_conv and counts == (21, 41) and not bad
    check(acceptance_log, "family continuity", ok,
          f"all converged={all_conv} ({counts[0]}+{counts[1]} points); jump ratios fine/coarse "
          + ", ".join(f"{k}={r:.3f}" for k, r in zip(keys, ratios))
          + (f"; over 0.6: {', '.join(bad)}" if bad else ""))


def test_zero_angular_momentum_endpoint(acceptance_log, eight):
    L = np.linalg.norm(total_angular_momentum(initial_state_from_orbit(eight)))
    c_max = float(np.max(np.abs(eight.c)))
    check(acceptance_log, "zero angular momentum endpoint", L < 1e-8 and c_max < 1e-8,
          f"|L|={L:.1e}, max|c|={c_max:.1e}")


def test_dynamical_closure(acceptance_log, x_family):
    err = closure_error(x_family.orbit_at(0.5), 4096)
    check(acceptance_log, "dynamical closure", err <= 1e-6, f"one-period mismatch {err:.1e} at omega=0.5")


def test_conservation(acceptance_log, eight):
    result = integrate(initial_state_from_orbit(eight), 100, 4096)
    ledger = result.ledger
    dL = float(np.linalg.norm(ledger.final_angular_momentum - ledger.initial_angular_momentum))
    ok = ledger.energy_drift < 1e-5 and ledger.momentum_drift < 1e-5 and dL < 1e-5
    check(acceptance_log, "conservation", ok,
          f"100 periods: |dE|/|E| max {ledger.energy_drift:.1e}, |dL| max {ledger.momentum_drift:.1e}")


def test_y_axis_breakdown(acceptance_log, y_family):
    converged = [om for om, out in y_family.converged()]
    low_ok = all(any(abs(om - c) < 1e-12 for c in converged) for om in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7))
    boundary = y_family.boundary
    ok = low_ok and boundary is not None and 0.7 <= boundary <= 0.9
    status = y_family.entries[-1][1].status.value
    check(acceptance_log, "y-axis breakdown", ok,
          f"converged at {converged}; first failure at {boundary} ({status})")


def test_stability_regimes(acceptance_log, x_family, y_family_fine, z_orbits):
    x = stability_probe(x_family.orbit_at(0.05), 1e-3, ProbeConfig(periods=60, rng_seed=0))
    y = stability_probe(y_family_fine.orbit_at(0.15), 1e-3, ProbeConfig(periods=100, rng_seed=0))
    z = threshold_scan(z_orbits, [0.5, 0.55, 0.6], 1e-3, ProbeConfig(periods=333, rng_seed=0))
    low, high = z.bracket
    z_ok = low is not None and high is not None and low <= 0.585 <= high
    ok = x.classification is Classification.STABLE and y.classification is Classification.UNSTABLE and z_ok
    zdesc = ", ".join(f"{om}:{rep.classification.value} (dE {rep.energy_drift:.1e}, exc {rep.max_excursion:.3f})"
                      for om, rep in z.reports)
    check(acceptance_log, "stability regimes", ok,
          f"x 0.05 {x.classification.value}; y 0.15 {y.classification.value} "
          f"(excursion {y.max_excursion:.3g}); z bracket {z.bracket} from [{zdesc}]")


def test_many_body_generalization(acceptance_log, x21_family):
    out = next(o for om, o in x21_family.entries if abs(om - 0.5) < 1e-12)
    err = closure_error(out.orbit, 4096)
    fine = closure_error(out.orbit, 65536)
    ok = out.converged and err <= 1e-5
    check(acceptance_log, "n=21 generalization", ok,
          f"{out.status.value} at k_max={out.orbit.k_max}; closure {err:.1e} at 4096 steps/period "
          f"({fine:.1e} at 65536)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
