import warnings
from dataclasses import replace

import numpy as np
import pytest

from rotating_eights.action import GradientVector, action, action_gradient
from rotating_eights.orbit_model import FourierOrbit, RotationAxis, lagrange_orbit
from rotating_eights.perturbation import LENGTH_SCALE, seed_orbit
from rotating_eights.solver import (
    BranchFlipError,
    CalibrationError,
    FamilyRecord,
    SeedError,
    SolverConfig,
    SolveStatus,
    auto_sign_calibration,
    candidate_policies,
    cold_start,
    continuation_sweep,
    default_delta_s,
    default_seed,
    descent_step,
    leading_keys,
    normalized_gradient_norm,
    preconditioner,
    solve,
    sweep_omegas,
)


def seeded(beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return seed_orbit(beta)


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.delta_s, cfg.tol, cfg.max_iters, cfg.divergence_window) == (0.2, 1e-12, 200_000, 10)
        assert default_delta_s("x") == 0.2 and default_delta_s("z") == 0.05

    @pytest.mark.parametrize("kwargs", [{"delta_s": 0.0}, {"delta_s": 1.5}, {"tol": 0.0},
                                        {"sign_policy": {"a": 2}}, {"divergence_window": 0}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_sign_resolution(self):
        orbit = FourierOrbit.zeros("y", 0.3, 3, 8)
        signs = dict(zip(orbit.active_keys(), SolverConfig().signs_for(orbit)))
        assert signs["c1"] == 1 and signs["c5"] == -1 and signs["a1"] == -1
        cfg = SolverConfig(sign_policy={"c": 1, "c5": -1})
        signs = dict(zip(orbit.active_keys(), cfg.signs_for(orbit)))
        assert signs["c1"] == 1 and signs["c7"] == 1 and signs["c5"] == -1
        x = FourierOrbit.zeros("x", 0.3, 3, 8)
        assert np.all(SolverConfig().signs_for(x) == -1)

    def test_as_dict_echoes_every_field(self):
        d = SolverConfig(sign_policy={"c1": 1}).as_dict()
        assert d["sign_policy"] == {"c1": 1}
        assert set(d) == {"delta_s", "sign_policy", "tol", "max_iters", "divergence_window",
                          "divergence_factor", "m_points"}


class TestDescentStep:
    def test_zero_gradient(self):
        orbit = seeded(0.01)
        zero = GradientVector(orbit.active_keys(), np.zeros(len(orbit.active_keys())))
        assert descent_step(orbit, zero, SolverConfig()) == orbit

    def test_single_coefficient(self):
        orbit = FourierOrbit.from_coefficients("x", 0.0, 3, 4, a={1: 0.7})
        keys = orbit.active_keys()
        g = np.zeros(len(keys))
        g[keys.index("a1")] = 0.3
        cfg = SolverConfig(delta_s=0.2, sign_policy={"a": 1})
        out = descent_step(orbit, GradientVector(keys, g), cfg)
        # u(1) = 1; the step also carries the 1/(n pi) weight of the action's quadratic part
        assert out.coefficient("a1") == pytest.approx(0.7 + 0.2 * 0.3 / (3 * np.pi), rel=1e-15)
        assert np.count_nonzero(out.active_vector()) == 1

    def test_preconditioner(self):
        orbit = FourierOrbit.zeros("x", 0.5, 3, 4)
        k = orbit.active_harmonics()
        np.testing.assert_allclose(preconditioner(orbit), 1 / (3 * np.pi * (k**2 + 0.25)))

    def test_dimension_mismatch(self):
        orbit = seeded(0.01)
        with pytest.raises(ValueError):
            descent_step(orbit, GradientVector(("a1",), np.ones(1)), SolverConfig())

    def test_first_order_action_change(self):
        orbit = seeded(0.05)
        cfg = SolverConfig(delta_s=1e-4)
        grad = action_gradient(orbit)
        moved = descent_step(orbit, grad, cfg)
        predicted = np.sum(cfg.signs_for(orbit) * cfg.delta_s * preconditioner(orbit) * grad.values**2)
        actual = action(moved).total - action(orbit).total
        assert actual == pytest.approx(predicted, rel=1e-3)
        assert predicted < 0


class TestSolve:
    def test_lagrange_start(self):
        start = lagrange_orbit(3, 1.0, 32)
        out = solve(start, None, SolverConfig())
        assert out.status is SolveStatus.CONVERGED and out.iterations <= 2
        np.testing.assert_allclose(out.orbit.active_vector(), start.active_vector(), atol=1e-12)

    def test_omega_override(self):
        out = solve(seeded(0.01), 0.99, SolverConfig())
        assert out.orbit.omega == 0.99 and out.converged

    def test_collision_is_a_status(self):
        out = solve(FourierOrbit.zeros("x", 0.5, 3, 8))
        assert out.status is SolveStatus.COLLISION and out.action is None

    def test_max_iters(self):
        out = solve(seeded(0.05), None, SolverConfig(max_iters=5))
        assert out.status is SolveStatus.MAX_ITERS and out.iterations == 5

    def test_wrong_sign_diverges(self):
        out = solve(seeded(0.05), None, SolverConfig(sign_policy={"a": 1, "b": 1, "c": 1}))
        assert out.status is SolveStatus.DIVERGED

    def test_refit_of_converged_orbit(self, x_family):
        for om in (0.9, 0.5, 0.1):
            out = solve(x_family.orbit_at(om), None, SolverConfig())
            assert out.converged and out.iterations <= 2

    def test_converged_outcomes_are_stationary(self, x_family, y_family):
        for record in (x_family, y_family):
            for _, out in record.converged():
                assert out.final_step_norm <= 1e-12
                assert out.final_gradient_norm <= 100 * 1e-12

    def test_depth_in_the_middle_of_the_family(self, x_family):
        for om, out in x_family.converged():
            if 0.1 <= om <= 0.9:
                assert out.final_step_norm <= 1e-10
                assert out.iterations < 1000

    def test_iterations_grow_toward_lagrange(self):
        counts = [solve(seeded(b), None, SolverConfig()).iterations for b in (0.02, 0.01)]
        assert 1.5 <= counts[1] / counts[0] <= 3

    def test_planar_endpoint_from_warm_start(self, x_family):
        out = solve(x_family.orbit_at(0.05), 0.0, SolverConfig())
        assert out.converged
        assert abs(out.action.coriolis) < 1e-12
        assert np.max(np.abs(out.orbit.c)) < 1e-8

    def test_y_axis_past_breakdown(self, y_family):
        out = solve(y_family.orbit_at(0.7), 0.85, SolverConfig())
        assert out.status in (SolveStatus.DIVERGED, SolveStatus.MAX_ITERS)


class TestCalibration:
    def test_axis_x_uses_descent_everywhere(self, x_family):
        cfg = auto_sign_calibration(x_family.orbit_at(0.5))
        assert cfg.sign_policy == {}

    def test_axis_y_flips_lowest_c(self, y_family):
        cfg = auto_sign_calibration(y_family.orbit_at(0.3))
        assert cfg.sign_policy == {"c1": 1}

    def test_candidates_start_with_uniform_descent(self):
        cands = candidate_policies(FourierOrbit.zeros("y", 0.3, 3, 8))
        assert cands[0] == {}
        assert {"c1": 1} in cands
        assert len({tuple(sorted(c.items())) for c in cands}) == len(cands)

    def test_failure_lists_diagnostics(self):
        # a single probe step cannot show a decreasing trend
        start = seeded(0.05)
        with pytest.raises(CalibrationError) as info:
            auto_sign_calibration(start, probe_iters=1)
        assert len(info.value.diagnostics) == len(candidate_policies(start))


class TestContinuation:
    def test_sweep_omegas(self):
        assert sweep_omegas(1.0, 0.0, 0.25) == [1.0, 0.75, 0.5, 0.25, 0.0]
        assert sweep_omegas(0.0, 0.3, 0.1) == [0.0, 0.1, 0.2, 0.3]

    def test_x_family_converges_everywhere(self, x_family, x_family_fine):
        assert len(x_family.entries) == 21 and x_family.boundary is None
        assert len(x_family_fine.entries) == 41 and x_family_fine.boundary is None
        assert all(out.converged for _, out in x_family.entries + x_family_fine.entries)

    def test_endpoints(self, x_family):
        lag = x_family.orbit_at(1.0)
        assert lag.coefficient("b2") == pytest.approx(LENGTH_SCALE, abs=1e-10)
        assert lag.coefficient("c2") == pytest.approx(LENGTH_SCALE, abs=1e-10)
        eight = x_family.orbit_at(0.0)
        assert np.max(np.abs(eight.c)) < 1e-8
        assert eight.coefficient("a1") == pytest.approx(1.0958785, abs=1e-6)
        assert eight.coefficient("b2") == pytest.approx(0.3372826, abs=1e-6)

    def test_reverse_sweep_is_path_independent(self, x_family):
        back = continuation_sweep("x", 3, sweep_omegas(0.0, 0.95, 0.05), seed=x_family.orbit_at(0.0))
        assert back.boundary is None
        for om, out in back.entries:
            np.testing.assert_allclose(out.orbit.active_vector(), x_family.orbit_at(om).active_vector(),
                                       atol=1e-8)

    def test_y_sweep_stops_at_breakdown(self, y_family):
        assert y_family.boundary is not None and 0.7 < y_family.boundary <= 0.9
        assert [om for om, _ in y_family.converged()] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
        assert not y_family.entries[-1][1].converged

    def test_monotone_omegas_required(self):
        with pytest.raises(ValueError):
            continuation_sweep("x", 3, [1.0, 0.9, 0.95])

    def test_missing_seed(self):
        with pytest.raises(SeedError):
            default_seed("y", 3, 0.5)

    def test_branch_flip_is_an_error(self, x_family, monkeypatch):
        import rotating_eights.solver as solver_mod

        real_solve = solver_mod.solve

        def flipping_solve(start, omega, config):
            out = real_solve(start, omega, config)
            if omega < 0.5:
                out = replace(out, orbit=out.orbit.replace(c=-out.orbit.c))
            return out

        monkeypatch.setattr(solver_mod, "solve", flipping_solve)
        with pytest.raises(BranchFlipError):
            continuation_sweep("x", 3, [0.5, 0.45], seed=x_family.orbit_at(0.5))

    def test_leading_coefficients(self, x_family):
        keys, table = x_family.leading_coefficients()
        assert keys == ["a1", "a5", "a7", "b2", "b4", "b8", "c2", "c4", "c8"]
        assert keys == leading_keys(x_family.orbit_at(0.5))
        assert table.shape == (21, 10)
        assert table[0, 0] == 1.0 and table[-1, 0] == 0.0

    def test_record_lookup(self, x_family):
        assert isinstance(x_family, FamilyRecord) and x_family.axis is RotationAxis.X
        with pytest.raises(SeedError):
            x_family.orbit_at(0.33)

    def test_cold_start_reaches_the_eight(self, eight):
        for axis in ("x", "y", "z"):
            out = solve(cold_start(axis, 0.0), None, SolverConfig())
            assert out.converged
            assert out.orbit.coefficient("a1") == pytest.approx(eight.coefficient("a1"), abs=1e-8)

    def test_n21_family(self, x21_family):
        assert x21_family.boundary is None
        assert all(out.converged for _, out in x21_family.entries)
        assert [om for om, _ in x21_family.entries] == pytest.approx([1.0, 0.9, 0.8, 0.7, 0.6, 0.5])
