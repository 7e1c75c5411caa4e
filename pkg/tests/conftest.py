import os

import pytest
from hypothesis import HealthCheck, settings

from rotating_eights.solver import SolverConfig, cold_start, continuation_sweep, default_delta_s, sweep_omegas

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# Families are expensive, so they are built once per session and shared.


@pytest.fixture(scope="session")
def x_family():
    """Axis-X family from the Lagrange end down to the planar eight, step 0.05."""
    return continuation_sweep("x", 3, sweep_omegas(1.0, 0.0, 0.05))


@pytest.fixture(scope="session")
def x_family_fine():
    return continuation_sweep("x", 3, sweep_omegas(1.0, 0.0, 0.025))


@pytest.fixture(scope="session")
def eight(x_family):
    return x_family.orbit_at(0.0)


@pytest.fixture(scope="session")
def y_family():
    """Axis-Y sweep 0 -> 0.9 at step 0.1, cold-started at omega = 0; stops at the first failure."""
    return continuation_sweep("y", 3, sweep_omegas(0.0, 0.9, 0.1), seed=cold_start("y", 0.0))


@pytest.fixture(scope="session")
def y_family_fine():
    return continuation_sweep("y", 3, sweep_omegas(0.0, 0.2, 0.05), seed=cold_start("y", 0.0))


@pytest.fixture(scope="session")
def z_orbits():
    """Axis-Z orbits at 0.5, 0.55, 0.6 at the default truncation.

    The sweep runs at a coarse truncation to save time; each target point is
    then re-solved at the default one.
    """
    from rotating_eights.orbit_model import default_k_max
    from rotating_eights.solver import solve

    cfg = SolverConfig(delta_s=default_delta_s("z"))
    coarse = continuation_sweep("z", 3, sweep_omegas(0.0, 0.6, 0.05), config=cfg,
                                seed=cold_start("z", 0.0, k_max=128))
    out = {}
    for om in (0.5, 0.55, 0.6):
        fine = solve(coarse.orbit_at(om).with_k_max(default_k_max(3, "z")), None, cfg)
        assert fine.converged
        out[om] = fine.orbit
    return out


@pytest.fixture(scope="session")
def x21_family():
    return continuation_sweep("x", 21, sweep_omegas(1.0, 0.5, 0.1))


# -- acceptance report ------------------------------------------------------

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append (name, passed, detail); the lines are printed after the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
