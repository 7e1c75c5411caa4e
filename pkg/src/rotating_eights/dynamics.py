"""Inertial-frame integration of the n-body problem and nonlinear stability probes."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .action import COLLISION_EPSILON, CollisionError
from .orbit_model import TWO_PI, FourierOrbit, all_bodies, rotation_matrix
from .solver import FamilyRecord, SeedError

ENERGY_TOLERANCE = 1e-5


@dataclass(frozen=True)
class PhaseState:
    time: float
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        vel = np.array(self.velocities, dtype=float)
        if pos.shape != vel.shape or pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions and velocities must both be (n, 3)")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("phase state has non-finite entries")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_bodies(self) -> int:
        return self.positions.shape[0]


def energy(state: PhaseState) -> float:
    pos, vel = state.positions, state.velocities
    n = len(pos)
    iu = np.triu_indices(n, 1)
    r = np.linalg.norm(pos[iu[0]] - pos[iu[1]], axis=1)
    return float(0.5 * np.sum(vel * vel) - np.sum(1.0 / r))


def total_angular_momentum(state: PhaseState) -> np.ndarray:
    return np.sum(np.cross(state.positions, state.velocities), axis=0)


def accelerations(positions, eps: float = COLLISION_EPSILON) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    diff = pos[None, :, :] - pos[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    n = len(pos)
    iu = np.triu_indices(n, 1)
    if n > 1 and dist[iu].min() <= eps:
        p = int(np.argmin(dist[iu]))
        raise CollisionError((int(iu[0][p]), int(iu[1][p])), None, float(dist[iu][p]))
    np.fill_diagonal(dist, np.inf)
    return np.einsum("ij,ijd->id", dist**-3, diff)


# -- compiled kernels -----------------------------------------------------


@njit(cache=True)
def _accel(pos, out, eps):
    n = pos.shape[0]
    out[:, :] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            dz = pos[j, 2] - pos[i, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 <= eps * eps:
                return i * n + j
            inv3 = 1.0 / (r2 * np.sqrt(r2))
            out[i, 0] += dx * inv3
            out[i, 1] += dy * inv3
            out[i, 2] += dz * inv3
            out[j, 0] -= dx * inv3
            out[j, 1] -= dy * inv3
            out[j, 2] -= dz * inv3
    return -1


@njit(cache=True)
def _energy(pos, vel):
    n = pos.shape[0]
    e = 0.0
    for i in range(n):
        e += 0.5 * (vel[i, 0] ** 2 + vel[i, 1] ** 2 + vel[i, 2] ** 2)
        for j in range(i + 1, n):
            e -= 1.0 / np.sqrt((pos[i, 0] - pos[j, 0]) ** 2 + (pos[i, 1] - pos[j, 1]) ** 2
                               + (pos[i, 2] - pos[j, 2]) ** 2)
    return e


@njit(cache=True)
def _angmom(pos, vel, out):
    out[:] = 0.0
    for i in range(pos.shape[0]):
        out[0] += pos[i, 1] * vel[i, 2] - pos[i, 2] * vel[i, 1]
        out[1] += pos[i, 2] * vel[i, 0] - pos[i, 0] * vel[i, 2]
        out[2] += pos[i, 0] * vel[i, 1] - pos[i, 1] * vel[i, 0]


@njit(cache=True)
def _rk4_step(pos, vel, h, eps, k1v, k2v, k3v, k4v, tmp_p):
    code = _accel(pos, k1v, eps)
    if code >= 0:
        return code
    tmp_p[:, :] = pos + 0.5 * h * vel
    code = _accel(tmp_p, k2v, eps)
    if code >= 0:
        return code
    v2 = vel + 0.5 * h * k1v
    tmp_p[:, :] = pos + 0.5 * h * v2
    code = _accel(tmp_p, k3v, eps)
    if code >= 0:
        return code
    v3 = vel + 0.5 * h * k2v
    tmp_p[:, :] = pos + h * v3
    code = _accel(tmp_p, k4v, eps)
    if code >= 0:
        return code
    v4 = vel + h * k3v
    pos += h / 6.0 * (vel + 2.0 * v2 + 2.0 * v3 + v4)
    vel += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return -1


@njit(cache=True)
def _run(pos, vel, h, nsteps, sample_every, eps, samples, stats):
    """Advance in place. stats = [dE_max, dL_max, com_max, excursion_max, steps_done, code]."""
    n = pos.shape[0]
    k1 = np.zeros((n, 3))
    k2 = np.zeros((n, 3))
    k3 = np.zeros((n, 3))
    k4 = np.zeros((n, 3))
    tmp = np.zeros((n, 3))
    L0 = np.zeros(3)
    L = np.zeros(3)
    _angmom(pos, vel, L0)
    e0 = _energy(pos, vel)
    norm_l0 = np.sqrt(L0[0] ** 2 + L0[1] ** 2 + L0[2] ** 2)
    stats[5] = -1.0
    isample = 0
    if sample_every > 0:
        samples[0, :, :] = pos
        isample = 1
    for step in range(1, nsteps + 1):
        code = _rk4_step(pos, vel, h, eps, k1, k2, k3, k4, tmp)
        if code >= 0:
            stats[5] = code
            break
        stats[4] = step
        de = abs(_energy(pos, vel) - e0) / abs(e0)
        if de > stats[0]:
            stats[0] = de
        _angmom(pos, vel, L)
        dl = np.sqrt((L[0] - L0[0]) ** 2 + (L[1] - L0[1]) ** 2 + (L[2] - L0[2]) ** 2) / (1.0 + norm_l0)
        if dl > stats[1]:
            stats[1] = dl
        cx = 0.0
        cy = 0.0
        cz = 0.0
        rmax = 0.0
        for i in range(n):
            cx += pos[i, 0]
            cy += pos[i, 1]
            cz += pos[i, 2]
            r = np.sqrt(pos[i, 0] ** 2 + pos[i, 1] ** 2 + pos[i, 2] ** 2)
            if r > rmax:
                rmax = r
        com = np.sqrt(cx * cx + cy * cy + cz * cz) / n
        if com > stats[2]:
            stats[2] = com
        if rmax > stats[3]:
            stats[3] = rmax
        if sample_every > 0 and step % sample_every == 0 and isample < samples.shape[0]:
            samples[isample, :, :] = pos
            isample += 1
    return isample


# -- public integration API ------------------------------------------------


@dataclass(frozen=True)
class ConservationLedger:
    initial_energy: float
    final_energy: float
    initial_angular_momentum: np.ndarray
    final_angular_momentum: np.ndarray
    center_of_mass: np.ndarray
    total_momentum: np.ndarray
    energy_drift: float
    momentum_drift: float
    max_center_of_mass_offset: float

    def as_dict(self) -> dict:
        return {
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "initial_angular_momentum": self.initial_angular_momentum.tolist(),
            "final_angular_momentum": self.final_angular_momentum.tolist(),
            "center_of_mass": self.center_of_mass.tolist(),
            "total_momentum": self.total_momentum.tolist(),
            "energy_drift": self.energy_drift,
            "momentum_drift": self.momentum_drift,
            "max_center_of_mass_offset": self.max_center_of_mass_offset,
        }


@dataclass(frozen=True)
class IntegrationResult:
    state: PhaseState
    ledger: ConservationLedger
    sample_times: np.ndarray
    samples: np.ndarray
    max_radius: float
    collision: CollisionError | None = None

    @property
    def collided(self) -> bool:
        return self.collision is not None


def rk4_step(state: PhaseState, h: float, eps: float = COLLISION_EPSILON) -> PhaseState:
    if h <= 0:
        raise ValueError("step must be positive")
    pos = state.positions.copy()
    vel = state.velocities.copy()
    n = len(pos)
    scratch = [np.zeros((n, 3)) for _ in range(5)]
    code = _rk4_step(pos, vel, h, eps, *scratch)
    if code >= 0:
        raise CollisionError((code // n, code % n), state.time, eps)
    return PhaseState(state.time + h, pos, vel)


def integrate(state: PhaseState, periods: float, steps_per_period: int = 4096,
              sample_every: int = 0, period: float = TWO_PI,
              eps: float = COLLISION_EPSILON) -> IntegrationResult:
    """Fixed-step RK4 over ``periods * steps_per_period`` steps.

    ``sample_every`` > 0 keeps every that-many-th position for export. A
    collision stops the run; the partial result carries the error.
    """
    if steps_per_period < 256:
        raise ValueError("steps_per_period must be >= 256")
    nsteps = int(round(periods * steps_per_period))
    h = period / steps_per_period
    pos = state.positions.copy()
    vel = state.velocities.copy()
    n = len(pos)
    nsamp = nsteps // sample_every + 1 if sample_every > 0 else 0
    samples = np.zeros((nsamp, n, 3))
    stats = np.zeros(6)
    e0 = energy(state)
    L0 = total_angular_momentum(state)
    r0 = float(np.max(np.linalg.norm(state.positions, axis=1)))
    stats[3] = r0
    stats[2] = float(np.linalg.norm(state.positions.mean(axis=0)))
    kept = _run(pos, vel, h, nsteps, sample_every, eps, samples, stats)
    steps_done = int(stats[4])
    final = PhaseState(state.time + steps_done * h, pos, vel)
    collision = None
    if stats[5] >= 0:
        code = int(stats[5])
        collision = CollisionError((code // n, code % n), final.time, eps)
    ledger = ConservationLedger(
        initial_energy=e0,
        final_energy=energy(final),
        initial_angular_momentum=L0,
        final_angular_momentum=total_angular_momentum(final),
        center_of_mass=pos.mean(axis=0),
        total_momentum=vel.sum(axis=0),
        energy_drift=float(stats[0]),
        momentum_drift=float(stats[1]),
        max_center_of_mass_offset=float(stats[2]),
    )
    times = state.time + h * sample_every * np.arange(kept) if sample_every > 0 else np.zeros(0)
    return IntegrationResult(final, ledger, times, samples[:kept], float(stats[3]), collision)


def initial_state_from_orbit(orbit: FourierOrbit, t0: float = 0.0) -> PhaseState:
    """Inertial state of every body at ``t0``: v_inertial = R (v_rot + omega e x r)."""
    pos, vel = all_bodies(orbit, t0)
    vel = vel + orbit.omega * np.cross(orbit.axis.unit, pos)
    R = rotation_matrix(orbit.axis, orbit.omega * t0)
    return PhaseState(t0, pos @ R.T, vel @ R.T)


def to_rotating_frame(orbit: FourierOrbit, state: PhaseState) -> PhaseState:
    """Inverse of :func:`initial_state_from_orbit` at the state's own time."""
    R = rotation_matrix(orbit.axis, orbit.omega * state.time)
    pos = state.positions @ R
    vel = state.velocities @ R - orbit.omega * np.cross(orbit.axis.unit, pos)
    return PhaseState(state.time, pos, vel)


def closure_error(orbit: FourierOrbit, steps_per_period: int = 4096, periods: int = 1) -> float:
    """Largest componentwise mismatch after whole periods, compared in the rotating frame."""
    start = initial_state_from_orbit(orbit)
    result = integrate(start, periods, steps_per_period)
    if result.collided:
        raise result.collision
    back = to_rotating_frame(orbit, result.state)
    ref = to_rotating_frame(orbit, start)
    return float(max(np.max(np.abs(back.positions - ref.positions)),
                     np.max(np.abs(back.velocities - ref.velocities))))


# -- stability -----------------------------------------------------------


class Classification(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    COLLISION = "collision_terminated"


@dataclass(frozen=True)
class ProbeConfig:
    periods: float = 60.0
    steps_per_period: int = 4096
    excursion_bound: float = 3.0
    energy_tolerance: float = ENERGY_TOLERANCE
    rng_seed: int = 0
    sample_every: int = 0


@dataclass(frozen=True)
class StabilityReport:
    omega: float
    periods_run: float
    energy_drift: float
    momentum_drift: float
    max_excursion: float
    classification: Classification
    perturbation_scale: float
    rng_seed: int
    excursion_bound: float
    result: IntegrationResult | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "omega": self.omega,
            "periods_run": self.periods_run,
            "energy_drift": self.energy_drift,
            "momentum_drift": self.momentum_drift,
            "max_excursion": self.max_excursion,
            "classification": self.classification.value,
            "perturbation_scale": self.perturbation_scale,
            "rng_seed": self.rng_seed,
            "excursion_bound": self.excursion_bound,
        }


def perturb_state(state: PhaseState, scale: float, rng_seed: int) -> PhaseState:
    """Scale every component by an independent factor in [1 - s, 1 + s].

    The result is shifted back to zero center of mass and zero total momentum
    so that the excursion measures shape change rather than drift.
    """
    rng = np.random.default_rng(rng_seed)
    n = state.n_bodies
    pos = state.positions * rng.uniform(1 - scale, 1 + scale, (n, 3))
    vel = state.velocities * rng.uniform(1 - scale, 1 + scale, (n, 3))
    pos -= pos.mean(axis=0)
    vel -= vel.mean(axis=0)
    return PhaseState(state.time, pos, vel)


def stability_probe(orbit: FourierOrbit, perturbation_scale: float = 1e-3,
                    config: ProbeConfig | None = None, **overrides) -> StabilityReport:
    config = config or ProbeConfig(**overrides)
    if perturbation_scale < 0:
        raise ValueError("perturbation_scale must be >= 0")
    start = perturb_state(initial_state_from_orbit(orbit), perturbation_scale, config.rng_seed)
    r0 = float(np.max(np.linalg.norm(start.positions, axis=1)))
    result = integrate(start, config.periods, config.steps_per_period, config.sample_every)
    excursion = result.max_radius / r0
    drift = result.ledger.energy_drift
    if result.collided:
        cls = Classification.COLLISION
    elif drift <= config.energy_tolerance and excursion <= config.excursion_bound:
        cls = Classification.STABLE
    else:
        cls = Classification.UNSTABLE
    steps_done = (result.state.time - start.time) / TWO_PI
    return StabilityReport(orbit.omega, steps_done, drift, result.ledger.momentum_drift, excursion,
                           cls, perturbation_scale, config.rng_seed, config.excursion_bound, result)


@dataclass(frozen=True)
class ThresholdScan:
    reports: list[tuple[float, StabilityReport]]
    last_stable: float | None
    first_unstable: float | None

    @property
    def bracket(self) -> tuple[float | None, float | None]:
        return self.last_stable, self.first_unstable


def threshold_scan(orbits: Mapping[float, FourierOrbit] | FamilyRecord, omega_list: Sequence[float],
                   perturbation_scale: float = 1e-3, config: ProbeConfig | None = None) -> ThresholdScan:
    """Probe each omega in order and bracket the stable-to-unstable transition."""
    if isinstance(orbits, FamilyRecord):
        lookup = {om: out.orbit for om, out in orbits.converged()}
    else:
        lookup = dict(orbits)
    reports = []
    for om in omega_list:
        match = [o for key, o in lookup.items() if abs(key - om) <= 1e-12]
        if not match:
            raise SeedError(f"no converged orbit available at omega={om}")
        reports.append((om, stability_probe(match[0], perturbation_scale, config)))
    last_stable = first_unstable = None
    for om, rep in reports:
        if rep.classification is Classification.STABLE:
            if first_unstable is None:
                last_stable = om
        elif first_unstable is None:
            first_unstable = om
    return ThresholdScan(reports, last_stable, first_unstable)
