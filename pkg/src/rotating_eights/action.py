"""Rotating-frame action of a choreography and its exact coefficient gradient.

The Lagrangian per unit time, for a frame turning at ``omega`` about the unit
vector e, is

    K - P + 1/2 omega^2 I_e + omega L_e

with P = -sum 1/r_ij. Integrals over one period use the rectangle rule on a
uniform grid, which is spectrally accurate for periodic integrands. The
gradient is that of the discretized action, so it agrees with finite
differences of :func:`action` to rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .orbit_model import TWO_PI, FourierOrbit, RotationAxis

COLLISION_EPSILON = 1e-6


class CollisionError(ArithmeticError):
    def __init__(self, pair: tuple[int, int], time: float | None, distance: float):
        self.pair = pair
        self.time = time
        self.distance = distance
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"bodies {pair[0]} and {pair[1]} within {distance:.3g}{where}")


@dataclass(frozen=True)
class ActionBreakdown:
    kinetic: float
    potential: float
    centrifugal: float
    coriolis: float

    @property
    def total(self) -> float:
        return self.kinetic - self.potential + self.centrifugal + self.coriolis

    def as_dict(self) -> dict[str, float]:
        return {
            "kinetic": self.kinetic,
            "potential": self.potential,
            "centrifugal": self.centrifugal,
            "coriolis": self.coriolis,
            "total": self.total,
        }


@dataclass(frozen=True)
class GradientVector:
    """Partial derivatives of the action, one per active coefficient."""

    keys: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, key: str) -> float:
        return float(self.values[self.keys.index(key)])

    def __len__(self) -> int:
        return len(self.keys)

    def norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


# -- instantaneous quantities ----------------------------------------------


def kinetic_energy(velocities) -> np.ndarray:
    v = np.asarray(velocities, dtype=float)
    return 0.5 * np.sum(v * v, axis=(-2, -1))


def _pair_geometry(positions: np.ndarray):
    diff = positions[..., :, None, :] - positions[..., None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return diff, dist


def _check_collisions(dist: np.ndarray, times=None, eps: float = COLLISION_EPSILON):
    n = dist.shape[-1]
    iu = np.triu_indices(n, 1)
    pairs = dist[..., iu[0], iu[1]]
    if pairs.size and pairs.min() <= eps:
        flat = int(np.argmin(pairs))
        idx = np.unravel_index(flat, pairs.shape)
        p = idx[-1]
        t = None
        if times is not None and len(idx) > 1:
            t = float(np.asarray(times).reshape(-1)[idx[0]])
        raise CollisionError((int(iu[0][p]), int(iu[1][p])), t, float(pairs[idx]))


def potential_energy(positions, times=None, eps: float = COLLISION_EPSILON) -> np.ndarray:
    """P = -sum_{i<j} 1/r_ij over the last two axes (bodies, xyz)."""
    pos = np.asarray(positions, dtype=float)
    _, dist = _pair_geometry(pos)
    _check_collisions(dist, times, eps)
    n = pos.shape[-2]
    iu = np.triu_indices(n, 1)
    return -np.sum(1.0 / dist[..., iu[0], iu[1]], axis=-1)


def moment_of_inertia(positions, axis: RotationAxis | str) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    i = RotationAxis.parse(axis).index
    return np.sum(pos * pos, axis=(-2, -1)) - np.sum(pos[..., i] ** 2, axis=-1)


def angular_momentum(positions, velocities, axis: RotationAxis | str) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(velocities, dtype=float)
    i = RotationAxis.parse(axis).index
    return np.sum(np.cross(pos, vel)[..., i], axis=-1)


# -- quadrature -------------------------------------------------------------


def default_m_points(k_max: int) -> int:
    return max(256, 8 * k_max)


class QuadratureGrid:
    """Uniform samples of one period with sin/cos tables up to ``k_max``.

    ``m_points`` is rounded up to a multiple of ``n_bodies`` so that every
    body's phase offset is a whole number of samples; the other bodies are
    then exact index shifts of body 0 and only one curve is evaluated.
    ``offset`` shifts the sample times.
    """

    def __init__(self, m_points: int, k_max: int, n_bodies: int, offset: float = 0.0):
        m_points = -(-int(m_points) // n_bodies) * n_bodies
        if m_points < 4 * k_max:
            raise ValueError(f"m_points={m_points} below 4*k_max={4 * k_max}")
        self.m_points = m_points
        self.k_max = int(k_max)
        self.n_bodies = int(n_bodies)
        self.offset = float(offset)
        self.times = offset + TWO_PI * np.arange(m_points) / m_points
        self.dt = TWO_PI / m_points
        k = np.arange(k_max + 1)
        arg = np.multiply.outer(self.times, k)
        self.sin = np.sin(arg)
        self.cos = np.cos(arg)
        self.ksin = self.sin * k
        self.kcos = self.cos * k
        shift = m_points // n_bodies
        self.partner_index = (np.arange(m_points)[None, :]
                              + shift * np.arange(1, n_bodies)[:, None]) % m_points

    @classmethod
    def for_orbit(cls, orbit: FourierOrbit, m_points: int | None = None, offset: float = 0.0):
        if m_points is None:
            m_points = default_m_points(orbit.k_max)
        return cls(m_points, orbit.k_max, orbit.n_bodies, offset)

    def check(self, orbit: FourierOrbit) -> None:
        if orbit.k_max != self.k_max or orbit.n_bodies != self.n_bodies:
            raise ValueError("grid was built for a different truncation or body count")

    def curve(self, tensor: np.ndarray, frequency: float = 1.0):
        """Body-0 positions and velocities on the grid, each (m, 3)."""
        pos = self.sin @ tensor[:, 0, :].T + self.cos @ tensor[:, 1, :].T
        vel = self.kcos @ tensor[:, 0, :].T - self.ksin @ tensor[:, 1, :].T
        return pos, frequency * vel

    def evaluate(self, tensor: np.ndarray, frequency: float = 1.0):
        """Positions and velocities of every body on the grid, each (m, n, 3)."""
        pos, vel = self.curve(tensor, frequency)
        idx = np.vstack([np.arange(self.m_points), self.partner_index]).T
        return pos[idx], vel[idx]


def _pair_terms(grid: QuadratureGrid, pos0: np.ndarray):
    """Separations from body 0 to every other body, shape (n-1, m, 3), and distances."""
    diff = pos0[grid.partner_index] - pos0[None, :, :]
    dist = np.sqrt(np.einsum("jmd,jmd->jm", diff, diff))
    if dist.size:
        flat = int(np.argmin(dist))
        j, i = np.unravel_index(flat, dist.shape)
        if dist[j, i] <= COLLISION_EPSILON:
            raise CollisionError((0, int(j) + 1), float(grid.times[i]), float(dist[j, i]))
    return diff, dist


def action(orbit: FourierOrbit, grid: QuadratureGrid | None = None,
           frequency: float = 1.0) -> ActionBreakdown:
    """Action over one period of the curve; ``frequency`` rescales time (default 1)."""
    if grid is None:
        grid = QuadratureGrid.for_orbit(orbit)
    grid.check(orbit)
    pos, vel = grid.curve(orbit.coefficient_tensor(), frequency)
    _, dist = _pair_terms(grid, pos)
    n = orbit.n_bodies
    w = n * grid.dt / frequency
    e = orbit.axis.unit
    along = pos @ e
    return ActionBreakdown(
        kinetic=float(0.5 * w * np.sum(vel * vel)),
        potential=float(-0.5 * w * np.sum(1.0 / dist)),
        centrifugal=float(0.5 * orbit.omega**2 * w * (np.sum(pos * pos) - np.sum(along * along))),
        coriolis=float(orbit.omega * w * np.sum(np.cross(pos, vel) @ e)),
    )


def gradient_tensor(orbit: FourierOrbit, grid: QuadratureGrid, frequency: float = 1.0) -> np.ndarray:
    """dA/d(coefficient) for every dense coefficient slot, shape (3, 2, k_max + 1)."""
    grid.check(orbit)
    return _gradient_dense(orbit.coefficient_tensor(), orbit.omega, orbit.axis.unit,
                           orbit.n_bodies, grid, frequency)


def _gradient_dense(tensor, omega, e, n_bodies, grid, frequency=1.0):
    pos, vel = grid.curve(tensor, frequency)
    diff, dist = _pair_terms(grid, pos)
    accel = np.einsum("jm,jmd->md", dist**-3, diff)
    r_perp = pos - np.multiply.outer(pos @ e, e)
    # dL/dr and dL/dv of the rotating-frame Lagrangian along body 0
    g_pos = accel + omega**2 * r_perp + omega * np.cross(vel, e)
    g_vel = (vel + omega * np.cross(e, pos)) * frequency
    w = n_bodies * grid.dt / frequency
    out = np.empty((3, 2, grid.k_max + 1))
    out[:, 0, :] = w * (g_pos.T @ grid.sin + g_vel.T @ grid.kcos)
    out[:, 1, :] = w * (g_pos.T @ grid.cos - g_vel.T @ grid.ksin)
    return out


def action_gradient(orbit: FourierOrbit, grid: QuadratureGrid | None = None,
                    frequency: float = 1.0) -> GradientVector:
    if grid is None:
        grid = QuadratureGrid.for_orbit(orbit)
    dense = gradient_tensor(orbit, grid, frequency)
    return GradientVector(orbit.active_keys(), dense.ravel()[orbit.active_index()])


class ActiveEvaluator:
    """Gradient as a function of the flat active-coefficient vector (solver fast path)."""

    def __init__(self, template: FourierOrbit, grid: QuadratureGrid | None = None):
        self.template = template
        self.grid = grid or QuadratureGrid.for_orbit(template)
        self.grid.check(template)
        self.index = template.active_index()
        self.unit = template.axis.unit

    def tensor(self, vec: np.ndarray) -> np.ndarray:
        t = np.zeros(3 * 2 * (self.template.k_max + 1))
        t[self.index] = vec
        return t.reshape(3, 2, -1)

    def gradient(self, vec: np.ndarray) -> np.ndarray:
        dense = _gradient_dense(self.tensor(vec), self.template.omega, self.unit,
                                self.template.n_bodies, self.grid)
        return dense.ravel()[self.index]
