"""Truncated Fourier representation of choreographic orbits in a rotating frame.

Units throughout: G = 1, unit masses, intrinsic frequency 1, period 2*pi.

Every coordinate of the generating curve is a sum of sine and cosine
harmonics. Which harmonics are allowed depends on the rotation axis:

=====  =====================  =====================  =================
block  coordinate / basis      allowed harmonics       axes
=====  =====================  =====================  =================
a      x, sin                 odd                    X, Y, Z
b      y, sin                 even (>= 2)            X, Y, Z
c      z, cos                 even (X) / odd (Y)     X, Y
a_cos  x, cos                 even                   Z
b_cos  y, cos                 odd                    Z
=====  =====================  =====================  =================

Harmonics that are multiples of the body count are additionally pinned to
zero (center of mass at rest at the origin).
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * np.pi

BLOCKS = ("a", "b", "c", "a_cos", "b_cos")
# block -> (coordinate index, 0 for sine / 1 for cosine)
BLOCK_LAYOUT = {
    "a": (0, 0),
    "b": (1, 0),
    "c": (2, 1),
    "a_cos": (0, 1),
    "b_cos": (1, 1),
}


class RotationAxis(str, enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"

    @property
    def index(self) -> int:
        return "xyz".index(self.value)

    @property
    def unit(self) -> np.ndarray:
        e = np.zeros(3)
        e[self.index] = 1.0
        return e

    @classmethod
    def parse(cls, value: "RotationAxis | str") -> "RotationAxis":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _parity_allowed(block: str, axis: RotationAxis, k: np.ndarray) -> np.ndarray:
    odd = k % 2 == 1
    even = ~odd
    if block == "a":
        return odd
    if block == "b":
        return even & (k >= 2)
    if block == "c":
        if axis is RotationAxis.X:
            return even
        if axis is RotationAxis.Y:
            return odd
        return np.zeros_like(odd)
    if block == "a_cos":
        return even if axis is RotationAxis.Z else np.zeros_like(odd)
    if block == "b_cos":
        return odd if axis is RotationAxis.Z else np.zeros_like(odd)
    raise KeyError(block)


def active_mask(block: str, axis: RotationAxis, n_bodies: int, k_max: int) -> np.ndarray:
    """Boolean mask over harmonics 0..k_max of the coefficients the solver may move."""
    k = np.arange(k_max + 1)
    return _parity_allowed(block, axis, k) & (k % n_bodies != 0)


@functools.lru_cache(maxsize=64)
def coefficient_layout(axis: RotationAxis, n_bodies: int, k_max: int):
    """(masks, active keys, active harmonics, flat indices into the dense tensor)."""
    masks = {name: active_mask(name, axis, n_bodies, k_max) for name in BLOCKS}
    for m in masks.values():
        m.setflags(write=False)
    keys, harmonics, flat = [], [], []
    for name, mask in masks.items():
        coord, basis = BLOCK_LAYOUT[name]
        ks = np.flatnonzero(mask)
        keys.extend(f"{name}{k}" for k in ks)
        harmonics.extend(ks)
        flat.extend(np.ravel_multi_index((coord, basis, ks), (3, 2, k_max + 1)) if ks.size else [])
    return masks, tuple(keys), np.array(harmonics, dtype=float), np.array(flat, dtype=int)


def default_k_max(n_bodies: int, axis: RotationAxis | str | None = None) -> int:
    """Truncation at which converged orbits close dynamically to ~1e-7.

    Close passes make the spectrum wider as n grows. The planar family about z
    has a slowly decaying spectrum and needs many more harmonics.
    """
    if n_bodies > 3:
        return 16 * n_bodies
    if axis is not None and RotationAxis.parse(axis) is RotationAxis.Z:
        return 320
    return 32


@dataclass(frozen=True, eq=False)
class FourierOrbit:
    """Coefficients of the generating curve plus the frame it is periodic in.

    Coefficient arrays are dense, indexed by harmonic 0..k_max, and read-only.
    Entries outside the axis parity pattern must be zero.
    """

    axis: RotationAxis
    omega: float
    n_bodies: int
    k_max: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_cos: np.ndarray = field(default=None)  # type: ignore[assignment]
    b_cos: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        axis = RotationAxis.parse(self.axis)
        object.__setattr__(self, "axis", axis)
        if self.n_bodies < 3 or self.n_bodies % 2 == 0:
            raise ValueError(f"n_bodies must be odd and >= 3, got {self.n_bodies}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega}")
        object.__setattr__(self, "omega", float(self.omega))
        k = np.arange(self.k_max + 1)
        for name in BLOCKS:
            raw = getattr(self, name)
            arr = np.zeros(self.k_max + 1) if raw is None else np.array(raw, dtype=float)
            if arr.shape != (self.k_max + 1,):
                raise ValueError(f"{name} must have length k_max + 1 = {self.k_max + 1}")
            bad = (arr != 0) & ~_parity_allowed(name, axis, k)
            if np.any(bad):
                raise ValueError(
                    f"{name} has coefficients at harmonics {k[bad].tolist()} "
                    f"not allowed for axis {axis.value}"
                )
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FourierOrbit):
            return NotImplemented
        return (self.axis is other.axis and self.omega == other.omega
                and self.n_bodies == other.n_bodies and self.k_max == other.k_max
                and all(np.array_equal(getattr(self, b), getattr(other, b)) for b in BLOCKS))

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def from_coefficients(
        cls,
        axis: RotationAxis | str,
        omega: float,
        n_bodies: int = 3,
        k_max: int | None = None,
        **blocks: Mapping[int, float],
    ) -> "FourierOrbit":
        """Build an orbit from sparse ``{harmonic: value}`` maps, e.g. ``a={1: 0.9}``."""
        if k_max is None:
            k_max = default_k_max(n_bodies, axis)
        dense = {}
        for name, values in blocks.items():
            if name not in BLOCKS:
                raise TypeError(f"unknown coefficient block {name!r}")
            arr = np.zeros(k_max + 1)
            for k, v in (values or {}).items():
                if not 0 <= int(k) <= k_max:
                    raise ValueError(f"harmonic {k} outside 0..{k_max}")
                arr[int(k)] = v
            dense[name] = arr
        return cls(RotationAxis.parse(axis), omega, n_bodies, k_max, **{
            name: dense.get(name) for name in BLOCKS
        })

    @classmethod
    def zeros(cls, axis, omega, n_bodies=3, k_max=None) -> "FourierOrbit":
        return cls.from_coefficients(axis, omega, n_bodies, k_max)

    def replace(self, **changes) -> "FourierOrbit":
        fields = {
            "axis": self.axis,
            "omega": self.omega,
            "n_bodies": self.n_bodies,
            "k_max": self.k_max,
            **{name: getattr(self, name) for name in BLOCKS},
        }
        fields.update(changes)
        return FourierOrbit(**fields)

    def coefficient(self, key: str) -> float:
        """Look up a coefficient by label such as ``"a1"``, ``"c2"`` or ``"b_cos3"``."""
        block, k = split_key(key)
        return float(getattr(self, block)[k])

    # -- flat views used by the solver -------------------------------------

    def masks(self) -> dict[str, np.ndarray]:
        return coefficient_layout(self.axis, self.n_bodies, self.k_max)[0]

    def active_keys(self) -> tuple[str, ...]:
        return coefficient_layout(self.axis, self.n_bodies, self.k_max)[1]

    def active_harmonics(self) -> np.ndarray:
        return coefficient_layout(self.axis, self.n_bodies, self.k_max)[2].copy()

    def active_index(self) -> np.ndarray:
        """Flat positions of the active coefficients inside :meth:`coefficient_tensor`."""
        return coefficient_layout(self.axis, self.n_bodies, self.k_max)[3]

    def active_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, name)[m] for name, m in self.masks().items()])

    def with_active_vector(self, vec: np.ndarray) -> "FourierOrbit":
        vec = np.asarray(vec, dtype=float)
        out, pos = {}, 0
        for name, mask in self.masks().items():
            arr = np.zeros(self.k_max + 1)
            cnt = int(mask.sum())
            arr[mask] = vec[pos:pos + cnt]
            pos += cnt
            out[name] = arr
        if pos != vec.size:
            raise ValueError(f"expected {pos} active coefficients, got {vec.size}")
        return self.replace(**out)

    def coefficient_tensor(self) -> np.ndarray:
        """Dense (3, 2, k_max + 1) array: [coordinate, sin/cos, harmonic]."""
        out = np.zeros((3, 2, self.k_max + 1))
        for name, (coord, basis) in BLOCK_LAYOUT.items():
            out[coord, basis] += getattr(self, name)
        return out

    def with_k_max(self, k_max: int) -> "FourierOrbit":
        """Pad or truncate every block to a new truncation order."""
        blocks = {}
        for name in BLOCKS:
            arr = np.zeros(k_max + 1)
            m = min(k_max, self.k_max) + 1
            arr[:m] = getattr(self, name)[:m]
            blocks[name] = arr
        return self.replace(k_max=k_max, **blocks)

    def with_axis(self, axis: RotationAxis | str) -> "FourierOrbit":
        """Reinterpret the planar part of this orbit for another rotation axis.

        Only the blocks shared by both axes survive; the rest are dropped.
        """
        axis = RotationAxis.parse(axis)
        k = np.arange(self.k_max + 1)
        blocks = {
            name: np.where(_parity_allowed(name, axis, k), getattr(self, name), 0.0)
            for name in BLOCKS
        }
        return self.replace(axis=axis, **blocks)


def split_key(key: str) -> tuple[str, int]:
    head = key.rstrip("0123456789")
    if head not in BLOCKS or head == key:
        raise KeyError(key)
    return head, int(key[len(head):])


# -- evaluation -----------------------------------------------------------


def _evaluate(tensor: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions and d/dtheta of the curve at phases theta (any shape) -> (..., 3)."""
    k = np.arange(tensor.shape[-1])
    arg = np.multiply.outer(theta, k)
    s, c = np.sin(arg), np.cos(arg)
    pos = s @ tensor[:, 0, :].T + c @ tensor[:, 1, :].T
    vel = (k * c) @ tensor[:, 0, :].T - (k * s) @ tensor[:, 1, :].T
    return pos, vel


def generating_curve(orbit: FourierOrbit, t) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame position and velocity of body 0 at time(s) ``t``."""
    return _evaluate(orbit.coefficient_tensor(), np.asarray(t, dtype=float))


@dataclass(frozen=True)
class BodyTrajectorySample:
    body_index: int
    time: float | np.ndarray
    position: np.ndarray
    velocity: np.ndarray


def phase_offsets(n_bodies: int) -> np.ndarray:
    return TWO_PI * np.arange(n_bodies) / n_bodies


def body_trajectory(orbit: FourierOrbit, j: int, t) -> BodyTrajectorySample:
    """Body ``j`` at time(s) ``t``; arrays of times give arrays of shape (..., 3)."""
    if not 0 <= j < orbit.n_bodies:
        raise IndexError(f"body index {j} out of range for {orbit.n_bodies} bodies")
    pos, vel = generating_curve(orbit, t + TWO_PI * j / orbit.n_bodies)
    t = np.asarray(t, dtype=float)
    return BodyTrajectorySample(j, float(t) if t.ndim == 0 else t, pos, vel)


def all_bodies(orbit: FourierOrbit, t) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame positions and velocities of every body, shape (..., n, 3)."""
    theta = np.add.outer(np.asarray(t, dtype=float), phase_offsets(orbit.n_bodies))
    return _evaluate(orbit.coefficient_tensor(), theta)


def rotation_matrix(axis: RotationAxis, angle) -> np.ndarray:
    """Right-handed rotation about ``axis``; broadcasts over an array of angles."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    i = axis.index
    j, k = (i + 1) % 3, (i + 2) % 3
    R = np.zeros(angle.shape + (3, 3))
    R[..., i, i] = 1.0
    R[..., j, j] = c
    R[..., k, k] = c
    R[..., k, j] = s
    R[..., j, k] = -s
    return R


def to_fixed_frame(orbit: FourierOrbit, j: int, t):
    """Inertial-frame position of body ``j``: the frame turns by omega*t about the axis."""
    sample = body_trajectory(orbit, j, t)
    R = rotation_matrix(orbit.axis, orbit.omega * np.asarray(t, dtype=float))
    return np.einsum("...ij,...j->...i", R, sample.position)


def apply_momentum_mask(orbit: FourierOrbit) -> FourierOrbit:
    k = np.arange(orbit.k_max + 1)
    keep = k % orbit.n_bodies != 0
    return orbit.replace(**{name: np.where(keep, getattr(orbit, name), 0.0) for name in BLOCKS})


def lagrange_radius(n_bodies: int) -> float:
    """Radius of the regular n-gon relative equilibrium turning at unit frequency."""
    m = np.arange(1, n_bodies)
    return float((0.25 * np.sum(1.0 / np.sin(np.pi * m / n_bodies))) ** (1.0 / 3.0))


def lagrange_orbit(n_bodies: int = 3, omega: float = 1.0, k_max: int | None = None) -> FourierOrbit:
    """Regular polygon in the plane normal to x, periodic in a frame turning at ``omega``.

    In the frame the polygon turns clockwise at rate 2, so in inertial space it
    turns at rate 2 - omega; the radius follows from the centripetal balance.
    """
    rate = 2.0 - omega
    radius = lagrange_radius(n_bodies) * abs(rate) ** (-2.0 / 3.0)
    return FourierOrbit.from_coefficients(
        RotationAxis.X, omega, n_bodies, k_max, b={2: radius}, c={2: radius}
    )
