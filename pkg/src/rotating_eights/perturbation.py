"""First-order theory of the family near the three-body Lagrange orbit.

Coordinates are the chart (eps, b2, b4) = (a(1), b(2), b(4)) / r with
r = 3**(-1/6) and beta = 1 - omega. The maps here are closed-form and act as
seeds and analytic oracles for the iterative solver.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .orbit_model import FourierOrbit, RotationAxis, apply_momentum_mask, lagrange_orbit, lagrange_radius

LENGTH_SCALE = 3.0 ** (-1.0 / 6.0)
BETA_MAX = 0.1
BETA_WARN = 0.02


class ChartValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LagrangeChart:
    beta: float
    eps: float
    b2: float
    b4: float

    def __post_init__(self):
        if self.beta > BETA_MAX:
            raise ValueError(f"beta={self.beta} outside the chart's validity cap {BETA_MAX}")

    def as_array(self) -> np.ndarray:
        return np.array([self.eps, self.b2, self.b4])


def perturbation_map(chart: LagrangeChart) -> LagrangeChart:
    eps, b2, b4, beta = chart.eps, chart.b2, chart.b4, chart.beta
    if b2 <= 0:
        raise ValueError(f"b2 must be positive, got {b2}")
    inv_b2sq = 1.0 / b2**2
    eps_new = eps / b2**3 * (1.0 - 9.0 / 8.0 * eps**2 + 1.5 * b4)
    b2_new = (4.0 * (1.0 - beta) * b2 + inv_b2sq * (1.0 - 0.75 * eps**2)) / (5.0 - 2.0 * beta)
    b4_new = (8.0 * (1.0 - beta) * b4 + inv_b2sq * (0.375 * eps**2 - b4)) / (17.0 - 2.0 * beta)
    return replace(chart, eps=eps_new, b2=b2_new, b4=b4_new)


def fixed_point(beta: float) -> LagrangeChart:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return LagrangeChart(beta, math.sqrt(19.0 * beta / 3.0), 1.0 - 2.25 * beta, 0.25 * beta)


def deviation_map(deviation, beta: float) -> np.ndarray:
    """Linearized map for (d_eps, d_b2, d_b4) about :func:`fixed_point`."""
    d_eps, d_b2, d_b4 = (float(x) for x in deviation)
    return np.array([
        d_eps * (1.0 - 4.0 * beta - 6.0 * math.sqrt(3.0 * beta / 19.0) * d_eps),
        0.4 * (1.0 - 42.0 / 5.0 * beta) * d_b2,
        15.0 / 34.0 * (1.0 - 274.0 / 255.0 * beta) * d_b4,
    ])


def contraction_factors(beta: float) -> tuple[float, float, float]:
    """Linear multipliers of (d_eps, d_b2, d_b4) per iteration."""
    return (1.0 - 4.0 * beta, 0.4 * (1.0 - 42.0 / 5.0 * beta),
            15.0 / 34.0 * (1.0 - 274.0 / 255.0 * beta))


def iterations_estimate(digits: int, beta: float) -> int:
    if digits < 1:
        raise ValueError("digits must be >= 1")
    if beta <= 0:
        raise ZeroDivisionError("the marginal eigenvalue is 1 at beta = 0: no finite iteration count")
    # round before ceil so 2.3*4/(4e-4) lands on 23000, not 23001
    return math.ceil(round(2.3 * digits / (4.0 * beta), 9))


def iterate_deviation(deviation, beta: float, digits: int, max_iters: int = 10**7) -> int:
    """Iterations of :func:`deviation_map` until |d_eps| shrinks by 10**-digits."""
    d = np.asarray(deviation, dtype=float)
    target = 10.0 ** (-digits) * abs(d[0])
    for i in range(1, max_iters + 1):
        d = deviation_map(d, beta)
        if abs(d[0]) <= target:
            return i
    raise RuntimeError(f"no convergence within {max_iters} iterations")


def seed_orbit(beta: float, n_bodies: int = 3, k_max: int | None = None) -> FourierOrbit:
    """Axis-X orbit at omega = 1 - beta built from the chart's fixed point.

    beta = 0 returns the exact Lagrange orbit. For n != 3 the three-body chart
    is scaled to the n-gon radius; it is then only a rough seed.
    """
    if not 0.0 <= beta <= BETA_MAX:
        raise ValueError(f"beta={beta} outside [0, {BETA_MAX}]")
    if beta == 0.0:
        return lagrange_orbit(n_bodies, 1.0, k_max)
    if beta > BETA_WARN:
        warnings.warn(f"beta={beta} above {BETA_WARN}: first-order seed is coarse",
                      ChartValidityWarning, stacklevel=2)
    fp = fixed_point(beta)
    r = lagrange_radius(n_bodies)
    # z harmonics mirror the y ones: each pair is a circular counter-rotating component
    orbit = FourierOrbit.from_coefficients(
        RotationAxis.X, 1.0 - beta, n_bodies, k_max,
        a={1: r * fp.eps},
        b={2: r * fp.b2, 4: r * fp.b4},
        c={2: r * fp.b2, 4: r * fp.b4},
    )
    return apply_momentum_mask(orbit)
