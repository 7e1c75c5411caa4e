"""Preconditioned gradient iteration for stationary points of the action.

Each active coefficient q of harmonic k moves by

    q' = q + sign * delta_s / (n * pi * u(k)) * dA/dq,    u(k) = k^2 + omega^2

The n*pi factor is the diagonal of the kinetic Hessian (each of n bodies
contributes pi*k^2 per unit coefficient), so delta_s = 1 is a Jacobi sweep.
``sign`` is -1 where the action is a minimum in that coefficient and +1 where
it is a maximum.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .action import (
    ActionBreakdown,
    ActiveEvaluator,
    CollisionError,
    GradientVector,
    QuadratureGrid,
    action,
    action_gradient,
)
from .orbit_model import FourierOrbit, RotationAxis, apply_momentum_mask, split_key

log = logging.getLogger(__name__)


class SeedError(LookupError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, message: str, diagnostics: list[dict]):
        super().__init__(message)
        self.diagnostics = diagnostics


class BranchFlipError(RuntimeError):
    pass


def default_sign_policy(axis: RotationAxis | str) -> dict[str, int]:
    """Known extremum character per axis: minima everywhere except c1, c3 about y."""
    axis = RotationAxis.parse(axis)
    if axis is RotationAxis.Y:
        return {"c1": +1, "c3": +1}
    return {}


def default_delta_s(axis: RotationAxis | str) -> float:
    """Largest step scale that converges along the whole family for this axis."""
    # the planar family overshoots at larger steps once omega > 0.5
    return 0.05 if RotationAxis.parse(axis) is RotationAxis.Z else 0.2


@dataclass(frozen=True)
class SolverConfig:
    delta_s: float = 0.2
    sign_policy: Mapping[str, int] | None = None
    tol: float = 1e-12
    max_iters: int = 200_000
    divergence_window: int = 10
    divergence_factor: float = 2.0
    m_points: int | None = None

    def __post_init__(self):
        if not 0.0 < self.delta_s <= 1.0:
            raise ValueError(f"delta_s must lie in (0, 1], got {self.delta_s}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.divergence_window < 1 or not self.divergence_factor >= 1.0:
            raise ValueError("divergence_window must be >= 1 and divergence_factor >= 1")
        if self.sign_policy is not None:
            for key, s in self.sign_policy.items():
                if s not in (-1, 1):
                    raise ValueError(f"sign for {key!r} must be +1 or -1")

    def signs_for(self, orbit: FourierOrbit) -> np.ndarray:
        """Per-active-coefficient signs; a key like ``c3`` overrides its block ``c``."""
        policy = default_sign_policy(orbit.axis) if self.sign_policy is None else self.sign_policy
        out = []
        for key in orbit.active_keys():
            block, _ = split_key(key)
            out.append(policy.get(key, policy.get(block, -1)))
        return np.array(out, dtype=float)

    def as_dict(self) -> dict:
        return {
            "delta_s": self.delta_s,
            "sign_policy": None if self.sign_policy is None else dict(self.sign_policy),
            "tol": self.tol,
            "max_iters": self.max_iters,
            "divergence_window": self.divergence_window,
            "divergence_factor": self.divergence_factor,
            "m_points": self.m_points,
        }


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_ITERS = "max_iters_reached"
    COLLISION = "collision"


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    orbit: FourierOrbit
    iterations: int
    final_step_norm: float
    final_gradient_norm: float
    action: ActionBreakdown | None

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


def preconditioner(orbit: FourierOrbit) -> np.ndarray:
    k = orbit.active_harmonics()
    return 1.0 / (orbit.n_bodies * np.pi * (k**2 + orbit.omega**2))


def normalized_gradient_norm(orbit: FourierOrbit, gradient: GradientVector) -> float:
    """Largest full Jacobi correction max |P dA/dq|, in coefficient units like ``tol``."""
    if not len(gradient):
        return 0.0
    return float(np.max(np.abs(preconditioner(orbit) * gradient.values)))


def descent_step(orbit: FourierOrbit, gradient: GradientVector, config: SolverConfig) -> FourierOrbit:
    if len(gradient) != len(orbit.active_keys()):
        raise ValueError("gradient does not match the orbit's active coefficients")
    step = config.signs_for(orbit) * config.delta_s * preconditioner(orbit) * gradient.values
    return apply_momentum_mask(orbit.with_active_vector(orbit.active_vector() + step))


def solve(initial: FourierOrbit, omega: float | None = None,
          config: SolverConfig | None = None,
          callback: Callable[[int, float, float], None] | None = None) -> SolveOutcome:
    """Iterate :func:`descent_step` until the largest coefficient change is <= tol.

    Failure modes are reported through the outcome's status, never raised.
    """
    config = config or SolverConfig()
    orbit = apply_momentum_mask(initial if omega is None else initial.replace(omega=omega))
    grid = QuadratureGrid.for_orbit(orbit, config.m_points)
    evaluator = ActiveEvaluator(orbit, grid)
    precond = preconditioner(orbit)
    signs = config.signs_for(orbit) * config.delta_s * precond
    vec = orbit.active_vector()

    best_gnorm = prev_gnorm = np.inf
    rising = 0
    step_norm = np.inf
    gnorm = np.inf
    status = SolveStatus.MAX_ITERS
    it = 0
    for it in range(1, config.max_iters + 1):
        try:
            grad = evaluator.gradient(vec)
        except CollisionError as exc:
            log.info("collision after %d iterations: %s", it, exc)
            status = SolveStatus.COLLISION
            break
        gnorm = float(np.max(np.abs(precond * grad))) if grad.size else 0.0
        if not np.isfinite(gnorm):
            status = SolveStatus.DIVERGED
            break
        # Warm starts can raise the norm for a few dozen steps, but by less
        # than 1.5x, so a run of rises only counts once it passes the factor.
        rising = rising + 1 if gnorm > prev_gnorm else 0
        prev_gnorm = gnorm
        best_gnorm = min(best_gnorm, gnorm)
        if rising >= config.divergence_window and gnorm > config.divergence_factor * best_gnorm:
            status = SolveStatus.DIVERGED
            break
        step = signs * grad
        vec = vec + step
        step_norm = float(np.max(np.abs(step)))
        if callback is not None:
            callback(it, step_norm, gnorm)
        if step_norm <= config.tol:
            status = SolveStatus.CONVERGED
            break

    if np.all(np.isfinite(vec)):
        orbit = orbit.with_active_vector(vec)
    final_action = None
    if status is not SolveStatus.COLLISION:
        try:
            final_action = action(orbit, grid)
            gnorm = normalized_gradient_norm(orbit, action_gradient(orbit, grid))
        except CollisionError:
            status = SolveStatus.COLLISION
    return SolveOutcome(status, orbit, it, step_norm, float(gnorm), final_action)


# -- sign calibration ------------------------------------------------------


def candidate_policies(orbit: FourierOrbit) -> list[dict[str, int]]:
    """Sign assignments worth probing, most plausible first."""
    masks = orbit.masks()
    blocks = [name for name, m in masks.items() if m.any()]
    cands: list[dict[str, int]] = [{}]
    low = [key for key in orbit.active_keys() if key.startswith("c") and not key.startswith("c_")]
    # about y the lowest c harmonics sit at a maximum; try them singly and paired
    cands.extend({key: +1} for key in low[:2])
    cands.append({key: +1 for key in low[:2]})
    for name in blocks:
        cands.append({name: +1})
    for r in range(2, len(blocks) + 1):
        for combo in itertools.combinations(blocks, r):
            cands.append({name: +1 for name in combo})
    unique, seen = [], set()
    for c in cands:
        key = tuple(sorted(c.items()))
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def _probe(orbit: FourierOrbit, config: SolverConfig, iters: int) -> dict:
    norms = []
    out = solve(orbit, None, replace(config, max_iters=iters, tol=1e-300),
                callback=lambda i, s, g: norms.append(g))
    norms = np.array(norms)
    if norms.size < 2:
        return {"status": out.status.value, "ratio": np.inf, "monotone": False}
    tail = norms[norms.size // 2:]
    # once at the rounding floor the norm only jitters
    tail = tail[tail > 1e-10 * norms[0]]
    return {
        "status": out.status.value,
        "ratio": float(norms[-1] / norms[0]),
        "monotone": bool(np.all(np.diff(tail) <= 0)),
        "iterations": int(norms.size),
    }


def auto_sign_calibration(initial: FourierOrbit, omega: float | None = None,
                          config: SolverConfig | None = None,
                          probe_iters: int = 200, jitter: float = 1e-3,
                          rng_seed: int = 0) -> SolverConfig:
    """Pick the sign policy under which short probe runs shrink the gradient.

    The start is jittered so that every mode is excited; a wrong sign then
    shows up as growth along that mode.
    """
    config = config or SolverConfig()
    orbit = apply_momentum_mask(initial if omega is None else initial.replace(omega=omega))
    rng = np.random.default_rng(rng_seed)
    vec = orbit.active_vector()
    scale = jitter * max(np.max(np.abs(vec)), 1.0)
    probe_start = orbit.with_active_vector(vec + scale * rng.uniform(-1, 1, vec.size))

    diagnostics = []
    best = None
    for policy in candidate_policies(orbit):
        trial = replace(config, sign_policy=policy)
        diag = {"policy": policy, **_probe(probe_start, trial, probe_iters)}
        diagnostics.append(diag)
        ok = diag["status"] == SolveStatus.MAX_ITERS.value and diag["monotone"] and diag["ratio"] < 1
        if ok and (best is None or diag["ratio"] < 0.5 * best[1]["ratio"]):
            best = (trial, diag)
    if best is None:
        raise CalibrationError("no sign assignment shrinks the gradient", diagnostics)
    log.info("sign calibration picked %s", best[1])
    return best[0]


# -- continuation ----------------------------------------------------------

LEADING_PER_BLOCK = 3


def leading_keys(orbit: FourierOrbit, per_block: int = LEADING_PER_BLOCK) -> list[str]:
    """First few active harmonics of each populated block (figure-style summary)."""
    out = []
    for name, mask in orbit.masks().items():
        ks = np.flatnonzero(mask)[:per_block]
        out.extend(f"{name}{k}" for k in ks)
    return out


@dataclass
class FamilyRecord:
    axis: RotationAxis
    n_bodies: int
    entries: list[tuple[float, SolveOutcome]] = field(default_factory=list)
    boundary: float | None = None

    @property
    def omegas(self) -> list[float]:
        return [om for om, _ in self.entries]

    def converged(self) -> list[tuple[float, SolveOutcome]]:
        return [(om, out) for om, out in self.entries if out.converged]

    def leading_coefficients(self) -> tuple[list[str], np.ndarray]:
        conv = self.converged()
        if not conv:
            return [], np.zeros((0, 0))
        keys = leading_keys(conv[0][1].orbit)
        rows = [[om] + [out.orbit.coefficient(k) for k in keys] for om, out in conv]
        return keys, np.array(rows)

    def orbit_at(self, omega: float, atol: float = 1e-12) -> FourierOrbit:
        for om, out in self.entries:
            if abs(om - omega) <= atol and out.converged:
                return out.orbit
        raise SeedError(f"no converged orbit at omega={omega}")


def _dominant_c_sign(orbit: FourierOrbit) -> int:
    c = orbit.c
    if not np.any(c):
        return 0
    return int(np.sign(c[np.argmax(np.abs(c))]))


def _warm_start(prev: FourierOrbit, omega: float) -> FourierOrbit:
    # The Lagrange endpoint is a branch point: x == 0 is invariant under the
    # iteration, so stepping off it needs the chart's a(1) displacement.
    if prev.axis is RotationAxis.X and prev.omega == 1.0 and not np.any(prev.a) and omega < 1.0:
        from .perturbation import BETA_MAX, seed_orbit

        beta = 1.0 - omega
        if beta <= BETA_MAX:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return seed_orbit(beta, prev.n_bodies, prev.k_max)
    return prev.replace(omega=omega)


def continuation_sweep(axis: RotationAxis | str, n_bodies: int, omega_list: Sequence[float],
                       config: SolverConfig | None = None,
                       seed: FourierOrbit | None = None, k_max: int | None = None,
                       stop_on_failure: bool = True,
                       progress: Callable[[float, SolveOutcome], None] | None = None) -> FamilyRecord:
    """Solve along ``omega_list``, warm-starting each point from the previous one."""
    axis = RotationAxis.parse(axis)
    omegas = [float(om) for om in omega_list]
    if len(omegas) > 1:
        d = np.diff(omegas)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("omega_list must be strictly monotone")
    config = config or SolverConfig()
    if seed is None:
        seed = default_seed(axis, n_bodies, omegas[0], k_max)
    elif seed.axis is not axis or seed.n_bodies != n_bodies:
        raise SeedError("seed orbit does not match the sweep's axis or body count")
    if k_max is not None and seed.k_max != k_max:
        seed = seed.with_k_max(k_max)

    record = FamilyRecord(axis, n_bodies)
    current = seed.replace(omega=omegas[0])
    prev_sign = _dominant_c_sign(current)
    for om in omegas:
        start = current if om == current.omega else _warm_start(current, om)
        outcome = solve(start, om, config)
        record.entries.append((om, outcome))
        if progress is not None:
            progress(om, outcome)
        if not outcome.converged:
            if record.boundary is None:
                record.boundary = om
            if stop_on_failure:
                break
            continue
        sign = _dominant_c_sign(outcome.orbit)
        if prev_sign and sign and sign != prev_sign:
            raise BranchFlipError(f"dominant c coefficient changed sign at omega={om}")
        prev_sign = sign or prev_sign
        current = outcome.orbit
    return record


def default_seed(axis: RotationAxis | str, n_bodies: int, omega: float,
                 k_max: int | None = None) -> FourierOrbit:
    """Seed available without an orbit file: the Lagrange chart near omega = 1 on axis X."""
    from .perturbation import BETA_MAX, seed_orbit

    axis = RotationAxis.parse(axis)
    beta = 1.0 - omega
    if axis is RotationAxis.X and 0.0 <= beta <= BETA_MAX:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return seed_orbit(beta, n_bodies, k_max)
    raise SeedError(f"no built-in seed for axis {axis.value} at omega={omega}; supply an orbit")


def cold_start(axis: RotationAxis | str, omega: float, n_bodies: int = 3,
               k_max: int | None = None) -> FourierOrbit:
    """Two-term guess shaped like the planar eight, plus a small out-of-plane part."""
    axis = RotationAxis.parse(axis)
    orbit = FourierOrbit.from_coefficients(axis, omega, n_bodies, k_max,
                                           a={1: 1.0}, b={2: 0.35})
    k_c = {RotationAxis.X: 2, RotationAxis.Y: 1}.get(axis)
    if k_c is not None and omega > 0:
        orbit = orbit.replace(c=np.where(np.arange(orbit.k_max + 1) == k_c, 0.1 * omega, 0.0))
    return apply_momentum_mask(orbit)


def sweep_omegas(start: float, end: float, step: float) -> list[float]:
    """Inclusive grid from start to end; values rounded to kill float creep."""
    n = int(round(abs(end - start) / step))
    if n == 0 or not np.isclose(n * step, abs(end - start)):
        raise ValueError("step must divide the omega range")
    return [round(start + np.sign(end - start) * i * step, 12) for i in range(n + 1)]


def iterate_outcomes(record: FamilyRecord) -> Iterable[tuple[float, SolveOutcome]]:
    return iter(record.entries)
