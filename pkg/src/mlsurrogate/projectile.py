"""Projectile motion with drag: the built-in forward model.

The state is integrated with explicit forward Euler from launch until the
vertical position first reaches the ground.  The drag deceleration has the
magnitude ``rho * C_d * pi * r**2 * |v|**2 / (2 m)`` and, in the default
mode, acts along the negative horizontal axis only.  That is deliberately
non-physical but is the system under study; set ``physical_drag=True`` to
align the drag with the velocity instead.

The observable is the horizontal range: the horizontal position at the
landing time, located by linear interpolation of the vertical coordinate
between the last airborne step and the first step at or below the ground.

Gravity is fixed at 9.81 m/s^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sampling import derived_seed

__all__ = [
    "GRAVITY",
    "NOMINAL",
    "EPSILON",
    "ProjectileParameters",
    "ResolutionLadder",
    "ObservableSample",
    "Trajectory",
    "SimulationError",
    "LandingError",
    "perturb",
    "simulate",
    "observable",
    "evaluate_level",
    "evaluate_detail",
    "cost",
    "ProjectileModel",
    "estimate_convergence_order",
]

GRAVITY = 9.81

#: Nominal physical parameters: air density [kg/m^3], radius [m], drag
#: coefficient [-], mass [kg], launch height [m], launch angle [rad],
#: launch speed [m/s].
NOMINAL = (1.225, 0.23, 0.1, 0.145, 1.0, math.radians(30.0), 25.0)

#: Relative half-width of the multiplicative parameter perturbation.
EPSILON = 0.1

_MAX_STEPS = 10_000_000


class SimulationError(RuntimeError):
    """The trajectory failed to reach the ground within the step budget."""


class LandingError(ValueError):
    """A trajectory without a landing was passed where one is required."""


@dataclass(frozen=True)
class ProjectileParameters:
    rho: float
    radius: float
    drag_coefficient: float
    mass: float
    height: float
    angle: float
    speed: float
    gravity: float = GRAVITY

    def __post_init__(self) -> None:
        for name in ("rho", "radius", "mass", "speed"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        # Zero drag is admitted so the closed-form ballistic case stays
        # expressible; perturbed parameters are always strictly positive.
        if self.drag_coefficient < 0.0:
            raise ValueError("drag_coefficient must be >= 0")
        if self.height < 0.0:
            raise ValueError("height must be >= 0")
        if not 0.0 < self.angle < math.pi / 2:
            raise ValueError("angle must lie in (0, pi/2)")


@dataclass(frozen=True)
class ResolutionLadder:
    """Nested time steps ``delta_l = 2**(L-l) * delta_L`` for l = 0..L."""

    finest_level: int
    deltas: tuple[float, ...]
    cost_exponent: float = 1.0
    convergence_order: float | None = None

    @classmethod
    def from_coarsest(
        cls, coarsest_delta: float, finest_level: int, cost_exponent: float = 1.0
    ) -> "ResolutionLadder":
        if coarsest_delta <= 0.0:
            raise ValueError("coarsest_delta must be > 0")
        if finest_level < 0:
            raise ValueError("finest_level must be >= 0")
        deltas = tuple(coarsest_delta / 2.0**level for level in range(finest_level + 1))
        return cls(finest_level=finest_level, deltas=deltas, cost_exponent=cost_exponent)

    def __post_init__(self) -> None:
        if len(self.deltas) != self.finest_level + 1:
            raise ValueError("need one resolution per level")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ValueError("resolutions must be strictly decreasing")

    def delta(self, level: int) -> float:
        if not 0 <= level <= self.finest_level:
            raise ValueError(f"level {level} outside 0..{self.finest_level}")
        return self.deltas[level]

    def cost(self, level: int) -> float:
        """Work units for one forward solve: ``delta**(-cost_exponent)``."""
        return self.delta(level) ** (-self.cost_exponent)


@dataclass(frozen=True)
class ObservableSample:
    point: np.ndarray
    level: int
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("observable value must be finite")


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray  # (steps + 1, 2)
    velocities: np.ndarray  # (steps + 1, 2)
    dt: float


def perturb(
    y: np.ndarray | Sequence[float],
    epsilon: float = EPSILON,
    nominal: tuple[float, ...] = NOMINAL,
) -> ProjectileParameters:
    """Map a point of the unit 7-cube to physical parameters.

    Each parameter is its nominal value times ``1 + epsilon*(2*y_k - 1)``,
    so the cube midpoint reproduces the nominal configuration exactly.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (7,):
        raise ValueError(f"expected a parameter vector of dimension 7, got shape {y.shape}")
    factors = 1.0 + epsilon * (2.0 * y - 1.0)
    vals = [n * f for n, f in zip(nominal, factors)]
    return ProjectileParameters(
        rho=vals[0],
        radius=vals[1],
        drag_coefficient=vals[2],
        mass=vals[3],
        height=vals[4],
        angle=vals[5],
        speed=vals[6],
    )


def simulate(
    params: ProjectileParameters,
    dt: float,
    physical_drag: bool = False,
    max_steps: int = _MAX_STEPS,
) -> Trajectory:
    """Forward-Euler integration from launch until the first step with y <= 0.

    Position and velocity are both advanced from the previous state
    (explicit update).  Raises :class:`SimulationError` if the ground is not
    reached within ``max_steps``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    # radius*radius (not **2): numpy's vectorized power may differ by one ulp
    # from the scalar path, which would break batch/scalar agreement.
    c = 0.5 * params.rho * params.drag_coefficient * math.pi * (params.radius * params.radius) / params.mass
    g = params.gravity
    x, yv = 0.0, params.height
    vx = params.speed * math.cos(params.angle)
    vy = params.speed * math.sin(params.angle)
    positions = [(x, yv)]
    velocities = [(vx, vy)]
    for _ in range(max_steps):
        speed2 = vx * vx + vy * vy
        if physical_drag:
            speed = math.sqrt(speed2)
            ax = -c * speed * vx
            ay = -g - c * speed * vy
        else:
            ax = -c * speed2
            ay = -g
        x_new = x + dt * vx
        y_new = yv + dt * vy
        vx_new = vx + dt * ax
        vy_new = vy + dt * ay
        positions.append((x_new, y_new))
        velocities.append((vx_new, vy_new))
        x, yv, vx, vy = x_new, y_new, vx_new, vy_new
        if y_new <= 0.0:
            return Trajectory(
                positions=np.array(positions), velocities=np.array(velocities), dt=dt
            )
    raise SimulationError(f"no landing within {max_steps} steps at dt={dt}")


def observable(trajectory: Trajectory) -> float:
    """Horizontal range: x at the linearly interpolated landing time."""
    pos = trajectory.positions
    if pos[-1, 1] > 0.0:
        raise LandingError("trajectory does not reach the ground")
    x0, y0 = pos[-2]
    x1, y1 = pos[-1]
    if y1 == 0.0:
        return float(x1)
    return float(x0 + (x1 - x0) * (y0 / (y0 - y1)))


def _range_batch(
    y: np.ndarray,
    dt: float,
    epsilon: float,
    nominal: tuple[float, ...],
    physical_drag: bool,
    max_steps: int = _MAX_STEPS,
) -> np.ndarray:
    """Vectorized horizontal range for a batch of cube points.

    Performs per-sample arithmetic identical to the scalar path, so results
    agree bit-for-bit with ``observable(simulate(perturb(y), dt))``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 7:
        raise ValueError(f"expected points of shape (n, 7), got {y.shape}")
    n = y.shape[0]
    factors = 1.0 + epsilon * (2.0 * y - 1.0)
    phys = np.array(nominal) * factors
    rho, radius, cd, mass, h, alpha, v0 = (phys[:, j] for j in range(7))
    c = 0.5 * rho * cd * np.pi * (radius * radius) / mass
    g = GRAVITY

    out = np.empty(n)
    idx = np.arange(n)
    x = np.zeros(n)
    yv = h.copy()
    vx = v0 * np.cos(alpha)
    vy = v0 * np.sin(alpha)
    if idx.size == 0:
        return out
    for _ in range(max_steps):
        speed2 = vx * vx + vy * vy
        if physical_drag:
            speed = np.sqrt(speed2)
            ax = -c * speed * vx
            ay = -g - c * speed * vy
        else:
            ax = -c * speed2
            ay = -g
        x_new = x + dt * vx
        y_new = yv + dt * vy
        vx = vx + dt * ax
        vy = vy + dt * ay
        landed = y_new <= 0.0
        if landed.any():
            x0 = x[landed]
            x1 = x_new[landed]
            y0 = yv[landed]
            y1 = y_new[landed]
            with np.errstate(invalid="ignore", divide="ignore"):
                hit = np.where(y1 == 0.0, x1, x0 + (x1 - x0) * (y0 / (y0 - y1)))
            out[idx[landed]] = hit
            keep = ~landed
            if not keep.any():
                return out
            idx = idx[keep]
            x, yv = x_new[keep], y_new[keep]
            vx, vy = vx[keep], vy[keep]
            c = c[keep]
        else:
            x, yv = x_new, y_new
    raise SimulationError(f"no landing within {max_steps} steps at dt={dt}")


def evaluate_level(
    y: np.ndarray | Sequence[float],
    level: int,
    ladder: ResolutionLadder,
    epsilon: float = EPSILON,
    nominal: tuple[float, ...] = NOMINAL,
    physical_drag: bool = False,
) -> ObservableSample:
    """Observable at one ladder resolution; deterministic in all inputs."""
    y = np.asarray(y, dtype=float)
    value = _range_batch(y[None, :], ladder.delta(level), epsilon, nominal, physical_drag)[0]
    return ObservableSample(point=y, level=level, value=float(value))


def evaluate_detail(
    y: np.ndarray | Sequence[float],
    k: int,
    sequence_indices: Sequence[int],
    ladder: ResolutionLadder,
    epsilon: float = EPSILON,
    nominal: tuple[float, ...] = NOMINAL,
    physical_drag: bool = False,
) -> float:
    """Difference of the observable at two successive sequence levels."""
    if not 1 <= k <= len(sequence_indices) - 1:
        raise ValueError(f"detail index {k} outside 1..{len(sequence_indices) - 1}")
    fine = sequence_indices[k]
    coarse = sequence_indices[k - 1]
    if fine == coarse:
        raise ValueError("detail levels must differ")
    hi = evaluate_level(y, fine, ladder, epsilon, nominal, physical_drag)
    lo = evaluate_level(y, coarse, ladder, epsilon, nominal, physical_drag)
    return hi.value - lo.value


def cost(level: int, ladder: ResolutionLadder) -> float:
    return ladder.cost(level)


@dataclass(frozen=True)
class ProjectileModel:
    """Forward model bound to a resolution ladder and perturbation width."""

    ladder: ResolutionLadder
    epsilon: float = EPSILON
    nominal: tuple[float, ...] = NOMINAL
    physical_drag: bool = False
    dimension: int = field(default=7, init=False)

    def level_values(self, points: np.ndarray, level: int) -> np.ndarray:
        return _range_batch(
            points, self.ladder.delta(level), self.epsilon, self.nominal, self.physical_drag
        )

    def values_at_dt(self, points: np.ndarray, dt: float) -> np.ndarray:
        """Observable at an arbitrary time step (reference computations)."""
        return _range_batch(points, dt, self.epsilon, self.nominal, self.physical_drag)

    def detail_values(self, points: np.ndarray, coarse: int, fine: int) -> np.ndarray:
        if fine <= coarse:
            raise ValueError(f"need coarse < fine, got ({coarse}, {fine})")
        return self.level_values(points, fine) - self.level_values(points, coarse)

    def cost(self, level: int) -> float:
        return self.ladder.cost(level)

    def detail_cost(self, coarse: int, fine: int) -> float:
        return self.ladder.cost(fine) + self.ladder.cost(coarse)


def estimate_convergence_order(
    model: ProjectileModel,
    n_points: int = 200,
    seed: int = 0,
    levels: Sequence[int] = (4, 5, 6),
    reference_refinement: int = 8,
) -> float:
    """Empirical order of the range in the time step.

    Mean absolute deviations from a reference at ``delta(max level) /
    reference_refinement`` are regressed against the step sizes on log-log
    axes; the slope estimates the order.
    """
    rng = np.random.default_rng(derived_seed(seed, 0xEC0))
    pts = rng.random((n_points, 7))
    ref_dt = model.ladder.delta(max(levels)) / reference_refinement
    ref = model.values_at_dt(pts, ref_dt)
    errs = []
    dts = []
    for level in levels:
        vals = model.level_values(pts, level)
        errs.append(np.mean(np.abs(vals - ref)))
        dts.append(model.ladder.delta(level))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    return float(slope)
