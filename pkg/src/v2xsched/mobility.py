"""Gauss-Markov vehicle motion on a multi-lane bidirectional highway segment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LANE_WIDTH_M = 4.0

SPEED_MIN = 20.0  # m/s, hard clamp
SPEED_MAX = 45.0


@dataclass
class MobilityConfig:
    alpha: float = 0.95             # memory level
    sampling_period: float = 0.1    # s
    mean_speed: float = 32.5        # m/s
    speed_sigma: float = 0.5        # m/s, asymptotic std of the speed process
    heading_sigma: float = 0.5      # deg, asymptotic std of the heading perturbation
    speed_min: float = SPEED_MIN
    speed_max: float = SPEED_MAX
    segment_length: float = 10_000.0  # m
    density: float = 50.0           # vehicles / lane / km
    lanes_per_direction: int = 3
    boundary: str = "wrap"          # wrap | reflect

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.sampling_period <= 0:
            raise ValueError("sampling_period must be > 0")
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.boundary not in ("wrap", "reflect"):
            raise ValueError("boundary must be 'wrap' or 'reflect'")


@dataclass
class VehicleState:
    id: int
    lane: int          # 0..2*lanes_per_direction-1; lanes >= lanes_per_direction run opposite
    x: float           # m along the highway
    y: float           # m lateral (lane center)
    speed: float       # m/s
    heading: float     # deg, 0 or 180 plus perturbation
    t: int = 0         # us


def lane_y(lane: int, lanes_per_direction: int) -> float:
    """Lane center offset; forward lanes below the median, reverse above."""
    if lane < lanes_per_direction:
        return -(lanes_per_direction - lane - 0.5) * LANE_WIDTH_M
    return (lane - lanes_per_direction + 0.5) * LANE_WIDTH_M


def lane_direction(lane: int, lanes_per_direction: int) -> int:
    """+1 for increasing-x travel, -1 for the opposite carriageway."""
    return 1 if lane < lanes_per_direction else -1


def base_heading(lane: int, lanes_per_direction: int) -> float:
    return 0.0 if lane < lanes_per_direction else 180.0


def gauss_markov_step(value, mean, alpha, sigma, noise):
    """One recurrence step: alpha*value + (1-alpha)*mean + sqrt(1-alpha^2)*sigma*noise."""
    return alpha * value + (1.0 - alpha) * mean + math.sqrt(1.0 - alpha * alpha) * sigma * noise


def step(state: VehicleState, cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    """Advance one sampling period (scalar reference path; the engine uses step_all)."""
    dt = cfg.sampling_period
    speed = gauss_markov_step(state.speed, cfg.mean_speed, cfg.alpha,
                              cfg.speed_sigma, rng.standard_normal())
    speed = min(max(speed, cfg.speed_min), cfg.speed_max)
    hbase = base_heading(state.lane, cfg.lanes_per_direction)
    heading = gauss_markov_step(state.heading, hbase, cfg.alpha,
                                cfg.heading_sigma, rng.standard_normal())
    direction = lane_direction(state.lane, cfg.lanes_per_direction)
    x = state.x + direction * speed * dt
    L = cfg.segment_length
    if cfg.boundary == "wrap":
        x %= L
    else:
        if x < 0.0:
            x = -x
        elif x > L:
            x = 2.0 * L - x
    return VehicleState(
        id=state.id, lane=state.lane, x=x, y=state.y,
        speed=speed, heading=heading,
        t=state.t + round(dt * 1e6),
    )


def step_all(x, speed, heading, lane, cfg: MobilityConfig, rng: np.random.Generator):
    """Vectorized step over parallel arrays, matching step() draw-for-draw per vehicle.

    Draws one speed noise and one heading noise per vehicle, in vehicle order.
    Mutates and returns (x, speed, heading).
    """
    n = x.shape[0]
    noise = rng.standard_normal((n, 2))
    k = math.sqrt(1.0 - cfg.alpha * cfg.alpha)
    np.multiply(speed, cfg.alpha, out=speed)
    speed += (1.0 - cfg.alpha) * cfg.mean_speed + k * cfg.speed_sigma * noise[:, 0]
    np.clip(speed, cfg.speed_min, cfg.speed_max, out=speed)
    hbase = np.where(lane < cfg.lanes_per_direction, 0.0, 180.0)
    np.multiply(heading, cfg.alpha, out=heading)
    heading += (1.0 - cfg.alpha) * hbase + k * cfg.heading_sigma * noise[:, 1]
    direction = np.where(lane < cfg.lanes_per_direction, 1.0, -1.0)
    x += direction * speed * cfg.sampling_period
    L = cfg.segment_length
    if cfg.boundary == "wrap":
        np.mod(x, L, out=x)
    else:
        np.abs(x, out=x)
        over = x > L
        x[over] = 2.0 * L - x[over]
    return x, speed, heading


def spawn_scenario(cfg: MobilityConfig, rng: np.random.Generator,
                   speed_band: tuple[float, float] | None = None) -> list[VehicleState]:
    """Place density * length vehicles per lane uniformly at random along each lane."""
    lanes_total = 2 * cfg.lanes_per_direction
    per_lane = int(round(cfg.density * cfg.segment_length / 1000.0))
    lo, hi = speed_band if speed_band is not None else (cfg.speed_min, cfg.speed_max)
    vehicles = []
    node_id = 0
    for lane in range(lanes_total):
        xs = rng.uniform(0.0, cfg.segment_length, size=per_lane)
        speeds = rng.uniform(lo, hi, size=per_lane)
        y = lane_y(lane, cfg.lanes_per_direction)
        h = base_heading(lane, cfg.lanes_per_direction)
        for i in range(per_lane):
            vehicles.append(VehicleState(
                id=node_id, lane=lane, x=float(xs[i]), y=y,
                speed=float(speeds[i]), heading=h, t=0,
            ))
            node_id += 1
    return vehicles


def distance(a: VehicleState, b: VehicleState,
             segment_length: float | None = None, wrap: bool = False) -> float:
    """Euclidean distance in the highway plane; ring metric along x when wrapping."""
    dx = abs(a.x - b.x)
    if wrap and segment_length:
        dx = min(dx, segment_length - dx)
    return math.hypot(dx, a.y - b.y)


def ring_dx(x_from: np.ndarray | float, x_to: float, segment_length: float,
            wrap: bool = True):
    """Shortest longitudinal separation |x_from - x_to| on the segment."""
    dx = np.abs(x_from - x_to)
    if wrap:
        dx = np.minimum(dx, segment_length - dx)
    return dx
