"""Non-learning comparison strategies.

Both baselines act only through the mission environment's action interface:
they know the terminal coordinates (as the reference strategies do) but get
service, hovering, and timing from the exact same episode mechanics as the
learned policy.

* Scan: a boustrophedon strip sweep of the whole area at fixed altitude,
  from the lower-left corner to the upper-left corner.
* ACO: an ant-colony route over the terminals from the episode's start
  point, flown at fixed altitude and full speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, ChannelParams
from .environment import UrbanMap
from .mdp import Action, MdpConfig, Mission


@dataclass(frozen=True)
class ScanConfig:
    spacing_m: float | None = None   # None: widest strip that stays in coverage
    altitude_m: float | None = None  # None: bottom of the flight band
    speed: float | None = None       # None: maximum cruising speed
    coverage_margin_db: float = 3.0  # fading headroom for the auto spacing

    def __post_init__(self):
        if self.spacing_m is not None and self.spacing_m <= 0:
            raise ValueError("spacing_m must be positive")


@dataclass(frozen=True)
class AcoConfig:
    n_ants: int = 30
    n_iterations: int = 200
    trail_weight: float = 1.0
    heuristic_weight: float = 3.0
    evaporation: float = 0.5
    initial_trail: float = 1.0
    altitude_m: float | None = None
    speed: float | None = None

    def __post_init__(self):
        if not 0.0 < self.evaporation < 1.0:
            raise ValueError("evaporation must be in (0, 1)")
        if self.trail_weight < 0 or self.heuristic_weight < 0:
            raise ValueError("weights must be non-negative")


@dataclass
class RolloutSummary:
    strategy: str
    mission_time_s: float
    steps: int
    served: int
    completed: bool


# Waypoints sitting exactly on a flight-box face get canceled by float drift
# in the move kinematics (sin(pi) is ~1e-16, not 0); plan a hair inside.
_EDGE_INSET = 1e-3


def coverage_radius(channel_params: ChannelParams, snr_threshold_db, altitude_m,
                    margin_db=3.0):
    """Horizontal wake-up reach under line of sight at the given altitude.

    Solves the broadcast budget for the slant range where SNR (with unit
    fading gain) still clears the threshold plus a fading margin.
    """
    budget_db = (channel_params.tx_power_dbm - channel_params.noise_dbm
                 - snr_threshold_db - margin_db - channel_params.eta_los_db)
    # FSPL(d) <= budget  =>  20 log10(d) <= budget - frequency terms
    log_d = (budget_db
             - 20.0 * math.log10(channel_params.carrier_hz)
             - 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)) / 20.0
    slant = 10.0 ** log_d
    if slant <= altitude_m:
        raise ValueError(
            f"no horizontal coverage at altitude {altitude_m} m "
            f"(max slant range {slant:.1f} m)")
    return math.sqrt(slant**2 - altitude_m**2)


def scan_waypoints(area_side, spacing, altitude):
    """Vertical boustrophedon strips, lower-left start, upper-left finish."""
    n_strips = max(1, math.ceil(area_side / spacing))
    lo, hi = _EDGE_INSET, area_side - _EDGE_INSET
    points = [(0.0, 0.0, altitude)]
    up = True
    for i in range(n_strips):
        x = min((i + 0.5) * spacing, hi)
        y_from, y_to = (lo, hi) if up else (hi, lo)
        points.append((x, y_from, altitude))
        points.append((x, y_to, altitude))
        up = not up
    points.append((lo, hi, altitude))
    return points


def waypoint_actions(start, waypoints, mdp_config: MdpConfig, speed=None,
                     tolerance=1e-6):
    """Open-loop action list that follows the waypoints exactly.

    Pure geometry: the flight model is deterministic, so the action list can
    be built without touching an environment instance.
    """
    v_max = speed if speed is not None else mdp_config.max_speed
    v_max = min(v_max, mdp_config.max_speed)
    dt = mdp_config.flight_time_s
    pos = np.asarray(start, dtype=np.float64).copy()
    actions = []
    for wp in waypoints:
        target = np.asarray(wp, dtype=np.float64)
        while True:
            delta = target - pos
            dist = float(np.linalg.norm(delta))
            if dist <= tolerance:
                break
            v = min(v_max, dist / dt)
            step = dt * v
            pitch = math.acos(max(-1.0, min(1.0, delta[2] / dist)))
            heading = math.atan2(delta[1], delta[0]) % (2.0 * math.pi)
            if heading == 0.0:
                heading = 2.0 * math.pi
            actions.append(Action(v, pitch, heading))
            pos += step * delta / dist
    return actions


def run_actions(urban_map: UrbanMap, channel_params, mdp_config, actions, seed,
                strategy, start=None):
    """Execute a fixed action list in a fresh episode; stops when done."""
    env = Mission(urban_map, channel_params, mdp_config,
                  max_steps=max(len(actions), 1))
    env.reset(seed, position=start)
    for action in actions:
        outcome = env.step(action)
        if outcome.done:
            break
    return env, RolloutSummary(
        strategy=strategy,
        mission_time_s=env.elapsed_s,
        steps=env.steps_taken,
        served=int(env.state.served.sum()),
        completed=env.completed,
    )


def _cruise_altitude(requested, z_bounds):
    altitude = requested if requested is not None else z_bounds[0]
    return min(max(altitude, z_bounds[0] + _EDGE_INSET), z_bounds[1] - _EDGE_INSET)


def scan_trajectory(urban_map, channel_params, mdp_config, scan_config: ScanConfig,
                    seed):
    """Sweep the whole area; returns (actions, env, summary)."""
    params = urban_map.params
    altitude = _cruise_altitude(scan_config.altitude_m, params.z_bounds_m)
    spacing = scan_config.spacing_m
    if spacing is None:
        spacing = 2.0 * coverage_radius(channel_params, mdp_config.snr_threshold_db,
                                        altitude, scan_config.coverage_margin_db)
        spacing = min(spacing, params.area_side_m)
    start = (0.0, 0.0, altitude)
    waypoints = scan_waypoints(params.area_side_m, spacing, altitude)[1:]
    actions = waypoint_actions(start, waypoints, mdp_config, scan_config.speed)
    env, summary = run_actions(urban_map, channel_params, mdp_config, actions,
                               seed, "scan", start=start)
    return actions, env, summary


def route_length(points, start, order):
    """Open-tour length from start through the points in the given order."""
    total = 0.0
    prev = np.asarray(start, dtype=np.float64)
    for idx in order:
        nxt = np.asarray(points[idx], dtype=np.float64)
        total += float(np.linalg.norm(nxt - prev))
        prev = nxt
    return total


def aco_route(gt_positions, start, config: AcoConfig, rng):
    """Ant-colony open tour from start visiting every terminal once.

    Returns (best order, best length, per-iteration best lengths).
    """
    points = np.asarray(gt_positions, dtype=np.float64)[:, :2]
    k = len(points)
    if k < 1:
        raise ValueError("need at least one terminal")
    if k == 1:
        return [0], route_length(points, np.asarray(start)[:2], [0]), []
    nodes = np.vstack([points, np.asarray(start, dtype=np.float64)[:2][None]])
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    heuristic = 1.0 / dist
    trails = np.full((k + 1, k + 1), float(config.initial_trail))
    start_node = k
    best_order = None
    best_length = math.inf
    history = []
    for _ in range(config.n_iterations):
        weight = (trails**config.trail_weight) * (heuristic**config.heuristic_weight)
        wlist = weight.tolist()
        tours = []
        for _ant in range(config.n_ants):
            current = start_node
            remaining = list(range(k))
            order = []
            length = 0.0
            while remaining:
                row = wlist[current]
                probs = [row[j] for j in remaining]
                total = sum(probs)
                target = rng.random() * total
                acc = 0.0
                pick = len(remaining) - 1
                for i, p in enumerate(probs):
                    acc += p
                    if target <= acc:
                        pick = i
                        break
                nxt = remaining.pop(pick)
                length += dist[current, nxt]
                order.append(nxt)
                current = nxt
            tours.append((length, order))
            if length < best_length:
                best_length = length
                best_order = order
        trails *= 1.0 - config.evaporation
        for length, order in tours:
            deposit = 1.0 / length
            prev = start_node
            for nxt in order:
                trails[prev, nxt] += deposit
                trails[nxt, prev] += deposit
                prev = nxt
        history.append(best_length)
    return best_order, best_length, history


def aco_fly(route, urban_map, channel_params, mdp_config, aco_config: AcoConfig,
            seed, start):
    """Fly the planned route at fixed altitude; terminals encountered on the
    way keep their served flags (serve-once bookkeeping applies)."""
    params = urban_map.params
    altitude = _cruise_altitude(aco_config.altitude_m, params.z_bounds_m)
    gts = urban_map.gt_array
    waypoints = [(float(gts[i, 0]), float(gts[i, 1]), altitude) for i in route]
    actions = waypoint_actions(start, waypoints, mdp_config, aco_config.speed)
    return run_actions(urban_map, channel_params, mdp_config, actions, seed,
                       "aco", start=start)


def aco_episode(urban_map, channel_params, mdp_config, aco_config, seed,
                route_rng):
    """Plan and fly one ACO realization from the episode's random start."""
    probe = Mission(urban_map, channel_params, mdp_config)
    state = probe.reset(seed)
    start_xy = state.position[:2]
    params = urban_map.params
    altitude = _cruise_altitude(aco_config.altitude_m, params.z_bounds_m)
    start = (float(start_xy[0]), float(start_xy[1]), altitude)
    route, _, _ = aco_route(urban_map.gt_array, start_xy, aco_config, route_rng)
    return aco_fly(route, urban_map, channel_params, mdp_config, aco_config,
                   seed, start)
