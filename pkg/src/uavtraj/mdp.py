"""Episodic mission environment.

State per step: per-terminal wake flags, per-terminal served flags, the
UAV's 3-D position, and a scalar pheromone level that accrues with captures
and dissipates with time, hovering, and boundary violations. An action is a
(speed, pitch, heading) triple; each step spends a fixed flight slice plus
an optional hover to finish the slowest active transfer. The episode ends
when every terminal has been served once or the step budget runs out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from . import channel as chan
from .environment import UrbanMap
from .precoding import (
    DegenerateGeometryError,
    LinkBudget,
    per_user_snr,
    rates_and_hover,
    zf_precoder,
)
from .units import db_to_linear


@dataclass(frozen=True)
class MdpConfig:
    flight_time_s: float = 2.5
    max_speed: float = 20.0
    snr_threshold_db: float = 0.0
    capture_gain: float = 10.0      # pheromone credited per newly served terminal
    idle_loss: float = 2.0          # pheromone dissipated on a step with no service
    boundary_penalty: float = 20.0  # extra dissipation when a move is canceled
    max_steps: int = 200
    initial_pheromone: float = 0.0
    bandwidth_hz: float = 5.0e6
    file_size_bits: float = 20.0e6
    hover_cap_s: float = 1.0e3

    def __post_init__(self):
        for name in ("flight_time_s", "max_speed", "capture_gain", "idle_loss",
                     "boundary_penalty", "bandwidth_hz", "file_size_bits", "hover_cap_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class Action:
    speed: float
    pitch: float
    heading: float

    def validate(self, max_speed):
        if not 0.0 <= self.speed <= max_speed:
            raise ValueError(f"speed {self.speed} outside [0, {max_speed}]")
        if not 0.0 <= self.pitch <= math.pi:
            raise ValueError(f"pitch {self.pitch} outside [0, pi]")
        if not 0.0 < self.heading <= 2.0 * math.pi:
            raise ValueError(f"heading {self.heading} outside (0, 2*pi]")

    def as_array(self):
        return np.array([self.speed, self.pitch, self.heading], dtype=np.float64)


@dataclass
class MdpState:
    wake: np.ndarray      # current-step wake flags, before serve-once filtering
    served: np.ndarray    # monotone served flags
    position: np.ndarray
    pheromone: float

    def flatten(self):
        return np.concatenate([
            self.wake.astype(np.float64),
            self.served.astype(np.float64),
            np.asarray(self.position, dtype=np.float64),
            [self.pheromone],
        ])

    @property
    def num_gts(self):
        return len(self.served)


@dataclass
class StepOutcome:
    reward: float
    next_state: MdpState
    done: bool
    duration_s: float
    hover_s: float
    served_this_step: list
    violated: bool
    completed: bool


@dataclass
class StepRecord:
    n: int
    position: tuple
    action: tuple
    active: int
    hover_s: float
    pheromone: float
    reward: float
    total_served: int
    duration_s: float


def move(position, action: Action, flight_time_s, area_side, z_bounds):
    """Apply the spherical-coordinate displacement; cancel it if the
    destination leaves the flight box."""
    m = flight_time_s * action.speed
    delta = m * np.array([
        math.sin(action.pitch) * math.cos(action.heading),
        math.sin(action.pitch) * math.sin(action.heading),
        math.cos(action.pitch),
    ])
    new = np.asarray(position, dtype=np.float64) + delta
    violated = not (
        0.0 <= new[0] <= area_side
        and 0.0 <= new[1] <= area_side
        and z_bounds[0] <= new[2] <= z_bounds[1]
    )
    if violated:
        return np.asarray(position, dtype=np.float64).copy(), True
    return new, False


def _probe(position, urban_map, params, fading_seed, step_index):
    """Broadcast-stage wake probe for every terminal.

    Returns (snr, blocked, distances); composite gains match
    channel.broadcast_channel draw-for-draw.
    """
    gts = urban_map.gt_array
    k = gts.shape[0]
    uav = np.asarray(position, dtype=np.float64)
    starts = np.ascontiguousarray(np.broadcast_to(uav, (k, 3)))
    blocked = backend.ops.segments_blocked(starts, gts, urban_map.boxes)
    d = np.linalg.norm(gts - uav, axis=1)
    fspl = (
        20.0 * np.log10(d)
        + 20.0 * np.log10(params.carrier_hz)
        + 20.0 * np.log10(4.0 * np.pi / chan.SPEED_OF_LIGHT)
    )
    pl = fspl + np.where(blocked, params.eta_nlos_db, params.eta_los_db)
    phases = (gts[:, 0] - uav[0]) / d
    gain2 = np.empty(k)
    for i in range(k):
        rng = chan.fading_rng(fading_seed, step_index, chan.BROADCAST, i)
        g = chan.small_scale(phases[i], params, rng)[0]
        gain2[i] = 10.0 ** (-pl[i] / 10.0) * abs(g) ** 2
    snr = params.tx_power_mw * gain2 / params.noise_mw
    return snr, blocked, d


def wake_up(position, urban_map, params, threshold_db, fading_seed, step_index):
    """Wake flags: broadcast SNR at-or-above the linear threshold."""
    snr, _, _ = _probe(position, urban_map, params, fading_seed, step_index)
    return (snr >= db_to_linear(threshold_db)).astype(np.uint8)


def update_served(wake, served_prev):
    """Serve-once bookkeeping: fresh = wake on not-yet-served terminals."""
    wake = np.asarray(wake, dtype=np.uint8)
    served_prev = np.asarray(served_prev, dtype=np.uint8)
    fresh = (wake == 1) & (served_prev == 0)
    fresh = fresh.astype(np.uint8)
    served = np.minimum(served_prev + fresh, 1).astype(np.uint8)
    return fresh, served


def pheromone_update(previous, active_count, capture_gain, dissipation, boundary_penalty):
    """Affine pheromone bookkeeping for one step."""
    return previous + active_count * capture_gain - dissipation - boundary_penalty


def shaped_reward(pheromone, num_gts, capture_gain):
    """Logistic squash of the pheromone into (-1, 1), zero at zero."""
    scale = num_gts * capture_gain
    if scale <= 0:
        raise ValueError("num_gts * capture_gain must be positive")
    return 2.0 / (1.0 + math.exp(-pheromone / scale)) - 1.0


def mission_time(records):
    """Total elapsed mission time of a finished episode."""
    return float(sum(r.duration_s for r in records))


def _most_correlated_row(h):
    norms = np.linalg.norm(h, axis=1)
    hn = h / norms[:, None]
    coupling = np.abs(hn @ hn.conj().T)
    np.fill_diagonal(coupling, 0.0)
    return int(np.argmax(coupling.sum(axis=1)))


class Mission:
    """One mutable episode over an immutable map.

    Multiple Mission instances over the same UrbanMap may run concurrently;
    a single instance is strictly sequential.
    """

    def __init__(self, urban_map: UrbanMap, channel_params, config: MdpConfig,
                 max_steps=None):
        if len(urban_map.gts) < 1:
            raise ValueError("map carries no terminals; call place_gts first")
        self.urban_map = urban_map
        self.channel_params = channel_params
        self.config = config
        self.max_steps = int(max_steps if max_steps is not None else config.max_steps)
        self.num_gts = len(urban_map.gts)
        self.state = None
        self.records = []
        self._fading_seed = 0
        self._steps = 0
        self._threshold_linear = db_to_linear(config.snr_threshold_db)

    @property
    def state_dim(self):
        return 2 * self.num_gts + 4

    def reset(self, seed, position=None):
        self._fading_seed = int(seed)
        self._steps = 0
        self.records = []
        params = self.urban_map.params
        if position is None:
            rng = np.random.default_rng([int(seed), 0x9E55])
            d = params.area_side_m
            position = np.array([
                rng.uniform(0.0, d),
                rng.uniform(0.0, d),
                rng.uniform(params.z_bounds_m[0], params.z_bounds_m[1]),
            ])
        else:
            position = np.asarray(position, dtype=np.float64).copy()
        snr, _, _ = _probe(position, self.urban_map, self.channel_params,
                           self._fading_seed, 0)
        wake = (snr >= self._threshold_linear).astype(np.uint8)
        self.state = MdpState(
            wake=wake,
            served=np.zeros(self.num_gts, dtype=np.uint8),
            position=position,
            pheromone=float(self.config.initial_pheromone),
        )
        return self.state

    def _transmit(self, active, distances, blocked, step_index):
        """ZF link budget for the active set; ill-conditioned draws are
        retried once, then the most correlated users are deferred."""
        cfg = self.config
        params = self.channel_params
        active = list(active)
        for attempt in (0, 1):
            rows = []
            for k in active:
                rng = chan.fading_rng(self._fading_seed, step_index, chan.TRANSMIT,
                                      k, attempt=attempt)
                cv = chan.miso_channel(self.state.position, k, self.urban_map,
                                       params, rng, los=not blocked[k])
                rows.append(cv.gains)
            h = np.array(rows)
            try:
                w, xi = zf_precoder(h)
                break
            except DegenerateGeometryError:
                continue
        else:
            while len(active) > 1:
                drop = _most_correlated_row(h)
                del active[drop]
                h = np.delete(h, drop, axis=0)
                try:
                    w, xi = zf_precoder(h)
                    break
                except DegenerateGeometryError:
                    continue
            else:
                return [], None
        snr = per_user_snr(h, w, params.tx_power_mw, params.noise_mw)
        rates, hover = rates_and_hover(snr, cfg.bandwidth_hz, cfg.file_size_bits,
                                       cfg.hover_cap_s)
        return active, LinkBudget(h, w, xi, snr, rates, hover)

    def step(self, action: Action) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset before step")
        cfg = self.config
        action.validate(cfg.max_speed)
        n = self._steps
        params = self.urban_map.params
        position, violated = move(self.state.position, action, cfg.flight_time_s,
                                  params.area_side_m, params.z_bounds_m)
        step_index = n + 1  # fading-stream step key; reset used 0
        snr, blocked, distances = _probe(position, self.urban_map,
                                         self.channel_params, self._fading_seed,
                                         step_index)
        wake = (snr >= self._threshold_linear).astype(np.uint8)
        fresh, _ = update_served(wake, self.state.served)
        active = list(np.flatnonzero(fresh))
        n_t = self.channel_params.n_antennas
        if len(active) > n_t:
            # More candidates than antennas: serve the closest, defer the rest.
            order = np.argsort(distances[active], kind="stable")
            active = [active[i] for i in order[:n_t]]
        hover = 0.0
        budget = None
        if active:
            active, budget = self._transmit(active, distances, blocked, step_index)
            hover = budget.hover_time_s if budget is not None else 0.0
        served = self.state.served.copy()
        for k in active:
            served[k] = 1
        k_n = len(active)
        dissipation = hover if k_n > 0 else cfg.idle_loss
        penalty = cfg.boundary_penalty if violated else 0.0
        pheromone = pheromone_update(self.state.pheromone, k_n, cfg.capture_gain,
                                     dissipation, penalty)
        reward = shaped_reward(pheromone, self.num_gts, cfg.capture_gain)
        completed = int(served.sum()) == self.num_gts
        if completed:
            reward += float(self.max_steps - n)
        self._steps = n + 1
        done = completed or self._steps >= self.max_steps
        duration = cfg.flight_time_s + hover
        self.state = MdpState(wake=wake, served=served, position=position,
                              pheromone=pheromone)
        self.records.append(StepRecord(
            n=n,
            position=tuple(float(v) for v in position),
            action=(action.speed, action.pitch, action.heading),
            active=k_n,
            hover_s=hover,
            pheromone=pheromone,
            reward=reward,
            total_served=int(served.sum()),
            duration_s=duration,
        ))
        return StepOutcome(
            reward=reward,
            next_state=self.state,
            done=done,
            duration_s=duration,
            hover_s=hover,
            served_this_step=active,
            violated=violated,
            completed=completed,
        )

    @property
    def steps_taken(self):
        return self._steps

    @property
    def elapsed_s(self):
        return mission_time(self.records)

    @property
    def completed(self):
        return self.state is not None and int(self.state.served.sum()) == self.num_gts

    def write_trajectory(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([
                "n", "x", "y", "z", "speed", "pitch", "heading", "active",
                "hover_s", "pheromone", "reward", "served_total",
            ])
            for r in self.records:
                writer.writerow([
                    r.n,
                    repr(r.position[0]), repr(r.position[1]), repr(r.position[2]),
                    repr(r.action[0]), repr(r.action[1]), repr(r.action[2]),
                    r.active,
                    repr(r.hover_s), repr(r.pheromone), repr(r.reward),
                    r.total_served,
                ])
