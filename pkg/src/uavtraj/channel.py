"""Ground-to-air channel model.

Large-scale loss is free-space pathloss plus a LoS/NLoS excess decided by
exact geometry; small-scale fading is Rician around the array steering
vector of the direct path. Fading draws are keyed counter-mode streams, so
any draw is reproducible from (seed, step, stage, terminal) alone.
"""

from dataclasses import dataclass

import numpy as np

from .environment import UrbanMap, is_los
from .units import db_to_linear, dbm_to_milliwatts

SPEED_OF_LIGHT = 2.998e8  # m/s

# Stage tags for fading streams.
BROADCAST = 0
TRANSMIT = 1


@dataclass(frozen=True)
class ChannelParams:
    carrier_hz: float = 2.0e9
    eta_los_db: float = 0.1
    eta_nlos_db: float = 21.0
    rician_db: float = 15.0
    n_antennas: int = 12
    tx_power_dbm: float = 10.0
    noise_dbm: float = -75.0

    def __post_init__(self):
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.eta_los_db > self.eta_nlos_db:
            raise ValueError("eta_los_db must not exceed eta_nlos_db")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be at least 1")

    @property
    def rician_linear(self):
        return db_to_linear(self.rician_db)

    @property
    def tx_power_mw(self):
        return dbm_to_milliwatts(self.tx_power_dbm)

    @property
    def noise_mw(self):
        return dbm_to_milliwatts(self.noise_dbm)


@dataclass
class ChannelVector:
    gains: np.ndarray
    pathloss_db: float
    los: bool


def free_space_pathloss_db(distance_m, carrier_hz):
    """Friis loss 20 log10(d) + 20 log10(f) + 20 log10(4 pi / c), in dB."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return (
        20.0 * np.log10(distance_m)
        + 20.0 * np.log10(carrier_hz)
        + 20.0 * np.log10(4.0 * np.pi / SPEED_OF_LIGHT)
    )


def pathloss_db(uav_pos, gt_index, urban_map: UrbanMap, params: ChannelParams, los=None):
    """Large-scale loss and LoS flag for one terminal.

    los may be passed in when the caller already ran the geometry query for
    a whole batch of terminals.
    """
    uav = np.asarray(uav_pos, dtype=np.float64)
    gt = np.asarray(urban_map.gts[gt_index], dtype=np.float64)
    d = float(np.linalg.norm(uav - gt))
    if d <= 0.0:
        raise ValueError("UAV and terminal positions coincide")
    if los is None:
        los = is_los(uav, gt, urban_map)
    excess = params.eta_los_db if los else params.eta_nlos_db
    return free_space_pathloss_db(d, params.carrier_hz) + excess, bool(los)


def los_phase(uav_pos, gt_pos):
    """Direct-path phase parameter (x_gt - x_uav) / distance, in [-1, 1]."""
    uav = np.asarray(uav_pos, dtype=np.float64)
    gt = np.asarray(gt_pos, dtype=np.float64)
    d = float(np.linalg.norm(uav - gt))
    if d <= 0.0:
        raise ValueError("UAV and terminal positions coincide")
    return float((gt[0] - uav[0]) / d)


def steering_vector(phase, n_antennas):
    """ULA response [1, e^{j pi phase}, ..., e^{j pi (N-1) phase}]."""
    return np.exp(1j * np.pi * np.arange(n_antennas) * phase)


def small_scale(phase, params: ChannelParams, rng):
    """Rician draw: steering vector plus a scattered CN(0, I) component."""
    g = params.rician_linear
    direct = steering_vector(phase, params.n_antennas)
    n = params.n_antennas
    scattered = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return np.sqrt(g / (g + 1.0)) * direct + np.sqrt(1.0 / (g + 1.0)) * scattered


def fading_rng(seed, step, stage, gt_index, attempt=0):
    """Counter-mode stream keyed by (seed, stage) and (attempt, step, gt)."""
    counter = np.array([attempt, step, gt_index, 0], dtype=np.uint64)
    key = np.array([seed, stage], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def broadcast_channel(uav_pos, gt_index, urban_map, params, rng):
    """Single-antenna composite gain for the wake-up probe."""
    pl, _ = pathloss_db(uav_pos, gt_index, urban_map, params)
    phase = los_phase(uav_pos, urban_map.gts[gt_index])
    # Scalar fading is the reference-element entry of the array draw.
    g = small_scale(phase, params, rng)[0]
    return 10.0 ** (-pl / 20.0) * g


def miso_channel(uav_pos, gt_index, urban_map, params, rng, los=None):
    """Full array channel for the data-transmission stage."""
    pl, los_flag = pathloss_db(uav_pos, gt_index, urban_map, params, los=los)
    phase = los_phase(uav_pos, urban_map.gts[gt_index])
    g = small_scale(phase, params, rng)
    return ChannelVector(gains=10.0 ** (-pl / 20.0) * g, pathloss_db=pl, los=los_flag)


def snr_linear(gain_abs2, params: ChannelParams):
    """Receive SNR of a gain magnitude-squared under the configured budget."""
    return params.tx_power_mw * gain_abs2 / params.noise_mw
