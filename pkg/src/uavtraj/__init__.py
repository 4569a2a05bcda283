"""Desk-scale lab for 3D UAV trajectory design in a multi-user MISO downlink.

Pieces: statistical urban maps with exact line-of-sight queries, a Rician
ground-to-air channel, zero-forcing link budgets, a pheromone-shaped mission
environment, a from-scratch actor-critic trainer, and scan/ant-colony
routing baselines, all driven from one seeded configuration.
"""

from . import backend
from .baselines import AcoConfig, ScanConfig
from .channel import ChannelParams, ChannelVector
from .config import RunConfig, load_config, save_config
from .ddpg import DdpgAgent, ReplayBuffer, ScaleSpec, TrainConfig, Transition
from .environment import Building, EnvParams, UrbanMap, generate_buildings, is_los, place_gts
from .mdp import Action, MdpConfig, MdpState, Mission, StepOutcome
from .neuralnet import Adam, Mlp, soft_update
from .precoding import LinkBudget, per_user_snr, rates_and_hover, zf_precoder

__version__ = "0.1.0"

__all__ = [
    "AcoConfig",
    "Action",
    "Adam",
    "Building",
    "ChannelParams",
    "ChannelVector",
    "DdpgAgent",
    "EnvParams",
    "LinkBudget",
    "MdpConfig",
    "MdpState",
    "Mission",
    "Mlp",
    "ReplayBuffer",
    "RunConfig",
    "ScaleSpec",
    "ScanConfig",
    "StepOutcome",
    "TrainConfig",
    "Transition",
    "UrbanMap",
    "backend",
    "generate_buildings",
    "is_los",
    "load_config",
    "per_user_snr",
    "place_gts",
    "rates_and_hover",
    "save_config",
    "soft_update",
    "zf_precoder",
    "__version__",
]
