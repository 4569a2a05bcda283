import numpy as np
import pytest

from uavtraj.channel import ChannelParams
from uavtraj.environment import EnvParams, generate_buildings, place_gts
from uavtraj.mdp import MdpConfig


@pytest.fixture(scope="session")
def full_map():
    """Reference-scale map: 1 km^2, 144 buildings, 40 terminals."""
    umap = generate_buildings(EnvParams(), seed=1234)
    return place_gts(umap, 40, seed=5678)


@pytest.fixture(scope="session")
def small_map():
    """Reduced map: 400 m side, 23 buildings, 5 terminals."""
    params = EnvParams(area_side_m=400.0, num_gts=5)
    umap = generate_buildings(params, seed=97)
    return place_gts(umap, 5, seed=31)


@pytest.fixture(scope="session")
def open_map():
    """Essentially building-free map (vanishing footprints)."""
    params = EnvParams(built_ratio=1e-9, num_gts=3)
    umap = generate_buildings(params, seed=11)
    return place_gts(umap, 3, seed=12)


@pytest.fixture()
def channel_params():
    return ChannelParams()


@pytest.fixture()
def mdp_config():
    return MdpConfig()


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / denom
