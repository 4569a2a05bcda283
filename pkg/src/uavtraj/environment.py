"""Urban map synthesis and exact line-of-sight queries.

A map is a deterministic function of its parameters and a seed: a regular
grid of square building footprints realizes the configured built-area ratio
and building density exactly, heights follow a Rayleigh law with the
configured mean (then clipped), and ground terminals are rejection-sampled
outside every footprint. Buildings are opaque boxes; a link is line-of-sight
iff the open segment between the endpoints crosses no box interior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend


class MapGenerationError(ValueError):
    """Parameters cannot produce a valid map."""


@dataclass(frozen=True)
class EnvParams:
    """Statistical description of the urban area and the flight volume."""

    built_ratio: float = 0.3
    buildings_per_km2: float = 144.0
    mean_height_m: float = 50.0
    area_side_m: float = 1000.0
    height_clip_m: tuple = (10.0, 50.0)
    z_bounds_m: tuple = (75.0, 125.0)
    num_gts: int = 40

    def __post_init__(self):
        if not 0.0 < self.built_ratio < 1.0:
            raise ValueError("built_ratio must be in (0, 1)")
        if self.buildings_per_km2 <= 0:
            raise ValueError("buildings_per_km2 must be positive")
        if self.mean_height_m <= 0:
            raise ValueError("mean_height_m must be positive")
        if self.area_side_m <= 0:
            raise ValueError("area_side_m must be positive")
        if not self.height_clip_m[0] < self.height_clip_m[1]:
            raise ValueError("height_clip_m must be an increasing pair")
        if not self.z_bounds_m[0] < self.z_bounds_m[1]:
            raise ValueError("z_bounds_m must be an increasing pair")
        if self.num_gts < 1:
            raise ValueError("num_gts must be at least 1")
        object.__setattr__(self, "height_clip_m", tuple(float(v) for v in self.height_clip_m))
        object.__setattr__(self, "z_bounds_m", tuple(float(v) for v in self.z_bounds_m))

    def building_count(self):
        return int(round(self.buildings_per_km2 * (self.area_side_m / 1000.0) ** 2))

    def footprint_side_m(self):
        # Square footprints of this side at the configured density cover
        # exactly built_ratio of the ground.
        return 1000.0 * math.sqrt(self.built_ratio / self.buildings_per_km2)


@dataclass(frozen=True)
class Building:
    center: tuple
    half_extent: tuple
    height: float

    def box(self):
        cx, cy = self.center
        hx, hy = self.half_extent
        return (cx - hx, cx + hx, cy - hy, cy + hy, self.height)


@dataclass
class UrbanMap:
    """Immutable once built: buildings, terminal positions, and provenance."""

    params: EnvParams
    buildings: list
    gts: list = field(default_factory=list)
    seed: int = 0
    gt_seed: int | None = None

    def __post_init__(self):
        self._boxes = np.array(
            [b.box() for b in self.buildings], dtype=np.float64
        ).reshape(len(self.buildings), 5)

    @property
    def boxes(self):
        return self._boxes

    @property
    def gt_array(self):
        return np.array(self.gts, dtype=np.float64).reshape(len(self.gts), 3)

    def built_fraction(self):
        w = self._boxes[:, 1] - self._boxes[:, 0]
        h = self._boxes[:, 3] - self._boxes[:, 2]
        return float(np.sum(w * h)) / self.params.area_side_m**2

    def footprint_contains(self, x, y):
        return bool(
            backend.ops.points_in_footprints(
                np.array([[x, y]], dtype=np.float64), self._boxes
            )[0]
        )

    def save(self, path):
        payload = {
            "seed": self.seed,
            "gt_seed": self.gt_seed,
            "params": {
                "built_ratio": self.params.built_ratio,
                "buildings_per_km2": self.params.buildings_per_km2,
                "mean_height_m": self.params.mean_height_m,
                "area_side_m": self.params.area_side_m,
                "height_clip_m": list(self.params.height_clip_m),
                "z_bounds_m": list(self.params.z_bounds_m),
                "num_gts": self.params.num_gts,
            },
            "buildings": [
                {
                    "center": list(b.center),
                    "half_extent": list(b.half_extent),
                    "height": b.height,
                }
                for b in self.buildings
            ],
            "gts": [list(g) for g in self.gts],
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            payload = json.load(f)
        raw = dict(payload["params"])
        raw["height_clip_m"] = tuple(raw["height_clip_m"])
        raw["z_bounds_m"] = tuple(raw["z_bounds_m"])
        params = EnvParams(**raw)
        buildings = [
            Building(tuple(b["center"]), tuple(b["half_extent"]), b["height"])
            for b in payload["buildings"]
        ]
        gts = [tuple(g) for g in payload["gts"]]
        return cls(params, buildings, gts, payload["seed"], payload.get("gt_seed"))


def rayleigh_height_scale(mean_height):
    """Rayleigh scale parameter whose distribution mean equals mean_height."""
    return mean_height / math.sqrt(math.pi / 2.0)


def generate_buildings(params: EnvParams, seed: int) -> UrbanMap:
    """Lay out the building grid; deterministic in (params, seed)."""
    n = params.building_count()
    if n < 1:
        raise MapGenerationError("density and area give zero buildings")
    side = params.footprint_side_m()
    rows = math.ceil(math.sqrt(n))
    cols = math.ceil(n / rows)
    cell_w = params.area_side_m / cols
    cell_h = params.area_side_m / rows
    if side > min(cell_w, cell_h):
        raise MapGenerationError(
            f"footprint side {side:.1f} m exceeds grid cell "
            f"{min(cell_w, cell_h):.1f} m; built_ratio/density are inconsistent"
        )
    rng = np.random.default_rng(seed)
    heights = rng.rayleigh(scale=rayleigh_height_scale(params.mean_height_m), size=n)
    heights = np.clip(heights, params.height_clip_m[0], params.height_clip_m[1])
    # Uniform jitter inside each cell, constrained so the footprint stays in-cell.
    u = rng.random((n, 2))
    half = side / 2.0
    buildings = []
    for i in range(n):
        r, c = divmod(i, cols)
        cx = c * cell_w + half + u[i, 0] * (cell_w - side)
        cy = r * cell_h + half + u[i, 1] * (cell_h - side)
        buildings.append(Building((cx, cy), (half, half), float(heights[i])))
    return UrbanMap(params, buildings, [], seed=seed)


def place_gts(urban_map: UrbanMap, k: int, seed: int, max_tries: int = 10_000) -> UrbanMap:
    """Scatter k terminals uniformly, resampling any that land indoors."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    d = urban_map.params.area_side_m
    boxes = urban_map.boxes
    gts = []
    for _ in range(k):
        for _ in range(max_tries):
            x, y = rng.uniform(0.0, d, size=2)
            if not backend.ops.points_in_footprints(
                np.array([[x, y]], dtype=np.float64), boxes
            )[0]:
                gts.append((float(x), float(y), 0.0))
                break
        else:
            raise MapGenerationError(
                f"could not place a terminal outdoors in {max_tries} tries"
            )
    return UrbanMap(urban_map.params, urban_map.buildings, gts, urban_map.seed, gt_seed=seed)


def is_los(p_a, p_b, urban_map: UrbanMap) -> bool:
    """True iff the open segment between the points crosses no building box."""
    return not backend.ops.segment_blocked(
        np.asarray(p_a, dtype=np.float64),
        np.asarray(p_b, dtype=np.float64),
        urban_map.boxes,
    )
