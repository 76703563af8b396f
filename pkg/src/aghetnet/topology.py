"""Node geometry: Poisson-scattered terrestrial nodes and users, hexagonal UABS grids."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class Role(str, enum.Enum):
    MBS = "MBS"
    PBS = "PBS"
    UABS = "UABS"
    GUE = "GUE"
    AUE = "AUE"

    @property
    def is_ue(self) -> bool:
        return self in (Role.GUE, Role.AUE)


@dataclass(frozen=True)
class Region:
    width_m: float = 10_000.0
    height_m: float = 10_000.0

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0):
            raise ValueError(f"region sides must be positive, got {self.width_m} x {self.height_m}")

    @property
    def area_m2(self) -> float:
        return self.width_m * self.height_m

    @property
    def area_km2(self) -> float:
        return self.area_m2 / 1e6

    @property
    def center(self) -> tuple[float, float]:
        return self.width_m / 2.0, self.height_m / 2.0

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(xy)
        return (
            (xy[:, 0] >= 0.0) & (xy[:, 0] <= self.width_m)
            & (xy[:, 1] >= 0.0) & (xy[:, 1] <= self.height_m)
        )


@dataclass
class NodeSet:
    """One tier of nodes. ``positions`` is an (n, 3) array of x, y, z in meters."""

    role: Role
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    tx_power_dbm: float | None = None

    def __post_init__(self):
        self.role = Role(self.role)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.role.is_ue:
            self.tx_power_dbm = None

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def xy(self) -> np.ndarray:
        return self.positions[:, :2]

    @property
    def z(self) -> np.ndarray:
        return self.positions[:, 2]

    def with_height(self, height_m: float) -> "NodeSet":
        pos = self.positions.copy()
        pos[:, 2] = height_m
        return NodeSet(self.role, pos, self.tx_power_dbm)

    def with_power(self, tx_power_dbm: float) -> "NodeSet":
        return NodeSet(self.role, self.positions.copy(), tx_power_dbm)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeSet):
            return NotImplemented
        return (
            self.role == other.role
            and self.tx_power_dbm == other.tx_power_dbm
            and self.positions.shape == other.positions.shape
            and np.array_equal(self.positions, other.positions)
        )


def sample_ppp(density_per_km2: float, region: Region, height_m: float, role, rng_seed=None,
               tx_power_dbm: float | None = None) -> NodeSet:
    """Homogeneous 2D Poisson point process over ``region`` at a fixed antenna height.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if density_per_km2 < 0:
        raise ValueError(f"density must be non-negative, got {density_per_km2}")
    if height_m <= 0:
        raise ValueError(f"height must be positive, got {height_m}")
    rng = np.random.default_rng(rng_seed)
    n = rng.poisson(density_per_km2 * region.area_km2)
    pos = np.empty((n, 3))
    pos[:, 0] = rng.uniform(0.0, region.width_m, n)
    pos[:, 1] = rng.uniform(0.0, region.height_m, n)
    pos[:, 2] = height_m
    return NodeSet(role, pos, tx_power_dbm)


def hex_pitch(count: int, region: Region) -> float:
    """Lattice pitch at which ``count`` hexagonal cells tile the region area."""
    return math.sqrt(2.0 * region.area_m2 / (math.sqrt(3.0) * count))


def _lattice_inside(pitch: float, region: Region) -> np.ndarray:
    cx, cy = region.center
    row_h = pitch * math.sqrt(3.0) / 2.0
    n_rows = int(math.ceil(region.height_m / row_h)) + 2
    n_cols = int(math.ceil(region.width_m / pitch)) + 2
    rows = np.arange(-n_rows, n_rows + 1)
    cols = np.arange(-n_cols, n_cols + 1)
    r, c = np.meshgrid(rows, cols, indexing="ij")
    x = cx + (c + 0.5 * (r % 2)) * pitch
    y = cy + r * row_h
    pts = np.column_stack([x.ravel(), y.ravel()])
    return pts[region.contains(pts)]


def hex_grid(count: int, region: Region, height_m: float, tx_power_dbm: float | None = None) -> NodeSet:
    """``count`` points of a hexagonal lattice centred in the region.

    Rows are offset by half a pitch. If the clipped lattice holds fewer than
    ``count`` points the pitch is shrunk until it fits; surplus lattice points
    farthest from the centre are dropped.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return NodeSet(Role.UABS, np.zeros((0, 3)), tx_power_dbm)
    pitch = hex_pitch(count, region)
    pts = _lattice_inside(pitch, region)
    while len(pts) < count:
        pitch *= 0.98
        pts = _lattice_inside(pitch, region)
    cx, cy = region.center
    d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    # lexsort on (y, x, d) keeps the choice deterministic among equidistant points
    order = np.lexsort((pts[:, 0], pts[:, 1], np.round(d, 6)))
    chosen = pts[order[:count]]
    pos = np.column_stack([chosen, np.full(count, float(height_m))])
    return NodeSet(Role.UABS, pos, tx_power_dbm)


def distance(ue_pos, node_pos) -> tuple[np.ndarray, np.ndarray]:
    """2D and 3D Euclidean distances; broadcasts over leading axes."""
    ue = np.asarray(ue_pos, dtype=float)
    node = np.asarray(node_pos, dtype=float)
    delta = ue - node
    d2 = np.hypot(delta[..., 0], delta[..., 1])
    d3 = np.hypot(d2, delta[..., 2])
    return d2, d3


def pairwise_distance(ue_positions: np.ndarray, node_positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(n_ue, n_node) matrices of 2D and 3D distance."""
    return distance(ue_positions[:, None, :], node_positions[None, :, :])


CSV_COLUMNS = ("role", "x_m", "y_m", "z_m", "tx_power_dbm")


def write_nodes_csv(node_sets, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for ns in node_sets:
            p = "" if ns.tx_power_dbm is None else repr(float(ns.tx_power_dbm))
            for x, y, z in ns.positions:
                w.writerow([ns.role.value, repr(float(x)), repr(float(y)), repr(float(z)), p])


def read_nodes_csv(path) -> dict[Role, NodeSet]:
    rows: dict[Role, list] = {}
    power: dict[Role, float | None] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected node CSV header {reader.fieldnames}")
        for rec in reader:
            role = Role(rec["role"])
            rows.setdefault(role, []).append((float(rec["x_m"]), float(rec["y_m"]), float(rec["z_m"])))
            p = rec["tx_power_dbm"]
            power[role] = float(p) if p else None
    return {r: NodeSet(r, np.array(v), power[r]) for r, v in rows.items()}
