"""Field geometry, node deployment, and topology queries.

All protocols share the same picture of the network: N stationary nodes
uniformly scattered over an M x M square field, reporting to a single
base station. The base station is a distinguished endpoint, not a node;
it is never charged energy and is addressed by the sentinel ``BS``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .radio import RadioParams

# Sentinel parent id for the base station (never a valid node id).
BS = -1


class ConfigurationError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


class EmptyNetworkError(RuntimeError):
    pass


class Role(Enum):
    REGULAR = "regular"
    CH = "ch"
    SCH = "sch"


@dataclass
class Position:
    x: float
    y: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def distance(a: Position, b: Position) -> float:
    """Euclidean distance between two positions."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass
class NodeState:
    id: int
    pos: Position
    e_res: float
    e_max: float
    role: Role = Role.REGULAR
    layer: int = 1
    parent: Optional[int] = None
    backup: Optional[int] = None
    alive: bool = True


@dataclass
class ScenarioConfig:
    """Scenario parameters: field, energy budget, radio, frame sizes.

    Ranges are in meters, energies in joules, frames in bits. ``r_s`` is
    an optional explicit super-cluster range used only by the analysis
    calculators and the config validator; the hierarchy builder derives
    per-layer ranges from ``r_c``.
    """

    n_nodes: int
    field_size_m: float
    bs_position: Position
    radio: RadioParams
    r_c: float = 50.0
    r_t: float = 300.0
    initial_energy: float = 8.0
    data_frame_bits: int = 4000
    control_frame_bits: int = 200
    frames_per_round: int = 10
    seed: int = 0
    r_s: Optional[float] = None
    invert_centrality: bool = False
    name: str = ""

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise ConfigurationError("n_nodes must be >= 1")
        if self.field_size_m <= 0:
            raise ConfigurationError("field_size_m must be positive")
        if self.r_c <= 0:
            raise ConfigurationError("r_c must be positive")
        if self.r_t <= self.r_c:
            raise ConfigurationError("r_t must exceed r_c")
        if self.data_frame_bits <= 0:
            raise ConfigurationError("data_frame_bits must be positive")
        if self.control_frame_bits <= 0:
            raise ConfigurationError("control_frame_bits must be positive")
        if self.frames_per_round < 0:
            raise ConfigurationError("frames_per_round must be >= 0")
        if self.initial_energy < 0:
            raise ConfigurationError("initial_energy must be >= 0")
        if self.r_s is not None:
            if not (self.r_c <= self.r_s < 6.0 * self.r_c):
                raise ConfigurationError(
                    f"r_s={self.r_s} outside connectivity bound "
                    f"[r_c, 6*r_c) = [{self.r_c}, {6.0 * self.r_c})"
                )
            if self.r_s > self.r_t:
                raise ConfigurationError("r_s must not exceed r_t")
        self.radio.validate()

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "field_size_m": self.field_size_m,
            "bs_position": [self.bs_position.x, self.bs_position.y],
            "radio": self.radio.to_dict(),
            "r_c": self.r_c,
            "r_t": self.r_t,
            "initial_energy": self.initial_energy,
            "data_frame_bits": self.data_frame_bits,
            "control_frame_bits": self.control_frame_bits,
            "frames_per_round": self.frames_per_round,
            "seed": self.seed,
            "r_s": self.r_s,
            "invert_centrality": self.invert_centrality,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        d["bs_position"] = Position(*d["bs_position"])
        d["radio"] = RadioParams.from_dict(d["radio"])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


class Topology:
    """Immutable node placement plus mutable per-node energy state.

    Positions never change after deployment, so neighbor lookups are
    served from a KD-tree built once; dead nodes are filtered out at
    query time. Energy mutation happens only through the simulation
    engine's round loop.
    """

    def __init__(self, nodes: list[NodeState], bs: Position, m: float):
        self.nodes = nodes
        self.bs = bs
        self.m = m
        self._pos = np.array([[n.pos.x, n.pos.y] for n in nodes], dtype=float)
        self._tree = cKDTree(self._pos)
        self._bs_dist = np.hypot(self._pos[:, 0] - bs.x, self._pos[:, 1] - bs.y)
        self._alive = np.array([n.alive for n in nodes], dtype=bool)
        self._ball_cache: dict[float, list[np.ndarray]] = {}

    @property
    def n(self) -> int:
        return len(self.nodes)

    def positions(self) -> np.ndarray:
        return self._pos

    def alive_mask(self) -> np.ndarray:
        return self._alive

    def alive_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self._alive)]

    def alive_count(self) -> int:
        return int(self._alive.sum())

    def mark_dead(self, node_id: int) -> None:
        self._alive[node_id] = False

    def distance(self, i: int, j: int) -> float:
        d = self._pos[i] - self._pos[j]
        return float(math.hypot(d[0], d[1]))

    def distance_to_bs(self, i: int) -> float:
        return float(self._bs_dist[i])

    def _check_id(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise UnknownNodeError(f"no node with id {i}")

    def _balls(self, r: float) -> list[np.ndarray]:
        cached = self._ball_cache.get(r)
        if cached is None:
            raw = self._tree.query_ball_point(self._pos, r)
            cached = [np.sort(np.asarray(ids, dtype=int)) for ids in raw]
            self._ball_cache[r] = cached
        return cached

    def neighbors_within(self, i: int, r: float) -> list[int]:
        """Alive nodes other than i at distance <= r (boundary inclusive)."""
        self._check_id(i)
        if not self._alive[i]:
            raise EmptyNetworkError(f"node {i} is dead")
        ball = self._balls(r)[i]
        return [int(j) for j in ball if j != i and self._alive[j]]

    def ids_within(self, pos_idx: int, r: float) -> np.ndarray:
        """All node ids (alive or dead) within r of node pos_idx, self included."""
        return self._balls(r)[pos_idx]

    def farthest_distance_to_bs(self) -> float:
        if not self._alive.any():
            raise EmptyNetworkError("no alive nodes")
        return float(self._bs_dist[self._alive].max())

    def farthest_alive_from_bs(self) -> int:
        if not self._alive.any():
            raise EmptyNetworkError("no alive nodes")
        masked = np.where(self._alive, self._bs_dist, -np.inf)
        return int(masked.argmax())

    def residual_total(self) -> float:
        return float(sum(n.e_res for n in self.nodes))


def deploy(config: ScenarioConfig, seed: Optional[int] = None,
           rng: Optional[np.random.Generator] = None) -> Topology:
    """Scatter n_nodes i.i.d. uniformly over the field.

    Deterministic for a given seed; the deployment draw is the first use
    of the run's generator so a shared generator can be passed in.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed if seed is None else seed)
    m = config.field_size_m
    coords = rng.uniform(0.0, m, size=(config.n_nodes, 2))
    nodes = []
    e0 = config.initial_energy
    for i in range(config.n_nodes):
        nodes.append(
            NodeState(
                id=i,
                pos=Position(float(coords[i, 0]), float(coords[i, 1])),
                e_res=e0,
                e_max=e0 if e0 > 0 else 1.0,
                alive=e0 > 0,
            )
        )
    return Topology(nodes, config.bs_position, m)
