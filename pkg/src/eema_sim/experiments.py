"""Experiment drivers: lifetime/energy comparisons, the layer sweep, and
the delay sweep, each emitting plain row records for export."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import eema
from .baselines import BaselineParams
from .engine import (
    DelayParams,
    EEMAProtocol,
    EnergyLedger,
    MultiRunReport,
    PROTOCOLS,
    make_protocol,
    multi_run,
    path_delay,
    run_round,
    tree_path_positions,
)
from .model import BS, Position, ScenarioConfig, Topology, deploy
from .presets import get_scenario

EXPERIMENTS = ("lifetime", "energy", "layer_sweep", "delay_sweep", "analyze")


@dataclass
class ExperimentSpec:
    experiment: str
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    scenario: object = "scenario1"  # preset name or ScenarioConfig
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    output: Optional[str] = None
    fmt: str = "csv"
    max_rounds: int = 5000
    stop_at: Optional[str] = None
    layer_counts: list[int] = field(default_factory=lambda: [2, 3, 4, 5])
    sweep_nodes: list[int] = field(default_factory=lambda: [500, 1000, 2000])
    sweep_fields: list[float] = field(default_factory=lambda: [500.0, 1000.0])
    sweep_rounds: int = 3
    full_scale: bool = False

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}"
            )
        if not self.protocols:
            raise ValueError("at least one protocol required")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ValueError(f"unknown protocol {p!r}; choose from {PROTOCOLS}")
        if not self.seeds:
            raise ValueError("at least one seed required")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    def resolve_scenario(self) -> ScenarioConfig:
        if isinstance(self.scenario, ScenarioConfig):
            self.scenario.validate()
            return self.scenario
        return get_scenario(str(self.scenario))


def run_lifetime(spec: ExperimentSpec,
                 params: Optional[BaselineParams] = None) -> list[MultiRunReport]:
    cfg = spec.resolve_scenario()
    return [
        multi_run(cfg, proto, spec.seeds, max_rounds=spec.max_rounds,
                  stop_at=spec.stop_at, params=params)
        for proto in spec.protocols
    ]


run_energy = run_lifetime  # same runs; the energy view reads the per-round series


def sweep_grid(spec: ExperimentSpec) -> list[tuple[int, float]]:
    grid = [(n, m) for n in spec.sweep_nodes for m in spec.sweep_fields]
    if spec.full_scale:
        grid.append((4000, 2000.0))
    return grid


def _grid_config(base: ScenarioConfig, n: int, m: float,
                 bs: Optional[Position] = None) -> ScenarioConfig:
    cfg = ScenarioConfig(
        n_nodes=n,
        field_size_m=m,
        bs_position=bs or Position(m / 2.0, m / 2.0),
        radio=base.radio,
        r_c=base.r_c,
        r_t=base.r_t,
        initial_energy=base.initial_energy,
        data_frame_bits=base.data_frame_bits,
        control_frame_bits=base.control_frame_bits,
        frames_per_round=base.frames_per_round,
        name=f"grid_n{n}_m{int(m)}",
    )
    cfg.validate()
    return cfg


def run_layer_sweep(spec: ExperimentSpec) -> list[dict]:
    """Total energy spent over a fixed number of fresh rounds, per grid
    point and forced top-layer count."""
    base = spec.resolve_scenario()
    rows = []
    for n, m in sweep_grid(spec):
        cfg = _grid_config(base, n, m)
        for layers in spec.layer_counts:
            totals = []
            for seed in spec.seeds:
                rng = np.random.default_rng(seed)
                top = deploy(cfg, rng=rng)
                ledger = EnergyLedger(top)
                proto = EEMAProtocol(force_layers=layers)
                for r in range(1, spec.sweep_rounds + 1):
                    if top.alive_count() == 0:
                        break
                    run_round(top, proto, cfg, rng, r, ledger)
                totals.append(ledger.charged)
            rows.append({
                "n": n,
                "m": m,
                "layers": layers,
                "rounds": spec.sweep_rounds,
                "energy_j": float(np.mean(totals)),
            })
    return rows


def flat_path_positions(top: Topology, src: int, r_c: float) -> list[Position]:
    """Hop-by-hop node-level route: each hop goes to the nearest alive
    node within r_c that is strictly closer to the BS. A void (no closer
    node within r_c) is crossed with a single longer node-to-node hop to
    the nearest closer node, and the route only ends at the BS when no
    node is closer at all or the BS is within the hop range."""
    path = [top.nodes[src].pos]
    hop = src
    while True:
        d_bs = top.distance_to_bs(hop)
        if d_bs <= r_c:
            path.append(top.bs)
            return path
        best, best_d = None, math.inf
        for j in top.ids_within(hop, r_c):
            j = int(j)
            if j == hop or not top.nodes[j].alive:
                continue
            if top.distance_to_bs(j) >= d_bs:
                continue
            d = top.distance(hop, j)
            if d < best_d or (d == best_d and j < best):
                best, best_d = j, d
        if best is None:
            # Void: take the nearest strictly closer node regardless of
            # range; fall back to the BS when nobody is closer.
            for j in top.alive_ids():
                if j == hop or top.distance_to_bs(j) >= d_bs:
                    continue
                d = top.distance(hop, j)
                if d < best_d or (d == best_d and j < best):
                    best, best_d = j, d
        if best is None:
            path.append(top.bs)
            return path
        path.append(top.nodes[best].pos)
        hop = best


def two_tier_path_positions(top: Topology, src: int,
                            cfg: ScenarioConfig) -> list[Position]:
    """Clustered hop-by-hop route: source to its nearest head, then
    greedy head-to-head toward the BS."""
    from .baselines import greedy_ch_routes

    chs, _, _ = eema.elect_cluster_heads(top, cfg.r_c, cfg.invert_centrality)
    routes = greedy_ch_routes(top, chs)
    path = [top.nodes[src].pos]
    hop = src
    if src not in set(chs):
        best = min(chs, key=lambda c: (top.distance(src, c), c))
        path.append(top.nodes[best].pos)
        hop = best
    while True:
        nxt = routes.get(hop, BS)
        if nxt == BS:
            path.append(top.bs)
            return path
        path.append(top.nodes[nxt].pos)
        hop = nxt


def max_source_delays(cfg: ScenarioConfig, seed: int,
                      dp: Optional[DelayParams] = None) -> dict[str, float]:
    """Delay from the farthest node to the BS under the three
    architectures on one fresh topology."""
    dp = dp or DelayParams()
    rng = np.random.default_rng(seed)
    top = deploy(cfg, rng=rng)
    src = top.farthest_alive_from_bs()
    tree, _, _ = eema.build_hierarchy(top, cfg)
    delays = {
        "eema": path_delay(tree_path_positions(top, tree, src), dp,
                           predetermined=True),
        "l2": path_delay(two_tier_path_positions(top, src, cfg), dp,
                         predetermined=False),
        "l1": path_delay(flat_path_positions(top, src, cfg.r_c), dp,
                         predetermined=False),
    }
    return delays


def run_delay_sweep(spec: ExperimentSpec,
                    dp: Optional[DelayParams] = None) -> list[dict]:
    """Seed-averaged max-source delay per grid point, architecture, and
    BS placement (center of the field, and outside at (M+100, M/2))."""
    base = spec.resolve_scenario()
    rows = []
    for n, m in sweep_grid(spec):
        variants = {
            "center": Position(m / 2.0, m / 2.0),
            "outside": Position(m + 100.0, m / 2.0),
        }
        for variant, bs in variants.items():
            cfg = _grid_config(base, n, m, bs=bs)
            acc: dict[str, list[float]] = {"eema": [], "l2": [], "l1": []}
            for seed in spec.seeds:
                for arch, val in max_source_delays(cfg, seed, dp).items():
                    acc[arch].append(val)
            for arch in ("eema", "l2", "l1"):
                rows.append({
                    "n": n,
                    "m": m,
                    "bs": variant,
                    "architecture": arch,
                    "delay_tu": float(np.mean(acc[arch])),
                })
    return rows
