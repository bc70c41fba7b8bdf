"""Multi-layered hierarchy builder: CH election, recursive SCH election,
per-layer ranges, and parent/backup assignment.

One call to :func:`build_hierarchy` produces the aggregation tree for a
single round: regular nodes at layer 1, cluster heads at layer 2, and
super-cluster heads at layers 3 and up, rooted at the base station. The
distributed message protocol is simulated as deterministic synchronous
phases; ties are always broken by lower node id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (BS, EmptyNetworkError, Role, ScenarioConfig, Topology,
                    distance as pos_distance)
from .radio import rx_energy, tx_energy

# Margin keeping the per-layer range strictly below the 6*r_c
# connectivity bound.
RANGE_EPS = 1e-6


@dataclass
class ChScore:
    node: int
    score: float


@dataclass
class SchWeight:
    node: int
    weight: float
    timer: float


@dataclass
class ControlTraffic:
    """Message counts for one formation, by kind."""

    ch_inf: int = 0
    ch_adv: int = 0
    sch_adv: int = 0
    join_req_regular: int = 0
    join_req_heads: int = 0

    @property
    def join_req(self) -> int:
        return self.join_req_regular + self.join_req_heads

    @property
    def ch_phase(self) -> int:
        return self.ch_inf + self.ch_adv + self.join_req_regular

    @property
    def sch_phase(self) -> int:
        return self.sch_adv + self.join_req_heads

    def total(self) -> int:
        return self.ch_inf + self.ch_adv + self.sch_adv + self.join_req

    def __iadd__(self, other: "ControlTraffic") -> "ControlTraffic":
        self.ch_inf += other.ch_inf
        self.ch_adv += other.ch_adv
        self.sch_adv += other.sch_adv
        self.join_req_regular += other.join_req_regular
        self.join_req_heads += other.join_req_heads
        return self


@dataclass
class ControlMessage:
    """One control transmission; broadcast if range_m is set, else unicast."""

    kind: str
    sender: int
    range_m: Optional[float] = None
    dest: Optional[int] = None  # node id or BS
    dist: Optional[float] = None


@dataclass
class AggregationTree:
    """Routing structure of one round.

    ``layers[0]`` holds layer-2 heads, ``layers[i]`` layer-(i+2) heads;
    the lists are disjoint (a head starved of super-cluster candidates
    is moved, not copied, to the layer above). ``member_chs`` is the set
    regular nodes attach to: the heads elected in the CH phase,
    including any that were later moved up.
    """

    layers: list[list[int]]
    parent: dict[int, int]
    backup: dict[int, Optional[int]]
    member_chs: set[int]
    layer_ranges: list[float] = field(default_factory=list)
    orphan_count: int = 0
    beyond_rt_count: int = 0
    # Intermediate heads relaying a head's aggregate toward its parent
    # (greedy geographic chain, adopted only when cheaper than the
    # direct transmission). Heads absent from the map transmit direct.
    uplink_chain: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def head_set(self) -> set[int]:
        return {h for layer in self.layers for h in layer}

    def top_layer(self) -> list[int]:
        return self.layers[-1]


def _beats(score_a: float, a: int, score_b: float, b: int) -> bool:
    """Total order on (score, id): higher score wins, lower id breaks ties."""
    return score_a > score_b or (score_a == score_b and a < b)


def ch_score(t: Topology, i: int, r_c: float,
             invert_centrality: bool = False) -> ChScore:
    """Head-worthiness of node i: residual-energy fraction times mean
    neighbor distance times base-station proximity.

    The middle factor rewards larger mean distance as the election
    formula is written; ``invert_centrality`` replaces it with its
    reciprocal for sensitivity studies. Isolated nodes get a centrality
    factor of 1 so they keep a finite score.
    """
    node = t.nodes[i]
    if not node.alive:
        raise EmptyNetworkError(f"node {i} is dead")
    neighbors = t.neighbors_within(i, r_c)
    k = len(neighbors)
    if k == 0:
        centrality = 1.0
    else:
        total = sum(t.distance(i, j) for j in neighbors)
        centrality = (k / total) if invert_centrality else (total / k)
    d_max = t.farthest_distance_to_bs()
    d_bs = max(t.distance_to_bs(i), 1.0)  # cap: node essentially on the BS
    score = (node.e_res / node.e_max) * centrality * (d_max / d_bs)
    return ChScore(node=i, score=score)


def elect_cluster_heads(
    t: Topology, r_c: float, invert_centrality: bool = False
) -> tuple[list[int], ControlTraffic, list[ControlMessage]]:
    """Synchronous score comparison within r_c.

    A node self-elects iff its score beats every competing neighbor's.
    Nodes left without any head in range after a pass re-run the
    comparison among themselves, so every node ends up a head or within
    r_c of one; each pass elects at least the running maximum, which
    bounds the loop.
    """
    alive = t.alive_ids()
    if not alive:
        raise EmptyNetworkError("no alive nodes")
    traffic = ControlTraffic(ch_inf=len(alive))
    messages = [ControlMessage("ch_inf", i, range_m=r_c) for i in alive]

    scores = {i: ch_score(t, i, r_c, invert_centrality).score for i in alive}
    nbrs = {i: t.neighbors_within(i, r_c) for i in alive}

    chs: list[int] = []
    remaining = set(alive)
    while remaining:
        elected = [
            i
            for i in sorted(remaining)
            if all(
                _beats(scores[i], i, scores[j], j)
                for j in nbrs[i]
                if j in remaining
            )
        ]
        chs.extend(elected)
        elected_set = set(elected)
        remaining = {
            i
            for i in remaining
            if i not in elected_set
            and not any(j in elected_set for j in nbrs[i])
        }
    chs.sort()
    traffic.ch_adv = len(chs)
    messages.extend(ControlMessage("ch_adv", i, range_m=r_c) for i in chs)
    return chs, traffic, messages


def sch_weight(t: Topology, i: int, d_h: int, alpha: float = 1.0) -> SchWeight:
    """Election weight and backoff timer of an SCH candidate."""
    node = t.nodes[i]
    weight = (node.e_res / node.e_max) * d_h
    timer = (alpha / weight) if weight > 0 else math.inf
    return SchWeight(node=i, weight=weight, timer=timer)


def layer_range(layer: int, r_c: float, r_t: float) -> float:
    """Super-cluster range of a layer: grows by r_c per layer, capped by
    the transmission range and the 6*r_c connectivity bound."""
    if layer < 3:
        raise ValueError("layer ranges are defined for layers >= 3")
    return min((layer - 1) * r_c, r_t, 6.0 * r_c - RANGE_EPS)


def elect_super_cluster_heads(
    t: Topology,
    lower_heads: list[int],
    r_s: float,
    all_heads: Optional[set[int]] = None,
    alpha: float = 1.0,
) -> tuple[list[int], ControlTraffic]:
    """Timer race among non-heads: candidates fire in ascending timer
    order and self-elect unless an earlier winner already covers them
    within r_s. The winning set is invariant under positive scaling of
    alpha because the timer ordering is."""
    if not lower_heads:
        raise EmptyNetworkError("no lower-layer heads to cover")
    if all_heads is None:
        all_heads = set(lower_heads)
    lower = set(lower_heads)
    candidates = []
    for i in t.alive_ids():
        if i in all_heads:
            continue
        d_h = sum(1 for j in t.ids_within(i, r_s) if int(j) in lower)
        w = sch_weight(t, i, d_h, alpha)
        if w.weight > 0:
            candidates.append(w)
    candidates.sort(key=lambda w: (w.timer, w.node))

    elected: list[int] = []
    for cand in candidates:
        if all(t.distance(cand.node, s) > r_s for s in elected):
            elected.append(cand.node)
    elected.sort()
    return elected, ControlTraffic(sch_adv=len(elected))


def assign_parents(
    t: Topology,
    tree: AggregationTree,
    cfg: ScenarioConfig,
) -> tuple[ControlTraffic, list[ControlMessage]]:
    """Attach every alive node to its nearest above-layer head.

    Regular nodes join the nearest cluster head (backup: second
    nearest within r_c); heads below the top layer join the nearest
    head one layer up. A node with no head inside its nominal range
    still attaches to the nearest one and is flagged as an orphan. Top
    heads connect to the base station, flagged when beyond r_t.
    """
    traffic = ControlTraffic()
    messages: list[ControlMessage] = []
    head_set = tree.head_set()
    chs = sorted(tree.member_chs)

    def nearest_two(i: int, pool: list[int]) -> tuple[int, float, Optional[int], float]:
        best, best_d, second, second_d = -1, math.inf, None, math.inf
        for h in pool:
            if h == i:
                continue
            d = t.distance(i, h)
            if d < best_d or (d == best_d and h < best):
                second, second_d = best, best_d
                best, best_d = h, d
            elif d < second_d:
                second, second_d = h, d
        return best, best_d, second, second_d

    # Layer-1 nodes.
    for i in t.alive_ids():
        if i in head_set:
            continue
        parent, d, backup, backup_d = nearest_two(i, chs)
        tree.parent[i] = parent
        tree.backup[i] = backup if (backup is not None and backup_d <= cfg.r_c) else None
        if d > cfg.r_c:
            tree.orphan_count += 1
        traffic.join_req_regular += 1
        messages.append(ControlMessage("join_req", i, dest=parent, dist=d))

    # Heads, layer by layer.
    for idx, layer in enumerate(tree.layers):
        if idx == len(tree.layers) - 1:
            for h in layer:
                tree.parent[h] = BS
                tree.backup[h] = None
                if t.distance_to_bs(h) > cfg.r_t:
                    tree.beyond_rt_count += 1
            continue
        upper = tree.layers[idx + 1]
        join_range = tree.layer_ranges[idx] if idx < len(tree.layer_ranges) else cfg.r_t
        for h in layer:
            parent, d, backup, backup_d = nearest_two(h, upper)
            d_bs = t.distance_to_bs(h)
            if d_bs < d:
                # The hierarchy root is nearer than any upper head:
                # deliver straight to it instead of detouring upward.
                parent, d, backup = BS, d_bs, None
            tree.parent[h] = parent
            tree.backup[h] = (
                backup if (backup is not None and backup_d <= join_range) else None
            )
            if d > join_range:
                tree.orphan_count += 1
            traffic.join_req_heads += 1
            messages.append(ControlMessage("join_req", h, dest=parent, dist=d))

    # Long up-links ride greedy geographic chains through intermediate
    # heads when relaying costs less than the direct transmission; the
    # chain is acyclic because each hop is strictly closer to the
    # destination. Over multipath-regime distances a few short hops are
    # far cheaper than one d^4 transmission.
    heads = sorted(head_set)
    bits = cfg.data_frame_bits
    pts = np.array([[t.nodes[h].pos.x, t.nodes[h].pos.y] for h in heads])
    rx = rx_energy(cfg.radio, bits)
    for idx, h in enumerate(heads):
        g = tree.parent[h]
        dest = t.bs if g == BS else t.nodes[g].pos
        dd = np.hypot(pts[:, 0] - dest.x, pts[:, 1] - dest.y)
        usable = np.ones(len(heads), dtype=bool)
        usable[idx] = False
        if g != BS:
            usable[heads.index(g)] = False
        direct = tx_energy(cfg.radio, bits, dd[idx])
        chain: list[int] = []
        cost = 0.0
        cur, cur_to_dest = pts[idx], dd[idx]
        while True:
            cand = usable & (dd < cur_to_dest)
            if not cand.any():
                break
            d = np.where(cand,
                         np.hypot(pts[:, 0] - cur[0], pts[:, 1] - cur[1]),
                         np.inf)
            j = int(np.argmin(d))  # ties resolve to the lowest head id
            chain.append(heads[j])
            cost += tx_energy(cfg.radio, bits, float(d[j])) + rx
            usable[j] = False
            cur, cur_to_dest = pts[j], dd[j]
        if chain:
            cost += tx_energy(cfg.radio, bits, float(cur_to_dest))
            if cost < direct:
                tree.uplink_chain[h] = chain
    return traffic, messages


def build_hierarchy(
    t: Topology,
    cfg: ScenarioConfig,
    alpha: float = 1.0,
    force_layers: Optional[int] = None,
) -> tuple[AggregationTree, ControlTraffic, list[ControlMessage]]:
    """Run the full formation for one round.

    Layers are added while some top head is farther than r_t from the
    base station and the per-layer range can still grow, except when
    ``force_layers`` pins the top layer number (top layer number =
    len(layers)+1, counting regular nodes as layer 1). A lower head
    left uncovered with no viable candidate anywhere within r_s is
    moved up a layer and advertises there itself.
    """
    if t.alive_count() == 0:
        raise EmptyNetworkError("no alive nodes")
    chs, traffic, messages = elect_cluster_heads(t, cfg.r_c, cfg.invert_centrality)
    layers = [list(chs)]
    layer_ranges: list[float] = []
    all_heads = set(chs)
    member_chs = set(chs)

    layer_no = 3
    prev_r_s = cfg.r_c
    while True:
        top = layers[-1]
        top_layer_no = len(layers) + 1
        if force_layers is not None:
            if top_layer_no >= force_layers:
                break
        elif all(t.distance_to_bs(h) <= cfg.r_t for h in top):
            break
        r_s = layer_range(layer_no, cfg.r_c, cfg.r_t)
        if r_s <= prev_r_s and layer_no > 3:
            break  # range stopped growing: remaining tops go direct to BS
        elected, sch_traffic = elect_super_cluster_heads(
            t, top, r_s, all_heads, alpha
        )
        if not elected:
            break  # nobody left to elect anywhere: connect tops directly
        new_layer = list(elected)
        # Starved lower heads (no viable candidate in range, still
        # uncovered) move themselves up and advertise at the new layer.
        for h in sorted(top):
            if any(t.distance(h, s) <= r_s for s in new_layer):
                continue
            has_candidate = any(
                int(j) not in all_heads and int(j) != h and t.nodes[int(j)].e_res > 0
                for j in t.ids_within(h, r_s)
                if t.nodes[int(j)].alive
            )
            if not has_candidate:
                top.remove(h)
                new_layer.append(h)
                sch_traffic.sch_adv += 1
        new_layer.sort()
        traffic += sch_traffic
        messages.extend(
            ControlMessage("sch_adv", s, range_m=r_s) for s in new_layer
        )
        all_heads.update(new_layer)
        layers.append(new_layer)
        layer_ranges.append(r_s)
        prev_r_s = r_s
        layer_no += 1
        if layer_no > 24:  # safety: ranges cap long before this
            break

    tree = AggregationTree(
        layers=layers,
        parent={},
        backup={},
        member_chs=member_chs,
        layer_ranges=layer_ranges,
    )
    join_traffic, join_messages = assign_parents(t, tree, cfg)
    traffic += join_traffic
    messages.extend(join_messages)

    # Record roles on the node states for inspection.
    for i in t.alive_ids():
        node = t.nodes[i]
        node.role, node.layer = Role.REGULAR, 1
    for idx, layer in enumerate(layers):
        for h in layer:
            node = t.nodes[h]
            node.role = Role.CH if idx == 0 else Role.SCH
            node.layer = idx + 2
    for i in t.alive_ids():
        node = t.nodes[i]
        node.parent = tree.parent.get(i)
        node.backup = tree.backup.get(i)
    return tree, traffic, messages
