"""Comparison clustering protocols: LEACH, HEED (AMRP), DWEHC, EEDC.

Each protocol produces a flat two-tier structure: a cluster-head set, a
membership map, and greedy geographic inter-head routes toward the base
station. Implementations follow each protocol's core election rule at
the fidelity needed for energy and lifetime comparison; auxiliary
features of the original publications are simplified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eema import ControlMessage, ControlTraffic
from .model import BS, EmptyNetworkError, Topology
from .radio import RadioParams, tx_energy


@dataclass
class BaselineParams:
    leach_p: float = 0.05
    leach_p_sweep: tuple[float, ...] = (0.05, 0.10, 0.15)
    eedc_d_thr: float = 30.0
    eedc_r_comp: float = 25.0
    heed_c_prob: float = 0.05
    heed_p_min: float = 1e-4
    heed_max_iter: int = 16
    heed_power_levels: int = 4
    dwehc_relay_levels: int = 1

    def validate(self) -> None:
        if not (0.0 < self.leach_p < 1.0):
            raise ValueError("leach_p must lie in (0, 1)")
        if self.eedc_d_thr <= 0 or self.eedc_r_comp <= 0:
            raise ValueError("EEDC ranges must be positive")


@dataclass
class ClusteringResult:
    ch_set: list[int]
    membership: dict[int, int]              # node -> its CH
    intra_parent: dict[int, int]            # node -> next hop toward its CH
    routes: dict[int, int]                  # CH -> next hop (CH id or BS)
    control_traffic: ControlTraffic = field(default_factory=ControlTraffic)
    messages: list[ControlMessage] = field(default_factory=list)


def greedy_ch_routes(t: Topology, chs: list[int]) -> dict[int, int]:
    """Next hop per CH: the nearest CH strictly closer to the BS, or the
    BS directly when it is nearer than any such CH (or none exists).
    Strictly decreasing BS distance makes the routes acyclic."""
    routes: dict[int, int] = {}
    for c in chs:
        d_bs = t.distance_to_bs(c)
        best, best_d = BS, d_bs
        for o in chs:
            if o == c or t.distance_to_bs(o) >= d_bs:
                continue
            d = t.distance(c, o)
            if d < best_d or (d == best_d and best != BS and o < best):
                best, best_d = o, d
        routes[c] = best
    return routes


def _nearest(t: Topology, i: int, pool: list[int]) -> tuple[int, float]:
    best, best_d = -1, math.inf
    for h in pool:
        d = t.distance(i, h)
        if d < best_d or (d == best_d and h < best):
            best, best_d = h, d
    return best, best_d


def _join_members(t: Topology, chs: list[int]) -> tuple[dict[int, int], list[ControlMessage], int]:
    membership: dict[int, int] = {}
    messages: list[ControlMessage] = []
    joins = 0
    ch_set = set(chs)
    for i in t.alive_ids():
        if i in ch_set:
            membership[i] = i
            continue
        ch, d = _nearest(t, i, chs)
        membership[i] = ch
        messages.append(ControlMessage("join_req", i, dest=ch, dist=d))
        joins += 1
    return membership, messages, joins


def _adv_messages(chs: list[int], r_c: float) -> list[ControlMessage]:
    return [ControlMessage("ch_adv", c, range_m=r_c) for c in chs]


def _finish(t: Topology, chs: list[int], r_c: float,
            traffic: ControlTraffic,
            messages: list[ControlMessage]) -> ClusteringResult:
    chs = sorted(chs)
    membership, join_msgs, joins = _join_members(t, chs)
    traffic.ch_adv += len(chs)
    traffic.join_req_regular += joins
    messages.extend(_adv_messages(chs, r_c))
    messages.extend(join_msgs)
    return ClusteringResult(
        ch_set=chs,
        membership=membership,
        intra_parent={i: c for i, c in membership.items() if i != c},
        routes=greedy_ch_routes(t, chs),
        control_traffic=traffic,
        messages=messages,
    )


def leach_elect(
    t: Topology,
    p: float,
    round_idx: int,
    rng: np.random.Generator,
    served: Optional[set[int]] = None,
    r_c: float = 50.0,
) -> ClusteringResult:
    """Standard probabilistic rotation: a node that has not served in the
    current 1/p epoch self-elects with threshold p / (1 - p*(r mod 1/p)).
    Coin flips are drawn in node-id order, keeping runs reproducible."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    if served is None:
        served = set()
    epoch = int(round(1.0 / p))
    if round_idx % epoch == 0:
        served.clear()
    threshold = p / (1.0 - p * (round_idx % epoch))
    alive = t.alive_ids()
    if not alive:
        raise EmptyNetworkError("no alive nodes")
    chs = []
    for i in alive:
        coin = rng.random()
        if i in served:
            continue
        if coin < threshold:
            chs.append(i)
            served.add(i)
    if not chs:
        # Degenerate draw: keep the round productive with the highest
        # energy node (lowest id on ties).
        chs = [max(alive, key=lambda i: (t.nodes[i].e_res, -i))]
        served.add(chs[0])
    return _finish(t, chs, r_c, ControlTraffic(), [])


def heed_elect(
    t: Topology,
    params: BaselineParams,
    rng: np.random.Generator,
    r_c: float = 50.0,
) -> ClusteringResult:
    """Iterative probability-doubling election seeded by the residual
    energy fraction; a firing node becomes head unless one already
    covers it within r_c. Members join the in-range head with the
    lowest AMRP cost (mean quantized power level of the nodes it would
    serve), ties by id."""
    alive = t.alive_ids()
    if not alive:
        raise EmptyNetworkError("no alive nodes")
    traffic = ControlTraffic()
    messages: list[ControlMessage] = []
    prob = {
        i: max(params.heed_c_prob * t.nodes[i].e_res / t.nodes[i].e_max,
               params.heed_p_min)
        for i in alive
    }

    # AMRP cost: mean quantized power level needed by the nodes a head
    # would serve. Geometry-only, so it can be computed up front.
    levels = np.linspace(r_c / params.heed_power_levels, r_c,
                         params.heed_power_levels)

    def quantize(d: float) -> float:
        for lv in levels:
            if d <= lv:
                return float(lv)
        return float(levels[-1])

    cost = {}
    for i in alive:
        nbrs = t.neighbors_within(i, r_c)
        cost[i] = (
            sum(quantize(t.distance(i, j)) for j in nbrs) / len(nbrs)
            if nbrs else 0.0
        )

    chs: list[int] = []
    covered: set[int] = set()
    for _ in range(params.heed_max_iter):
        if len(covered) == len(alive):
            break
        firers = []
        for i in alive:
            coin = rng.random()
            if i in covered:
                continue
            if prob[i] >= 1.0 or coin < prob[i]:
                firers.append(i)
            prob[i] = min(1.0, 2.0 * prob[i])
        # Simultaneous announcements resolve by AMRP cost, then id.
        for i in sorted(firers, key=lambda i: (cost[i], i)):
            if i in covered:
                continue
            chs.append(i)
            covered.add(i)
            covered.update(t.neighbors_within(i, r_c))
            traffic.ch_inf += 1
            messages.append(ControlMessage("ch_inf", i, range_m=r_c))

    # Membership: lowest-cost announced head within range, ties by id;
    # a head someone relies on keeps serving even if a cheaper head is
    # in its own range.
    membership: dict[int, int] = {}
    final: set[int] = set()
    for i in alive:
        in_range = [c for c in chs if c == i or t.distance(i, c) <= r_c]
        if not in_range:
            membership[i] = i
            final.add(i)
            continue
        best = min(in_range, key=lambda c: (cost[c], c))
        membership[i] = best
        final.add(best)
    for c in final:
        membership[c] = c
    ch_list = sorted(final)
    joins = 0
    for i, c in membership.items():
        if i != c:
            messages.append(ControlMessage("join_req", i, dest=c,
                                           dist=t.distance(i, c)))
            joins += 1
    traffic.ch_adv += len(ch_list)
    traffic.join_req_regular += joins
    messages.extend(_adv_messages(ch_list, r_c))
    return ClusteringResult(
        ch_set=ch_list,
        membership=membership,
        intra_parent={i: c for i, c in membership.items() if i != c},
        routes=greedy_ch_routes(t, ch_list),
        control_traffic=traffic,
        messages=messages,
    )


def _dwehc_weight(t: Topology, i: int, r_c: float) -> float:
    node = t.nodes[i]
    prox = sum(
        (r_c - t.distance(i, j)) / (6.0 * r_c)
        for j in t.neighbors_within(i, r_c)
    )
    return (node.e_res / node.e_max) * prox


def dwehc_elect(
    t: Topology,
    params: BaselineParams,
    r_c: float = 50.0,
    radio: Optional[RadioParams] = None,
    frame_bits: int = 4000,
) -> ClusteringResult:
    """Weight-based election (energy fraction times neighbor proximity)
    with the same local-maximum / re-election structure as the CH phase,
    so every node is covered within r_c. Members then route to their
    head through an in-cluster relay whenever the split transmission is
    cheaper than the direct one."""
    alive = t.alive_ids()
    if not alive:
        raise EmptyNetworkError("no alive nodes")
    radio = radio or RadioParams()
    weights = {i: _dwehc_weight(t, i, r_c) for i in alive}
    nbrs = {i: t.neighbors_within(i, r_c) for i in alive}
    chs: list[int] = []
    remaining = set(alive)
    while remaining:
        elected = [
            i
            for i in sorted(remaining)
            if all(
                weights[i] > weights[j] or (weights[i] == weights[j] and i < j)
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
    result = _finish(t, chs, r_c, ControlTraffic(ch_inf=len(alive)),
                     [ControlMessage("ch_inf", i, range_m=r_c) for i in alive])

    # Single-level intra-cluster relaying: reroute a member through a
    # sibling when that lowers the summed transmission energy.
    clusters: dict[int, list[int]] = {}
    for i, c in result.membership.items():
        if i != c:
            clusters.setdefault(c, []).append(i)
    for c, members in clusters.items():
        for m in members:
            d_direct = t.distance(m, c)
            direct_cost = tx_energy(radio, frame_bits, d_direct)
            best_cost, best_relay = direct_cost, None
            for u in members:
                if u == m:
                    continue
                d_mu = t.distance(m, u)
                if d_mu > r_c:
                    continue
                split = tx_energy(radio, frame_bits, d_mu) + tx_energy(
                    radio, frame_bits, t.distance(u, c)
                )
                if split < best_cost:
                    best_cost, best_relay = split, u
            if best_relay is not None:
                result.intra_parent[m] = best_relay
    return result


def eedc_elect(
    t: Topology,
    d_thr: float = 30.0,
    r_comp: float = 25.0,
    r_c: float = 50.0,
) -> ClusteringResult:
    """Local energy maxima within r_comp compete; the survivors are the
    maximal-energy-first subset with pairwise distance >= d_thr."""
    if d_thr <= 0 or r_comp <= 0:
        raise ValueError("d_thr and r_comp must be positive")
    alive = t.alive_ids()
    if not alive:
        raise EmptyNetworkError("no alive nodes")
    candidates = []
    for i in alive:
        e_i = t.nodes[i].e_res
        if all(
            e_i > t.nodes[j].e_res or (e_i == t.nodes[j].e_res and i < j)
            for j in t.neighbors_within(i, r_comp)
        ):
            candidates.append(i)
    candidates.sort(key=lambda i: (-t.nodes[i].e_res, i))
    chs: list[int] = []
    for c in candidates:
        if all(t.distance(c, o) >= d_thr for o in chs):
            chs.append(c)
    traffic = ControlTraffic(ch_inf=len(alive))
    messages = [ControlMessage("ch_inf", i, range_m=r_comp) for i in alive]
    return _finish(t, chs, r_c, traffic, messages)
