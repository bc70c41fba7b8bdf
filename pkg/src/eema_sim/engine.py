"""Round-driven simulation loop.

One round = formation (control messages charged at the control frame
size) followed by ``frames_per_round`` data-gathering iterations, with
deaths applied the moment a node's energy hits zero. Lifetime metrics
are read off the per-round alive series afterwards.
"""
from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import baselines
from .baselines import BaselineParams, ClusteringResult
from .eema import AggregationTree, ControlMessage, ControlTraffic, build_hierarchy
from .model import BS, EmptyNetworkError, Position, ScenarioConfig, Topology, deploy
from .radio import aggregate_energy, charge, crossover_distance, rx_energy, tx_energy


class SimulationComplete(RuntimeError):
    """Raised when a round is requested but no node is alive."""


@dataclass
class DelayParams:
    t_u_per_meter: float = 1.0
    t_p: float = 10.0


@dataclass
class RoundMetrics:
    round: int
    alive_count: int
    energy_spent: float
    traffic: ControlTraffic
    delivered: int
    lost: int
    max_source_delay: float
    orphan_flags: int
    k_c: int = 0
    k_s: int = 0
    k_l: int = 0
    n_layers: int = 0


@dataclass
class LifetimeReport:
    protocol: str
    seed: int
    config_digest: str
    per_round: list[RoundMetrics]
    fnd: Optional[int]
    hna: Optional[int]
    lnd: Optional[int]
    rounds_run: int
    horizon: int
    initial_energy_total: float
    residual_energy_total: float
    total_charged: float
    total_clamped: float

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "fnd": self.fnd,
            "hna": self.hna,
            "lnd": self.lnd,
            "rounds_run": self.rounds_run,
            "horizon": self.horizon,
            "initial_energy_total": self.initial_energy_total,
            "residual_energy_total": self.residual_energy_total,
            "total_charged": self.total_charged,
            "total_clamped": self.total_clamped,
            "per_round": [
                {
                    "round": m.round,
                    "alive": m.alive_count,
                    "energy_j": m.energy_spent,
                    "messages_ch": m.traffic.ch_phase,
                    "messages_sch": m.traffic.sch_phase,
                    "delivered": m.delivered,
                    "lost": m.lost,
                    "delay_tu": m.max_source_delay,
                    "orphans": m.orphan_flags,
                }
                for m in self.per_round
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class EnergyLedger:
    """Single owner of all energy mutation in a run; keeps the totals
    needed for the conservation identity (initial = residual + charged,
    with clamped losses reported separately)."""

    def __init__(self, topology: Topology):
        self.top = topology
        self.charged = 0.0
        self.clamped = 0.0
        self.round_total = 0.0

    def begin_round(self) -> None:
        self.round_total = 0.0

    def spend(self, node_id: int, amount: float) -> bool:
        """Charge a node; returns True if it is still alive afterwards."""
        node = self.top.nodes[node_id]
        if not node.alive:
            return False
        before = node.e_res
        died = charge(node, amount)
        actual = before - node.e_res
        self.charged += actual
        self.clamped += amount - actual
        self.round_total += actual
        if died:
            self.top.mark_dead(node_id)
        return not died


def path_delay(path: Sequence[Position], dp: DelayParams,
               predetermined: bool) -> float:
    """Delay along a route ending at the base station.

    Link time accrues per meter over every hop. Hop-by-hop routing adds
    a processing delay at each node between the source and the base
    station; a predetermined (connection-oriented) route skips it.
    """
    if len(path) < 2:
        raise ValueError("path needs at least source and destination")
    from .model import distance as _dist

    links = len(path) - 1
    d_link = sum(
        _dist(path[k], path[k + 1]) for k in range(links)
    ) * dp.t_u_per_meter
    if predetermined:
        return d_link
    return d_link + max(0, links - 1) * dp.t_p


def lifetime_metrics(
    alive_series: Sequence[int], n: int
) -> tuple[Optional[int], Optional[int], Optional[int]]:
    """(fnd, hna, lnd) round indices; None when beyond the horizon."""
    fnd = hna = lnd = None
    for r, a in enumerate(alive_series):
        if fnd is None and a < n:
            fnd = r
        if hna is None and a <= n / 2:
            hna = r
        if lnd is None and a == 0:
            lnd = r
            break
    return fnd, hna, lnd


def charge_control_messages(
    top: Topology, messages: list[ControlMessage], cfg: ScenarioConfig,
    ledger: EnergyLedger,
) -> None:
    """Charge control traffic in message order. A sender that dies
    mid-transmission still pays, but nobody receives; receivers of a
    broadcast are the alive nodes inside the advertised range."""
    bits = cfg.control_frame_bits
    radio = cfg.radio
    for msg in messages:
        sender = top.nodes[msg.sender]
        if not sender.alive:
            continue
        if msg.range_m is not None:
            ok = ledger.spend(msg.sender, tx_energy(radio, bits, msg.range_m))
            if not ok:
                continue
            for j in top.ids_within(msg.sender, msg.range_m):
                j = int(j)
                if j != msg.sender and top.nodes[j].alive:
                    ledger.spend(j, rx_energy(radio, bits))
        else:
            ok = ledger.spend(msg.sender, tx_energy(radio, bits, msg.dist))
            if ok and msg.dest != BS and top.nodes[msg.dest].alive:
                ledger.spend(msg.dest, rx_energy(radio, bits))


def _send_frame(top: Topology, ledger: EnergyLedger, cfg: ScenarioConfig,
                sender: int, primary: Optional[int],
                backup: Optional[int]) -> Optional[int]:
    """Transmit one data frame to the primary parent, falling back to
    the backup when the primary is dead. Returns the receiving node id,
    BS on delivery to the base station, or None when the frame is lost."""
    target = None
    if primary == BS:
        target = BS
    elif primary is not None and top.nodes[primary].alive:
        target = primary
    elif backup is not None and top.nodes[backup].alive:
        target = backup
    if target is None:
        return None
    d = top.distance_to_bs(sender) if target == BS else top.distance(sender, target)
    ok = ledger.spend(sender, tx_energy(cfg.radio, cfg.data_frame_bits, d))
    if not ok:
        return None  # died transmitting: packet lost
    if target == BS:
        return BS
    alive = ledger.spend(target, rx_energy(cfg.radio, cfg.data_frame_bits))
    return target if alive else None


def _send_head_frame(top: Topology, tree: AggregationTree, cfg: ScenarioConfig,
                     ledger: EnergyLedger, h: int) -> Optional[int]:
    """Forward a head's aggregate toward its parent, riding the relay
    chain when one was adopted. Dead relays are skipped (the carrier
    transmits over them at the longer distance). Returns the absorbing
    head id, BS on delivery, or None when the frame is lost."""
    primary, backup = tree.parent.get(h), tree.backup.get(h)
    chain = [r for r in tree.uplink_chain.get(h, ()) if top.nodes[r].alive]
    if not chain:
        return _send_frame(top, ledger, cfg, h, primary, backup)
    final = None
    if primary == BS:
        final = BS
    elif primary is not None and top.nodes[primary].alive:
        final = primary
    elif backup is not None and top.nodes[backup].alive:
        final = backup
    if final is None:
        return None
    carrier = h
    for nxt in chain + [final]:
        d = (top.distance_to_bs(carrier) if nxt == BS
             else top.distance(carrier, nxt))
        if not ledger.spend(carrier, tx_energy(cfg.radio, cfg.data_frame_bits, d)):
            return None  # carrier died transmitting
        if nxt == BS:
            return BS
        if not ledger.spend(nxt, rx_energy(cfg.radio, cfg.data_frame_bits)):
            return None  # receiver died receiving
        carrier = nxt
    return final


def transmit_and_aggregate_tree(
    top: Topology, tree: AggregationTree, cfg: ScenarioConfig,
    ledger: EnergyLedger,
) -> tuple[int, int]:
    """One data-gathering iteration over the aggregation tree.

    Leaves send one frame each to their cluster head; every head fuses
    all received frames plus its own sensed reading into a single frame
    and forwards it one layer up. Returns (delivered at BS, lost).
    """
    delivered = lost = 0
    head_set = tree.head_set()
    inbox: dict[int, int] = {}

    for i in top.alive_ids():
        if i in head_set:
            continue
        got = _send_frame(top, ledger, cfg, i, tree.parent.get(i), tree.backup.get(i))
        if got is None:
            lost += 1
        elif got == BS:
            delivered += 1
        else:
            inbox[got] = inbox.get(got, 0) + 1

    for layer in tree.layers:
        for h in layer:
            node = top.nodes[h]
            n_in = inbox.pop(h, 0)
            if not node.alive:
                lost += n_in  # collected frames die with the head
                continue
            ok = ledger.spend(
                h, aggregate_energy(cfg.radio, cfg.data_frame_bits, n_in + 1)
            )
            if not ok:
                lost += n_in + 1
                continue
            got = _send_head_frame(top, tree, cfg, ledger, h)
            if got is None:
                lost += 1
            elif got == BS:
                delivered += 1
            else:
                inbox[got] = inbox.get(got, 0) + 1
    lost += sum(inbox.values())  # frames parked at heads outside the layer order
    return delivered, lost


def transmit_and_aggregate_cluster(
    top: Topology, cr: ClusteringResult, cfg: ScenarioConfig,
    ledger: EnergyLedger,
) -> tuple[int, int]:
    """One data-gathering iteration for a two-tier clustering.

    Members reach their head (possibly through intra-cluster relays),
    the head aggregates once, and the aggregate rides the inter-head
    route to the BS with forwarding heads relaying unmodified.
    """
    delivered = lost = 0
    ch_set = set(cr.ch_set)
    inbox: dict[int, int] = {c: 0 for c in cr.ch_set}

    def walk_intra(i: int) -> None:
        nonlocal lost
        hop = i
        seen = 0
        while True:
            nxt = cr.intra_parent.get(hop)
            if nxt is None:
                break
            if not top.nodes[nxt].alive:
                lost += 1
                return
            d = top.distance(hop, nxt)
            if not ledger.spend(hop, tx_energy(cfg.radio, cfg.data_frame_bits, d)):
                lost += 1
                return
            if not ledger.spend(nxt, rx_energy(cfg.radio, cfg.data_frame_bits)):
                lost += 1
                return
            hop = nxt
            seen += 1
            if hop in ch_set or seen > top.n:
                break
        if hop in inbox:
            inbox[hop] += 1
        else:
            lost += 1

    for i in top.alive_ids():
        if i in ch_set:
            continue
        walk_intra(i)

    # Heads aggregate once, then the frame is relayed without further
    # aggregation along the greedy inter-head route.
    for c in cr.ch_set:
        node = top.nodes[c]
        n_in = inbox.get(c, 0)
        if not node.alive:
            lost += n_in
            continue
        if not ledger.spend(
            c, aggregate_energy(cfg.radio, cfg.data_frame_bits, n_in + 1)
        ):
            lost += n_in + 1
            continue
        hop = c
        hops = 0
        while True:
            nxt = cr.routes.get(hop, BS)
            if nxt == BS:
                d = top.distance_to_bs(hop)
                if ledger.spend(hop, tx_energy(cfg.radio, cfg.data_frame_bits, d)):
                    delivered += 1
                else:
                    lost += 1
                break
            if not top.nodes[nxt].alive:
                lost += 1
                break
            d = top.distance(hop, nxt)
            if not ledger.spend(hop, tx_energy(cfg.radio, cfg.data_frame_bits, d)):
                lost += 1
                break
            if not ledger.spend(nxt, rx_energy(cfg.radio, cfg.data_frame_bits)):
                lost += 1
                break
            hop = nxt
            hops += 1
            if hops > top.n:
                lost += 1
                break
    return delivered, lost


def tree_path_positions(top: Topology, tree: AggregationTree,
                        src: int) -> list[Position]:
    path = [top.nodes[src].pos]
    hop = src
    seen = 0
    while True:
        parent = tree.parent.get(hop, BS)
        if parent == BS:
            path.append(top.bs)
            return path
        path.append(top.nodes[parent].pos)
        hop = parent
        seen += 1
        if seen > top.n:
            raise RuntimeError("cycle in aggregation tree")


def cluster_path_positions(top: Topology, cr: ClusteringResult,
                           src: int) -> list[Position]:
    path = [top.nodes[src].pos]
    hop = src
    if src not in set(cr.ch_set):
        while True:
            nxt = cr.intra_parent.get(hop)
            if nxt is None:
                break
            path.append(top.nodes[nxt].pos)
            hop = nxt
            if hop in set(cr.ch_set) or len(path) > top.n:
                break
    seen = 0
    while True:
        nxt = cr.routes.get(hop, BS)
        if nxt == BS:
            path.append(top.bs)
            return path
        path.append(top.nodes[nxt].pos)
        hop = nxt
        seen += 1
        if seen > top.n:
            raise RuntimeError("cycle in inter-head routes")


class EEMAProtocol:
    name = "eema"

    def __init__(self, alpha: float = 1.0, force_layers: Optional[int] = None):
        self.alpha = alpha
        self.force_layers = force_layers

    def form(self, top, cfg, rng, round_idx):
        tree, traffic, messages = build_hierarchy(
            top, cfg, alpha=self.alpha, force_layers=self.force_layers
        )
        return tree, traffic, messages


class LeachProtocol:
    def __init__(self, p: float = 0.05):
        self.p = p
        self.name = "leach"
        self._served: set[int] = set()

    def form(self, top, cfg, rng, round_idx):
        cr = baselines.leach_elect(top, self.p, round_idx, rng,
                                   served=self._served, r_c=cfg.r_c)
        return cr, cr.control_traffic, cr.messages


class HeedProtocol:
    name = "heed"

    def __init__(self, params: Optional[BaselineParams] = None):
        self.params = params or BaselineParams()

    def form(self, top, cfg, rng, round_idx):
        cr = baselines.heed_elect(top, self.params, rng, r_c=cfg.r_c)
        return cr, cr.control_traffic, cr.messages


class DwehcProtocol:
    name = "dwehc"

    def __init__(self, params: Optional[BaselineParams] = None):
        self.params = params or BaselineParams()

    def form(self, top, cfg, rng, round_idx):
        cr = baselines.dwehc_elect(top, self.params, r_c=cfg.r_c,
                                   radio=cfg.radio,
                                   frame_bits=cfg.data_frame_bits)
        return cr, cr.control_traffic, cr.messages


class EedcProtocol:
    name = "eedc"

    def __init__(self, params: Optional[BaselineParams] = None):
        self.params = params or BaselineParams()

    def form(self, top, cfg, rng, round_idx):
        # The residual-energy competition only rotates drained heads out
        # if the competition disc actually contains competitors, so the
        # competition range is floored at the cluster range (keeping the
        # configured d_thr/r_comp ratio). A disc that is empty at sparse
        # deployments would re-elect an exhausted head forever.
        r_comp = max(self.params.eedc_r_comp, cfg.r_c)
        d_thr = self.params.eedc_d_thr * (r_comp / self.params.eedc_r_comp)
        cr = baselines.eedc_elect(top, d_thr, r_comp, r_c=cfg.r_c)
        return cr, cr.control_traffic, cr.messages


PROTOCOLS = ("eema", "leach", "heed", "dwehc", "eedc")


def make_protocol(name: str, params: Optional[BaselineParams] = None,
                  leach_p: Optional[float] = None, **kwargs):
    params = params or BaselineParams()
    if name == "eema":
        return EEMAProtocol(**kwargs)
    if name == "leach":
        return LeachProtocol(leach_p if leach_p is not None else params.leach_p)
    if name == "heed":
        return HeedProtocol(params)
    if name == "dwehc":
        return DwehcProtocol(params)
    if name == "eedc":
        return EedcProtocol(params)
    raise ValueError(f"unknown protocol {name!r}; choose from {PROTOCOLS}")


def run_round(
    top: Topology,
    protocol,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    round_idx: int,
    ledger: EnergyLedger,
    dp: Optional[DelayParams] = None,
) -> RoundMetrics:
    if top.alive_count() == 0:
        raise SimulationComplete("all nodes dead")
    dp = dp or DelayParams()
    ledger.begin_round()

    structure, traffic, messages = protocol.form(top, cfg, rng, round_idx)

    # Max-source delay from the farthest alive node, measured on the
    # freshly formed structure.
    src = top.farthest_alive_from_bs()
    if isinstance(structure, AggregationTree):
        delay = path_delay(tree_path_positions(top, structure, src), dp,
                           predetermined=True)
        orphans = structure.orphan_count + structure.beyond_rt_count
        k_c = len(structure.layers[0])
        k_s = sum(len(l) for l in structure.layers[1:])
        k_l = len(structure.top_layer())
        n_layers = structure.n_layers
    else:
        delay = path_delay(cluster_path_positions(top, structure, src), dp,
                           predetermined=False)
        orphans = 0
        k_c, k_s, n_layers = len(structure.ch_set), 0, 1
        k_l = k_c

    charge_control_messages(top, messages, cfg, ledger)

    delivered = lost = 0
    for _ in range(cfg.frames_per_round):
        if top.alive_count() == 0:
            break
        if isinstance(structure, AggregationTree):
            d, l = transmit_and_aggregate_tree(top, structure, cfg, ledger)
        else:
            d, l = transmit_and_aggregate_cluster(top, structure, cfg, ledger)
        delivered += d
        lost += l

    return RoundMetrics(
        round=round_idx,
        alive_count=top.alive_count(),
        energy_spent=ledger.round_total,
        traffic=traffic,
        delivered=delivered,
        lost=lost,
        max_source_delay=delay,
        orphan_flags=orphans,
        k_c=k_c,
        k_s=k_s,
        k_l=k_l,
        n_layers=n_layers,
    )


def run_simulation(
    cfg: ScenarioConfig,
    protocol_name: Union[str, object],
    seed: int,
    max_rounds: int = 5000,
    stop_at: Optional[str] = None,
    params: Optional[BaselineParams] = None,
    dp: Optional[DelayParams] = None,
) -> LifetimeReport:
    """Deploy and loop rounds until everyone is dead, the cap is hit, or
    the requested lifetime milestone (``stop_at`` in fnd/hna/lnd) is
    reached. Deterministic per (cfg, protocol, seed)."""
    cfg.validate()
    if stop_at not in (None, "fnd", "hna", "lnd"):
        raise ValueError("stop_at must be one of None, 'fnd', 'hna', 'lnd'")
    protocol = (
        make_protocol(protocol_name, params)
        if isinstance(protocol_name, str)
        else protocol_name
    )
    rng = np.random.default_rng(seed)
    top = deploy(cfg, rng=rng)
    ledger = EnergyLedger(top)
    n = cfg.n_nodes
    initial_total = top.residual_total()
    series = [top.alive_count()]
    per_round: list[RoundMetrics] = []

    for r in range(1, max_rounds + 1):
        if top.alive_count() == 0:
            break
        metrics = run_round(top, protocol, cfg, rng, r, ledger, dp)
        per_round.append(metrics)
        series.append(metrics.alive_count)
        fnd, hna, lnd = lifetime_metrics(series, n)
        if stop_at == "fnd" and fnd is not None:
            break
        if stop_at == "hna" and hna is not None:
            break
        if stop_at == "lnd" and lnd is not None:
            break

    fnd, hna, lnd = lifetime_metrics(series, n)
    return LifetimeReport(
        protocol=getattr(protocol, "name", str(protocol_name)),
        seed=seed,
        config_digest=cfg.digest(),
        per_round=per_round,
        fnd=fnd,
        hna=hna,
        lnd=lnd,
        rounds_run=len(per_round),
        horizon=max_rounds,
        initial_energy_total=initial_total,
        residual_energy_total=top.residual_total(),
        total_charged=ledger.charged,
        total_clamped=ledger.clamped,
    )


@dataclass
class MultiRunReport:
    protocol: str
    config_digest: str
    seeds: list[int]
    fnd_mean: Optional[float]
    fnd_std: Optional[float]
    hna_mean: Optional[float]
    hna_std: Optional[float]
    lnd_mean: Optional[float]
    lnd_std: Optional[float]
    beyond_horizon: int
    mean_energy_per_round: list[float]
    mean_alive_per_round: list[float]
    mean_energy_before_fnd: Optional[float]
    reports: list[LifetimeReport] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "protocol", "config_digest", "seeds", "fnd_mean", "fnd_std",
            "hna_mean", "hna_std", "lnd_mean", "lnd_std", "beyond_horizon",
            "mean_energy_per_round", "mean_alive_per_round",
            "mean_energy_before_fnd",
        )}
        return d


def _mean_std(values: list[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    mean = statistics.fmean(values)
    std = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mean, std


def multi_run(
    cfg: ScenarioConfig,
    protocol_name: str,
    seeds: Sequence[int],
    max_rounds: int = 5000,
    stop_at: Optional[str] = None,
    params: Optional[BaselineParams] = None,
    keep_reports: bool = False,
) -> MultiRunReport:
    """Averages over seeds; LEACH is additionally averaged over its CH
    probability sweep, matching the reporting convention for it."""
    if not seeds:
        raise ValueError("at least one seed required")
    params = params or BaselineParams()
    p_values = params.leach_p_sweep if protocol_name == "leach" else (None,)

    all_reports: list[LifetimeReport] = []
    for seed in seeds:
        for p in p_values:
            proto = make_protocol(protocol_name, params, leach_p=p)
            all_reports.append(
                run_simulation(cfg, proto, seed, max_rounds=max_rounds,
                               stop_at=stop_at, params=params)
            )

    fnds = [float(r.fnd) for r in all_reports if r.fnd is not None]
    hnas = [float(r.hna) for r in all_reports if r.hna is not None]
    lnds = [float(r.lnd) for r in all_reports if r.lnd is not None]
    beyond = sum(
        (r.fnd is None) + (r.hna is None) + (r.lnd is None)
        for r in all_reports
    )

    max_len = max(len(r.per_round) for r in all_reports)
    energy_series, alive_series = [], []
    for k in range(max_len):
        e = [r.per_round[k].energy_spent for r in all_reports if k < len(r.per_round)]
        a = [r.per_round[k].alive_count for r in all_reports if k < len(r.per_round)]
        energy_series.append(statistics.fmean(e))
        alive_series.append(statistics.fmean(a))

    pre_fnd = []
    for r in all_reports:
        horizon = r.fnd if r.fnd is not None else len(r.per_round)
        rounds = r.per_round[:horizon]
        if rounds:
            pre_fnd.append(statistics.fmean(m.energy_spent for m in rounds))
    fnd_mean, fnd_std = _mean_std(fnds)
    hna_mean, hna_std = _mean_std(hnas)
    lnd_mean, lnd_std = _mean_std(lnds)
    return MultiRunReport(
        protocol=protocol_name,
        config_digest=cfg.digest(),
        seeds=list(seeds),
        fnd_mean=fnd_mean,
        fnd_std=fnd_std,
        hna_mean=hna_mean,
        hna_std=hna_std,
        lnd_mean=lnd_mean,
        lnd_std=lnd_std,
        beyond_horizon=beyond,
        mean_energy_per_round=energy_series,
        mean_alive_per_round=alive_series,
        mean_energy_before_fnd=statistics.fmean(pre_fnd) if pre_fnd else None,
        reports=all_reports if keep_reports else [],
    )
