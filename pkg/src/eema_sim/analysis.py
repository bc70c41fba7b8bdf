"""Closed-form calculators for expected cluster structure, head energy
rates, range bounds, message counts, and routing delay.

These serve both as standalone estimates and as oracles the simulator
is checked against. Expected counts come from uniform-density circle
areas, so they are reals; comparisons against integer simulated counts
floor them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .radio import RadioParams, rx_energy, tx_energy


@dataclass(frozen=True)
class AnalyticalInputs:
    n: int
    m_field: float
    r_c: float
    r_s: float
    r_t: float
    l: int
    radio: RadioParams

    def validate(self) -> None:
        if min(self.n, self.m_field, self.r_c, self.r_s, self.r_t, self.l) <= 0:
            raise ValueError("all analytical inputs must be positive")
        if self.r_s < self.r_c:
            raise ValueError("r_s must be >= r_c")


def expected_density(n: int, m_field: float) -> float:
    """Nodes per square meter of a uniform deployment."""
    if n <= 0 or m_field <= 0:
        raise ValueError("n and m_field must be positive")
    return n / (m_field * m_field)


def expected_cluster_members(lam: float, r_c: float) -> float:
    """Expected node count inside one cluster disc."""
    if lam < 0 or r_c < 0:
        raise ValueError("inputs must be non-negative")
    return lam * math.pi * r_c * r_c


def expected_cluster_count(m_field: float, r_c: float) -> float:
    """Field area over cluster disc area."""
    if m_field <= 0 or r_c <= 0:
        raise ValueError("inputs must be positive")
    return (m_field * m_field) / (math.pi * r_c * r_c)


def expected_supercluster_count(m_field: float, r_s: float) -> float:
    """Field area over super-cluster disc area."""
    return expected_cluster_count(m_field, r_s)


def expected_supercluster_members(r_s: float, r_c: float) -> float:
    """Cluster heads per super-cluster: the ratio of disc areas."""
    if r_c <= 0 or r_s < r_c:
        raise ValueError("require r_s >= r_c > 0")
    return (r_s * r_s) / (r_c * r_c)


def head_energy_rate(radio: RadioParams, l: int, n_members: float,
                     d_tx: float) -> float:
    """Per-frame energy of a head serving n_members (itself included):
    receive the members' frames, fuse all signals, forward one frame."""
    if n_members < 1:
        raise ValueError("a head serves at least itself")
    return (
        rx_energy(radio, l) * (n_members - 1)
        + l * radio.e_da * n_members
        + tx_energy(radio, l, d_tx)
    )


def ch_energy_rate(radio: RadioParams, l: int, n_c: float, d_tx: float) -> float:
    return head_energy_rate(radio, l, n_c, d_tx)


def sch_energy_rate(radio: RadioParams, l: int, n_s: float, d_tx: float) -> float:
    return head_energy_rate(radio, l, n_s, d_tx)


def rs_bounds(r_c: float) -> tuple[float, float]:
    """Connectivity-safe super-cluster range interval [r_c, 6*r_c)."""
    if r_c <= 0:
        raise ValueError("r_c must be positive")
    return (r_c, 6.0 * r_c)


def rs_valid(r_s: float, r_c: float) -> bool:
    lo, hi = rs_bounds(r_c)
    return lo <= r_s < hi


def sch_message_count(k_s: int, k_c: int, k_l: int) -> int:
    """Messages spent on super-cluster-head election: one advertisement
    per SCH plus a join from every head not in the last layer."""
    if min(k_s, k_c, k_l) < 0:
        raise ValueError("counts must be >= 0")
    if k_l > k_s + k_c:
        raise ValueError("last-layer heads cannot exceed all heads")
    return 2 * k_s + k_c - k_l


def closed_form_delay(m_nodes: int, t_l: float, t_p: float,
                      predetermined: bool) -> float:
    """Delay of an m-node uniform-link route: (m-1) links plus (m-2)
    processing stops, the latter dropped on a predetermined route."""
    if m_nodes < 2:
        raise ValueError("a route needs at least two nodes")
    d = (m_nodes - 1) * t_l
    if not predetermined:
        d += (m_nodes - 2) * t_p
    return d


def summary_table(inputs: AnalyticalInputs,
                  d_tx_ch: float = None,
                  d_tx_sch: float = None) -> dict[str, float]:
    """All the closed-form quantities for one configuration."""
    inputs.validate()
    lam = expected_density(inputs.n, inputs.m_field)
    n_c = expected_cluster_members(lam, inputs.r_c)
    k_c = expected_cluster_count(inputs.m_field, inputs.r_c)
    k_s = expected_supercluster_count(inputs.m_field, inputs.r_s)
    n_s = expected_supercluster_members(inputs.r_s, inputs.r_c)
    d_ch = inputs.r_s if d_tx_ch is None else d_tx_ch
    d_sch = inputs.r_s if d_tx_sch is None else d_tx_sch
    e_ch = ch_energy_rate(inputs.radio, inputs.l, max(n_c, 1.0), d_ch)
    e_sch = sch_energy_rate(inputs.radio, inputs.l, max(n_s, 1.0), d_sch)
    lo, hi = rs_bounds(inputs.r_c)
    return {
        "density_per_m2": lam,
        "cluster_members": n_c,
        "cluster_count": k_c,
        "supercluster_count": k_s,
        "supercluster_members": n_s,
        "ch_energy_rate_j": e_ch,
        "sch_energy_rate_j": e_sch,
        "ch_to_sch_energy_ratio": e_ch / e_sch,
        "rs_lower_m": lo,
        "rs_upper_m": hi,
        "sch_messages_example": float(
            sch_message_count(round(k_s), round(k_c), max(1, round(k_s)))
        ),
    }
