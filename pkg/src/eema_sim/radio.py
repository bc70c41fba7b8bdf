"""First-order radio energy model and per-node energy accounting.

Transmission cost switches between a free-space (d^2) and a multipath
(d^4) amplifier at the crossover distance d0; reception and aggregation
are distance-independent.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass


class RadioDomainError(ValueError):
    pass


@dataclass(frozen=True)
class RadioParams:
    """Radio constants. Units: J/bit, J/bit/m^2, J/bit/m^4, m, J/bit/signal."""

    e_el: float = 50e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12
    d0: float = 87.0
    e_da: float = 5e-9

    def validate(self) -> None:
        for name in ("e_el", "eps_fs", "eps_mp", "d0", "e_da"):
            if getattr(self, name) <= 0:
                raise RadioDomainError(f"{name} must be strictly positive")
        derived = crossover_distance(self)
        if abs(self.d0 - derived) / derived > 0.05:
            warnings.warn(
                f"configured d0={self.d0:.2f}m deviates more than 5% from "
                f"sqrt(eps_fs/eps_mp)={derived:.2f}m",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        return {
            "e_el": self.e_el,
            "eps_fs": self.eps_fs,
            "eps_mp": self.eps_mp,
            "d0": self.d0,
            "e_da": self.e_da,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadioParams":
        return cls(**d)


def crossover_distance(p: RadioParams) -> float:
    """Distance where the free-space and multipath branches agree."""
    return math.sqrt(p.eps_fs / p.eps_mp)


def tx_energy(p: RadioParams, l: float, d: float) -> float:
    """Energy to transmit an l-bit packet over distance d."""
    if l <= 0:
        raise RadioDomainError("packet length must be positive")
    if d < 0:
        raise RadioDomainError("distance must be non-negative")
    if d <= p.d0:
        return l * (p.e_el + p.eps_fs * d * d)
    return l * (p.e_el + p.eps_mp * d ** 4)


def rx_energy(p: RadioParams, l: float) -> float:
    """Energy to receive an l-bit packet."""
    if l <= 0:
        raise RadioDomainError("packet length must be positive")
    return l * p.e_el


def aggregate_energy(p: RadioParams, l: float, n_signals: int) -> float:
    """Energy to fuse n_signals l-bit inputs into one output frame."""
    if n_signals < 0:
        raise RadioDomainError("n_signals must be >= 0")
    return l * p.e_da * n_signals


def charge(node, amount: float) -> bool:
    """Deduct energy from a node, clamping at zero.

    A cost larger than the residual still happens as a failed action:
    the node dies and the caller must treat the packet as lost. Returns
    True if this charge killed the node.
    """
    if amount < 0:
        raise RadioDomainError("charge amount must be >= 0")
    if not node.alive:
        return False
    node.e_res -= amount
    if node.e_res <= 0:
        node.e_res = 0.0
        node.alive = False
        return True
    return False
