"""Built-in scenario presets.

Both ranges R_s/R_t are meters (the source tabulates them with a time
unit, which is a typo: they are ranges and the surrounding text uses
meters throughout).
"""
from __future__ import annotations

from .model import Position, ScenarioConfig
from .radio import RadioParams

TABLE_RADIO = RadioParams(
    e_el=50e-9,
    eps_fs=10e-12,
    eps_mp=0.0013e-12,
    d0=87.0,
    e_da=5e-9,
)


def scenario1(**overrides) -> ScenarioConfig:
    """300 nodes on a 1000 m field, BS at the center."""
    cfg = ScenarioConfig(
        n_nodes=300,
        field_size_m=1000.0,
        bs_position=Position(500.0, 500.0),
        radio=TABLE_RADIO,
        r_c=50.0,
        r_t=300.0,
        initial_energy=8.0,
        data_frame_bits=500 * 8,
        control_frame_bits=200,
        frames_per_round=10,
        name="scenario1",
    )
    return _apply(cfg, overrides)


def scenario2(**overrides) -> ScenarioConfig:
    """1000 nodes on a 2000 m field, BS at the center."""
    cfg = ScenarioConfig(
        n_nodes=1000,
        field_size_m=2000.0,
        bs_position=Position(1000.0, 1000.0),
        radio=TABLE_RADIO,
        r_c=50.0,
        r_t=300.0,
        initial_energy=8.0,
        data_frame_bits=500 * 8,
        control_frame_bits=200,
        frames_per_round=10,
        name="scenario2",
    )
    return _apply(cfg, overrides)


PRESETS = {"scenario1": scenario1, "scenario2": scenario2}


def _apply(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise KeyError(f"unknown scenario field {key!r}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def get_scenario(name: str, **overrides) -> ScenarioConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; presets: {sorted(PRESETS)}"
        ) from None
    return factory(**overrides)
