"""Deterministic simulator and analysis toolkit for hierarchical
multi-layered clustering in large-scale wireless sensor networks."""

from .model import (
    BS,
    ConfigurationError,
    EmptyNetworkError,
    NodeState,
    Position,
    Role,
    ScenarioConfig,
    Topology,
    UnknownNodeError,
    deploy,
    distance,
)
from .radio import (
    RadioParams,
    aggregate_energy,
    charge,
    crossover_distance,
    rx_energy,
    tx_energy,
)
from .eema import (
    AggregationTree,
    ControlTraffic,
    build_hierarchy,
    ch_score,
    elect_cluster_heads,
    elect_super_cluster_heads,
    layer_range,
    sch_weight,
)
from .engine import (
    DelayParams,
    LifetimeReport,
    MultiRunReport,
    PROTOCOLS,
    RoundMetrics,
    lifetime_metrics,
    make_protocol,
    multi_run,
    path_delay,
    run_simulation,
)
from .presets import get_scenario, scenario1, scenario2

__version__ = "0.1.0"
