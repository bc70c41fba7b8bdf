"""Config ingestion and result export.

Config files are JSON with the ExperimentSpec fields; the scenario is a
preset name or an inline object. Unknown keys are rejected so typos
fail loudly instead of silently using defaults.
"""
from __future__ import annotations

import csv
import json
from dataclasses import fields as dc_fields
from typing import Optional, Union

from .engine import LifetimeReport, MultiRunReport
from .experiments import ExperimentSpec
from .model import ConfigurationError, ScenarioConfig

CSV_HEADER = [
    "protocol", "seed_count", "round", "alive", "energy_j",
    "messages_ch", "messages_sch", "delivered", "delay_tu",
]

_SPEC_KEYS = {f.name for f in dc_fields(ExperimentSpec)}


class ConfigFileError(ConfigurationError):
    pass


def spec_from_dict(raw: dict) -> ExperimentSpec:
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise ConfigFileError(f"unknown config keys: {sorted(unknown)}")
    raw = dict(raw)
    scenario = raw.get("scenario")
    if isinstance(scenario, dict):
        try:
            raw["scenario"] = ScenarioConfig.from_dict(scenario)
        except (TypeError, KeyError) as exc:
            raise ConfigFileError(f"invalid inline scenario: {exc}") from exc
    try:
        spec = ExperimentSpec(**raw)
        spec.validate()
        spec.resolve_scenario()
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigFileError(str(exc)) from exc
    return spec


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = {f.name: getattr(spec, f.name) for f in dc_fields(ExperimentSpec)}
    if isinstance(d["scenario"], ScenarioConfig):
        d["scenario"] = d["scenario"].to_dict()
    return d


def load_config(path: str) -> ExperimentSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigFileError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigFileError(
            f"{path}:{exc.lineno}: parse error: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigFileError(f"{path}: top level must be an object")
    return spec_from_dict(raw)


def save_config(spec: ExperimentSpec, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_rows(reports: list[Union[LifetimeReport, MultiRunReport]]) -> list[dict]:
    rows = []
    for rep in reports:
        if isinstance(rep, MultiRunReport):
            seeds = len(rep.seeds)
            for r, (energy, alive) in enumerate(
                zip(rep.mean_energy_per_round, rep.mean_alive_per_round), start=1
            ):
                rows.append({
                    "protocol": rep.protocol,
                    "seed_count": seeds,
                    "round": r,
                    "alive": alive,
                    "energy_j": energy,
                    "messages_ch": "",
                    "messages_sch": "",
                    "delivered": "",
                    "delay_tu": "",
                })
        else:
            for m in rep.per_round:
                rows.append({
                    "protocol": rep.protocol,
                    "seed_count": 1,
                    "round": m.round,
                    "alive": m.alive_count,
                    "energy_j": repr(m.energy_spent),
                    "messages_ch": m.traffic.ch_phase,
                    "messages_sch": m.traffic.sch_phase,
                    "delivered": m.delivered,
                    "delay_tu": repr(m.max_source_delay),
                })
    return rows


def export(reports, fmt: str, path: str,
           config_digest: Optional[str] = None,
           seeds: Optional[list[int]] = None) -> None:
    """Write reports as CSV (fixed header) or JSON. The config digest
    and seed list are embedded so any output can be regenerated from
    its own metadata."""
    if isinstance(reports, (LifetimeReport, MultiRunReport)):
        reports = [reports]
    if fmt == "csv":
        rows = report_rows(reports)
        try:
            with open(path, "w", newline="") as fh:
                if config_digest is not None:
                    fh.write(f"# config_digest={config_digest}\n")
                if seeds is not None:
                    fh.write(f"# seeds={','.join(map(str, seeds))}\n")
                writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
                writer.writeheader()
                writer.writerows(rows)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    elif fmt == "json":
        payload = {
            "config_digest": config_digest,
            "seeds": seeds,
            "reports": [r.to_dict() for r in reports],
        }
        try:
            with open(path, "w") as fh:
                json.dump(payload, fh, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    else:
        raise ValueError(f"unknown format {fmt!r}")


def export_rows(rows: list[dict], fieldnames: list[str], fmt: str, path: str,
                config_digest: Optional[str] = None,
                seeds: Optional[list[int]] = None) -> None:
    """Export plain row records (sweep results)."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            if config_digest is not None:
                fh.write(f"# config_digest={config_digest}\n")
            if seeds is not None:
                fh.write(f"# seeds={','.join(map(str, seeds))}\n")
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"config_digest": config_digest, "seeds": seeds,
                       "rows": rows}, fh, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
