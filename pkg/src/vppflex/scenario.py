"""Scenario configuration and the end-to-end FOR / FXOR / FCAS runs."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import artifacts
from .der import build_default_fleet, flexible_loads_from_network, load_resources_file, validate_fleet
from .feasibility import ForResult, SolverSettings, compute_for, split_ancillary
from .flexibility import FCAS_WINDOWS, FxorRequest, classify_fcas, compute_fxor
from .geometry import hull_contains
from .grid import (CASES, DEFAULT_V_BAND, IEEE33_BASE_KV, IEEE33_BASE_MVA, Network, build_ieee33,
                   load_network_files, with_thermal_cap, with_voltage_band)
from .sampling import SampleConfig

log = logging.getLogger(__name__)

OUT_ENV = "VPPFLEX_OUT"
DEFAULT_HORIZONS = (1.0, 6.0, 15.0, 60.0, 300.0)


class ConfigError(ValueError):
    pass


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "vppflex-out"))


@dataclass
class ScenarioConfig:
    case: str | None = "I"
    bus_table: Path | None = None
    branch_table: Path | None = None
    base_mva: float = IEEE33_BASE_MVA
    base_kv: float = IEEE33_BASE_KV
    resources: Path | None = None
    flexible_loads: bool = True
    samples: int = 10_000
    seed: int = 0
    pv_correlation: float = 1.0
    diesel_on_probability: float = 0.5
    tolerance: float = 1e-8
    max_iterations: int = 50
    workers: int = 1
    voltage_band: tuple[float, float] | None = DEFAULT_V_BAND
    thermal_cap_kva: float | None = None
    dispatch: tuple[float, float] | None = None
    dispatch_sample: int | None = None
    horizons: tuple[float, ...] = DEFAULT_HORIZONS
    cell_kw: float = 10.0
    cell_kvar: float = 10.0
    out: Path = field(default_factory=default_out_dir)

    def validate(self) -> "ScenarioConfig":
        if self.bus_table or self.branch_table:
            if not (self.bus_table and self.branch_table):
                raise ConfigError("bus_table and branch_table must be given together")
            for p in (self.bus_table, self.branch_table):
                if not Path(p).is_file():
                    raise ConfigError(f"file not found: {p}")
        elif self.case is None or str(self.case).upper() not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if self.resources is not None and not Path(self.resources).is_file():
            raise ConfigError(f"file not found: {self.resources}")
        h = tuple(float(t) for t in self.horizons)
        if not h or any(b <= a for a, b in zip(h, h[1:])):
            raise ConfigError(f"horizons must ascend strictly, got {list(h)}")
        if any(t < 0 for t in h):
            raise ConfigError("horizons must be non-negative")
        if self.voltage_band is not None:
            lo, hi = self.voltage_band
            if not 0 < lo < hi:
                raise ConfigError(f"voltage band must satisfy 0 < lo < hi, got {lo},{hi}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.sample_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def sample_config(self) -> SampleConfig:
        return SampleConfig(int(self.samples), int(self.seed), float(self.pv_correlation),
                            float(self.diesel_on_probability))

    def solver(self) -> SolverSettings:
        return SolverSettings(float(self.tolerance), int(self.max_iterations))

    def echo(self) -> dict:
        doc = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            doc[f.name] = v
        return doc


_PATH_FIELDS = {"bus_table", "branch_table", "resources", "out"}
_TUPLE_FIELDS = {"voltage_band", "dispatch", "horizons"}


def config_from_mapping(data: dict, base: ScenarioConfig | None = None, relative_to: Path | None = None
                        ) -> ScenarioConfig:
    cfg = dataclasses.replace(base) if base is not None else ScenarioConfig()
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key, value in (data or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None and key in _PATH_FIELDS:
            value = Path(value)
            if relative_to is not None and not value.is_absolute():
                value = relative_to / value
        elif value is not None and key in _TUPLE_FIELDS:
            value = tuple(float(v) for v in value)
        elif key == "case" and value is not None:
            value = str(value).upper()
        setattr(cfg, key, value)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(data, relative_to=path.parent)


def build_network(cfg: ScenarioConfig) -> Network:
    if cfg.bus_table:
        net = load_network_files(cfg.bus_table, cfg.branch_table, cfg.base_mva, cfg.base_kv)
    else:
        net = build_ieee33(cfg.case)
    if cfg.voltage_band is not None:
        net = with_voltage_band(net, *cfg.voltage_band)
    if cfg.thermal_cap_kva is not None:
        net = with_thermal_cap(net, float(cfg.thermal_cap_kva))
    return net


def build_fleet(cfg: ScenarioConfig, network: Network):
    specs = load_resources_file(cfg.resources) if cfg.resources else build_default_fleet()
    if cfg.flexible_loads:
        specs = list(specs) + flexible_loads_from_network(network)
    validate_fleet(specs, network)
    return specs


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def _for_stage(cfg: ScenarioConfig):
    network = build_network(cfg)
    specs = build_fleet(cfg, network)
    t0 = time.perf_counter()
    result = compute_for(network, specs, cfg.sample_config(), cfg.solver(), workers=cfg.workers)
    elapsed = time.perf_counter() - t0
    return network, specs, result, elapsed


def _write_for(cfg: ScenarioConfig, result: ForResult, elapsed: float, out: Path) -> dict:
    artifacts.write_text(out / "for_points.csv", artifacts.for_points_csv(result))
    summary = {
        "samples": cfg.samples,
        "feasible": len(result),
        "discarded": result.discarded_count,
        "discard_tally": result.discard_tally,
        "config": cfg.echo(),
        "timing_s": {"for": round(elapsed, 3)},
        "generated_unix": round(time.time(), 3),
    }
    if len(result):
        hull = result.hull()
        artifacts.write_text(out / "hull.json", hull.to_json(
            note="convex hull approximation of the feasible region; the region itself may be non-convex",
            points=len(result)) + "\n")
        summary["hull_area_kw_kvar"] = hull.area_kw_kvar
    else:
        summary["hull_area_kw_kvar"] = 0.0
    artifacts.write_json(out / "for_summary.json", summary)
    return summary


def run_for(cfg: ScenarioConfig, out: Path | None = None) -> dict:
    cfg.validate()
    out = Path(out or cfg.out)
    _, _, result, elapsed = _for_stage(cfg)
    return _write_for(cfg, result, elapsed, out)


def _fxor_request(cfg: ScenarioConfig, result: ForResult, dispatch=None) -> FxorRequest:
    horizons = sorted(set(cfg.horizons) | set(FCAS_WINDOWS.values()))
    if cfg.dispatch_sample is not None:
        hits = np.flatnonzero(result.feasible_index == cfg.dispatch_sample)
        if not len(hits):
            raise ConfigError(f"sample {cfg.dispatch_sample} is not in the feasible set")
        pos = int(hits[0])
        return FxorRequest(pos, horizons, (float(result.p_kw[pos]), float(result.q_kvar[pos])))
    dispatch = dispatch if dispatch is not None else cfg.dispatch
    if dispatch is None:
        raise ConfigError("a dispatch point (--dispatch P,Q or --dispatch-sample N) is required")
    return FxorRequest.nearest(result, dispatch, horizons)


def _flex_stage(cfg, specs, result, out: Path, dispatch=None) -> dict:
    if len(result) == 0:
        raise ConfigError("FOR is empty; nothing to dispatch from")
    request = _fxor_request(cfg, result, dispatch)
    fxor = compute_fxor(result, specs, request)
    envelope = classify_fcas(fxor)
    requested = request.requested_dispatch or fxor.dispatch
    in_hull = hull_contains(result.hull(), requested)
    # membership columns only for the requested horizons
    shown = dataclasses.replace(fxor, horizons_s=tuple(float(t) for t in cfg.horizons))
    artifacts.write_text(out / "fxor_points.csv", artifacts.fxor_points_csv(shown))
    artifacts.write_text(out / "fxor_cells.csv", artifacts.fxor_cells_csv(fxor, cfg.cell_kw, cfg.cell_kvar))
    artifacts.write_text(out / "fcas_points.csv", artifacts.fcas_points_csv(fxor, envelope))
    summary = artifacts.fcas_summary(envelope, fxor, in_hull)
    summary["horizon_members"] = {f"{t:g}": int(fxor.member_mask(t).sum()) for t in cfg.horizons}
    split = split_ancillary(result, fxor.dispatch)
    summary["ancillary_points"] = {"raise": int(len(split.raise_index)), "lower": int(len(split.lower_index)),
                                   "zero": int(len(split.zero_index))}
    if not in_hull:
        summary["warning"] = "requested dispatch lies outside the FOR hull"
    artifacts.write_json(out / "fcas_summary.json", summary)
    return summary


def run_fxor(cfg: ScenarioConfig, out: Path | None = None, dispatch=None) -> dict:
    cfg.validate()
    out = Path(out or cfg.out)
    network, specs, result, elapsed = _for_stage(cfg)
    for_summary = _write_for(cfg, result, elapsed, out)
    fcas = _flex_stage(cfg, specs, result, out, dispatch)
    return {"for": for_summary, "fcas": fcas}


run_fcas = run_fxor


def run_case_suite(cfg: ScenarioConfig, out: Path | None = None) -> dict:
    """Cases I, II and III with one seed and one shared dispatch point.

    Without an explicit dispatch the shared point is the mean of the case I
    FOR points.
    """
    cfg.validate()
    out = Path(out or cfg.out)
    results = {}
    dispatch = cfg.dispatch
    for case in CASES:
        case_cfg = dataclasses.replace(cfg, case=case, bus_table=None, branch_table=None, dispatch_sample=None)
        network, specs, result, elapsed = _for_stage(case_cfg)
        if dispatch is None:
            dispatch = (float(result.p_kw.mean()), float(result.q_kvar.mean()))
        case_out = out / f"case_{case}"
        for_summary = _write_for(case_cfg, result, elapsed, case_out)
        fcas = _flex_stage(case_cfg, specs, result, case_out, dispatch)
        results[case] = {
            "feasible": for_summary["feasible"],
            "discarded": for_summary["discarded"],
            "discard_tally": for_summary["discard_tally"],
            "hull_area_kw_kvar": for_summary["hull_area_kw_kvar"],
            "fcas_capacities_kw": fcas["capacities_kw"],
            "dispatch_in_for_hull": fcas["dispatch_in_for_hull"],
        }
    comparison = {"seed": cfg.seed, "samples": cfg.samples, "shared_dispatch_kw_kvar": list(dispatch),
                  "cases": results}
    artifacts.write_json(out / "comparison.json", comparison)
    return comparison
