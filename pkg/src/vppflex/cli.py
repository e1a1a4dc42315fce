"""Command-line entry point: ``vppflex {for,fxor,fcas,suite,validate}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .der import FleetError
from .grid import NetworkError
from .scenario import (ConfigError, ScenarioConfig, build_fleet, build_network, load_config, run_case_suite,
                       run_fcas, run_for, run_fxor)


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number pair: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="YAML scenario file; flags override its values")
    shared.add_argument("--case", choices=["I", "II", "III"], type=str.upper)
    shared.add_argument("--bus-table", type=Path)
    shared.add_argument("--branch-table", type=Path)
    shared.add_argument("--resources", type=Path, help="resources table (default: built-in fleet)")
    shared.add_argument("--samples", type=int)
    shared.add_argument("--seed", type=int)
    shared.add_argument("--out", type=Path, help="output directory (default: $VPPFLEX_OUT or ./vppflex-out)")
    shared.add_argument("--dispatch", type=_pair, metavar="P,Q")
    shared.add_argument("--dispatch-sample", type=int, metavar="N",
                        help="use the feasible operating point of sample N as dispatch")
    shared.add_argument("--horizons", type=_floats, metavar="T1,T2,...")
    shared.add_argument("--voltage-band", type=_pair, metavar="LO,HI")
    shared.add_argument("--thermal-cap", dest="thermal_cap_kva", type=float, metavar="KVA")
    shared.add_argument("--pv-correlation", type=float)
    shared.add_argument("--diesel-on-prob", dest="diesel_on_probability", type=float)
    shared.add_argument("--workers", type=int)
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vppflex", description="VPP feasibility and flexibility regions")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("for", parents=[shared], help="feasibility operating region")
    sub.add_parser("fxor", parents=[shared], help="flexibility regions from a dispatch point")
    sub.add_parser("fcas", parents=[shared], help="FCAS raise/lower capacities from a dispatch point")
    sub.add_parser("suite", parents=[shared], help="run cases I, II and III and compare")
    sub.add_parser("validate", parents=[shared], help="check configuration, network and fleet")
    return parser


_FLAG_FIELDS = ("case", "bus_table", "branch_table", "resources", "samples", "seed", "out", "dispatch",
                "dispatch_sample", "horizons", "voltage_band", "thermal_cap_kva", "pv_correlation",
                "diesel_on_probability", "workers")


def config_from_args(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {k: getattr(args, k) for k in _FLAG_FIELDS if getattr(args, k, None) is not None}
    if "bus_table" in overrides or "branch_table" in overrides:
        overrides.setdefault("case", None)
    return dataclasses.replace(cfg, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args).validate()
        if args.command == "validate":
            network = build_network(cfg)
            specs = build_fleet(cfg, network)
            doc = {"buses": len(network.buses), "branches": len(network.branches),
                   "resources": len(specs), "total_load_kw": network.total_load_kw,
                   "total_load_kvar": network.total_load_kvar}
        elif args.command == "for":
            doc = run_for(cfg)
        elif args.command == "fxor":
            doc = run_fxor(cfg)["fcas"]
        elif args.command == "fcas":
            doc = run_fcas(cfg)["fcas"]["capacities_kw"]
        else:
            doc = run_case_suite(cfg)
    except (ConfigError, NetworkError, FleetError, FileNotFoundError) as exc:
        print(f"vppflex: error: {exc}", file=sys.stderr)
        return 1
    if args.command == "for":
        doc = {k: doc[k] for k in ("samples", "feasible", "discarded", "discard_tally", "hull_area_kw_kvar")}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
