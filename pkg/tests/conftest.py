import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vppflex.der import build_default_fleet, flexible_loads_from_network  # noqa: E402
from vppflex.feasibility import compute_for  # noqa: E402
from vppflex.grid import Branch, Bus, Network, build_ieee33  # noqa: E402
from vppflex.sampling import SampleConfig  # noqa: E402

SEED = 42

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""

    def record(name, passed, detail=""):
        _criteria.append((name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def two_bus(r_ohm=0.1, x_ohm=0.1, p_load=100.0, q_load=0.0, v_min=0.5, v_max=1.5):
    buses = (Bus(1, "slack", v_min_pu=v_min, v_max_pu=v_max),
             Bus(2, "load", p_load, q_load, v_min, v_max))
    return Network(buses, (Branch(1, 2, r_ohm, x_ohm),), base_mva=1.0, base_kv=1.0)


def copper_plate(network: Network) -> Network:
    """Same buses and loads, zero-impedance closed branches, no limits."""
    buses = tuple(Bus(b.id, b.kind, b.p_load_kw, b.q_load_kvar, 1e-9, math.inf, b.flexible_fraction)
                  for b in network.buses)
    branches = tuple(Branch(br.from_bus, br.to_bus, 0.0, 0.0, math.inf, br.is_switch, br.closed)
                     for br in network.branches)
    return Network(buses, branches, network.base_mva, network.base_kv)


def case_fleet(network):
    return build_default_fleet() + flexible_loads_from_network(network)


_for_cache = {}


def for_result(case: str, count: int = 10_000, seed: int = SEED):
    key = (case, count, seed)
    if key not in _for_cache:
        net = build_ieee33(case)
        specs = case_fleet(net)
        _for_cache[key] = (net, specs, compute_for(net, specs, SampleConfig(count=count, seed=seed)))
    return _for_cache[key]


@pytest.fixture(scope="session")
def case_results():
    """Full-size Monte Carlo FOR for the three study cases (shared across modules)."""
    return {case: for_result(case) for case in ("I", "II", "III")}


@pytest.fixture(scope="session")
def small_results():
    return {case: for_result(case, count=1500) for case in ("I", "II", "III")}
