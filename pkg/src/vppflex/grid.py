"""Distribution network model, table I/O and the modified IEEE 33-bus feeder."""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

SLACK = "slack"
LOAD = "load"

BUS_COLUMNS = ("id", "kind", "p_load_kw", "q_load_kvar", "v_min_pu", "v_max_pu", "flexible_fraction")
BRANCH_COLUMNS = ("from", "to", "r_ohm", "x_ohm", "thermal_limit_kva", "is_switch", "closed")


class NetworkError(ValueError):
    """Raised for malformed tables or networks that violate a structural invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = LOAD
    p_load_kw: float = 0.0
    q_load_kvar: float = 0.0
    v_min_pu: float = 0.95
    v_max_pu: float = 1.05
    flexible_fraction: float = 0.0

    def __post_init__(self):
        if self.id < 1:
            raise NetworkError(f"bus {self.id}: id must be >= 1")
        if self.kind not in (SLACK, LOAD):
            raise NetworkError(f"bus {self.id}: unknown kind {self.kind!r}")
        if self.p_load_kw < 0:
            raise NetworkError(f"bus {self.id}: negative active load {self.p_load_kw}")
        if not (0 < self.v_min_pu < self.v_max_pu):
            raise NetworkError(
                f"bus {self.id}: voltage band must satisfy 0 < v_min < v_max, "
                f"got {self.v_min_pu}..{self.v_max_pu}"
            )
        if not 0.0 <= self.flexible_fraction <= 1.0:
            raise NetworkError(f"bus {self.id}: flexible_fraction {self.flexible_fraction} outside [0, 1]")


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r_ohm: float
    x_ohm: float
    thermal_limit_kva: float = math.inf
    is_switch: bool = False
    closed: bool = True

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError(f"branch ({self.from_bus},{self.to_bus}): self-loop")
        if self.r_ohm < 0:
            raise NetworkError(f"branch ({self.from_bus},{self.to_bus}): negative resistance")
        if not self.thermal_limit_kva > 0:
            raise NetworkError(f"branch ({self.from_bus},{self.to_bus}): thermal limit must be > 0")
        if not self.is_switch and not self.closed:
            raise NetworkError(f"branch ({self.from_bus},{self.to_bus}): only switches may be open")

    @property
    def key(self) -> tuple[int, int]:
        return (self.from_bus, self.to_bus)

    def connects(self, a: int, b: int) -> bool:
        return {self.from_bus, self.to_bus} == {a, b}


@dataclass(frozen=True)
class Network:
    """Immutable network. Bus order is the order given; index lookups go through ``bus_index``."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0
    base_kv: float = 12.66
    slack_bus: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.base_mva <= 0 or self.base_kv <= 0:
            raise NetworkError("base_mva and base_kv must be positive")
        ids = [b.id for b in self.buses]
        seen = set()
        for i in ids:
            if i in seen:
                raise NetworkError(f"duplicate bus id {i}")
            seen.add(i)
        slacks = [b.id for b in self.buses if b.kind == SLACK]
        if len(slacks) != 1:
            raise NetworkError(f"network needs exactly one slack bus, found {len(slacks)}: {slacks}")
        if self.slack_bus == 0:
            object.__setattr__(self, "slack_bus", slacks[0])
        elif self.slack_bus != slacks[0]:
            raise NetworkError(f"slack_bus {self.slack_bus} is not the bus of kind slack ({slacks[0]})")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in seen:
                    raise NetworkError(f"branch ({br.from_bus},{br.to_bus}) references unknown bus {end}")
        unreached = _unreached_buses(ids, self.branches)
        if unreached:
            raise NetworkError(f"network is disconnected; unreachable buses: {sorted(unreached)}")

    @property
    def z_base_ohm(self) -> float:
        return self.base_kv**2 / self.base_mva

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def find_branch(self, a: int, b: int) -> Branch:
        for br in self.branches:
            if br.connects(a, b):
                return br
        raise NetworkError(f"no branch between buses {a} and {b}")

    @property
    def total_load_kw(self) -> float:
        return sum(b.p_load_kw for b in self.buses)

    @property
    def total_load_kvar(self) -> float:
        return sum(b.q_load_kvar for b in self.buses)


def _unreached_buses(ids: Iterable[int], branches: Iterable[Branch]) -> set[int]:
    ids = list(ids)
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for br in branches:
        if br.closed:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    if not ids:
        return set()
    seen = {ids[0]}
    queue = deque([ids[0]])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return set(ids) - seen


def apply_switch_state(network: Network, branch: tuple[int, int], closed: bool) -> Network:
    """Return a copy of ``network`` with the switch between ``branch`` buses set open/closed."""
    a, b = branch
    target = network.find_branch(a, b)
    if not target.is_switch:
        raise NetworkError(f"branch ({a},{b}) is not a switch")
    branches = [replace(br, closed=closed) if br is target else br for br in network.branches]
    return replace(network, branches=tuple(branches))


def with_voltage_band(network: Network, v_min: float, v_max: float) -> Network:
    buses = [b if b.kind == SLACK else replace(b, v_min_pu=v_min, v_max_pu=v_max) for b in network.buses]
    return replace(network, buses=tuple(buses))


def with_thermal_cap(network: Network, kva: float) -> Network:
    """Impose a uniform thermal rating on every branch (the tighter of cap and existing)."""
    branches = [replace(br, thermal_limit_kva=min(br.thermal_limit_kva, kva)) for br in network.branches]
    return replace(network, branches=tuple(branches))


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y", "t"):
        return True
    if t in ("0", "false", "no", "n", "f"):
        return False
    raise NetworkError(f"{where}: cannot parse boolean {text!r}")


def _fmt(x: float) -> str:
    # empty field = unlimited (thermal ratings)
    if math.isinf(x):
        return ""
    return repr(float(x))


def _rows(text: str, columns: tuple[str, ...], what: str) -> list[tuple[int, dict[str, str]]]:
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    if header != columns:
        raise NetworkError(f"{what} table header must be {','.join(columns)}; got {','.join(header)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise NetworkError(f"{what} table line {lineno}: wrong number of fields")
        rows.append((lineno, {k.strip(): v.strip() for k, v in row.items()}))
    return rows


def parse_buses(text: str) -> list[Bus]:
    buses = []
    for lineno, row in _rows(text, BUS_COLUMNS, "bus"):
        where = f"bus table line {lineno}"
        try:
            buses.append(Bus(
                id=int(row["id"]),
                kind=row["kind"],
                p_load_kw=float(row["p_load_kw"]),
                q_load_kvar=float(row["q_load_kvar"]),
                v_min_pu=float(row["v_min_pu"]),
                v_max_pu=float(row["v_max_pu"]),
                flexible_fraction=float(row["flexible_fraction"] or 0.0),
            ))
        except NetworkError as exc:
            raise NetworkError(f"{where}: {exc}") from None
        except ValueError as exc:
            raise NetworkError(f"{where}: {exc}") from None
    return buses


def parse_branches(text: str) -> list[Branch]:
    branches = []
    for lineno, row in _rows(text, BRANCH_COLUMNS, "branch"):
        where = f"branch table line {lineno}"
        try:
            limit = row["thermal_limit_kva"]
            branches.append(Branch(
                from_bus=int(row["from"]),
                to_bus=int(row["to"]),
                r_ohm=float(row["r_ohm"]),
                x_ohm=float(row["x_ohm"]),
                thermal_limit_kva=float(limit) if limit else math.inf,
                is_switch=_parse_bool(row["is_switch"], where),
                closed=_parse_bool(row["closed"], where),
            ))
        except NetworkError as exc:
            raise NetworkError(f"{where}: {exc}") from None
        except ValueError as exc:
            raise NetworkError(f"{where}: {exc}") from None
    return branches


def load_network(bus_table: str, branch_table: str, base_mva: float = 100.0, base_kv: float = 12.66) -> Network:
    """Build a validated :class:`Network` from the text of a bus table and a branch table."""
    return Network(parse_buses(bus_table), parse_branches(branch_table), base_mva=base_mva, base_kv=base_kv)


def load_network_files(bus_path, branch_path, base_mva: float = 100.0, base_kv: float = 12.66) -> Network:
    texts = []
    for p in (bus_path, branch_path):
        p = Path(p)
        if not p.is_file():
            raise FileNotFoundError(f"network table not found: {p}")
        texts.append(p.read_text())
    return load_network(*texts, base_mva=base_mva, base_kv=base_kv)


def bus_table(network: Network) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(BUS_COLUMNS)
    for b in network.buses:
        w.writerow([b.id, b.kind, repr(float(b.p_load_kw)), repr(float(b.q_load_kvar)), repr(float(b.v_min_pu)),
                    repr(float(b.v_max_pu)), repr(float(b.flexible_fraction))])
    return out.getvalue()


def branch_table(network: Network) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(BRANCH_COLUMNS)
    for br in network.branches:
        w.writerow([br.from_bus, br.to_bus, _fmt(br.r_ohm), _fmt(br.x_ohm), _fmt(br.thermal_limit_kva),
                    str(br.is_switch).lower(), str(br.closed).lower()])
    return out.getvalue()


# ---------------------------------------------------------------------------
# modified IEEE 33-bus feeder
# ---------------------------------------------------------------------------

# (from, to, r_ohm, x_ohm) -- Baran & Wu (1989) feeder, radial part
IEEE33_LINES = (
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
)

# the two tie switches toggled between the study cases
IEEE33_TIES = ((8, 21, 2.0, 2.0), (12, 22, 2.0, 2.0))

# bus -> (kW, kvar), Baran & Wu nominal loads (3715 kW, 2300 kvar in total)
IEEE33_LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20), 7: (200, 100),
    8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30), 12: (60, 35), 13: (60, 35),
    14: (120, 80), 15: (60, 10), 16: (60, 20), 17: (60, 20), 18: (90, 40), 19: (90, 40),
    20: (90, 40), 21: (90, 40), 22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200),
    26: (60, 25), 27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}

IEEE33_TOTAL_P_KW = 3710.0
IEEE33_TOTAL_Q_KVAR = 1760.0
IEEE33_BASE_MVA = 100.0
IEEE33_BASE_KV = 12.66
CASE_II_FLEXIBLE_FRACTION = 0.05

CASES = ("I", "II", "III")
# see README: at 0.95 pu the unsupported feeder leaves almost no feasible samples
DEFAULT_V_BAND = (0.93, 1.05)


def build_ieee33(case: str = "I", v_min: float = DEFAULT_V_BAND[0], v_max: float = DEFAULT_V_BAND[1]) -> Network:
    """Modified IEEE 33-bus feeder for study case I, II or III.

    Loads are rescaled uniformly so the feeder draws 3.71 MW / 1.76 MVAr in
    total. Cases I and II keep the 8-21 and 12-22 ties closed; case III opens
    them. Case II marks 5 % of every bus load as flexible.
    """
    case = str(case).upper()
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    p_scale = IEEE33_TOTAL_P_KW / sum(p for p, _ in IEEE33_LOADS.values())
    q_scale = IEEE33_TOTAL_Q_KVAR / sum(q for _, q in IEEE33_LOADS.values())
    flex = CASE_II_FLEXIBLE_FRACTION if case == "II" else 0.0

    buses = [Bus(1, SLACK, 0.0, 0.0, v_min, v_max, 0.0)]
    for bid in range(2, 34):
        p, q = IEEE33_LOADS[bid]
        buses.append(Bus(bid, LOAD, p * p_scale, q * q_scale, v_min, v_max, flex))

    ties_closed = case != "III"
    branches = [Branch(f, t, r, x) for f, t, r, x in IEEE33_LINES]
    branches += [Branch(f, t, r, x, is_switch=True, closed=ties_closed) for f, t, r, x in IEEE33_TIES]
    return Network(tuple(buses), tuple(branches), base_mva=IEEE33_BASE_MVA, base_kv=IEEE33_BASE_KV)


DATA_DIR = Path(__file__).parent / "data"


def shipped_ieee33_paths(case: str = "I") -> tuple[Path, Path]:
    """Paths of the packaged bus/branch tables for ``case``."""
    case = str(case).upper()
    return DATA_DIR / f"ieee33_case{case}_buses.csv", DATA_DIR / f"ieee33_case{case}_branches.csv"
