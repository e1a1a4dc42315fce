"""DER capability regions, activation/ramp timing and the built-in VPP fleet."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .grid import Network

INVERTER_TIME_RANGE = (0.1, 0.3)
TOL = 1e-9


class FleetError(ValueError):
    pass


def _check_inverter_times(rid, activation_s, ramp_s):
    lo, hi = INVERTER_TIME_RANGE
    for name, val in (("activation_s", activation_s), ("ramp_full_range_s", ramp_s)):
        if not lo <= val <= hi:
            raise FleetError(f"resource {rid}: inverter {name}={val} outside [{lo}, {hi}] s")


@dataclass(frozen=True)
class DieselGen:
    id: str
    bus: int
    p_min_kw: float
    p_max_kw: float
    q_min_kvar: float
    q_max_kvar: float
    activation_s: float
    ramp_full_range_s: float

    kind = "diesel"
    has_off_state = True

    def __post_init__(self):
        if not 0 < self.p_min_kw < self.p_max_kw:
            raise FleetError(f"resource {self.id}: need 0 < p_min < p_max")
        if not self.q_min_kvar < self.q_max_kvar:
            raise FleetError(f"resource {self.id}: need q_min < q_max")
        if self.activation_s <= 0 or self.ramp_full_range_s <= 0:
            raise FleetError(f"resource {self.id}: activation and ramp times must be positive")

    @property
    def p_range_kw(self):
        return self.p_max_kw - self.p_min_kw

    @property
    def q_range_kvar(self):
        return self.q_max_kvar - self.q_min_kvar

    @property
    def start_point(self):
        return (self.p_min_kw, 0.0)

    @property
    def p_bounds(self):
        return (self.p_min_kw, self.p_max_kw)


@dataclass(frozen=True)
class PvUnit:
    """Curtailable PV inverter.

    Output is bounded below by ``min_output_fraction`` of rating and above by
    the available (irradiance-limited) power; reactive power obeys the power
    factor limit and the inverter kVA rating. With no usable irradiance the
    inverter idles at (0, 0).
    """

    id: str
    bus: int
    p_rated_kw: float
    p_available_kw: float | None = None
    min_output_fraction: float = 0.10
    pf_limit: float = 0.90
    s_rated_kva: float | None = None
    activation_s: float = 0.1
    ramp_full_range_s: float = 0.2

    kind = "pv"
    has_off_state = True

    def __post_init__(self):
        if self.p_rated_kw <= 0:
            raise FleetError(f"resource {self.id}: p_rated must be positive")
        if self.p_available_kw is None:
            object.__setattr__(self, "p_available_kw", self.p_rated_kw)
        if self.s_rated_kva is None:
            object.__setattr__(self, "s_rated_kva", self.p_rated_kw)
        if not 0 <= self.p_available_kw <= self.p_rated_kw:
            raise FleetError(f"resource {self.id}: p_available must lie in [0, p_rated]")
        if not 0 < self.pf_limit <= 1:
            raise FleetError(f"resource {self.id}: pf_limit must lie in (0, 1]")
        if not 0 <= self.min_output_fraction < 1:
            raise FleetError(f"resource {self.id}: min_output_fraction must lie in [0, 1)")
        _check_inverter_times(self.id, self.activation_s, self.ramp_full_range_s)

    @property
    def q_per_p(self):
        return math.tan(math.acos(self.pf_limit))

    @property
    def p_min_kw(self):
        return self.min_output_fraction * self.p_rated_kw

    @property
    def q_cap_kvar(self):
        """Largest |Q| anywhere in the rated region."""
        k, s = self.q_per_p, self.s_rated_kva
        p_star = min(self.p_rated_kw, s / math.sqrt(1 + k * k))
        return min(p_star * k, s)

    @property
    def p_range_kw(self):
        return self.p_rated_kw

    @property
    def q_range_kvar(self):
        return 2 * self.q_cap_kvar

    @property
    def start_point(self):
        return (0.0, 0.0)

    @property
    def p_bounds(self):
        return (self.p_min_kw, self.p_available_kw)

    def q_limit(self, p):
        return np.minimum(p * self.q_per_p, np.sqrt(np.maximum(self.s_rated_kva**2 - p * p, 0.0)))


@dataclass(frozen=True)
class BatteryUnit:
    id: str
    bus: int
    p_charge_max_kw: float
    p_discharge_max_kw: float
    s_rated_kva: float
    activation_s: float = 0.1
    ramp_full_range_s: float = 0.3

    kind = "battery"
    has_off_state = False

    def __post_init__(self):
        if self.p_charge_max_kw < 0 or self.p_discharge_max_kw < 0 or self.s_rated_kva <= 0:
            raise FleetError(f"resource {self.id}: battery limits must be non-negative, s_rated positive")
        _check_inverter_times(self.id, self.activation_s, self.ramp_full_range_s)

    @property
    def p_range_kw(self):
        return self.p_charge_max_kw + self.p_discharge_max_kw

    @property
    def q_range_kvar(self):
        return 2 * self.s_rated_kva

    @property
    def p_bounds(self):
        return (max(-self.p_charge_max_kw, -self.s_rated_kva), min(self.p_discharge_max_kw, self.s_rated_kva))


@dataclass(frozen=True)
class FlexibleLoad:
    """Sheddable share of a bus load; shedding keeps the load's power factor.

    A positive point is load removed, i.e. an injection increase at the bus.
    """

    id: str
    bus: int
    p_shed_max_kw: float
    q_shed_max_kvar: float
    activation_s: float = 0.1
    ramp_full_range_s: float = 0.2

    kind = "flexible_load"
    has_off_state = False

    def __post_init__(self):
        if self.p_shed_max_kw < 0:
            raise FleetError(f"resource {self.id}: p_shed_max must be non-negative")
        _check_inverter_times(self.id, self.activation_s, self.ramp_full_range_s)

    @property
    def p_range_kw(self):
        return self.p_shed_max_kw

    @property
    def q_range_kvar(self):
        return abs(self.q_shed_max_kvar)

    @property
    def p_bounds(self):
        return (0.0, self.p_shed_max_kw)


ResourceSpec = Union[DieselGen, PvUnit, BatteryUnit, FlexibleLoad]
RESOURCE_TYPES = {cls.kind: cls for cls in (DieselGen, PvUnit, BatteryUnit, FlexibleLoad)}


def is_off(spec: ResourceSpec, p: float, q: float) -> bool:
    return spec.has_off_state and p == 0.0 and q == 0.0


def capability_contains(spec: ResourceSpec, p_kw: float, q_kvar: float, tol: float = TOL) -> bool:
    """True iff (p, q) lies inside the resource's assumed PQ capability region."""
    p, q = float(p_kw), float(q_kvar)
    if not (math.isfinite(p) and math.isfinite(q)):
        return False
    if isinstance(spec, DieselGen):
        if p == 0.0 and q == 0.0:
            return True
        return (spec.p_min_kw - tol <= p <= spec.p_max_kw + tol
                and spec.q_min_kvar - tol <= q <= spec.q_max_kvar + tol)
    if isinstance(spec, PvUnit):
        if p == 0.0 and q == 0.0:
            return True
        if not spec.p_min_kw - tol <= p <= spec.p_available_kw + tol:
            return False
        if abs(q) > p * spec.q_per_p + tol:
            return False
        return p * p + q * q <= spec.s_rated_kva**2 * (1 + tol) + tol
    if isinstance(spec, BatteryUnit):
        if not -spec.p_charge_max_kw - tol <= p <= spec.p_discharge_max_kw + tol:
            return False
        return p * p + q * q <= spec.s_rated_kva**2 * (1 + tol) + tol
    if isinstance(spec, FlexibleLoad):
        if spec.p_shed_max_kw == 0:
            f = 0.0 if spec.q_shed_max_kvar == 0 else q / spec.q_shed_max_kvar
        else:
            f = p / spec.p_shed_max_kw
        if not -tol <= f <= 1 + tol:
            return False
        return (abs(p - f * spec.p_shed_max_kw) <= tol * max(1.0, spec.p_shed_max_kw)
                and abs(q - f * spec.q_shed_max_kvar) <= tol * max(1.0, abs(spec.q_shed_max_kvar)))
    raise TypeError(f"unknown resource spec {type(spec).__name__}")


def _ramp_time(spec, p0, q0, p1, q1):
    t = 0.0
    if p0 != p1 and spec.p_range_kw > 0:
        t = abs(p1 - p0) * spec.ramp_full_range_s / spec.p_range_kw
    if q0 != q1 and spec.q_range_kvar > 0:
        t = max(t, abs(q1 - q0) * spec.ramp_full_range_s / spec.q_range_kvar)
    return t


def transition_time(spec: ResourceSpec, source: tuple[float, float], target: tuple[float, float],
                    check: bool = True) -> float:
    """Seconds for one resource to move from ``source`` to ``target`` (both (p, q)).

    Starting from OFF costs the activation time and delivers the unit at its
    synchronisation point, after which the ramp rates apply. Shutting down
    costs the ramp back to that point; opening the breaker is instantaneous.
    """
    p0, q0 = source[0], source[1]
    p1, q1 = target[0], target[1]
    if check:
        for p, q in ((p0, q0), (p1, q1)):
            if not capability_contains(spec, p, q):
                raise FleetError(f"resource {spec.id}: point ({p}, {q}) outside capability")
    if p0 == p1 and q0 == q1:
        return 0.0
    off0, off1 = is_off(spec, p0, q0), is_off(spec, p1, q1)
    if off0 and off1:
        return 0.0
    if off0:
        sp, sq = spec.start_point
        return spec.activation_s + _ramp_time(spec, sp, sq, p1, q1)
    if off1:
        sp, sq = spec.start_point
        return _ramp_time(spec, p0, q0, sp, sq)
    return _ramp_time(spec, p0, q0, p1, q1)


@dataclass(frozen=True)
class OperatingPoint:
    """One (P, Q) set-point per resource, in fleet order."""

    p_kw: np.ndarray
    q_kvar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_kw", np.asarray(self.p_kw, dtype=float))
        object.__setattr__(self, "q_kvar", np.asarray(self.q_kvar, dtype=float))
        if self.p_kw.shape != self.q_kvar.shape or self.p_kw.ndim != 1:
            raise FleetError("operating point P and Q must be 1-D arrays of equal length")

    def __len__(self):
        return len(self.p_kw)

    def status(self, specs: Sequence[ResourceSpec]) -> list[bool]:
        """On/off flag per resource (False only for units sitting in their OFF state)."""
        return [not is_off(s, p, q) for s, p, q in zip(specs, self.p_kw, self.q_kvar)]

    def __eq__(self, other):
        if not isinstance(other, OperatingPoint):
            return NotImplemented
        return np.array_equal(self.p_kw, other.p_kw) and np.array_equal(self.q_kvar, other.q_kvar)

    __hash__ = None


def point_is_valid(specs: Sequence[ResourceSpec], point: OperatingPoint) -> bool:
    return len(point) == len(specs) and all(
        capability_contains(s, p, q) for s, p, q in zip(specs, point.p_kw, point.q_kvar))


def fleet_transition_time(specs: Sequence[ResourceSpec], source: OperatingPoint, target: OperatingPoint,
                          check: bool = True) -> float:
    """Resources move simultaneously, so the fleet needs the slowest one's time."""
    if not (len(specs) == len(source) == len(target)):
        raise FleetError(f"dimension mismatch: {len(specs)} resources, points of length {len(source)}/{len(target)}")
    t = 0.0
    for k, spec in enumerate(specs):
        t = max(t, transition_time(spec, (source.p_kw[k], source.q_kvar[k]),
                                   (target.p_kw[k], target.q_kvar[k]), check=check))
    return t


def fleet_transition_times(specs: Sequence[ResourceSpec], source: OperatingPoint,
                           p_kw: np.ndarray, q_kvar: np.ndarray) -> np.ndarray:
    """Vectorised :func:`fleet_transition_time` from one source to many targets (rows of p/q)."""
    p_kw = np.asarray(p_kw, dtype=float)
    q_kvar = np.asarray(q_kvar, dtype=float)
    n, r = p_kw.shape
    if r != len(specs) or len(source) != r:
        raise FleetError(f"dimension mismatch: {len(specs)} resources, targets with {r} columns")
    out = np.zeros(n)
    for k, spec in enumerate(specs):
        p0, q0 = float(source.p_kw[k]), float(source.q_kvar[k])
        p1, q1 = p_kw[:, k], q_kvar[:, k]

        def ramp(pa, qa, pb, qb):
            t = np.zeros(np.broadcast(pa, pb).shape)
            if spec.p_range_kw > 0:
                t = np.abs(pb - pa) * (spec.ramp_full_range_s / spec.p_range_kw)
            if spec.q_range_kvar > 0:
                t = np.maximum(t, np.abs(qb - qa) * (spec.ramp_full_range_s / spec.q_range_kvar))
            return t

        same = (p1 == p0) & (q1 == q0)
        if spec.has_off_state:
            off1 = (p1 == 0.0) & (q1 == 0.0)
            if is_off(spec, p0, q0):
                sp, sq = spec.start_point
                t = np.where(off1, 0.0, spec.activation_s + ramp(sp, sq, p1, q1))
            else:
                sp, sq = spec.start_point
                t = np.where(off1, ramp(p0, q0, sp, sq), ramp(p0, q0, p1, q1))
        else:
            t = ramp(p0, q0, p1, q1)
        t = np.where(same, 0.0, t)
        np.maximum(out, t, out=out)
    return out


# ---------------------------------------------------------------------------
# built-in fleet
# ---------------------------------------------------------------------------

# bus: (p_min, p_max, q_min, q_max, activation_s, ramp_s)
DIESEL_TABLE = {
    8: (15.0, 100.0, -40.0, 60.0, 15.0, 20.0),
    30: (15.0, 100.0, -40.0, 60.0, 15.0, 20.0),
    18: (150.0, 500.0, -200.0, 300.0, 40.0, 60.0),
    25: (60.0, 300.0, -120.0, 180.0, 25.0, 45.0),
}
DIESEL_BUSES = (8, 18, 25, 30)
PV_ONLY_BUSES = (13, 17, 22, 28, 33)
PV_ONLY_SIZES_KW = (28.0, 30.0, 32.0, 34.0, 38.0)
PV_BATTERY_BUSES = (6, 10, 15, 24, 31)
PV_BATTERY_PV_KW = 38.0
BATTERY_KW = 20.0


def build_default_fleet(pv_only_buses: Sequence[int] = PV_ONLY_BUSES,
                        pv_battery_buses: Sequence[int] = PV_BATTERY_BUSES) -> list[ResourceSpec]:
    """Four diesels, five rooftop-PV aggregates and five PV+battery households."""
    if len(pv_only_buses) != 5 or len(pv_battery_buses) != 5:
        raise FleetError("the built-in fleet needs exactly five PV buses and five PV+battery buses")
    fleet: list[ResourceSpec] = []
    for bus in DIESEL_BUSES:
        fleet.append(DieselGen(f"diesel_{bus}", bus, *DIESEL_TABLE[bus]))
    for bus, size in zip(pv_only_buses, PV_ONLY_SIZES_KW):
        fleet.append(PvUnit(f"pv_{bus}", bus, size))
    for bus in pv_battery_buses:
        fleet.append(PvUnit(f"pvb_pv_{bus}", bus, PV_BATTERY_PV_KW))
    for bus in pv_battery_buses:
        fleet.append(BatteryUnit(f"pvb_bat_{bus}", bus, BATTERY_KW, BATTERY_KW, BATTERY_KW))
    return fleet


def flexible_loads_from_network(network: Network) -> list[FlexibleLoad]:
    """One sheddable load per bus with a non-zero flexible fraction."""
    out = []
    for b in network.buses:
        if b.flexible_fraction > 0 and (b.p_load_kw > 0 or b.q_load_kvar != 0):
            out.append(FlexibleLoad(f"flex_{b.id}", b.id, b.flexible_fraction * b.p_load_kw,
                                    b.flexible_fraction * b.q_load_kvar))
    return out


def validate_fleet(specs: Sequence[ResourceSpec], network: Network) -> None:
    if not specs:
        raise FleetError("fleet is empty")
    ids = set()
    buses = set(network.bus_ids)
    for s in specs:
        if s.id in ids:
            raise FleetError(f"duplicate resource id {s.id}")
        ids.add(s.id)
        if s.bus not in buses:
            raise FleetError(f"resource {s.id} sits on unknown bus {s.bus}")


# ---------------------------------------------------------------------------
# resources table: id,kind,bus,params  with params as key=value;key=value
# ---------------------------------------------------------------------------

RESOURCE_COLUMNS = ("id", "kind", "bus", "params")


def resources_table(specs: Sequence[ResourceSpec]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RESOURCE_COLUMNS)
    for s in specs:
        params = ";".join(f"{f.name}={getattr(s, f.name)!r}" for f in fields(s) if f.name not in ("id", "bus"))
        w.writerow([s.id, s.kind, s.bus, params])
    return out.getvalue()


def parse_resources(text: str) -> list[ResourceSpec]:
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    if header != RESOURCE_COLUMNS:
        raise FleetError(f"resources table header must be {','.join(RESOURCE_COLUMNS)}")
    specs = []
    for lineno, row in enumerate(reader, start=2):
        kind = (row["kind"] or "").strip()
        cls = RESOURCE_TYPES.get(kind)
        if cls is None:
            raise FleetError(f"resources line {lineno}: unknown kind {kind!r}")
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for item in filter(None, (row["params"] or "").split(";")):
            key, sep, val = item.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise FleetError(f"resources line {lineno}: bad parameter {item!r} for {kind}")
            kwargs[key] = None if val.strip() == "None" else float(val)
        try:
            specs.append(cls(id=row["id"].strip(), bus=int(row["bus"]), **kwargs))
        except (TypeError, ValueError) as exc:
            raise FleetError(f"resources line {lineno}: {exc}") from None
    return specs


def load_resources_file(path) -> list[ResourceSpec]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"resources table not found: {path}")
    return parse_resources(path.read_text())


def with_available_pv(spec: PvUnit, share: float) -> PvUnit:
    return replace(spec, p_available_kw=share * spec.p_rated_kw)
