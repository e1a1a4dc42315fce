"""Flexibility operating regions (FXOR) and FCAS contingency envelopes.

Starting from the fleet set-points behind a dispatch point, each retained
operating point is reachable after the fleet transition time; the region for
horizon ``tau`` is every FOR point reachable within ``tau`` seconds. Only the
end points are screened against network limits, not the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .der import FleetError, OperatingPoint, ResourceSpec, fleet_transition_times, point_is_valid
from .feasibility import ForResult

FCAS_WINDOWS = {"fast": 6.0, "slow": 60.0, "delayed": 300.0}


def _check_horizons(horizons: Sequence[float]) -> tuple[float, ...]:
    h = tuple(float(t) for t in horizons)
    if not h:
        raise ValueError("at least one horizon is required")
    if any(t < 0 for t in h):
        raise ValueError("horizons must be non-negative")
    if any(b <= a for a, b in zip(h, h[1:])):
        raise ValueError(f"horizons must be strictly ascending, got {list(h)}")
    return h


def select_dispatch_point(for_result: ForResult, dispatch: tuple[float, float],
                          mask: np.ndarray | None = None) -> int:
    """Position (into the retained set) of the FOR point nearest to ``dispatch``.

    Distances are scaled by the FOR's P and Q spans; ties go to the lowest
    sample index. ``mask`` restricts the candidates.
    """
    p, q = for_result.p_kw, for_result.q_kvar
    if len(p) == 0:
        raise ValueError("FOR is empty")
    sp = float(np.ptp(p)) or 1.0
    sq = float(np.ptp(q)) or 1.0
    d = ((p - dispatch[0]) / sp) ** 2 + ((q - dispatch[1]) / sq) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("no FOR point satisfies the candidate mask")
        d = np.where(mask, d, np.inf)
    return int(np.argmin(d))


@dataclass(frozen=True)
class FxorRequest:
    dispatch_position: int  # position of the dispatch operating point in the retained set
    horizons_s: tuple[float, ...]
    requested_dispatch: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "horizons_s", _check_horizons(self.horizons_s))

    @classmethod
    def nearest(cls, for_result: ForResult, dispatch: tuple[float, float], horizons: Sequence[float],
                mask: np.ndarray | None = None) -> "FxorRequest":
        pos = select_dispatch_point(for_result, dispatch, mask)
        return cls(pos, tuple(horizons), (float(dispatch[0]), float(dispatch[1])))


@dataclass(frozen=True)
class FxorResult:
    horizons_s: tuple[float, ...]
    dispatch: tuple[float, float]  # interface exchange realised by the dispatch operating point
    dispatch_position: int
    dispatch_op: OperatingPoint
    sample_index: np.ndarray  # sample index of every FOR point
    p_kw: np.ndarray
    q_kvar: np.ndarray
    min_time_s: np.ndarray
    requested_dispatch: tuple[float, float] | None = None

    def members(self, tau: float) -> np.ndarray:
        """Positions of the FOR points reachable within ``tau`` seconds."""
        return np.flatnonzero(self.min_time_s <= tau)

    def member_mask(self, tau: float) -> np.ndarray:
        return self.min_time_s <= tau

    @property
    def membership(self) -> np.ndarray:
        """(n_points, n_horizons) boolean table."""
        return np.column_stack([self.member_mask(t) for t in self.horizons_s]) if len(self.p_kw) else \
            np.zeros((0, len(self.horizons_s)), dtype=bool)

    def cell_min_times(self, cell_kw: float = 10.0, cell_kvar: float = 10.0):
        """Fastest reachable time per PQ cell: arrays (cell_p, cell_q, min_time) sorted by cell."""
        ip = np.floor(self.p_kw / cell_kw).astype(np.int64)
        iq = np.floor(self.q_kvar / cell_kvar).astype(np.int64)
        order = np.lexsort((self.min_time_s, iq, ip))
        ip, iq, t = ip[order], iq[order], self.min_time_s[order]
        first = np.ones(len(ip), dtype=bool)
        first[1:] = (ip[1:] != ip[:-1]) | (iq[1:] != iq[:-1])
        return ip[first] * cell_kw, iq[first] * cell_kvar, t[first]


def compute_fxor(for_result: ForResult, specs: Sequence[ResourceSpec], request: FxorRequest,
                 dispatch_op: OperatingPoint | None = None) -> FxorResult:
    """Fleet transition time from the dispatch set-points to every retained operating point.

    ``dispatch_op`` overrides the retained point at ``request.dispatch_position``;
    it must either be one of the retained points or lie inside every
    resource's capability region.
    """
    retained = for_result.retained_ops
    n = len(retained)
    if n == 0:
        raise ValueError("FOR is empty")
    if dispatch_op is None:
        if not 0 <= request.dispatch_position < n:
            raise ValueError(f"dispatch position {request.dispatch_position} outside retained set of {n}")
        dispatch_op = retained[request.dispatch_position]
        dispatch = (float(for_result.p_kw[request.dispatch_position]),
                    float(for_result.q_kvar[request.dispatch_position]))
    else:
        hits = np.flatnonzero((retained.p_kw == dispatch_op.p_kw).all(axis=1)
                              & (retained.q_kvar == dispatch_op.q_kvar).all(axis=1))
        if len(hits):
            pos = int(hits[0])
            dispatch = (float(for_result.p_kw[pos]), float(for_result.q_kvar[pos]))
        elif point_is_valid(specs, dispatch_op):
            dispatch = request.requested_dispatch or (float("nan"), float("nan"))
        else:
            raise FleetError("dispatch operating point is neither retained nor inside the fleet capability")
    times = fleet_transition_times(specs, dispatch_op, retained.p_kw, retained.q_kvar)
    return FxorResult(
        horizons_s=request.horizons_s,
        dispatch=dispatch,
        dispatch_position=request.dispatch_position,
        dispatch_op=dispatch_op,
        sample_index=for_result.feasible_index.copy(),
        p_kw=for_result.p_kw.copy(),
        q_kvar=for_result.q_kvar.copy(),
        min_time_s=times,
        requested_dispatch=request.requested_dispatch,
    )


@dataclass(frozen=True)
class FcasService:
    window: str
    horizon_s: float
    direction: str  # "raise" | "lower"
    capacity_kw: float
    members: np.ndarray  # positions into the FOR point arrays


@dataclass(frozen=True)
class FcasEnvelope:
    dispatch: tuple[float, float]
    services: tuple[FcasService, ...]

    def capacity(self, window: str, direction: str) -> float:
        for s in self.services:
            if s.window == window and s.direction == direction:
                return s.capacity_kw
        raise KeyError((window, direction))

    def capacities(self) -> dict[str, float]:
        return {f"{s.window}_{s.direction}_kw": s.capacity_kw for s in self.services}


def classify_fcas(fxor: FxorResult, dispatch: tuple[float, float] | None = None,
                  windows: dict[str, float] = FCAS_WINDOWS) -> FcasEnvelope:
    """Raise/lower capacity per contingency window from the reachable sets.

    Raise capacity is the largest export increase reachable in the window,
    lower capacity the largest export decrease.
    """
    dispatch = fxor.dispatch if dispatch is None else dispatch
    missing = [t for t in windows.values() if t not in fxor.horizons_s]
    if missing:
        raise ValueError(f"FXOR lacks horizons {missing} needed for FCAS classification")
    dp = fxor.p_kw - dispatch[0]
    services = []
    for name, tau in windows.items():
        mask = fxor.member_mask(tau)
        up = mask & (dp > 0)
        down = mask & (dp < 0)
        services.append(FcasService(name, tau, "raise", float(dp[up].max()) if up.any() else 0.0,
                                    np.flatnonzero(up)))
        services.append(FcasService(name, tau, "lower", float(-dp[down].min()) if down.any() else 0.0,
                                    np.flatnonzero(down)))
    return FcasEnvelope((float(dispatch[0]), float(dispatch[1])), tuple(services))
