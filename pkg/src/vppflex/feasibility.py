"""Monte Carlo estimation of the feasibility operating region (FOR)."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .der import ResourceSpec, validate_fleet
from .geometry import Hull, convex_hull, hull_contains
from .grid import Network
from .powerflow import (DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, VIOLATION_KINDS, InjectionSet,
                        check_constraints, compile_network)
from .sampling import OperatingPoints, SampleConfig, sample_operating_points

log = logging.getLogger(__name__)

FEASIBLE = ""


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS


@dataclass
class ForResult:
    """Outcome of screening every sampled operating point.

    Per-sample arrays cover the whole sample range; ``feasible_index`` picks
    the retained ones (the set of feasible operating points) in sample order.
    """

    config: SampleConfig
    sample_p_kw: np.ndarray  # interface exchange per sample, export-positive (nan if not converged)
    sample_q_kvar: np.ndarray
    violation_kind: np.ndarray  # object array; "" for feasible samples
    samples: OperatingPoints  # all sampled operating points
    discard_tally: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.feasible_index = np.flatnonzero(self.violation_kind == FEASIBLE)

    @property
    def p_kw(self) -> np.ndarray:
        return self.sample_p_kw[self.feasible_index]

    @property
    def q_kvar(self) -> np.ndarray:
        return self.sample_q_kvar[self.feasible_index]

    @property
    def points(self) -> np.ndarray:
        """(n_feasible, 2) array of FOR points (kW, kvar)."""
        return np.column_stack([self.p_kw, self.q_kvar])

    @property
    def retained_ops(self) -> OperatingPoints:
        idx = self.feasible_index
        return OperatingPoints(self.samples.p_kw[idx], self.samples.q_kvar[idx])

    @property
    def discarded_count(self) -> int:
        return int(len(self.violation_kind) - len(self.feasible_index))

    def __len__(self):
        return len(self.feasible_index)

    def hull(self) -> Hull:
        if len(self) == 0:
            raise ValueError("FOR is empty; every sample was discarded")
        return convex_hull(self.points)


class InjectionAssembler:
    """Maps fleet set-points onto bus injections for one network."""

    def __init__(self, network: Network, specs: Sequence[ResourceSpec]):
        validate_fleet(specs, network)
        idx = network.bus_index()
        self.network = network
        self.base = InjectionSet.from_loads(network)
        self.incidence = np.zeros((len(specs), len(network.buses)))
        for k, s in enumerate(specs):
            self.incidence[k, idx[s.bus]] = 1.0

    def injections(self, p_kw: np.ndarray, q_kvar: np.ndarray) -> InjectionSet:
        return InjectionSet(self.base.p_kw + p_kw @ self.incidence, self.base.q_kvar + q_kvar @ self.incidence)


def evaluate_points(network: Network, specs: Sequence[ResourceSpec], ops: OperatingPoints,
                    solver: SolverSettings = SolverSettings()):
    """Solve and screen each operating point; returns (p, q, violation_kind) arrays."""
    assembler = InjectionAssembler(network, specs)
    model = compile_network(network)
    n = len(ops)
    p_out = np.full(n, np.nan)
    q_out = np.full(n, np.nan)
    kinds = np.empty(n, dtype=object)
    for i in range(n):
        inj = assembler.injections(ops.p_kw[i], ops.q_kvar[i])
        sol = model.solve(inj, solver.tolerance, solver.max_iterations)
        report = check_constraints(network, sol)
        if sol.converged:
            s = sol.s_lambda_kva
            p_out[i], q_out[i] = s.real, s.imag
        kinds[i] = report.first_kind or FEASIBLE
    return p_out, q_out, kinds


def _evaluate_chunk(args):
    network, specs, config, solver, start, stop = args
    ops = sample_operating_points(specs, config, start, stop)
    return start, ops, evaluate_points(network, specs, ops, solver)


def compute_for(network: Network, specs: Sequence[ResourceSpec], config: SampleConfig,
                solver: SolverSettings = SolverSettings(), workers: int = 1,
                chunk_size: int = 1000) -> ForResult:
    """Sample, solve and screen ``config.count`` operating points.

    With ``workers > 1`` sample ranges are evaluated in separate processes and
    merged by sample index; the result is identical to a serial run.
    """
    validate_fleet(specs, network)
    bounds = [(a, min(a + chunk_size, config.count)) for a in range(0, config.count, chunk_size)]
    jobs = [(network, list(specs), config, solver, a, b) for a, b in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, jobs))
    else:
        parts = [_evaluate_chunk(job) for job in jobs]
    parts.sort(key=lambda part: part[0])
    ops = OperatingPoints.concat([part[1] for part in parts])
    p = np.concatenate([part[2][0] for part in parts])
    q = np.concatenate([part[2][1] for part in parts])
    kinds = np.concatenate([part[2][2] for part in parts])
    tally = {kind: int(np.count_nonzero(kinds == kind)) for kind in VIOLATION_KINDS}
    result = ForResult(config, p, q, kinds, ops, tally)
    log.info("FOR: %d of %d samples feasible", len(result), config.count)
    return result


@dataclass(frozen=True)
class AncillarySplit:
    """Deviation of every FOR point from a dispatch point, split by sign of the active part."""

    dispatch: tuple[float, float]
    delta_p_kw: np.ndarray
    delta_q_kvar: np.ndarray
    raise_index: np.ndarray  # positions into the FOR point arrays
    lower_index: np.ndarray
    zero_index: np.ndarray  # pure reactive deviation; reported in both sets
    dispatch_in_hull: bool


def split_ancillary(for_result: ForResult, dispatch: tuple[float, float]) -> AncillarySplit:
    """Ancillary power of each FOR point relative to ``dispatch``; raise where it exports more."""
    dp = for_result.p_kw - dispatch[0]
    dq = for_result.q_kvar - dispatch[1]
    inside = len(for_result) > 0 and hull_contains(for_result.hull(), dispatch)
    if not inside:
        log.warning("dispatch point %s lies outside the FOR hull", dispatch)
    zero = np.flatnonzero(dp == 0.0)
    return AncillarySplit(
        dispatch=(float(dispatch[0]), float(dispatch[1])),
        delta_p_kw=dp,
        delta_q_kvar=dq,
        raise_index=np.union1d(np.flatnonzero(dp > 0.0), zero),
        lower_index=np.union1d(np.flatnonzero(dp < 0.0), zero),
        zero_index=zero,
        dispatch_in_hull=bool(inside),
    )
