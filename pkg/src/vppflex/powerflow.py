"""Full AC power flow (polar Newton-Raphson) and network-constraint screening.

Zero-impedance closed branches are fused: the buses they join share one
voltage and are solved as a single node. Flows on fused branches are recovered
afterwards by distributing the node's power over a spanning tree.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Network

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 50

UNDERVOLTAGE = "undervoltage"
OVERVOLTAGE = "overvoltage"
THERMAL = "thermal"
NONCONVERGENCE = "nonconvergence"
VIOLATION_KINDS = (UNDERVOLTAGE, OVERVOLTAGE, THERMAL, NONCONVERGENCE)


@dataclass(frozen=True)
class InjectionSet:
    """Net injection (generation minus load) at every bus, in network bus order.

    The slack bus entry is the local injection at the interface bus itself,
    usually zero; the grid supply is computed by the solver.
    """

    p_kw: np.ndarray
    q_kvar: np.ndarray

    @classmethod
    def from_loads(cls, network: Network) -> "InjectionSet":
        p = np.array([-b.p_load_kw for b in network.buses], dtype=float)
        q = np.array([-b.q_load_kvar for b in network.buses], dtype=float)
        return cls(p, q)

    @classmethod
    def zeros(cls, network: Network) -> "InjectionSet":
        n = len(network.buses)
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class PowerFlowSolution:
    vm_pu: np.ndarray
    va_rad: np.ndarray
    s_from_kva: np.ndarray  # complex, branch order, power leaving the from-end
    s_to_kva: np.ndarray  # complex, power leaving the to-end
    s_slack_kva: complex  # grid supply into the network at the slack bus
    converged: bool
    iterations: int
    max_mismatch_pu: float

    @property
    def s_lambda_kva(self) -> complex:
        """Interface exchange, export-positive (power flowing into the upstream grid)."""
        return -self.s_slack_kva

    @property
    def branch_losses_kva(self) -> np.ndarray:
        return self.s_from_kva + self.s_to_kva

    @property
    def total_losses_kva(self) -> complex:
        return complex(self.branch_losses_kva.sum())


@dataclass(frozen=True)
class Violation:
    kind: str
    element: str
    limit: float
    actual: float


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...]

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first_kind(self) -> str | None:
        return self.violations[0].kind if self.violations else None


class CompiledNetwork:
    """Admittance matrix and index maps for repeated solves on one network."""

    def __init__(self, network: Network):
        self.network = network
        n = len(network.buses)
        idx = network.bus_index()
        self.n_bus = n
        self.slack_pos = idx[network.slack_bus]
        z_base = network.z_base_ohm
        self.s_base_kva = network.base_mva * 1000.0

        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        closed = [(k, br) for k, br in enumerate(network.branches) if br.closed]
        zero = []
        series = []
        for k, br in closed:
            i, j = idx[br.from_bus], idx[br.to_bus]
            if br.r_ohm == 0.0 and br.x_ohm == 0.0:
                zero.append((k, i, j))
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
            else:
                series.append((k, i, j, 1.0 / complex(br.r_ohm / z_base, br.x_ohm / z_base)))

        roots = [find(i) for i in range(n)]
        slack_root = roots[self.slack_pos]
        # node 0 is the slack group; other groups numbered by first appearance
        node_of_root = {slack_root: 0}
        for r in roots:
            if r not in node_of_root:
                node_of_root[r] = len(node_of_root)
        self.node_of_bus = np.array([node_of_root[r] for r in roots], dtype=int)
        self.n_node = len(node_of_root)

        m = self.n_node
        ybus = np.zeros((m, m), dtype=complex)
        for _, i, j, y in series:
            a, b = self.node_of_bus[i], self.node_of_bus[j]
            if a == b:
                continue
            ybus[a, a] += y
            ybus[b, b] += y
            ybus[a, b] -= y
            ybus[b, a] -= y
        self.ybus = ybus
        self.series = series
        self.n_branch = len(network.branches)

        # aggregation matrix bus -> node
        agg = np.zeros((m, n))
        agg[self.node_of_bus, np.arange(n)] = 1.0
        self.agg = agg

        self._zero_trees = self._build_zero_trees(zero)

    def _build_zero_trees(self, zero):
        """Per fused group: BFS order of buses with (parent bus, branch index, sign)."""
        if not zero:
            return []
        adj: dict[int, list[tuple[int, int]]] = {}
        for k, i, j in zero:
            adj.setdefault(i, []).append((j, k))
            adj.setdefault(j, []).append((i, k))
        trees = []
        visited = set()
        starts = sorted(adj, key=lambda b: (b != self.slack_pos, b))
        for root in starts:
            if root in visited:
                continue
            order = [root]
            parent_of = {root: None}
            visited.add(root)
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for v, k in adj[u]:
                    if v not in visited:
                        visited.add(v)
                        parent_of[v] = (u, k)
                        order.append(v)
                        queue.append(v)
            trees.append((order, parent_of))
        return trees

    def solve(self, injections: InjectionSet, tolerance: float = DEFAULT_TOLERANCE,
              max_iterations: int = DEFAULT_MAX_ITERATIONS) -> PowerFlowSolution:
        if tolerance <= 0:
            raise ValueError("tolerance must be positive")
        s_bus = (np.asarray(injections.p_kw, dtype=float) + 1j * np.asarray(injections.q_kvar, dtype=float))
        if s_bus.shape != (self.n_bus,):
            raise ValueError(f"injection vector has shape {s_bus.shape}, expected ({self.n_bus},)")
        s_bus = s_bus / self.s_base_kva
        s_node = self.agg @ s_bus

        m = self.n_node
        pq = np.arange(1, m)
        npq = m - 1
        ybus = self.ybus
        vm = np.ones(m)
        va = np.zeros(m)
        v = vm * np.exp(1j * va)

        converged = False
        iterations = 0
        max_mis = 0.0
        if npq == 0:
            converged = True
        else:
            spec = s_node[pq]
            diag = np.arange(npq)
            # diverging iterates are caught by the finiteness check, not by warnings
            with np.errstate(all="ignore"):
                while True:
                    current = ybus @ v
                    mis = v[pq] * np.conj(current[pq]) - spec
                    f = np.concatenate([mis.real, mis.imag])
                    max_mis = float(np.max(np.abs(f)))
                    if not np.isfinite(max_mis):
                        break
                    if max_mis < tolerance:
                        converged = True
                        break
                    if iterations >= max_iterations:
                        break
                    # dS/dVa and dS/dVm restricted to the PQ block
                    y = ybus[1:, 1:]
                    vp = v[1:]
                    v_norm = vp / np.abs(vp)
                    a = -1j * vp[:, None] * np.conj(y * vp[None, :])
                    a[diag, diag] += 1j * vp * np.conj(current[1:])
                    b = vp[:, None] * np.conj(y * v_norm[None, :])
                    b[diag, diag] += np.conj(current[1:]) * v_norm
                    jac = np.block([[a.real, b.real], [a.imag, b.imag]])
                    try:
                        dx = np.linalg.solve(jac, -f)
                    except np.linalg.LinAlgError:
                        break
                    iterations += 1
                    va[pq] += dx[:npq]
                    vm[pq] += dx[npq:]
                    v = vm * np.exp(1j * va)

        v_bus = v[self.node_of_bus]
        s_from = np.zeros(self.n_branch, dtype=complex)
        s_to = np.zeros(self.n_branch, dtype=complex)
        for k, i, j, y in self.series:
            current = y * (v_bus[i] - v_bus[j])
            s_from[k] = v_bus[i] * np.conj(current)
            s_to[k] = -v_bus[j] * np.conj(current)
        s_from *= self.s_base_kva
        s_to *= self.s_base_kva

        s_node_calc = v[0] * np.conj(ybus[0] @ v) if m > 1 else 0.0
        s_slack = (s_node_calc - s_node[0]) * self.s_base_kva

        if self._zero_trees:
            self._fill_zero_flows(s_bus * self.s_base_kva, s_from, s_to, s_slack)

        return PowerFlowSolution(
            vm_pu=np.abs(v_bus),
            va_rad=np.angle(v_bus),
            s_from_kva=s_from,
            s_to_kva=s_to,
            s_slack_kva=complex(s_slack),
            converged=converged,
            iterations=iterations,
            max_mismatch_pu=max_mis,
        )

    def _fill_zero_flows(self, s_bus_kva, s_from, s_to, s_slack):
        # demand each bus places on the fused sub-network
        demand = -s_bus_kva.astype(complex)
        for k, i, j, _ in self.series:
            demand[i] += s_from[k]
            demand[j] += s_to[k]
        demand[self.slack_pos] -= s_slack
        branches = self.network.branches
        idx = self.network.bus_index()
        for order, parent_of in self._zero_trees:
            subtree = {b: demand[b] for b in order}
            for b in reversed(order):
                link = parent_of[b]
                if link is None:
                    continue
                u, k = link
                flow = subtree[b]  # parent -> child
                subtree[u] += flow
                if idx[branches[k].from_bus] == u:
                    s_from[k], s_to[k] = flow, -flow
                else:
                    s_from[k], s_to[k] = -flow, flow


@lru_cache(maxsize=32)
def compile_network(network: Network) -> CompiledNetwork:
    return CompiledNetwork(network)


def solve_power_flow(network: Network, injections: InjectionSet, tolerance: float = DEFAULT_TOLERANCE,
                     max_iterations: int = DEFAULT_MAX_ITERATIONS) -> PowerFlowSolution:
    """Solve the AC power flow from a flat start.

    Nonconvergence and singular Jacobians are reported through
    ``converged=False``, never raised.
    """
    return compile_network(network).solve(injections, tolerance, max_iterations)


def check_constraints(network: Network, solution: PowerFlowSolution) -> ViolationReport:
    """List every voltage-band and thermal violation of ``solution``."""
    if solution.vm_pu.shape != (len(network.buses),) or solution.s_from_kva.shape != (len(network.branches),):
        raise ValueError("solution does not belong to this network (dimension mismatch)")
    if not solution.converged:
        return ViolationReport((Violation(NONCONVERGENCE, "network", 0.0, solution.max_mismatch_pu),))
    found = []
    for bus, vm in zip(network.buses, solution.vm_pu):
        if vm < bus.v_min_pu:
            found.append(Violation(UNDERVOLTAGE, f"bus {bus.id}", bus.v_min_pu, float(vm)))
        elif vm > bus.v_max_pu:
            found.append(Violation(OVERVOLTAGE, f"bus {bus.id}", bus.v_max_pu, float(vm)))
    flows = np.maximum(np.abs(solution.s_from_kva), np.abs(solution.s_to_kva))
    for br, flow in zip(network.branches, flows):
        if flow > br.thermal_limit_kva:
            found.append(Violation(THERMAL, f"branch {br.from_bus}-{br.to_bus}", br.thermal_limit_kva, float(flow)))
    return ViolationReport(tuple(found))
