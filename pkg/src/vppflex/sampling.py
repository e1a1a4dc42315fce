"""Correlated random DER operating points, counter-based and reproducible.

Every random number is addressed by (seed, stream, sample index): each
resource owns a Philox stream keyed by a hash of its id, and sample ``i``
reads block ``i`` of that stream. Any slice of the sample range can therefore
be generated independently and concatenated into the serial sequence, and
adding a resource to a fleet leaves the draws of the others untouched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .der import BatteryUnit, DieselGen, FlexibleLoad, OperatingPoint, PvUnit, ResourceSpec

PV_COMMON_STREAM = "__pv_common_irradiance__"
_U53 = 2.0**-53
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SampleConfig:
    count: int = 10_000
    seed: int = 0
    pv_correlation: float = 1.0
    diesel_on_probability: float = 0.5

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("sample count must be positive")
        if not 0.0 <= self.pv_correlation <= 1.0:
            raise ValueError("pv_correlation must lie in [0, 1]")
        if not 0.0 <= self.diesel_on_probability <= 1.0:
            raise ValueError("diesel_on_probability must lie in [0, 1]")


@dataclass(frozen=True)
class OperatingPoints:
    """A batch of operating points: row ``i`` is sample ``start + i``."""

    p_kw: np.ndarray  # (n, R)
    q_kvar: np.ndarray  # (n, R)
    start: int = 0

    def __len__(self):
        return self.p_kw.shape[0]

    def __getitem__(self, i) -> OperatingPoint:
        return OperatingPoint(self.p_kw[i].copy(), self.q_kvar[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def concat(cls, parts: Sequence["OperatingPoints"]) -> "OperatingPoints":
        return cls(np.concatenate([p.p_kw for p in parts]), np.concatenate([p.q_kvar for p in parts]),
                   parts[0].start if parts else 0)


def stream_id(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")


def uniform_block(seed: int, stream: str, start: int, stop: int) -> np.ndarray:
    """Uniforms in [0, 1) of shape (stop - start, 4); row i depends only on (seed, stream, start + i)."""
    bitgen = np.random.Philox(key=[seed & _MASK64, stream_id(stream)], counter=[start, 0, 0, 0])
    raw = bitgen.random_raw(4 * (stop - start)).reshape(-1, 4)
    return (raw >> np.uint64(11)).astype(float) * _U53


def _battery_p(spec: BatteryUnit, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of P when (P, Q) is uniform over the disc cut by the P limits."""
    s = spec.s_rated_kva
    lo, hi = spec.p_bounds

    def area(p):
        x = np.clip(p / s, -1.0, 1.0)
        return s * s * (x * np.sqrt(1.0 - x * x) + np.arcsin(x))

    a_lo, a_hi = area(lo), area(hi)
    target = a_lo + u * (a_hi - a_lo)
    left = np.full_like(u, lo)
    right = np.full_like(u, hi)
    for _ in range(64):
        mid = 0.5 * (left + right)
        below = area(mid) < target
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
    return 0.5 * (left + right)


def sample_operating_points(specs: Sequence[ResourceSpec], config: SampleConfig,
                            start: int = 0, stop: int | None = None) -> OperatingPoints:
    """Draw samples ``start..stop-1`` (default: all ``config.count``) of the fleet's operating points.

    Diesels are OFF with probability ``1 - diesel_on_probability`` and
    otherwise uniform in their rectangle. PV availability mixes a common
    irradiance factor with an independent one by ``pv_correlation``; each unit
    produces its available power (below the minimum output it is OFF) with Q
    uniform within the power-factor/kVA limit. Batteries are uniform over
    their capability disc, flexible loads shed a uniform fraction.
    """
    if not specs:
        raise ValueError("cannot sample an empty fleet")
    stop = config.count if stop is None else stop
    if not 0 <= start <= stop <= config.count:
        raise ValueError(f"sample range [{start}, {stop}) outside [0, {config.count})")
    n = stop - start
    r = len(specs)
    p = np.zeros((n, r))
    q = np.zeros((n, r))
    seed = config.seed
    common = None
    c = config.pv_correlation

    for k, spec in enumerate(specs):
        u = uniform_block(seed, spec.id, start, stop)
        if isinstance(spec, DieselGen):
            on = u[:, 0] < config.diesel_on_probability
            p[:, k] = np.where(on, spec.p_min_kw + u[:, 1] * spec.p_range_kw, 0.0)
            q[:, k] = np.where(on, spec.q_min_kvar + u[:, 2] * spec.q_range_kvar, 0.0)
        elif isinstance(spec, PvUnit):
            if common is None:
                common = uniform_block(seed, PV_COMMON_STREAM, start, stop)[:, 0]
            share = c * common + (1.0 - c) * u[:, 0]
            avail = share * spec.p_available_kw
            on = avail >= spec.p_min_kw
            pk = avail
            qk = (2.0 * u[:, 1] - 1.0) * spec.q_limit(pk)
            p[:, k] = np.where(on, pk, 0.0)
            q[:, k] = np.where(on, qk, 0.0)
        elif isinstance(spec, BatteryUnit):
            pk = _battery_p(spec, u[:, 0])
            half = np.sqrt(np.maximum(spec.s_rated_kva**2 - pk * pk, 0.0))
            p[:, k] = pk
            q[:, k] = (2.0 * u[:, 1] - 1.0) * half
        elif isinstance(spec, FlexibleLoad):
            f = u[:, 0]
            p[:, k] = f * spec.p_shed_max_kw
            q[:, k] = f * spec.q_shed_max_kvar
        else:
            raise TypeError(f"unknown resource spec {type(spec).__name__}")
    return OperatingPoints(p, q, start)
