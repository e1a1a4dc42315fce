import math

import numpy as np
import pytest
from conftest import two_bus
from hypothesis import given, settings
from hypothesis import strategies as st

from vppflex.der import BatteryUnit, DieselGen, FleetError, OperatingPoint
from vppflex.feasibility import compute_for
from vppflex.flexibility import (FCAS_WINDOWS, FxorRequest, classify_fcas, compute_fxor, select_dispatch_point)
from vppflex.geometry import convex_hull
from vppflex.sampling import SampleConfig

HORIZONS = (0.0, 1.0, 6.0, 15.0, 60.0, 300.0)


def _diesels_off_mask(specs, result):
    cols = [k for k, s in enumerate(specs) if isinstance(s, DieselGen)]
    return np.all(result.retained_ops.p_kw[:, cols] == 0, axis=1)


def test_zero_and_infinite_horizons(small_results):
    _, specs, result = small_results["I"]
    fx = compute_fxor(result, specs, FxorRequest(12, (0.0, math.inf)))
    ops = result.retained_ops
    same = [i for i in range(len(ops)) if ops[i] == ops[12]]
    assert list(fx.members(0.0)) == same
    assert len(fx.members(math.inf)) == len(result)
    assert fx.min_time_s[12] == 0.0
    assert fx.dispatch == (result.p_kw[12], result.q_kvar[12])


@pytest.mark.parametrize("case", ["I", "II", "III"])
def test_nesting_and_subset(small_results, case):
    _, specs, result = small_results[case]
    pos = select_dispatch_point(result, result.hull().centroid)
    fx = compute_fxor(result, specs, FxorRequest(pos, HORIZONS))
    table = fx.membership
    assert table.shape == (len(result), len(HORIZONS))
    assert np.all(table[:, :-1] <= table[:, 1:])
    assert set(fx.sample_index[fx.members(300)]) <= set(result.feasible_index)
    assert table[pos].all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1499), st.lists(st.floats(0, 400), min_size=2, max_size=6, unique=True))
def test_nesting_property(small_results, pos, taus):
    _, specs, result = small_results["II"]
    fx = compute_fxor(result, specs, FxorRequest(pos % len(result), sorted(taus)))
    for a, b in zip(fx.horizons_s, fx.horizons_s[1:]):
        assert set(fx.members(a)) <= set(fx.members(b))


def test_diesels_off_dispatch(small_results):
    _, specs, result = small_results["I"]
    off = _diesels_off_mask(specs, result)
    pos = select_dispatch_point(result, result.hull().centroid, mask=off)
    fx = compute_fxor(result, specs, FxorRequest(pos, HORIZONS))
    diesel_on = ~off
    assert not diesel_on[fx.members(1.0)].any()
    assert not diesel_on[fx.members(14.999)].any()
    assert np.array_equal(fx.member_mask(1.0), off)
    assert diesel_on[fx.members(60.0)].any()


def test_single_battery_fcas():
    net = two_bus(0.0, 0.0, p_load=0.0)
    bat = BatteryUnit("b", 2, 20, 20, 20)
    result = compute_for(net, [bat], SampleConfig(count=4000, seed=1))
    dispatch_op = OperatingPoint([0.0], [0.0])
    fx = compute_fxor(result, [bat], FxorRequest(0, (6, 60, 300), (0.0, 0.0)), dispatch_op=dispatch_op)
    assert fx.dispatch == (0.0, 0.0)
    assert np.all(fx.min_time_s <= 0.3)
    env = classify_fcas(fx, (0.0, 0.0))
    # brute force over the sampled region, and close to the 20 kW rating
    assert env.capacity("fast", "raise") == result.p_kw.max()
    assert env.capacity("fast", "lower") == -result.p_kw.min()
    assert env.capacity("fast", "raise") == pytest.approx(20, abs=0.5)
    assert env.capacity("fast", "lower") == pytest.approx(20, abs=0.5)
    assert set(env.capacities()) == {f"{w}_{d}_kw" for w in FCAS_WINDOWS for d in ("raise", "lower")}


def test_dispatch_only_region_gives_zero_capacity(small_results):
    _, specs, result = small_results["I"]
    fx = compute_fxor(result, specs, FxorRequest(3, (6, 60, 300)))
    frozen = type(fx)(**{**fx.__dict__, "min_time_s": np.where(np.arange(len(fx.p_kw)) == 3, 0.0, np.inf)})
    assert all(v == 0 for v in classify_fcas(frozen).capacities().values())


def test_fcas_capacities_nest(small_results):
    _, specs, result = small_results["I"]
    pos = select_dispatch_point(result, result.hull().centroid)
    env = classify_fcas(compute_fxor(result, specs, FxorRequest(pos, (6, 60, 300))))
    for d in ("raise", "lower"):
        assert env.capacity("fast", d) <= env.capacity("slow", d) <= env.capacity("delayed", d)
    assert env.capacity("delayed", "raise") > 0 and env.capacity("delayed", "lower") > 0


def test_missing_horizon(small_results):
    _, specs, result = small_results["I"]
    fx = compute_fxor(result, specs, FxorRequest(0, (6, 60)))
    with pytest.raises(ValueError, match="300"):
        classify_fcas(fx)


@pytest.mark.parametrize("horizons", [(60, 6), (), (-1, 5), (6, 6)])
def test_bad_horizons(horizons):
    with pytest.raises(ValueError):
        FxorRequest(0, horizons)


def test_invalid_dispatch_operating_point(small_results):
    _, specs, result = small_results["I"]
    bad = OperatingPoint(np.full(len(specs), 1e6), np.zeros(len(specs)))
    with pytest.raises(FleetError):
        compute_fxor(result, specs, FxorRequest(0, (1,)), dispatch_op=bad)
    with pytest.raises(ValueError, match="outside"):
        compute_fxor(result, specs, FxorRequest(len(result), (1,)))


def test_nearest_selection_and_ties(small_results):
    _, _, result = small_results["I"]
    target = (result.p_kw[40], result.q_kvar[40])
    assert select_dispatch_point(result, target) == 40
    req = FxorRequest.nearest(result, target, (1, 6))
    assert req.dispatch_position == 40 and req.requested_dispatch == target


def test_cell_minimum_times(small_results):
    _, specs, result = small_results["II"]
    fx = compute_fxor(result, specs, FxorRequest(0, (1,)))
    cp, cq, t = fx.cell_min_times(25.0, 25.0)
    assert len(set(zip(cp, cq))) == len(cp)
    for p, q, best in list(zip(cp, cq, t))[:50]:
        inside = (np.floor(fx.p_kw / 25.0) * 25.0 == p) & (np.floor(fx.q_kvar / 25.0) * 25.0 == q)
        assert best == fx.min_time_s[inside].min()


def test_region_hull_grows(small_results):
    _, specs, result = small_results["I"]
    pos = select_dispatch_point(result, result.hull().centroid)
    fx = compute_fxor(result, specs, FxorRequest(pos, HORIZONS))
    areas = []
    for tau in HORIZONS[1:]:
        idx = fx.members(tau)
        areas.append(convex_hull(np.column_stack([fx.p_kw[idx], fx.q_kvar[idx]])).area_kw_kvar)
    assert all(a <= b for a, b in zip(areas, areas[1:]))
