import logging
import time

import numpy as np
import pytest
from conftest import case_fleet, copper_plate, two_bus

from vppflex.der import DieselGen, FleetError, PvUnit
from vppflex.feasibility import InjectionAssembler, compute_for, evaluate_points, split_ancillary
from vppflex.grid import NetworkError, build_ieee33, with_thermal_cap, with_voltage_band
from vppflex.powerflow import check_constraints, solve_power_flow
from vppflex.sampling import OperatingPoints, SampleConfig


def test_single_diesel_on_lossless_two_bus():
    net = two_bus(0.0, 0.0, p_load=50.0, q_load=12.0)
    diesel = DieselGen("d", 2, 10, 120, -50, 50, 15, 20)
    ops = OperatingPoints(np.array([[100.0]]), np.array([[0.0]]))
    p, q, kinds = evaluate_points(net, [diesel], ops)
    assert kinds[0] == ""
    assert p[0] == pytest.approx(50.0, abs=1e-9)
    assert q[0] == pytest.approx(-12.0, abs=1e-9)


def test_copper_plate_is_the_minkowski_sum():
    net = copper_plate(build_ieee33("II"))
    specs = case_fleet(net)
    result = compute_for(net, specs, SampleConfig(count=2000, seed=3))
    assert len(result) == 2000 and result.discarded_count == 0
    expect_p = result.samples.p_kw.sum(axis=1) - net.total_load_kw
    expect_q = result.samples.q_kvar.sum(axis=1) - net.total_load_kvar
    assert np.max(np.abs(result.p_kw - expect_p)) < 1e-6
    assert np.max(np.abs(result.q_kvar - expect_q)) < 1e-6


def test_counts_and_tally(small_results):
    for net, specs, result in small_results.values():
        assert len(result) + result.discarded_count == result.config.count
        assert sum(result.discard_tally.values()) == result.discarded_count
        assert len(result.retained_ops) == len(result.points)
        # import-side region with a 3.71 MW load and at most 1.45 MW of generation
        assert np.all(result.p_kw < 0)


def test_retained_points_re_solve_clean(small_results):
    net, specs, result = small_results["III"]
    assembler = InjectionAssembler(net, specs)
    ops = result.retained_ops
    for i in range(0, len(ops), max(1, len(ops) // 25)):
        sol = solve_power_flow(net, assembler.injections(ops.p_kw[i], ops.q_kvar[i]))
        assert check_constraints(net, sol).ok
        assert sol.s_lambda_kva.real == result.p_kw[i]


def test_case_three_discards_are_undervoltage(small_results):
    _, _, three = small_results["III"]
    _, _, one = small_results["I"]
    assert three.discarded_count >= one.discarded_count
    assert three.discard_tally["undervoltage"] == three.discarded_count


def test_monotone_under_relaxation():
    base = build_ieee33("III")
    specs = case_fleet(base)
    cfg = SampleConfig(count=600, seed=21)
    tight = compute_for(with_voltage_band(base, 0.935, 1.05), specs, cfg)
    loose = compute_for(with_voltage_band(base, 0.925, 1.06), specs, cfg)
    assert set(tight.feasible_index) <= set(loose.feasible_index)
    assert len(loose) > len(tight)
    capped = compute_for(with_thermal_cap(base, 3000.0), specs, cfg)
    uncapped = compute_for(base, specs, cfg)
    assert set(capped.feasible_index) <= set(uncapped.feasible_index)
    assert capped.discard_tally["thermal"] > 0


def test_flexible_demand_embedding():
    one, two = build_ieee33("I"), build_ieee33("II")
    fleet_one, fleet_two = case_fleet(one), case_fleet(two)
    cfg = SampleConfig(count=300, seed=8)
    res = compute_for(one, fleet_one, cfg)
    extra = len(fleet_two) - len(fleet_one)
    ops = res.retained_ops
    padded = OperatingPoints(np.hstack([ops.p_kw, np.zeros((len(ops), extra))]),
                             np.hstack([ops.q_kvar, np.zeros((len(ops), extra))]))
    p, q, kinds = evaluate_points(two, fleet_two, padded)
    assert np.all(kinds == "")
    np.testing.assert_array_equal(p, res.p_kw)
    np.testing.assert_array_equal(q, res.q_kvar)
    # the shared resources draw the same numbers in both cases
    res_two = compute_for(two, fleet_two, cfg)
    np.testing.assert_array_equal(res_two.samples.p_kw[:, :len(fleet_one)], res.samples.p_kw)


def test_parallel_equals_serial():
    net = build_ieee33("III")
    specs = case_fleet(net)
    cfg = SampleConfig(count=500, seed=13)
    serial = compute_for(net, specs, cfg, chunk_size=500)
    parallel = compute_for(net, specs, cfg, workers=3, chunk_size=70)
    assert serial.sample_p_kw.tobytes() == parallel.sample_p_kw.tobytes()
    assert serial.sample_q_kvar.tobytes() == parallel.sample_q_kvar.tobytes()
    assert list(serial.violation_kind) == list(parallel.violation_kind)
    assert serial.discard_tally == parallel.discard_tally


def test_validation_errors_propagate():
    net = build_ieee33("I")
    with pytest.raises(FleetError, match="unknown bus"):
        compute_for(net, [PvUnit("x", 40, 10.0)], SampleConfig(count=5))
    with pytest.raises(NetworkError):
        with_voltage_band(net, 1.1, 1.0)


def test_split_examples(small_results, caplog):
    _, _, result = small_results["I"]
    star = (result.p_kw[7], result.q_kvar[7])
    split = split_ancillary(result, star)
    assert split.delta_p_kw[7] == 0 and split.delta_q_kvar[7] == 0
    assert 7 in split.zero_index and 7 in split.raise_index and 7 in split.lower_index

    low = int(np.argmin(result.p_kw))
    split = split_ancillary(result, (result.p_kw[low], result.q_kvar[low]))
    assert set(split.lower_index) == set(split.zero_index)

    centroid = result.hull().centroid
    split = split_ancillary(result, centroid)
    assert split.dispatch_in_hull
    assert len(split.raise_index) and len(split.lower_index)
    covered = np.union1d(split.raise_index, split.lower_index)
    assert np.array_equal(covered, np.arange(len(result)))
    assert len(split.raise_index) + len(split.lower_index) - len(split.zero_index) == len(result)

    with caplog.at_level(logging.WARNING):
        outside = split_ancillary(result, (0.0, 0.0))
    assert not outside.dispatch_in_hull
    assert "outside" in caplog.text
    assert len(outside.lower_index) == len(result)


def test_full_size_runtime_copper_plate():
    net = copper_plate(build_ieee33("I"))
    specs = case_fleet(net)
    t0 = time.perf_counter()
    result = compute_for(net, specs, SampleConfig(count=10_000, seed=42))
    assert len(result) == 10_000
    assert time.perf_counter() - t0 < 10
