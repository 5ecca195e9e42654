import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from greencell import kernels
from greencell.checks import check_schedule
from greencell.controllers import (InfeasibleSchedule, SleepSchedule, all_awake, evaluate_schedule, greedy_controller,
                                   load_schedule, redistribute, redistribute_grid, save_schedule, station_power,
                                   threshold_controller)
from greencell.energy_model import network_energy
from greencell._io import FormatError


def _grid_rows(s):
    idx = s.cell_index
    return [np.array([idx[c] for c in g.cell_ids]) for g in s.grids]


@pytest.mark.parametrize("theta", [0.0, 0.1, 0.3, 1.0])
def test_threshold_sleeps_only_light_cells_and_is_maximal(small_scenario, theta):
    s = small_scenario
    sch = threshold_controller(s, theta=theta)
    assert check_schedule(s, sch.asleep) == []
    cap, tr = s.arrays.cap, s.traffic
    assert np.all(tr[sch.asleep] / np.broadcast_to(cap[:, None], tr.shape)[sch.asleep] < theta)
    # no remaining light, awake cell could be put to sleep without breaking its grid
    for rows in _grid_rows(s):
        for t in range(s.n_slots):
            awake = rows[~sch.asleep[rows, t]]
            spare = cap[awake].sum() - tr[rows, t].sum()
            for c in awake:
                if tr[c, t] / cap[c] < theta and len(awake) > 1:
                    assert spare - cap[c] + kernels.FEAS_TOL < 0


def test_threshold_zero_sleeps_nothing(small_scenario):
    assert not threshold_controller(small_scenario, theta=0.0).asleep.any()
    with pytest.raises(ValueError):
        threshold_controller(small_scenario, theta=1.5)


def test_greedy_feasible_and_keeps_one_awake(default_scenario):
    s = default_scenario
    sch = greedy_controller(s)
    assert check_schedule(s, sch.asleep) == []
    for rows in _grid_rows(s):
        assert (~sch.asleep[rows]).sum(axis=0).min() >= 1


def test_greedy_matches_brute_force_on_tiny_grid():
    """On a single grid with uniform saving per GB, greedy reaches the
    maximal sleep capacity found by enumeration."""
    cap = np.array([4.0, 4.0, 4.0, 4.0])
    traffic = np.array([[1.0], [2.0], [0.5], [0.5]])
    key = np.ones((4, 1))
    out = kernels.greedy_sleep(traffic, cap, key, np.array([0, 4]), np.arange(4), 1)
    best = max(bin(m).count("1") for m in range(16)
               if cap[[i for i in range(4) if not m >> i & 1]].sum() >= traffic.sum() and m != 15)
    assert out[:, 0].sum() == best


def test_controller_ordering_on_small_scenario(small_scenario):
    s = small_scenario
    m_none = evaluate_schedule(s).mean_m
    m_thr = evaluate_schedule(s, threshold_controller(s)).mean_m
    m_greedy = evaluate_schedule(s, greedy_controller(s)).mean_m
    assert m_greedy <= m_thr <= m_none


@given(st.integers(0, 2**32 - 1))
def test_redistribution_conserves_grid_traffic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    cap = rng.uniform(0.5, 50, n)
    traffic = rng.random(n) * cap
    asleep = rng.random(n) < 0.5
    if cap[~asleep].sum() < traffic.sum():
        with pytest.raises(InfeasibleSchedule):
            redistribute_grid(cap, traffic, asleep)
        return
    loads = redistribute_grid(cap, traffic, asleep)
    assert loads.sum() == pytest.approx(traffic.sum(), rel=1e-9, abs=1e-12)
    assert np.all(loads[asleep] == 0)
    assert np.all(loads <= cap * (1 + 1e-12))


def test_network_redistribution_matches_per_grid(small_scenario, rng):
    s = small_scenario
    sch = greedy_controller(s)
    loads = redistribute(s, s.traffic, sch.asleep)
    for rows in _grid_rows(s):
        for t in (0, 30, s.n_slots - 1):
            ref = redistribute_grid(s.arrays.cap[rows], s.traffic[rows, t], sch.asleep[rows, t])
            np.testing.assert_allclose(loads[rows, t], ref, rtol=1e-12)


def test_infeasible_schedule_rejected(small_scenario):
    s = small_scenario
    with pytest.raises(InfeasibleSchedule, match="slot"):
        evaluate_schedule(s, np.ones(s.traffic.shape, dtype=bool))


def test_all_awake_evaluation_equals_network_energy(small_scenario):
    s = small_scenario
    ev = evaluate_schedule(s, all_awake(s))
    ne = network_energy(s)
    np.testing.assert_allclose(ev.energy.energy_mwh, ne.energy_mwh, rtol=1e-12)
    p = station_power(s, all_awake(s))
    assert p.shape == (len(s.base_stations), s.n_slots)
    np.testing.assert_allclose(p.sum(axis=0) * 0.5 / 1e6, ne.energy_mwh, rtol=1e-12)


def test_schedule_round_trip(tmp_path, small_scenario):
    s = small_scenario
    sch = greedy_controller(s)
    save_schedule(sch, s, tmp_path / "sched.csv")
    back = load_schedule(tmp_path / "sched.csv", s)
    assert back == sch
    lines = (tmp_path / "sched.csv").read_text().splitlines()
    (tmp_path / "short.csv").write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(FormatError):
        load_schedule(tmp_path / "short.csv", s)


def test_schedule_equality():
    a = SleepSchedule(np.zeros((2, 2), bool), "greedy")
    assert a == SleepSchedule(np.zeros((2, 2), bool), "deep")
    assert a != SleepSchedule(np.ones((2, 2), bool))
