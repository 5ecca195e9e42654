import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from greencell import kernels
from greencell.energy_model import (DEFAULT_BBU_W, DEFAULT_COEFFS, SLEEP_RANGE_W, CoolingParams, EnergyCoeffs,
                                    Kind, base_station_power, cooling_power, network_energy,
                                    prb_ratio_from_load, rru_power, station_power_arrays, transmit_power)
from greencell.scenario import BaseStationSpec


def test_bbu_constants_match_measurements():
    assert DEFAULT_BBU_W[Kind.FOUR_G_3CELL] == 89.3771
    assert DEFAULT_BBU_W[Kind.FIVE_G_3CELL] == 305.0409
    assert DEFAULT_BBU_W[Kind.FIVE_G_6CELL] == 499.6484


@pytest.mark.parametrize("kind", list(Kind))
def test_sleep_draw_inside_measured_range(kind):
    lo, hi = SLEEP_RANGE_W[kind.is_5g]
    assert lo <= DEFAULT_COEFFS[kind].sleep_rru_w <= hi


def test_rru_affine_in_transmit_power():
    c = EnergyCoeffs(alpha=2.0, gamma=100.0, beta=200.0, sigma=10.0, p_trans_max=150.0, sleep_rru_w=50.0)
    assert rru_power(c, 0.0) == 2.0 * 10.0 + 100.0
    assert rru_power(c, 0.5) == 2.0 * 110.0 + 100.0
    # transmit power saturates at the cap
    assert transmit_power(c, 1.0) == 150.0
    assert rru_power(c, 1.0) == 400.0
    assert rru_power(c, 0.7, asleep=True) == 50.0


@pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
def test_prb_out_of_range(bad):
    with pytest.raises(ValueError):
        rru_power(DEFAULT_COEFFS[Kind.FOUR_G_3CELL], bad)


def test_load_above_capacity_rejected():
    assert prb_ratio_from_load(3.0, 6.0) == 0.5
    with pytest.raises(ValueError, match="redistribute"):
        prb_ratio_from_load(7.0, 6.0)


def test_cooling_clamped_at_zero():
    cool = CoolingParams(cop=3.0, ua_w_per_k=40.0, t_indoor_c=20.0)
    assert cooling_power(300.0, 20.0, cool) == pytest.approx(100.0)
    assert cooling_power(300.0, 30.0, cool) == pytest.approx(700.0 / 3.0)
    assert cooling_power(300.0, 0.0, cool) == 0.0


@given(st.sampled_from(list(Kind)), st.floats(0, 1), st.floats(0, 1))
def test_rru_monotone_in_prb(kind, a, b):
    c = DEFAULT_COEFFS[kind]
    lo, hi = sorted((a, b))
    assert rru_power(c, lo) <= rru_power(c, hi)
    assert rru_power(c, lo, asleep=True) < rru_power(c, lo)


def test_station_breakdown_composition():
    bs = BaseStationSpec("B1", Kind.FIVE_G_3CELL, 0.0, 0.0, ("c1", "c2", "c3"))
    out = base_station_power(bs, [0.2, 0.0, 1.0], [False, True, False], outdoor_temp_c=25.0)
    c = DEFAULT_COEFFS[Kind.FIVE_G_3CELL]
    rru = [c.alpha * 0.2 * c.beta + c.gamma, c.sleep_rru_w, c.alpha * min(c.beta, c.p_trans_max) + c.gamma]
    p_tx = DEFAULT_BBU_W[Kind.FIVE_G_3CELL] + sum(rru)
    assert out.p_tx_w == pytest.approx(p_tx)
    assert out.p_cooling_w == pytest.approx((p_tx + 40.0 * 5.0) / 3.0)
    assert out.p_total_w == pytest.approx(out.p_tx_w + out.p_cooling_w)


def test_vector_path_matches_scalar_model(small_scenario, rng):
    """Kernel power for random schedules equals the per-station scalar model."""
    s = small_scenario
    asleep = rng.random(s.traffic.shape) < 0.3
    prb = rng.random(s.traffic.shape)
    loads = prb * s.arrays.cap[:, None]
    rru, p_tx, p_cool = station_power_arrays(s, loads, asleep)
    idx = s.cell_index
    for b_i, b in enumerate(s.base_stations):
        rows = [idx[c] for c in b.cell_ids]
        for t in (0, 17, s.n_slots - 1):
            ref = base_station_power(b, prb[rows, t], asleep[rows, t], s.weather[t], s.cooling, s.bbu_w, s.coeffs)
            assert p_tx[b_i, t] == pytest.approx(ref.p_tx_w, rel=1e-12)
            assert p_cool[b_i, t] == pytest.approx(ref.p_cooling_w, rel=1e-12, abs=1e-12)


def test_network_energy_bounds(small_scenario):
    ne = network_energy(small_scenario)
    assert np.all(ne.energy_mwh <= ne.e_max_mwh)
    assert np.all(ne.misalignment >= 0) and np.all(ne.misalignment <= 1)
    g4 = network_energy(small_scenario, generation="4G")
    g5 = network_energy(small_scenario, generation="5G")
    np.testing.assert_allclose(g4.energy_mwh + g5.energy_mwh, ne.energy_mwh, rtol=1e-12)


def test_network_energy_rejects_infeasible(small_scenario):
    s = small_scenario
    with pytest.raises(ValueError, match="infeasible"):
        network_energy(s, asleep=np.ones(s.traffic.shape, dtype=bool))


def test_kernel_clips_prb():
    one = np.ones(1)
    rru, _, _ = kernels.station_power(np.array([[2.0]]), np.zeros((1, 1), bool), 2 * one, 100 * one, 200 * one,
                                      0 * one, 300 * one, 50 * one, np.zeros(1, np.int64), one, np.zeros(1),
                                      0.0, 20.0, 3.0)
    assert rru[0, 0] == 2 * 200 + 100
