import numpy as np
import pytest

from greencell._io import FormatError
from greencell.controllers import greedy_controller
from greencell.energy_model import network_energy
from greencell.regional import (CapacityExceeded, MCurve, RegionProfile, ReferencePool, avg_traffic_per_user,
                                build_m_curve, monte_carlo_capacity, pre_5g_carbon_efficiency, read_regions,
                                reference_pool, regional_energy_and_carbon, trap_comparison, write_regions)


@pytest.fixture
def pool():
    return ReferencePool(np.array([False, False, False, True, True]), np.array([100.0, 200.0, 300.0, 900.0, 1100.0]),
                         np.array([1.0, 1.5, 2.0, 6.0, 8.0]))


def test_pool_from_scenario(small_scenario):
    s = small_scenario
    p = reference_pool(s)
    assert p.is_5g.sum() == 3 and len(p.is_5g) == 9
    # capacity per station per day = sum of its cells' per-slot capacity over 48 slots
    b0 = s.base_stations[0]
    assert p.capacity_gb[0] == pytest.approx(48 * sum(s.cells[s.cell_index[c]].capacity_gb for c in b0.cell_ids))
    full = network_energy(s, loads=np.broadcast_to(s.arrays.cap[:, None], s.traffic.shape).copy())
    assert p.e_max_mwh.sum() == pytest.approx(full.e_max_mwh.sum() / 2, rel=1e-9)


def test_monte_carlo_mean_matches_expectation(pool):
    region = RegionProfile("r", n_4g=20, n_5g=10, n_users=1000)
    mc = monte_carlo_capacity(region, pool, 4000, seed=1)
    expected = 20 * 200.0 + 10 * 1000.0
    assert mc.c_ci[0] < expected < mc.c_ci[1] or abs(mc.c_p - expected) < 1e-9
    assert mc.e_max_p == pytest.approx(20 * 1.5 + 10 * 7.0, rel=0.01)
    assert mc.n_trials == 4000
    assert mc.c_spread[0] < mc.c_ci[0] and mc.c_spread[1] > mc.c_ci[1]


def test_monte_carlo_degenerate_pool():
    pool = ReferencePool(np.array([False, True]), np.array([10.0, 30.0]), np.array([1.0, 2.0]))
    mc = monte_carlo_capacity(RegionProfile("r", 3, 2, 10), pool, 50)
    assert mc.c_p == 90.0 and mc.c_ci == (90.0, 90.0)


def test_ci_width_shrinks_as_inverse_sqrt(pool):
    region = RegionProfile("r", 20, 10, 1000)
    ns = np.array([100, 400, 1600, 6400])
    widths = np.array([np.diff(monte_carlo_capacity(region, pool, int(n), seed=3).c_ci)[0] for n in ns])
    slope, _ = np.polyfit(np.log(ns), np.log(widths), 1)
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_monte_carlo_validation(pool):
    with pytest.raises(ValueError):
        monte_carlo_capacity(RegionProfile("r", 1, 1, 1), pool, 1)
    no5g = ReferencePool(np.array([False]), np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValueError, match="5G"):
        monte_carlo_capacity(RegionProfile("r", 1, 1, 1), no5g, 10)


@pytest.mark.parametrize("kw", [dict(n_4g=-1), dict(n_4g=0, n_5g=0), dict(area_km2=0.0)])
def test_region_validation(kw):
    with pytest.raises(ValueError):
        RegionProfile(**{**dict(name="r", n_4g=1, n_5g=1, n_users=10), **kw})


def test_energy_and_carbon_arithmetic(pool):
    region = RegionProfile("r", 20, 10, 1000)
    mc = monte_carlo_capacity(region, pool, 500, seed=0)
    per_user = 0.3 * mc.c_p / 1000
    est = regional_energy_and_carbon(region, mc, per_user, 0.25, gamma_co2=0.5)
    assert est.l_tilde == pytest.approx(0.3)
    assert est.e_p == pytest.approx(mc.e_max_p * 0.55)
    assert est.co2_p == pytest.approx(0.5 * est.e_p)
    assert est.ci_low <= est.co2_p <= est.ci_high
    # efficiency matches L / E in TB/MWh
    assert est.ee_p == pytest.approx(est.l_p / 1000 / est.e_p, rel=1e-12)


def test_capacity_exceeded(pool):
    region = RegionProfile("r", 1, 0, 10)
    mc = monte_carlo_capacity(region, pool, 10)
    with pytest.raises(CapacityExceeded, match="exceeds"):
        regional_energy_and_carbon(region, mc, 1e6, 0.2)
    with pytest.raises(ValueError):
        regional_energy_and_carbon(region, mc, 1.0, 1.5)


def test_avg_traffic_per_user():
    assert avg_traffic_per_user(300.0, 700.0, 100) == 10.0
    with pytest.raises(ValueError):
        avg_traffic_per_user(1.0, 1.0, 0)


def test_m_curve_monotone_lookup(small_scenario):
    none = build_m_curve(small_scenario)
    greedy = build_m_curve(small_scenario, lambda s: greedy_controller(s).asleep, controller="greedy")
    assert np.all(np.diff(none.l_tilde) > 0)
    # sleeping never raises misalignment at any utilisation
    assert np.all(greedy.m <= none.m + 1e-12)
    assert none(none.l_tilde[2]) == pytest.approx(none.m[2])
    curve = MCurve(np.array([0.1, 0.5]), np.array([0.6, 0.2]))
    assert curve(0.3) == pytest.approx(0.4)
    assert curve(0.0) == 0.6 and curve(1.0) == 0.2


def test_trap_rows_sorted(pool, small_scenario):
    region = RegionProfile("r", 20, 10, 1000)
    mc = monte_carlo_capacity(region, pool, 200)
    ce = pre_5g_carbon_efficiency(small_scenario)
    rows = trap_comparison(region, mc, 0.3 * mc.c_p / 1000, {"none": 0.5, "greedy": 0.2}, ce)
    assert [r["controller"] for r in rows] == ["greedy", "none"]
    assert all(r["additional_co2_t"] >= 0 for r in rows)


def test_regions_file(tmp_path):
    regions = [RegionProfile("north", 10, 5, 2000, 12.5), RegionProfile("south", 3, 0, 100)]
    write_regions(tmp_path / "r.csv", regions)
    assert read_regions(tmp_path / "r.csv") == regions
    (tmp_path / "dup.csv").write_text("name,n_4g,n_5g,n_users,area_km2\na,1,1,1,1\na,2,2,2,2\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_regions(tmp_path / "dup.csv")
    (tmp_path / "bad.csv").write_text("name,n_4g,n_5g,n_users,area_km2\na,-1,1,1,1\n")
    with pytest.raises(FormatError, match=r"bad.csv:2: .*counts"):
        read_regions(tmp_path / "bad.csv")
