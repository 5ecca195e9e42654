import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from greencell._io import FormatError
from greencell.solar import (CostModel, PvConfig, UndefinedLCCA, area_for_investment, clear_sky_ghi, cos_zenith,
                             curtailment, grid_draw, lcca, net_zero_rate, pv_generation, pv_series, read_costs,
                             read_pv, sweep, write_costs, write_pv)


def test_zero_at_night_positive_at_noon():
    cfg = PvConfig()
    night = [0, 5, 9, 40, 47]   # 00:15, 02:45, 04:45, 20:15, 23:45
    assert np.all(pv_generation(cfg, 172, night) == 0.0)
    assert pv_generation(cfg, 172, 23) > 0


@pytest.mark.parametrize("doy", [15, 105, 172, 280])
def test_daily_energy_matches_quadrature(doy):
    cfg = PvConfig()
    k = cfg.panel_area_m2 * cfg.efficiency * cfg.derate
    exact, _ = quad(lambda h: float(clear_sky_ghi(cfg.latitude_deg, doy, h)) * k, 0, 24, limit=200)
    midpoint = pv_series(cfg, 48, doy).sum() * 0.5
    assert midpoint == pytest.approx(exact, rel=0.01)


def test_solar_geometry_at_equinox_noon():
    # declination ~0 near day 81: cos(zenith) at solar noon = cos(latitude)
    assert cos_zenith(30.0, 81, 12.0) == pytest.approx(math.cos(math.radians(30.0)), abs=0.01)
    assert clear_sky_ghi(0.0, 81, 12.0) == pytest.approx(1098.0 * math.exp(-0.059), rel=0.01)


def test_pv_config_validation():
    assert PvConfig(panel_area_m2=10, efficiency=0.2).peak_kw == pytest.approx(2.0)
    for kw in (dict(panel_area_m2=-1), dict(efficiency=0), dict(latitude_deg=100), dict(cloud_factor=2)):
        with pytest.raises(ValueError):
            PvConfig(**kw)


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=30), st.floats(0, 1))
def test_no_curtailment_when_load_covers_pv(load, frac):
    load = np.array(load)
    pv = load * frac
    assert curtailment(pv, load) == 0.0
    np.testing.assert_allclose(grid_draw(pv, load), load - pv)


def test_curtailment_counts_surplus_only():
    # 2 kW surplus for one half-hour slot = 1 kWh = 1e-3 MWh
    assert curtailment([3000.0, 100.0], [1000.0, 500.0]) == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        curtailment([1.0], [1.0, 2.0])


def test_net_zero_rate_bounds():
    assert net_zero_rate(10.0, 4.0) == pytest.approx(0.6)
    assert net_zero_rate(10.0, 12.0) == 0.0
    assert net_zero_rate(10.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        net_zero_rate(0.0, 1.0)


def test_annuity_by_hand():
    c = CostModel(capex_per_kw=1000, opex_rate=0.02, inverter_cost_fraction=0.1, inverter_replacement_year=10,
                  lifetime_years=20, discount_rate=0.05)
    crf = 0.05 * 1.05 ** 20 / (1.05 ** 20 - 1)
    assert c.capital_recovery_factor() == pytest.approx(crf)
    assert c.capital_recovery_factor() == pytest.approx(0.0802426, rel=1e-6)
    inv = 1e5
    expected = (inv + 0.1 * inv / 1.05 ** 10) * crf + 0.02 * inv
    assert c.annual_cost(inv) == pytest.approx(expected)
    assert lcca(c, inv, 10.0) == pytest.approx(expected / 10.0)
    assert lcca(CostModel(opex_rate=0, inverter_cost_fraction=0, discount_rate=0), 100, 1) == 5.0
    with pytest.raises(UndefinedLCCA):
        lcca(c, inv, 0.0)


def test_cost_validation():
    with pytest.raises(ValueError):
        CostModel(discount_rate=1.0)
    with pytest.raises(ValueError):
        CostModel(inverter_replacement_year=30, lifetime_years=20)


def _loads(n_bs=3, days=2, level=1500.0):
    t = np.arange(48 * days)
    return level + 300.0 * np.sin(2 * np.pi * t / 48)[None, :] * np.ones((n_bs, 1))


def test_sweep_monotone_in_area():
    base = _loads()
    pts = sweep({"none": base, "greedy": 0.7 * base}, 172, [0, 5, 10, 20, 40])
    for scheme in ("pv", "pv+greedy"):
        rows = [p for p in pts if p.scheme == scheme]
        nz = [p.net_zero_rate for p in rows]
        curt = [p.curtailment_mwh for p in rows]
        assert nz == sorted(nz) and curt == sorted(curt)
        assert rows[0].pv_mwh == 0.0 and math.isnan(rows[0].lcca)
    pv_rows = {p.panel_area_m2: p for p in pts if p.scheme == "pv"}
    both = {p.panel_area_m2: p for p in pts if p.scheme == "pv+greedy"}
    for area in (5, 10, 20, 40):
        assert both[area].lcca < pv_rows[area].lcca
        assert both[area].net_zero_rate > pv_rows[area].net_zero_rate


def test_sweep_requires_baseline_and_per_station_configs():
    with pytest.raises(KeyError):
        sweep({"greedy": _loads()}, 1, [10])
    with pytest.raises(ValueError, match="one PV config per station"):
        sweep({"none": _loads()}, 1, [10], configs=[PvConfig()])
    pts = sweep({"none": _loads()}, 1, [10], configs=[PvConfig(efficiency=e) for e in (0.1, 0.2, 0.3)])
    assert pts[0].investment == pytest.approx(10 * (0.1 + 0.2 + 0.3) * 4000)


def test_area_for_investment_inverts_sweep_cost():
    costs = CostModel()
    area = area_for_investment(48_000.0, PvConfig(), 3, costs)
    pts = sweep({"none": _loads()}, 1, [area], costs=costs)
    assert pts[0].investment == pytest.approx(48_000.0)


def test_files(tmp_path):
    cfgs = {"BS0": PvConfig(12.0, 0.18), "BS1": PvConfig(8.0, 0.21, derate=0.8)}
    write_pv(tmp_path / "pv.csv", cfgs)
    assert read_pv(tmp_path / "pv.csv") == cfgs
    write_costs(tmp_path / "c.csv", CostModel(capex_per_kw=3500))
    assert read_costs(tmp_path / "c.csv") == CostModel(capex_per_kw=3500)
    (tmp_path / "bad.csv").write_text("item,value\nsubsidy,3\n")
    with pytest.raises(FormatError, match="unknown cost item"):
        read_costs(tmp_path / "bad.csv")
    (tmp_path / "neg.csv").write_text("station_id,panel_area_m2,efficiency,derate\nX,-1,0.2,0.9\n")
    with pytest.raises(FormatError, match="neg.csv:2"):
        read_pv(tmp_path / "neg.csv")
