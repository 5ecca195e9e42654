"""Rooftop PV at base stations: generation, offset, curtailment and the
levelized cost of carbon abatement.

Irradiance is a clear-sky Haurwitz model on a horizontal panel, with the
solar zenith angle from declination and hour angle. Slot ``t`` of a day is
evaluated at its midpoint in local solar time.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from ._io import CsvReader, FormatError, write_csv
from .energy_model import SLOT_HOURS
from .scenario import SLOTS_PER_DAY

HAURWITZ_A = 1098.0     # W/m2
HAURWITZ_B = 0.059
STC_W_PER_M2 = 1000.0   # rating irradiance for kW-peak


class UndefinedLCCA(ValueError):
    pass


@dataclass(frozen=True)
class PvConfig:
    panel_area_m2: float = 20.0
    efficiency: float = 0.20
    latitude_deg: float = 28.68
    derate: float = 0.86
    cloud_factor: float = 1.0

    def __post_init__(self):
        if self.panel_area_m2 < 0:
            raise ValueError("panel area must be >= 0")
        if not 0 < self.efficiency <= 1 or not 0 < self.derate <= 1:
            raise ValueError("efficiency and derate must lie in (0, 1]")
        if not -90 <= self.latitude_deg <= 90:
            raise ValueError("latitude must lie in [-90, 90]")
        if not 0 <= self.cloud_factor <= 1:
            raise ValueError("cloud factor must lie in [0, 1]")

    @property
    def peak_kw(self) -> float:
        return self.panel_area_m2 * self.efficiency * STC_W_PER_M2 / 1000.0


def declination_rad(day_of_year):
    return np.radians(23.45) * np.sin(2 * np.pi * (284 + np.asarray(day_of_year)) / 365.0)


def cos_zenith(latitude_deg, day_of_year, solar_hour):
    phi = np.radians(latitude_deg)
    dec = declination_rad(day_of_year)
    h = np.radians(15.0 * (np.asarray(solar_hour, dtype=float) - 12.0))
    return np.sin(phi) * np.sin(dec) + np.cos(phi) * np.cos(dec) * np.cos(h)


def clear_sky_ghi(latitude_deg, day_of_year, solar_hour):
    """Global horizontal irradiance in W/m2; 0 when the sun is down."""
    cz = cos_zenith(latitude_deg, day_of_year, solar_hour)
    safe = np.where(cz > 0, cz, 1.0)
    return np.where(cz > 0, HAURWITZ_A * safe * np.exp(-HAURWITZ_B / safe), 0.0)


def pv_generation(config: PvConfig, day_of_year, slot) -> np.ndarray:
    """PV output in W per station for the given day(s) and slot(s) of day."""
    hour = (np.asarray(slot, dtype=float) + 0.5) * SLOT_HOURS
    ghi = clear_sky_ghi(config.latitude_deg, day_of_year, hour)
    return ghi * config.panel_area_m2 * config.efficiency * config.derate * config.cloud_factor


def pv_series(config: PvConfig, n_slots: int, start_day_of_year: int) -> np.ndarray:
    """Per-station PV output (W) for consecutive slots starting at midnight."""
    t = np.arange(n_slots)
    return pv_generation(config, start_day_of_year + t // SLOTS_PER_DAY, t % SLOTS_PER_DAY)


def net_zero_rate(emissions_baseline_t: float, emissions_with_t: float) -> float:
    """Share of baseline emissions removed, ``1 - with/baseline`` in [0, 1]."""
    if not emissions_baseline_t > 0:
        raise ValueError("baseline emissions must be > 0")
    return float(np.clip(1.0 - emissions_with_t / emissions_baseline_t, 0.0, 1.0))


def curtailment(pv_w, load_w) -> float:
    """PV energy (MWh) the stations cannot absorb: ``Σ max(0, pv - load) · 0.5 h``."""
    pv = np.asarray(pv_w, dtype=float)
    ld = np.asarray(load_w, dtype=float)
    if pv.shape != ld.shape:
        raise ValueError("series must be aligned")
    return float(np.maximum(pv - ld, 0.0).sum() * SLOT_HOURS / 1e6)


def grid_draw(pv_w, load_w) -> np.ndarray:
    """Power still taken from the grid, ``max(0, load - pv)`` (W)."""
    return np.maximum(np.asarray(load_w, dtype=float) - np.asarray(pv_w, dtype=float), 0.0)


@dataclass(frozen=True)
class CostModel:
    """Placeholder PV cost table (CNY)."""

    capex_per_kw: float = 4000.0
    opex_rate: float = 0.01
    inverter_cost_fraction: float = 0.10
    inverter_replacement_year: int = 10
    lifetime_years: int = 20
    discount_rate: float = 0.05

    def __post_init__(self):
        if self.capex_per_kw < 0 or self.inverter_cost_fraction < 0:
            raise ValueError("costs must be >= 0")
        if not (0 <= self.opex_rate < 1 and 0 <= self.discount_rate < 1):
            raise ValueError("rates must lie in [0, 1)")
        if self.lifetime_years < 1 or not 0 <= self.inverter_replacement_year <= self.lifetime_years:
            raise ValueError("need 1 <= lifetime and replacement year within lifetime")

    def capital_recovery_factor(self) -> float:
        r, n = self.discount_rate, self.lifetime_years
        if r == 0:
            return 1.0 / n
        g = (1 + r) ** n
        return r * g / (g - 1)

    def annual_cost(self, investment: float) -> float:
        crf = self.capital_recovery_factor()
        replacement = 0.0
        if self.inverter_replacement_year > 0 and self.inverter_cost_fraction > 0:
            replacement = (self.inverter_cost_fraction * investment
                           / (1 + self.discount_rate) ** self.inverter_replacement_year)
        return (investment + replacement) * crf + self.opex_rate * investment


def lcca(cost_model: CostModel, total_investment: float, co2_abated_per_year_t: float) -> float:
    """Annualized cost per tonne CO2 abated per year.

    >>> lcca(CostModel(opex_rate=0, inverter_cost_fraction=0, discount_rate=0), 100, 1)
    5.0
    """
    if not co2_abated_per_year_t > 0:
        raise UndefinedLCCA("LCCA is undefined without positive abatement")
    return cost_model.annual_cost(total_investment) / co2_abated_per_year_t


@dataclass(frozen=True)
class SweepPoint:
    scheme: str              # "pv" or "pv+deep"
    panel_area_m2: float
    investment: float
    pv_mwh: float
    curtailment_mwh: float
    emissions_t: float
    net_zero_rate: float
    lcca: float              # NaN when nothing is abated


SWEEP_HEADER = ["scheme", "panel_area_m2", "investment", "pv_mwh", "curtailment_mwh",
                "emissions_t", "net_zero_rate", "lcca"]


def sweep(station_power_w: dict, start_day_of_year: int, areas, configs=None,
          costs: CostModel | None = None, gamma_co2: float = 0.68) -> list[SweepPoint]:
    """Net-zero rate, curtailment and LCCA over panel sizes.

    ``station_power_w`` maps a controller name to per-station power
    ``(B, T)`` in W. ``"none"`` must be present; it is the emissions baseline
    and its rows are labelled ``pv``, the others ``pv+<name>``. ``configs``
    is one :class:`PvConfig` for every station or a list with one per
    station; each swept area replaces the panel area of all of them.
    """
    costs = CostModel() if costs is None else costs
    baseline = np.asarray(station_power_w["none"], dtype=float)
    n_bs, n_slots = baseline.shape
    configs = _per_station(configs, n_bs)
    years = n_slots * SLOT_HOURS / (24 * 365)
    to_t = SLOT_HOURS / 1e6 * gamma_co2
    e_base = baseline.sum() * to_t
    out = []
    for area in areas:
        cfgs = [replace(c, panel_area_m2=float(area)) for c in configs]
        pv = np.stack([pv_series(c, n_slots, start_day_of_year) for c in cfgs])
        investment = sum(c.peak_kw for c in cfgs) * costs.capex_per_kw
        for name, p in station_power_w.items():
            p = np.asarray(p, dtype=float)
            emis = grid_draw(pv, p).sum() * to_t
            abated = (e_base - emis) / years
            point_lcca = lcca(costs, investment, abated) if abated > 0 and investment > 0 else float("nan")
            scheme = "pv" if name == "none" else f"pv+{name}"
            out.append(SweepPoint(scheme, float(area), float(investment), float(pv.sum() * SLOT_HOURS / 1e6),
                                  curtailment(pv, p), float(emis), net_zero_rate(e_base, emis), point_lcca))
    return out


def _per_station(configs, n_bs):
    if configs is None:
        configs = PvConfig()
    if isinstance(configs, PvConfig):
        return [configs] * n_bs
    configs = list(configs)
    if len(configs) != n_bs:
        raise ValueError(f"need one PV config per station ({n_bs}), got {len(configs)}")
    return configs


def area_for_investment(investment: float, configs, n_bs: int, costs: CostModel) -> float:
    """Uniform panel area (m2) whose total capital cost equals ``investment``."""
    per_m2 = sum(c.efficiency * STC_W_PER_M2 / 1000.0 for c in _per_station(configs, n_bs)) * costs.capex_per_kw
    if per_m2 <= 0:
        raise ValueError("PV capital cost is zero; cannot convert investment to area")
    return investment / per_m2


def write_sweep(path, points) -> None:
    write_csv(path, SWEEP_HEADER, ([getattr(p, f) for f in SWEEP_HEADER] for p in points))


# files ---------------------------------------------------------------------

PV_HEADER = ["station_id", "panel_area_m2", "efficiency", "derate"]
COSTS_HEADER = ["item", "value"]


def read_pv(path, latitude_deg: float = PvConfig.latitude_deg) -> dict[str, PvConfig]:
    out = {}
    for row in CsvReader(path, PV_HEADER):
        sid = row.str("station_id")
        if sid in out:
            raise FormatError(Path(path), row.line, "station_id", f"duplicate station {sid!r}")
        try:
            out[sid] = PvConfig(row.float("panel_area_m2"), row.float("efficiency"), latitude_deg,
                                row.float("derate"))
        except ValueError as e:
            if isinstance(e, FormatError):
                raise
            raise FormatError(Path(path), row.line, None, str(e)) from None
    return out


def write_pv(path, configs: dict[str, PvConfig]) -> None:
    write_csv(path, PV_HEADER, ((sid, c.panel_area_m2, c.efficiency, c.derate) for sid, c in configs.items()))


def read_costs(path) -> CostModel:
    known = {f.name: f.type for f in fields(CostModel)}
    kw = {}
    for row in CsvReader(path, COSTS_HEADER):
        item = row.str("item")
        if item not in known:
            raise FormatError(Path(path), row.line, "item", f"unknown cost item {item!r}")
        kw[item] = row.int("value") if item.endswith("_year") or item.endswith("_years") else row.float("value")
    try:
        return CostModel(**kw)
    except ValueError as e:
        raise FormatError(Path(path), None, None, str(e)) from None


def write_costs(path, costs: CostModel) -> None:
    write_csv(path, COSTS_HEADER, asdict(costs).items())
