"""Extrapolating a reference city to whole regions by Monte Carlo.

Each trial draws a region's worth of base stations, with replacement, from
the reference city's stations of the same generation and sums their daily
capacity and full-load energy. Regional energy then follows from
``E = E_max (M + L~)`` with ``L~`` the region's traffic over its sampled
capacity, and emissions from a grid emission factor.

Two intervals come out of the simulation. ``*_ci`` is the 95% interval of
the Monte Carlo estimate itself (mean ± 1.96 standard errors), which narrows
as trials are added. ``*_spread`` holds the 2.5/97.5 percentiles of the
per-trial totals, i.e. how much a region of that composition can vary.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ._io import CsvReader, FormatError, write_csv
from .energy_model import SLOT_HOURS, network_energy
from .metrics import GB_PER_TB
from .scenario import SLOTS_PER_DAY, scale_traffic

DEFAULT_TRIALS = 1000
GRID_CO2_T_PER_MWH = 0.68
Z95 = 1.959963984540054


class CapacityExceeded(ValueError):
    pass


@dataclass(frozen=True)
class RegionProfile:
    name: str
    n_4g: int
    n_5g: int
    n_users: int
    area_km2: float = 1.0

    def __post_init__(self):
        if min(self.n_4g, self.n_5g, self.n_users) < 0:
            raise ValueError(f"region {self.name}: counts must be >= 0")
        if self.n_4g + self.n_5g == 0:
            raise ValueError(f"region {self.name}: needs at least one base station")
        if not self.area_km2 > 0:
            raise ValueError(f"region {self.name}: area must be > 0")


@dataclass(frozen=True, eq=False)
class ReferencePool:
    """Per-station daily capacity (GB/day) and full-load energy (MWh/day)."""

    is_5g: np.ndarray
    capacity_gb: np.ndarray
    e_max_mwh: np.ndarray

    def __post_init__(self):
        if not (self.is_5g.shape == self.capacity_gb.shape == self.e_max_mwh.shape):
            raise ValueError("pool arrays must align")


def reference_pool(scenario) -> ReferencePool:
    a = scenario.arrays
    days = scenario.n_slots / SLOTS_PER_DAY
    cap = np.bincount(a.cell_bs, weights=a.cap, minlength=scenario.n_bs) * SLOTS_PER_DAY
    full = network_energy(scenario, loads=np.broadcast_to(a.cap[:, None], scenario.traffic.shape).copy())
    e_max = full.station_power_w.sum(axis=1) * SLOT_HOURS / 1e6 / days
    return ReferencePool(np.asarray(a.bs_is_5g, dtype=bool), cap, e_max)


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    c_p: float            # GB/day
    e_max_p: float        # MWh/day
    c_ci: tuple
    e_max_ci: tuple
    c_spread: tuple
    e_max_spread: tuple
    c_samples: np.ndarray
    e_max_samples: np.ndarray

    @property
    def n_trials(self) -> int:
        return len(self.c_samples)


def _mean_ci(x):
    m = float(np.mean(x))
    half = Z95 * float(np.std(x, ddof=1)) / np.sqrt(len(x))
    return m, (m - half, m + half)


def monte_carlo_capacity(region: RegionProfile, pool: ReferencePool, n_trials: int = DEFAULT_TRIALS,
                         seed: int = 0) -> MonteCarloResult:
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    rng = np.random.default_rng(seed)
    c = np.zeros(n_trials)
    e = np.zeros(n_trials)
    for count, want_5g in ((region.n_4g, False), (region.n_5g, True)):
        if count == 0:
            continue
        idx = np.flatnonzero(pool.is_5g == want_5g)
        if idx.size == 0:
            raise ValueError(f"reference pool has no {'5G' if want_5g else '4G'} stations")
        draws = rng.multinomial(count, np.full(idx.size, 1.0 / idx.size), size=n_trials)
        c += draws @ pool.capacity_gb[idx]
        e += draws @ pool.e_max_mwh[idx]
    c_p, c_ci = _mean_ci(c)
    e_p, e_ci = _mean_ci(e)
    return MonteCarloResult(c_p, e_p, c_ci, e_ci,
                            tuple(np.percentile(c, [2.5, 97.5])), tuple(np.percentile(e, [2.5, 97.5])),
                            c, e)


def avg_traffic_per_user(l_4g, l_5g, n_users) -> float:
    if n_users <= 0:
        raise ValueError("n_users must be > 0")
    return (l_4g + l_5g) / n_users


@dataclass(frozen=True)
class RegionalEstimate:
    name: str
    c_p: float        # GB/day
    e_max_p: float    # MWh/day
    l_p: float        # GB/day
    m_p: float
    ee_p: float       # TB/MWh
    e_p: float        # MWh/day
    co2_p: float      # t/day
    ci_low: float     # bounds on co2_p
    ci_high: float

    @property
    def l_tilde(self) -> float:
        return self.l_p / self.c_p


def _energy(e_max, m, l_tilde):
    return e_max * (m + l_tilde)


def regional_energy_and_carbon(region: RegionProfile, mc: MonteCarloResult, traffic_per_user: float,
                               m_p: float, gamma_co2: float = GRID_CO2_T_PER_MWH) -> RegionalEstimate:
    """Daily energy and CO2 of ``region``.

    The CO2 interval evaluates the formula at the Monte Carlo interval ends,
    pairing low capacity with high ``E_max`` and vice versa.
    """
    if not 0 <= m_p <= 1:
        raise ValueError("m_p must lie in [0, 1]")
    l_p = traffic_per_user * region.n_users
    l_tilde = l_p / mc.c_p
    if not 0 <= l_tilde <= 1:
        raise CapacityExceeded(f"region {region.name}: traffic {l_p:.6g} GB/day exceeds "
                               f"sampled capacity {mc.c_p:.6g} GB/day")
    e_p = _energy(mc.e_max_p, m_p, l_tilde)
    desired = mc.c_p / GB_PER_TB / mc.e_max_p
    ee_p = desired / (1.0 + m_p / l_tilde) if l_tilde > 0 else 0.0
    lo = gamma_co2 * _energy(mc.e_max_ci[0], m_p, min(1.0, l_p / mc.c_ci[1]))
    hi = gamma_co2 * _energy(mc.e_max_ci[1], m_p, min(1.0, l_p / mc.c_ci[0]))
    co2 = e_p * gamma_co2
    return RegionalEstimate(region.name, mc.c_p, mc.e_max_p, l_p, m_p, ee_p, e_p, co2,
                            min(lo, co2), max(hi, co2))


# misalignment lookup ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MCurve:
    """Network misalignment as a function of utilisation for one controller."""

    l_tilde: np.ndarray
    m: np.ndarray
    controller: str = "none"

    def __call__(self, l_tilde: float) -> float:
        return float(np.clip(np.interp(l_tilde, self.l_tilde, self.m), 0.0, 1.0))


def build_m_curve(scenario, schedule_fn: Callable | None = None, factors=(0.25, 0.5, 1.0, 1.5, 2.0, 3.0),
                  controller: str = "none") -> MCurve:
    """Sweep traffic scale factors; record week-aggregate ``(L~, M)`` pairs.

    ``schedule_fn(scenario) -> asleep (C, T)`` picks the sleep schedule;
    ``None`` keeps every cell awake.
    """
    pts = []
    for f in factors:
        s = scale_traffic(scenario, f)
        asleep = None if schedule_fn is None else np.asarray(schedule_fn(s), dtype=bool)
        ne = network_energy(s, asleep=asleep)
        e, emax = ne.energy_mwh.sum(), ne.e_max_mwh.sum()
        lt = ne.load_gb.sum() / (ne.capacity_gb * s.n_slots)
        pts.append((lt, e / emax - lt))
    pts.sort()
    return MCurve(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), controller)


def pre_5g_carbon_efficiency(scenario, gamma_co2: float = GRID_CO2_T_PER_MWH) -> float:
    """TB per tonne CO2 of the reference city's 4G stations alone, no sleeping."""
    ne = network_energy(scenario, generation="4G")
    return float(ne.load_gb.sum() / GB_PER_TB / (ne.energy_mwh.sum() * gamma_co2))


def trap_comparison(region: RegionProfile, mc: MonteCarloResult, traffic_per_user: float,
                    m_by_controller: dict, ce_baseline: float,
                    gamma_co2: float = GRID_CO2_T_PER_MWH) -> list[dict]:
    """CO2 per controller and the part above what a pre-5G network would emit
    for the same traffic. Rows are sorted by additional CO2, lowest first."""
    rows = []
    for name, m in m_by_controller.items():
        est = regional_energy_and_carbon(region, mc, traffic_per_user, m, gamma_co2)
        base = est.l_p / GB_PER_TB / ce_baseline
        rows.append({"region": region.name, "controller": name, "m_p": m, "co2_t": est.co2_p,
                     "additional_co2_t": max(0.0, est.co2_p - base)})
    rows.sort(key=lambda r: (r["additional_co2_t"], r["controller"]))
    return rows


# files ---------------------------------------------------------------------

REGIONS_HEADER = ["name", "n_4g", "n_5g", "n_users", "area_km2"]
REPORT_HEADER = ["name", "controller", "c_p_gb", "e_max_p_mwh", "l_p_gb", "m_p", "ee_p", "e_p_mwh",
                 "co2_p_t", "co2_ci_low", "co2_ci_high", "c_spread_low", "c_spread_high"]


def read_regions(path) -> list[RegionProfile]:
    out, seen = [], set()
    for row in CsvReader(path, REGIONS_HEADER):
        name = row.str("name")
        if name in seen:
            raise FormatError(Path(path), row.line, "name", f"duplicate region {name!r}")
        seen.add(name)
        try:
            out.append(RegionProfile(name, row.int("n_4g"), row.int("n_5g"), row.int("n_users"),
                                     row.float("area_km2")))
        except ValueError as e:
            if isinstance(e, FormatError):
                raise
            raise FormatError(Path(path), row.line, None, str(e)) from None
    if not out:
        raise FormatError(Path(path), None, None, "no regions")
    return out


def write_regions(path, regions) -> None:
    write_csv(path, REGIONS_HEADER, ((r.name, r.n_4g, r.n_5g, r.n_users, float(r.area_km2)) for r in regions))


def write_region_report(path, rows) -> None:
    """``rows`` are ``(controller, RegionalEstimate, MonteCarloResult)`` triples."""
    write_csv(path, REPORT_HEADER, (
        (e.name, ctrl, e.c_p, e.e_max_p, e.l_p, e.m_p, e.ee_p, e.e_p, e.co2_p, e.ci_low, e.ci_high,
         float(mc.c_spread[0]), float(mc.c_spread[1]))
        for ctrl, e, mc in rows))
