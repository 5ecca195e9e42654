"""Base-station power model.

A station draws ``P_BS = P_tx + P_cooling`` with ``P_tx = P_BBU + sum(P_RRU)``.
RRU power is affine in transmit power, transmit power is affine in the PRB
usage ratio, and a sleeping RRU draws a constant. Cooling is a steady-state
heat balance: the room must reject the electrical heat of the communication
equipment plus envelope gains ``UA * (T_out - T_in)``, at a fixed COP.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from . import kernels

if TYPE_CHECKING:
    from .scenario import BaseStationSpec, Scenario

SLOT_HOURS = 0.5
P_TRANS_CAP_W = 300.0


class Kind(str, enum.Enum):
    FOUR_G_3CELL = "FourG_3cell"
    FIVE_G_3CELL = "FiveG_3cell"
    FIVE_G_6CELL = "FiveG_6cell"

    @property
    def n_cells(self) -> int:
        return 6 if self is Kind.FIVE_G_6CELL else 3

    @property
    def is_5g(self) -> bool:
        return self is not Kind.FOUR_G_3CELL


@dataclass(frozen=True)
class EnergyCoeffs:
    """RRU model coefficients for one hardware class (powers in W)."""

    alpha: float        # RRU power per W of transmit power
    gamma: float        # fixed circuit power
    beta: float         # transmit power per unit PRB ratio
    sigma: float        # transmit power offset; 0 for 5G
    p_trans_max: float  # transmit power cap
    sleep_rru_w: float  # RRU draw in sleep mode

    def __post_init__(self):
        vals = (self.alpha, self.gamma, self.beta, self.sigma, self.p_trans_max, self.sleep_rru_w)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite energy coefficient in {self}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be > 0")
        if self.gamma < 0 or self.sigma < 0 or self.sleep_rru_w < 0:
            raise ValueError("gamma, sigma and sleep_rru_w must be >= 0")
        if not 0 < self.p_trans_max <= P_TRANS_CAP_W:
            raise ValueError(f"p_trans_max must lie in (0, {P_TRANS_CAP_W}]")

    @property
    def idle_w(self) -> float:
        """Awake RRU power at zero load."""
        return rru_power(self, 0.0, asleep=False)

    @property
    def full_w(self) -> float:
        return rru_power(self, 1.0, asleep=False)


# Placeholder coefficient tables. 5G fixed circuit power is 2-3x the 4G value
# and sleep draws sit inside the measured per-class ranges.
DEFAULT_COEFFS: dict[Kind, EnergyCoeffs] = {
    Kind.FOUR_G_3CELL: EnergyCoeffs(alpha=2.0, gamma=250.0, beta=150.0, sigma=20.0,
                                    p_trans_max=300.0, sleep_rru_w=126.47),
    Kind.FIVE_G_3CELL: EnergyCoeffs(alpha=1.6, gamma=700.0, beta=250.0, sigma=0.0,
                                    p_trans_max=300.0, sleep_rru_w=80.0),
    Kind.FIVE_G_6CELL: EnergyCoeffs(alpha=1.5, gamma=520.0, beta=200.0, sigma=0.0,
                                    p_trans_max=300.0, sleep_rru_w=72.0),
}

DEFAULT_BBU_W: dict[Kind, float] = {
    Kind.FOUR_G_3CELL: 89.3771,
    Kind.FIVE_G_3CELL: 305.0409,
    Kind.FIVE_G_6CELL: 499.6484,
}

SLEEP_RANGE_W: dict[bool, tuple[float, float]] = {
    False: (119.03, 133.90),  # 4G
    True: (69.43, 90.56),     # 5G
}


@dataclass(frozen=True)
class CoolingParams:
    """Equipment-room cooling: reference room of 20 m2 held at ``t_indoor_c``."""

    cop: float = 3.0
    ua_w_per_k: float = 40.0
    t_indoor_c: float = 20.0
    room_m2: float = 20.0

    def __post_init__(self):
        if not self.cop > 0:
            raise ValueError("cop must be > 0")
        if self.ua_w_per_k < 0:
            raise ValueError("ua_w_per_k must be >= 0")


@dataclass(frozen=True)
class BsPowerBreakdown:
    p_tx_w: float
    p_cooling_w: float
    p_total_w: float
    rru_w: tuple[float, ...] = field(default=())


def _check_prb(prb_ratio: float) -> float:
    r = float(prb_ratio)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"prb_ratio must lie in [0, 1], got {prb_ratio!r}")
    return r


def transmit_power(coeffs: EnergyCoeffs, prb_ratio: float) -> float:
    """Transmit power in W: ``min(beta * r + sigma, p_trans_max)``."""
    r = _check_prb(prb_ratio)
    return min(coeffs.beta * r + coeffs.sigma, coeffs.p_trans_max)


def rru_power(coeffs: EnergyCoeffs, prb_ratio: float, asleep: bool = False) -> float:
    r = _check_prb(prb_ratio)
    if asleep:
        return coeffs.sleep_rru_w
    return coeffs.alpha * transmit_power(coeffs, r) + coeffs.gamma


def prb_ratio_from_load(load_gb: float, capacity_gb: float) -> float:
    """PRB usage approximated as load over capacity.

    Loads above capacity are rejected: traffic must be redistributed first.
    """
    if not capacity_gb > 0:
        raise ValueError("capacity must be > 0")
    if load_gb < 0:
        raise ValueError("load must be >= 0")
    if load_gb > capacity_gb:
        raise ValueError(f"load {load_gb} GB exceeds capacity {capacity_gb} GB; redistribute first")
    return load_gb / capacity_gb


def cooling_power(p_tx_w: float, outdoor_temp_c: float, cooling: CoolingParams) -> float:
    heat = p_tx_w + cooling.ua_w_per_k * (outdoor_temp_c - cooling.t_indoor_c)
    return max(0.0, heat) / cooling.cop


def base_station_power(
    bs: "BaseStationSpec",
    per_cell_prb: Sequence[float],
    sleep_flags: Sequence[bool],
    outdoor_temp_c: float,
    cooling: CoolingParams = CoolingParams(),
    bbu: Mapping[Kind, float] = DEFAULT_BBU_W,
    coeffs: Mapping[Kind, EnergyCoeffs] = DEFAULT_COEFFS,
) -> BsPowerBreakdown:
    kind = Kind(bs.kind)
    n = len(bs.cell_ids)
    if len(per_cell_prb) != n or len(sleep_flags) != n:
        raise ValueError(f"{bs.id}: expected {n} prb ratios and sleep flags")
    c = coeffs[kind]
    rru = tuple(rru_power(c, r, bool(s)) for r, s in zip(per_cell_prb, sleep_flags))
    p_tx = bbu[kind] + sum(rru)
    p_cool = cooling_power(p_tx, outdoor_temp_c, cooling)
    return BsPowerBreakdown(p_tx, p_cool, p_tx + p_cool, rru)


@dataclass(frozen=True)
class NetworkEnergy:
    """Per-slot network energy over a slot range (all arrays shape ``(T,)``)."""

    energy_mwh: np.ndarray
    e_max_mwh: np.ndarray
    load_gb: np.ndarray
    capacity_gb: float
    station_power_w: np.ndarray  # (B, T) total power per station

    @property
    def e_norm(self) -> np.ndarray:
        return self.energy_mwh / self.e_max_mwh

    @property
    def l_norm(self) -> np.ndarray:
        return self.load_gb / self.capacity_gb

    @property
    def misalignment(self) -> np.ndarray:
        return self.e_norm - self.l_norm


def station_power_arrays(scenario: "Scenario", loads: np.ndarray, asleep: np.ndarray,
                         slots: slice = slice(None)):
    """Run the power kernel for ``loads``/``asleep`` restricted to ``slots``.

    Returns ``(rru, p_tx, p_cool)`` as in :func:`greencell.kernels.station_power`.
    """
    a = scenario.arrays
    prb = loads / a.cap[:, None]
    t_out = scenario.weather[slots]
    cool = scenario.cooling
    return kernels.station_power(prb, asleep, a.alpha, a.gamma, a.beta, a.sigma, a.ptmax,
                                 a.sleep_w, a.cell_bs, a.bbu, t_out,
                                 cool.ua_w_per_k, cool.t_indoor_c, cool.cop)


def network_energy(
    scenario: "Scenario",
    asleep: np.ndarray | None = None,
    loads: np.ndarray | None = None,
    slot_range: tuple[int, int] | None = None,
    generation: str | None = None,
) -> NetworkEnergy:
    """Energy per half-hour slot and the all-awake, full-load maximum.

    ``loads`` are post-redistribution cell loads; when omitted the offered
    traffic is redistributed over the awake cells of each grid. ``generation``
    (``"4G"`` or ``"5G"``) restricts the sums to stations of that generation.
    """
    lo, hi = slot_range if slot_range is not None else (0, scenario.n_slots)
    if not 0 <= lo < hi <= scenario.n_slots:
        raise ValueError(f"bad slot range {slot_range}")
    sl = slice(lo, hi)
    a = scenario.arrays
    if asleep is None:
        asleep = np.zeros((scenario.n_cells, hi - lo), dtype=bool)
    if asleep.shape != (scenario.n_cells, hi - lo):
        raise ValueError("schedule must cover every cell and slot in range")
    if loads is None:
        loads, deficit = kernels.redistribute(scenario.traffic[:, sl], asleep, a.cap,
                                              a.grid_ptr, a.grid_cells)
        if np.any(deficit > 0):
            g, t = np.argwhere(deficit > 0)[0]
            raise ValueError(f"schedule infeasible: grid {scenario.grids[g].id} slot {lo + t}")
    _, p_tx, p_cool = station_power_arrays(scenario, loads, asleep, sl)
    full = np.ones_like(loads)
    _, mx_tx, mx_cool = station_power_arrays(scenario, full * a.cap[:, None], np.zeros_like(asleep), sl)

    bs_sel = np.ones(scenario.n_bs, dtype=bool)
    if generation is not None:
        want_5g = {"4G": False, "5G": True}[generation.upper()]
        bs_sel = a.bs_is_5g == want_5g
    cell_sel = bs_sel[a.cell_bs]
    p_total = p_tx + p_cool
    to_mwh = SLOT_HOURS / 1e6
    return NetworkEnergy(
        energy_mwh=p_total[bs_sel].sum(axis=0) * to_mwh,
        e_max_mwh=(mx_tx + mx_cool)[bs_sel].sum(axis=0) * to_mwh,
        load_gb=loads[cell_sel].sum(axis=0),
        capacity_gb=float(a.cap[cell_sel].sum()),
        station_power_w=p_total,
    )
