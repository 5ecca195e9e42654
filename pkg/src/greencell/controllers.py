"""Baseline sleep controllers and schedule evaluation.

Both baselines keep at least ``min_awake`` cells awake per grid and never let
a grid's awake capacity fall below its offered traffic, so every schedule they
return serves all traffic.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from ._io import CsvReader, FormatError, write_csv
from .checks import check_schedule
from .energy_model import NetworkEnergy, network_energy, station_power_arrays

METHODS = ("none", "threshold", "greedy", "deep")
DEFAULT_THETA = 0.1


class InfeasibleSchedule(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SleepSchedule:
    asleep: np.ndarray   # (C, T) bool
    method: str = "none"

    @property
    def sleep_fraction(self) -> float:
        return float(self.asleep.mean())

    def __eq__(self, other):
        return isinstance(other, SleepSchedule) and np.array_equal(self.asleep, other.asleep)

    __hash__ = None


def all_awake(scenario) -> SleepSchedule:
    return SleepSchedule(np.zeros((scenario.n_cells, scenario.n_slots), dtype=bool), "none")


def redistribute_grid(capacities, traffic, asleep) -> np.ndarray:
    """Loads of one grid in one slot after proportional redistribution.

    >>> redistribute_grid([10, 30], [12, 8], [False, False]).tolist()
    [5.0, 15.0]
    """
    cap = np.asarray(capacities, dtype=float)
    tr = np.asarray(traffic, dtype=float)
    sl = np.asarray(asleep, dtype=bool)
    total = tr.sum()
    awake_cap = cap[~sl].sum()
    if total > awake_cap + kernels.FEAS_TOL:
        raise InfeasibleSchedule(f"awake capacity {awake_cap} GB cannot carry {total} GB")
    if awake_cap == 0:
        return np.zeros_like(cap)
    return np.where(sl, 0.0, total * cap / awake_cap)


def redistribute(scenario, traffic, asleep) -> np.ndarray:
    """Post-redistribution cell loads for every grid and slot, shape ``(C, T)``."""
    a = scenario.arrays
    loads, deficit = kernels.redistribute(traffic, asleep, a.cap, a.grid_ptr, a.grid_cells)
    if np.any(deficit > 0):
        g, t = np.argwhere(deficit > 0)[0]
        raise InfeasibleSchedule(f"grid {scenario.grids[g].id} slot {t}: "
                                 f"{deficit[g, t]:.6g} GB of traffic cannot be served")
    return loads


def _ensure_feasible(scenario, traffic, asleep, method):
    problems = check_schedule(scenario, asleep, traffic)
    if problems:  # pragma: no cover - controllers guard feasibility themselves
        raise InfeasibleSchedule(f"{method} produced an infeasible schedule: {problems[0]}")
    return SleepSchedule(asleep, method)


def threshold_controller(scenario, traffic=None, theta: float = DEFAULT_THETA,
                         min_awake: int = 1) -> SleepSchedule:
    """Each cell sleeps when its own load ratio is below ``theta``, unless that
    would leave its grid short of capacity."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    traffic = scenario.traffic if traffic is None else np.asarray(traffic, dtype=float)
    a = scenario.arrays
    asleep = kernels.threshold_sleep(traffic, a.cap, float(theta), a.grid_ptr, a.grid_cells, int(min_awake))
    return _ensure_feasible(scenario, traffic, asleep, "threshold")


def greedy_key(scenario, traffic) -> np.ndarray:
    """Power saved per GB of capacity by sleeping a cell at its current load."""
    a = scenario.arrays
    prb = np.minimum(traffic / a.cap[:, None], 1.0)
    tx = np.minimum(a.beta[:, None] * prb + a.sigma[:, None], a.ptmax[:, None])
    awake = a.alpha[:, None] * tx + a.gamma[:, None]
    return (awake - a.sleep_w[:, None]) / a.cap[:, None]


def greedy_controller(scenario, traffic=None, min_awake: int = 1) -> SleepSchedule:
    """Per grid and slot, sleep cells in descending saving-per-capacity order
    while the remaining awake cells still cover the grid's traffic."""
    traffic = scenario.traffic if traffic is None else np.asarray(traffic, dtype=float)
    a = scenario.arrays
    key = greedy_key(scenario, traffic)
    asleep = kernels.greedy_sleep(traffic, a.cap, key, a.grid_ptr, a.grid_cells, int(min_awake))
    return _ensure_feasible(scenario, traffic, asleep, "greedy")


@dataclass(frozen=True, eq=False)
class ScheduleEvaluation:
    energy: NetworkEnergy
    loads: np.ndarray            # (C, T) post-redistribution
    grid_feasible: np.ndarray    # (G, T) bool

    @property
    def m(self) -> np.ndarray:
        return self.energy.misalignment

    @property
    def mean_m(self) -> float:
        return float(self.m.mean())

    @property
    def total_energy_mwh(self) -> float:
        return float(self.energy.energy_mwh.sum())


def evaluate_schedule(scenario, schedule: SleepSchedule | np.ndarray | None = None,
                      traffic=None, generation: str | None = None) -> ScheduleEvaluation:
    """Redistribute traffic under ``schedule`` and compute energy and M per slot.

    ``scenario.weather`` supplies outdoor temperatures.
    """
    traffic = scenario.traffic if traffic is None else np.asarray(traffic, dtype=float)
    if schedule is None:
        asleep = np.zeros(traffic.shape, dtype=bool)
    else:
        asleep = schedule.asleep if isinstance(schedule, SleepSchedule) else np.asarray(schedule, dtype=bool)
    a = scenario.arrays
    loads, deficit = kernels.redistribute(traffic, asleep, a.cap, a.grid_ptr, a.grid_cells)
    feasible = deficit <= 0
    if not feasible.all():
        g, t = np.argwhere(~feasible)[0]
        raise InfeasibleSchedule(f"grid {scenario.grids[g].id} slot {t}: schedule drops traffic")
    ne = network_energy(scenario.with_traffic(traffic) if traffic is not scenario.traffic else scenario,
                        asleep=asleep, loads=loads, generation=generation)
    return ScheduleEvaluation(ne, loads, feasible)


def station_power(scenario, schedule, traffic=None) -> np.ndarray:
    """Total power per station and slot (W) under ``schedule``, shape ``(B, T)``."""
    traffic = scenario.traffic if traffic is None else traffic
    loads = redistribute(scenario, traffic, schedule.asleep)
    _, p_tx, p_cool = station_power_arrays(scenario, loads, schedule.asleep)
    return p_tx + p_cool


def save_schedule(schedule: SleepSchedule, scenario, path) -> None:
    write_csv(path, ["cell_id", "slot", "asleep"],
              ((c.id, t, int(schedule.asleep[i, t])) for i, c in enumerate(scenario.cells)
               for t in range(schedule.asleep.shape[1])))


def load_schedule(path, scenario, method: str = "file") -> SleepSchedule:
    path = Path(path)
    index = scenario.cell_index
    asleep = np.zeros((scenario.n_cells, scenario.n_slots), dtype=np.int8) - 1
    for row in CsvReader(path, ["cell_id", "slot", "asleep"]):
        cid = row.str("cell_id")
        if cid not in index:
            raise FormatError(path, row.line, "cell_id", f"unknown cell {cid!r}")
        t = row.int("slot")
        if not 0 <= t < scenario.n_slots:
            raise FormatError(path, row.line, "slot", f"slot {t} out of range")
        asleep[index[cid], t] = row.bool("asleep")
    if (asleep < 0).any():
        i, t = np.argwhere(asleep < 0)[0]
        raise FormatError(path, None, None, f"schedule misses cell {scenario.cells[i].id} slot {t}")
    return SleepSchedule(asleep.astype(bool), method)
