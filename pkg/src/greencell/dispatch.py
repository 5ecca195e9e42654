"""Day-ahead unit commitment, coal accounting and mobile-network carbon attribution.

The commitment problem minimises generation, start-up and shut-down cost
subject to loss-adjusted power balance, unit output bounds, a committed
capacity reserve, minimum up/down times and start/stop logic. It is solved
exactly by a branch-and-bound over time: each node is a joint unit state
(on/off and time in state, clipped at the longest min-time), per-slot output
for a given on/off pattern is the analytic merit-order dispatch, nodes are
bounded by ``cost so far + sum of per-slot lower bounds`` against a
priority-list incumbent, and dominated nodes (same joint state, higher cost)
are dropped. Past ``max_states`` live nodes or ``time_limit`` seconds the
solver returns the repaired priority-list schedule flagged ``optimal=False``.

Conventions: every unit is off before slot 0 with no pending min-down time;
min up/down windows are truncated at the end of the horizon; costs are per
MWh, so a slot of ``x`` MW costs ``0.5 * c_power * x``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from ._io import CsvReader, FormatError, read_toml, write_csv, write_toml

SLOT_HOURS = 0.5
COAL_RATE_LARGE = 0.3007   # t/MWh, units above 300 MW
COAL_RATE_SMALL = 0.3357   # t/MWh, units of 300 MW or less
LARGE_UNIT_MW = 300.0
MAX_UNITS = 12
DEFAULT_R_LOSS = 0.05

COAL_OXIDATION = 0.99
COAL_HEAT_GJ_PER_T = 20.95
COAL_CARBON_TC_PER_TJ = 26.59
CO2_PER_C = 3.67


class InfeasibleDispatch(ValueError):
    def __init__(self, slot: int | None, msg: str):
        self.slot = slot
        super().__init__(f"slot {slot}: {msg}" if slot is not None else msg)


@dataclass(frozen=True)
class PowerUnit:
    id: str
    p_min_mw: float
    p_max_mw: float
    c_power: float          # cost per MWh
    c_up: float = 0.0       # cost per start-up
    c_down: float = 0.0     # cost per shut-down
    t_up_slots: int = 1
    t_down_slots: int = 1

    def __post_init__(self):
        if not 0 < self.p_min_mw <= self.p_max_mw:
            raise ValueError(f"unit {self.id}: need 0 < p_min <= p_max")
        if self.t_up_slots < 1 or self.t_down_slots < 1:
            raise ValueError(f"unit {self.id}: min up/down times must be >= 1 slot")
        if min(self.c_power, self.c_up, self.c_down) < 0:
            raise ValueError(f"unit {self.id}: costs must be >= 0")

    @property
    def coal_rate(self) -> float:
        """Coal burnt per MWh generated, t/MWh."""
        return COAL_RATE_LARGE if self.p_max_mw > LARGE_UNIT_MW else COAL_RATE_SMALL


@dataclass(frozen=True, eq=False)
class DispatchInstance:
    units: tuple[PowerUnit, ...]
    p_load: np.ndarray      # (T,) MW, local load
    p_outside: np.ndarray   # (T,) MW, imports
    r_loss: float
    p_res: np.ndarray       # (T,) MW, committed-capacity requirement

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        for name in ("p_load", "p_outside", "p_res"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
        T = self.p_load.shape
        if len(T) != 1 or T[0] < 1 or self.p_outside.shape != T or self.p_res.shape != T:
            raise ValueError("load, import and reserve series must be 1-D and aligned")
        if not 0 <= self.r_loss < 1:
            raise ValueError("r_loss must lie in [0, 1)")
        if not self.units:
            raise ValueError("instance has no units")
        if len({u.id for u in self.units}) != len(self.units):
            raise ValueError("duplicate unit id")

    @property
    def n_slots(self) -> int:
        return self.p_load.shape[0]

    @property
    def demand(self) -> np.ndarray:
        """Generation required from local units, MW."""
        return self.p_load / (1.0 - self.r_loss) - self.p_outside

    def with_load(self, p_load) -> "DispatchInstance":
        return replace(self, p_load=np.asarray(p_load, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    x_power: np.ndarray     # (n, T) MW
    x_on: np.ndarray        # (n, T) int8
    x_up: np.ndarray
    x_down: np.ndarray
    objective: float
    feasible: bool
    optimal: bool
    coal_rates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    unit_ids: tuple[str, ...] = ()


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------

def _switches(on: np.ndarray):
    prev = np.concatenate([np.zeros((on.shape[0], 1), dtype=on.dtype), on[:, :-1]], axis=1)
    up = ((on == 1) & (prev == 0)).astype(np.int8)
    down = ((on == 0) & (prev == 1)).astype(np.int8)
    return up, down


def _min_times_ok(on: np.ndarray, t_up: np.ndarray, t_down: np.ndarray) -> bool:
    n, T = on.shape
    for i in range(n):
        run_val, run_len, first = on[i, 0], 0, True
        for t in range(T + 1):
            v = on[i, t] if t < T else -1
            if v == run_val:
                run_len += 1
                continue
            at_end = t == T
            if run_val == 1 and run_len < t_up[i] and not at_end:
                return False
            if run_val == 0 and run_len < t_down[i] and not first and not at_end:
                return False
            first = False
            run_val, run_len = v, 1
    return True


def _schedule_cost(on, table, c_up, c_down):
    pats = (on.astype(np.int64) << np.arange(on.shape[0])[:, None]).sum(axis=0)
    gen = table[np.arange(on.shape[1]), pats].sum()
    up, down = _switches(on)
    return float(gen + (up.sum(axis=1) * c_up).sum() + (down.sum(axis=1) * c_down).sum()), pats


def _priority_list(table, t_up, t_down, n_units, max_rounds=50):
    """Myopic cheapest pattern per slot, then repair min up/down violations by
    keeping units on. Returns an on/off matrix or None."""
    T = table.shape[0]
    pats = np.argmin(table, axis=1)
    on = ((pats[None, :] >> np.arange(n_units)[:, None]) & 1).astype(np.int8)
    for _ in range(max_rounds):
        changed = False
        for i in range(n_units):
            row = on[i]
            t = 0
            seen_on = False
            while t < T:
                v = row[t]
                e = t
                while e < T and row[e] == v:
                    e += 1
                length = e - t
                if v == 1:
                    seen_on = True
                    if length < t_up[i] and e < T:
                        row[e:min(T, t + t_up[i])] = 1
                        changed = True
                elif seen_on and e < T and length < t_down[i]:
                    row[t:e] = 1
                    changed = True
                t = e
        if not changed:
            break
    pats = (on.astype(np.int64) << np.arange(n_units)[:, None]).sum(axis=0)
    if not np.all(np.isfinite(table[np.arange(T), pats])):
        return None
    if not _min_times_ok(on, t_up, t_down):
        return None
    return on


def solve_unit_commitment(inst: DispatchInstance, time_limit: float = 30.0,
                          max_states: int = 200_000) -> DispatchSolution:
    """Minimum-cost commitment and dispatch for ``inst``.

    Raises :class:`InfeasibleDispatch` naming the first slot that cannot be
    served (demand or reserve above total capacity, negative net demand, or
    no commitment compatible with the min up/down times).
    """
    units = inst.units
    n, T = len(units), inst.n_slots
    if n > MAX_UNITS:
        raise ValueError(f"at most {MAX_UNITS} units are supported")
    t0 = time.perf_counter()
    pmin = np.array([u.p_min_mw for u in units])
    pmax = np.array([u.p_max_mw for u in units])
    cost = np.array([u.c_power for u in units])
    c_up = np.array([u.c_up for u in units])
    c_down = np.array([u.c_down for u in units])
    t_up = np.array([u.t_up_slots for u in units], dtype=np.int64)
    t_down = np.array([u.t_down_slots for u in units], dtype=np.int64)
    demand = inst.demand

    total = pmax.sum()
    for t in range(T):
        tol = 1e-9 * max(1.0, abs(demand[t]))
        if demand[t] < -tol:
            raise InfeasibleDispatch(t, f"imports exceed loss-adjusted load by {-demand[t]:.6g} MW")
        if demand[t] > total + tol:
            raise InfeasibleDispatch(t, f"demand {demand[t]:.6g} MW exceeds total capacity {total:.6g} MW")
        if inst.p_res[t] > total + tol:
            raise InfeasibleDispatch(t, f"reserve {inst.p_res[t]:.6g} MW exceeds total capacity")

    order = np.array(sorted(range(n), key=lambda i: (cost[i], i)), dtype=np.int64)
    table, power = kernels.dispatch_table(np.maximum(demand, 0.0), inst.p_res, pmin, pmax, cost, order)
    bad = np.flatnonzero(~np.isfinite(table).any(axis=1))
    if bad.size:
        raise InfeasibleDispatch(int(bad[0]), "no on/off pattern can meet demand within unit bounds")

    lower = table.min(axis=1)
    togo = np.concatenate([np.cumsum(lower[::-1])[::-1], [0.0]])

    incumbent = _priority_list(table, t_up, t_down, n)
    best = np.inf
    if incumbent is not None:
        best, _ = _schedule_cost(incumbent, table, c_up, c_down)

    caps = np.maximum(np.maximum(t_up, t_down), 1)
    radix = 2 * caps
    stride = np.concatenate([[1], np.cumprod(radix)[:-1]]).astype(np.int64)
    n_pat = 1 << n
    bits = ((np.arange(n_pat)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)

    codes = np.array([int(((caps - 1) * stride).sum())], dtype=np.int64)
    costs = np.zeros(1)
    history = []
    timed_out = False
    for t in range(T):
        v = (codes[:, None] // stride[None, :]) % radix[None, :]
        s = v >= caps
        d = v - s * caps + 1
        slot_ok = np.flatnonzero(np.isfinite(table[t]))
        chunk = max(1, int(4_000_000 // max(1, codes.size * n)))
        cand_code, cand_cost, cand_parent, cand_pat = [], [], [], []
        bound = best + 1e-9 * max(1.0, abs(best)) if np.isfinite(best) else np.inf
        for k in range(0, slot_ok.size, chunk):
            pc = slot_ok[k:k + chunk]
            on = bits[pc][:, None, :]
            same = s[None] == on
            start = ~s[None] & on
            stop = s[None] & ~on
            allowed = same | (start & (d[None] >= t_down)) | (stop & (d[None] >= t_up))
            ok = allowed.all(axis=2)
            d_new = np.where(same, np.minimum(d[None] + 1, caps), 1)
            v_new = on * caps + d_new - 1
            code_new = (v_new * stride).sum(axis=2)
            trans = (start * c_up).sum(axis=2) + (stop * c_down).sum(axis=2)
            new_cost = costs[None, :] + trans + table[t, pc][:, None]
            ok &= new_cost + togo[t + 1] <= bound
            pi, si = np.nonzero(ok)
            cand_code.append(code_new[pi, si])
            cand_cost.append(new_cost[pi, si])
            cand_parent.append(si)
            cand_pat.append(pc[pi])
        cc = np.concatenate(cand_code) if cand_code else np.zeros(0, dtype=np.int64)
        if cc.size == 0:
            if incumbent is not None:
                return _build_solution(inst, incumbent, table, power, c_up, c_down, optimal=True)
            raise InfeasibleDispatch(t, "min up/down times leave no feasible commitment")
        ccost = np.concatenate(cand_cost)
        cpar = np.concatenate(cand_parent)
        cpat = np.concatenate(cand_pat)
        o = np.lexsort((cpat, cpar, ccost, cc))
        keep = o[np.concatenate([[True], cc[o][1:] != cc[o][:-1]])]
        codes, costs = cc[keep], ccost[keep]
        history.append((cpar[keep], cpat[keep]))
        if codes.size > max_states or time.perf_counter() - t0 > time_limit:
            timed_out = True
            break

    if timed_out:
        if incumbent is None:
            raise RuntimeError("search budget exhausted before any feasible schedule was found")
        return _build_solution(inst, incumbent, table, power, c_up, c_down, optimal=False)

    j = int(np.argmin(costs))
    pats = np.empty(T, dtype=np.int64)
    for t in range(T - 1, -1, -1):
        parent, pat = history[t]
        pats[t] = pat[j]
        j = int(parent[j])
    on = ((pats[None, :] >> np.arange(n)[:, None]) & 1).astype(np.int8)
    return _build_solution(inst, on, table, power, c_up, c_down, optimal=True)


def _build_solution(inst, on, table, power, c_up, c_down, optimal) -> DispatchSolution:
    T = inst.n_slots
    obj, pats = _schedule_cost(on, table, c_up, c_down)
    x_power = power[np.arange(T), pats, :].T.copy()
    up, down = _switches(on)
    return DispatchSolution(x_power=x_power, x_on=on, x_up=up, x_down=down, objective=obj,
                            feasible=True, optimal=optimal,
                            coal_rates=np.array([u.coal_rate for u in inst.units]),
                            unit_ids=tuple(u.id for u in inst.units))


# --------------------------------------------------------------------------
# coal and carbon
# --------------------------------------------------------------------------

def coal_consumption(sol: DispatchSolution) -> float:
    """Tonnes of coal burnt over the horizon: ``sum 0.5 * rate_i * x_i(t)``."""
    return float(SLOT_HOURS * (sol.coal_rates[:, None] * sol.x_power).sum())


def emission_factor(o: float = COAL_OXIDATION, h_gj_per_t: float = COAL_HEAT_GJ_PER_T,
                    alpha_tc_per_tj: float = COAL_CARBON_TC_PER_TJ) -> float:
    """tCO2 per tonne of coal from oxidation rate, heating value and carbon content.

    >>> round(emission_factor(), 2)
    2.02
    """
    if o < 0 or h_gj_per_t <= 0 or alpha_tc_per_tj <= 0:
        raise ValueError("oxidation must be >= 0; heating value and carbon content > 0")
    return o * (h_gj_per_t / 1000.0) * alpha_tc_per_tj * CO2_PER_C


@dataclass(frozen=True)
class CarbonAttribution:
    coal_t: float
    co2_t: float
    with_bs: DispatchSolution
    without_bs: DispatchSolution

    def grid_factor(self, bs_energy_mwh: float) -> float:
        """Attributed tCO2 per MWh delivered to the stations."""
        return self.co2_t / bs_energy_mwh


def attribute_mobile_carbon(inst_base: DispatchInstance, p_bs_mw, e_coal: float | None = None,
                            **solver_kw) -> CarbonAttribution:
    """Coal and CO2 caused by the stations' load, by differencing two optimal
    dispatches (with and without ``p_bs_mw`` added to the base load)."""
    p_bs = np.asarray(p_bs_mw, dtype=np.float64)
    if p_bs.shape != inst_base.p_load.shape:
        raise ValueError("station load must align with the instance slots")
    if np.any(p_bs < 0):
        raise ValueError("station load must be >= 0")
    e = emission_factor() if e_coal is None else e_coal
    without = solve_unit_commitment(inst_base, **solver_kw)
    with_bs = solve_unit_commitment(inst_base.with_load(inst_base.p_load + p_bs), **solver_kw)
    coal = float(SLOT_HOURS * (without.coal_rates[:, None] * (with_bs.x_power - without.x_power)).sum())
    return CarbonAttribution(coal, e * coal, with_bs, without)


def net_bs_load_after_pv(p_hat_bs, pv):
    """Grid power drawn by each station after its own PV: ``max(0, load - pv)``.

    Works on aligned arrays of any shape; sum over the station axis for the
    network total.
    """
    p_hat = np.asarray(p_hat_bs, dtype=np.float64)
    pv = np.asarray(pv, dtype=np.float64)
    if p_hat.shape != pv.shape:
        raise ValueError("load and PV series must be aligned")
    if np.any(p_hat < 0) or np.any(pv < 0):
        raise ValueError("load and PV must be >= 0")
    return np.maximum(p_hat - pv, 0.0)


# --------------------------------------------------------------------------
# default instance and files
# --------------------------------------------------------------------------

def double_peak_load(n_slots: int = 48, base_mw: float = 820.0, morning_mw: float = 480.0,
                     evening_mw: float = 560.0) -> np.ndarray:
    """Parametric city load: night trough with late-morning and evening peaks."""
    h = (np.arange(n_slots) % 48 + 0.5) * 0.5
    bump = lambda c, w: np.exp(-0.5 * ((h - c) / w) ** 2)
    return base_mw + morning_mw * bump(11.0, 2.5) + evening_mw * bump(20.0, 2.2) + 120.0 * bump(15.5, 3.0)


def default_instance(n_slots: int = 48, p_orig=None, reserve_margin: float = 1.1) -> DispatchInstance:
    """Three local coal plants plus a flat import, loss rate 5%."""
    units = (
        PowerUnit("U1", 280.0, 700.0, c_power=290.0, c_up=60000.0, c_down=20000.0,
                  t_up_slots=8, t_down_slots=6),
        PowerUnit("U2", 240.0, 600.0, c_power=300.0, c_up=45000.0, c_down=15000.0,
                  t_up_slots=6, t_down_slots=6),
        PowerUnit("U3", 90.0, 300.0, c_power=345.0, c_up=8000.0, c_down=3000.0,
                  t_up_slots=4, t_down_slots=4),
    )
    load = double_peak_load(n_slots) if p_orig is None else np.asarray(p_orig, dtype=np.float64)
    r_loss = DEFAULT_R_LOSS
    outside = np.full(n_slots, 220.0)
    res = reserve_margin * (load / (1 - r_loss) - outside)
    return DispatchInstance(units, load, outside, r_loss, res)


_UNIT_HEADER = ["id", "p_min_mw", "p_max_mw", "c_power", "c_up", "c_down", "t_up_slots", "t_down_slots"]
_LOAD_HEADER = ["slot", "p_orig_mw", "p_outside_mw", "p_res_mw"]


def save_instance(inst: DispatchInstance, path) -> Path:
    """Write ``dispatch.csv``, ``loads.csv`` and ``dispatch_params.toml`` (loss rate)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_csv(path / "dispatch.csv", _UNIT_HEADER,
              ((u.id, float(u.p_min_mw), float(u.p_max_mw), float(u.c_power), float(u.c_up),
                float(u.c_down), u.t_up_slots, u.t_down_slots) for u in inst.units))
    write_csv(path / "loads.csv", _LOAD_HEADER,
              ((t, float(inst.p_load[t]), float(inst.p_outside[t]), float(inst.p_res[t]))
               for t in range(inst.n_slots)))
    write_toml(path / "dispatch_params.toml", {"r_loss": float(inst.r_loss)})
    return path


def load_instance(path, r_loss: float | None = None) -> DispatchInstance:
    path = Path(path)
    units = []
    for row in CsvReader(path / "dispatch.csv", _UNIT_HEADER):
        try:
            units.append(PowerUnit(row.str("id"), row.float("p_min_mw"), row.float("p_max_mw"),
                                   row.float("c_power"), row.float("c_up"), row.float("c_down"),
                                   row.int("t_up_slots"), row.int("t_down_slots")))
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(row.path, row.line, None, str(exc)) from None
    rows = []
    for row in CsvReader(path / "loads.csv", _LOAD_HEADER):
        t = row.int("slot")
        if t != len(rows):
            raise FormatError(row.path, row.line, "slot", f"expected slot {len(rows)}, got {t}")
        rows.append((row.float("p_orig_mw"), row.float("p_outside_mw"), row.float("p_res_mw")))
    if not rows:
        raise FormatError(path / "loads.csv", None, None, "no load rows")
    if r_loss is None:
        params = path / "dispatch_params.toml"
        r_loss = float(read_toml(params)["r_loss"]) if params.exists() else DEFAULT_R_LOSS
    arr = np.array(rows)
    return DispatchInstance(tuple(units), arr[:, 0], arr[:, 1], r_loss, arr[:, 2])


_SOL_HEADER = ["unit_id", "slot", "on", "up", "down", "power_mw"]


def save_solution(sol: DispatchSolution, path) -> None:
    n, T = sol.x_on.shape
    write_csv(path, _SOL_HEADER,
              ((sol.unit_ids[i], t, int(sol.x_on[i, t]), int(sol.x_up[i, t]), int(sol.x_down[i, t]),
                float(sol.x_power[i, t])) for i in range(n) for t in range(T)))


def load_solution(path, inst: DispatchInstance, objective: float | None = None) -> DispatchSolution:
    ids = [u.id for u in inst.units]
    n, T = len(ids), inst.n_slots
    arrs = {k: np.full((n, T), -1, dtype=np.int8) for k in ("on", "up", "down")}
    power = np.full((n, T), np.nan)
    for row in CsvReader(path, _SOL_HEADER):
        uid = row.str("unit_id")
        if uid not in ids:
            raise FormatError(row.path, row.line, "unit_id", f"unknown unit {uid!r}")
        i, t = ids.index(uid), row.int("slot")
        if not 0 <= t < T:
            raise FormatError(row.path, row.line, "slot", f"slot {t} outside [0, {T})")
        for k in arrs:
            arrs[k][i, t] = row.int(k)
        power[i, t] = row.float("power_mw")
    if np.isnan(power).any():
        raise FormatError(path, None, None, "solution does not cover every unit and slot")
    if objective is None:
        cost = np.array([u.c_power for u in inst.units])
        objective = float(SLOT_HOURS * (cost[:, None] * power).sum()
                          + sum(u.c_up * arrs["up"][i].sum() + u.c_down * arrs["down"][i].sum()
                                for i, u in enumerate(inst.units)))
    return DispatchSolution(power, arrs["on"], arrs["up"], arrs["down"], objective, True, True,
                            np.array([u.coal_rate for u in inst.units]), tuple(ids))
