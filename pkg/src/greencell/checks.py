"""Independent constraint checkers.

These re-derive every constraint directly from its algebraic form and share no
code with the solvers and controllers they audit. Each returns a list of
human-readable violations; an empty list means the object passed.
"""
from __future__ import annotations

import numpy as np

TOL = 1e-6


def check_dispatch(inst, sol, tol: float = TOL) -> list[str]:
    """Audit a commitment schedule against the unit-commitment constraints.

    Windows for min up/down times are truncated at the end of the horizon and
    units are taken to be off before the first slot.
    """
    out = []
    units = inst.units
    n, T = len(units), inst.n_slots
    x, on, up, down = sol.x_power, sol.x_on, sol.x_up, sol.x_down
    for name, arr in (("x_power", x), ("x_on", on), ("x_up", up), ("x_down", down)):
        if np.shape(arr) != (n, T):
            return [f"{name} has shape {np.shape(arr)}, expected {(n, T)}"]
    for name, arr in (("on", on), ("up", up), ("down", down)):
        bad = np.argwhere((arr != 0) & (arr != 1))
        for i, t in bad[:5]:
            out.append(f"slot {t} unit {units[i].id}: {name} is not binary")
    for t in range(T):
        need = inst.p_load[t] / (1.0 - inst.r_loss)
        got = sum(x[i, t] for i in range(n)) + inst.p_outside[t]
        if abs(got - need) > tol * max(1.0, abs(need)):
            out.append(f"slot {t}: balance violated (supply {got:.6f} MW vs loss-adjusted load {need:.6f} MW)")
        committed = sum(units[i].p_max_mw * on[i, t] for i in range(n))
        if committed < inst.p_res[t] - tol * max(1.0, inst.p_res[t]):
            out.append(f"slot {t}: committed capacity {committed:.6f} MW below reserve {inst.p_res[t]:.6f} MW")
    for i, u in enumerate(units):
        for t in range(T):
            if x[i, t] < -tol:
                out.append(f"slot {t} unit {u.id}: negative output")
            if x[i, t] < u.p_min_mw * on[i, t] - tol or x[i, t] > u.p_max_mw * on[i, t] + tol:
                out.append(f"slot {t} unit {u.id}: output {x[i, t]:.6f} outside bounds")
            if up[i, t] + down[i, t] > 1:
                out.append(f"slot {t} unit {u.id}: start-up and shut-down together")
            prev = on[i, t - 1] if t > 0 else 0
            if up[i, t] - down[i, t] != on[i, t] - prev:
                out.append(f"slot {t} unit {u.id}: start/stop flags inconsistent with on/off state")
            w_up = on[i, t:t + u.t_up_slots]
            if w_up.sum() < len(w_up) * up[i, t]:
                out.append(f"slot {t} unit {u.id}: minimum up time {u.t_up_slots} violated")
            w_dn = on[i, t:t + u.t_down_slots]
            if (1 - w_dn).sum() < len(w_dn) * down[i, t]:
                out.append(f"slot {t} unit {u.id}: minimum down time {u.t_down_slots} violated")
    obj = sum(0.5 * u.c_power * x[i, t] + u.c_up * up[i, t] + u.c_down * down[i, t]
              for i, u in enumerate(units) for t in range(T))
    if abs(obj - sol.objective) > tol * max(1.0, abs(obj)):
        out.append(f"objective {sol.objective:.6f} does not match recomputed cost {obj:.6f}")
    return out


def check_schedule(scenario, asleep, traffic=None, tol: float = 1e-9) -> list[str]:
    """Service feasibility: per grid and slot, awake capacity covers traffic."""
    traffic = scenario.traffic if traffic is None else traffic
    asleep = np.asarray(asleep, dtype=bool)
    if asleep.shape != traffic.shape:
        return [f"schedule shape {asleep.shape} does not match traffic {traffic.shape}"]
    index = {c.id: k for k, c in enumerate(scenario.cells)}
    caps = [c.capacity_gb for c in scenario.cells]
    out = []
    for g in scenario.grids:
        rows = [index[c] for c in g.cell_ids]
        for t in range(traffic.shape[1]):
            demand = sum(traffic[r, t] for r in rows)
            awake = sum(caps[r] for r in rows if not asleep[r, t])
            if awake + tol < demand:
                sleeping = [scenario.cells[r].id for r in rows if asleep[r, t]]
                out.append(f"grid {g.id} slot {t}: awake capacity {awake:.6f} GB < traffic {demand:.6f} GB "
                           f"(asleep: {', '.join(sleeping)})")
    return out


def check_loads(scenario, asleep, loads, traffic=None, rel_tol: float = 1e-9) -> list[str]:
    """Redistributed loads: grid totals conserved, asleep cells idle, no cell
    above capacity."""
    traffic = scenario.traffic if traffic is None else traffic
    asleep = np.asarray(asleep, dtype=bool)
    index = {c.id: k for k, c in enumerate(scenario.cells)}
    out = []
    for k, c in enumerate(scenario.cells):
        for t in np.flatnonzero(asleep[k] & (loads[k] != 0)):
            out.append(f"cell {c.id} slot {t}: asleep but carries {loads[k, t]:.6f} GB")
        for t in np.flatnonzero(loads[k] > c.capacity_gb * (1 + rel_tol)):
            out.append(f"cell {c.id} slot {t}: load {loads[k, t]:.6f} GB above capacity")
        for t in np.flatnonzero(loads[k] < 0):
            out.append(f"cell {c.id} slot {t}: negative load")
    for g in scenario.grids:
        rows = [index[c] for c in g.cell_ids]
        offered = traffic[rows].sum(axis=0)
        served = loads[rows].sum(axis=0)
        bad = np.abs(served - offered) > rel_tol * np.maximum(offered, 1e-12)
        for t in np.flatnonzero(bad):
            out.append(f"grid {g.id} slot {t}: served {served[t]:.9f} GB != offered {offered[t]:.9f} GB")
    return out
