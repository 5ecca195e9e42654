"""Hot numeric kernels.

Every public kernel exists twice: a loop version compiled with numba and a
vectorized numpy version. ``GREENCELL_NO_JIT=1`` selects the numpy path (see
:mod:`greencell._accel`). Sequential kernels (the sleep controllers) have no
vectorized form; their fallback is the same loop run by the interpreter.

Array conventions
-----------------
``C`` cells, ``B`` base stations, ``G`` grids, ``T`` slots. Per-cell
coefficient vectors have shape ``(C,)``; schedules and loads ``(C, T)``.
Grids are passed in CSR form: cells of grid ``g`` are
``grid_cells[grid_ptr[g]:grid_ptr[g + 1]]``.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

FEAS_TOL = 1e-9  # GByte; slack when comparing awake capacity against traffic


# --------------------------------------------------------------------------
# station power
# --------------------------------------------------------------------------

@njit
def _station_power_loop(prb, asleep, alpha, gamma, beta, sigma, ptmax, sleep_w,
                        cell_bs, bbu, t_out, ua, t_in, cop):
    n_cells, n_slots = prb.shape
    n_bs = bbu.shape[0]
    rru = np.empty((n_cells, n_slots))
    p_tx = np.empty((n_bs, n_slots))
    p_cool = np.empty((n_bs, n_slots))
    for b in range(n_bs):
        for t in range(n_slots):
            p_tx[b, t] = bbu[b]
    for c in range(n_cells):
        b = cell_bs[c]
        for t in range(n_slots):
            if asleep[c, t]:
                p = sleep_w[c]
            else:
                r = prb[c, t]
                if r > 1.0:
                    r = 1.0
                tx = beta[c] * r + sigma[c]
                if tx > ptmax[c]:
                    tx = ptmax[c]
                p = alpha[c] * tx + gamma[c]
            rru[c, t] = p
            p_tx[b, t] += p
    for b in range(n_bs):
        for t in range(n_slots):
            heat = p_tx[b, t] + ua * (t_out[t] - t_in)
            p_cool[b, t] = heat / cop if heat > 0.0 else 0.0
    return rru, p_tx, p_cool


def _station_power_np(prb, asleep, alpha, gamma, beta, sigma, ptmax, sleep_w,
                      cell_bs, bbu, t_out, ua, t_in, cop):
    r = np.minimum(prb, 1.0)
    tx = np.minimum(beta[:, None] * r + sigma[:, None], ptmax[:, None])
    awake_p = alpha[:, None] * tx + gamma[:, None]
    rru = np.where(asleep, sleep_w[:, None], awake_p)
    p_tx = np.zeros((bbu.shape[0], prb.shape[1]))
    np.add.at(p_tx, cell_bs, rru)
    p_tx += bbu[:, None]
    heat = p_tx + ua * (t_out[None, :] - t_in)
    p_cool = np.maximum(heat, 0.0) / cop
    return rru, p_tx, p_cool


def station_power(prb, asleep, alpha, gamma, beta, sigma, ptmax, sleep_w,
                  cell_bs, bbu, t_out, ua, t_in, cop):
    """Per-cell RRU power and per-station transmit/cooling power, in W.

    Returns ``(rru (C,T), p_tx (B,T), p_cool (B,T))``. PRB ratios above 1
    are clipped; the caller is responsible for rejecting overloads.
    """
    args = (np.ascontiguousarray(prb, dtype=np.float64),
            np.ascontiguousarray(asleep, dtype=np.bool_),
            alpha, gamma, beta, sigma, ptmax, sleep_w,
            np.ascontiguousarray(cell_bs, dtype=np.int64), bbu,
            np.ascontiguousarray(t_out, dtype=np.float64),
            float(ua), float(t_in), float(cop))
    if USE_NUMBA:
        return _station_power_loop(*args)
    return _station_power_np(*args)


# --------------------------------------------------------------------------
# intra-grid redistribution
# --------------------------------------------------------------------------

@njit
def _redistribute_loop(traffic, asleep, cap, grid_ptr, grid_cells):
    n_cells, n_slots = traffic.shape
    n_grids = grid_ptr.shape[0] - 1
    loads = np.zeros((n_cells, n_slots))
    deficit = np.zeros((n_grids, n_slots))
    for g in range(n_grids):
        lo = grid_ptr[g]
        hi = grid_ptr[g + 1]
        for t in range(n_slots):
            total = 0.0
            awake_cap = 0.0
            for k in range(lo, hi):
                c = grid_cells[k]
                total += traffic[c, t]
                if not asleep[c, t]:
                    awake_cap += cap[c]
            if awake_cap <= 0.0:
                deficit[g, t] = total
                continue
            share = total / awake_cap
            if total > awake_cap + FEAS_TOL:
                deficit[g, t] = total - awake_cap
                share = 1.0
            for k in range(lo, hi):
                c = grid_cells[k]
                if not asleep[c, t]:
                    loads[c, t] = share * cap[c]
    return loads, deficit


def _redistribute_np(traffic, asleep, cap, grid_ptr, grid_cells):
    n_cells = traffic.shape[0]
    n_grids = grid_ptr.shape[0] - 1
    cell_grid = np.empty(n_cells, dtype=np.int64)
    for g in range(n_grids):
        cell_grid[grid_cells[grid_ptr[g]:grid_ptr[g + 1]]] = g
    member = np.zeros((n_grids, n_cells))
    member[cell_grid, np.arange(n_cells)] = 1.0
    total = member @ traffic
    awake = ~asleep
    awake_cap = member @ (awake * cap[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(awake_cap > 0.0, total / awake_cap, 0.0)
    over = total > awake_cap + FEAS_TOL
    share = np.where(over & (awake_cap > 0.0), 1.0, share)
    deficit = np.where(awake_cap <= 0.0, total, np.where(over, total - awake_cap, 0.0))
    loads = np.where(awake, share[cell_grid] * cap[:, None], 0.0)
    return loads, deficit


def redistribute(traffic, asleep, cap, grid_ptr, grid_cells):
    """Spread each grid's traffic over its awake cells in proportion to capacity.

    Returns ``(loads (C,T), deficit (G,T))``. ``deficit`` is the traffic a
    grid cannot carry; where it is positive the awake cells run at capacity.
    """
    args = (np.ascontiguousarray(traffic, dtype=np.float64),
            np.ascontiguousarray(asleep, dtype=np.bool_),
            np.ascontiguousarray(cap, dtype=np.float64),
            np.ascontiguousarray(grid_ptr, dtype=np.int64),
            np.ascontiguousarray(grid_cells, dtype=np.int64))
    if USE_NUMBA:
        return _redistribute_loop(*args)
    return _redistribute_np(*args)


# --------------------------------------------------------------------------
# sleep controllers (sequential; fallback is the interpreted loop)
# --------------------------------------------------------------------------

@njit
def greedy_sleep(traffic, cap, key, grid_ptr, grid_cells, min_awake):
    """Sleep cells of each grid in descending ``key`` order until the next
    one would leave the grid short of capacity or below ``min_awake``."""
    n_cells, n_slots = traffic.shape
    n_grids = grid_ptr.shape[0] - 1
    asleep = np.zeros((n_cells, n_slots), dtype=np.bool_)
    for g in range(n_grids):
        lo = grid_ptr[g]
        hi = grid_ptr[g + 1]
        members = grid_cells[lo:hi]
        n = hi - lo
        for t in range(n_slots):
            total = 0.0
            awake_cap = 0.0
            keys = np.empty(n)
            for k in range(n):
                c = members[k]
                total += traffic[c, t]
                awake_cap += cap[c]
                keys[k] = -key[c, t]
            order = np.argsort(keys, kind="mergesort")
            awake_n = n
            for k in order:
                c = members[k]
                if awake_n - 1 < min_awake or awake_cap - cap[c] + FEAS_TOL < total:
                    break
                asleep[c, t] = True
                awake_cap -= cap[c]
                awake_n -= 1
    return asleep


@njit
def threshold_sleep(traffic, cap, theta, grid_ptr, grid_cells, min_awake):
    """Sleep every cell whose own load ratio is below ``theta`` unless doing so
    breaks grid feasibility. Candidates are tried smallest capacity first."""
    n_cells, n_slots = traffic.shape
    n_grids = grid_ptr.shape[0] - 1
    asleep = np.zeros((n_cells, n_slots), dtype=np.bool_)
    for g in range(n_grids):
        lo = grid_ptr[g]
        hi = grid_ptr[g + 1]
        members = grid_cells[lo:hi]
        n = hi - lo
        for t in range(n_slots):
            total = 0.0
            awake_cap = 0.0
            ratio = np.empty(n)
            caps = np.empty(n)
            for k in range(n):
                c = members[k]
                total += traffic[c, t]
                awake_cap += cap[c]
                ratio[k] = traffic[c, t] / cap[c]
                caps[k] = cap[c]
            by_ratio = np.argsort(ratio, kind="mergesort")
            by_cap = np.argsort(caps[by_ratio], kind="mergesort")
            awake_n = n
            for j in by_cap:
                k = by_ratio[j]
                if not ratio[k] < theta:
                    continue
                c = members[k]
                if awake_n - 1 < min_awake or awake_cap - cap[c] + FEAS_TOL < total:
                    continue
                asleep[c, t] = True
                awake_cap -= cap[c]
                awake_n -= 1
    return asleep


# --------------------------------------------------------------------------
# unit commitment: per-slot merit-order dispatch for every on/off pattern
# --------------------------------------------------------------------------

@njit
def _dispatch_table_loop(demand, reserve, pmin, pmax, cost, order):
    n_slots = demand.shape[0]
    n_units = pmin.shape[0]
    n_pat = 1 << n_units
    table = np.full((n_slots, n_pat), np.inf)
    power = np.zeros((n_slots, n_pat, n_units))
    for t in range(n_slots):
        d = demand[t]
        tol = 1e-9 * max(1.0, abs(d))
        for p in range(n_pat):
            lo = 0.0
            hi = 0.0
            for i in range(n_units):
                if (p >> i) & 1:
                    lo += pmin[i]
                    hi += pmax[i]
            if hi + tol < reserve[t] or d < lo - tol or d > hi + tol:
                continue
            rem = d - lo
            c = 0.0
            for j in range(n_units):
                i = order[j]
                if (p >> i) & 1:
                    add = pmax[i] - pmin[i]
                    if rem < add:
                        add = rem
                    if add < 0.0:
                        add = 0.0
                    x = pmin[i] + add
                    rem -= add
                    power[t, p, i] = x
                    c += cost[i] * x
            table[t, p] = 0.5 * c
    return table, power


def _dispatch_table_np(demand, reserve, pmin, pmax, cost, order):
    n_units = pmin.shape[0]
    pats = np.arange(1 << n_units)
    on = ((pats[:, None] >> np.arange(n_units)[None, :]) & 1).astype(bool)  # (P, n)
    lo = on @ pmin
    hi = on @ pmax
    d = demand[:, None]
    tol = 1e-9 * np.maximum(1.0, np.abs(d))
    ok = (hi[None, :] + tol >= reserve[:, None]) & (d >= lo[None, :] - tol) & (d <= hi[None, :] + tol)
    # fill the headroom above p_min in merit order
    span = np.where(on, pmax - pmin, 0.0)[:, order]               # (P, n) in merit order
    before = np.cumsum(span, axis=1) - span                        # headroom of cheaper units
    rem = np.maximum(d - lo[None, :], 0.0)                          # (T, P)
    add_sorted = np.clip(rem[:, :, None] - before[None, :, :], 0.0, span[None, :, :])
    add = np.empty_like(add_sorted)
    add[:, :, order] = add_sorted
    power = np.where(on[None, :, :], pmin[None, None, :] + add, 0.0)
    power = np.where(ok[:, :, None], power, 0.0)
    table = np.where(ok, 0.5 * (power @ cost), np.inf)
    return table, power


def dispatch_table(demand, reserve, pmin, pmax, cost, order):
    """Cheapest half-hour generation cost for every (slot, on/off pattern).

    Bit ``i`` of a pattern index means unit ``i`` is on. Infeasible entries
    (reserve short, demand outside ``[sum p_min, sum p_max]``) are ``inf``.
    Returns ``(table (T, 2**n), power (T, 2**n, n))``.
    """
    args = (np.ascontiguousarray(demand, dtype=np.float64),
            np.ascontiguousarray(reserve, dtype=np.float64),
            np.ascontiguousarray(pmin, dtype=np.float64),
            np.ascontiguousarray(pmax, dtype=np.float64),
            np.ascontiguousarray(cost, dtype=np.float64),
            np.ascontiguousarray(order, dtype=np.int64))
    if USE_NUMBA:
        return _dispatch_table_loop(*args)
    return _dispatch_table_np(*args)


@njit
def repair_wake(traffic, cap, asleep, awake_pref, grid_ptr, grid_cells, min_awake):
    """Wake sleeping cells, highest ``awake_pref`` first, until each grid's
    awake capacity covers its traffic and at least ``min_awake`` are awake.

    ``asleep`` is copied, not modified.
    """
    n_cells, n_slots = traffic.shape
    n_grids = grid_ptr.shape[0] - 1
    out = asleep.copy()
    for g in range(n_grids):
        lo = grid_ptr[g]
        hi = grid_ptr[g + 1]
        members = grid_cells[lo:hi]
        n = hi - lo
        need_n = min_awake if min_awake < n else n
        for t in range(n_slots):
            total = 0.0
            awake_cap = 0.0
            awake_n = 0
            for k in range(n):
                c = members[k]
                total += traffic[c, t]
                if not out[c, t]:
                    awake_cap += cap[c]
                    awake_n += 1
            if awake_cap + FEAS_TOL >= total and awake_n >= need_n:
                continue
            prefs = np.empty(n)
            for k in range(n):
                prefs[k] = -awake_pref[members[k], t]
            order = np.argsort(prefs, kind="mergesort")
            for k in order:
                if awake_cap + FEAS_TOL >= total and awake_n >= need_n:
                    break
                c = members[k]
                if out[c, t]:
                    out[c, t] = False
                    awake_cap += cap[c]
                    awake_n += 1
    return out
