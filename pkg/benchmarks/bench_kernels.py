"""Time the hot kernels with numba on and with the numpy/interpreted fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--stations 45]

Each path runs in its own interpreter because the choice is made at import
time from ``GREENCELL_NO_JIT``. Compilation is excluded: every case is called
once before timing.
"""
import argparse
import json
import os
import subprocess
import sys
import time


def _cases(n_stations):
    import numpy as np

    from greencell import controllers, dispatch, kernels
    from greencell.scenario import generate_scenario

    s = generate_scenario(7, n_stations * 2 // 3, n_stations - n_stations * 2 // 3, days=7)
    a = s.arrays
    rng = np.random.default_rng(0)
    asleep = controllers.greedy_controller(s).asleep
    pref = rng.random(s.traffic.shape)
    inst = dispatch.default_instance()
    units = inst.units
    pmin = np.array([u.p_min_mw for u in units])
    pmax = np.array([u.p_max_mw for u in units])
    cost = np.array([u.c_power for u in units])
    demand = inst.demand
    return {
        "evaluate_schedule": lambda: controllers.evaluate_schedule(s, asleep),
        "redistribute": lambda: kernels.redistribute(s.traffic, asleep, a.cap, a.grid_ptr, a.grid_cells),
        "greedy_sleep": lambda: controllers.greedy_controller(s),
        "repair_wake": lambda: kernels.repair_wake(s.traffic, a.cap, np.ones_like(asleep), pref, a.grid_ptr,
                                                   a.grid_cells, 1),
        "dispatch_table": lambda: kernels.dispatch_table(demand, inst.p_res, pmin, pmax, cost, np.argsort(cost)),
        "unit_commitment": lambda: dispatch.solve_unit_commitment(inst),
    }


def worker(repeat, n_stations):
    out = {}
    for name, fn in _cases(n_stations).items():
        fn()
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--stations", type=int, default=45)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat, args.stations)
        return
    results = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = {**os.environ, "GREENCELL_NO_JIT": flag}
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat),
                               "--stations", str(args.stations)], env=env, capture_output=True, text=True)
        if proc.returncode:
            sys.exit(proc.stderr)
        results[label] = json.loads(proc.stdout)
    print(f"{'kernel':<20}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name in results["numba"]:
        a, b = results["numba"][name] * 1e3, results["numpy"][name] * 1e3
        print(f"{name:<20}{a:>12.3f}{b:>12.3f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
