"""Command-line entry point: ``greencell <command> ...``.

Every command accepts ``--seed`` and ``--out``; ``--out`` names a directory
that receives CSV tables and a ``manifest.toml``. Errors exit with status 2
and a one-line message on stderr; ``validate`` exits 1 when it finds
violations.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import controllers as ctl
from . import deepenergy, dispatch, regional, solar
from ._accel import USE_NUMBA, apply_thread_cap
from ._io import CsvReader, FormatError, read_toml, write_csv, write_toml
from .checks import check_dispatch, check_loads, check_schedule
from .energy_model import SLOT_HOURS, network_energy
from .metrics import GB_PER_TB, METRICS_HEADER, write_metrics_report
from .scenario import SLOTS_PER_DAY, generate_scenario, load_scenario, save_scenario

log = logging.getLogger("greencell")

DEFAULT_N_4G = 30
DEFAULT_N_5G = 15
DEFAULT_DAYS = 7
GRID_CO2_T_PER_MWH = regional.GRID_CO2_T_PER_MWH


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_manifest(out: Path, command: str, config: dict) -> None:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.toml"
                   and not p.name.startswith("."))
    write_toml(out / "manifest.toml", {
        "command": command,
        "greencell_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": _config_hash(config),
        "config": config,
        "files": {str(p.relative_to(out)): _sha256(p) for p in files},
    })


def _scenario(args):
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return generate_scenario(args.seed, args.n_4g, args.n_5g, args.days)


def _scenario_config(args) -> dict:
    if getattr(args, "scenario", None):
        return {"scenario": str(Path(args.scenario).resolve().name),
                "scenario_hash": _sha256(Path(args.scenario) / "traffic.csv")}
    return {"n_4g": args.n_4g, "n_5g": args.n_5g, "days": args.days}


def _schedule(scenario, method: str, theta: float, checkpoint, traffic=None):
    if method == "none":
        return ctl.all_awake(scenario) if traffic is None else ctl.SleepSchedule(
            np.zeros(traffic.shape, dtype=bool), "none")
    if method == "threshold":
        return ctl.threshold_controller(scenario, traffic, theta)
    if method == "greedy":
        return ctl.greedy_controller(scenario, traffic)
    if method == "deep":
        if not checkpoint:
            raise CliError("method 'deep' needs a trained model: run `greencell control train "
                           "--out DIR` and pass --checkpoint DIR/model.qnet")
        q1, _ = deepenergy.load_checkpoint(checkpoint)
        return deepenergy.infer_schedule(q1, scenario, traffic)
    raise CliError(f"unknown method {method!r}")


def _add_scenario_flags(p):
    p.add_argument("--scenario", help="scenario directory (default: generate one from --seed)")
    p.add_argument("--n-4g", type=int, default=DEFAULT_N_4G, help="4G stations when generating")
    p.add_argument("--n-5g", type=int, default=DEFAULT_N_5G, help="5G stations when generating")
    p.add_argument("--days", type=int, default=DEFAULT_DAYS, help="days when generating")


def _add_method_flags(p, methods=False):
    if methods:
        p.add_argument("--methods", type=_names, default=["none", "threshold", "greedy"],
                       help="comma-separated controllers")
    else:
        p.add_argument("--method", choices=ctl.METHODS, default="greedy")
    p.add_argument("--theta", type=float, default=ctl.DEFAULT_THETA, help="threshold controller load ratio")
    p.add_argument("--checkpoint", help="trained model for the deep controller")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_scenario_gen(args) -> int:
    s = generate_scenario(args.seed, args.n_4g, args.n_5g, args.days)
    save_scenario(s, args.out)
    log.info("scenario with %d stations, %d cells, %d grids written to %s",
             s.n_bs, s.n_cells, len(s.grids), args.out)
    return 0


def _day_instances(base_dir, n_days):
    if base_dir:
        inst = dispatch.load_instance(base_dir)
        if inst.n_slots != SLOTS_PER_DAY:
            raise CliError(f"dispatch instance must cover one day ({SLOTS_PER_DAY} slots), has {inst.n_slots}")
    else:
        inst = dispatch.default_instance(SLOTS_PER_DAY)
    return [inst] * n_days


CARBON_HEADER = ["day", "bs_energy_mwh", "coal_t", "co2_t", "grid_factor_t_per_mwh",
                 "objective_with", "objective_without"]
POWER_HEADER = ["bs_id", "slot", "p_total_w", "pv_w", "grid_w"]


def cmd_simulate(args) -> int:
    out = Path(args.out)
    config = {"seed": args.seed, **_scenario_config(args), "method": args.method, "theta": args.theta,
              "checkpoint_hash": _sha256(Path(args.checkpoint)) if args.checkpoint else None,
              "instance": bool(args.instance), "pv_area_m2": args.pv_area}
    config = {k: v for k, v in config.items() if v is not None}
    s = _scenario(args)
    if s.n_slots % SLOTS_PER_DAY:
        raise CliError("scenario must cover whole days")
    sched = _schedule(s, args.method, args.theta, args.checkpoint)
    ev = ctl.evaluate_schedule(s, sched)
    ne = ev.energy
    p_bs = ne.station_power_w                                   # (B, T) W
    if args.pv_area > 0:
        pv1 = solar.pv_series(solar.PvConfig(panel_area_m2=args.pv_area), s.n_slots, s.profile.start_day_of_year)
        pv = np.broadcast_to(pv1, p_bs.shape)
    else:
        pv = np.zeros_like(p_bs)
    grid_w = dispatch.net_bs_load_after_pv(p_bs, pv)
    grid_mw = grid_w.sum(axis=0) / 1e6

    save_scenario(s, out / "scenario")
    ctl.save_schedule(sched, s, out / "schedule.csv")
    write_csv(out / "station_power.csv", POWER_HEADER,
              ((b.id, t, float(p_bs[i, t]), float(pv[i, t]), float(grid_w[i, t]))
               for i, b in enumerate(s.base_stations) for t in range(s.n_slots)))

    carbon_rows, co2_slot = [], np.zeros(s.n_slots)
    for d, inst in enumerate(_day_instances(args.instance, s.days)):
        sl = slice(d * SLOTS_PER_DAY, (d + 1) * SLOTS_PER_DAY)
        att = dispatch.attribute_mobile_carbon(inst, grid_mw[sl])
        if not (att.with_bs.optimal and att.without_bs.optimal):
            log.warning("day %d: dispatch solver stopped early; attribution uses best schedules found", d)
        e_day = float(grid_w[:, sl].sum() * SLOT_HOURS / 1e6)
        factor = att.co2_t / e_day if e_day > 0 else 0.0
        if factor <= 0:
            log.warning("day %d: no attributable emissions; metrics use %.2f tCO2/MWh", d, GRID_CO2_T_PER_MWH)
        # per-slot carbon efficiency prices the stations' own energy at the day's grid factor
        co2_slot[sl] = ne.energy_mwh[sl] * (factor if factor > 0 else GRID_CO2_T_PER_MWH)
        day_dir = out / "dispatch" / f"day{d}"
        dispatch.save_instance(inst.with_load(inst.p_load + grid_mw[sl]), day_dir)
        dispatch.save_solution(att.with_bs, day_dir / "solution.csv")
        dispatch.save_solution(att.without_bs, day_dir / "solution_without_bs.csv")
        carbon_rows.append((d, e_day, att.coal_t, att.co2_t, factor,
                            att.with_bs.objective, att.without_bs.objective))
    write_csv(out / "carbon.csv", CARBON_HEADER, carbon_rows)
    write_metrics_report(out / "metrics.csv", ne.load_gb, ne.energy_mwh, ne.misalignment, co2_slot)
    _write_manifest(out, "simulate", config)
    log.info("%s: mean M %.4f, energy %.3f MWh, attributed CO2 %.4f t",
             args.method, ev.mean_m, ev.total_energy_mwh, sum(r[3] for r in carbon_rows))
    return 0


def cmd_dispatch_solve(args) -> int:
    out = Path(args.out)
    inst = dispatch.load_instance(args.instance) if args.instance else dispatch.default_instance()
    p_bs = np.zeros(inst.n_slots)
    if args.bs_load:
        seen = np.zeros(inst.n_slots, dtype=bool)
        for row in CsvReader(args.bs_load, ["slot", "p_bs_mw"]):
            t = row.int("slot")
            if not 0 <= t < inst.n_slots:
                raise FormatError(row.path, row.line, "slot", f"slot {t} outside [0, {inst.n_slots})")
            p_bs[t] = row.float("p_bs_mw")
            seen[t] = True
        if not seen.all():
            raise CliError(f"{args.bs_load}: missing slot {int(np.flatnonzero(~seen)[0])}")
    att = dispatch.attribute_mobile_carbon(inst, p_bs, time_limit=args.time_limit)
    dispatch.save_instance(inst.with_load(inst.p_load + p_bs), out)
    dispatch.save_solution(att.with_bs, out / "solution.csv")
    dispatch.save_solution(att.without_bs, out / "solution_without_bs.csv")
    e = float(p_bs.sum() * SLOT_HOURS)
    write_csv(out / "carbon.csv", CARBON_HEADER,
              [(0, e, att.coal_t, att.co2_t, att.co2_t / e if e > 0 else 0.0,
                att.with_bs.objective, att.without_bs.objective)])
    _write_manifest(out, "dispatch solve", {"seed": args.seed, "time_limit": args.time_limit,
                                            "optimal": bool(att.with_bs.optimal and att.without_bs.optimal)})
    log.info("objective %.2f (optimal=%s); attributed %.6f t coal, %.6f t CO2",
             att.with_bs.objective, att.with_bs.optimal, att.coal_t, att.co2_t)
    return 0


def cmd_control_run(args) -> int:
    out = Path(args.out)
    s = _scenario(args)
    sched = _schedule(s, args.method, args.theta, args.checkpoint)
    ev = ctl.evaluate_schedule(s, sched)
    ctl.save_schedule(sched, s, out / "schedule.csv")
    ne = ev.energy
    write_metrics_report(out / "metrics.csv", ne.load_gb, ne.energy_mwh, ne.misalignment,
                         ne.energy_mwh * args.grid_factor)
    _write_manifest(out, "control run", {"seed": args.seed, **_scenario_config(args), "method": args.method,
                                         "theta": args.theta, "grid_factor": args.grid_factor})
    log.info("%s: mean M %.4f, energy %.3f MWh, %.1f%% of cell-slots asleep",
             args.method, ev.mean_m, ev.total_energy_mwh, 100 * sched.sleep_fraction)
    return 0


def cmd_control_train(args) -> int:
    out = Path(args.out)
    s = _scenario(args)
    hp = deepenergy.Hyperparams(lr=args.lr, lr_end=args.lr_end, updates_per_slot=args.updates_per_slot)
    result = deepenergy.train(s, args.episodes, hp, seed=args.seed,
                              progress=lambda row: log.debug("episode %d reward %.1f W", row[0], row[1]))
    meta = {"seed": args.seed, "episodes": args.episodes, "hyperparams": deepenergy.hyperparams_dict(hp)}
    deepenergy.save_checkpoint(out / "model.qnet", result.q1, meta)
    deepenergy.write_training_log(out / "training_log.csv", result.log)
    _write_manifest(out, "control train", {**meta, **_scenario_config(args)})
    log.info("trained %d episodes; final mean reward %.1f W", args.episodes, result.log[-1][1])
    return 0


def cmd_regions_estimate(args) -> int:
    out = Path(args.out)
    s = _scenario(args)
    regions = regional.read_regions(args.regions)
    pool = regional.reference_pool(s)
    ref_users = args.reference_users if args.reference_users else 1000 * s.n_bs
    daily = s.traffic.sum() / (s.n_slots / SLOTS_PER_DAY)
    per_user = regional.avg_traffic_per_user(daily, 0.0, ref_users)
    curves = {}
    for m in args.methods:
        fn = None if m == "none" else (lambda sc, m=m: _schedule(sc, m, args.theta, args.checkpoint).asleep)
        curves[m] = regional.build_m_curve(s, fn, controller=m)
    ce_base = regional.pre_5g_carbon_efficiency(s, args.grid_factor)
    report, trap = [], []
    for k, r in enumerate(regions):
        mc = regional.monte_carlo_capacity(r, pool, args.trials, seed=args.seed + k)
        l_tilde = per_user * r.n_users / mc.c_p
        ms = {m: curves[m](l_tilde) for m in args.methods}
        for m in args.methods:
            report.append((m, regional.regional_energy_and_carbon(r, mc, per_user, ms[m], args.grid_factor), mc))
        trap += regional.trap_comparison(r, mc, per_user, ms, ce_base, args.grid_factor)
    regional.write_region_report(out / "regions_report.csv", report)
    write_csv(out / "trap.csv", ["region", "controller", "m_p", "co2_t", "additional_co2_t"],
              ([row[k] for k in ("region", "controller", "m_p", "co2_t", "additional_co2_t")] for row in trap))
    write_csv(out / "m_curves.csv", ["controller", "l_tilde", "m"],
              ((m, float(lt), float(v)) for m, c in curves.items() for lt, v in zip(c.l_tilde, c.m)))
    _write_manifest(out, "regions estimate", {"seed": args.seed, **_scenario_config(args),
                                              "regions_hash": _sha256(Path(args.regions)),
                                              "trials": args.trials, "methods": args.methods,
                                              "reference_users": ref_users, "grid_factor": args.grid_factor})
    log.info("%d regions estimated with %d trials each", len(regions), args.trials)
    return 0


def cmd_solar_sweep(args) -> int:
    out = Path(args.out)
    s = _scenario(args)
    costs = solar.read_costs(args.costs) if args.costs else solar.CostModel()
    configs = solar.PvConfig()
    if args.pv:
        by_id = solar.read_pv(args.pv)
        missing = [b.id for b in s.base_stations if b.id not in by_id]
        if missing:
            raise CliError(f"{args.pv}: no PV row for station {missing[0]}")
        configs = [by_id[b.id] for b in s.base_stations]
    areas = list(args.areas)
    areas += [solar.area_for_investment(v, configs, s.n_bs, costs) for v in args.investments]
    methods = ["none"] + [m for m in args.methods if m != "none"]
    power = {}
    for m in methods:
        sched = _schedule(s, m, args.theta, args.checkpoint)
        power[m] = ctl.evaluate_schedule(s, sched).energy.station_power_w
    points = solar.sweep(power, s.profile.start_day_of_year, areas, configs, costs, args.grid_factor)
    solar.write_sweep(out / "solar_sweep.csv", points)
    _write_manifest(out, "solar sweep", {"seed": args.seed, **_scenario_config(args), "areas": areas,
                                         "methods": methods, "grid_factor": args.grid_factor})
    log.info("%d sweep points written", len(points))
    return 0


# compare / validate ---------------------------------------------------------

def _read_metrics(run: Path):
    rows = list(CsvReader(run / "metrics.csv", METRICS_HEADER))
    if not rows:
        raise FormatError(run / "metrics.csv", None, None, "no rows")
    cols = {k: np.array([r.float(k) for r in rows]) for k in METRICS_HEADER[1:]}
    cols["slot"] = np.array([r.int("slot") for r in rows])
    return cols


def _run_label(run: Path) -> str:
    man = run / "manifest.toml"
    method = read_toml(man).get("config", {}).get("method", "?") if man.exists() else "?"
    return f"{run.name}:{method}"


COMPARE_HEADER = ["run", "mean_m", "energy_mwh", "load_tb", "co2_t", "ce_tb_per_t",
                  "delta_energy_mwh", "ce_gain"]


def cmd_compare(args) -> int:
    runs = [Path(r) for r in args.runs]
    if len(runs) < 2:
        raise CliError("compare needs at least two run directories")
    for r in runs:
        if not (r / "metrics.csv").exists():
            raise CliError(f"{r}: not a run directory (no metrics.csv)")
    data = [_read_metrics(r) for r in runs]
    n = len(data[0]["slot"])
    if any(len(d["slot"]) != n or not np.array_equal(d["slot"], data[0]["slot"]) for d in data):
        raise CliError("runs cover different slots; cannot align")
    labels = [f"{k}:{_run_label(r)}" for k, r in enumerate(runs)]
    agg = []
    for lab, d in zip(labels, data):
        co2 = float(np.sum(d["load_gb"] / GB_PER_TB / d["ce"]))
        load_tb = float(d["load_gb"].sum() / GB_PER_TB)
        agg.append([lab, float(d["m"].mean()), float(d["energy_mwh"].sum()), load_tb, co2,
                    load_tb / co2 if co2 > 0 else float("inf")])
    for row in agg:
        row += [row[2] - agg[0][2], row[5] / agg[0][5] - 1.0]
    out = Path(args.out)
    write_csv(out / "compare_summary.csv", COMPARE_HEADER, agg)
    header = ["slot"] + [f"{k}_{i}" for i in range(len(runs)) for k in ("m", "energy_mwh", "ce")]
    write_csv(out / "compare_slots.csv", header,
              ([int(data[0]["slot"][t])] + [float(d[k][t]) for d in data for k in ("m", "energy_mwh", "ce")]
               for t in range(n)))
    _write_manifest(out, "compare", {"seed": args.seed, "runs": [str(r) for r in runs]})
    order = sorted(agg, key=lambda r: r[1])
    print("ordering by mean M (lowest first): " + " < ".join(f"{r[0]} ({r[1]:.4f})" for r in order))
    for r in agg:
        print(f"{r[0]}: mean M {r[1]:.4f}, energy {r[2]:.3f} MWh, CE {r[5]:.4g} TB/t, CE gain {r[7]:+.2%}")
    return 0


def validate_run(run) -> list[str]:
    """Re-check a simulate output directory; returns the list of violations."""
    run = Path(run)
    problems = []
    man_path = run / "manifest.toml"
    if not man_path.exists():
        return [f"{run}: no manifest.toml"]
    man = read_toml(man_path)
    for rel, digest in man.get("files", {}).items():
        p = run / rel
        if not p.exists():
            problems.append(f"{rel}: listed in manifest but missing")
        elif _sha256(p) != digest:
            problems.append(f"{rel}: contents differ from the manifest hash")
    s = load_scenario(run / "scenario")
    sched = ctl.load_schedule(run / "schedule.csv", s)
    found = check_schedule(s, sched.asleep)
    problems += [f"schedule.csv: {m}" for m in found]
    if not found:
        loads = ctl.redistribute(s, s.traffic, sched.asleep)
        problems += [f"loads: {m}" for m in check_loads(s, sched.asleep, loads)]
        metrics = _read_metrics(run)
        ne = network_energy(s, asleep=sched.asleep, loads=loads)
        for name, ref in (("energy_mwh", ne.energy_mwh), ("load_gb", ne.load_gb), ("m", ne.misalignment)):
            bad = np.flatnonzero(~np.isclose(metrics[name], ref, rtol=1e-9, atol=1e-12))
            for t in bad[:5]:
                problems.append(f"metrics.csv slot {t}: {name} {metrics[name][t]!r} does not match "
                                f"recomputed {ref[t]!r}")
    objectives = {}
    if (run / "carbon.csv").exists():
        for row in CsvReader(run / "carbon.csv", CARBON_HEADER):
            objectives[row.int("day")] = row.float("objective_with")
    for day_dir in sorted((run / "dispatch").glob("day*"), key=lambda p: int(p.name[3:])):
        d = int(day_dir.name[3:])
        inst = dispatch.load_instance(day_dir)
        sol = dispatch.load_solution(day_dir / "solution.csv", inst, objectives.get(d))
        problems += [f"dispatch day {d}: {m}" for m in check_dispatch(inst, sol)]
    return problems


def cmd_validate(args) -> int:
    problems = validate_run(args.run)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate_report.txt").write_text("\n".join(problems or ["ok"]) + "\n")
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        return 1
    print(f"ok: {args.run} passed all checks")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    def out_flag(p, required=True):
        p.add_argument("--out", required=required, help="output directory")

    ap = argparse.ArgumentParser(prog="greencell", description="Mobile network energy and carbon simulator.")
    ap.add_argument("--version", action="version", version=f"greencell {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_sc = sub.add_parser("scenario", help="synthetic scenarios").add_subparsers(dest="action", required=True)
    p = p_sc.add_parser("gen", parents=[common], help="generate a scenario directory")
    p.add_argument("--n-4g", type=int, default=DEFAULT_N_4G)
    p.add_argument("--n-5g", type=int, default=DEFAULT_N_5G)
    p.add_argument("--days", type=int, default=DEFAULT_DAYS)
    out_flag(p)
    p.set_defaults(func=cmd_scenario_gen)

    p = sub.add_parser("simulate", parents=[common], help="end-to-end run: schedule, energy, dispatch, carbon")
    _add_scenario_flags(p)
    _add_method_flags(p)
    p.add_argument("--instance", help="one-day dispatch instance directory (default: built-in)")
    p.add_argument("--pv-area", type=float, default=0.0, help="PV panel area per station, m2")
    out_flag(p)
    p.set_defaults(func=cmd_simulate)

    p_d = sub.add_parser("dispatch", help="unit commitment").add_subparsers(dest="action", required=True)
    p = p_d.add_parser("solve", parents=[common], help="solve with and without a station load")
    p.add_argument("--instance", help="instance directory (default: built-in)")
    p.add_argument("--bs-load", help="CSV with slot,p_bs_mw")
    p.add_argument("--time-limit", type=float, default=30.0, help="solver time limit, s")
    out_flag(p)
    p.set_defaults(func=cmd_dispatch_solve)

    p_c = sub.add_parser("control", help="sleep controllers").add_subparsers(dest="action", required=True)
    p = p_c.add_parser("run", parents=[common], help="compute a sleep schedule")
    _add_scenario_flags(p)
    _add_method_flags(p)
    p.add_argument("--grid-factor", type=float, default=GRID_CO2_T_PER_MWH, help="tCO2 per MWh")
    out_flag(p)
    p.set_defaults(func=cmd_control_run)
    p = p_c.add_parser("train", parents=[common], help="train the multi-agent controller")
    _add_scenario_flags(p)
    p.add_argument("--episodes", type=int, default=deepenergy.DEFAULT_EPISODES)
    p.add_argument("--lr", type=float, default=deepenergy.Hyperparams.lr, help="initial learning rate")
    p.add_argument("--lr-end", type=float, default=deepenergy.Hyperparams.lr_end,
                   help="final learning rate (geometric decay); pass the --lr value to keep it fixed")
    p.add_argument("--updates-per-slot", type=int, default=deepenergy.Hyperparams.updates_per_slot)
    out_flag(p)
    p.set_defaults(func=cmd_control_train)

    p_r = sub.add_parser("regions", help="regional extrapolation").add_subparsers(dest="action", required=True)
    p = p_r.add_parser("estimate", parents=[common], help="Monte Carlo regional energy and carbon")
    _add_scenario_flags(p)
    _add_method_flags(p, methods=True)
    p.add_argument("--regions", required=True, help="regions.csv")
    p.add_argument("--trials", type=int, default=regional.DEFAULT_TRIALS)
    p.add_argument("--reference-users", type=int, help="users served by the reference scenario "
                                                        "(default: 1000 per station)")
    p.add_argument("--grid-factor", type=float, default=GRID_CO2_T_PER_MWH, help="tCO2 per MWh")
    out_flag(p)
    p.set_defaults(func=cmd_regions_estimate)

    p_s = sub.add_parser("solar", help="PV offset economics").add_subparsers(dest="action", required=True)
    p = p_s.add_parser("sweep", parents=[common], help="net-zero rate, curtailment and LCCA over PV sizes")
    _add_scenario_flags(p)
    _add_method_flags(p, methods=True)
    p.set_defaults(methods=["none", "greedy"])
    p.add_argument("--areas", type=_floats, default=[5.0, 10.0, 20.0, 40.0], help="panel areas, m2 per station")
    p.add_argument("--investments", type=_floats, default=[], help="total investments (CNY)")
    p.add_argument("--pv", help="pv.csv with per-station panel parameters")
    p.add_argument("--costs", help="costs.csv")
    p.add_argument("--grid-factor", type=float, default=GRID_CO2_T_PER_MWH, help="tCO2 per MWh")
    out_flag(p)
    p.set_defaults(func=cmd_solar_sweep)

    p = sub.add_parser("compare", parents=[common], help="compare two or more run directories")
    p.add_argument("runs", nargs="+")
    out_flag(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", parents=[common], help="independently re-check a simulate run")
    p.add_argument("run")
    out_flag(p, required=False)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    apply_thread_cap()
    log.debug("numba kernels %s", "on" if USE_NUMBA else "off")
    try:
        return args.func(args)
    except (CliError, FormatError, FileNotFoundError, ValueError, dispatch.InfeasibleDispatch) as e:
        print(f"greencell: error: {e}", file=sys.stderr)
        return 2
