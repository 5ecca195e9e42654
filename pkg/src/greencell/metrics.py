"""Traffic/energy misalignment and efficiency metrics.

Units: traffic in GByte (converted to TByte for efficiencies), energy in MWh,
emissions in tonnes CO2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import write_csv

GB_PER_TB = 1000.0

# Reference desired efficiencies (C / E_max), TByte/MWh.
DESIRED_EE_5G = 6.29
DESIRED_EE_4G = 3.01


@dataclass(frozen=True)
class EfficiencySnapshot:
    load_gb: float
    capacity_gb: float
    energy_mwh: float
    e_max_mwh: float
    m: float
    ee_tb_per_mwh: float
    ce_tb_per_tco2: float | None = None


def misalignment(energy_mwh, e_max_mwh, load_gb, capacity_gb):
    """``M = E/E_max - L/C``. Works elementwise on arrays.

    >>> round(misalignment(42.0, 100.0, 1.0, 100.0), 12)
    0.41
    """
    e = np.asarray(energy_mwh, dtype=float)
    emax = np.asarray(e_max_mwh, dtype=float)
    ld = np.asarray(load_gb, dtype=float)
    cap = np.asarray(capacity_gb, dtype=float)
    if np.any(emax <= 0) or np.any(cap <= 0):
        raise ValueError("e_max and capacity must be > 0")
    if np.any(e < 0) or np.any(e > emax * (1 + 1e-12)):
        raise ValueError("energy must lie in [0, e_max]")
    if np.any(ld < 0) or np.any(ld > cap * (1 + 1e-12)):
        raise ValueError("load must lie in [0, capacity]")
    m = e / emax - ld / cap
    return float(m) if m.ndim == 0 else m


def energy_efficiency(load_gb, energy_mwh):
    """Delivered TByte per MWh. Zero load gives 0 rather than NaN."""
    ld = np.asarray(load_gb, dtype=float)
    e = np.asarray(energy_mwh, dtype=float)
    if np.any(e <= 0):
        raise ValueError("energy must be > 0")
    ee = ld / GB_PER_TB / e
    return float(ee) if ee.ndim == 0 else ee


def efficiency_from_misalignment(capacity_gb, e_max_mwh, m, l_norm):
    """Efficiency written as ``eta_desired / (1 + M / L~)``, in TByte/MWh.

    Equal to :func:`energy_efficiency` whenever ``L~ > 0``; 0 at zero load.
    """
    desired = np.asarray(capacity_gb, dtype=float) / GB_PER_TB / np.asarray(e_max_mwh, dtype=float)
    l = np.asarray(l_norm, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ee = np.where(l > 0, desired / (1.0 + np.asarray(m, dtype=float) / np.where(l > 0, l, 1.0)), 0.0)
    return float(ee) if ee.ndim == 0 else ee


def carbon_efficiency(load_gb, co2_t):
    """Delivered TByte per tonne CO2."""
    ld = np.asarray(load_gb, dtype=float)
    c = np.asarray(co2_t, dtype=float)
    if np.any(c <= 0):
        raise ValueError("co2 must be > 0")
    ce = ld / GB_PER_TB / c
    return float(ce) if ce.ndim == 0 else ce


def efficiency_trap_area(ce_with, ce_baseline, traffic_tb) -> float:
    """Extra tonnes CO2 emitted while carbon efficiency sits below baseline.

    Discrete sum over slots of ``max(0, traffic/ce_baseline - traffic/ce_with)``.
    ``ce_baseline`` may be a scalar or a series aligned with the others.
    """
    ce_with = np.asarray(ce_with, dtype=float)
    base = np.broadcast_to(np.asarray(ce_baseline, dtype=float), ce_with.shape)
    traffic = np.asarray(traffic_tb, dtype=float)
    if traffic.shape != ce_with.shape:
        raise ValueError("series must be aligned")
    if np.any(ce_with <= 0) or np.any(base <= 0):
        raise ValueError("carbon efficiencies must be > 0")
    extra = traffic / ce_with - traffic / base
    return float(np.sum(np.maximum(extra, 0.0)))


def snapshot(load_gb, capacity_gb, energy_mwh, e_max_mwh, co2_t=None) -> EfficiencySnapshot:
    m = misalignment(energy_mwh, e_max_mwh, load_gb, capacity_gb)
    ce = carbon_efficiency(load_gb, co2_t) if co2_t is not None else None
    return EfficiencySnapshot(float(load_gb), float(capacity_gb), float(energy_mwh), float(e_max_mwh),
                              m, energy_efficiency(load_gb, energy_mwh), ce)


METRICS_HEADER = ["slot", "load_gb", "energy_mwh", "m", "ee", "ce"]


def write_metrics_report(path, load_gb, energy_mwh, m, co2_t) -> None:
    """Per-slot report: slot, load_gb, energy_mwh, m, ee (TByte/MWh), ce (TByte/tCO2)."""
    load_gb = np.asarray(load_gb, dtype=float)
    energy_mwh = np.asarray(energy_mwh, dtype=float)
    ee = energy_efficiency(load_gb, energy_mwh)
    ce = carbon_efficiency(load_gb, co2_t)
    write_csv(path, METRICS_HEADER,
              ((t, float(load_gb[t]), float(energy_mwh[t]), float(m[t]), float(ee[t]), float(ce[t]))
               for t in range(len(load_gb))))
