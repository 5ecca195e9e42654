"""Synthetic city scenarios: stations, cells, grids, traffic and weather.

Traffic follows a sinusoidal diurnal rhythm (night trough, afternoon peak)
with multiplicative lognormal noise; each cell-day is then rescaled so that
its daily maximum equals a per-cell peak utilisation drawn from
:class:`ProfileParams`. Grids group stations of one radio generation that lie
within ``grid_radius_km`` of a leader station.

On disk a scenario is a directory of CSV tables plus ``manifest.toml``::

    manifest.toml       format version, seed, slot count, profile, cooling
    base_stations.csv   id,kind,x_km,y_km
    cells.csv           id,bs_id,grid_id,capacity_gb
    traffic.csv         cell_id,slot,gb
    weather.csv         slot,temp_c
    energy_coeffs.csv   kind,alpha,gamma,beta,sigma,p_trans_max,sleep_rru_w,bbu_w
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._io import CsvReader, FormatError, fmt, read_toml, write_csv, write_toml
from .energy_model import DEFAULT_BBU_W, DEFAULT_COEFFS, CoolingParams, EnergyCoeffs, Kind

SLOTS_PER_DAY = 48
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BaseStationSpec:
    id: str
    kind: Kind
    x_km: float
    y_km: float
    cell_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.cell_ids) != Kind(self.kind).n_cells:
            raise ValueError(f"{self.id}: {self.kind} needs {Kind(self.kind).n_cells} cells")
        if not (np.isfinite(self.x_km) and np.isfinite(self.y_km)):
            raise ValueError(f"{self.id}: non-finite location")


@dataclass(frozen=True)
class CellSpec:
    id: str
    base_station_id: str
    grid_id: str
    capacity_gb: float
    coeffs: EnergyCoeffs

    def __post_init__(self):
        if not self.capacity_gb > 0:
            raise ValueError(f"{self.id}: capacity must be > 0")


@dataclass(frozen=True)
class GridSpec:
    id: str
    cell_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.cell_ids:
            raise ValueError(f"grid {self.id} is empty")


@dataclass(frozen=True)
class ProfileParams:
    """Knobs of the synthetic generator (utilisations are fractions of capacity)."""

    peak_util_4g: tuple[float, float] = (0.45, 0.85)
    peak_util_5g: tuple[float, float] = (0.10, 0.40)
    trough_ratio: float = 0.08
    trough_hour: float = 4.5
    noise_sigma: float = 0.25
    cap_4g_gb: float = 6.8
    cap_5g_gb: float = 32.0
    cap_5g_6cell_gb: float = 20.0
    cap_jitter: float = 0.15
    five_g_six_cell_fraction: float = 0.2
    area_km: float = 4.0
    center_sigma_km: float = 0.6
    grid_radius_km: float = 0.5
    temp_mean_c: float = 17.0
    temp_amp_c: float = 6.0
    temp_peak_hour: float = 15.0
    temp_noise_c: float = 0.5
    start_day_of_year: int = 105

    def __post_init__(self):
        for lo, hi in (self.peak_util_4g, self.peak_util_5g):
            if not 0 < lo <= hi <= 1:
                raise ValueError("peak utilisation bounds must satisfy 0 < lo <= hi <= 1")
        if not 0 <= self.trough_ratio <= 1:
            raise ValueError("trough_ratio must lie in [0, 1]")
        if not 0 <= self.five_g_six_cell_fraction <= 1:
            raise ValueError("five_g_six_cell_fraction must lie in [0, 1]")
        if self.grid_radius_km < 0 or self.noise_sigma < 0:
            raise ValueError("grid_radius_km and noise_sigma must be >= 0")

    @classmethod
    def fixed_peak(cls, util: float, **kw) -> "ProfileParams":
        """Every cell's daily maximum equals ``util`` times its capacity."""
        return cls(peak_util_4g=(util, util), peak_util_5g=(util, util), **kw)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileParams":
        kw = {}
        for f in dataclasses.fields(cls):
            if f.name in d:
                v = d[f.name]
                kw[f.name] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)


class CellArrays(NamedTuple):
    """Flat per-cell / per-station arrays consumed by the kernels."""

    alpha: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    ptmax: np.ndarray
    sleep_w: np.ndarray
    cap: np.ndarray
    cell_bs: np.ndarray
    cell_grid: np.ndarray
    grid_ptr: np.ndarray
    grid_cells: np.ndarray
    bbu: np.ndarray
    bs_is_5g: np.ndarray


@dataclass(frozen=True, eq=False)
class Scenario:
    base_stations: tuple[BaseStationSpec, ...]
    cells: tuple[CellSpec, ...]
    grids: tuple[GridSpec, ...]
    traffic: np.ndarray                 # (C, T) GByte per half-hour slot
    weather: np.ndarray                 # (T,) outdoor temperature, deg C
    coeffs: dict = field(default_factory=lambda: dict(DEFAULT_COEFFS))
    bbu_w: dict = field(default_factory=lambda: dict(DEFAULT_BBU_W))
    cooling: CoolingParams = CoolingParams()
    seed: int | None = None
    profile: ProfileParams = ProfileParams()

    def __post_init__(self):
        validate(self)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.base_stations == other.base_stations and self.cells == other.cells
                and self.grids == other.grids and self.coeffs == other.coeffs
                and self.bbu_w == other.bbu_w and self.cooling == other.cooling
                and self.seed == other.seed and self.profile == other.profile
                and np.array_equal(self.traffic, other.traffic)
                and np.array_equal(self.weather, other.weather))

    __hash__ = None

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_bs(self) -> int:
        return len(self.base_stations)

    @property
    def n_slots(self) -> int:
        return self.traffic.shape[1]

    @property
    def days(self) -> int:
        return self.n_slots // SLOTS_PER_DAY

    @cached_property
    def cell_index(self) -> dict[str, int]:
        return {c.id: i for i, c in enumerate(self.cells)}

    @cached_property
    def bs_index(self) -> dict[str, int]:
        return {b.id: i for i, b in enumerate(self.base_stations)}

    @cached_property
    def arrays(self) -> CellArrays:
        ci = self.cell_index
        gi = {g.id: k for k, g in enumerate(self.grids)}
        ptr = np.zeros(len(self.grids) + 1, dtype=np.int64)
        members = []
        for k, g in enumerate(self.grids):
            members.extend(ci[c] for c in g.cell_ids)
            ptr[k + 1] = len(members)

        def col(attr):
            return np.array([getattr(c.coeffs, attr) for c in self.cells], dtype=np.float64)

        kinds = [Kind(b.kind) for b in self.base_stations]
        out = CellArrays(
            alpha=col("alpha"), gamma=col("gamma"), beta=col("beta"), sigma=col("sigma"),
            ptmax=col("p_trans_max"), sleep_w=col("sleep_rru_w"),
            cap=np.array([c.capacity_gb for c in self.cells]),
            cell_bs=np.array([self.bs_index[c.base_station_id] for c in self.cells], dtype=np.int64),
            cell_grid=np.array([gi[c.grid_id] for c in self.cells], dtype=np.int64),
            grid_ptr=ptr,
            grid_cells=np.array(members, dtype=np.int64),
            bbu=np.array([self.bbu_w[k] for k in kinds]),
            bs_is_5g=np.array([k.is_5g for k in kinds]),
        )
        for arr in out:
            arr.setflags(write=False)
        return out

    def with_traffic(self, traffic: np.ndarray) -> "Scenario":
        return dataclasses.replace(self, traffic=np.asarray(traffic, dtype=np.float64))

    def slice_days(self, first: int, count: int) -> "Scenario":
        lo, hi = first * SLOTS_PER_DAY, (first + count) * SLOTS_PER_DAY
        return dataclasses.replace(self, traffic=self.traffic[:, lo:hi].copy(),
                                   weather=self.weather[lo:hi].copy())


def validate(s: Scenario) -> None:
    """Structural and physical invariants; raises ValueError on violation."""
    bs_ids = [b.id for b in s.base_stations]
    cell_ids = [c.id for c in s.cells]
    if len(set(bs_ids)) != len(bs_ids) or len(set(cell_ids)) != len(cell_ids):
        raise ValueError("duplicate station or cell id")
    if not bs_ids:
        raise ValueError("scenario has no base stations")
    bs_of = {b.id: b for b in s.base_stations}
    listed = {}
    for b in s.base_stations:
        for c in b.cell_ids:
            if c in listed:
                raise ValueError(f"cell {c} listed under two stations")
            listed[c] = b.id
    grid_of = {}
    for g in s.grids:
        for c in g.cell_ids:
            if c in grid_of:
                raise ValueError(f"cell {c} in two grids")
            grid_of[c] = g.id
    for c in s.cells:
        if c.base_station_id not in bs_of or listed.get(c.id) != c.base_station_id:
            raise ValueError(f"cell {c.id}: station {c.base_station_id} does not list it")
        if grid_of.get(c.id) != c.grid_id:
            raise ValueError(f"cell {c.id}: not a member of grid {c.grid_id}")
    if set(listed) != set(cell_ids) or set(grid_of) != set(cell_ids):
        raise ValueError("stations/grids reference unknown cells")
    tr = s.traffic
    if tr.ndim != 2 or tr.shape[0] != len(s.cells) or tr.shape[1] == 0:
        raise ValueError("traffic must have shape (n_cells, n_slots)")
    if s.weather.shape != (tr.shape[1],):
        raise ValueError("weather trace length must equal traffic length")
    if not np.all(np.isfinite(tr)) or np.any(tr < 0):
        raise ValueError("traffic must be finite and >= 0")
    caps = np.array([c.capacity_gb for c in s.cells])
    over = tr > caps[:, None]
    if over.any():
        i, t = np.argwhere(over)[0]
        raise ValueError(f"traffic of cell {s.cells[i].id} at slot {t} exceeds capacity")
    if not np.all(np.isfinite(s.weather)):
        raise ValueError("weather must be finite")


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------

def _diurnal(n_slots: int, trough_hour: float) -> np.ndarray:
    hours = (np.arange(n_slots) % SLOTS_PER_DAY + 0.5) * 0.5
    return 0.5 * (1.0 - np.cos(2 * np.pi * (hours - trough_hour) / 24.0))


def _leader_clusters(xy: np.ndarray, radius: float) -> list[list[int]]:
    """Greedy leader clustering: the first unassigned point recruits every
    unassigned point within ``radius``."""
    n = len(xy)
    assigned = np.zeros(n, dtype=bool)
    groups = []
    for i in range(n):
        if assigned[i]:
            continue
        d = np.hypot(*(xy - xy[i]).T)
        members = np.flatnonzero((d <= radius) & ~assigned)
        assigned[members] = True
        groups.append(members.tolist())
    return groups


def generate_scenario(seed: int, n_4g: int, n_5g: int, days: int = 7,
                      profile: ProfileParams | None = None,
                      cooling: CoolingParams | None = None) -> Scenario:
    """Build a reproducible synthetic city.

    Examples
    --------
    >>> s = generate_scenario(1, n_4g=10, n_5g=5, days=1,
    ...                       profile=ProfileParams(five_g_six_cell_fraction=0.0))
    >>> s.n_cells, s.n_slots
    (45, 48)
    """
    if n_4g < 0 or n_5g < 0 or n_4g + n_5g < 1:
        raise ValueError("need at least one base station")
    if days < 1:
        raise ValueError("days must be >= 1")
    p = profile or ProfileParams()
    rng = np.random.default_rng(seed)
    half = p.area_km / 2

    xy4 = rng.uniform(-half, half, size=(n_4g, 2))
    xy5 = np.clip(rng.normal(0.0, p.center_sigma_km, size=(n_5g, 2)), -half, half)
    six = rng.random(n_5g) < p.five_g_six_cell_fraction

    stations: list[tuple[str, Kind, np.ndarray]] = []
    for i in range(n_4g):
        stations.append((f"BS{len(stations):04d}", Kind.FOUR_G_3CELL, xy4[i]))
    for i in range(n_5g):
        kind = Kind.FIVE_G_6CELL if six[i] else Kind.FIVE_G_3CELL
        stations.append((f"BS{len(stations):04d}", kind, xy5[i]))

    coeffs = dict(DEFAULT_COEFFS)
    base_cap = {Kind.FOUR_G_3CELL: p.cap_4g_gb, Kind.FIVE_G_3CELL: p.cap_5g_gb,
                Kind.FIVE_G_6CELL: p.cap_5g_6cell_gb}

    # round-trip the coordinates through text so saved files reload bit-exactly
    bs_specs = []
    cell_rows = []  # (cell_id, bs_id, kind, capacity)
    for bs_id, kind, loc in stations:
        cids = tuple(f"{bs_id}-C{k}" for k in range(kind.n_cells))
        bs_specs.append(BaseStationSpec(bs_id, kind, float(fmt(loc[0])), float(fmt(loc[1])), cids))
        jitter = 1.0 + p.cap_jitter * rng.uniform(-1.0, 1.0, size=kind.n_cells)
        for cid, j in zip(cids, jitter):
            cell_rows.append((cid, bs_id, kind, round(base_cap[kind] * j, 3)))

    grid_of_bs: dict[str, str] = {}
    grids = []
    for is_5g in (False, True):
        idx = [i for i, b in enumerate(bs_specs) if Kind(b.kind).is_5g == is_5g]
        if not idx:
            continue
        xy = np.array([[bs_specs[i].x_km, bs_specs[i].y_km] for i in idx])
        for members in _leader_clusters(xy, p.grid_radius_km):
            gid = f"G{len(grids):03d}"
            cids = []
            for m in members:
                b = bs_specs[idx[m]]
                grid_of_bs[b.id] = gid
                cids.extend(b.cell_ids)
            grids.append(GridSpec(gid, tuple(cids)))

    cells = tuple(CellSpec(cid, bs_id, grid_of_bs[bs_id], cap, coeffs[kind])
                  for cid, bs_id, kind, cap in cell_rows)

    n_slots = days * SLOTS_PER_DAY
    n_cells = len(cells)
    shape = p.trough_ratio + (1.0 - p.trough_ratio) * _diurnal(n_slots, p.trough_hour)
    noise = np.exp(p.noise_sigma * rng.standard_normal((n_cells, n_slots)) - 0.5 * p.noise_sigma ** 2)
    raw = shape[None, :] * noise
    caps = np.array([c.capacity_gb for c in cells])
    is5 = np.array([k.is_5g for _, _, k, _ in cell_rows])
    lo = np.where(is5, p.peak_util_5g[0], p.peak_util_4g[0])
    hi = np.where(is5, p.peak_util_5g[1], p.peak_util_4g[1])
    peak = lo + (hi - lo) * rng.random(n_cells)
    daily = raw.reshape(n_cells, days, SLOTS_PER_DAY)
    daily = daily / daily.max(axis=2, keepdims=True) * (peak * caps)[:, None, None]
    traffic = np.clip(daily.reshape(n_cells, n_slots), 0.0, caps[:, None])
    traffic = np.round(traffic, 6)
    traffic = np.minimum(traffic, caps[:, None])

    hours = (np.arange(n_slots) % SLOTS_PER_DAY + 0.5) * 0.5
    temp = (p.temp_mean_c + p.temp_amp_c * np.cos(2 * np.pi * (hours - p.temp_peak_hour) / 24.0)
            + p.temp_noise_c * rng.standard_normal(n_slots))
    weather = np.round(temp, 3)

    return Scenario(tuple(bs_specs), cells, tuple(grids), traffic, weather,
                    coeffs=coeffs, bbu_w=dict(DEFAULT_BBU_W),
                    cooling=cooling or CoolingParams(), seed=seed, profile=p)


def rescale_peak(s: Scenario, util: float) -> Scenario:
    """Counterfactual load level: rescale each cell-day so its maximum is
    ``util`` times capacity (days whose traffic is all zero stay zero)."""
    if not 0 < util <= 1:
        raise ValueError("util must lie in (0, 1]")
    caps = s.arrays.cap
    d = s.traffic.reshape(s.n_cells, s.days, SLOTS_PER_DAY)
    mx = d.max(axis=2, keepdims=True)
    scale = np.where(mx > 0, util * caps[:, None, None] / np.where(mx > 0, mx, 1.0), 0.0)
    out = np.minimum((d * scale).reshape(s.n_cells, -1), caps[:, None])
    return s.with_traffic(out)


def scale_traffic(s: Scenario, factor: float) -> Scenario:
    """Multiply all traffic by ``factor``, clipped to capacity."""
    return s.with_traffic(np.minimum(s.traffic * factor, s.arrays.cap[:, None]))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

_COEFF_HEADER = ["kind", "alpha", "gamma", "beta", "sigma", "p_trans_max", "sleep_rru_w", "bbu_w"]


def save_scenario(s: Scenario, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_slots": s.n_slots,
        "n_cells": s.n_cells,
        "n_base_stations": s.n_bs,
        "cooling": dataclasses.asdict(s.cooling),
        "profile": s.profile.to_dict(),
    }
    if s.seed is not None:
        manifest["seed"] = s.seed
    write_toml(path / "manifest.toml", manifest)
    write_csv(path / "base_stations.csv", ["id", "kind", "x_km", "y_km"],
              ((b.id, Kind(b.kind).value, float(b.x_km), float(b.y_km)) for b in s.base_stations))
    write_csv(path / "cells.csv", ["id", "bs_id", "grid_id", "capacity_gb"],
              ((c.id, c.base_station_id, c.grid_id, float(c.capacity_gb)) for c in s.cells))
    write_csv(path / "traffic.csv", ["cell_id", "slot", "gb"],
              ((c.id, t, float(s.traffic[i, t])) for i, c in enumerate(s.cells)
               for t in range(s.n_slots)))
    write_csv(path / "weather.csv", ["slot", "temp_c"],
              ((t, float(v)) for t, v in enumerate(s.weather)))
    write_energy_coeffs(path / "energy_coeffs.csv", s.coeffs, s.bbu_w)
    return path


def write_energy_coeffs(path, coeffs: dict, bbu_w: dict) -> None:
    write_csv(path, _COEFF_HEADER,
              ((k.value, float(c.alpha), float(c.gamma), float(c.beta), float(c.sigma),
                float(c.p_trans_max), float(c.sleep_rru_w), float(bbu_w[k]))
               for k, c in sorted(coeffs.items(), key=lambda kv: kv[0].value)))


def read_energy_coeffs(path) -> tuple[dict, dict]:
    """Parse an ``energy_coeffs.csv`` override table."""
    coeffs, bbu = {}, {}
    for row in CsvReader(path, _COEFF_HEADER):
        try:
            kind = Kind(row.str("kind"))
        except ValueError:
            raise FormatError(path, row.line, "kind", f"unknown kind {row.values['kind']!r}") from None
        try:
            coeffs[kind] = EnergyCoeffs(*(row.float(f) for f in _COEFF_HEADER[1:7]))
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(path, row.line, None, str(exc)) from None
        bbu[kind] = row.float("bbu_w")
    return coeffs, bbu


def load_scenario(path) -> Scenario:
    path = Path(path)
    man = read_toml(path / "manifest.toml")
    try:
        version = man["format_version"]
        n_slots = int(man["n_slots"])
        n_cells_decl = int(man["n_cells"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path / "manifest.toml", None, str(exc), "missing or bad key") from None
    if version != FORMAT_VERSION:
        raise FormatError(path / "manifest.toml", None, "format_version", f"unsupported {version}")

    coeffs, bbu = read_energy_coeffs(path / "energy_coeffs.csv")

    bs_rows = []
    for row in CsvReader(path / "base_stations.csv", ["id", "kind", "x_km", "y_km"]):
        try:
            kind = Kind(row.str("kind"))
        except ValueError:
            raise FormatError(row.path, row.line, "kind", f"unknown kind {row.values['kind']!r}") from None
        if kind not in coeffs:
            raise FormatError(row.path, row.line, "kind", f"no energy coefficients for {kind.value}")
        bs_rows.append((row.str("id"), kind, row.float("x_km"), row.float("y_km")))

    cell_rows = []
    for row in CsvReader(path / "cells.csv", ["id", "bs_id", "grid_id", "capacity_gb"]):
        cap = row.float("capacity_gb")
        if not cap > 0:
            raise FormatError(row.path, row.line, "capacity_gb", "capacity must be > 0")
        cell_rows.append((row.str("id"), row.str("bs_id"), row.str("grid_id"), cap, row.line))
    if len(cell_rows) != n_cells_decl:
        raise FormatError(path / "cells.csv", None, None,
                          f"manifest declares {n_cells_decl} cells, file has {len(cell_rows)}")

    kind_of = {b[0]: b[1] for b in bs_rows}
    cells_of: dict[str, list[str]] = {b[0]: [] for b in bs_rows}
    grid_members: dict[str, list[str]] = {}
    cells = []
    for cid, bs_id, gid, cap, line in cell_rows:
        if bs_id not in kind_of:
            raise FormatError(path / "cells.csv", line, "bs_id", f"unknown station {bs_id!r}")
        cells_of[bs_id].append(cid)
        grid_members.setdefault(gid, []).append(cid)
        cells.append(CellSpec(cid, bs_id, gid, cap, coeffs[kind_of[bs_id]]))

    try:
        stations = tuple(BaseStationSpec(i, k, x, y, tuple(cells_of[i])) for i, k, x, y in bs_rows)
    except ValueError as exc:
        raise FormatError(path / "base_stations.csv", None, None, str(exc)) from None
    grids = tuple(GridSpec(g, tuple(m)) for g, m in sorted(grid_members.items()))

    index = {c.id: i for i, c in enumerate(cells)}
    traffic = np.full((len(cells), n_slots), np.nan)
    for row in CsvReader(path / "traffic.csv", ["cell_id", "slot", "gb"]):
        cid = row.str("cell_id")
        if cid not in index:
            raise FormatError(row.path, row.line, "cell_id", f"unknown cell {cid!r}")
        t = row.int("slot")
        if not 0 <= t < n_slots:
            raise FormatError(row.path, row.line, "slot", f"slot {t} outside [0, {n_slots})")
        gb = row.float("gb")
        i = index[cid]
        if gb < 0:
            raise FormatError(row.path, row.line, "gb", "negative traffic")
        if gb > cells[i].capacity_gb:
            raise FormatError(row.path, row.line, "gb",
                              f"traffic {gb} exceeds capacity {cells[i].capacity_gb} of {cid}")
        traffic[i, t] = gb
    if np.isnan(traffic).any():
        i, t = np.argwhere(np.isnan(traffic))[0]
        raise FormatError(path / "traffic.csv", None, None,
                          f"missing traffic for cell {cells[i].id} slot {t} (truncated file?)")

    weather = np.full(n_slots, np.nan)
    for row in CsvReader(path / "weather.csv", ["slot", "temp_c"]):
        t = row.int("slot")
        if not 0 <= t < n_slots:
            raise FormatError(row.path, row.line, "slot", f"slot {t} outside [0, {n_slots})")
        weather[t] = row.float("temp_c")
    if np.isnan(weather).any():
        raise FormatError(path / "weather.csv", None, None, "missing weather slots (truncated file?)")

    cooling = CoolingParams(**man.get("cooling", {}))
    profile = ProfileParams.from_dict(man.get("profile", {}))
    try:
        return Scenario(stations, tuple(cells), grids, traffic, weather, coeffs=coeffs, bbu_w=bbu,
                        cooling=cooling, seed=man.get("seed"), profile=profile)
    except ValueError as exc:
        raise FormatError(path, None, None, f"invalid scenario: {exc}") from None
