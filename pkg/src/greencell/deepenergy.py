"""Collaborative multi-agent Q-learning sleep controller (DeepEnergy).

One agent per cell chooses awake or sleep every slot. Agents see the time of
day, their grid's traffic over the last four slots, their own device
parameters and the mean device parameters of their neighbours in two
relation graphs: cells sharing a grid and cells sharing a base station.

Two value networks are trained from a shared replay buffer. ``q2(o, m)`` also
sees two masks summarising what the other agents did:

* ``m1``: the awake capacity of the other cells in the grid covers the grid's
  traffic, so this cell could sleep without dropping service;
* ``m2``: every other cell of this cell's base station chose to sleep.

``q2`` regresses the observed reward. ``q1(o)`` sees no masks and imitates
``q2`` averaged over masks drawn by re-sampling everyone's actions from the
current policy; it is the network used for execution.

Execution repair: agents decide before seeing the current slot's traffic, so
a joint action may leave a grid short of capacity. Sleeping cells of such a
grid are woken highest ``q1(awake)`` first until the grid is covered and
keeps ``min_awake`` cells. Training executes actions through the same
repair and stores the executed actions in the replay buffer, so rewards
always describe a schedule that serves all traffic.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from ._io import atomic_write_bytes, write_csv
from .controllers import SleepSchedule, _ensure_feasible
from .energy_model import Kind, station_power_arrays
from .qnet import AWAKE, SLEEP, TrainingDivergence, ValueNet, gradient_step, imitation_loss, regression_loss
from .scenario import SLOTS_PER_DAY

N_HISTORY = 4
N_STATIC = 7
DEFAULT_EPISODES = 400
LOG_HEADER = ["episode", "mean_reward", "loss1", "loss2", "epsilon"]


class Graphs(NamedTuple):
    grid: np.ndarray   # (C, C) bool adjacency, no self loops
    bs: np.ndarray     # (C, C) bool adjacency, no self loops


def build_graphs(scenario) -> Graphs:
    """Undirected same-grid and same-base-station adjacency between cells."""
    a = scenario.arrays
    grid = a.cell_grid[:, None] == a.cell_grid[None, :]
    bs = a.cell_bs[:, None] == a.cell_bs[None, :]
    np.fill_diagonal(grid, False)
    np.fill_diagonal(bs, False)
    return Graphs(grid, bs)


def _mean_operator(adj: np.ndarray) -> np.ndarray:
    deg = adj.sum(axis=1, keepdims=True)
    return np.where(deg > 0, adj / np.maximum(deg, 1), 0.0)


def static_features(scenario) -> np.ndarray:
    """Per-cell device parameters, scaled to order one. Shape ``(C, 7)``."""
    a = scenario.arrays
    grid_cap = np.bincount(a.cell_grid, weights=a.cap)
    grid_size = np.bincount(a.cell_grid)
    idle = a.alpha * np.minimum(a.sigma, a.ptmax) + a.gamma
    six = np.array([Kind(scenario.base_stations[b].kind) is Kind.FIVE_G_6CELL for b in a.cell_bs], dtype=float)
    return np.column_stack([
        a.cap / a.cap.max(),
        a.cap / grid_cap[a.cell_grid],
        (idle - a.sleep_w) / 1000.0,
        a.alpha * a.beta / 1000.0,
        a.bs_is_5g[a.cell_bs].astype(float),
        six,
        grid_size[a.cell_grid] / 10.0,
    ])


class Context:
    """Scenario-derived arrays shared by observation, mask and reward code."""

    def __init__(self, scenario):
        a = scenario.arrays
        self.scenario = scenario
        self.cap = np.asarray(a.cap)
        self.cell_grid = np.asarray(a.cell_grid)
        self.cell_bs = np.asarray(a.cell_bs)
        self.n_grids = len(scenario.grids)
        self.n_bs = scenario.n_bs
        self.bs_size = np.bincount(self.cell_bs, minlength=self.n_bs)
        self.grid_cap = np.bincount(self.cell_grid, weights=self.cap, minlength=self.n_grids)
        graphs = build_graphs(scenario)
        static = static_features(scenario)
        self.device = np.hstack([static, _mean_operator(graphs.grid) @ static,
                                 _mean_operator(graphs.bs) @ static])

    @property
    def d_obs(self) -> int:
        return 2 + N_HISTORY + self.device.shape[1]

    def grid_demand(self, traffic) -> np.ndarray:
        """Grid traffic totals, shape ``(G, T)``."""
        out = np.zeros((self.n_grids, traffic.shape[1]))
        np.add.at(out, self.cell_grid, traffic)
        return out

    def observations(self, traffic, slots) -> np.ndarray:
        """Observation inputs for ``slots``, shape ``(len(slots), C, d_obs)``.

        Load history wraps around the trace, so the first slots of a trace see
        the traffic at its end.
        """
        util = self.grid_demand(traffic) / self.grid_cap[:, None]
        n_t = traffic.shape[1]
        slots = np.asarray(slots, dtype=np.int64)
        phase = 2 * np.pi * (slots % SLOTS_PER_DAY) / SLOTS_PER_DAY
        hist = np.stack([util[:, (slots - k) % n_t] for k in range(1, N_HISTORY + 1)], axis=-1)  # (G, S, 4)
        n_s, n_c = len(slots), len(self.cap)
        x = np.empty((n_s, n_c, self.d_obs))
        x[:, :, 0] = np.sin(phase)[:, None]
        x[:, :, 1] = np.cos(phase)[:, None]
        x[:, :, 2:2 + N_HISTORY] = hist[self.cell_grid].transpose(1, 0, 2)
        x[:, :, 2 + N_HISTORY:] = self.device[None]
        return x

    def masks(self, sleep, demand) -> np.ndarray:
        """``(m1, m2)`` per cell for one joint action, shape ``(C, 2)``.

        ``sleep`` is ``(C,)`` bool, ``demand`` the grid totals ``(G,)``.
        """
        sleep = np.asarray(sleep, dtype=bool)
        awake_cap = np.bincount(self.cell_grid, weights=self.cap * ~sleep, minlength=self.n_grids)
        others = awake_cap[self.cell_grid] - self.cap * ~sleep
        m1 = others + kernels.FEAS_TOL >= demand[self.cell_grid]
        asleep_bs = np.bincount(self.cell_bs, weights=sleep, minlength=self.n_bs)
        m2 = asleep_bs[self.cell_bs] - sleep == self.bs_size[self.cell_bs] - 1
        return np.column_stack([m1, m2])

    def repair(self, sleep, awake_pref, traffic, min_awake: int = 1) -> np.ndarray:
        """Wake cells of short grids, highest ``awake_pref`` first. ``(C, T)`` in and out."""
        a = self.scenario.arrays
        return kernels.repair_wake(np.ascontiguousarray(traffic, dtype=np.float64), a.cap,
                                   np.ascontiguousarray(sleep, dtype=np.bool_),
                                   np.ascontiguousarray(awake_pref, dtype=np.float64),
                                   a.grid_ptr, a.grid_cells, int(min_awake))

    def rewards(self, asleep, traffic, slots) -> np.ndarray:
        """Per-cell reward ``-(grid RRU + own BBU + own cooling)`` in W, ``(C, T)``.

        ``asleep`` must serve all traffic.
        """
        a = self.scenario.arrays
        loads, deficit = kernels.redistribute(traffic, asleep, a.cap, a.grid_ptr, a.grid_cells)
        if np.any(deficit > 0):
            raise ValueError("rewards need a schedule that serves all traffic")
        rru, p_tx, p_cool = station_power_arrays(self.scenario, loads, asleep, slots)
        grid_rru = np.zeros((self.n_grids, rru.shape[1]))
        np.add.at(grid_rru, self.cell_grid, rru)
        own = a.bbu[self.cell_bs][:, None] + p_cool[self.cell_bs]
        return -(grid_rru[self.cell_grid] + own)


def reward(scenario, asleep, traffic=None) -> np.ndarray:
    """Per-cell rewards in W for a whole-trace schedule, shape ``(C, T)``."""
    traffic = scenario.traffic if traffic is None else np.asarray(traffic, dtype=float)
    return Context(scenario).rewards(np.asarray(asleep, dtype=bool), traffic, slice(None))


def act(q, epsilon: float, rng) -> np.ndarray:
    """ε-greedy actions from q-values ``(N, 2)``; 1 = sleep. Ties go to sleep."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q = np.asarray(q, dtype=float)
    greedy = (q[:, SLEEP] >= q[:, AWAKE]).astype(np.int64)
    explore = rng.random(q.shape[0]) < epsilon
    random = rng.integers(0, 2, q.shape[0])
    return np.where(explore, random, greedy)


@dataclass(frozen=True)
class Hyperparams:
    hidden: tuple = (64, 64)
    lr: float = 3e-2
    clip_norm: float = 5.0
    eps_start: float = 0.5
    eps_end: float = 0.02
    batch_slots: int = 4
    buffer_slots: int = 2048
    updates_per_slot: int = 1
    reward_scale_w: float = 1000.0
    min_awake: int = 1
    lr_end: float | None = 1e-3   # geometric decay from lr over the run; None keeps lr fixed

    def __post_init__(self):
        if self.lr_end is not None and self.lr_end <= 0:
            raise ValueError("lr_end must be > 0")
        if self.lr <= 0 or self.clip_norm <= 0 or self.reward_scale_w <= 0:
            raise ValueError("lr, clip_norm and reward_scale_w must be > 0")
        if not (0 <= self.eps_end <= self.eps_start <= 1):
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.batch_slots < 1 or self.buffer_slots < self.batch_slots or self.updates_per_slot < 0:
            raise ValueError("bad replay sizes")

    def epsilon(self, episode: int, episodes: int) -> float:
        if episodes <= 1:
            return self.eps_start
        return self.eps_start + (self.eps_end - self.eps_start) * episode / (episodes - 1)


@dataclass(frozen=True, eq=False)
class ReplayRecord:
    """One slot of joint experience: every agent's observation, action, masks
    and reward (W), plus what is needed to redraw masks."""

    obs: np.ndarray        # (C, d_obs)
    actions: np.ndarray    # (C,) 1 = sleep
    masks: np.ndarray      # (C, 2) bool
    reward: np.ndarray     # (C,) W, negative
    baseline: np.ndarray   # (C,) W, reward with every cell awake
    demand: np.ndarray     # (G,) grid traffic, GB

    def __post_init__(self):
        if not (np.all(np.isfinite(self.reward)) and np.all(np.isfinite(self.baseline))):
            raise ValueError("reward must be finite")


class ReplayBuffer:
    """Fixed-size ring of :class:`ReplayRecord`."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[ReplayRecord] = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, rec: ReplayRecord) -> None:
        if len(self._items) < self.capacity:
            self._items.append(rec)
        else:
            self._items[self._next] = rec
        self._next = (self._next + 1) % self.capacity

    def sample(self, rng, k: int) -> list[ReplayRecord]:
        idx = rng.choice(len(self._items), size=min(k, len(self._items)), replace=False)
        return [self._items[i] for i in idx]


@dataclass
class Learner:
    ctx: Context
    hp: Hyperparams
    q1: ValueNet
    q2: ValueNet

    @classmethod
    def new(cls, scenario, hp: Hyperparams, rng) -> "Learner":
        ctx = Context(scenario)
        q1 = ValueNet(ctx.d_obs, hp.hidden, rng=rng)
        q2 = ValueNet(ctx.d_obs + 2, hp.hidden, rng=rng)
        return cls(ctx, hp, q1, q2)

    def losses(self, batch, epsilon, rng):
        """Both losses with their gradients for one batch of records."""
        obs = np.concatenate([r.obs for r in batch])
        masks = np.concatenate([r.masks for r in batch]).astype(float)
        actions = np.concatenate([r.actions for r in batch])
        target = np.concatenate([(r.reward - r.baseline) for r in batch]) / self.hp.reward_scale_w
        loss2, g2 = regression_loss(self.q2, np.hstack([obs, masks]), actions, target)

        redrawn = []
        for r in batch:
            resampled = act(self.q1(r.obs), epsilon, rng)
            redrawn.append(self.ctx.masks(resampled.astype(bool), r.demand))
        masks_new = np.concatenate(redrawn).astype(float)
        q2_target = self.q2(np.hstack([obs, masks_new]))
        loss1, g1 = imitation_loss(self.q1, obs, q2_target)
        return loss1, g1, loss2, g2

    def train_step(self, batch, epsilon, rng) -> dict:
        if not batch:
            raise ValueError("empty batch")
        loss1, g1, loss2, g2 = self.losses(batch, epsilon, rng)
        if not (np.isfinite(loss1) and np.isfinite(loss2)):
            raise TrainingDivergence(f"non-finite loss (loss1={loss1}, loss2={loss2}); "
                                     f"param norms q1={np.linalg.norm(self.q1.params):.3g} "
                                     f"q2={np.linalg.norm(self.q2.params):.3g}; lower the learning rate")
        gradient_step(self.q2, g2, self.hp.lr, self.hp.clip_norm)
        gradient_step(self.q1, g1, self.hp.lr, self.hp.clip_norm)
        return {"loss1": loss1, "loss2": loss2}


@dataclass
class TrainResult:
    q1: ValueNet
    q2: ValueNet
    log: list = field(default_factory=list)   # rows matching LOG_HEADER
    hyperparams: Hyperparams | None = None

    @property
    def mean_rewards(self) -> np.ndarray:
        return np.array([row[1] for row in self.log])


def train(scenario, episodes: int, hp: Hyperparams | None = None, seed: int = 0,
          progress=None) -> TrainResult:
    """Train on randomly drawn days of ``scenario``. One episode is one day.

    Deterministic for a given seed.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    hp = Hyperparams() if hp is None else hp
    rng = np.random.default_rng(seed)
    learner = Learner.new(scenario, hp, rng)
    ctx = learner.ctx
    traffic = scenario.traffic
    demand = ctx.grid_demand(traffic)
    buffer = ReplayBuffer(hp.buffer_slots)
    n_days = max(1, scenario.n_slots // SLOTS_PER_DAY)
    result = TrainResult(learner.q1, learner.q2, [], hp)

    for ep in range(episodes):
        eps = hp.epsilon(ep, episodes)
        if hp.lr_end is not None:
            frac = ep / max(1, episodes - 1)
            learner.hp = replace(hp, lr=hp.lr * (hp.lr_end / hp.lr) ** frac)
        day = int(rng.integers(n_days))
        slots = np.arange(day * SLOTS_PER_DAY, min((day + 1) * SLOTS_PER_DAY, scenario.n_slots))
        obs = ctx.observations(traffic, slots)
        awake_all = np.zeros((scenario.n_cells, len(slots)), dtype=bool)
        baseline = ctx.rewards(awake_all, traffic[:, slots], slots)
        rewards, l1s, l2s = [], [], []
        for k, t in enumerate(slots):
            q = learner.q1(obs[k])
            actions = act(q, eps, rng)
            executed = ctx.repair(actions.astype(bool)[:, None], q[:, AWAKE, None],
                                  traffic[:, t:t + 1], hp.min_awake)
            actions = executed[:, 0].astype(np.int64)
            masks = ctx.masks(actions.astype(bool), demand[:, t])
            r = ctx.rewards(executed, traffic[:, t:t + 1], slice(t, t + 1))[:, 0]
            buffer.add(ReplayRecord(obs[k], actions, masks, r, baseline[:, k], demand[:, t]))
            rewards.append(r.mean())
            if len(buffer) >= hp.batch_slots:
                for _ in range(hp.updates_per_slot):
                    out = learner.train_step(buffer.sample(rng, hp.batch_slots), eps, rng)
                    l1s.append(out["loss1"])
                    l2s.append(out["loss2"])
        row = (ep, float(np.mean(rewards)), float(np.mean(l1s)) if l1s else 0.0,
               float(np.mean(l2s)) if l2s else 0.0, float(eps))
        result.log.append(row)
        if progress is not None:
            progress(row)
    return result


def infer_schedule(q1: ValueNet, scenario, traffic=None, min_awake: int = 1) -> SleepSchedule:
    """Greedy (ε = 0) actions for every slot, repaired to serve all traffic."""
    traffic = scenario.traffic if traffic is None else np.asarray(traffic, dtype=float)
    ctx = Context(scenario)
    if q1.d_in != ctx.d_obs:
        raise ValueError(f"network expects {q1.d_in} inputs, scenario yields {ctx.d_obs}")
    n_t = traffic.shape[1]
    obs = ctx.observations(traffic, np.arange(n_t))
    q = q1(obs.reshape(-1, ctx.d_obs)).reshape(n_t, scenario.n_cells, 2)
    sleep = (q[:, :, SLEEP] >= q[:, :, AWAKE]).T
    pref = q[:, :, AWAKE].T
    asleep = ctx.repair(sleep, pref, traffic, min_awake)
    return _ensure_feasible(scenario, traffic, asleep, "deep")


# files -------------------------------------------------------------------

def save_checkpoint(path, q1: ValueNet, meta: dict | None = None) -> None:
    atomic_write_bytes(path, q1.to_bytes(meta))


def load_checkpoint(path) -> tuple[ValueNet, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint at {path}; train one with `greencell control train`")
    try:
        return ValueNet.from_bytes(path.read_bytes())
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None


def write_training_log(path, log) -> None:
    write_csv(path, LOG_HEADER, log)


def hyperparams_dict(hp: Hyperparams) -> dict:
    d = asdict(hp)
    d["hidden"] = list(hp.hidden)
    return d
