import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greencell import deepenergy as de
from greencell.checks import check_schedule
from greencell.controllers import greedy_controller, redistribute
from greencell.energy_model import Kind, base_station_power, rru_power, station_power_arrays
from greencell.qnet import SLEEP, TrainingDivergence, ValueNet
from greencell.scenario import generate_scenario, scale_traffic


@pytest.fixture(scope="module")
def ctx(small_scenario):
    return de.Context(small_scenario)


@pytest.fixture(scope="module")
def trained(small_scenario):
    hp = de.Hyperparams(hidden=(16, 16), lr=1e-2, buffer_slots=256)
    return de.train(small_scenario, 6, hp, seed=5)


def test_single_station_graphs_are_triangles():
    s = generate_scenario(0, 1, 0, days=1)
    g = de.build_graphs(s)
    tri = ~np.eye(3, dtype=bool)
    np.testing.assert_array_equal(g.grid, tri)
    np.testing.assert_array_equal(g.bs, tri)


def test_graph_degrees_match_group_sizes(small_scenario):
    s = small_scenario
    g = de.build_graphs(s)
    idx = s.cell_index
    for grid in s.grids:
        rows = [idx[c] for c in grid.cell_ids]
        assert all(g.grid[r].sum() == len(rows) - 1 for r in rows)
    for b in s.base_stations:
        rows = [idx[c] for c in b.cell_ids]
        assert all(g.bs[r].sum() == len(rows) - 1 for r in rows)
    grid_of = s.arrays.cell_grid
    i, j = np.nonzero(g.grid)
    assert np.all(grid_of[i] == grid_of[j])
    assert not g.grid.diagonal().any() and (g.grid == g.grid.T).all()


def test_observation_layout(small_scenario, ctx):
    obs = ctx.observations(small_scenario.traffic, np.array([0, 5]))
    assert obs.shape == (2, small_scenario.n_cells, ctx.d_obs)
    assert np.isfinite(obs).all()
    # lagged utilisation of slot 5 includes slot 4 in the first history column
    util = ctx.grid_demand(small_scenario.traffic) / ctx.grid_cap[:, None]
    np.testing.assert_allclose(obs[1, :, 2], util[ctx.cell_grid, 4])
    # slot 0 wraps to the end of the trace
    np.testing.assert_allclose(obs[0, :, 2], util[ctx.cell_grid, -1])


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_masks_match_direct_recomputation(small_scenario, ctx, seed):
    s = small_scenario
    rng = np.random.default_rng(seed)
    sleep = rng.random(s.n_cells) < 0.5
    t = int(rng.integers(s.n_slots))
    demand = ctx.grid_demand(s.traffic)[:, t]
    m = ctx.masks(sleep, demand)
    idx = s.cell_index
    for grid in s.grids:
        rows = [idx[c] for c in grid.cell_ids]
        for r in rows:
            others = sum(s.cells[o].capacity_gb for o in rows if o != r and not sleep[o])
            assert m[r, 0] == (others + 1e-9 >= s.traffic[rows, t].sum())
    for b in s.base_stations:
        rows = [idx[c] for c in b.cell_ids]
        for r in rows:
            assert m[r, 1] == all(sleep[o] for o in rows if o != r)


def test_reward_composes_energy_model(small_scenario, ctx):
    s = small_scenario
    asleep = greedy_controller(s).asleep
    r = ctx.rewards(asleep, s.traffic, slice(None))
    loads = redistribute(s, s.traffic, asleep)
    idx = s.cell_index
    t = 11
    for b in s.base_stations[:3]:
        rows = [idx[c] for c in b.cell_ids]
        bd = base_station_power(b, loads[rows, t] / s.arrays.cap[rows], asleep[rows, t], s.weather[t], s.cooling,
                                s.bbu_w, s.coeffs)
        for n in rows:
            grid = s.grids[s.arrays.cell_grid[n]]
            rru = 0.0
            for c in grid.cell_ids:
                k = idx[c]
                kind = Kind(s.base_stations[s.bs_index[s.cells[k].base_station_id]].kind)
                rru += rru_power(s.coeffs[kind], loads[k, t] / s.cells[k].capacity_gb, bool(asleep[k, t]))
            assert -r[n, t] == pytest.approx(rru + s.bbu_w[Kind(b.kind)] + bd.p_cooling_w, rel=1e-12)


def test_grid_mates_share_rru_term(small_scenario, ctx):
    s = small_scenario
    asleep = np.zeros(s.traffic.shape, bool)
    r = ctx.rewards(asleep, s.traffic, slice(None))
    _, _, cool = station_power_arrays(s, redistribute(s, s.traffic, asleep), asleep)
    own = s.arrays.bbu[ctx.cell_bs][:, None] + cool[ctx.cell_bs]
    shared = r + own
    for grid in s.grids:
        rows = [s.cell_index[c] for c in grid.cell_ids]
        np.testing.assert_allclose(shared[rows], np.broadcast_to(shared[rows[0]], shared[rows].shape))


def test_reward_rejects_dropped_traffic(small_scenario):
    with pytest.raises(ValueError):
        de.reward(small_scenario, np.ones(small_scenario.traffic.shape, bool))


def test_act_uniform_when_fully_exploring():
    rng = np.random.default_rng(0)
    q = np.tile([1.0, 0.0], (10_000, 1))
    a = de.act(q, 1.0, rng)
    sigma = np.sqrt(0.25 / 10_000)
    assert abs(a.mean() - 0.5) < 3 * sigma


def test_act_greedy_and_tie_to_sleep():
    rng = np.random.default_rng(0)
    q = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
    assert de.act(q, 0.0, rng).tolist() == [SLEEP, 1 - SLEEP, SLEEP]
    with pytest.raises(ValueError):
        de.act(q, 1.5, rng)


def test_act_reproducible():
    q = np.random.default_rng(1).normal(size=(50, 2))
    a = de.act(q, 0.3, np.random.default_rng(9))
    b = de.act(q, 0.3, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_epsilon_schedule():
    hp = de.Hyperparams()
    assert hp.epsilon(0, 100) == 0.5
    assert hp.epsilon(99, 100) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        de.Hyperparams(eps_start=0.1, eps_end=0.2)
    with pytest.raises(ValueError):
        de.Hyperparams(lr_end=0.0)


def test_replay_ring_is_bounded():
    buf = de.ReplayBuffer(3)
    recs = [de.ReplayRecord(np.zeros((1, 1)), np.zeros(1, int), np.zeros((1, 2), bool), np.array([-float(i)]),
                            np.zeros(1), np.zeros(1)) for i in range(5)]
    for r in recs:
        buf.add(r)
    assert len(buf) == 3
    kept = sorted(-float(r.reward[0]) for r in buf.sample(np.random.default_rng(0), 3))
    assert kept == [2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        de.ReplayRecord(np.zeros((1, 1)), np.zeros(1, int), np.zeros((1, 2), bool), np.array([np.nan]),
                        np.zeros(1), np.zeros(1))


def _batch(ctx, s, rng, k=3):
    out = []
    for t in rng.integers(0, s.n_slots, k):
        obs = ctx.observations(s.traffic, np.array([t]))[0]
        actions = rng.integers(0, 2, s.n_cells)
        demand = ctx.grid_demand(s.traffic)[:, t]
        out.append(de.ReplayRecord(obs, actions, ctx.masks(actions.astype(bool), demand),
                                   -rng.uniform(500, 900, s.n_cells), -np.full(s.n_cells, 700.0), demand))
    return out


def test_losses_finite_and_step_reduces_regression(small_scenario, rng):
    s = small_scenario
    hp = de.Hyperparams(hidden=(8, 8), lr=1e-2)
    learner = de.Learner.new(s, hp, rng)
    batch = _batch(learner.ctx, s, rng)
    before = learner.losses(batch, 0.1, np.random.default_rng(0))[2]
    for _ in range(50):
        learner.train_step(batch, 0.1, rng)
    after = learner.losses(batch, 0.1, np.random.default_rng(0))[2]
    assert after < before


def test_imitation_loss_vanishes_when_q1_copies_q2(small_scenario, rng):
    """With masks fixed by a deterministic policy and q2 blind to the masks,
    q1 = q2 gives zero imitation loss."""
    s = small_scenario
    hp = de.Hyperparams(hidden=(4,))
    learner = de.Learner.new(s, hp, rng)
    d = learner.ctx.d_obs
    p2 = learner.q2.params.copy()
    w1 = p2[:(d + 2) * 4].reshape(d + 2, 4)
    w1[d:] = 0.0   # mask inputs ignored
    learner.q2.params[:] = p2
    learner.q1.params[:] = np.concatenate([w1[:d].ravel(), p2[(d + 2) * 4:]])
    loss1, _, _, _ = learner.losses(_batch(learner.ctx, s, rng), 0.0, rng)
    assert loss1 == pytest.approx(0.0, abs=1e-20)


def test_divergence_raises_with_diagnostics(small_scenario, rng):
    s = small_scenario
    learner = de.Learner.new(s, de.Hyperparams(hidden=(4,)), rng)
    learner.q2.params[:] = np.inf
    with pytest.raises(TrainingDivergence, match="learning rate"), np.errstate(invalid="ignore"):
        learner.train_step(_batch(learner.ctx, s, rng), 0.1, rng)


def test_training_log_reproducible(small_scenario, trained, tmp_path):
    hp = trained.hyperparams
    again = de.train(small_scenario, 6, hp, seed=5)
    de.write_training_log(tmp_path / "a.csv", trained.log)
    de.write_training_log(tmp_path / "b.csv", again.log)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(de.LOG_HEADER)
    np.testing.assert_array_equal(trained.q1.params, again.q1.params)


def test_inferred_schedule_feasible(small_scenario, trained):
    sch = de.infer_schedule(trained.q1, small_scenario)
    assert sch.method == "deep"
    assert check_schedule(small_scenario, sch.asleep) == []


def test_zero_traffic_sleeps_all_but_one_per_grid(small_scenario, trained):
    s = small_scenario
    zero = np.zeros(s.traffic.shape)
    sch = de.infer_schedule(trained.q1, s, traffic=zero)
    idx = s.cell_index
    for grid in s.grids:
        rows = [idx[c] for c in grid.cell_ids]
        awake = (~sch.asleep[rows]).sum(axis=0)
        assert awake.min() >= 1
    # every cell sleeping in the net's own view is kept asleep
    assert sch.asleep.mean() >= 0.5


def test_full_traffic_keeps_everyone_awake(small_scenario, trained):
    s = scale_traffic(small_scenario, 1e6)
    sch = de.infer_schedule(trained.q1, s)
    assert not sch.asleep.any()


def test_checkpoint_files(tmp_path, trained, small_scenario):
    de.save_checkpoint(tmp_path / "m.qnet", trained.q1, {"episodes": 6})
    net, meta = de.load_checkpoint(tmp_path / "m.qnet")
    np.testing.assert_array_equal(net.params, trained.q1.params)
    assert meta["episodes"] == 6
    with pytest.raises(FileNotFoundError, match="control train"):
        de.load_checkpoint(tmp_path / "missing.qnet")
    with pytest.raises(ValueError, match="inputs"):
        de.infer_schedule(ValueNet(3, (4,)), small_scenario)
