import numpy as np
import pytest
from hypothesis import given, strategies as st

from lamdrl.agent import ReplayBuffer, TD3Agent, attention, drl_baseline_mode
from lamdrl.agent import networks as nn
from lamdrl.config import AgentConfig, profile
from lamdrl.env import LeoDownlinkEnv, StateVector
from lamdrl.strategy import MockProvider, StrategyLabel

N_U, D_F, D_STR, D_H, HIDDEN, BATCH = 3, 4, 3, 5, 6, 4


def small_batch(rng, n_u=N_U, d_f=D_F, batch=BATCH, labels=None):
    return {
        "X": rng.normal(size=(batch, n_u, d_f)),
        "g": rng.normal(size=(batch, 3)),
        "action": rng.uniform(0.05, 0.95, (batch, 2 * n_u)),
        "label": np.array(labels if labels is not None else rng.integers(0, 4, batch)),
    }


def naive_attention(X, e, wx, we, v):
    scores = np.array([v @ np.tanh(wx @ x + we @ e) for x in X])
    w = np.exp(scores - scores.max())
    w = w / w.sum()
    return sum(wi * xi for wi, xi in zip(w, X)), w, scores


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    # entries far below the gradient's scale are compared on that scale
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-3 * scale)
    return float(np.max(np.abs(a - b) / denom))


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


# --- attention -----------------------------------------------------------------

def test_attention_examples():
    rng = np.random.default_rng(0)
    layer = nn.init_attention(rng, D_F, D_STR, D_H)
    x = rng.normal(size=(1, D_F))
    c, w = attention(x, rng.normal(size=D_STR), layer)
    assert w[0] == 1.0
    np.testing.assert_array_equal(c, x[0])
    same = np.tile(rng.normal(size=D_F), (5, 1))
    c, w = attention(same, rng.normal(size=D_STR), layer)
    np.testing.assert_array_equal(w, np.full(5, 0.2))
    np.testing.assert_allclose(c, same[0], rtol=1e-15)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_attention_matches_naive_and_simplex(seed, n):
    rng = np.random.default_rng(seed)
    layer = nn.init_attention(rng, D_F, D_STR, D_H)
    X = rng.normal(size=(n, D_F)) * 3
    e = rng.normal(size=D_STR)
    c, w = attention(X, e, layer)
    c2, w2, _ = naive_attention(X, e, layer["attn.wx"], layer["attn.we"], layer["attn.v"])
    np.testing.assert_allclose(w, w2, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(c, c2, rtol=1e-12, atol=1e-12)
    assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-9
    perm = rng.permutation(n)
    cp, wp = attention(X[perm], e, layer)
    np.testing.assert_allclose(wp, w[perm], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(cp, c, rtol=1e-12, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-50, 50))
def test_softmax_shift_invariance(seed, shift):
    # a constant added to every score comes from an extra constant-valued tanh unit
    rng = np.random.default_rng(seed)
    layer = nn.init_attention(rng, D_F, D_STR, D_H)
    X = rng.normal(size=(6, D_F))
    e = rng.normal(size=D_STR)
    _, w = attention(X, e, layer)
    bigger = {
        "attn.wx": np.vstack([layer["attn.wx"], np.zeros((1, D_F))]),
        "attn.we": np.vstack([layer["attn.we"], np.full((1, D_STR), 0.0)]),
        "attn.v": np.append(layer["attn.v"], shift),
    }
    # tanh(0) = 0 contributes nothing, so steer the extra unit with the embedding
    bigger["attn.we"][-1] = 50.0 * np.sign(e + 1e-300)
    _, w2 = attention(X, e, bigger)
    np.testing.assert_allclose(w2, w, rtol=1e-9, atol=1e-15)


# --- finite-difference gradient checks -----------------------------------------

def test_critic_gradients():
    rng = np.random.default_rng(1)
    critic = nn.init_critic(rng, N_U, D_F, D_STR, D_H, HIDDEN)
    for k in critic:
        critic[k] = critic[k] + rng.normal(0, 0.1, critic[k].shape)  # move last layers off their tiny init
    table = rng.uniform(-0.5, 0.5, (4, D_STR))
    batch = small_batch(rng, labels=[0, 1, 1, 3])
    target = rng.normal(size=BATCH)
    _, grads, dtable = nn.critic_loss(critic, table, batch, target)
    loss = lambda: nn.critic_loss(critic, table, batch, target)[0]
    for k in critic:
        assert rel_err(grads[k], numeric_grad(loss, critic[k])) < 1e-4, k
    assert rel_err(dtable, numeric_grad(loss, table)) < 1e-4
    assert np.all(dtable[2] == 0)  # label C absent from the batch


def test_actor_gradients():
    rng = np.random.default_rng(2)
    actor = nn.init_actor(rng, N_U, D_F, D_STR, D_H, HIDDEN)
    critic = nn.init_critic(rng, N_U, D_F, D_STR, D_H, HIDDEN)
    # perturbations well above the tiny output-layer init keep every gradient
    # far above the roundoff floor of the central differences
    for p, scale in ((actor, 0.4), (critic, 0.4)):
        for k in p:
            p[k] = p[k] + rng.normal(0, scale, p[k].shape)
    table = rng.uniform(-1.0, 1.0, (4, D_STR))
    batch = small_batch(rng, labels=[2, 2, 0, 1])
    margin = 0.05
    a, _ = nn.actor_forward(actor, batch["X"], batch["g"], table[batch["label"]], margin)
    assert np.all((a > 0) & (a < 1))  # smooth region: no active clip
    _, grads, dtable = nn.actor_loss(actor, critic, table, batch, margin)
    loss = lambda: nn.actor_loss(actor, critic, table, batch, margin)[0]
    for k in actor:
        assert rel_err(grads[k], numeric_grad(loss, actor[k])) < 1e-4, k
    assert rel_err(dtable, numeric_grad(loss, table)) < 1e-4


def test_attention_gradients():
    rng = np.random.default_rng(3)
    p = nn.init_attention(rng, D_F, D_STR, D_H)
    X = rng.normal(size=(BATCH, N_U, D_F))
    e = rng.normal(size=(BATCH, D_STR))
    probe = rng.normal(size=(BATCH, D_F))
    loss = lambda: float(np.sum(nn.attention_forward(p, X, e)[0] * probe))
    c, w, cache = nn.attention_forward(p, X, e)
    grads, de, dX = nn.attention_backward(p, cache, probe)
    for k in p:
        assert rel_err(grads[k], numeric_grad(loss, p[k])) < 1e-4, k
    assert rel_err(de, numeric_grad(loss, e)) < 1e-4
    assert rel_err(dX, numeric_grad(loss, X)) < 1e-4


def test_recover_gradient_only_points_inward():
    rng = np.random.default_rng(4)
    actor = nn.init_actor(rng, N_U, D_F, D_STR, D_H, HIDDEN)
    actor["pi.b2"][:] = np.array([-8.0, -8.0, -8.0, 8.0, 8.0, 8.0])  # three outputs at 0, three at 1
    X, g, e = rng.normal(size=(1, N_U, D_F)), rng.normal(size=(1, 3)), np.zeros((1, D_STR))
    a, cache = nn.actor_forward(actor, X, g, e, 0.05)
    np.testing.assert_array_equal(a[0], [0, 0, 0, 1, 1, 1])
    push_up = np.full((1, 6), -1.0)  # loss falls as actions rise
    exact, _ = nn.actor_backward(actor, cache, push_up)
    assert np.all(exact["pi.b2"] == 0)
    rec, _ = nn.actor_backward(actor, cache, push_up, recover=True)
    assert np.all(rec["pi.b2"][:3] < 0) and np.all(rec["pi.b2"][3:] == 0)


# --- agent ---------------------------------------------------------------------

def desk_agent(guided=True, seed=0, **agent_kw):
    cfg = AgentConfig(dtype="float64", **agent_kw)
    return TD3Agent(10, cfg, 0.99, seed=seed, guided=guided)


def desk_state(seed=0):
    env = LeoDownlinkEnv(profile("desk").scenario, "nominal", seed, MockProvider())
    state, ctx = env.reset(0)
    return env, state, ctx.label


def test_act_deterministic_and_in_range():
    agent = desk_agent()
    _, state, label = desk_state()
    a1 = agent.act(state, label, 0.0)
    a2 = agent.act(state, label, 0.0)
    np.testing.assert_array_equal(a1, a2)
    assert a1.shape == (20,) and np.all((a1 >= 0) & (a1 <= 1))
    noisy = agent.act(state, label, 5.0)
    assert np.all((noisy >= 0) & (noisy <= 1))


def test_zero_embedding_removes_conditioning():
    agent = desk_agent()
    agent.embedding.weights[:] = 0.0
    agent.actor["attn.we"][:] = 0.0
    _, state, _ = desk_state()
    acts = [agent.act(state, lab, 0.0) for lab in StrategyLabel]
    for a in acts[1:]:
        np.testing.assert_array_equal(a, acts[0])


def test_baseline_mode_matches_guided_init():
    assert drl_baseline_mode(True) == {"guided": False}
    guided, plain = desk_agent(True, 7), desk_agent(False, 7)
    for k in guided.actor:
        np.testing.assert_array_equal(guided.actor[k], plain.actor[k])
    _, state, label = desk_state()
    # the unguided agent ignores labels entirely
    np.testing.assert_array_equal(plain.act(state, StrategyLabel.A), plain.act(state, StrategyLabel.D))
    np.testing.assert_array_equal(plain.act(state, StrategyLabel.A), guided.act(state, None))


def test_baseline_reward_is_base_reward():
    env = LeoDownlinkEnv(profile("desk").scenario, "extreme", 0, provider=None)
    env.reset(0)
    for _ in range(5):
        _, r, _, _ = env.step(np.random.default_rng(0).uniform(0, 1, 20))
        assert r.shaping == 0 and r.total == r.base


def fill(agent, n, seed=0, reward=None, label=None, terminal=False):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        s = StateVector(rng.normal(size=(10, 9)), rng.normal(size=3))
        s2 = StateVector(rng.normal(size=(10, 9)), rng.normal(size=3))
        agent.remember(s, rng.uniform(0, 1, 20), rng.normal() if reward is None else reward, s2,
                       StrategyLabel(label) if label else StrategyLabel("ABCD"[rng.integers(4)]), terminal)


def test_train_step_noop_below_batch():
    agent = desk_agent(batch_size=32, warmup_steps=0)
    fill(agent, 31)
    assert agent.train_step() is None
    fill(agent, 1)
    stats = agent.train_step()
    assert stats is not None and stats.actor_loss is None  # first update: critic only
    assert agent.train_step().actor_loss is not None


def test_actor_waits_for_warmup():
    agent = desk_agent(batch_size=16, warmup_steps=40)
    fill(agent, 39)
    actor = {k: v.copy() for k, v in agent.actor.items()}
    for _ in range(6):
        assert agent.train_step().actor_loss is None
    for k in actor:
        np.testing.assert_array_equal(agent.actor[k], actor[k])
    fill(agent, 1)
    losses = [agent.train_step().actor_loss for _ in range(2)]
    assert any(x is not None for x in losses)


def test_tau_one_copies_online():
    agent = desk_agent(batch_size=16)
    fill(agent, 16)
    agent.train_step()
    agent.update_targets(1.0)
    for k in agent.actor:
        np.testing.assert_array_equal(agent.actor_target[k], agent.actor[k])
    for k in agent.critic:
        np.testing.assert_array_equal(agent.critic_target[k], agent.critic[k])
    np.testing.assert_array_equal(agent.table_target, agent.embedding.weights)


def test_critic_fixed_point():
    agent = desk_agent(batch_size=32, critic_lr=1e-3)
    fill(agent, 1, reward=0.0, terminal=True)
    batch = agent.buffer.sample(1)
    batch = {k: np.repeat(v, 32, axis=0) for k, v in batch.items()}
    loss = None
    for _ in range(2000):
        loss = agent.train_step(batch).critic_loss
        if loss < 1e-3:
            break
    assert loss < 1e-3


def test_embedding_sparse_update():
    agent = desk_agent(batch_size=8)
    fill(agent, 8, label="B")
    before = agent.embedding.weights.copy()
    agent.train_step()
    after = agent.embedding.weights
    assert not np.array_equal(before[1], after[1])
    for row in (0, 2, 3):
        np.testing.assert_array_equal(before[row], after[row])


def test_replay_determinism_and_bounds():
    def draw(seed):
        buf = ReplayBuffer(50, 2, 3, np.random.default_rng(seed))
        s = StateVector(np.zeros((2, 3)), np.zeros(3))
        for i in range(80):
            buf.add(s, np.full(4, i), float(i), s, i % 4, False)
        return buf, buf.sample(20)
    buf, a = draw(1)
    _, b = draw(1)
    assert len(buf) == 50
    np.testing.assert_array_equal(a["reward"], b["reward"])
    assert len(set(a["reward"].tolist())) == 20  # without replacement
    assert a["reward"].min() >= 30  # the oldest 30 were overwritten
    with pytest.raises(ValueError):
        buf.sample(51)


def test_checkpoint_round_trip(tmp_path):
    agent = desk_agent(batch_size=16, warmup_steps=0)
    fill(agent, 20)
    for _ in range(3):
        agent.train_step()
    path = tmp_path / "a.npz"
    agent.save(path, "abc")
    fresh = desk_agent(seed=99, batch_size=16, warmup_steps=0)
    fresh.load(path, "abc")
    _, state, label = desk_state()
    np.testing.assert_array_equal(fresh.act(state, label), agent.act(state, label))
    np.testing.assert_array_equal(fresh.table_target, agent.table_target)
    assert (fresh.updates, fresh.transitions) == (agent.updates, agent.transitions) == (3, 20)
    with pytest.raises(ValueError):
        fresh.load(path, "other")
    with pytest.raises(ValueError):
        desk_agent(guided=False).load(path)


def test_feature_attention_shares():
    agent = desk_agent()
    _, state, label = desk_state()
    shares = agent.feature_attention(state, label)
    assert shares.shape == (7,)
    assert abs(shares.sum() - 1) < 1e-9 and np.all(shares >= 0)
    w = agent.attention_weights(state, label)
    assert abs(w.sum() - 1) < 1e-9
