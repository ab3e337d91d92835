"""Forward and reverse passes of the attention actor and twin critics.

Everything is written against plain ``dict[str, ndarray]`` parameter sets so
the same functions serve training, target networks and finite-difference
checks.  Batches carry user features ``X`` of shape ``(B, N_u, d_f)``, global
KPIs ``g`` of shape ``(B, 3)`` and strategy embeddings ``e`` of shape
``(B, d_str)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "init_attention",
    "attention_forward",
    "attention_backward",
    "attention",
    "init_mlp",
    "mlp_forward",
    "mlp_backward",
    "init_actor",
    "actor_forward",
    "actor_backward",
    "init_critic",
    "critic_forward",
    "critic_backward",
    "critic_loss",
    "actor_loss",
    "feature_attribution",
]

GLOBAL_DIM = 3


# --- additive attention -----------------------------------------------------

def init_attention(rng: np.random.Generator, d_f: int, d_str: int, d_h: int, prefix: str = "attn.") -> dict:
    return {
        prefix + "wx": rng.normal(0.0, 1.0 / np.sqrt(d_f), (d_h, d_f)),
        prefix + "we": rng.normal(0.0, 1.0 / np.sqrt(d_str), (d_h, d_str)),
        prefix + "v": rng.normal(0.0, 1.0 / np.sqrt(d_h), d_h),
    }


def attention_forward(p: dict, X: np.ndarray, e: np.ndarray, prefix: str = "attn."):
    """Scores ``v . tanh(W_x x_u + W_e e)``, softmax weights and the weighted context."""
    wx, we, v = p[prefix + "wx"], p[prefix + "we"], p[prefix + "v"]
    # einsum rather than BLAS matmul: its loops reduce every row in the same
    # order, so users with identical features get bit-identical scores
    h = np.tanh(np.einsum("bnf,hf->bnh", X, wx) + np.einsum("bs,hs->bh", e, we)[:, None, :])
    scores = np.einsum("bnh,h->bn", h, v)
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    w = shifted / shifted.sum(axis=1, keepdims=True)
    context = np.einsum("bn,bnf->bf", w, X)
    return context, w, (X, e, h, w)


def attention_backward(p: dict, cache, dcontext: np.ndarray, prefix: str = "attn."):
    """Gradients of the parameters and of ``e`` and ``X`` given ``dL/dcontext``."""
    X, e, h, w = cache
    wx, we, v = p[prefix + "wx"], p[prefix + "we"], p[prefix + "v"]
    dw = np.einsum("bf,bnf->bn", dcontext, X)
    dscores = w * (dw - np.sum(w * dw, axis=1, keepdims=True))
    dpre = dscores[:, :, None] * v * (1.0 - h * h)
    dpre_sum = dpre.sum(axis=1)
    grads = {
        prefix + "wx": np.einsum("bnh,bnf->hf", dpre, X),
        prefix + "we": dpre_sum.T @ e,
        prefix + "v": np.einsum("bn,bnh->h", dscores, h),
    }
    de = dpre_sum @ we
    dX = w[:, :, None] * dcontext[:, None, :] + dpre @ wx
    return grads, de, dX


def attention(features: np.ndarray, e_sigma: np.ndarray, layer: dict, prefix: str = "attn."):
    """Single-instance convenience wrapper: returns ``(context, weights)``."""
    c, w, _ = attention_forward(layer, np.asarray(features, dtype=float)[None], np.asarray(e_sigma, float)[None],
                                prefix)
    return c[0], w[0]


def feature_attribution(p: dict, X: np.ndarray, e: np.ndarray, categories, prefix: str = "attn.") -> np.ndarray:
    """Share of the attention scores attributable to each feature category.

    Per user, |d score / d x_f * x_f| is summed within each category, users are
    pooled with their attention weights and the result is normalised to sum to
    one.  Returns shape ``(B, n_categories)``.
    """
    wx, v = p[prefix + "wx"], p[prefix + "v"]
    _, w, (_, _, h, _) = attention_forward(p, X, e, prefix)
    grad_x = ((1.0 - h * h) * v) @ wx  # (B, N, d_f)
    contrib = np.abs(grad_x * X)
    per_cat = np.stack([contrib[:, :, list(cols)].sum(axis=2) for cols in categories], axis=2)
    pooled = np.einsum("bn,bnc->bc", w, per_cat)
    total = pooled.sum(axis=1, keepdims=True)
    uniform = np.full_like(pooled, 1.0 / pooled.shape[1])
    return np.where(total > 0, pooled / np.where(total > 0, total, 1.0), uniform)


# --- multilayer perceptron --------------------------------------------------

def init_mlp(rng: np.random.Generator, sizes, prefix: str) -> dict:
    p = {}
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        scale = 3e-3 if last else 1.0 / np.sqrt(n_in)
        p[f"{prefix}W{i}"] = rng.uniform(-scale, scale, (n_out, n_in))
        p[f"{prefix}b{i}"] = rng.uniform(-scale, scale, n_out) if last else np.zeros(n_out)
    return p


def _depth(p: dict, prefix: str) -> int:
    n = 0
    while f"{prefix}W{n}" in p:
        n += 1
    return n


def mlp_forward(p: dict, x: np.ndarray, prefix: str):
    """ReLU hidden layers, linear output."""
    depth = _depth(p, prefix)
    acts = [x]
    for i in range(depth):
        y = acts[-1] @ p[f"{prefix}W{i}"].T + p[f"{prefix}b{i}"]
        if i < depth - 1:
            y = np.maximum(y, 0.0)
        acts.append(y)
    return acts[-1], acts


def mlp_backward(p: dict, acts, dout: np.ndarray, prefix: str):
    depth = len(acts) - 1
    grads = {}
    d = dout
    for i in reversed(range(depth)):
        if i < depth - 1:
            d = d * (acts[i + 1] > 0)
        grads[f"{prefix}W{i}"] = d.T @ acts[i]
        grads[f"{prefix}b{i}"] = d.sum(axis=0)
        d = d @ p[f"{prefix}W{i}"]
    return grads, d


# --- actor --------------------------------------------------------------------

def init_actor(rng, num_users: int, d_f: int, d_str: int, d_h: int, hidden: int) -> dict:
    p = init_attention(rng, d_f, d_str, d_h)
    p.update(init_mlp(rng, (d_f + GLOBAL_DIM + d_str, hidden, hidden, 2 * num_users), "pi."))
    return p


def actor_forward(p: dict, X, g, e, margin: float = 0.0):
    """Policy output in [0, 1]^{2 N_u}.

    The logistic output is stretched by ``margin`` on both sides and clipped,
    so the caps (0 and 1) are reachable with finite pre-activations.
    """
    c, w, att_cache = attention_forward(p, X, e)
    z = np.concatenate([c, g, e], axis=1)
    logits, acts = mlp_forward(p, z, "pi.")
    sig = 1.0 / (1.0 + np.exp(-logits))
    raw = (1.0 + 2.0 * margin) * sig - margin
    action = np.clip(raw, 0.0, 1.0)
    return action, (att_cache, acts, sig, raw, margin, c.shape[1], w)


def actor_backward(p: dict, cache, daction: np.ndarray, recover: bool = False):
    """Reverse pass of :func:`actor_forward` given ``dL/daction``.

    The clip has zero derivative outside [0, 1], so an output pushed past a cap
    never moves again.  With ``recover=True`` the gradient is let through the
    clip whenever the descent step points back inside (a straight-through
    surrogate); the default, used in training, is the exact derivative.
    """
    att_cache, acts, sig, raw, margin, d_f, _ = cache
    passing = (raw > 0.0) & (raw < 1.0)
    if recover:
        passing |= ((raw <= 0.0) & (daction < 0.0)) | ((raw >= 1.0) & (daction > 0.0))
    dlogits = daction * passing * (1.0 + 2.0 * margin) * sig * (1.0 - sig)
    grads, dz = mlp_backward(p, acts, dlogits, "pi.")
    dc = dz[:, :d_f]
    de = dz[:, d_f + GLOBAL_DIM:]
    g_att, de_att, _ = attention_backward(p, att_cache, dc)
    grads.update(g_att)
    return grads, de + de_att


# --- twin critics -------------------------------------------------------------

def init_critic(rng, num_users: int, d_f: int, d_str: int, d_h: int, hidden: int) -> dict:
    p = init_attention(rng, d_f, d_str, d_h)
    sizes = (d_f + GLOBAL_DIM + d_str + 2 * num_users, hidden, hidden, 1)
    p.update(init_mlp(rng, sizes, "q1."))
    p.update(init_mlp(rng, sizes, "q2."))
    return p


def critic_forward(p: dict, X, g, e, action):
    c, _, att_cache = attention_forward(p, X, e)
    za = np.concatenate([c, g, e, action], axis=1)
    q1, acts1 = mlp_forward(p, za, "q1.")
    q2, acts2 = mlp_forward(p, za, "q2.")
    return q1[:, 0], q2[:, 0], (att_cache, acts1, acts2, c.shape[1], e.shape[1])


def critic_backward(p: dict, cache, dq1: np.ndarray, dq2: np.ndarray, heads=("q1.", "q2.")):
    """Gradients w.r.t. critic parameters, the embedding and the action."""
    att_cache, acts1, acts2, d_f, d_str = cache
    grads = {}
    dza = 0.0
    if "q1." in heads:
        g1, d1 = mlp_backward(p, acts1, dq1[:, None], "q1.")
        grads.update(g1)
        dza = dza + d1
    if "q2." in heads:
        g2, d2 = mlp_backward(p, acts2, dq2[:, None], "q2.")
        grads.update(g2)
        dza = dza + d2
    dc = dza[:, :d_f]
    de = dza[:, d_f + GLOBAL_DIM:d_f + GLOBAL_DIM + d_str]
    daction = dza[:, d_f + GLOBAL_DIM + d_str:]
    g_att, de_att, _ = attention_backward(p, att_cache, dc)
    grads.update(g_att)
    return grads, de + de_att, daction


def _scatter_rows(table_shape, labels, de):
    out = np.zeros(table_shape, dtype=de.dtype)
    np.add.at(out, labels, de)
    return out


def _lookup(table, labels, guided: bool):
    if guided:
        return table[labels]
    return np.zeros((len(labels), table.shape[1]), dtype=table.dtype)


def critic_loss(critic: dict, table: np.ndarray, batch: dict, target: np.ndarray, guided: bool = True):
    """Summed mean squared TD errors of both heads.

    Returns ``(loss, critic_grads, table_grad)``.
    """
    e = _lookup(table, batch["label"], guided)
    q1, q2, cache = critic_forward(critic, batch["X"], batch["g"], e, batch["action"])
    n = target.shape[0]
    r1, r2 = q1 - target, q2 - target
    loss = float(np.mean(r1 * r1) + np.mean(r2 * r2))
    grads, de, _ = critic_backward(critic, cache, 2.0 * r1 / n, 2.0 * r2 / n)
    dtable = _scatter_rows(table.shape, batch["label"], de) if guided else np.zeros_like(table)
    return loss, grads, dtable


def actor_loss(actor: dict, critic: dict, table: np.ndarray, batch: dict, margin: float = 0.0,
               guided: bool = True, recover: bool = False):
    """Negative mean first-head value of the policy's own actions.

    Returns ``(loss, actor_grads, table_grad)``; the embedding collects
    gradient through both the actor and the critic inputs.
    """
    e = _lookup(table, batch["label"], guided)
    action, a_cache = actor_forward(actor, batch["X"], batch["g"], e, margin)
    q1, _, c_cache = critic_forward(critic, batch["X"], batch["g"], e, action)
    n = q1.shape[0]
    loss = -float(np.mean(q1))
    _, de_critic, daction = critic_backward(critic, c_cache, np.full(n, -1.0 / n, dtype=q1.dtype), None, heads=("q1.",))
    grads, de_actor = actor_backward(actor, a_cache, daction, recover)
    dtable = _scatter_rows(table.shape, batch["label"], de_actor + de_critic) if guided else np.zeros_like(table)
    return loss, grads, dtable
