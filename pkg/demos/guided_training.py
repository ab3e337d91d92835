"""Train the guided agent and its unguided twin for a few episodes each.

Both agents share a seed, so they start from identical weights and see the
same training geometry; the guided one also gets a strategy label per episode
(from the deterministic mock provider) and the shaped reward.  After training,
both are evaluated greedily next to equal allocation on held-out episodes, and
the guided agent's label counts and per-feature attention shares are printed.

    python demos/guided_training.py [train_episodes] [seed]

300 training episodes (the desk default) take a few minutes per agent.
"""

import sys
from collections import Counter

import numpy as np

from lamdrl import LeoDownlinkEnv, MockProvider, profile
from lamdrl.agent import TD3Agent, drl_baseline_mode
from lamdrl.env import FEATURE_CATEGORIES
from lamdrl.harness import evaluate_agent, evaluate_heuristic, train_agent

train_episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 120
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
eval_episodes = 50
cfg = profile("desk").scenario


def trained(unguided):
    agent = TD3Agent(cfg.num_users, cfg.agent, cfg.reward.discount, seed=seed, **drl_baseline_mode(unguided))
    provider = None if unguided else MockProvider()
    history = train_agent(agent, LeoDownlinkEnv(cfg, "nominal", seed, provider, "train"), train_episodes)
    tail = np.mean([log.mean("sum_rate") for log in history[-20:]]) / 1e6
    print(f"{'drl' if unguided else 'lamdrl':>7}: trained {train_episodes} episodes, "
          f"last-20 training sum rate {tail:.1f} Mbps (with exploration noise)")
    return agent, provider


results = {}
for unguided in (True, False):
    agent, provider = trained(unguided)
    env = LeoDownlinkEnv(cfg, "nominal", seed, MockProvider() if provider else None, "eval")
    results["drl" if unguided else "lamdrl"] = evaluate_agent(agent, env, eval_episodes, with_attention=not unguided)
results["equal"] = evaluate_heuristic("equal", LeoDownlinkEnv(cfg, "nominal", seed, split="eval"), eval_episodes)

print(f"\ngreedy evaluation on {eval_episodes} held-out episodes (nominal weather)")
for name, logs in results.items():
    rate = np.mean([log.mean("sum_rate") for log in logs]) / 1e6
    fair = np.mean([log.mean("jain") for log in logs])
    print(f"  {name:>7}: {rate:6.2f} Mbps  Jain {fair:.3f}")

guided = results["lamdrl"]
print("\nstrategy labels drawn:", dict(sorted(Counter(log.label for log in guided).items())))
shares = np.mean([log.attention for log in guided], axis=0)
print("attention share per feature category:")
for name, share in sorted(zip(FEATURE_CATEGORIES, shares), key=lambda x: -x[1]):
    print(f"  {name:>10} {share:.3f}")
