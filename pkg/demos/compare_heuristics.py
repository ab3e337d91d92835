"""Score the four closed-form allocators on identical episodes.

Every allocator replays the same evaluation episodes (same users, orbit phase
and rain draws), so the table isolates the allocation rule itself.  Water-
filling and max-min get half the per-beam cap per served user as their total
budget; equal and proportional allocation run every beam at full power.

    python demos/compare_heuristics.py [episodes] [seed]
"""

import sys

import numpy as np

from lamdrl import LeoDownlinkEnv, profile
from lamdrl.harness import evaluate_heuristic

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 40
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
cfg = profile("desk").scenario

print(f"{episodes} evaluation episodes, seed {seed}, {cfg.num_users} users, "
      f"{cfg.constellation.num_satellites} satellites")
print(f"{'weather':>8} {'allocator':>9} {'sum Mbps':>9} {'jain':>6} {'outage':>7} {'eq Mbps':>8} {'hl Mbps':>8}")
for weather in ("nominal", "extreme"):
    for name in ("equal", "wf", "mmf", "pc"):
        env = LeoDownlinkEnv(cfg, weather, seed, split="eval")
        logs = evaluate_heuristic(name, env, episodes)
        m = {k: np.mean([log.mean(k) for log in logs]) for k in ("sum_rate", "jain", "outage", "r_eq", "r_hl")}
        print(f"{weather:>8} {name:>9} {m['sum_rate'] / 1e6:9.2f} {m['jain']:6.3f} {m['outage']:7.3f} "
              f"{m['r_eq'] / 1e6:8.2f} {m['r_hl'] / 1e6:8.2f}")

# coverage is the first-order effect at desk scale
env = LeoDownlinkEnv(cfg, "nominal", seed, split="eval")
served = []
for ep in range(episodes):
    env.reset(ep)
    while not env.done:
        served.append(env.served_users.size)
        env.step(np.ones(2 * cfg.num_users))
counts = np.bincount(served)
print("\nserved users per step (nominal):", ", ".join(f"{k}: {c}" for k, c in enumerate(counts) if c))
