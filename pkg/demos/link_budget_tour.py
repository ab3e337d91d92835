"""Walk through one decision step of the desk scenario, link by link.

Places the desk constellation and users for a single episode, then prints who
can see whom, what each served link loses to free space, gas and rain, and
what the users get when every beam runs at full power and bandwidth.  The
same episode is shown under nominal and extreme weather.

    python demos/link_budget_tour.py [seed]
"""

import sys

import numpy as np

from lamdrl import LeoDownlinkEnv, profile

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = profile("desk").scenario

for weather in ("nominal", "extreme"):
    env = LeoDownlinkEnv(cfg, weather, seed)
    env.reset(0)
    lb = env.links
    print(f"\n== {weather} weather, seed {seed}, t = {env.t:.0f} s ==")
    print(f"{'user':>4} {'region':>13} {'lat':>7} {'sat':>4} {'dist km':>8} {'elev':>6} "
          f"{'fspl':>7} {'gas':>5} {'rain':>5} {'margin':>6} {'total dB':>9}")
    for u, user in enumerate(env.users):
        s = env.serving[u]
        region = user.region.value
        if s < 0:
            print(f"{u:>4} {region:>13} {user.latitude:7.2f}    -  (no satellite above the mask)")
            continue
        print(f"{u:>4} {region:>13} {user.latitude:7.2f} {s:>4} {lb.distance[s, u]:8.0f} {lb.elevation[s, u]:6.1f} "
              f"{lb.fspl[s, u]:7.2f} {lb.gas[s, u]:5.2f} {lb.rain[s, u]:5.2f} "
              f"{lb.margin[s, u]:6.2f} {lb.total_loss[s, u]:9.2f}")

    _, _, frame, _ = env.step(np.ones(2 * cfg.num_users))
    served = np.flatnonzero(frame.rate > 0)
    print(f"full allocation: {served.size} users served, sum rate {frame.sum_rate / 1e6:.1f} Mbps, "
          f"Jain {frame.jain:.3f}, outage {frame.outage:.2f}")
    for u in served:
        print(f"  user {u}: SINR {10 * np.log10(frame.sinr[u]):5.1f} dB, rate {frame.rate[u] / 1e6:6.1f} Mbps")
