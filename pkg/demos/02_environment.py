"""The reward-free FrozenLake gridworld and its volatility schedule.

Holes send the agent back to the start; the map is regenerated every
``reset_period`` steps.  The agent only sees a binary observation vector.
"""
# %%
import numpy as np

from nore.env import Action, FrozenLakeEnv, VolatilitySchedule, decode_observation

# %% a static 4x4 map
env = FrozenLakeEnv(4, 4, VolatilitySchedule.static(), seed=3)
obs = env.reset()
print(env.layout.to_ascii(env.position))
print("observation length", obs.size, "- tiles one-hot plus agent position")

# %% walking: the observation encodes tiles and the agent
for a in (Action.RIGHT, Action.DOWN, Action.DOWN):
    obs = env.step(a)
    tiles, pos = decode_observation(obs, 4, 4)
    print(f"{a.name:>5} -> {pos}  hole reset: {env.last_event.hole_reset}")

# %% a volatile map: regenerated every 5 steps, random starts
env = FrozenLakeEnv(4, 4, VolatilitySchedule.volatile(5), seed=3)
env.reset()
rng = np.random.default_rng(0)
layouts = set()
for t in range(20):
    env.step(int(rng.integers(4)))
    layouts.add(env.layout)
    if env.last_event.layout_changed:
        print(f"step {env.global_step}: new map")
print(len(layouts), "distinct maps in 20 steps")
