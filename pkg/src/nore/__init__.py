"""Non-reinforced preference learning with selective attention in a model-based agent.

Subpackages and modules:

- ``nore.numerics``     numpy autodiff, layers, distributions, Adam, digamma
- ``nore.env``          reward-free FrozenLake-style gridworld with volatility
- ``nore.world_model``  RSSM with categorical latents and a decoder ensemble
- ``nore.planner``      expected-free-energy scoring and random-shooting MPC
- ``nore.preferences``  NORE, Pepper-style Hebbian and fixed preference mechanisms
- ``nore.metrics``      Hausdorff exploration scores and entropy series
- ``nore.runner``       pretraining, episodes, sweeps, figures and the CLI
"""

__version__ = "0.1.0"
