"""Hausdorff distance between visited-cell sets as an exploration score."""
# %%
from nore.metrics import allpairs_mean, directed_hausdorff, hausdorff, pairwise_exploration_scores

a = [(0, 0), (0, 1), (0, 2)]
b = [(0, 0), (1, 0), (2, 0), (3, 0)]
print("h(a, b) =", directed_hausdorff(a, b), " h(b, a) =", directed_hausdorff(b, a))
print("H(a, b) =", hausdorff(a, b))

# %% consecutive episodes of a run
episodes = [a, b, a, [(3, 3)]]
print("consecutive scores", pairwise_exploration_scores(episodes))
print("mean over all pairs", round(allpairs_mean(episodes), 3))
