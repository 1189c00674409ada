"""
Market share and model error, ready for a map
=============================================

Which store wins each neighborhood, by how much, and where does the model
disagree with what was observed?
"""

import numpy as np

from tradewinds import ModelParams, build_distance_matrix
from tradewinds.models import market_share, observe, predict_thuff, share_difference
from tradewinds.stats import classify, geometric_intervals
from tradewinds.synth import SynthSpec, generate

s, truth = generate(SynthSpec(n_stores=4, n_neighborhoods=150, noise="poisson",
                              visits_per_neighborhood=200, seed=9))
d = build_distance_matrix(s)
pred = predict_thuff(s, d, ModelParams(truth["alpha"], truth["beta"]))

pop = np.array([nb.population for nb in s.neighborhoods])
ms = market_share(pred, pop)
ids, wins = np.unique(ms.winners, return_counts=True)
print("neighborhoods won:", dict(zip(ids.tolist(), wins.tolist())))
print("weekly share:", dict(zip(ms.store_ids, ms.store_shares.sum(axis=1).round(3).tolist())))

# geometric classes for a choropleth of the winning probability
breaks = geometric_intervals(ms.winner_probability, 5)
counts = np.bincount(classify(ms.winner_probability, breaks), minlength=5)
print("\nclass breaks:", breaks.round(3).tolist())
print("neighborhoods per class:", counts.tolist())

# Friday 18:00; positive means the model over-predicts
diff = share_difference(pred, observe(s, "thuff"), hour=4 * 24 + 18)
print(f"\ndifference at Fri 18:00: min {diff.min:.2e}, max {diff.max:.2e}, mean |d| {diff.mean_abs:.2e}")
