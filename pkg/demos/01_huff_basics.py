"""
Huff probabilities, static and hourly
=====================================

Two stores, three neighborhoods.  We compute the classic Huff shares and
then spread them over the week with each store's hourly visit profile.
"""

import numpy as np

from tradewinds import (
    GeoPoint, ModelParams, Neighborhood, Scenario, Store, VisitMatrix, build_distance_matrix,
)
from tradewinds.models import predict_ahuff, predict_huff, predict_mhuff, predict_thuff

# A store busy on weekday evenings and one busy on weekend afternoons.
hours = np.arange(168)
evening = np.where((hours % 24 >= 17) & (hours % 24 <= 20) & (hours < 120), 10.0, 1.0)
weekend = np.where((hours >= 120) & (hours % 24 >= 12) & (hours % 24 <= 16), 10.0, 1.0)

stores = (
    Store("downtown", "mart", GeoPoint(34.05, -118.25), tuple(evening), attractiveness=8.0),
    Store("suburb", "mart", GeoPoint(34.10, -118.40), tuple(weekend), attractiveness=3.0),
)
nbhds = (
    Neighborhood("n1", GeoPoint(34.06, -118.26), 1500),
    Neighborhood("n2", GeoPoint(34.08, -118.33), 900),
    Neighborhood("n3", GeoPoint(34.11, -118.41), 2100),
)
s = Scenario(stores, nbhds, VisitMatrix({("n1", "downtown"): 40, ("n3", "suburb"): 25}))
d = build_distance_matrix(s)
print("distances (km)\n", d.values.round(2))

p = ModelParams(alpha=1.0, beta=2.0)
huff = predict_huff(s, d, p).values
print("\nHuff shares, rows are neighborhoods\n", huff.round(3))

# T-Huff: the Huff share times the store's probability of a visit in hour t.
thuff = predict_thuff(s, d, p).values
print("\nT-Huff summed over the week equals Huff:", np.allclose(thuff.sum(axis=2), huff))

# Monday 18:00 vs Saturday 14:00
for label, t in (("Mon 18:00", 18), ("Sat 14:00", 5 * 24 + 14)):
    print(f"\n{label}")
    print("  T-Huff:", thuff[:, :, t].round(4).tolist())
    print("  A-Huff:", predict_ahuff(s, d, p).values[:, :, t].round(3).tolist())

# M-Huff ignores the profiles entirely
print("\nM-Huff, any hour:", predict_mhuff(s, d, p).values[:, :, 0].round(4).tolist())
