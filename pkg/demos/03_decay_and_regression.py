"""
Distance decay and what drives visits
=====================================

How far do people travel, and which neighborhood traits explain pairwise
visit counts?
"""

import numpy as np

from tradewinds import build_distance_matrix
from tradewinds.stats import decay_analysis, mlr_fit, regression_design
from tradewinds.synth import SynthSpec, generate, power_law_visits

# A heavy tail: trip lengths with density proportional to d^-1.5.
s = power_law_visits(5000, exponent=1.5, seed=0)
dec = decay_analysis(s, build_distance_matrix(s))
print(f"median trip {dec.median_km:.2f} km, log-log slope {dec.loglog_slope:.3f}")
for km in (2, 10, 50):
    k = np.searchsorted(dec.ecdf_km, km, side="right") - 1
    print(f"  share of visits within {km:>2} km: {dec.ecdf_prob[k]:.3f}")

# Regression on a synthetic city
city, _ = generate(SynthSpec(n_stores=6, n_neighborhoods=300, noise="poisson", seed=4))
X, y, _ = regression_design(city, build_distance_matrix(city))
rep = mlr_fit(X, y)
print(f"\nn = {rep.n_obs}, R^2 = {rep.r_squared:.3f}")
print(f"{'variable':<20}{'coef':>12}{'std err':>12}{'p':>10}")
for name, coef, se, _, p, stars in rep.rows():
    print(f"{name:<20}{coef:12.4g}{se:12.3g}{p:10.2g} {stars}")
