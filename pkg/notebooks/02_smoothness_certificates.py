# %% [markdown]
# # Checking smoothness certificates on grids
#
# A certificate pairs a deviation rule with constants (lambda, mu). We evaluate
# the inequality on every pair of value and bid profiles from an 11-point grid
# and report the smallest margin.

# %%
import itertools

import numpy as np

from auction_poa.auctions import AllPay, FirstPrice, SecondPrice
from auction_poa.composition import compose, verify_composed_smoothness
from auction_poa.smoothness import ONE_MINUS_INV_E, SmoothnessParams, builtin_deviation, poa_bound, verify_smoothness
from auction_poa.valuations import UnitDemand

grid = np.round(np.linspace(0, 1, 11), 10)
values = list(itertools.product(grid, grid))
actions = np.array(values)

# %%
for fmt, rule, params in [
    (FirstPrice(), "halfValueFpa", SmoothnessParams(0.5, 1)),
    (FirstPrice(), "optimizedFpa", SmoothnessParams(ONE_MINUS_INV_E, 1)),
    (AllPay(), "allPayTop", SmoothnessParams(0.5, 1)),
]:
    rep = verify_smoothness(fmt, builtin_deviation(rule), params, values, actions, samples=5_000, keep_rows=False)
    print(f"{rule:>13}: min margin {rep.min_margin:+.2e} (se {rep.stderr:.1e})  passed={rep.passed}  "
          f"implied ratio {poa_bound(params):.3f}")

# %% [markdown]
# Second price only admits a weak certificate, which needs bids at or below
# value. Overbidding profiles are refused outright.

# %%
def below_value(v):
    return actions[(actions <= np.asarray(v) + 1e-12).all(axis=1)]


rep = verify_smoothness(SecondPrice(), builtin_deviation("truthfulTop"), SmoothnessParams(1, 1, "weak"), values,
                        below_value, keep_rows=False)
print(f"second price, bids <= value: {rep.cases} cases, min margin {rep.min_margin:+.2e}, passed={rep.passed}")
try:
    verify_smoothness(SecondPrice(), builtin_deviation("truthfulTop"), SmoothnessParams(1, 1, "weak"),
                      [(0.01, 1.0)], np.array([[1.0, 0.0]]))
except ValueError as exc:
    print("rejected:", exc)

# %% [markdown]
# Running one first-price auction per item in parallel keeps the certificate
# when each bidder deviates item by item against her optimal-bundle proxy.

# %%
per = [UnitDemand(c) for c in itertools.product([0.0, 0.5, 1.0], repeat=2)]
vec = list(itertools.product([0.0, 0.5, 1.0], repeat=2))
rep = verify_composed_smoothness(compose([FirstPrice()] * 2), builtin_deviation("halfValueFpa"),
                                 SmoothnessParams(0.5, 1), list(itertools.product(per, repeat=2)),
                                 np.array(list(itertools.product(vec, repeat=2))), keep_rows=False)
print(f"composed: {rep.cases} cases, min margin {rep.min_margin:+.2e}")
