# %% [markdown]
# # Equilibria and instance PoA in single-good auctions
#
# Two closed-form first-price equilibria and one mixed equilibrium for two
# unit-demand bidders, each checked on a grid and then pushed through a
# Monte-Carlo welfare estimate.

# %%
import numpy as np

from auction_poa.auctions import FirstPrice, SimultaneousItems
from auction_poa.equilibria import (
    BidGrid,
    bad_example_mixed_strategy,
    epsilon_bne_check,
    symmetric_uniform_fpa_bne,
    vickrey_asymmetric_bne,
)
from auction_poa.harness import poa_estimate
from auction_poa.priors import IndependentProduct, Uniform, point_mass
from auction_poa.valuations import UnitDemand
from auction_poa.welfare import opt_matching

# %% [markdown]
# Symmetric uniform values: bidding half your value is an equilibrium and the
# highest-value bidder always wins, so the ratio should sit at 1.

# %%
s = symmetric_uniform_fpa_bne(2)
prior = IndependentProduct((Uniform(0, 1), Uniform(0, 1)))
chk = epsilon_bne_check(FirstPrice(), [s, s], prior, BidGrid(0.005, 1.0), points=101)
est = poa_estimate(FirstPrice(), prior, [s, s], samples=50_000, seed=0)
print(f"symmetric: epsilon={chk.epsilon:.4f}  ratio={est.ratio:.4f} +- {est.stderr:.4f}")

# %% [markdown]
# Values U[0,1] against U[0,2]: the weak bidder shades less and sometimes
# beats a stronger opponent, which costs welfare.

# %%
s1, s2 = vickrey_asymmetric_bne()
prior = IndependentProduct((Uniform(0, 1), Uniform(0, 2)))
chk = epsilon_bne_check(FirstPrice(), [s1, s2], prior, BidGrid(0.005, 2.0), points=101)
est = poa_estimate(FirstPrice(), prior, [s1, s2], samples=50_000, seed=0)
v = np.linspace(0, 1, 5)
print("bids of the weak bidder:", np.round(s1(v), 3), " strong bidder:", np.round(s2(2 * v), 3))
print(f"asymmetric: epsilon={chk.epsilon:.4f}  ratio={est.ratio:.4f} +- {est.stderr:.4f}")

# %% [markdown]
# Two items, two bidders who each want one item worth 1. Each bidder places a
# single bid on a uniformly random item, at a price with density 1/(1-b).
# Both land on the same item half the time.

# %%
fmt = SimultaneousItems(2, allocate_zero_bids=False, max_bids=1)
vals = (UnitDemand((1.0, 1.0)), UnitDemand((1.0, 1.0)))
s = bad_example_mixed_strategy()
pm = point_mass(vals[0])
est = poa_estimate(fmt, IndependentProduct((pm, pm)), [s, s], samples=50_000, seed=0)
print(f"mixed: welfare={est.welfare:.4f}  OPT={opt_matching(vals).welfare}  ratio={est.ratio:.4f}")
