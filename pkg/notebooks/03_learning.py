# %% [markdown]
# # No-regret bidders
#
# Two multiplicative-weights learners bid in a repeated auction with fixed
# values. Once their regret is small, average welfare has to clear the bound
# implied by the certificate, minus the regret they still carry.

# %%
from auction_poa.auctions import AllPay, SimultaneousItems
from auction_poa.learning import LearnerConfig, item_grid, run_repeated, welfare_vs_bound
from auction_poa.smoothness import ONE_MINUS_INV_E, SmoothnessParams
from auction_poa.valuations import UnitDemand

T = 5_000
configs = [LearnerConfig(seed=0), LearnerConfig(seed=1)]

# %%
seq = run_repeated(AllPay(), (1.0, 0.5), [item_grid(0.05, 1.0), item_grid(0.05, 0.5)], configs, T)
rep = welfare_vs_bound(seq, SmoothnessParams(0.5, 1))
print(f"all-pay: avg welfare {rep.avg_welfare:.3f}, bound {rep.bound:.3f}, regrets "
      f"{tuple(round(r, 4) for r in rep.regrets)}")

# %%
vals = (UnitDemand((1.0, 0.5)), UnitDemand((0.5, 1.0)))
seq = run_repeated(SimultaneousItems(2), vals, [item_grid(0.1, (1.0, 0.5)), item_grid(0.1, (0.5, 1.0))],
                   configs, T)
rep = welfare_vs_bound(seq, SmoothnessParams(ONE_MINUS_INV_E, 1))
late = seq.profiles()[-1000:]
print(f"two items: avg welfare {rep.avg_welfare:.3f} of OPT {rep.opt}, bound {rep.bound:.3f}")
print("mean bids over the last 1000 rounds:\n", late.mean(axis=0).round(3))
