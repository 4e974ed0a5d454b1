"""Local hidden-variable baseline.

Any local model is a mixture of 16 deterministic strategies, so the CHSH
sum of a mixture is an average of values that are each +2 or -2.  Sampled
local data run through the same correlation estimator never clear 2.
"""
import numpy as np

from hybrid_bell import lhv
from hybrid_bell.analysis import analyze_records
from hybrid_bell.cli import enumerate_table

print(enumerate_table())

rng = np.random.default_rng(3)
models = {
    "optimal": lhv.LhvModel.optimal(),
    "uniform": lhv.LhvModel.uniform(),
    "random mixture": lhv.LhvModel(tuple(lhv.enumerate_strategies()), tuple(rng.dirichlet(np.ones(16)))),
}
print(f"\n{'model':<16}{'<S>':>8}{'sampled S':>12}{'sigma':>9}{'violation':>11}")
for name, model in models.items():
    cells = lhv.sample_lhv_counts(model, 100_000, rng)
    _, chsh = analyze_records(lhv.cells_to_records(cells), mode="raw", x_origin_um=0.0)
    print(f"{name:<16}{model.expected_chsh():8.3f}{chsh.S:12.4f}{chsh.sigma_S:9.4f}{chsh.violation_sigmas:11.2f}")

# scan the mixing weight between the two S = +2 and S = -2 extremes
plus = next(s for s in lhv.enumerate_strategies() if lhv.strategy_chsh(s) == 2)
minus = next(s for s in lhv.enumerate_strategies() if lhv.strategy_chsh(s) == -2)
print("\nweight on the S=+2 strategy vs <S>")
for w in np.linspace(0, 1, 5):
    m = lhv.LhvModel((plus, minus), (w, 1 - w))
    print(f"  {w:4.2f}  {m.expected_chsh():+.2f}")
