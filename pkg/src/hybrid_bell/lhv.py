"""Local hidden-variable baseline for the CHSH combination.

Every local realistic model is a mixture of the 16 deterministic strategies
that fix Alice's outcome for each of her two settings and Bob's for each of
his.  Outcomes map onto the count layout of the correlation coefficient:
Alice +1 -> Det1, -1 -> Det2; Bob +1 -> passes Pol2 at beta_j, -1 -> passes
at beta_j⊥.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import optics
from .analysis import BELL_PAIRS, ChshResult, chsh_s, correlation_coefficient
from .apparatus import BELL_ALPHA_DEG, BELL_BETA_DEG, DEFAULT_WAVELENGTH_NM, ScenarioStep
from .trials import CountsRecord


@dataclass(frozen=True)
class DeterministicStrategy:
    a1: int
    a2: int
    b1: int
    b2: int

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            if getattr(self, name) not in (-1, 1):
                raise ValueError(f"{name} must be +1 or -1")

    def alice(self, i: int) -> int:
        return self.a1 if i == 1 else self.a2

    def bob(self, j: int) -> int:
        return self.b1 if j == 1 else self.b2


def enumerate_strategies() -> list[DeterministicStrategy]:
    return [DeterministicStrategy(*v) for v in itertools.product((1, -1), repeat=4)]


def strategy_chsh(s: DeterministicStrategy) -> int:
    return -s.a1 * s.b1 + s.a1 * s.b2 + s.a2 * s.b1 + s.a2 * s.b2


@dataclass(frozen=True)
class LhvModel:
    strategies: tuple[DeterministicStrategy, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if len(self.strategies) != len(w) or not len(w):
            raise ValueError("need one weight per strategy")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")

    @classmethod
    def point_mass(cls, s: DeterministicStrategy) -> "LhvModel":
        return cls((s,), (1.0,))

    @classmethod
    def uniform(cls) -> "LhvModel":
        s = enumerate_strategies()
        return cls(tuple(s), (1 / len(s),) * len(s))

    @classmethod
    def optimal(cls) -> "LhvModel":
        """Point mass on the first strategy reaching S = 2."""
        return cls.point_mass(next(s for s in enumerate_strategies() if strategy_chsh(s) == 2))

    def expected_chsh(self) -> float:
        return float(sum(w * strategy_chsh(s) for s, w in zip(self.strategies, self.weights)))

    def expected_correlation(self, i: int, j: int) -> float:
        return float(sum(w * s.alice(i) * s.bob(j) for s, w in zip(self.strategies, self.weights)))


@dataclass(frozen=True)
class LhvCell:
    """Tallies for one setting pair in the correlation-coefficient layout."""

    c_ij: int
    c_perp_perp: int
    c_perp_j: int
    c_i_perp: int


def sample_lhv_counts(model: LhvModel, pairs_per_cell: int, rng: np.random.Generator) -> dict[tuple[int, int], LhvCell]:
    """Draw ``pairs_per_cell`` i.i.d. strategies for each setting pair and tally outcomes."""
    if pairs_per_cell <= 0:
        raise ValueError("pairs_per_cell must be positive")
    out = {}
    for i, j in BELL_PAIRS:
        draws = rng.multinomial(pairs_per_cell, model.weights)
        tally = {(1, 1): 0, (-1, -1): 0, (-1, 1): 0, (1, -1): 0}
        for s, n in zip(model.strategies, draws):
            tally[(s.alice(i), s.bob(j))] += int(n)
        out[(i, j)] = LhvCell(tally[(1, 1)], tally[(-1, -1)], tally[(-1, 1)], tally[(1, -1)])
    return out


def chsh_from_cells(cells: dict[tuple[int, int], LhvCell]) -> ChshResult:
    e = {k: correlation_coefficient(c.c_ij, c.c_perp_perp, c.c_perp_j, c.c_i_perp) for k, c in cells.items()}
    return chsh_s(e[(1, 1)], e[(1, 2)], e[(2, 1)], e[(2, 2)])


def cells_to_records(
    cells: dict[tuple[int, int], LhvCell],
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
    x_origin_um: float = 0.0,
    duration_s: float = 1.0,
) -> list[CountsRecord]:
    """Express LHV tallies as step-II count records at the nominal Bell settings.

    Each setting pair yields two records: Pol2 at beta_j (Bob +1 passes) and
    at beta_j⊥ (Bob -1 passes).  Only paired detections are recorded, so the
    singles equal the coincidences.
    """
    records = []
    k = 0
    for (i, j), c in sorted(cells.items()):
        x = x_origin_um + optics.position_from_phase(BELL_ALPHA_DEG[i], wavelength_nm)
        phi = -BELL_BETA_DEG[j] / 2.0
        for pol2, c13, c23 in ((phi, c.c_ij, c.c_perp_j), (phi + 90.0, c.c_i_perp, c.c_perp_perp)):
            records.append(CountsRecord(ScenarioStep.II_POL1_OUT, k, x, pol2, None, duration_s,
                                        c13, c23, c13 + c23, c13, c23))
            k += 1
    return records


def records_to_cells(records: Sequence[CountsRecord], wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
                     x_origin_um: float = 0.0) -> dict[tuple[int, int], LhvCell]:
    """Inverse of :func:`cells_to_records`."""
    lam = wavelength_nm * 1e-3
    out = {}
    for i, j in BELL_PAIRS:
        x = x_origin_um + optics.position_from_phase(BELL_ALPHA_DEG[i], wavelength_nm)
        phi = -BELL_BETA_DEG[j] / 2.0

        def find(pol2):
            for r in records:
                d = (r.x_um - x) % lam
                if min(d, lam - d) < 1e-9 and abs(optics.wrap_phase(2 * (r.phi_deg - pol2))) < 1e-6:
                    return r
            raise ValueError(f"no record for setting ({i}, {j}) with Pol2 at {pol2:g} deg")

        a, b = find(phi), find(phi + 90.0)
        out[(i, j)] = LhvCell(a.coinc13, b.coinc23, a.coinc23, b.coinc13)
    return out
