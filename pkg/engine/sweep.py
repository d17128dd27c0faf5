# engine/sweep.py - Constructs the equilibrium over a grid of store-count vectors and shopper
# fractions and tabulates what searchers and shoppers pay. Rows that cannot be built keep
# their error message and the sweep moves on.

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from market.errors import SearchModelError
from market.schema import MarketConfig, derived_constants
from market.strategies import PurePoint

from .equilibrium import ConstructedEquilibrium, construct_equilibrium
from .payoff import expected_min_price, expected_price
from .simulator import simulate

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "label", "store_counts", "mu", "family", "reserve_price", "lowest_price",
    "share_paying_reserve", "searcher_price_paid", "searcher_price_ratio",
    "shopper_price_paid", "simulated_searcher_price_paid", "error",
]


def analytic_prices(eq: ConstructedEquilibrium, config: MarketConfig) -> Dict[str, float]:
    """Searchers buy at the first store, so they pay the expected price of that seller."""
    shares = derived_constants(config).searcher_share
    profile = eq.profile
    searcher = sum(s * expected_price(st) for s, st in zip(shares, profile.strategies)) / (1.0 - config.mu)
    pure = sum(n for n, st in zip(config.store_counts, profile.strategies) if isinstance(st, PurePoint))
    return {
        "share_paying_reserve": pure / config.total_stores,
        "searcher_price_paid": searcher,
        "searcher_price_ratio": searcher / eq.reserve_price,
        "shopper_price_paid": expected_min_price(profile),
    }


def _label(counts: Sequence[int], mu: float) -> str:
    return f"{'-'.join(str(n) for n in counts)}@mu={mu:g}"


def sweep(template: MarketConfig, store_counts_grid: Optional[Sequence[Sequence[int]]] = None,
          mu_grid: Optional[Sequence[float]] = None, family: str = "auto",
          replications: int = 0, seed: int = 0, workers: int = 1) -> pd.DataFrame:
    """One row per (store counts, mu) pair, in grid order."""
    counts_grid = [tuple(c) for c in (store_counts_grid or [template.store_counts])]
    mus = list(mu_grid or [template.mu])
    rows: List[Dict] = []
    for counts in counts_grid:
        for mu in mus:
            config = MarketConfig(counts, mu, template.c, template.M)
            row: Dict = {name: np.nan for name in SWEEP_COLUMNS}
            row.update(label=_label(counts, mu), store_counts=" ".join(str(n) for n in counts),
                       mu=mu, family=family, error="")
            try:
                eq = construct_equilibrium(config, family=family)
                row.update(family=eq.family, reserve_price=eq.reserve_price, lowest_price=eq.lowest_price)
                row.update(analytic_prices(eq, config))
                if replications > 0:
                    result = simulate(eq.profile, config, replications, seed, workers=workers)
                    row["simulated_searcher_price_paid"] = result.searcher_price_paid
            except SearchModelError as e:
                logger.warning("sweep row %s skipped: %s", row["label"], e)
                row["error"] = str(e)
            rows.append(row)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
