# engine/payoff.py - Win probabilities, expected profits, profit per branch and expected prices.
# Profit of seller i posting price p (production cost normalized to 0):
#     pi_i(p) = p * (mu * alpha_i(p) + Src_i)      for p <= P_M
# alpha_i is the probability of winning the shoppers. Above P_M searchers walk away, so
# searcher revenue is taken as 0 there (an upper bound is all the verifier needs).

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from market.errors import ProfitNotConstantError
from market.schema import MarketConfig, derived_constants
from market.strategies import PricingStrategy, StrategyProfile

logger = logging.getLogger(__name__)

SUPPORT_GRID = 400


@dataclass(frozen=True)
class ProfitBreakdown:
    price: float
    shopper_win_prob: float
    shopper_revenue: float
    searcher_revenue: float
    total: float
    off_reserve: bool = False


def _weights(profile: StrategyProfile, store_counts: Optional[Sequence[int]]) -> List[int]:
    return list(store_counts) if store_counts is not None else [1] * len(profile)


def survival(j: int, p, profile: StrategyProfile):
    """beta_j(p): probability that seller j's realized price is strictly above p."""
    return profile[j].survival(p)


def _tie_share(i: int, price: float, profile: StrategyProfile, weights: List[int]) -> float:
    """alpha_i at a price where some rivals hold an atom: enumerate which of them tie."""
    rivals = [j for j in range(len(profile)) if j != i]
    tying = [j for j in rivals if profile[j].mass_at(price) > 0.0]
    clear = 1.0
    for j in rivals:
        if j not in tying:
            clear *= float(profile[j].survival(price))
    if clear == 0.0:
        return 0.0
    total = 0.0
    for picks in itertools.product((False, True), repeat=len(tying)):
        prob = 1.0
        share_weight = weights[i]
        for j, ties in zip(tying, picks):
            if ties:
                prob *= profile[j].mass_at(price)
                share_weight += weights[j]
            else:
                prob *= float(profile[j].survival(price))
        if prob > 0.0:
            total += prob * weights[i] / share_weight
    return clear * total


def win_probability(i: int, p, profile: StrategyProfile, store_counts: Optional[Sequence[int]] = None):
    """alpha_i(p) for seller i posting p against the rivals' strategies.

    Ties with rival atoms split the shoppers uniformly over the cheapest stores.
    Accepts a scalar or an array of prices.
    """
    weights = _weights(profile, store_counts)
    arr = np.asarray(p, dtype=float)
    alpha = np.ones_like(arr)
    for j in range(len(profile)):
        if j != i:
            alpha = alpha * np.asarray(profile[j].survival(arr), dtype=float)

    atom_prices = {price for j, price, _ in profile.atoms() if j != i}
    for price in atom_prices:
        hit = arr == price
        if np.any(hit):
            alpha = np.where(hit, _tie_share(i, price, profile, weights), alpha)
    if np.ndim(p) == 0:
        return float(alpha)
    return alpha


def profit_curve(i: int, prices, profile: StrategyProfile, config: MarketConfig) -> np.ndarray:
    """Vectorized total profit of seller i over an array of prices."""
    arr = np.asarray(prices, dtype=float)
    share = derived_constants(config).searcher_share[i]
    alpha = np.asarray(win_probability(i, arr, profile, config.store_counts), dtype=float)
    searchers = np.where(arr <= profile.reserve_price, share, 0.0)
    return arr * (config.mu * alpha + searchers)


def expected_profit(i: int, p: float, profile: StrategyProfile, config: MarketConfig) -> ProfitBreakdown:
    share = derived_constants(config).searcher_share[i]
    alpha = win_probability(i, float(p), profile, config.store_counts)
    off_reserve = p > profile.reserve_price
    shopper_revenue = p * config.mu * alpha
    searcher_revenue = 0.0 if off_reserve else p * share
    return ProfitBreakdown(
        price=float(p),
        shopper_win_prob=alpha,
        shopper_revenue=shopper_revenue,
        searcher_revenue=searcher_revenue,
        total=shopper_revenue + searcher_revenue,
        off_reserve=off_reserve,
    )


def support_points(strategy: PricingStrategy, grid: int = SUPPORT_GRID) -> Tuple[np.ndarray, np.ndarray]:
    """Representative support prices with their probability weights (quantile midpoints + atoms)."""
    prices: List[np.ndarray] = []
    weights: List[np.ndarray] = []
    continuous = strategy.continuous_support()
    if continuous is not None:
        level = strategy.cdf.top_value
        u = (np.arange(grid) + 0.5) / grid * level
        prices.append(np.asarray(strategy.cdf.quantile(u), dtype=float))
        weights.append(np.full(grid, level / grid))
    for price, mass in strategy.atoms():
        prices.append(np.asarray([price]))
        weights.append(np.asarray([mass]))
    return np.concatenate(prices), np.concatenate(weights)


def support_profits(i: int, profile: StrategyProfile, config: MarketConfig,
                    grid: int = SUPPORT_GRID) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(prices, weights, profits) of seller i over its own support."""
    prices, weights = support_points(profile[i], grid)
    return prices, weights, profit_curve(i, prices, profile, config)


def equilibrium_profit(i: int, profile: StrategyProfile, config: MarketConfig, grid: int = 4096) -> float:
    """Expected profit of seller i when it plays its own strategy."""
    _, weights, profits = support_profits(i, profile, config, grid)
    return float(np.dot(weights, profits))


def profit_per_branch(i: int, profile: StrategyProfile, config: MarketConfig, tolerance: float = 1e-6) -> float:
    """Equilibrium profit of seller i divided by its store count.

    Raises ProfitNotConstantError when the profit moves on the seller's own support.
    """
    _, _, profits = support_profits(i, profile, config)
    top = float(np.max(profits))
    spread = (top - float(np.min(profits))) / max(abs(top), 1e-300)
    if spread > tolerance:
        raise ProfitNotConstantError(
            f"seller {i}: profit varies by {spread:.3g} (relative) on its support")
    return float(np.mean(profits)) / config.store_counts[i]


@lru_cache(maxsize=1024)
def expected_price(strategy: PricingStrategy) -> float:
    """e(s): mean price of a strategy, atoms included."""
    return float(strategy.mean())


def expected_min_price(profile: StrategyProfile) -> float:
    """Expected lowest realized price (what a shopper pays)."""
    lower = min(s.support[0] for s in profile.strategies)
    upper = max(s.support[1] for s in profile.strategies)
    if upper <= lower:
        return float(lower)

    def all_above(x: float) -> float:
        out = 1.0
        for s in profile.strategies:
            out *= float(s.survival(x))
        return out

    kinks = sorted({b for s in profile.strategies for b in s.support if lower < b < upper})
    area, _ = integrate.quad(all_above, lower, upper, points=kinks or None, limit=400, epsabs=1e-12)
    return float(lower + area)
