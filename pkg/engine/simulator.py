# engine/simulator.py - Monte Carlo run of the market timeline for any profile.
#
# Per replication: every seller draws its price, shoppers buy at the minimum (ties split over
# the cheapest stores), searchers start at a store picked in proportion to store counts and
# stop as soon as the price is <= P_M (or <= c). Otherwise they pay c and move on to an
# unvisited seller, again in proportion to store counts. A searcher who has seen every
# seller buys at the cheapest one (free recall).
#
# "flow" mode pushes the searcher mass through this tree exactly given the realized prices;
# "agent" mode draws individual searchers instead.
#
# Replications are processed in fixed blocks. Block b draws from Philox(seed).jumped(b), so
# the output does not depend on the number of workers.

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, List, Tuple

import numpy as np

from market.errors import ConfigError
from market.schema import MarketConfig, derived_constants, validate
from market.strategies import StrategyProfile, validate_profile

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
HISTOGRAM_BINS = 50
DEFAULT_AGENTS = 256
MODES = ("flow", "agent")


@dataclass(frozen=True, eq=False)
class SimulationResult:
    profit_mean: Tuple[float, ...]
    profit_se: Tuple[float, ...]
    quantity: Tuple[float, ...]
    mean_searches: float
    first_store_fraction: float
    searcher_price_paid: float
    shopper_price_paid: float
    mean_search_cost: float
    total_profit: float
    consumer_surplus: float
    conservation_error: float
    histogram_edges: np.ndarray
    histogram_mass: np.ndarray
    replications: int
    seed: int
    mode: str = "flow"


@dataclass
class _BlockOutput:
    profits: np.ndarray      # (reps, n)
    quantities: np.ndarray   # (reps, n)
    searches: np.ndarray     # (reps,) mean stores visited per searcher
    first_store: np.ndarray  # (reps,) searcher share buying at the first store
    searcher_paid: np.ndarray
    shopper_paid: np.ndarray
    search_cost: np.ndarray  # (reps,) per searcher
    histogram: np.ndarray    # (bins,)


# ---------------- searcher routing ----------------

def _recall_split(prices: np.ndarray, visited: FrozenSet[int]) -> Dict[int, float]:
    best = min(prices[k] for k in visited)
    tied = [k for k in sorted(visited) if prices[k] == best]
    return {k: 1.0 / len(tied) for k in tied}


def _route_searchers(prices: np.ndarray, acceptable: np.ndarray, counts: np.ndarray):
    """Exact flow of one unit of searchers starting at each seller.

    Returns (purchase matrix start x seller, expected visits per start, first-store purchase per start).
    """
    n = len(prices)
    everyone = frozenset(range(n))

    @lru_cache(maxsize=None)
    def after(visited: FrozenSet[int]) -> Tuple[Tuple[float, ...], float]:
        """Purchases and further visits of a unit mass that has rejected every seller in `visited`."""
        buy = np.zeros(n)
        if visited == everyone:
            for k, share in _recall_split(prices, visited).items():
                buy[k] += share
            return tuple(buy), 0.0
        remaining = sorted(everyone - visited)
        weights = counts[remaining] / counts[remaining].sum()
        visits = 0.0
        for k, w in zip(remaining, weights):
            visits += w
            if acceptable[k]:
                buy[k] += w
            else:
                sub_buy, sub_visits = after(visited | {k})
                buy += w * np.asarray(sub_buy)
                visits += w * sub_visits
        return tuple(buy), visits

    purchases = np.zeros((n, n))
    visits = np.ones(n)
    first = np.zeros(n)
    for i in range(n):
        if acceptable[i]:
            purchases[i, i] = 1.0
            first[i] = 1.0
        else:
            sub_buy, sub_visits = after(frozenset({i}))
            purchases[i] = sub_buy
            visits[i] += sub_visits
    return purchases, visits, first


def _agent_searchers(prices: np.ndarray, acceptable: np.ndarray, counts: np.ndarray,
                     agents: int, rng: np.random.Generator):
    """Individual searchers: visit order is weighted sampling without replacement by store counts."""
    n = len(prices)
    keys = rng.exponential(size=(agents, n)) / counts
    order = np.argsort(keys, axis=1)
    ok = acceptable[order]
    stops = ok.any(axis=1)
    first_ok = np.argmax(ok, axis=1)
    visits = np.where(stops, first_ok + 1, n).astype(float)
    rows = np.arange(agents)
    cheapest_in_order = np.argmin(prices[order], axis=1)
    chosen = np.where(stops, order[rows, first_ok], order[rows, cheapest_in_order])
    buy = np.bincount(chosen, minlength=n) / agents
    first = float(np.mean(stops & (first_ok == 0)))
    return buy, float(np.mean(visits)), first


# ---------------- blocks ----------------

def _run_block(index: int, reps: int, profile: StrategyProfile, config: MarketConfig, seed: int,
               edges: np.ndarray, mode: str, agents: int) -> _BlockOutput:
    rng = np.random.Generator(np.random.Philox(seed).jumped(index))
    n = config.n_sellers
    counts = np.asarray(config.store_counts, dtype=float)
    src = np.asarray(derived_constants(config).searcher_share)
    mu, c = config.mu, config.c

    uniforms = rng.random((reps, n))
    prices = np.column_stack([np.asarray(profile[i].sample(uniforms[:, i]), dtype=float) for i in range(n)])

    lowest = prices.min(axis=1, keepdims=True)
    at_min = (prices == lowest) * counts
    shop = mu * at_min / at_min.sum(axis=1, keepdims=True)

    acceptable = (prices <= profile.reserve_price) | (prices <= c)
    search = np.zeros((reps, n))
    visits = np.ones(reps)
    first = np.ones(reps)
    # agent mode draws individual searchers in every replication
    fast = acceptable.all(axis=1) & (mode == "flow")
    search[fast] = src
    for r in np.nonzero(~fast)[0]:
        if mode == "agent":
            buy, visits[r], first[r] = _agent_searchers(prices[r], acceptable[r], counts, agents, rng)
            search[r] = (1.0 - mu) * buy
            continue
        purchases, start_visits, start_first = _route_searchers(prices[r], acceptable[r], counts)
        start = src / (1.0 - mu)
        search[r] = (1.0 - mu) * (start @ purchases)
        visits[r] = float(start @ start_visits)
        first[r] = float(start @ start_first)

    quantities = shop + search
    profits = prices * quantities
    searcher_paid = (prices * search).sum(axis=1) / (1.0 - mu)
    hist = np.histogram(prices.ravel(), bins=edges, weights=quantities.ravel())[0].astype(float)
    logger.debug("block %d: %d replications, %d routed store by store", index, reps, int((~fast).sum()))
    return _BlockOutput(
        profits=profits,
        quantities=quantities,
        searches=visits,
        first_store=first,
        searcher_paid=searcher_paid,
        shopper_paid=lowest[:, 0],
        search_cost=c * (visits - 1.0),
        histogram=hist,
    )


def simulate(profile: StrategyProfile, config: MarketConfig, replications: int, seed: int = 0,
             workers: int = 1, mode: str = "flow", agents: int = DEFAULT_AGENTS,
             bins: int = HISTOGRAM_BINS) -> SimulationResult:
    validate(config)
    validate_profile(profile, config.n_sellers)
    if replications < 1:
        raise ConfigError(f"replications must be at least 1, got {replications}")
    if mode not in MODES:
        raise ConfigError(f"unknown simulation mode {mode!r}")
    seed = int(seed)
    upper = max(config.M, max(s.support[1] for s in profile.strategies))
    edges = np.linspace(0.0, upper, bins + 1)

    sizes: List[int] = []
    remaining = replications
    while remaining > 0:
        sizes.append(min(BLOCK_SIZE, remaining))
        remaining -= sizes[-1]

    def job(b: int) -> _BlockOutput:
        return _run_block(b, sizes[b], profile, config, seed, edges, mode, agents)

    if workers <= 1:
        blocks = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(job, range(len(sizes))))

    profits = np.concatenate([b.profits for b in blocks])
    quantities = np.concatenate([b.quantities for b in blocks])
    searches = np.concatenate([b.searches for b in blocks])
    first = np.concatenate([b.first_store for b in blocks])
    searcher_paid = np.concatenate([b.searcher_paid for b in blocks])
    shopper_paid = np.concatenate([b.shopper_paid for b in blocks])
    search_cost = np.concatenate([b.search_cost for b in blocks])
    hist = np.zeros(bins)
    for b in blocks:
        hist = hist + b.histogram

    mu = config.mu
    # per-seller reductions run along contiguous rows so numpy sums them pairwise
    by_seller = np.ascontiguousarray(profits.T)
    se = by_seller.std(axis=1, ddof=1) / np.sqrt(replications) if replications > 1 else np.zeros(config.n_sellers)
    total_profit = float(profits.sum(axis=1).mean())
    mean_cost = float(search_cost.mean())
    spent = (profits.sum(axis=1) + (1.0 - mu) * search_cost)
    conservation = float(np.max(np.abs(quantities.sum(axis=1) - 1.0)))
    logger.info("simulated %d replications (seed %d, %s mode)", replications, seed, mode)
    return SimulationResult(
        profit_mean=tuple(float(x) for x in by_seller.mean(axis=1)),
        profit_se=tuple(float(x) for x in se),
        quantity=tuple(float(x) for x in np.ascontiguousarray(quantities.T).mean(axis=1)),
        mean_searches=float(searches.mean()),
        first_store_fraction=float(first.mean()),
        searcher_price_paid=float(searcher_paid.mean()),
        shopper_price_paid=float(shopper_paid.mean()),
        mean_search_cost=mean_cost,
        total_profit=total_profit,
        consumer_surplus=float(config.M - spent.mean()),
        conservation_error=conservation,
        histogram_edges=edges,
        histogram_mass=hist / replications,
        replications=int(replications),
        seed=seed,
        mode=mode,
    )
