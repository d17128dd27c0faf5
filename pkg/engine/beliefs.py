# engine/beliefs.py - Anonymous Knowledge: searchers know how many stores use each strategy,
# not which seller uses which. From one observed price they form a posterior over strategies,
# the expected price of one more search, and the stop/continue decision.

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from market.errors import BeliefError
from market.schema import MarketConfig
from market.strategies import PricingStrategy, StrategyProfile

from .payoff import expected_price

logger = logging.getLogger(__name__)

ATOM_WINDOW = 1e-9  # relative to the largest price the beliefs can produce
INDIFFERENCE = 1e-9


@dataclass(frozen=True)
class BeliefState:
    """(strategy, believed number of stores using it) pairs."""
    entries: Tuple[Tuple[PricingStrategy, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((s, int(n)) for s, n in self.entries))
        for _, n in self.entries:
            if n < 0:
                raise BeliefError(f"negative belief count {n}")

    @classmethod
    def truthful(cls, profile: StrategyProfile, store_counts: Optional[Sequence[int]] = None) -> "BeliefState":
        """Beliefs that coincide with the profile; identical strategies are merged."""
        counts = list(store_counts) if store_counts is not None else [1] * len(profile)
        merged: List[List] = []
        for strategy, n in zip(profile.strategies, counts):
            for item in merged:
                if item[0] == strategy:
                    item[1] += n
                    break
            else:
                merged.append([strategy, n])
        return cls(tuple((s, n) for s, n in merged))

    @property
    def total(self) -> int:
        return sum(n for _, n in self.entries)

    @property
    def scale(self) -> float:
        return max(s.support[1] for s, _ in self.entries)

    def without(self, strategy: PricingStrategy) -> "BeliefState":
        """One store of `strategy` removed (after it has been identified and visited)."""
        out = []
        for s, n in self.entries:
            out.append((s, n - 1 if s == strategy else n))
        return BeliefState(tuple((s, n) for s, n in out if n > 0))


def posterior(p: float, beliefs: BeliefState) -> List[Tuple[PricingStrategy, float]]:
    """prob(p, s): atoms dominate densities; weights n(s) * mass or n(s) * f_s(p)."""
    eps = ATOM_WINDOW * beliefs.scale
    atom_weights = []
    for s, n in beliefs.entries:
        mass = sum(m for a, m in s.atoms() if abs(a - p) <= eps)
        atom_weights.append(n * mass)
    weights = np.asarray(atom_weights, dtype=float)
    if not np.any(weights > 0.0):
        weights = np.asarray([n * float(s.density(p)) for s, n in beliefs.entries], dtype=float)
    total = float(weights.sum())
    if not total > 0.0:
        raise BeliefError(f"price {p} has zero likelihood under every believed strategy")
    return [(s, float(w / total)) for (s, _), w in zip(beliefs.entries, weights) if w > 0.0]


def continuation_price(p: float, beliefs: BeliefState) -> float:
    """Expected price at the next store after observing p at the current one."""
    total = beliefs.total
    if total <= 1:
        raise BeliefError("no further store to search")
    weighted = sum(n * expected_price(s) for s, n in beliefs.entries)
    return sum(prob * (weighted - expected_price(s)) for s, prob in posterior(p, beliefs)) / (total - 1)


def should_continue(lowest_observed: float, beliefs: BeliefState, c: float, stores_left: int) -> bool:
    """Search on only if the next search is expected to save strictly more than c."""
    if stores_left <= 0 or lowest_observed <= c:
        return False
    expected = continuation_price(lowest_observed, beliefs)
    return expected < lowest_observed - c - INDIFFERENCE * max(1.0, abs(lowest_observed))


@dataclass(frozen=True)
class ReserveReport:
    passed: bool
    sufficient_passed: bool
    margins: Tuple[float, ...]
    worst_gap: float
    worst_price: Optional[float]
    violations: Tuple[float, ...] = field(default_factory=tuple)


def price_grid(profile: StrategyProfile, grid: int) -> np.ndarray:
    """Evenly spaced prices from the lowest support point up to P_M, plus every atom."""
    lower = min(s.support[0] for s in profile.strategies)
    pts = [np.linspace(lower, profile.reserve_price, grid)]
    pts.append(np.asarray([price for _, price, _ in profile.atoms()], dtype=float))
    return np.unique(np.concatenate(pts))


def reserve_price_rational(profile: StrategyProfile, config: MarketConfig, grid: int = 1000) -> ReserveReport:
    """Checks that no searcher holding truthful beliefs wants to search past any observable price <= P_M.

    Reports the sufficient expected-price condition (every e(s) >= P_M - c) next to the exact
    grid check; `passed` follows the exact check.
    """
    reserve = profile.reserve_price
    margins = tuple(expected_price(s) - (reserve - config.c) for s in profile.strategies)
    sufficient = min(margins) >= -1e-9 * reserve

    beliefs = BeliefState.truthful(profile, config.store_counts)
    stores_left = beliefs.total - 1
    worst_gap = -np.inf
    worst_price = None
    violations: List[float] = []
    for p in price_grid(profile, grid):
        if p <= config.c:
            continue
        try:
            expected = continuation_price(float(p), beliefs)
        except BeliefError:
            continue  # p not produced by any strategy
        gap = (float(p) - config.c) - expected
        if gap > worst_gap:
            worst_gap, worst_price = gap, float(p)
        if stores_left > 0 and should_continue(float(p), beliefs, config.c, stores_left):
            violations.append(float(p))
    if violations:
        logger.warning("searchers would search past %d observable prices (first %.6g)", len(violations), violations[0])
    return ReserveReport(
        passed=not violations,
        sufficient_passed=bool(sufficient),
        margins=margins,
        worst_gap=float(worst_gap) if np.isfinite(worst_gap) else 0.0,
        worst_price=worst_price,
        violations=tuple(violations),
    )
