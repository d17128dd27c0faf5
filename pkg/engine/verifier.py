# engine/verifier.py - Equilibrium checks for candidate profiles plus the brute-force
# best-response oracle. Structural problems raise StrategyStructureError; equilibrium
# failures never raise, they come back as failed checks in the VerificationReport.
#
# Deviations are searched over pure prices only: a mixed deviation earns a convex
# combination of pure-price profits.

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from market.errors import BeliefError, ConfigError, StrategyStructureError
from market.schema import MarketConfig, derived_constants, validate
from market.strategies import PurePoint, StrategyProfile, validate_profile

from .beliefs import BeliefState, posterior, price_grid, reserve_price_rational
from .equilibrium import infer_family
from .payoff import equilibrium_profit, profit_curve, support_profits

logger = logging.getLogger(__name__)

CHECK_NAMES = (
    "support_bound",
    "atoms_only_at_reserve",
    "common_supremum",
    "interval_coverage",
    "profit_constancy",
    "no_profitable_deviation",
    "reserve_rationality",
    "belief_consistency",
    "model_law",
)
EDGE_NUDGE = 1e-9


@dataclass(frozen=True)
class Tolerances:
    deviation: float = 1e-6  # relative to P_M
    profit: float = 1e-6     # relative variation on own support
    grid: int = 10_000
    belief_grid: int = 1000
    workers: int = 1

    @classmethod
    def from_overrides(cls, overrides: Optional[Dict[str, float]] = None, **kwargs) -> "Tolerances":
        values = {}
        for key, value in (overrides or {}).items():
            name = {"tol_deviation": "deviation", "tol_profit": "profit"}.get(key, key)
            values[name] = value
        values.update({k: v for k, v in kwargs.items() if v is not None})
        if "grid" in values:
            values["grid"] = int(values["grid"])
            if values["grid"] < 1000:
                raise ConfigError(f"deviation grid must hold at least 1000 prices, got {values['grid']}")
        if "workers" in values:
            values["workers"] = max(1, int(values["workers"]))
        return cls(**values)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    evidence: float


@dataclass(frozen=True)
class Deviation:
    seller: int
    price: float
    profit: float
    gain: float


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    checks: Tuple[CheckResult, ...]
    best_deviations: Tuple[Deviation, ...]
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def check(self, name: str) -> CheckResult:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)

    @property
    def failed(self) -> List[str]:
        return [item.name for item in self.checks if not item.passed]


@dataclass(frozen=True)
class SymmetryWitness:
    """Two sellers of different size and two support prices whose profit equations clash."""
    seller_i: int
    seller_j: int
    price_p: float
    price_q: float
    gap_i: float
    gap_j: float

    @property
    def residual(self) -> float:
        return abs(self.gap_i - self.gap_j)


# ---------------- oracle ----------------

def _candidate_prices(profile: StrategyProfile, config: MarketConfig, grid_size: int) -> np.ndarray:
    base = np.geomspace(config.c / 100.0, config.M, grid_size)
    special = [profile.reserve_price]
    for s in profile.strategies:
        special.extend(s.support)
        continuous = s.continuous_support()
        if continuous is not None:
            special.extend(continuous)
    special.extend(price for _, price, _ in profile.atoms())
    special = np.asarray(special, dtype=float)
    extra = np.concatenate((special, special * (1.0 - EDGE_NUDGE)))
    return np.unique(np.concatenate((base, extra[(extra > 0.0) & (extra <= config.M)])))


def brute_force_best_response(i: int, profile: StrategyProfile, config: MarketConfig,
                              grid_size: int = 10_000) -> Tuple[float, float]:
    """(price, profit) maximizing seller i's profit against the rivals' strategies."""
    if grid_size < 1000:
        raise ValueError(f"grid_size must be at least 1000, got {grid_size}")
    prices = _candidate_prices(profile, config, grid_size)
    profits = profit_curve(i, prices, profile, config)
    best = int(np.argmax(profits))
    best_price, best_profit = float(prices[best]), float(profits[best])

    for k in np.argsort(profits)[::-1][:3]:
        lo = prices[max(k - 1, 0)]
        hi = prices[min(k + 1, len(prices) - 1)]
        if hi <= lo:
            continue
        res = optimize.minimize_scalar(
            lambda x: -float(profit_curve(i, np.asarray([x]), profile, config)[0]),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
        if res.success and -res.fun > best_profit:
            best_price, best_profit = float(res.x), float(-res.fun)
    return best_price, best_profit


# ---------------- per-seller work ----------------

@dataclass(frozen=True)
class _SellerFacts:
    profit_spread: float
    equilibrium_profit: float
    deviation: Deviation


def _seller_facts(i: int, profile: StrategyProfile, config: MarketConfig, tol: Tolerances) -> _SellerFacts:
    _, _, profits = support_profits(i, profile, config)
    top = float(np.max(profits))
    spread = (top - float(np.min(profits))) / max(abs(top), 1e-300)
    eq_profit = equilibrium_profit(i, profile, config)
    price, profit = brute_force_best_response(i, profile, config, tol.grid)
    return _SellerFacts(spread, eq_profit, Deviation(i, price, profit, profit - eq_profit))


def _collect(profile: StrategyProfile, config: MarketConfig, tol: Tolerances) -> List[_SellerFacts]:
    sellers = range(len(profile))
    if tol.workers <= 1:
        return [_seller_facts(i, profile, config, tol) for i in sellers]
    with ThreadPoolExecutor(max_workers=tol.workers) as pool:
        return list(pool.map(lambda i: _seller_facts(i, profile, config, tol), sellers))


# ---------------- individual checks ----------------

def _support_bound(profile: StrategyProfile) -> CheckResult:
    above = max(1.0 - float(s.prob_le(profile.reserve_price)) for s in profile.strategies)
    return CheckResult("support_bound", above <= 1e-12, above)


def _atoms_only_at_reserve(profile: StrategyProfile) -> CheckResult:
    eps = EDGE_NUDGE * profile.reserve_price
    stray = [mass for _, price, mass in profile.atoms() if abs(price - profile.reserve_price) > eps]
    worst = max(stray, default=0.0)
    return CheckResult("atoms_only_at_reserve", not stray, worst)


def _common_supremum(profile: StrategyProfile) -> CheckResult:
    gap = max(abs(s.support[1] - profile.reserve_price) for s in profile.strategies)
    return CheckResult("common_supremum", gap <= EDGE_NUDGE * profile.reserve_price, gap)


def _interval_coverage(profile: StrategyProfile, cells: int = 2000) -> CheckResult:
    """Every part of [P_L, P_M] must be inside the continuous support of at least two sellers."""
    intervals = [s.continuous_support() for s in profile.strategies]
    intervals = [iv for iv in intervals if iv is not None]
    if len(intervals) < 2:
        return CheckResult("interval_coverage", False, 1.0)
    lower = min(lo for lo, _ in intervals)
    mids = lower + (np.arange(cells) + 0.5) / cells * (profile.reserve_price - lower)
    count = np.zeros(cells, dtype=int)
    for lo, hi in intervals:
        count += ((mids >= lo) & (mids <= hi)).astype(int)
    uncovered = float(np.mean(count < 2))
    return CheckResult("interval_coverage", uncovered == 0.0, uncovered)


def _produced(p: float, profile: StrategyProfile, window: float) -> bool:
    """Whether some strategy puts probability on p: an atom there, or CDF growth around an interior p."""
    for s in profile.strategies:
        if any(abs(a - p) <= window for a, _ in s.atoms()):
            return True
        continuous = s.continuous_support()
        if continuous is not None and continuous[0] < p < continuous[1]:
            if float(s.prob_le(p + window)) - float(s.prob_le(p - window)) > 0.0:
                return True
    return False


def _belief_consistency(profile: StrategyProfile, config: MarketConfig, grid: int) -> CheckResult:
    """Every price the profile produces must get a proper posterior under truthful beliefs."""
    beliefs = BeliefState.truthful(profile, config.store_counts)
    window = EDGE_NUDGE * profile.reserve_price
    misses: List[float] = []
    checked = 0
    for p in price_grid(profile, grid):
        if not _produced(float(p), profile, window):
            continue
        checked += 1
        try:
            weights = sum(prob for _, prob in posterior(float(p), beliefs))
        except BeliefError:
            misses.append(float(p))
            continue
        if abs(weights - 1.0) > 1e-9:
            misses.append(float(p))
    if misses:
        logger.warning("truthful posterior undefined at %d of %d produced prices (first %.6g)",
                       len(misses), checked, misses[0])
    return CheckResult("belief_consistency", not misses, float(len(misses)) / max(checked, 1))


def _model_law(config: MarketConfig, facts: List[_SellerFacts], tol: Tolerances) -> Tuple[CheckResult, str]:
    family = infer_family(config)
    ppb = np.asarray([f.equilibrium_profit / n for f, n in zip(facts, config.store_counts)])
    if family == "original":
        profits = np.asarray([f.equilibrium_profit for f in facts])
        spread = float((profits.max() - profits.min()) / profits.max())
        return CheckResult("model_law", spread <= tol.profit, spread), "equal profit"
    if family == "extended":
        spread = float((ppb.max() - ppb.min()) / ppb.max())
        return CheckResult("model_law", spread <= tol.profit, spread), "equal profit per branch"
    m = derived_constants(config).smallest[0]
    others = np.delete(ppb, m)
    margin = float((ppb[m] - others.max()) / ppb[m])
    return CheckResult("model_law", margin > tol.profit, margin), "smallest seller has the largest profit per branch"


# ---------------- entry points ----------------

def verify(profile: StrategyProfile, config: MarketConfig, tolerances: Optional[Tolerances] = None) -> VerificationReport:
    tol = tolerances or Tolerances()
    validate(config)
    validate_profile(profile, config.n_sellers)
    reserve = profile.reserve_price

    checks: List[CheckResult] = [
        _support_bound(profile),
        _atoms_only_at_reserve(profile),
        _common_supremum(profile),
        _interval_coverage(profile),
    ]
    facts = _collect(profile, config, tol)
    spread = max(f.profit_spread for f in facts)
    checks.append(CheckResult("profit_constancy", spread <= tol.profit, spread))
    gain = max(f.deviation.gain for f in facts)
    checks.append(CheckResult("no_profitable_deviation", gain <= tol.deviation * reserve, gain / reserve))

    reserve_report = reserve_price_rational(profile, config, tol.belief_grid)
    checks.append(CheckResult("reserve_rationality", reserve_report.passed, reserve_report.worst_gap / reserve))
    checks.append(_belief_consistency(profile, config, tol.belief_grid))
    law, law_name = _model_law(config, facts, tol)
    checks.append(law)

    notes = [
        f"sufficient expected-price condition {'holds' if reserve_report.sufficient_passed else 'fails'} "
        f"(smallest margin {min(reserve_report.margins):.6g})",
        f"model law checked: {law_name}",
    ]
    for item in checks:
        logger.debug("check %s passed=%s evidence=%.6g", item.name, item.passed, item.evidence)
        if not item.passed:
            logger.warning("check %s failed (evidence %.6g)", item.name, item.evidence)
    return VerificationReport(
        passed=all(item.passed for item in checks),
        checks=tuple(checks),
        best_deviations=tuple(f.deviation for f in facts),
        notes=tuple(notes),
    )


def no_symmetric_ne_witness(profile: StrategyProfile, config: MarketConfig,
                            quantiles: Sequence[float] = (0.25, 0.75)) -> Optional[SymmetryWitness]:
    """For a symmetric mixed profile, shows why two sellers of different size cannot both be indifferent.

    Returns None when all store counts are equal.
    """
    validate(config)
    first = profile[0]
    if isinstance(first, PurePoint) or any(s != first for s in profile.strategies):
        raise StrategyStructureError("witness needs a symmetric mixed profile")
    counts = config.store_counts
    if len(set(counts)) == 1:
        return None
    i = int(np.argmax(counts))
    j = int(np.argmin(counts))
    level = first.cdf.top_value
    p, q = (float(first.cdf.quantile(u * level)) for u in quantiles)
    if p == q:
        raise StrategyStructureError("support quantiles coincide; the profile has no spread")
    profit_i = profit_curve(i, np.asarray([p, q]), profile, config)
    profit_j = profit_curve(j, np.asarray([p, q]), profile, config)
    return SymmetryWitness(i, j, p, q, float(profit_i[0] - profit_i[1]), float(profit_j[0] - profit_j[1]))
