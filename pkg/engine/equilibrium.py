# engine/equilibrium.py - Builds the characterized equilibria and solves for the reserve price.
#
# Families:
#   original  all store counts equal; sellers split into full mixers O, pure reserve B and
#             cutoff sellers G sharing one F (GroupCdf)
#   extended  two or more smallest sellers; larger sellers post P_M, the smallest ones play the
#             original construction with searcher share Src_m per seller
#   unique    one smallest seller m mixing with F_m against the second-smallest sellers J (F_j);
#             everybody else posts P_M
#
# Cutoffs in a GroupSpec are fractions of P_M (cp / P_M). Every defining equation is homogeneous
# of degree one in prices, so the equilibrium at P_M = 1 fixes the structure constant
# kappa = min_s E[s] / P_M and the reserve price is P_M = c / (1 - kappa).

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from market.cdf import GroupCdf, SecondSmallestCdf, SmallestCdf, TabulatedCdf
from market.errors import ConstructionError, StrategyStructureError
from market.schema import GroupAssignment, MarketConfig, derived_constants, validate
from market.strategies import Cutoff, MixedFull, PricingStrategy, PurePoint, StrategyProfile

from .payoff import expected_price

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupSpec:
    """Partition of the mixing sellers: full mixers O, pure reserve B, cutoff sellers G."""
    full_mixers: Tuple[int, ...] = ()
    pure_reserve: Tuple[int, ...] = ()
    cutoff_sellers: Tuple[Tuple[int, float], ...] = ()  # (seller, cp / P_M)

    @classmethod
    def from_assignment(cls, groups: GroupAssignment) -> "GroupSpec":
        return cls(tuple(groups.full_mixers), tuple(groups.pure_reserve), tuple(groups.cutoffs))

    @property
    def members(self) -> List[int]:
        return list(self.full_mixers) + list(self.pure_reserve) + [i for i, _ in self.cutoff_sellers]

    def check_partition(self, sellers: List[int], min_full: int) -> None:
        members = self.members
        if len(set(members)) != len(members):
            raise ConstructionError(f"groups overlap: {sorted(members)}")
        if sorted(members) != sorted(sellers):
            raise ConstructionError(f"groups {sorted(members)} must partition the mixing sellers {sorted(sellers)}")
        if len(self.full_mixers) < min_full:
            raise ConstructionError(f"need at least {min_full} full mixer(s), got {len(self.full_mixers)}")


@dataclass(frozen=True)
class ConstructedEquilibrium:
    profile: StrategyProfile
    analytic_profit: Tuple[float, ...]
    lowest_price: float
    family: str
    kappa: float
    reserve_residual: float
    groups: GroupSpec = field(default_factory=GroupSpec)

    @property
    def reserve_price(self) -> float:
        return self.profile.reserve_price

    def profit_per_branch(self, store_counts) -> Tuple[float, ...]:
        return tuple(pi / n for pi, n in zip(self.analytic_profit, store_counts))


# ---------------- closed forms ----------------

def lowest_price_symmetric(reserve_price: float, n: int, mu: float) -> float:
    """P_L of the n-seller symmetric game: P_M (1 - mu) / ((n - 1) mu + 1)."""
    return reserve_price * (1.0 - mu) / ((n - 1) * mu + 1.0)


def lowest_price(reserve_price: float, searcher_share: float, mu: float) -> float:
    """P_L solving P_L (mu + sigma) = P_M sigma."""
    return reserve_price * searcher_share / (searcher_share + mu)


def group_cdf(p, groups: GroupSpec, reserve_price: float, mu: float, n: int,
              searcher_share: Optional[float] = None):
    """Shared F(p) of a group structure; searcher_share defaults to (1 - mu) / n."""
    sigma = (1.0 - mu) / n if searcher_share is None else searcher_share
    try:
        cdf = GroupCdf.build(reserve_price, sigma, mu, len(groups.full_mixers),
                             tuple(frac * reserve_price for _, frac in groups.cutoff_sellers))
    except StrategyStructureError as e:
        raise ConstructionError(f"inconsistent groups: {e}")
    return cdf.evaluate(p)


# ---------------- reserve price ----------------

def solve_reserve_price(build: Callable[[float], List[PricingStrategy]], c: float, M: float,
                        closed_kappa: Optional[float] = None) -> Tuple[float, float]:
    """Reserve price P_M with min_s E[s] = P_M - c; returns (P_M, kappa).

    build(P) returns the mixing strategies of the structure at reserve price P.
    """
    kappa = closed_kappa
    if kappa is None:
        kappa = min(expected_price(s) for s in build(1.0))
    if kappa >= 1.0:
        raise ConstructionError(f"no valid reserve price: expected price ratio kappa={kappa:.6g} >= 1")
    reserve = c / (1.0 - kappa)
    if reserve > M:
        raise ConstructionError(f"reserve price {reserve:.6g} exceeds the valuation bound M={M}")
    if closed_kappa is not None:
        return reserve, kappa

    def residual(P: float) -> float:
        return min(expected_price(s) for s in build(P)) - (P - c)

    lo, hi = c, min(M, 2.0 * reserve)
    if residual(lo) * residual(hi) < 0.0:
        reserve = optimize.brentq(residual, lo, hi, xtol=1e-12 * reserve, rtol=1e-14, maxiter=200)
    return reserve, kappa


# ---------------- constructions ----------------

def _group_strategies(P: float, sigma: float, mu: float, groups: GroupSpec) -> Tuple[GroupCdf, Dict[int, PricingStrategy]]:
    try:
        cdf = GroupCdf.build(P, sigma, mu, len(groups.full_mixers),
                             tuple(frac * P for _, frac in groups.cutoff_sellers))
    except StrategyStructureError as e:
        raise ConstructionError(f"inconsistent groups: {e}")
    out: Dict[int, PricingStrategy] = {i: MixedFull(cdf) for i in groups.full_mixers}
    for i in groups.pure_reserve:
        out[i] = PurePoint(P)
    for i, frac in groups.cutoff_sellers:
        part = cdf.truncated(frac * P)
        out[i] = Cutoff(part, mass_at_top=1.0 - part.top_value, top=P)
    return cdf, out


def _mixing_group_equilibrium(config: MarketConfig, groups: GroupSpec, mixing: List[int],
                              family: str) -> ConstructedEquilibrium:
    d = derived_constants(config)
    mu = config.mu
    sigma = d.searcher_share[mixing[0]]
    groups.check_partition(mixing, min_full=2)

    def build(P: float) -> List[PricingStrategy]:
        _, strategies = _group_strategies(P, sigma, mu, groups)
        return list(strategies.values())

    closed = None
    if len(groups.full_mixers) == 2 and not groups.cutoff_sellers:
        # e = 1: E[F] / P_M = (sigma / mu) ln((sigma + mu) / sigma)
        closed = (sigma / mu) * math.log((sigma + mu) / sigma)
    reserve, kappa = solve_reserve_price(build, config.c, config.M, closed)

    _, strategies = _group_strategies(reserve, sigma, mu, groups)
    profile = StrategyProfile(
        tuple(strategies.get(i, PurePoint(reserve)) for i in range(config.n_sellers)), reserve)
    profits = tuple(reserve * share for share in d.searcher_share)
    residual = min(expected_price(strategies[i]) for i in mixing) - (reserve - config.c)
    logger.info("%s equilibrium: P_M=%.10g kappa=%.10g", family, reserve, kappa)
    return ConstructedEquilibrium(profile, profits, lowest_price(reserve, sigma, mu), family,
                                  kappa, residual, groups)


def construct_original_NE(config: MarketConfig, groups: Optional[GroupSpec] = None) -> ConstructedEquilibrium:
    """All sellers have the same store count; each earns P_M (1 - mu) / n."""
    validate(config)
    if len(set(config.store_counts)) != 1:
        raise ConstructionError(f"original model needs equal store counts, got {list(config.store_counts)}")
    sellers = list(range(config.n_sellers))
    if groups is None:
        groups = GroupSpec(full_mixers=tuple(sellers))
    return _mixing_group_equilibrium(config, groups, sellers, "original")


def construct_extended_NE(config: MarketConfig, groups: Optional[GroupSpec] = None) -> ConstructedEquilibrium:
    """Larger sellers post P_M; the smallest ones mix as in the original game with share Src_m."""
    validate(config)
    d = derived_constants(config)
    if d.smallest_count_unique:
        raise ConstructionError("the smallest store count is unique; use the unique-smallest construction")
    smallest = list(d.smallest)
    if groups is None:
        groups = GroupSpec(full_mixers=tuple(smallest))
    return _mixing_group_equilibrium(config, groups, smallest, "extended")


def construct_unique_smallest_NE(config: MarketConfig, j_groups: Optional[GroupSpec] = None) -> ConstructedEquilibrium:
    """Smallest seller m mixes with F_m, second-smallest sellers per j_groups, the rest post P_M.

    Default j_groups: the first second-smallest seller mixes, the others post P_M.
    """
    validate(config)
    d = derived_constants(config)
    if not d.smallest_count_unique:
        raise ConstructionError("unique-smallest construction needs exactly one smallest seller")
    m = d.smallest[0]
    second = list(d.second_smallest)
    src_m = d.searcher_share[m]
    src_j = d.searcher_share[second[0]]
    if not src_j > src_m:
        raise ConstructionError(f"need Src_j > Src_m, got {src_j} <= {src_m}")
    if j_groups is None:
        j_groups = GroupSpec(full_mixers=(second[0],), pure_reserve=tuple(second[1:]))
    j_groups.check_partition(second, min_full=1)
    mu = config.mu

    def strategies_at(P: float) -> Tuple[SmallestCdf, Dict[int, PricingStrategy]]:
        try:
            rivals = SecondSmallestCdf.build(P, src_m, src_j, mu, len(j_groups.full_mixers),
                                             tuple(frac * P for _, frac in j_groups.cutoff_sellers))
        except StrategyStructureError as e:
            raise ConstructionError(f"inconsistent second-smallest groups: {e}")
        f_m = SmallestCdf.build(rivals)
        out: Dict[int, PricingStrategy] = {m: MixedFull(f_m)}
        for i in j_groups.full_mixers:
            out[i] = MixedFull(rivals, mass_at_top=1.0 - rivals.top_value, top=P)
        for i in j_groups.pure_reserve:
            out[i] = PurePoint(P)
        for i, frac in j_groups.cutoff_sellers:
            part = rivals.truncated(frac * P)
            out[i] = Cutoff(part, mass_at_top=1.0 - part.top_value, top=P)
        return f_m, out

    f_m, _ = strategies_at(1.0)
    if not f_m.is_monotone(2000) or abs(f_m.top_value - 1.0) > 1e-9:
        raise ConstructionError("derived distribution of the smallest seller is not a valid CDF for these groups")

    closed = None
    if len(j_groups.full_mixers) == 1 and not j_groups.cutoff_sellers:
        closed = (src_j / mu) * math.log((src_j + mu) / src_j)
    reserve, kappa = solve_reserve_price(lambda P: list(strategies_at(P)[1].values()), config.c, config.M, closed)

    f_m, strategies = strategies_at(reserve)
    profile = StrategyProfile(
        tuple(strategies.get(i, PurePoint(reserve)) for i in range(config.n_sellers)), reserve)
    low = reserve * src_j / (mu + src_j)
    profits = tuple(low * (mu + src_m) if i == m else reserve * share
                    for i, share in enumerate(d.searcher_share))
    residual = expected_price(strategies[m]) - (reserve - config.c)
    logger.info("unique-smallest equilibrium: P_M=%.10g kappa=%.10g", reserve, kappa)
    return ConstructedEquilibrium(profile, profits, low, "unique", kappa, residual, j_groups)


def infer_family(config: MarketConfig) -> str:
    d = derived_constants(config)
    if len(set(config.store_counts)) == 1:
        return "original"
    return "unique" if d.smallest_count_unique else "extended"


def construct_equilibrium(config: MarketConfig, groups: Optional[GroupSpec] = None,
                          family: str = "auto") -> ConstructedEquilibrium:
    """Dispatches to the construction matching the store counts (or the requested family)."""
    if family == "auto":
        family = infer_family(validate(config))
    if family == "original":
        return construct_original_NE(config, groups)
    if family == "extended":
        return construct_extended_NE(config, groups)
    if family == "unique":
        return construct_unique_smallest_NE(config, groups)
    raise ConstructionError(f"unknown equilibrium family {family!r}")


# ---------------- perturbations ----------------

def _continuous_part(strategy: PricingStrategy):
    if isinstance(strategy, PurePoint) or strategy.continuous_support() is None:
        raise ConstructionError("cannot perturb a strategy without a continuous part")
    return strategy.cdf


def shift_support(profile: StrategyProfile, seller: int, factor: float) -> StrategyProfile:
    """Lifts the lower end of seller's continuous part to factor * lo and squeezes the interior
    linearly; the top of the support and the atom stay where they are."""
    strategy = profile[seller]
    cdf = _continuous_part(strategy)
    lo = cdf.lo * factor
    if not cdf.lo < lo < cdf.hi:
        raise ConstructionError(f"shift factor {factor} must move the lower end inside ({cdf.lo}, {cdf.hi})")
    stretch = (cdf.hi - cdf.lo) / (cdf.hi - lo)
    table = TabulatedCdf.from_function(lambda y: cdf.evaluate(cdf.lo + (y - lo) * stretch), lo, cdf.hi)
    return profile.replace_strategy(seller, replace(strategy, cdf=table))


def move_mass_to_top(profile: StrategyProfile, seller: int, amount: float = 0.05) -> StrategyProfile:
    """Moves `amount` of probability from the continuous part to an atom at P_M."""
    strategy = profile[seller]
    cdf = _continuous_part(strategy)
    if not (0.0 < amount <= cdf.top_value):
        raise ConstructionError(f"cannot move mass {amount} from a continuous part of {cdf.top_value}")
    scale = 1.0 - amount / cdf.top_value
    table = TabulatedCdf.from_function(lambda x: scale * np.asarray(cdf.evaluate(x)), cdf.lo, cdf.hi)
    mass = strategy.mass_at_top + (cdf.top_value - table.top_value)
    return profile.replace_strategy(seller, MixedFull(table, mass_at_top=mass, top=profile.reserve_price))
