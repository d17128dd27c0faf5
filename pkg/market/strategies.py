# market/strategies.py - Pricing strategies (pure point, full-support mixer, cutoff seller)
# and the StrategyProfile that bundles one strategy per seller with the common reserve price.
# All values are frozen; evaluation methods accept scalars or numpy arrays.

import math
from dataclasses import dataclass
from typing import ClassVar, List, Optional, Tuple, Union

import numpy as np

from .cdf import ParamCdf
from .errors import StrategyStructureError

MASS_TOLERANCE = 1e-9


def _scalar_or_array(out: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class PurePoint:
    """Charges `price` with probability 1."""
    tag: ClassVar[str] = "pure"
    price: float

    @property
    def top(self) -> float:
        return self.price

    @property
    def mass_at_top(self) -> float:
        return 1.0

    @property
    def support(self) -> Tuple[float, float]:
        return (self.price, self.price)

    def continuous_support(self) -> Optional[Tuple[float, float]]:
        return None

    def atoms(self) -> List[Tuple[float, float]]:
        return [(self.price, 1.0)]

    def prob_le(self, p):
        arr = np.asarray(p, dtype=float)
        return _scalar_or_array((arr >= self.price).astype(float), p)

    def survival(self, p):
        """P(price > p)."""
        arr = np.asarray(p, dtype=float)
        return _scalar_or_array((arr < self.price).astype(float), p)

    def mass_at(self, p: float) -> float:
        return 1.0 if p == self.price else 0.0

    def density(self, p):
        return _scalar_or_array(np.zeros_like(np.asarray(p, dtype=float)), p)

    def sample(self, u):
        return _scalar_or_array(np.full_like(np.asarray(u, dtype=float), self.price), u)

    def mean(self) -> float:
        return self.price

    def check_structure(self) -> None:
        if not (math.isfinite(self.price) and self.price > 0.0):
            raise StrategyStructureError(f"pure price must be positive and finite, got {self.price}")


@dataclass(frozen=True)
class _MixedStrategy:
    """Continuous part `cdf` on [lo, hi] plus an atom of size mass_at_top at `top`."""
    tag: ClassVar[str] = "abstract"
    cdf: ParamCdf
    mass_at_top: float = 0.0
    top: Optional[float] = None

    def __post_init__(self):
        if self.top is None:
            object.__setattr__(self, "top", float(self.cdf.hi))

    @property
    def support(self) -> Tuple[float, float]:
        upper = self.top if self.mass_at_top > 0.0 else self.cdf.hi
        lower = self.cdf.lo if self.cdf.top_value > 0.0 else self.top
        return (lower, upper)

    def continuous_support(self) -> Optional[Tuple[float, float]]:
        if self.cdf.top_value <= 0.0:
            return None
        return (self.cdf.lo, self.cdf.hi)

    def atoms(self) -> List[Tuple[float, float]]:
        return [(self.top, self.mass_at_top)] if self.mass_at_top > 0.0 else []

    def prob_le(self, p):
        arr = np.asarray(p, dtype=float)
        out = np.asarray(self.cdf.evaluate(arr), dtype=float)
        out = out + np.where(arr >= self.top, self.mass_at_top, 0.0)
        return _scalar_or_array(np.clip(out, 0.0, 1.0), p)

    def survival(self, p):
        """P(price > p); the atom at `top` counts as above every p < top."""
        arr = np.asarray(p, dtype=float)
        return _scalar_or_array(1.0 - np.asarray(self.prob_le(arr)), p)

    def mass_at(self, p: float) -> float:
        return self.mass_at_top if p == self.top else 0.0

    def density(self, p):
        return self.cdf.density(p)

    def sample(self, u):
        """Inverse-CDF draw: the atom takes the lowest mass_at_top of the unit interval."""
        arr = np.asarray(u, dtype=float)
        out = np.where(arr < self.mass_at_top, self.top,
                       self.cdf.quantile(np.clip(arr - self.mass_at_top, 0.0, None)))
        return _scalar_or_array(out, u)

    def mean(self) -> float:
        return self.cdf.partial_mean() + self.mass_at_top * self.top

    def check_structure(self) -> None:
        self.cdf.check_structure()
        if not (0.0 <= self.mass_at_top <= 1.0):
            raise StrategyStructureError(f"{self.tag} mass at top {self.mass_at_top} outside [0, 1]")
        total = self.cdf.top_value + self.mass_at_top
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise StrategyStructureError(
                f"{self.tag} strategy carries total mass {total}, expected 1 "
                f"(cdf {self.cdf.top_value} + atom {self.mass_at_top})")
        if self.mass_at_top > 0.0 and self.top < self.cdf.hi:
            raise StrategyStructureError(f"atom at {self.top} lies inside the continuous support")


@dataclass(frozen=True)
class MixedFull(_MixedStrategy):
    """Mixes over the full interval [P_L, P_M], optionally with an atom at P_M."""
    tag: ClassVar[str] = "mixed"


@dataclass(frozen=True)
class Cutoff(_MixedStrategy):
    """Mixes with the shared F up to cutoff_price, the remaining mass sits at P_M."""
    tag: ClassVar[str] = "cutoff"

    @property
    def cutoff_price(self) -> float:
        return float(self.cdf.hi)

    def check_structure(self) -> None:
        super().check_structure()
        if not (0.0 < self.mass_at_top < 1.0):
            raise StrategyStructureError(f"cutoff mass {self.mass_at_top} must lie in (0, 1)")


PricingStrategy = Union[PurePoint, MixedFull, Cutoff]


@dataclass(frozen=True)
class StrategyProfile:
    """One strategy per seller plus the searchers' common reserve price P_M."""
    strategies: Tuple[PricingStrategy, ...]
    reserve_price: float

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, i: int) -> PricingStrategy:
        return self.strategies[i]

    def atoms(self) -> List[Tuple[int, float, float]]:
        """(seller, price, mass) for every atom in the profile."""
        return [(i, price, mass) for i, s in enumerate(self.strategies) for price, mass in s.atoms()]

    def replace_strategy(self, i: int, strategy: PricingStrategy) -> "StrategyProfile":
        items = list(self.strategies)
        items[i] = strategy
        return StrategyProfile(tuple(items), self.reserve_price)


def validate_profile(profile: StrategyProfile, n_sellers: Optional[int] = None) -> StrategyProfile:
    """Structural checks only; equilibrium conditions belong to the verifier."""
    if not (math.isfinite(profile.reserve_price) and profile.reserve_price > 0.0):
        raise StrategyStructureError(f"reserve price must be positive and finite, got {profile.reserve_price}")
    if n_sellers is not None and len(profile) != n_sellers:
        raise StrategyStructureError(f"profile has {len(profile)} strategies for {n_sellers} sellers")
    for i, strategy in enumerate(profile.strategies):
        try:
            strategy.check_structure()
        except StrategyStructureError as e:
            raise StrategyStructureError(f"seller {i}: {e}")
    return profile
