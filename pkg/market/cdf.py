# market/cdf.py - Parametric distribution functions used by equilibrium strategies.
#
# Families:
#   group            shared F of the full mixers / cutoff sellers (symmetric group form)
#   second_smallest  F_j of the second-smallest sellers when the smallest seller is unique
#   smallest         F_m of the unique smallest seller
#   tabulated        piecewise-linear CDF on a grid of knots (arbitrary candidate profiles)
#
# Every family is an immutable value evaluable on numpy arrays. Prices below lo map to 0,
# prices above hi map to F(hi); mass above F(hi) belongs to the strategy, not the CDF.
#
# Derivation of the group form. A seller still mixing at price p wins the shoppers when every
# rival is above p. Rivals are: the other o-1 full mixers and the cutoff sellers whose cutoff is
# at or above p (each above p w.p. 1 - F(p)), the cutoff sellers already past their cutoff
# (each above p w.p. exactly its mass a_k at the reserve price) and the pure reserve sellers
# (always above p). Profit equality with the reserve price then reads
#     p * [sigma + mu * (1 - F)^e(p) * A(p)] = P_M * sigma,
#     e(p) = (o - 1) + #{cutoffs >= p},   A(p) = prod_{cp_k < p} a_k,   a_k = 1 - F(cp_k).
# Continuity at every cutoff follows from a_k = 1 - F(cp_k).

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, ClassVar, Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from .errors import StrategyStructureError

DEFAULT_TABLE_KNOTS = 4096
_BISECT_STEPS = 80
_DIFF_STEP = 1e-7


def _scalar_or_array(out: np.ndarray, like: Any):
    if np.ndim(like) == 0:
        return float(out)
    return out


def _prefix_products(masses: Tuple[float, ...]) -> np.ndarray:
    return np.concatenate(([1.0], np.cumprod(np.asarray(masses, dtype=float))))


@dataclass(frozen=True)
class ParamCdf:
    """Base class: a nondecreasing CDF on the support [lo, hi]."""
    family: ClassVar[str] = "abstract"
    lo: float
    hi: float

    # -------- to implement --------

    def _raw(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_params(self) -> Dict[str, Any]:
        raise NotImplementedError

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "ParamCdf":
        raise NotImplementedError

    # -------- generic behaviour --------

    def breakpoints(self) -> Tuple[float, ...]:
        """Interior prices where the CDF has a kink."""
        return ()

    def evaluate(self, p):
        arr = np.asarray(p, dtype=float)
        inside = np.clip(arr, self.lo, self.hi)
        out = np.where(arr < self.lo, 0.0, self._raw(inside))
        return _scalar_or_array(np.clip(out, 0.0, 1.0), p)

    __call__ = evaluate

    @cached_property
    def top_value(self) -> float:
        """F(hi); the strategy's mass above hi is 1 - top_value."""
        return float(np.clip(self._raw(np.asarray([self.hi]))[0], 0.0, 1.0))

    def density(self, p):
        """Central-difference density; closed-form families override it."""
        arr = np.asarray(p, dtype=float)
        h = _DIFF_STEP * max(1.0, abs(self.hi))
        left = np.clip(arr - h, self.lo, self.hi)
        right = np.clip(arr + h, self.lo, self.hi)
        width = np.where(right > left, right - left, 1.0)
        out = (self.evaluate(right) - self.evaluate(left)) / width
        out = np.where((arr < self.lo) | (arr > self.hi), 0.0, out)
        return _scalar_or_array(out, p)

    def quantile(self, u):
        """Smallest p with F(p) >= u, by vectorized bisection (u clipped to [0, F(hi)])."""
        target = np.clip(np.asarray(u, dtype=float), 0.0, self.top_value)
        lo = np.full_like(target, self.lo, dtype=float)
        hi = np.full_like(target, self.hi, dtype=float)
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            below = self._raw(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return _scalar_or_array(0.5 * (lo + hi), u)

    def partial_mean(self) -> float:
        """Integral of p dF(p) over [lo, hi] (the continuous part of the expectation)."""
        closed = self._closed_partial_mean()
        if closed is not None:
            return closed
        # integration by parts: hi * F(hi) - int F
        points = [b for b in self.breakpoints() if self.lo < b < self.hi]
        area, _ = integrate.quad(lambda x: float(self._raw(np.asarray([x]))[0]), self.lo, self.hi,
                                 points=points or None, epsabs=1e-12, epsrel=1e-12, limit=400)
        return self.hi * self.top_value - area

    def _closed_partial_mean(self) -> Optional[float]:
        return None

    def truncated(self, hi: float) -> "ParamCdf":
        """Same function restricted to [lo, hi] (used for cutoff strategies)."""
        if not (self.lo <= hi <= self.hi):
            raise StrategyStructureError(f"truncation point {hi} outside support [{self.lo}, {self.hi}]")
        return replace(self, hi=float(hi))

    def is_monotone(self, grid: int = 1000) -> bool:
        values = self.evaluate(np.linspace(self.lo, self.hi, grid))
        return bool(np.all(np.diff(values) >= -1e-12))

    def check_structure(self) -> None:
        """Raises StrategyStructureError unless the CDF is a proper (sub-)distribution."""
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi < self.lo:
            raise StrategyStructureError(f"{self.family} cdf has bad support [{self.lo}, {self.hi}]")
        if self.lo <= 0.0:
            raise StrategyStructureError(f"{self.family} cdf support must be positive, lo={self.lo}")
        start = float(self._raw(np.asarray([self.lo]))[0])
        if abs(start) > 1e-9:
            raise StrategyStructureError(f"{self.family} cdf is {start} at its left end, expected 0")
        if not self.is_monotone():
            raise StrategyStructureError(f"{self.family} cdf is not monotone on [{self.lo}, {self.hi}]")


# ---------------- symmetric group form ----------------

@dataclass(frozen=True)
class GroupCdf(ParamCdf):
    """Shared F of o full mixers and the cutoff sellers (original model or mixing subgame)."""
    family: ClassVar[str] = "group"
    reserve_price: float = 1.0
    searcher_share: float = 0.5
    shopper_fraction: float = 0.5
    full_mixers: int = 2
    cutoffs: Tuple[float, ...] = ()
    masses: Tuple[float, ...] = ()

    @classmethod
    def build(cls, reserve_price: float, searcher_share: float, shopper_fraction: float,
              full_mixers: int, cutoffs: Tuple[float, ...] = ()) -> "GroupCdf":
        if full_mixers < 2:
            raise StrategyStructureError(f"group form needs at least 2 full mixers, got {full_mixers}")
        lo = reserve_price * searcher_share / (searcher_share + shopper_fraction)
        ordered = tuple(sorted(float(cp) for cp in cutoffs))
        for cp in ordered:
            if not (lo < cp < reserve_price):
                raise StrategyStructureError(
                    f"cutoff price {cp} outside ({lo}, {reserve_price})")
        cdf = cls(lo=lo, hi=reserve_price, reserve_price=reserve_price, searcher_share=searcher_share,
                  shopper_fraction=shopper_fraction, full_mixers=int(full_mixers), cutoffs=ordered)
        # masses are filled in cutoff order; each one only needs the earlier ones
        masses: list = []
        for cp in ordered:
            partial = replace(cdf, masses=tuple(masses))
            masses.append(1.0 - float(partial._raw(np.asarray([cp]))[0]))
        return replace(cdf, masses=tuple(masses))

    def _pieces(self, p: np.ndarray):
        k = np.searchsorted(np.asarray(self.cutoffs, dtype=float), p, side="left")
        g = len(self.cutoffs)
        exponent = (self.full_mixers - 1) + (g - k)
        prefix = _prefix_products(self.masses)
        # masses not yet computed (during build) count as 1
        prefix = np.concatenate((prefix, np.ones(g + 1 - len(prefix))))
        return exponent, prefix[k]

    def _ratio(self, p: np.ndarray) -> np.ndarray:
        return (self.searcher_share / self.shopper_fraction) * (self.reserve_price / p - 1.0)

    def _raw(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        exponent, prod = self._pieces(p)
        x = np.clip(self._ratio(p), 0.0, None)
        return 1.0 - np.power(np.clip(x / prod, 0.0, 1.0), 1.0 / exponent)

    def density(self, p):
        arr = np.asarray(p, dtype=float)
        exponent, prod = self._pieces(arr)
        x = self._ratio(np.clip(arr, self.lo, self.hi))
        safe = np.where(x > 0.0, x / prod, 1.0)
        slope = (self.searcher_share / self.shopper_fraction) * self.reserve_price / (arr * arr * prod)
        out = np.power(safe, 1.0 / exponent - 1.0) * slope / exponent
        out = np.where((arr < self.lo) | (arr > self.hi) | (x <= 0.0), 0.0, out)
        return _scalar_or_array(out, p)

    def quantile(self, u):
        target = np.clip(np.asarray(u, dtype=float), 0.0, self.top_value)
        f_at_cut = 1.0 - np.asarray(self.masses, dtype=float)
        k = np.searchsorted(f_at_cut, target, side="left")
        exponent = (self.full_mixers - 1) + (len(self.cutoffs) - k)
        prod = _prefix_products(self.masses)[k]
        x = np.power(1.0 - target, exponent) * prod
        out = self.reserve_price / (1.0 + (self.shopper_fraction / self.searcher_share) * x)
        return _scalar_or_array(np.clip(out, self.lo, self.hi), u)

    def breakpoints(self) -> Tuple[float, ...]:
        return self.cutoffs

    def _closed_partial_mean(self) -> Optional[float]:
        # e = 1 everywhere: f = (sigma / mu) P_M / p^2, so int p f = (sigma / mu) P_M ln(hi / lo)
        if self.full_mixers == 2 and not self.cutoffs:
            return (self.searcher_share / self.shopper_fraction) * self.reserve_price * math.log(self.hi / self.lo)
        return None

    def to_params(self) -> Dict[str, Any]:
        return {
            "reserve_price": self.reserve_price,
            "searcher_share": self.searcher_share,
            "shopper_fraction": self.shopper_fraction,
            "full_mixers": self.full_mixers,
            "cutoffs": list(self.cutoffs),
            "hi": self.hi,
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "GroupCdf":
        cdf = cls.build(float(params["reserve_price"]), float(params["searcher_share"]),
                        float(params["shopper_fraction"]), int(params["full_mixers"]),
                        tuple(params.get("cutoffs", ())))
        hi = float(params.get("hi", cdf.hi))
        return cdf if hi == cdf.hi else cdf.truncated(hi)


# ---------------- unique smallest seller ----------------

@dataclass(frozen=True)
class SecondSmallestCdf(ParamCdf):
    """F_j of the second-smallest mixers; the smallest seller is indifferent against it.

    With G(p) = (P_L (mu + Src_m) / p - Src_m) / mu the probability that every
    second-smallest seller is above p, and e(p), A(p) counted as in the group form
    (the smallest seller faces all of them, so no "-1"): (1 - F_j)^e * A = G.
    """
    family: ClassVar[str] = "second_smallest"
    reserve_price: float = 1.0
    src_small: float = 0.1
    src_second: float = 0.2
    shopper_fraction: float = 0.5
    full_mixers: int = 1
    cutoffs: Tuple[float, ...] = ()
    masses: Tuple[float, ...] = ()

    @classmethod
    def build(cls, reserve_price: float, src_small: float, src_second: float, shopper_fraction: float,
              full_mixers: int = 1, cutoffs: Tuple[float, ...] = ()) -> "SecondSmallestCdf":
        if full_mixers < 1:
            raise StrategyStructureError("at least one second-smallest seller must mix over the full support")
        if not src_second > src_small:
            raise StrategyStructureError(f"need Src_j > Src_m, got {src_second} <= {src_small}")
        lo = reserve_price * src_second / (shopper_fraction + src_second)
        ordered = tuple(sorted(float(cp) for cp in cutoffs))
        for cp in ordered:
            if not (lo < cp < reserve_price):
                raise StrategyStructureError(f"cutoff price {cp} outside ({lo}, {reserve_price})")
        cdf = cls(lo=lo, hi=reserve_price, reserve_price=reserve_price, src_small=src_small,
                  src_second=src_second, shopper_fraction=shopper_fraction,
                  full_mixers=int(full_mixers), cutoffs=ordered)
        masses: list = []
        for cp in ordered:
            partial = replace(cdf, masses=tuple(masses))
            masses.append(1.0 - float(partial._raw(np.asarray([cp]))[0]))
        return replace(cdf, masses=tuple(masses))

    @property
    def lowest_price(self) -> float:
        return self.reserve_price * self.src_second / (self.shopper_fraction + self.src_second)

    def all_above(self, p) -> np.ndarray:
        """G(p): probability that every second-smallest seller prices above p."""
        p = np.asarray(p, dtype=float)
        mu, src_m = self.shopper_fraction, self.src_small
        return (self.lowest_price * (mu + src_m) / p - src_m) / mu

    def _pieces(self, p: np.ndarray):
        k = np.searchsorted(np.asarray(self.cutoffs, dtype=float), p, side="left")
        g = len(self.cutoffs)
        exponent = self.full_mixers + (g - k)
        prefix = _prefix_products(self.masses)
        prefix = np.concatenate((prefix, np.ones(g + 1 - len(prefix))))
        return exponent, prefix[k]

    def _raw(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        exponent, prod = self._pieces(p)
        g = np.clip(self.all_above(p), 0.0, None)
        return 1.0 - np.power(np.clip(g / prod, 0.0, 1.0), 1.0 / exponent)

    def density(self, p):
        arr = np.asarray(p, dtype=float)
        exponent, prod = self._pieces(arr)
        g = self.all_above(np.clip(arr, self.lo, self.hi)) / prod
        slope = self.lowest_price * (self.shopper_fraction + self.src_small) / (
            self.shopper_fraction * arr * arr * prod)
        out = np.power(np.clip(g, 1e-300, None), 1.0 / exponent - 1.0) * slope / exponent
        out = np.where((arr < self.lo) | (arr > self.hi), 0.0, out)
        return _scalar_or_array(out, p)

    def quantile(self, u):
        target = np.clip(np.asarray(u, dtype=float), 0.0, self.top_value)
        f_at_cut = 1.0 - np.asarray(self.masses, dtype=float)
        k = np.searchsorted(f_at_cut, target, side="left")
        exponent = self.full_mixers + (len(self.cutoffs) - k)
        g = np.power(1.0 - target, exponent) * _prefix_products(self.masses)[k]
        mu, src_m = self.shopper_fraction, self.src_small
        out = self.lowest_price * (mu + src_m) / (mu * g + src_m)
        return _scalar_or_array(np.clip(out, self.lo, self.hi), u)

    def breakpoints(self) -> Tuple[float, ...]:
        return self.cutoffs

    def to_params(self) -> Dict[str, Any]:
        return {
            "reserve_price": self.reserve_price,
            "src_small": self.src_small,
            "src_second": self.src_second,
            "shopper_fraction": self.shopper_fraction,
            "full_mixers": self.full_mixers,
            "cutoffs": list(self.cutoffs),
            "hi": self.hi,
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "SecondSmallestCdf":
        cdf = cls.build(float(params["reserve_price"]), float(params["src_small"]),
                        float(params["src_second"]), float(params["shopper_fraction"]),
                        int(params.get("full_mixers", 1)), tuple(params.get("cutoffs", ())))
        hi = float(params.get("hi", cdf.hi))
        return cdf if hi == cdf.hi else cdf.truncated(hi)


@dataclass(frozen=True)
class SmallestCdf(ParamCdf):
    """F_m of the unique smallest seller, making every second-smallest mixer indifferent.

    1 - F_m(p) = Src_j (P_M / p - 1) (1 - F_j(p)) / (mu G(p)); with a single
    second-smallest mixer this is 1 - (Src_j / mu)(P_M / p - 1).
    """
    family: ClassVar[str] = "smallest"
    rivals: SecondSmallestCdf = field(default_factory=lambda: SecondSmallestCdf.build(1.0, 0.1, 0.2, 0.5))

    @classmethod
    def build(cls, rivals: SecondSmallestCdf) -> "SmallestCdf":
        return cls(lo=rivals.lo, hi=rivals.reserve_price, rivals=rivals)

    @property
    def _simple(self) -> bool:
        return self.rivals.full_mixers == 1 and not self.rivals.cutoffs

    def _raw(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        r = self.rivals
        base = (r.src_second / r.shopper_fraction) * (r.reserve_price / p - 1.0)
        if self._simple:
            return 1.0 - base
        own_factor = (1.0 - r._raw(p)) / r.all_above(p)
        return 1.0 - base * own_factor

    def density(self, p):
        if not self._simple:
            return super().density(p)
        arr = np.asarray(p, dtype=float)
        r = self.rivals
        out = (r.src_second / r.shopper_fraction) * r.reserve_price / (arr * arr)
        out = np.where((arr < self.lo) | (arr > self.hi), 0.0, out)
        return _scalar_or_array(out, p)

    def quantile(self, u):
        if not self._simple:
            return super().quantile(u)
        r = self.rivals
        target = np.clip(np.asarray(u, dtype=float), 0.0, self.top_value)
        out = r.reserve_price / (1.0 + r.shopper_fraction * (1.0 - target) / r.src_second)
        return _scalar_or_array(np.clip(out, self.lo, self.hi), u)

    def breakpoints(self) -> Tuple[float, ...]:
        return self.rivals.cutoffs

    def _closed_partial_mean(self) -> Optional[float]:
        if self._simple and self.hi == self.rivals.reserve_price:
            r = self.rivals
            return (r.src_second / r.shopper_fraction) * r.reserve_price * math.log(self.hi / self.lo)
        return None

    def to_params(self) -> Dict[str, Any]:
        return {"rivals": self.rivals.to_params(), "hi": self.hi}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "SmallestCdf":
        cdf = cls.build(SecondSmallestCdf.from_params(params["rivals"]))
        hi = float(params.get("hi", cdf.hi))
        return cdf if hi == cdf.hi else cdf.truncated(hi)


# ---------------- tabulated fallback ----------------

@dataclass(frozen=True)
class TabulatedCdf(ParamCdf):
    """Piecewise-linear CDF through (knots, values)."""
    family: ClassVar[str] = "tabulated"
    knots: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    @classmethod
    def from_points(cls, knots, values) -> "TabulatedCdf":
        knots = tuple(float(x) for x in knots)
        values = tuple(float(v) for v in values)
        if len(knots) < 2 or len(knots) != len(values):
            raise StrategyStructureError("tabulated cdf needs at least 2 knots and one value per knot")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise StrategyStructureError("tabulated cdf knots must be strictly increasing")
        return cls(lo=knots[0], hi=knots[-1], knots=knots, values=values)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "TabulatedCdf":
        return cls.from_points((lo, hi), (0.0, 1.0))

    @classmethod
    def from_function(cls, fn, lo: float, hi: float, n_knots: int = DEFAULT_TABLE_KNOTS) -> "TabulatedCdf":
        """Samples fn on n_knots evenly spaced points of [lo, hi]."""
        grid = np.linspace(lo, hi, int(n_knots))
        vals = np.maximum.accumulate(np.clip(np.asarray(fn(grid), dtype=float), 0.0, 1.0))
        return cls.from_points(grid, vals)

    def _raw(self, p: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(p, dtype=float), self.knots, self.values)

    def density(self, p):
        arr = np.asarray(p, dtype=float)
        knots = np.asarray(self.knots)
        slopes = np.diff(self.values) / np.diff(knots)
        idx = np.clip(np.searchsorted(knots, arr, side="right") - 1, 0, len(slopes) - 1)
        out = np.where((arr < self.lo) | (arr > self.hi), 0.0, slopes[idx])
        return _scalar_or_array(out, p)

    def quantile(self, u):
        target = np.clip(np.asarray(u, dtype=float), 0.0, self.top_value)
        values = np.asarray(self.values)
        knots = np.asarray(self.knots)
        # first segment whose right value reaches the target, then invert it linearly
        idx = np.clip(np.searchsorted(values, target, side="left"), 1, len(values) - 1)
        v0, v1 = values[idx - 1], values[idx]
        x0, x1 = knots[idx - 1], knots[idx]
        frac = np.where(v1 > v0, (target - v0) / np.where(v1 > v0, v1 - v0, 1.0), 0.0)
        out = np.where(target <= values[0], self.lo, x0 + frac * (x1 - x0))
        return _scalar_or_array(out, u)

    def breakpoints(self) -> Tuple[float, ...]:
        return self.knots[1:-1]

    def _closed_partial_mean(self) -> Optional[float]:
        knots = np.asarray(self.knots)
        upto = knots <= self.hi
        k = knots[upto]
        v = np.asarray(self.values)[upto]
        return float(np.sum(np.diff(v) * 0.5 * (k[1:] + k[:-1])))

    def truncated(self, hi: float) -> "TabulatedCdf":
        if not (self.lo < hi <= self.hi):
            raise StrategyStructureError(f"truncation point {hi} outside support [{self.lo}, {self.hi}]")
        knots = np.asarray(self.knots)
        keep = knots < hi
        new_knots = np.append(knots[keep], hi)
        return TabulatedCdf.from_points(new_knots, self._raw(new_knots))

    def to_params(self) -> Dict[str, Any]:
        return {"knots": list(self.knots), "values": list(self.values)}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "TabulatedCdf":
        return cls.from_points(params["knots"], params["values"])


CDF_FAMILIES = {
    GroupCdf.family: GroupCdf,
    SecondSmallestCdf.family: SecondSmallestCdf,
    SmallestCdf.family: SmallestCdf,
    TabulatedCdf.family: TabulatedCdf,
}


def cdf_from_document(doc: Dict[str, Any]) -> ParamCdf:
    """Rebuilds a ParamCdf from its {family, params} document."""
    family = doc.get("family")
    if family not in CDF_FAMILIES:
        raise StrategyStructureError(f"unknown cdf family {family!r}")
    return CDF_FAMILIES[family].from_params(doc.get("params", {}))


def cdf_to_document(cdf: ParamCdf) -> Dict[str, Any]:
    return {"family": cdf.family, "params": cdf.to_params(), "support": [cdf.lo, cdf.hi]}
