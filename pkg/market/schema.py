# market/schema.py - Central definition of the market primitives.
# MarketConfig holds store counts, shopper fraction, search cost and valuation bound.
# DerivedConstants holds the searcher shares Src_i = (1 - mu) * n_i / N every module reads.
# load_config() parses the key=value config files with python-dotenv.

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from dotenv import dotenv_values

from .errors import ConfigError

CONFIG_SCHEMA_VERSION = 1

# keys a config file may carry; anything else is rejected
CONFIG_KEYS = {
    "schema_version", "store_counts", "mu", "c", "M", "family",
    "full_mixers", "pure_reserve", "cutoffs",
    "tol_deviation", "tol_profit", "grid",
}


@dataclass(frozen=True)
class MarketConfig:
    """Sellers' store counts, shopper fraction mu, search cost c and valuation bound M."""
    store_counts: Tuple[int, ...]
    shopper_fraction: float
    search_cost: float
    valuation_bound: float

    def __post_init__(self):
        # accept lists from callers, store an immutable tuple
        object.__setattr__(self, "store_counts", tuple(int(n) for n in self.store_counts))

    @property
    def n_sellers(self) -> int:
        return len(self.store_counts)

    @property
    def total_stores(self) -> int:
        return sum(self.store_counts)

    @property
    def mu(self) -> float:
        return self.shopper_fraction

    @property
    def c(self) -> float:
        return self.search_cost

    @property
    def M(self) -> float:
        return self.valuation_bound

    def with_search_cost(self, c: float) -> "MarketConfig":
        return MarketConfig(self.store_counts, self.shopper_fraction, c, self.valuation_bound)


@dataclass(frozen=True)
class DerivedConstants:
    """Searcher share per seller plus the smallest / second-smallest index sets."""
    searcher_share: Tuple[float, ...]
    total_stores: int
    smallest: Tuple[int, ...]
    second_smallest: Tuple[int, ...]

    @property
    def smallest_count_unique(self) -> bool:
        return len(self.smallest) == 1


def validate(config: MarketConfig) -> MarketConfig:
    """Returns the config unchanged, or raises ConfigError naming the first broken invariant."""
    if len(config.store_counts) < 2:
        raise ConfigError(f"fewer than 2 sellers: store_counts={list(config.store_counts)}")
    for i, n in enumerate(config.store_counts):
        if n < 1:
            raise ConfigError(f"seller {i} has nonpositive store count {n}")
    mu = config.shopper_fraction
    if not (0.0 < mu < 1.0) or not math.isfinite(mu):
        raise ConfigError(f"shopper fraction mu={mu} not in (0, 1)")
    if not (config.search_cost > 0.0) or not math.isfinite(config.search_cost):
        raise ConfigError(f"search cost c={config.search_cost} must be positive")
    if not math.isfinite(config.valuation_bound):
        raise ConfigError("valuation bound M must be finite")
    if config.valuation_bound <= config.search_cost:
        raise ConfigError(f"valuation bound M={config.valuation_bound} must exceed c={config.search_cost}")
    return config


def derived_constants(config: MarketConfig) -> DerivedConstants:
    """Src_i = (1 - mu) * n_i / N, with the smallest and second-smallest sellers."""
    counts = config.store_counts
    total = sum(counts)
    share = tuple((1.0 - config.shopper_fraction) * n / total for n in counts)

    n_m = min(counts)
    smallest = tuple(i for i, n in enumerate(counts) if n == n_m)
    larger = [n for n in counts if n > n_m]
    if larger:
        n_j = min(larger)
        second = tuple(i for i, n in enumerate(counts) if n == n_j)
    else:
        second = ()
    return DerivedConstants(share, total, smallest, second)


# ---------------- config files ----------------

@dataclass(frozen=True)
class GroupAssignment:
    """Group assignment as read from a config file (0-based seller indices)."""
    full_mixers: Tuple[int, ...] = ()
    pure_reserve: Tuple[int, ...] = ()
    cutoffs: Tuple[Tuple[int, float], ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.full_mixers or self.pure_reserve or self.cutoffs)


@dataclass(frozen=True)
class ConfigFile:
    """Everything a config file can carry: the market, the family, groups and overrides."""
    market: MarketConfig
    family: str = "auto"
    groups: GroupAssignment = field(default_factory=GroupAssignment)
    overrides: Dict[str, float] = field(default_factory=dict)


def _int_list(raw: str, key: str) -> Tuple[int, ...]:
    try:
        return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of integers, got {raw!r}")


def _float(raw: Optional[str], key: str) -> float:
    if raw is None or raw == "":
        raise ConfigError(f"missing required key {key!r}")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}")


def _cutoff_list(raw: str) -> Tuple[Tuple[int, float], ...]:
    out: List[Tuple[int, float]] = []
    for item in raw.replace(" ", "").split(","):
        if not item:
            continue
        try:
            idx, frac = item.split(":")
            out.append((int(idx), float(frac)))
        except ValueError:
            raise ConfigError(f"cutoffs entries must look like 'index:fraction', got {item!r}")
    return tuple(out)


def parse_config(values: Dict[str, Optional[str]]) -> ConfigFile:
    """Builds a ConfigFile from already-parsed key/value pairs."""
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    version = values.get("schema_version")
    if version not in (None, "") and int(_float(version, "schema_version")) != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version}")

    if not values.get("store_counts"):
        raise ConfigError("missing required key 'store_counts'")
    market = MarketConfig(
        store_counts=_int_list(values["store_counts"], "store_counts"),
        shopper_fraction=_float(values.get("mu"), "mu"),
        search_cost=_float(values.get("c"), "c"),
        valuation_bound=_float(values.get("M"), "M"),
    )
    validate(market)

    family = (values.get("family") or "auto").strip().lower()
    if family not in ("auto", "original", "extended", "unique"):
        raise ConfigError(f"unknown equilibrium family {family!r}")

    groups = GroupAssignment(
        full_mixers=_int_list(values.get("full_mixers") or "", "full_mixers"),
        pure_reserve=_int_list(values.get("pure_reserve") or "", "pure_reserve"),
        cutoffs=_cutoff_list(values.get("cutoffs") or ""),
    )

    overrides: Dict[str, float] = {}
    for key in ("tol_deviation", "tol_profit", "grid"):
        if values.get(key):
            overrides[key] = _float(values[key], key)

    return ConfigFile(market=market, family=family, groups=groups, overrides=overrides)


def load_config(path: str) -> ConfigFile:
    """Reads a key=value config file (same syntax as a .env file)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = dotenv_values(stream=f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    return parse_config(dict(values))
