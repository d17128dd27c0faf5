# market/errors.py - Exception hierarchy shared by the market model and the engine.
# Everything derives from ValueError so callers can keep catching ValueError.


class SearchModelError(ValueError):
    """Base class for every domain error raised by this package."""


class ConfigError(SearchModelError):
    """A market config (or config file) violates one of its invariants."""


class StrategyStructureError(SearchModelError):
    """A pricing strategy or profile is malformed (bad CDF, wrong seller count...)."""


class ConstructionError(SearchModelError):
    """An equilibrium family cannot be built for the given config and groups."""


class ProfitNotConstantError(SearchModelError):
    """Expected profit varies on a seller's support beyond tolerance."""


class BeliefError(SearchModelError):
    """An observation is impossible under the searcher's beliefs."""


class ProfileFormatError(SearchModelError):
    """A profile file cannot be parsed or carries an unknown schema version."""
