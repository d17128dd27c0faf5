# market/profiles.py - Versioned JSON profile files.
# A profile document stores the reserve price, the store counts it was built for and one
# entry per seller; closed-form CDFs are stored by family + parameters, never as samples.

import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

from .cdf import cdf_from_document, cdf_to_document
from .errors import ProfileFormatError, SearchModelError
from .strategies import Cutoff, MixedFull, PricingStrategy, PurePoint, StrategyProfile, validate_profile

logger = logging.getLogger(__name__)

PROFILE_SCHEMA_VERSION = 1


def strategy_to_document(strategy: PricingStrategy) -> Dict[str, Any]:
    if isinstance(strategy, PurePoint):
        return {"tag": strategy.tag, "price": strategy.price}
    doc: Dict[str, Any] = {
        "tag": strategy.tag,
        "cdf": cdf_to_document(strategy.cdf),
        "mass_at_top": strategy.mass_at_top,
        "top": strategy.top,
    }
    if isinstance(strategy, Cutoff):
        doc["cutoff_price"] = strategy.cutoff_price
    return doc


def strategy_from_document(doc: Dict[str, Any]) -> PricingStrategy:
    tag = doc.get("tag")
    if tag == PurePoint.tag:
        return PurePoint(float(doc["price"]))
    if tag not in (MixedFull.tag, Cutoff.tag):
        raise ProfileFormatError(f"unknown strategy tag {tag!r}")
    cdf = cdf_from_document(doc["cdf"])
    cls = MixedFull if tag == MixedFull.tag else Cutoff
    if tag == Cutoff.tag and "cutoff_price" in doc and float(doc["cutoff_price"]) != cdf.hi:
        cdf = cdf.truncated(float(doc["cutoff_price"]))
    return cls(cdf=cdf, mass_at_top=float(doc.get("mass_at_top", 0.0)), top=doc.get("top"))


def profile_to_document(profile: StrategyProfile, store_counts: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    return {
        "schema_version": PROFILE_SCHEMA_VERSION,
        "reserve_price": profile.reserve_price,
        "store_counts": list(store_counts) if store_counts is not None else None,
        "sellers": [strategy_to_document(s) for s in profile.strategies],
    }


def profile_from_document(doc: Dict[str, Any]) -> StrategyProfile:
    version = doc.get("schema_version")
    if version != PROFILE_SCHEMA_VERSION:
        raise ProfileFormatError(f"unsupported profile schema_version {version!r}")
    try:
        sellers: List[PricingStrategy] = [strategy_from_document(s) for s in doc["sellers"]]
        profile = validate_profile(StrategyProfile(tuple(sellers), float(doc["reserve_price"])))
    except (KeyError, TypeError) as e:
        raise ProfileFormatError(f"malformed profile document: missing or bad field {e}")
    except SearchModelError as e:
        raise ProfileFormatError(f"malformed profile document: {e}")
    return profile


def save_profile(profile: StrategyProfile, path: str, store_counts: Optional[Sequence[int]] = None) -> str:
    """Writes the profile as JSON and returns the path."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(profile_to_document(profile, store_counts), f, indent=2)
    logger.info("profile saved to %s", path)
    return path


def _read_document(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ProfileFormatError(f"cannot read profile file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ProfileFormatError(f"profile file {path} is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise ProfileFormatError(f"profile file {path} must hold a JSON object")
    return doc


def load_profile(path: str) -> StrategyProfile:
    return profile_from_document(_read_document(path))


def load_profile_store_counts(path: str) -> Optional[List[int]]:
    """The store counts a profile file was written for, if recorded."""
    counts = _read_document(path).get("store_counts")
    if not counts:
        return None
    try:
        return [int(n) for n in counts]
    except (TypeError, ValueError):
        raise ProfileFormatError(f"profile file {path} has malformed store_counts {counts!r}")


def check_store_counts(path: str, store_counts: Sequence[int]) -> None:
    """Raises ProfileFormatError when the file was written for a different market."""
    recorded = load_profile_store_counts(path)
    if recorded is not None and recorded != list(store_counts):
        raise ProfileFormatError(
            f"profile {path} was written for store counts {recorded}, config has {list(store_counts)}")
