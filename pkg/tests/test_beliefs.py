# tests/test_beliefs.py - Posterior, continuation price, stopping rule and reserve rationality.

import numpy as np
import pytest

from engine.beliefs import (BeliefState, continuation_price, posterior, reserve_price_rational,
                            should_continue)
from market.cdf import TabulatedCdf
from market.errors import BeliefError
from market.schema import MarketConfig
from market.strategies import MixedFull, PurePoint, StrategyProfile

WIDE = MixedFull(TabulatedCdf.uniform(1.0, 9.0))
NARROW = MixedFull(TabulatedCdf.uniform(5.0, 9.0))
SEVEN = PurePoint(7.0)
EPS = 1e-6


@pytest.fixture
def example_beliefs():
    return BeliefState(((WIDE, 1), (NARROW, 1), (SEVEN, 1)))


class TestPosterior:
    def test_atom_observation_is_certain(self, example_beliefs) -> None:
        post = posterior(7.0, example_beliefs)
        assert post == [(SEVEN, 1.0)]

    def test_density_observation(self, example_beliefs) -> None:
        post = dict(posterior(7.0 + EPS, example_beliefs))
        assert post[WIDE] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert post[NARROW] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert SEVEN not in post
        assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)

    def test_single_strategy(self) -> None:
        beliefs = BeliefState(((WIDE, 4),))
        assert posterior(3.0, beliefs) == [(WIDE, 1.0)]

    def test_off_belief_price(self, example_beliefs) -> None:
        with pytest.raises(BeliefError):
            posterior(0.5, example_beliefs)


class TestContinuation:
    def test_after_observing_seven(self, example_beliefs) -> None:
        assert continuation_price(7.0, example_beliefs) == pytest.approx(6.0, abs=1e-12)

    def test_after_observing_just_above_seven(self, example_beliefs) -> None:
        assert continuation_price(7.0 + EPS, example_beliefs) == pytest.approx(19.0 / 3.0, abs=1e-12)

    def test_homogeneous_beliefs(self) -> None:
        beliefs = BeliefState(((PurePoint(4.0), 3),))
        assert continuation_price(4.0, beliefs) == pytest.approx(4.0)

    def test_within_range_of_expected_prices(self, example_beliefs) -> None:
        for p in np.linspace(1.5, 8.5, 29):
            value = continuation_price(float(p), example_beliefs)
            assert 5.0 - 1e-12 <= value <= 7.0 + 1e-12

    def test_no_store_left(self) -> None:
        with pytest.raises(BeliefError):
            continuation_price(4.0, BeliefState(((PurePoint(4.0), 1),)))

    def test_without_decrements_identified_strategy(self, example_beliefs) -> None:
        rest = example_beliefs.without(SEVEN)
        assert rest.total == 2
        assert continuation_price(3.0, rest) == pytest.approx(7.0)


class TestStoppingRule:
    def test_continue_after_seven(self, example_beliefs) -> None:
        assert should_continue(7.0, example_beliefs, 0.9, 2)

    def test_stop_just_above_seven(self, example_beliefs) -> None:
        assert not should_continue(7.0 + EPS, example_beliefs, 0.9, 2)

    def test_price_below_search_cost(self, example_beliefs) -> None:
        assert not should_continue(0.45, example_beliefs, 0.9, 2)

    def test_no_stores_left(self, example_beliefs) -> None:
        assert not should_continue(7.0, example_beliefs, 0.9, 0)

    def test_indifference_stops(self) -> None:
        beliefs = BeliefState(((PurePoint(4.0), 2), (PurePoint(5.0), 1)))
        # after seeing 5 the next store is expected at 4, saving exactly c = 1
        assert not should_continue(5.0, beliefs, 1.0, 2)
        assert should_continue(5.0, beliefs, 0.99, 2)


class TestTruthfulBeliefs:
    def test_identical_strategies_are_merged(self, three_eq) -> None:
        beliefs = BeliefState.truthful(three_eq.profile)
        counts = sorted(n for _, n in beliefs.entries)
        assert counts == [1, 2]
        assert beliefs.total == 3

    def test_counts_stores(self, chain_eq, chain_config) -> None:
        beliefs = BeliefState.truthful(chain_eq.profile, chain_config.store_counts)
        assert beliefs.total == 5


class TestReserveRationality:
    def test_three_sellers(self, three_eq, three_config) -> None:
        report = reserve_price_rational(three_eq.profile, three_config)
        assert report.passed
        assert report.sufficient_passed
        assert report.margins[1] == pytest.approx(0.0, abs=1e-8)
        assert report.margins[2] == pytest.approx(0.0, abs=1e-8)
        assert report.margins[0] == pytest.approx(three_config.c)

    @pytest.mark.parametrize("name", ["three", "chain", "unique"])
    def test_no_search_past_observable_prices(self, request, name) -> None:
        eq = request.getfixturevalue(f"{name}_eq")
        config = request.getfixturevalue(f"{name}_config")
        report = reserve_price_rational(eq.profile, config)
        assert report.passed
        assert report.violations == ()

    def test_all_pure_at_reserve(self) -> None:
        config = MarketConfig((1, 1, 1), 0.25, 1.0, 100.0)
        profile = StrategyProfile((PurePoint(3.0),) * 3, 3.0)
        assert reserve_price_rational(profile, config).passed

    def test_cheap_rivals_make_searching_worthwhile(self) -> None:
        config = MarketConfig((1, 1, 1), 0.25, 1.0, 100.0)
        profile = StrategyProfile((PurePoint(3.0), PurePoint(1.5), PurePoint(1.5)), 3.0)
        report = reserve_price_rational(profile, config)
        assert not report.passed
        assert not report.sufficient_passed
        assert 3.0 in report.violations
