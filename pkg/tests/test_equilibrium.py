# tests/test_equilibrium.py - Constructed equilibria, reserve price and perturbation helpers.

import math

import numpy as np
import pytest

from engine.equilibrium import (GroupSpec, construct_equilibrium, construct_extended_NE,
                                construct_original_NE, construct_unique_smallest_NE, group_cdf,
                                lowest_price, lowest_price_symmetric, move_mass_to_top, shift_support,
                                solve_reserve_price)
from engine.payoff import expected_price, profit_per_branch
from engine.verifier import verify
from market.cdf import GroupCdf
from market.errors import ConstructionError
from market.schema import MarketConfig, derived_constants
from market.strategies import MixedFull, PurePoint

LN2 = math.log(2.0)


def _random_extended_config(rng: np.random.Generator) -> MarketConfig:
    n_m = int(rng.integers(1, 4))
    smallest = int(rng.integers(2, 5))
    larger = list(rng.integers(n_m + 1, n_m + 8, size=int(rng.integers(0, 3))))
    counts = [n_m] * smallest + [int(x) for x in larger]
    rng.shuffle(counts)
    return MarketConfig(counts, float(rng.uniform(0.05, 0.9)), 1.0, 1e9)


def _random_unique_config(rng: np.random.Generator) -> MarketConfig:
    n = int(rng.integers(2, 7))
    n_m = int(rng.integers(1, 5))
    counts = [n_m] + [int(x) for x in rng.integers(n_m + 1, 11, size=n - 1)]
    rng.shuffle(counts)
    return MarketConfig(counts, float(rng.uniform(0.05, 0.9)), 1.0, 1e6)


class TestClosedForms:
    def test_lowest_price_symmetric(self) -> None:
        assert lowest_price_symmetric(1.0, 3, 0.25) == pytest.approx(0.5)
        assert lowest_price_symmetric(1.0, 2, 0.5) == pytest.approx(1.0 / 3.0)
        assert lowest_price_symmetric(1.0, 5, 1e-9) == pytest.approx(1.0, rel=1e-6)

    def test_lowest_price_matches_symmetric_form(self) -> None:
        for n in range(2, 8):
            for mu in (0.1, 0.4, 0.8):
                assert lowest_price(2.0, (1 - mu) / n, mu) == pytest.approx(lowest_price_symmetric(2.0, n, mu))

    def test_group_cdf_three_sellers(self) -> None:
        groups = GroupSpec(full_mixers=(1, 2), pure_reserve=(0,))
        p = np.linspace(0.5, 1.0, 51)
        assert group_cdf(p, groups, 1.0, 0.25, 3) == pytest.approx(2.0 - 1.0 / p, abs=1e-12)

    def test_group_cdf_endpoints(self) -> None:
        groups = GroupSpec(full_mixers=(0, 1), cutoff_sellers=((2, 0.8),), pure_reserve=(3,))
        low = lowest_price_symmetric(1.0, 4, 0.3)
        assert group_cdf(low, groups, 1.0, 0.3, 4) == pytest.approx(0.0, abs=1e-12)
        assert group_cdf(1.0 - 1e-12, groups, 1.0, 0.3, 4) == pytest.approx(1.0, abs=1e-9)

    def test_group_cdf_rejects_cutoff_below_lowest_price(self) -> None:
        groups = GroupSpec(full_mixers=(0, 1), cutoff_sellers=((2, 0.1),))
        with pytest.raises(ConstructionError):
            group_cdf(0.5, groups, 1.0, 0.25, 3)


class TestReservePrice:
    def test_three_sellers(self, three_eq, three_config) -> None:
        P = three_eq.reserve_price
        assert P == pytest.approx(1.0 / (1.0 - LN2), rel=1e-12)
        assert P == pytest.approx(3.2589, abs=1e-4)
        assert three_eq.lowest_price == pytest.approx(P / 2)
        assert abs(expected_price(three_eq.profile[1]) - (P - three_config.c)) < 1e-8
        assert abs(three_eq.reserve_residual) < 1e-8 * P

    def test_chain(self, chain_eq) -> None:
        assert chain_eq.reserve_price == pytest.approx(1.0 / (1.0 - LN2), rel=1e-12)
        assert chain_eq.kappa == pytest.approx(LN2, rel=1e-12)

    def test_unique_smallest(self, unique_eq) -> None:
        kappa = 1.6 * math.log(1.625)
        assert unique_eq.reserve_price == pytest.approx(1.0 / (1.0 - kappa), rel=1e-12)
        assert unique_eq.reserve_price == pytest.approx(4.4806, abs=1e-3)

    def test_root_finder_agrees_with_closed_form(self) -> None:
        def build(P):
            return [MixedFull(GroupCdf.build(P, 0.25, 0.25, 2))]

        numeric, kappa = solve_reserve_price(build, 1.0, 100.0)
        assert numeric == pytest.approx(1.0 / (1.0 - LN2), rel=1e-9)
        assert kappa == pytest.approx(LN2, rel=1e-9)

    def test_root_finder_with_cutoffs(self) -> None:
        config = MarketConfig((1, 1, 1, 1), 0.3, 1.0, 100.0)
        eq = construct_original_NE(config, GroupSpec(full_mixers=(0, 1), cutoff_sellers=((2, 0.8),), pure_reserve=(3,)))
        assert abs(eq.reserve_residual) < 1e-8 * eq.reserve_price
        assert eq.reserve_price == pytest.approx(1.0 / (1.0 - eq.kappa), rel=1e-9)

    def test_reserve_above_valuation_bound(self) -> None:
        with pytest.raises(ConstructionError, match="exceeds the valuation bound"):
            construct_original_NE(MarketConfig((1, 1, 1), 0.25, 1.0, 2.0))


class TestOriginal:
    def test_three_seller_profile(self, three_eq) -> None:
        P = three_eq.reserve_price
        profile = three_eq.profile
        assert isinstance(profile[0], PurePoint) and profile[0].price == P
        p = np.linspace(P / 2, P, 101)
        for i in (1, 2):
            assert profile[i].cdf.evaluate(p) == pytest.approx(2.0 - P / p, abs=1e-12)
        assert three_eq.analytic_profit == pytest.approx((P / 4,) * 3, rel=1e-12)

    def test_two_sellers_classic(self) -> None:
        eq = construct_original_NE(MarketConfig((1, 1), 0.4, 1.0, 100.0))
        assert all(isinstance(s, MixedFull) for s in eq.profile.strategies)
        assert eq.lowest_price == pytest.approx(lowest_price_symmetric(eq.reserve_price, 2, 0.4))

    def test_three_groups_pass_verifier(self) -> None:
        config = MarketConfig((1, 1, 1, 1), 0.3, 1.0, 100.0)
        eq = construct_original_NE(config, GroupSpec(full_mixers=(0, 1), cutoff_sellers=((2, 0.8),), pure_reserve=(3,)))
        assert verify(eq.profile, config).passed

    def test_needs_two_full_mixers(self, three_config) -> None:
        with pytest.raises(ConstructionError, match="at least 2 full mixer"):
            construct_original_NE(three_config, GroupSpec(full_mixers=(0,), pure_reserve=(1, 2)))

    def test_needs_equal_counts(self, chain_config) -> None:
        with pytest.raises(ConstructionError, match="equal store counts"):
            construct_original_NE(chain_config)

    def test_groups_must_partition(self, three_config) -> None:
        with pytest.raises(ConstructionError, match="partition"):
            construct_original_NE(three_config, GroupSpec(full_mixers=(0, 1)))


class TestExtended:
    def test_chain_profits(self, chain_eq) -> None:
        P = chain_eq.reserve_price
        assert chain_eq.analytic_profit == pytest.approx((P / 2, P / 6, P / 6), rel=1e-12)
        assert sum(chain_eq.analytic_profit) == pytest.approx(5 * P / 6)
        assert sum(chain_eq.analytic_profit) / P > 0.75

    def test_equal_smallest_sellers_mix(self) -> None:
        eq = construct_extended_NE(MarketConfig((2, 2), 0.5, 1.0, 100.0))
        assert all(isinstance(s, MixedFull) for s in eq.profile.strategies)

    def test_one_smallest_pure_passes_verifier(self) -> None:
        config = MarketConfig((5, 2, 2, 2), 1.0 / 3.0, 1.0, 100.0)
        eq = construct_extended_NE(config, GroupSpec(full_mixers=(1, 2), pure_reserve=(3,)))
        assert isinstance(eq.profile[3], PurePoint)
        assert verify(eq.profile, config).passed

    def test_rejects_unique_smallest(self, unique_config) -> None:
        with pytest.raises(ConstructionError, match="unique"):
            construct_extended_NE(unique_config)

    def test_profit_per_branch_law(self) -> None:
        rng = np.random.default_rng(2024)
        for _ in range(20):
            config = _random_extended_config(rng)
            eq = construct_extended_NE(config)
            const = eq.reserve_price * (1 - config.mu) / config.total_stores
            for i, n in enumerate(config.store_counts):
                assert profit_per_branch(i, eq.profile, config) == pytest.approx(const, rel=1e-9)
                assert eq.analytic_profit[i] == pytest.approx(n * const, rel=1e-12)


class TestUniqueSmallest:
    def test_randomized_structure(self) -> None:
        rng = np.random.default_rng(99)
        for _ in range(20):
            config = _random_unique_config(rng)
            eq = construct_unique_smallest_NE(config)
            d = derived_constants(config)
            m = d.smallest[0]
            j = eq.groups.full_mixers[0]
            src_m, src_j = d.searcher_share[m], d.searcher_share[j]
            f_m, f_j = eq.profile[m], eq.profile[j]
            P, low, mu = eq.reserve_price, eq.lowest_price, config.mu

            assert f_m.cdf.evaluate(low) == pytest.approx(0.0, abs=1e-12)
            assert f_m.cdf.evaluate(P) == pytest.approx(1.0, abs=1e-12)
            assert f_m.mass_at_top == 0.0
            assert f_j.mass_at_top == pytest.approx((src_j - src_m) / (mu + src_j), abs=1e-9)

            interior = np.linspace(low, P, 502)[1:-1]
            assert np.all(f_j.cdf.evaluate(interior) < f_m.cdf.evaluate(interior))
            assert np.all(f_m.cdf.density(interior) > f_j.cdf.density(interior))

            ppb = eq.profit_per_branch(config.store_counts)
            assert all(ppb[m] > ppb[k] for k in range(config.n_sellers) if k != m)

    def test_randomized_profiles_pass_verifier(self) -> None:
        rng = np.random.default_rng(99)
        for _ in range(20):
            config = _random_unique_config(rng)
            eq = construct_unique_smallest_NE(config)
            report = verify(eq.profile, config)
            assert report.passed, report.failed
            assert report.check("no_profitable_deviation").evidence < 1e-6

    def test_two_second_smallest_mixers(self) -> None:
        config = MarketConfig((1, 3, 3, 5), 0.3, 1.0, 1e6)
        try:
            eq = construct_unique_smallest_NE(config, GroupSpec(full_mixers=(1, 2)))
        except ConstructionError:
            pytest.skip("group combination not supported for this market")
        report = verify(eq.profile, config)
        assert report.passed, report.failed

    def test_rejects_tied_smallest(self, chain_config) -> None:
        with pytest.raises(ConstructionError):
            construct_unique_smallest_NE(chain_config)


class TestDispatch:
    @pytest.mark.parametrize("counts, family", [
        ((1, 1, 1), "original"),
        ((3, 1, 1), "extended"),
        ((1, 2, 2), "unique"),
    ])
    def test_auto_family(self, counts, family) -> None:
        eq = construct_equilibrium(MarketConfig(counts, 0.25, 1.0, 100.0))
        assert eq.family == family

    def test_unknown_family(self, three_config) -> None:
        with pytest.raises(ConstructionError, match="unknown equilibrium family"):
            construct_equilibrium(three_config, family="nash")


class TestHomogeneity:
    @pytest.mark.parametrize("counts, mu", [((1, 1, 1), 0.25), ((3, 1, 1), 1.0 / 6.0), ((1, 2, 2), 0.2)])
    @pytest.mark.parametrize("scale", [0.1, 10.0])
    def test_prices_scale_with_search_cost(self, counts, mu, scale) -> None:
        base = MarketConfig(counts, mu, 1.0, 1e6)
        eq = construct_equilibrium(base)
        scaled = construct_equilibrium(base.with_search_cost(scale))
        assert scaled.reserve_price == pytest.approx(scale * eq.reserve_price, rel=1e-9)
        assert scaled.lowest_price == pytest.approx(scale * eq.lowest_price, rel=1e-9)
        for a, b in zip(eq.profile.strategies, scaled.profile.strategies):
            assert b.support[0] == pytest.approx(scale * a.support[0], rel=1e-9)
            assert b.support[1] == pytest.approx(scale * a.support[1], rel=1e-9)


class TestPerturbations:
    def test_shift_support_lifts_lowest_price(self, three_eq) -> None:
        shifted = shift_support(three_eq.profile, 1, 1.02)
        s = shifted[1]
        P = three_eq.reserve_price
        assert s.support == pytest.approx((1.02 * P / 2, P))
        assert s.mass_at_top == 0.0
        assert s.cdf.top_value == pytest.approx(1.0, abs=1e-12)
        # midpoint of the new interval carries the old median-of-interval probability
        mid_new = 0.5 * (1.02 * P / 2 + P)
        assert s.prob_le(mid_new) == pytest.approx(float(three_eq.profile[1].prob_le(0.75 * P)), abs=1e-6)
        s.check_structure()

    def test_shift_support_keeps_cutoff_atom(self) -> None:
        config = MarketConfig((1, 1, 1, 1), 0.3, 1.0, 100.0)
        eq = construct_original_NE(config, GroupSpec(full_mixers=(0, 1), pure_reserve=(3,),
                                                     cutoff_sellers=((2, 0.8),)))
        s = shift_support(eq.profile, 2, 1.02)[2]
        assert s.tag == "cutoff"
        assert s.mass_at_top == eq.profile[2].mass_at_top
        assert s.cutoff_price == pytest.approx(0.8 * eq.reserve_price)
        s.check_structure()

    def test_shift_past_the_top_is_rejected(self, three_eq) -> None:
        with pytest.raises(ConstructionError):
            shift_support(three_eq.profile, 1, 2.5)

    def test_move_mass_to_top(self, three_eq) -> None:
        moved = move_mass_to_top(three_eq.profile, 2, 0.05)
        s = moved[2]
        assert s.mass_at_top == pytest.approx(0.05, abs=1e-12)
        assert s.cdf.top_value == pytest.approx(0.95, abs=1e-12)
        s.check_structure()

    def test_pure_strategy_cannot_be_perturbed(self, three_eq) -> None:
        with pytest.raises(ConstructionError):
            move_mass_to_top(three_eq.profile, 0)
