import numpy as np
import pytest
from scipy.optimize import minimize

from mlinv.schedule import (
    ConvergenceModel,
    LevelSchedule,
    bound_error,
    iterations_required,
    multilevel_cost,
    multilevel_schedule,
    round_to_admissible,
    single_level_cost,
    single_level_schedule,
    total_cost,
)

HALVING = ConvergenceModel(c=0.5, alpha=1.0, e0=1.0)

# Hand-evaluated reference values for c=0.5, alpha=1, e0=1, eps=1/8:
# four iterations, constant level 2*(1-1/16)/(0.5*0.125) = 30, and the
# cost-minimal levels 40.9706*sqrt(0.5)^(3-j).
ML_LEVELS_8TH = [14.485281374238571, 20.485281374238571,
                 28.970562748477143, 40.970562748477143]
ML_COST_8TH = 104.91168824543143


def brute_force_levels(c, alpha, k, budget):
    """Constrained minimizer of sum(l) with sum c^(K-1-j) l_j^-alpha = budget.

    Optimizes over log-levels so the search is well scaled for any rate.
    """
    weights = np.array([c ** (k - 1 - j) for j in range(k)])
    scale = (np.sum(weights) / budget) ** (1.0 / alpha)

    def cost(u):
        return float(np.sum(np.exp(u))) * scale

    def cost_jac(u):
        return np.exp(u) * scale

    def constraint(u):
        return float(np.sum(weights * np.exp(-alpha * u) * scale**-alpha) - budget)

    def constraint_jac(u):
        return -alpha * weights * np.exp(-alpha * u) * scale**-alpha

    result = minimize(
        cost,
        np.zeros(k),
        jac=cost_jac,
        constraints=[{"type": "eq", "fun": constraint, "jac": constraint_jac}],
        bounds=[(-30.0, 30.0)] * k,
        method="SLSQP",
        options={"maxiter": 1000, "ftol": 1e-14},
    )
    assert result.success, result.message
    return np.exp(result.x) * scale


class TestConvergenceModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            ConvergenceModel(c=1.0, alpha=1.0, e0=1.0)
        with pytest.raises(ValueError):
            ConvergenceModel(c=0.5, alpha=0.0, e0=1.0)
        with pytest.raises(ValueError):
            ConvergenceModel(c=0.5, alpha=1.0, e0=-1.0)
        with pytest.raises(ValueError):
            ConvergenceModel(c=0.5, alpha=1.0, e0=1.0, bias_constant=0.5)

    def test_iteration_count_snaps_exact_powers(self):
        assert iterations_required(HALVING, 0.125) == 4
        assert iterations_required(HALVING, 2.0) == 0
        assert iterations_required(HALVING, 2.5) == 0
        with pytest.raises(ValueError):
            iterations_required(HALVING, 0.0)
        with pytest.raises(ValueError):
            iterations_required(HALVING, -1.0)


class TestSingleLevel:
    def test_reference_point(self):
        sched = single_level_schedule(HALVING, 0.125)
        assert sched.kind == "single-level"
        assert len(sched) == 4
        assert sched.levels == pytest.approx((30.0,) * 4, rel=1e-12)
        assert total_cost(sched) == pytest.approx(120.0, rel=1e-12)
        assert single_level_cost(HALVING, 0.125) == pytest.approx(120.0, rel=1e-12)

    def test_loose_tolerance_is_empty(self):
        sched = single_level_schedule(HALVING, 2.0)
        assert sched.levels == ()
        assert total_cost(sched) == 0.0

    def test_sublinear_rate_squares_level(self):
        model = ConvergenceModel(c=0.5, alpha=0.5, e0=1.0)
        sched = single_level_schedule(model, 0.125)
        assert len(sched) == 4
        assert sched.levels[0] == pytest.approx(900.0, rel=1e-12)

    def test_constraint_is_tight(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            model = ConvergenceModel(
                c=rng.uniform(0.1, 0.9),
                alpha=rng.uniform(0.3, 3.0),
                e0=rng.uniform(0.5, 20.0),
            )
            eps = rng.uniform(1e-4, 1.9 * model.e0)
            sched = single_level_schedule(model, eps)
            if not sched.levels:
                continue
            k = len(sched)
            lhs = sched.levels[0] ** -model.alpha * (1 - model.c**k) / (1 - model.c)
            assert lhs == pytest.approx(eps / 2.0, rel=1e-9)

    def test_invalid_tolerance(self):
        with pytest.raises(ValueError):
            single_level_schedule(HALVING, -0.125)


class TestMultilevel:
    def test_reference_point(self):
        sched = multilevel_schedule(HALVING, 0.125)
        assert sched.kind == "multilevel"
        assert len(sched) == 4
        assert sched.levels == pytest.approx(ML_LEVELS_8TH, rel=1e-9)
        assert total_cost(sched) == pytest.approx(ML_COST_8TH, rel=1e-9)

    def test_cost_closed_form_matches_level_sum(self):
        cost = multilevel_cost(HALVING, 0.125)
        assert cost == pytest.approx(16.0 * 6.556978, rel=1e-6)
        assert cost == pytest.approx(total_cost(multilevel_schedule(HALVING, 0.125)),
                                     rel=1e-12)

    def test_two_step_lagrange_solution(self):
        # c=0.25, two iterations, bias budget 1/2: stationarity forces
        # l1 = 2 l0 and the constraint 0.25/l0 + 1/l1 = 0.5 gives (1.5, 3).
        model = ConvergenceModel(c=0.25, alpha=1.0, e0=8.0)
        sched = multilevel_schedule(model, 1.0)
        assert len(sched) == 2
        assert sched.levels == pytest.approx([1.5, 3.0], rel=1e-12)
        assert total_cost(sched) == pytest.approx(4.5, rel=1e-12)

    def test_constraint_is_tight(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            model = ConvergenceModel(
                c=rng.uniform(0.1, 0.9),
                alpha=rng.uniform(0.3, 3.0),
                e0=rng.uniform(0.5, 20.0),
            )
            eps = rng.uniform(1e-4, 1.9 * model.e0)
            sched = multilevel_schedule(model, eps)
            if not sched.levels:
                continue
            k = len(sched)
            lhs = sum(
                model.c ** (k - 1 - j) * l ** -model.alpha
                for j, l in enumerate(sched.levels)
            )
            assert lhs == pytest.approx(eps / 2.0, rel=1e-9)

    def test_geometric_ratio(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            model = ConvergenceModel(
                c=rng.uniform(0.1, 0.9), alpha=rng.uniform(0.3, 3.0), e0=5.0
            )
            sched = multilevel_schedule(model, 0.01)
            expected = model.c ** (-1.0 / (1.0 + model.alpha))
            ratios = np.array(sched.levels[1:]) / np.array(sched.levels[:-1])
            assert ratios == pytest.approx(expected, rel=1e-12)

    def test_matches_brute_force(self):
        for c, alpha, eps in [(0.5, 1.0, 0.125), (0.3, 2.0, 0.2), (0.7, 0.5, 0.5)]:
            model = ConvergenceModel(c=c, alpha=alpha, e0=1.0)
            sched = multilevel_schedule(model, eps)
            k = len(sched)
            assert 1 <= k <= 6
            reference = brute_force_levels(c, alpha, k, eps / 2.0)
            assert total_cost(sched) <= np.sum(reference) * 1.001


class TestBoundError:
    def test_constant_levels(self):
        assert bound_error(HALVING, [30.0] * 4) == pytest.approx(0.125, rel=1e-12)

    def test_empty_levels_return_initial_error(self):
        assert bound_error(HALVING, []) == 1.0

    def test_optimal_levels_meet_budget(self):
        assert bound_error(HALVING, ML_LEVELS_8TH) == pytest.approx(0.125, rel=1e-9)

    def test_rejects_bad_levels(self):
        with pytest.raises(ValueError):
            bound_error(HALVING, [1.0, -2.0])
        with pytest.raises(ValueError):
            bound_error(HALVING, [float("inf")])

    def test_guarantee_for_both_kinds(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            model = ConvergenceModel(
                c=rng.uniform(0.1, 0.9),
                alpha=rng.uniform(0.3, 3.0),
                e0=rng.uniform(0.5, 20.0),
                bias_constant=rng.uniform(1.0, 4.0),
            )
            eps = rng.uniform(1e-4, 1.9 * model.e0)
            for maker in (single_level_schedule, multilevel_schedule):
                sched = maker(model, eps)
                assert bound_error(model, sched.levels) <= eps * (1 + 1e-12)
                rounded = sched.rounded("next_power_of_two")
                assert bound_error(model, rounded.levels) <= eps * (1 + 1e-12)


class TestCostAccounting:
    def test_total_cost_examples(self):
        assert total_cost([30.0] * 4) == 120.0
        assert total_cost([]) == 0.0

    def test_dominance_of_multilevel(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            model = ConvergenceModel(
                c=rng.uniform(0.1, 0.9),
                alpha=rng.uniform(0.3, 3.0),
                e0=rng.uniform(0.5, 20.0),
            )
            eps = rng.uniform(1e-4, 1.9 * model.e0)
            ml = total_cost(multilevel_schedule(model, eps))
            sl = total_cost(single_level_schedule(model, eps))
            assert ml <= sl * (1 + 1e-12)

    def test_bias_constant_scales_levels(self):
        plain = multilevel_schedule(HALVING, 0.125)
        scaled_model = ConvergenceModel(c=0.5, alpha=1.0, e0=1.0, bias_constant=4.0)
        scaled = multilevel_schedule(scaled_model, 0.125)
        assert np.allclose(np.array(scaled.levels), 4.0 * np.array(plain.levels))
        assert bound_error(scaled_model, scaled.levels) <= 0.125 * (1 + 1e-12)


class TestRounding:
    def test_next_power_of_two(self):
        assert round_to_admissible([14.4853], "next_power_of_two") == [16.0]
        assert round_to_admissible([16.0], "next_power_of_two") == [16.0]
        assert round_to_admissible([1.0, 2.0, 0.3], "next_power_of_two") == [
            1.0,
            2.0,
            1.0,
        ]

    def test_identity(self):
        assert round_to_admissible([30.0], "identity") == [30.0]

    def test_rounding_never_decreases(self):
        rng = np.random.default_rng(2)
        levels = list(rng.uniform(0.1, 1e5, size=200))
        rounded = round_to_admissible(levels, "next_power_of_two")
        assert all(r >= max(l, 1.0) for r, l in zip(rounded, levels))

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            round_to_admissible([1.0], "banker")

    def test_schedule_kind_validation(self):
        with pytest.raises(ValueError):
            LevelSchedule((1.0,), 0.5, "triple-level")
        with pytest.raises(ValueError):
            LevelSchedule((0.0,), 0.5, "multilevel")


def fit_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


class TestAsymptotics:
    def test_cost_slopes_match_rate(self):
        # A large initial error keeps the geometric-sum bracket in its
        # saturated regime across the tolerance grid.
        epsilons = [2.0**-k for k in range(2, 13)]
        for alpha in (0.5, 1.0, 2.0):
            model = ConvergenceModel(c=0.5, alpha=alpha, e0=100.0)
            costs = [multilevel_cost(model, eps) for eps in epsilons]
            slope = fit_slope([1.0 / e for e in epsilons], costs)
            assert slope == pytest.approx(1.0 / alpha, abs=0.05)

    def test_single_to_multi_ratio_grows_affinely(self):
        model = ConvergenceModel(c=0.5, alpha=1.0, e0=100.0)
        epsilons = [2.0**-k for k in range(2, 13)]
        ratios = [
            single_level_cost(model, eps) / multilevel_cost(model, eps)
            for eps in epsilons
        ]
        logs = np.log([1.0 / e for e in epsilons])
        coeffs = np.polyfit(logs, ratios, 1)
        fitted = np.polyval(coeffs, logs)
        ss_res = np.sum((np.array(ratios) - fitted) ** 2)
        ss_tot = np.sum((np.array(ratios) - np.mean(ratios)) ** 2)
        assert 1.0 - ss_res / ss_tot > 0.99
