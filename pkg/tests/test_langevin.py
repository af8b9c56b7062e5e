import math

import numpy as np
import pytest

from mlinv.errors import DivergedError
from mlinv.forward import (
    InverseProblemSpec,
    MatrixForwardMap,
    SineFemModel,
    ZeroForwardMap,
    sine_field_values,
)
from mlinv.langevin import (
    TikhonovPosterior,
    ils_inner_step,
    posterior_mean_error,
    psd_sqrt,
    run_ml_ils,
)
from mlinv.schedule import LevelSchedule, total_cost


class TestPsdSqrt:
    def test_identity(self):
        assert np.array_equal(psd_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_rank_deficient_reference(self):
        c = np.ones((2, 2))
        expected = np.ones((2, 2)) / math.sqrt(2.0)
        assert np.allclose(psd_sqrt(c), expected, atol=1e-14)

    def test_rejects_asymmetric_input(self):
        with pytest.raises(ValueError):
            psd_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            psd_sqrt(np.ones((2, 3)))

    def test_square_recovers_clamped_input(self):
        rng = np.random.default_rng(0)
        for dim in (2, 10, 40, 100):
            factor = rng.standard_normal((dim, dim // 2 + 1))
            c = factor @ factor.T / dim
            s = psd_sqrt(c)
            assert np.allclose(s, s.T, atol=1e-12)
            assert np.abs(s @ s - c).max() <= 1e-10 * (1 + np.abs(c).max())
            assert np.linalg.eigvalsh(s).min() >= -1e-12

    def test_clamps_rounding_noise(self):
        c = np.diag([1.0, -1e-15])
        s = psd_sqrt(c)
        assert np.allclose(s, np.diag([1.0, 0.0]))


@pytest.fixture
def gaussian_posterior():
    problem = InverseProblemSpec(
        y=np.zeros(1), gamma=np.ones(1), c0=np.array([1.0]), lam=1.0
    )
    return TikhonovPosterior(ZeroForwardMap(1, 1), problem)


class TestPosterior:
    def test_gradient_matches_finite_differences(self):
        model = SineFemModel(6)
        rng = np.random.default_rng(3)
        problem = InverseProblemSpec(
            y=rng.standard_normal(15) * 0.1,
            gamma=np.full(15, 0.09),
            c0=np.arange(1.0, 7.0) ** -2.0,
            lam=0.6,
        )
        posterior = TikhonovPosterior(model, problem)
        x = rng.standard_normal(6)
        grad = posterior.gradient(x, 32.0)
        step = 1e-5
        fd = np.zeros(6)
        for i in range(6):
            e = np.zeros(6)
            e[i] = step
            fd[i] = (
                posterior.misfit(x + e, 32.0) - posterior.misfit(x - e, 32.0)
            ) / (2 * step)
        assert np.linalg.norm(grad - fd) <= 1e-5 * (1 + np.linalg.norm(grad))

    def test_pure_gaussian_misfit(self, gaussian_posterior):
        x = np.array([[1.5], [-0.5]])
        assert np.allclose(gaussian_posterior.misfit(x, 4.0), [1.125, 0.125])
        assert np.allclose(gaussian_posterior.gradient(x, 4.0), x)

    def test_requires_positive_weight(self):
        problem = InverseProblemSpec(
            y=np.zeros(1), gamma=np.ones(1), c0=np.ones(1), lam=0.0
        )
        with pytest.raises(ValueError):
            TikhonovPosterior(ZeroForwardMap(1, 1), problem)

    def test_prior_sampling_scale(self):
        problem = InverseProblemSpec(
            y=np.zeros(1), gamma=np.ones(1), c0=np.array([4.0]), lam=2.0
        )
        posterior = TikhonovPosterior(ZeroForwardMap(1, 1), problem)
        draws = posterior.sample_prior(20000, np.random.default_rng(0))
        assert draws.shape == (20000, 1)
        assert draws.var() == pytest.approx(2.0, rel=0.05)


class TestInnerStep:
    def test_collapsed_ensemble_is_fixed(self, gaussian_posterior):
        particles = np.full((6, 1), 1.3)
        updated = ils_inner_step(
            particles, gaussian_posterior, 4.0, 0.01, np.random.default_rng(0)
        )
        assert np.array_equal(updated, particles)

    def test_noise_free_drift_reference(self, gaussian_posterior):
        particles = np.array([[0.0], [2.0]])
        h = 0.05
        updated = ils_inner_step(
            particles, gaussian_posterior, 4.0, h, np.random.default_rng(0),
            noise=False,
        )
        assert np.allclose(updated, particles * (1.0 - h))

    def test_drift_confined_to_affine_span(self):
        model = MatrixForwardMap(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 2.0]]))
        problem = InverseProblemSpec(
            y=np.array([0.4, -0.2]), gamma=np.ones(2), c0=np.ones(3), lam=1.0
        )
        posterior = TikhonovPosterior(model, problem)
        rng = np.random.default_rng(5)
        initial = rng.standard_normal((2, 3))  # two particles: a 1-D span
        center = initial.mean(axis=0)
        direction = initial[1] - initial[0]
        direction /= np.linalg.norm(direction)
        particles = initial.copy()
        for _ in range(30):
            particles = ils_inner_step(
                particles, posterior, 8.0, 0.01, rng, noise=False
            )
            centered = particles - center
            residual = centered - np.outer(centered @ direction, direction)
            deviation = np.abs(residual).max() / max(np.abs(centered).max(), 1.0)
            assert deviation <= 1e-10

    def test_divergence_guard(self, gaussian_posterior):
        with pytest.raises(DivergedError):
            ils_inner_step(
                np.array([[0.0], [2.0]]), gaussian_posterior, 4.0, 1e18,
                np.random.default_rng(0), noise=False,
            )

    def test_rejects_nonpositive_step(self, gaussian_posterior):
        with pytest.raises(ValueError):
            ils_inner_step(
                np.zeros((2, 1)), gaussian_posterior, 4.0, -0.1,
                np.random.default_rng(0),
            )


class TestRunMlIls:
    def test_empty_schedule_returns_prior_ensemble(self, gaussian_posterior):
        run = run_ml_ils(
            gaussian_posterior, LevelSchedule((), 1.0), ensemble_size=25,
            tau_interval=0.1, step_size=0.05, rng=np.random.default_rng(0),
        )
        assert run.means.shape == (1, 1)
        assert run.schedule_cost == 0.0 and run.work_units == 0.0
        assert run.history is not None and len(run.history) == 1

    def test_same_seed_is_bit_identical(self, gaussian_posterior):
        sched = LevelSchedule((2.0, 4.0, 8.0), 0.5)
        runs = []
        for _ in range(2):
            runs.append(
                run_ml_ils(
                    gaussian_posterior, sched, ensemble_size=12,
                    tau_interval=0.1, step_size=0.05,
                    rng=np.random.default_rng(42),
                )
            )
        assert np.array_equal(runs[0].particles, runs[1].particles)
        for left, right in zip(runs[0].history, runs[1].history):
            assert np.array_equal(left, right)

    def test_cost_and_work_units(self, gaussian_posterior):
        sched = LevelSchedule((2.0, 4.0, 8.0), 0.5)
        run = run_ml_ils(
            gaussian_posterior, sched, ensemble_size=12, tau_interval=0.1,
            step_size=0.05, rng=np.random.default_rng(1), keep_history=False,
        )
        assert run.history is None
        assert run.schedule_cost == total_cost(sched)
        assert run.work_units == 12 * 2 * total_cost(sched)

    def test_mean_converges_toward_posterior_mean(self):
        # Linear model: the sampler mean should approach the regularized
        # solution as the schedule supplies more time and accuracy.
        model = MatrixForwardMap(np.array([[1.0, 0.0], [0.0, 0.5]]))
        problem = InverseProblemSpec(
            y=np.array([1.0, -0.5]), gamma=np.full(2, 0.25),
            c0=np.ones(2), lam=1.0,
        )
        posterior = TikhonovPosterior(model, problem)
        a = np.array([[1.0, 0.0], [0.0, 0.5]])
        x_star = np.linalg.solve(
            a.T @ problem.gamma.inv @ a + problem.c0.inv,
            a.T @ problem.gamma.inv @ problem.y,
        )
        errors = []
        for k in (2, 8, 24):
            sched = LevelSchedule((4.0,) * k, 0.5)
            run = run_ml_ils(
                posterior, sched, ensemble_size=400, tau_interval=0.1,
                step_size=0.02, rng=np.random.default_rng(7), keep_history=False,
            )
            errors.append(posterior_mean_error(run.means[-1], x_star))
        assert errors[2] < errors[0]

    def test_interval_must_be_multiple_of_step(self, gaussian_posterior):
        with pytest.raises(ValueError):
            run_ml_ils(
                gaussian_posterior, LevelSchedule((2.0,), 0.5), ensemble_size=4,
                tau_interval=0.1, step_size=0.03, rng=np.random.default_rng(0),
            )


class TestPosteriorMeanError:
    def test_zero_at_reference(self):
        x = np.array([0.3, -0.4])
        assert posterior_mean_error(x, x) == 0.0

    def test_unit_mode_reference_value(self):
        mean = np.array([1.0, 0.0])
        ref = np.zeros(2)
        assert posterior_mean_error(mean, ref) == pytest.approx(
            1.0 / (2.0 * math.pi**2)
        )
        assert posterior_mean_error(mean, ref) == pytest.approx(0.050660, abs=1e-6)

    def test_matches_field_quadrature(self):
        rng = np.random.default_rng(11)
        mean = rng.standard_normal(5)
        ref = rng.standard_normal(5)
        grid = np.linspace(0.0, 1.0, 40001)
        gap = sine_field_values(mean, grid) - sine_field_values(ref, grid)
        quadrature = 0.5 * np.trapezoid(gap**2, grid)
        assert posterior_mean_error(mean, ref) == pytest.approx(quadrature, abs=1e-8)
