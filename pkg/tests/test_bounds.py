"""Theoretical bounds and constants: guards, rate envelopes, contraction
rates, the point-mass budget, the risk sandwich, and the variance ceiling."""
import numpy as np
import pytest
import scipy.special

from rwgd import (
    BernoulliIndependent,
    CategoricalSingle,
    Constant,
    Dataset,
    Explicit,
    Harmonic,
    Identity,
    MomentContext,
    build_weighted_problem,
    propagate,
    stationary_second_moment,
)
from rwgd.bounds import (
    EULER_GAMMA,
    assumption_check,
    asym_risk_bounds,
    condition_speedup,
    conv_point_budget,
    euler_gamma_series,
    gd_rate_bound,
    gmc_rate,
    harmonic_envelope,
    mean_rate_bound,
    second_moment_envelope,
    var_constants,
    variance_ceiling,
    zeta_series,
)
from rwgd.errors import AssumptionError
from rwgd.weighting import analytic_moments

from conftest import admissible_context, random_dataset, random_scheme


class TestSeriesConstants:
    def test_euler_gamma(self):
        assert abs(euler_gamma_series() - np.euler_gamma) <= 1e-12
        assert abs(EULER_GAMMA - 0.5772156649) <= 1e-9

    @pytest.mark.parametrize("s", [1.05, 1.2, 1.5, 1.8, 1.99])
    def test_zeta_against_scipy(self, s):
        assert abs(zeta_series(s) - scipy.special.zeta(s)) <= 1e-10

    def test_zeta_domain(self):
        with pytest.raises(ValueError):
            zeta_series(1.0)


class TestAssumptionCheck:
    def test_identity_all_pass(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        report = assumption_check(wp, Identity(2), Constant(0.5), w1=np.zeros(2))
        assert report.all_passed()
        assert report.passed("step_size_bound")
        assert report.passed("compact_support")

    def test_harmonic_divergence_by_variant(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        report = assumption_check(wp, Identity(2), Harmonic(0.5))
        assert report.passed("step_sum_diverges")
        report_exp = assumption_check(wp, Identity(2), Explicit((0.5, 0.25)))
        assert not report_exp.passed("step_sum_diverges")

    def test_constructed_violation_with_margin(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        report = assumption_check(wp, Identity(2), Constant(2.0))
        checks = {a.name: a for a in report.assumptions}
        assert not checks["step_size_bound"].passed
        assert checks["step_size_bound"].margin == pytest.approx(-1.0)

    def test_json_round_trip(self):
        import json
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        report = assumption_check(wp, Identity(2), Constant(0.5))
        payload = json.loads(report.to_json())
        assert payload["name"] == "assumption_check"
        assert {a["name"] for a in payload["assumptions"]} >= {
            "step_size_bound", "step_sum_diverges", "m2_nonsingular",
            "second_moment_step_bound", "compact_support",
        }


class TestRateBounds:
    def test_gd_rate_at_target(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        assert gd_rate_bound(wp, Constant(0.5), 5, np.array([1.0, 1.0])) == 0.0

    def test_gd_rate_plug_in(self):
        # X = I, alpha = 0.5 constant, k = 2, start one unit away: e^{-1}
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        val = gd_rate_bound(wp, Constant(0.5), 2, np.array([1.0, 0.0]))
        assert val == pytest.approx(np.exp(-1.0))

    def test_gd_rate_empty_sum(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        val = gd_rate_bound(wp, Constant(0.5), 0, np.array([3.0, 4.0]))
        assert val == pytest.approx(5.0)

    def test_mean_rate_examples(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        ctx = MomentContext(wp, np.zeros((2, 2)), Constant(0.5))
        assert mean_rate_bound(ctx, 5, wp.w_hat) == 0.0
        ctx2 = MomentContext(wp, np.zeros((2, 2)), Constant(0.5))
        start = wp.w_hat + np.array([1.0, 0.0])
        assert mean_rate_bound(ctx2, 2, start) == pytest.approx(np.exp(-1.0))
        assert mean_rate_bound(ctx2, 0, start) == pytest.approx(1.0)

    def test_mean_rate_dominates_exact(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 3, 2, dependent_rows=True)
            scheme = random_scheme(rng, 3)
            wp, mom, ctx = admissible_context(ds, scheme)
            states = propagate(ctx, -wp.w_hat, 40)
            for k in range(1, 41):
                bound = mean_rate_bound(ctx, k, np.zeros(2))
                assert np.linalg.norm(states[k].m) <= bound + 1e-12


class TestVarConstants:
    def test_zero_at_minimizer_realizable(self, rng):
        ds = random_dataset(rng, 2, 3)
        scheme = CategoricalSingle(np.array([0.5, 0.5]))
        wp, mom, ctx = admissible_context(ds, scheme)
        consts = var_constants(ctx, wp.w_hat)
        assert consts["c0"] == pytest.approx(0.0, abs=1e-18)

    def test_zero_sigma_d_keeps_outer_norm_only(self, rng):
        ds = random_dataset(rng, 3, 2, dependent_rows=True)
        wp = build_weighted_problem(ds, np.ones(3))
        ctx = MomentContext(wp, np.zeros((3, 3)), Constant(0.4 / wp.norm_xx_hat))
        w1 = np.zeros(2)
        consts = var_constants(ctx, w1)
        assert consts["c0"] == pytest.approx(np.linalg.norm(wp.w_hat) ** 2)

    def test_constant_step_envelope_cross_check(self, rng):
        ds = random_dataset(rng, 3, 2, dependent_rows=True)
        scheme = random_scheme(rng, 3)
        wp, mom, ctx = admissible_context(ds, scheme)
        c2 = var_constants(ctx, np.zeros(2))["c2"]
        limit = stationary_second_moment(ctx)
        states = propagate(ctx, -wp.w_hat, 1000)
        for k in range(1, 1001):
            dev = np.linalg.norm(states[k].a - limit, 2)
            assert dev <= second_moment_envelope(ctx, c2, k) + 1e-12

    def test_harmonic_envelope_cross_check(self, rng):
        ds = random_dataset(rng, 3, 2, dependent_rows=True)
        scheme = random_scheme(rng, 3)
        wp, mom, ctx = admissible_context(ds, scheme, harmonic=True)
        c1 = var_constants(ctx, np.zeros(2))["c1"]
        states = propagate(ctx, -wp.w_hat, 2000)
        for k in range(1, 2001):
            assert np.linalg.norm(states[k].a, 2) <= harmonic_envelope(ctx, c1, k) + 1e-12

    def test_step_bound_required(self, rng):
        ds = random_dataset(rng, 3, 2, dependent_rows=True)
        scheme = CategoricalSingle(np.array([0.4, 0.3, 0.3]))
        mom = analytic_moments(scheme)
        wp = build_weighted_problem(ds, mom.m2_diag)
        from rwgd.moments import second_moment_step_limit
        alpha = min(2.0 * second_moment_step_limit(wp, mom.sigma_d), 0.9 / wp.norm_xx_hat)
        ctx = MomentContext(wp, mom.sigma_d, Constant(alpha))
        if alpha >= ctx.step_limit:
            with pytest.raises(AssumptionError):
                var_constants(ctx, np.zeros(2))


class TestGmcRate:
    def test_plug_in(self):
        # X = I2 scaled so ||X^t X|| = 1 and sigma(X^t M2 X) = 1 with M2 = I
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        bound_q, r = gmc_rate(wp, 0.5, 1.0, 2.0)
        assert bound_q == pytest.approx(0.25)
        assert r == pytest.approx(0.5)

    def test_small_alpha_goes_to_one(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        bound_q, r = gmc_rate(wp, 1e-12, 1.0, 2.0)
        assert bound_q == pytest.approx(1.0, abs=1e-10)

    def test_boundary_support_condition(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        alpha = 2.0 - 1e-9  # alpha tau^2 ||X^t X|| just below 2
        with pytest.raises(AssumptionError):
            gmc_rate(wp, 2.0, 1.0, 2.0)
        # within the support condition but violating alpha ||X^t M2 X|| < 1
        with pytest.raises(AssumptionError):
            gmc_rate(wp, alpha, 1.0, 2.0)

    def test_boundary_valid_value(self):
        # shrink the weighting so alpha ||X^t M2 X|| stays < 1 while
        # alpha tau^2 ||X^t X|| approaches 2: the bound degenerates towards 1
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), 0.08 * np.ones(2))
        alpha = 2.0 - 1e-9
        bound_q, r = gmc_rate(wp, alpha, 1.0, 2.0)
        assert 0.0 <= bound_q < 1.0
        assert bound_q == pytest.approx(1.0, abs=1e-6)


class TestConvPointBudget:
    def _ctx(self, alpha=0.005):
        # sigma_min^+ = 1, ||X^t X|| = 1, ||Sigma_D|| = 1, ||r|| = 1, d = 2
        x = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        y = np.array([0.0, 0.0, 1.0])
        wp = build_weighted_problem(Dataset(x, y), np.ones(3))
        assert np.linalg.norm(wp.residual) == pytest.approx(1.0)
        return MomentContext(wp, np.eye(3), Constant(alpha))

    def test_plug_in(self):
        alpha_max, k_min = conv_point_budget(self._ctx(), tau=1.0, epsilon=0.1, c3=1.0)
        assert alpha_max == pytest.approx(0.005)

    def test_epsilon_scaling(self):
        a1, _ = conv_point_budget(self._ctx(), tau=1.0, epsilon=0.1, c3=1.0)
        a2, _ = conv_point_budget(self._ctx(), tau=1.0, epsilon=0.2, c3=1.0)
        assert a2 == pytest.approx(4.0 * a1)

    def test_degenerate_log_clamps(self):
        _, k_min = conv_point_budget(self._ctx(), tau=1.0, epsilon=1e9, c3=1.0)
        assert k_min == 1.0

    def test_realizable_rejected(self, rng):
        ds = random_dataset(rng, 2, 3)
        scheme = CategoricalSingle(np.array([0.5, 0.5]))
        wp, mom, ctx = admissible_context(ds, scheme)
        with pytest.raises(AssumptionError, match="realizable"):
            conv_point_budget(ctx, tau=1.0, epsilon=0.1, c3=1.0)


class TestAsymRisk:
    def test_orthonormal_columns_identity_noise(self, rng):
        # orthonormal columns, M2 = c I: variance term is Tr(X^+ (X^+)^t) = d
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        x = q[:, :2]
        wp = build_weighted_problem(Dataset(x, np.zeros(4)), 0.7 * np.ones(4))
        lower, upper = asym_risk_bounds(wp, rng.standard_normal(2), np.eye(4))
        assert lower == pytest.approx(2.0)
        assert upper >= lower

    def test_noiseless_sandwich_collapses(self, rng):
        x = np.array([[1.0, 0.0], [2.0, 0.0]])
        wp = build_weighted_problem(Dataset(x, [1.0, 2.0]), np.ones(2))
        w_star = np.array([1.0, 3.0])
        with pytest.warns(UserWarning, match="rescaling"):
            lower, upper = asym_risk_bounds(wp, w_star, np.zeros((2, 2)))
        # kernel of X is the second axis: bias = w_star_2^2
        assert lower == pytest.approx(9.0)
        assert upper == pytest.approx(9.0)

    def test_rank_one_blow_up_trend(self):
        # prioritizing the weak data point inflates the variance term like
        # 1/X11^2 as its entry shrinks (valid once p2 << p1 X11^2)
        lows = []
        for x11 in (0.2, 0.1, 0.05):
            x = np.array([[x11, 0.0], [1.0, 0.0]])
            x = x / np.linalg.norm(x, 2)
            wp = build_weighted_problem(Dataset(x, [0.0, 0.0]),
                                        np.array([1.0 - 1e-8, 1e-8]))
            lower, _ = asym_risk_bounds(wp, np.array([1.0, 0.0]), np.eye(2))
            lows.append(lower)
        assert lows[0] < lows[1] < lows[2]
        # and the growth tracks 1/X11^2: halving X11 roughly quadruples it
        assert lows[1] == pytest.approx(4 * lows[0], rel=0.1)
        assert lows[2] == pytest.approx(4 * lows[1], rel=0.1)

    def test_rescaling_warned(self, rng):
        x = 3.0 * np.eye(2)
        wp = build_weighted_problem(Dataset(x, [0.0, 0.0]), np.ones(2))
        with pytest.warns(UserWarning, match="rescaling"):
            asym_risk_bounds(wp, np.zeros(2), np.eye(2))

    def test_lower_bound_scale_invariant(self, rng):
        # the lower endpoint is the risk of the weighted estimator, which does
        # not change under the consistent model rescale; it must match the
        # direct formula evaluated on the raw, unnormalized design
        from rwgd.linalg import kernel_projector, pseudo_inverse
        for _ in range(5):
            ds = random_dataset(rng, 4, 3, dependent_rows=True)
            m2 = rng.uniform(0.3, 2.0, 4)
            sigma_eps = np.diag(rng.uniform(0.1, 0.5, 4))
            w_star = rng.standard_normal(3)
            wp = build_weighted_problem(ds, m2)
            assert abs(wp.norm_x - 1.0) > 1e-6
            with pytest.warns(UserWarning, match="rescaling"):
                lower, upper = asym_risk_bounds(wp, w_star, sigma_eps)
            g_raw = pseudo_inverse(wp.x_hat) @ np.diag(np.sqrt(m2))
            bias = kernel_projector(ds.x) @ w_star
            direct = float(bias @ bias) + float(np.trace(g_raw @ sigma_eps @ g_raw.T))
            assert lower == pytest.approx(direct, rel=1e-9)
            assert upper >= lower

    def test_rejects_bad_noise_matrix(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [0.0, 0.0]), np.ones(2))
        with pytest.raises(ValueError):
            asym_risk_bounds(wp, np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            asym_risk_bounds(wp, np.zeros(2), -np.eye(2))


class TestConditionSpeedup:
    def test_uniform_scaling_ratio_one(self, rng):
        ds = random_dataset(rng, 3, 2)
        wp_u = build_weighted_problem(ds, np.ones(3))
        wp_w = build_weighted_problem(ds, 0.3 * np.ones(3))
        ratio, bound = condition_speedup(wp_u, wp_w)
        assert ratio == pytest.approx(1.0)
        assert bound == pytest.approx(1.0)

    def test_rank_one_no_speedup(self, rng):
        x = np.outer(rng.standard_normal(3), rng.standard_normal(2))
        ds = Dataset(x, rng.standard_normal(3))
        wp_u = build_weighted_problem(ds, np.ones(3))
        wp_w = build_weighted_problem(ds, np.array([0.7, 0.2, 0.1]))
        ratio, bound = condition_speedup(wp_u, wp_w)
        assert ratio == pytest.approx(1.0)
        assert ratio <= bound + 1e-9

    def test_diagonal_example(self):
        ds = Dataset(np.eye(2), [0.0, 0.0])
        wp_u = build_weighted_problem(ds, np.ones(2))
        wp_w = build_weighted_problem(ds, np.array([4.0, 1.0]))
        ratio, bound = condition_speedup(wp_u, wp_w)
        assert ratio == pytest.approx(0.25)
        assert bound == pytest.approx(4.0)

    def test_bound_always_dominates(self, rng):
        for _ in range(20):
            ds = random_dataset(rng, 4, 3)
            wp_u = build_weighted_problem(ds, np.ones(4))
            wp_w = build_weighted_problem(ds, rng.uniform(0.1, 3.0, 4))
            ratio, bound = condition_speedup(wp_u, wp_w)
            assert ratio <= bound + 1e-9


class TestVarianceCeiling:
    def test_realizable_zero(self, rng):
        ds = random_dataset(rng, 2, 3)
        scheme = CategoricalSingle(np.array([0.5, 0.5]))
        wp, mom, ctx = admissible_context(ds, scheme)
        assert variance_ceiling(ctx) == pytest.approx(0.0, abs=1e-18)

    def test_unit_design_bounded_by_residual(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 3, 2, dependent_rows=True)
            x = ds.x / np.linalg.norm(ds.x, 2)
            ds2 = Dataset(x, ds.y)
            scheme = random_scheme(rng, 3)
            wp, mom, ctx = admissible_context(ds2, scheme)
            r_sq = float(ctx.residual @ ctx.residual)
            assert variance_ceiling(ctx) <= r_sq + 1e-12

    def test_dominates_stationary_norm(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 3, 3, dependent_rows=True)
            scheme = random_scheme(rng, 3)
            wp, mom, ctx = admissible_context(ds, scheme)
            limit = np.linalg.norm(stationary_second_moment(ctx), 2)
            assert limit <= variance_ceiling(ctx) + 1e-9
