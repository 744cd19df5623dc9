"""Oracle and property tests for the Beta action-distribution module."""

import math
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from microdrive import betadist as bd

GRID = [0.5, 1.0, 1.5, 2.5, 5.0]


def _grid_pairs():
    return [(a, b) for a in GRID for b in GRID]


class TestSpecialFunctions:
    def test_log_gamma_against_mpmath(self):
        xs = np.concatenate([
            np.linspace(0.01, 0.49, 25),
            np.linspace(0.5, 10.0, 60),
            np.array([25.0, 100.0, 500.0, 1e3, 2e3]),
        ])
        for x in xs:
            want = float(mpmath.loggamma(mpmath.mpf(x)))
            got = bd.log_gamma(float(x))
            assert got == pytest.approx(want, rel=1e-11, abs=1e-12), x

    def test_digamma_against_mpmath(self):
        xs = np.concatenate([
            np.linspace(0.01, 0.99, 30),
            np.linspace(1.0, 12.0, 45),
            np.array([50.0, 200.0, 1e3, 2e3]),
        ])
        for x in xs:
            want = float(mpmath.digamma(mpmath.mpf(x)))
            got = bd.digamma(float(x))
            assert got == pytest.approx(want, rel=1e-11, abs=1e-12), x

    def test_trigamma_against_mpmath(self):
        xs = np.concatenate([
            np.linspace(0.01, 0.99, 30),
            np.linspace(1.0, 12.0, 45),
            np.array([50.0, 200.0, 1e3]),
        ])
        for x in xs:
            want = float(mpmath.polygamma(1, mpmath.mpf(x)))
            got = bd.trigamma(float(x))
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12), x

    def test_vectorized_matches_scalar(self):
        xs = np.array([0.25, 1.0, 3.5, 12.0])
        for fn in (bd.log_gamma, bd.digamma, bd.trigamma):
            vec = fn(xs)
            assert isinstance(vec, np.ndarray)
            for i, x in enumerate(xs):
                assert vec[i] == pytest.approx(fn(float(x)), rel=1e-14)

    def test_rejects_nonpositive(self):
        for fn in (bd.log_gamma, bd.digamma, bd.trigamma):
            with pytest.raises(ValueError):
                fn(0.0)
            with pytest.raises(ValueError):
                fn(-1.0)
            with pytest.raises(ValueError):
                fn(float("nan"))


class TestClosedFormsVsQuadrature:
    """Criterion: closed forms match quadrature within 1e-6 on the grid, fast."""

    def test_grid_suite_under_budget(self):
        t0 = time.monotonic()
        for a, b in _grid_pairs():
            p = bd.BetaParams(a, b)
            pdf = lambda x: math.exp(bd.beta_log_pdf(p, x))
            # Normalization: the log-pdf must integrate to one.
            total, _ = integrate.quad(pdf, 0.0, 1.0, limit=200)
            assert total == pytest.approx(1.0, abs=1e-6), (a, b)
            # Differential entropy.
            ent, _ = integrate.quad(
                lambda x: -pdf(x) * bd.beta_log_pdf(p, x), 0.0, 1.0, limit=200
            )
            assert bd.beta_entropy(p) == pytest.approx(ent, abs=1e-6), (a, b)
        # KL over all grid pairs vs quadrature.
        for a1, b1 in [(0.5, 0.5), (1.0, 2.5), (2.5, 1.0), (5.0, 1.5), (1.5, 5.0)]:
            for a2, b2 in [(1.0, 1.0), (2.5, 2.5), (0.5, 5.0), (5.0, 0.5)]:
                p = bd.BetaParams(a1, b1)
                q = bd.BetaParams(a2, b2)
                integrand = lambda x: math.exp(bd.beta_log_pdf(p, x)) * (
                    bd.beta_log_pdf(p, x) - bd.beta_log_pdf(q, x)
                )
                want, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
                assert bd.beta_kl(p, q) == pytest.approx(want, abs=1e-6), (p, q)
        assert time.monotonic() - t0 < 10.0

    def test_uniform_entropy_is_zero(self):
        assert bd.beta_entropy(bd.BetaParams(1.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_scaled_entropy_adds_ln2_per_dim(self):
        d = bd.ActionDist(bd.BetaParams(2.0, 3.0), bd.BetaParams(1.0, 1.0))
        unit = bd.beta_entropy(d.steer) + bd.beta_entropy(d.accel)
        assert bd.dist_entropy_scaled(d) == pytest.approx(unit + 2.0 * math.log(2.0))


@st.composite
def beta_params(draw):
    a = draw(st.floats(min_value=0.05, max_value=50.0, allow_nan=False))
    b = draw(st.floats(min_value=0.05, max_value=50.0, allow_nan=False))
    return bd.BetaParams(a, b)


class TestKLProperties:
    @settings(max_examples=200, deadline=None)
    @given(beta_params(), beta_params())
    def test_kl_nonnegative(self, p, q):
        assert bd.beta_kl(p, q) >= -1e-9

    @settings(max_examples=100, deadline=None)
    @given(beta_params())
    def test_kl_self_is_zero(self, p):
        assert bd.beta_kl(p, p) == pytest.approx(0.0, abs=1e-9)

    def test_grid_kl_nonnegative(self):
        for p in _grid_pairs():
            for q in _grid_pairs():
                assert bd.beta_kl(bd.BetaParams(*p), bd.BetaParams(*q)) >= -1e-12

    def test_dist_kl_sums_dimensions(self):
        p = bd.ActionDist(bd.BetaParams(1.0, 2.5), bd.BetaParams(2.5, 1.0))
        q = bd.ActionDist(bd.BetaParams(1.0, 1.0), bd.BetaParams(1.0, 1.0))
        want = bd.beta_kl(p.steer, q.steer) + bd.beta_kl(p.accel, q.accel)
        assert bd.dist_kl(p, q) == pytest.approx(want)


class TestModeRule:
    """All five cases, including argmax consistency for unimodal shapes."""

    def test_interior_mode(self):
        p = bd.BetaParams(2.5, 5.0)
        assert bd.beta_mode_unit(p) == pytest.approx(1.5 / 5.5)

    def test_left_boundary_case(self):
        # alpha <= 1 < beta pins the mode at 0: the braking prior shape.
        assert bd.beta_mode_unit(bd.BetaParams(1.0, 2.5)) == 0.0
        assert bd.beta_mode_unit(bd.BetaParams(0.5, 2.0)) == 0.0

    def test_right_boundary_case(self):
        assert bd.beta_mode_unit(bd.BetaParams(2.5, 1.0)) == 1.0
        assert bd.beta_mode_unit(bd.BetaParams(2.0, 0.5)) == 1.0

    def test_mean_fallback(self):
        # Bimodal and uniform shapes have no unique mode; fall back to mean.
        assert bd.beta_mode_unit(bd.BetaParams(0.5, 0.5)) == pytest.approx(0.5)
        assert bd.beta_mode_unit(bd.BetaParams(1.0, 1.0)) == pytest.approx(0.5)

    def test_argmax_consistency_on_grid(self):
        xs = np.linspace(1e-4, 1.0 - 1e-4, 1001)
        for a, b in _grid_pairs():
            if a <= 1.0 and b <= 1.0:
                continue  # not unimodal-interior or boundary-peaked? skip fallback shapes
            p = bd.BetaParams(a, b)
            dens = np.array([bd.beta_log_pdf(p, float(x)) for x in xs])
            grid_mode = float(xs[int(np.argmax(dens))])
            assert abs(bd.beta_mode_unit(p) - grid_mode) < 2e-3, (a, b)

    def test_scaled_action_range(self):
        for a, b in _grid_pairs():
            v = bd.deterministic_action(bd.BetaParams(a, b))
            assert -1.0 <= v <= 1.0


class TestSampling:
    def test_samples_in_open_interval_and_deterministic(self):
        rng1 = np.random.default_rng(7)
        rng2 = np.random.default_rng(7)
        p = bd.BetaParams(0.5, 3.0)
        xs1 = [bd.sample(p, rng1) for _ in range(500)]
        xs2 = [bd.sample(p, rng2) for _ in range(500)]
        assert xs1 == xs2
        assert all(0.0 < x < 1.0 for x in xs1)

    def test_sample_moments(self):
        rng = np.random.default_rng(123)
        for a, b in [(2.0, 5.0), (5.0, 1.5), (0.5, 0.5), (1.0, 2.5)]:
            p = bd.BetaParams(a, b)
            xs = np.array([bd.sample(p, rng) for _ in range(20000)])
            mean = a / (a + b)
            var = a * b / ((a + b) ** 2 * (a + b + 1.0))
            assert xs.mean() == pytest.approx(mean, abs=4.0 * math.sqrt(var / len(xs)) + 1e-3)
            assert xs.var() == pytest.approx(var, rel=0.08)

    def test_sample_ks_against_cdf(self):
        from scipy import stats

        rng = np.random.default_rng(99)
        for a, b in [(2.0, 2.0), (0.7, 3.0), (4.0, 1.2)]:
            xs = np.array([bd.sample(bd.BetaParams(a, b), rng) for _ in range(4000)])
            stat, pval = stats.kstest(xs, stats.beta(a, b).cdf)
            assert pval > 1e-3, (a, b, stat, pval)


class TestValidation:
    def test_params_must_be_positive_finite(self):
        for bad in [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (math.nan, 1.0), (math.inf, 1.0)]:
            with pytest.raises(ValueError):
                bd.BetaParams(*bad)

    def test_network_clamp(self):
        p = bd.BetaParams.from_network(1e9, 1e-9)
        assert p.alpha == bd.PARAM_MAX
        assert p.beta == bd.PARAM_MIN

    def test_log_pdf_domain(self):
        p = bd.BetaParams(2.0, 2.0)
        with pytest.raises(ValueError):
            bd.beta_log_pdf(p, 0.0)
        with pytest.raises(ValueError):
            bd.beta_log_pdf(p, 1.0)

    def test_params_array_roundtrip(self):
        d = bd.ActionDist(bd.BetaParams(1.5, 2.5), bd.BetaParams(3.0, 0.5))
        back = bd.ActionDist.from_params_array(d.params_array())
        assert back == d
