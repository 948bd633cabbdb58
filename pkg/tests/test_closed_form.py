import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dburr import closed_form
from dburr.closed_form import (
    MAX_EXPANSION_TERMS,
    closed_form_terms,
    exact_normalizer,
    exact_posterior_cdf,
    exact_posterior_density,
    exact_posterior_mean,
    exact_posterior_median,
    expansion_integral,
    log_exact_normalizer,
    product_normalizer,
    quadrature_integral,
    theta_bayes_product,
)
from dburr.distribution import DBurrParams
from dburr.errors import DomainError, InternalConsistencyError
from dburr.inference import PriorSpec, SuffStats, suff_stats
from dburr.sampling import Sample, SeededGenerator, sample_dburr


def mp_integral(A, w, dps=40):
    with mpmath.workdps(dps):
        f = lambda t: t ** (A - 1) * mpmath.fprod(1 - t ** mpmath.mpf(wi) for wi in w)
        return mpmath.quad(f, [0, 0.5, 1])


class TestSingleObservation:
    @pytest.mark.parametrize("x,alpha,a", [(0, 1.0, 1.0), (1, 2.0, 1.0), (7, 0.5, 3.0), (40, 3.0, 0.5)])
    def test_normalizer_closed_form(self, x, alpha, a):
        # integral of theta^(A-1) (1 - theta^w) is w / (A (A + w))
        stt = suff_stats(Sample([x]), alpha)
        A, w = a + stt.w1[0], stt.w[0]
        ref = w / (A * (A + w))
        prior = PriorSpec(a)
        assert product_normalizer(stt, prior) == pytest.approx(ref, rel=1e-13)
        assert exact_normalizer(stt, prior) == pytest.approx(ref, rel=1e-13)

    def test_mean_equals_exact(self):
        stt = suff_stats(Sample([1]), 1.0)
        prior = PriorSpec()
        est = theta_bayes_product(stt, prior)
        assert not est.clamped and est.value == est.raw
        assert est.value == pytest.approx(exact_posterior_mean(stt, prior), rel=1e-13)

    def test_terms(self):
        stt = suff_stats(Sample([3]), 2.0)
        t = closed_form_terms(stt, PriorSpec(2.0))
        assert t.delta[0] == pytest.approx(t.A) and t.tau[0] == pytest.approx(t.A + stt.w[0])
        assert t.lambda_[0] == pytest.approx(t.A + 1) and t.rho[0] == pytest.approx(t.A + 1 + stt.w[0])


class TestExactRoutes:
    @pytest.mark.parametrize("n,seed", [(2, 1), (5, 2), (10, 3)])
    def test_expansion_vs_quadrature_vs_mpmath(self, n, seed):
        s = sample_dburr(SeededGenerator(seed), DBurrParams(2.0, 0.3), n)
        stt = suff_stats(s, 2.0)
        A = 1.0 + stt.w1.sum()
        e = float(expansion_integral(A, stt.w))
        log_q, _, _ = quadrature_integral(A, stt.w)
        ref = float(mp_integral(A, stt.w))
        assert e == pytest.approx(ref, rel=1e-10)
        assert math.exp(log_q) == pytest.approx(ref, rel=1e-10)

    def test_equal_weights_grouped(self):
        # 30 identical observations: 31 grouped terms instead of 2**30
        w = np.full(30, 0.7)
        e = float(expansion_integral(2.0, w))
        # integral theta (1 - theta^0.7)^30 = B(2/0.7, 31) / 0.7
        ref = float(mpmath.beta(2 / 0.7, 31) / 0.7)
        assert e == pytest.approx(ref, rel=1e-12)

    def test_expansion_cap(self):
        w = np.linspace(0.1, 3.0, 25)  # 2**25 terms
        with pytest.raises(DomainError, match="cap"):
            expansion_integral(1.0, w)
        stt = SuffStats.from_arrays(np.ones(25), w)
        # falls back to quadrature alone
        assert math.isfinite(log_exact_normalizer(stt, PriorSpec()))

    def test_route_disagreement_raises(self, monkeypatch):
        stt = suff_stats(Sample([0, 3, 5]), 1.0)
        real = closed_form.quadrature_integral

        def skewed(A, w, lower_theta=0.0):
            lv, v, pk = real(A, w, lower_theta)
            return lv + 1e-6, v, pk

        monkeypatch.setattr(closed_form, "quadrature_integral", skewed)
        with pytest.raises(InternalConsistencyError):
            log_exact_normalizer(stt, PriorSpec())

    def test_underflow_safe(self):
        # huge A: the integral is about Gamma-like tiny, far below float range
        stt = SuffStats.from_arrays(np.full(5, 300.0), np.array([0.5, 1.0, 1.5, 2.0, 2.5]))
        lz = log_exact_normalizer(stt, PriorSpec())
        assert math.isfinite(lz) and lz < -20

    def test_lower_limit(self):
        w = np.array([0.4, 1.1])
        total = quadrature_integral(2.5, w)[0]
        upper = quadrature_integral(2.5, w, lower_theta=0.6)[0]
        f = lambda t: t**1.5 * (1 - t**0.4) * (1 - t**1.1)
        v, _ = integrate.quad(f, 0.6, 1.0, epsabs=0, epsrel=1e-13)
        assert math.exp(upper) == pytest.approx(v, rel=1e-10)
        assert upper < total


class TestPosterior:
    def test_mean_against_mpmath(self):
        s = Sample([0, 1, 2, 2, 6])
        stt = suff_stats(s, 1.5)
        prior = PriorSpec(2.0)
        A = 2.0 + stt.w1.sum()
        ref = float(mp_integral(A + 1, stt.w) / mp_integral(A, stt.w))
        assert exact_posterior_mean(stt, prior) == pytest.approx(ref, rel=1e-12)

    def test_density_integrates_to_one(self):
        stt = suff_stats(Sample([0, 2, 9]), 2.0)
        v, _ = integrate.quad(lambda t: exact_posterior_density(t, stt, PriorSpec()), 0, 1,
                              epsabs=0, epsrel=1e-11, limit=200)
        assert v == pytest.approx(1.0, rel=1e-9)

    def test_median(self):
        stt = suff_stats(Sample([0, 1, 4]), 1.0)
        prior = PriorSpec()
        med = exact_posterior_median(stt, prior)
        assert exact_posterior_cdf(med, stt, prior) == pytest.approx(0.5, abs=1e-9)
        # independent root of the high-precision CDF
        A = 1.0 + stt.w1.sum()
        z = mp_integral(A, stt.w)
        with mpmath.workdps(30):
            f = lambda t: t ** (A - 1) * mpmath.fprod(1 - t ** mpmath.mpf(wi) for wi in stt.w)
            root = mpmath.findroot(lambda m: mpmath.quad(f, [0, m]) / z - 0.5, med)
        assert med == pytest.approx(float(root), abs=1e-9)

    def test_cdf_limits(self):
        stt = suff_stats(Sample([2]), 1.0)
        assert exact_posterior_cdf(0.0, stt, PriorSpec()) == 0.0
        assert exact_posterior_cdf(1.0, stt, PriorSpec()) == 1.0
        c = [exact_posterior_cdf(t, stt, PriorSpec()) for t in (0.1, 0.3, 0.6, 0.9)]
        assert np.all(np.diff(c) > 0)

    def test_empty_data_is_prior(self):
        stt = SuffStats.from_arrays([], [])
        prior = PriorSpec(1.0)
        assert exact_posterior_mean(stt, prior) == 0.5
        assert exact_posterior_median(stt, prior) == pytest.approx(0.5)
        assert exact_posterior_cdf(0.3, stt, PriorSpec(2.0)) == pytest.approx(0.09)

    def test_product_needs_data(self):
        with pytest.raises(DomainError):
            closed_form_terms(SuffStats.from_arrays([], []), PriorSpec())

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=1, max_size=12), st.floats(0.3, 4.0), st.floats(0.2, 5.0))
    def test_product_estimate_in_unit_interval(self, xs, alpha, a):
        est = theta_bayes_product(suff_stats(Sample(xs), alpha), PriorSpec(a))
        assert 0.0 < est.value < 1.0 and not est.clamped

    def test_gap_grows_with_n(self):
        # the product form is exact for one observation only
        gaps = []
        for n in (1, 5, 20):
            stt = suff_stats(sample_dburr(SeededGenerator(n), DBurrParams(2.0, 0.3), n), 2.0)
            prior = PriorSpec()
            gaps.append(abs(theta_bayes_product(stt, prior).value - exact_posterior_mean(stt, prior)))
        assert gaps[0] < 1e-13 and gaps[2] > 1e-4
        assert MAX_EXPANSION_TERMS >= 2**20
