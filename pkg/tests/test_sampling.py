import math

import numpy as np
import pytest
from scipy import stats

from dburr.distribution import BurrParams, DBurrParams, burr_cdf, dburr_moment, dburr_pmf, dburr_survival
from dburr.errors import DomainError
from dburr.sampling import (
    Sample,
    SeededGenerator,
    dburr_quantile,
    read_sample_csv,
    sample_continuous_burr,
    sample_dburr,
    sample_dburr_quantile,
    uniform_to_burr,
    write_sample_csv,
)


def chi2_pvalue(values, p, min_expected=20.0):
    """Chi-square goodness of fit with adjacent low-count bins pooled into a tail bin."""
    n = values.size
    edges = []
    x = 0
    while n * dburr_survival(x, p) >= 2 * min_expected:
        if n * dburr_pmf(x, p) < min_expected:
            break
        edges.append(x)
        x += 1
    expected = np.array([n * dburr_pmf(e, p) for e in edges] + [n * dburr_survival(len(edges), p)])
    observed = np.array([np.sum(values == e) for e in edges] + [np.sum(values >= len(edges))])
    return stats.chisquare(observed, expected).pvalue


class TestGenerator:
    def test_deterministic(self):
        a = SeededGenerator(42).uniform(100)
        b = SeededGenerator(42).uniform(100)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, SeededGenerator(43).uniform(100))

    def test_open_interval(self):
        u = SeededGenerator(0).uniform(10**5)
        assert u.min() > 0 and u.max() < 1
        assert isinstance(SeededGenerator(0).uniform(), float)

    def test_uniformity(self):
        u = SeededGenerator(5).uniform(10**5)
        assert stats.kstest(u, "uniform").pvalue > 1e-3

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(DomainError):
            SeededGenerator(seed)

    def test_max_seed_ok(self):
        SeededGenerator(2**64 - 1).uniform()

    def test_spawn_is_pure(self):
        assert SeededGenerator(9).spawn_seeds(3) == SeededGenerator(9).spawn_seeds(3)
        assert len(set(SeededGenerator(9).spawn_seeds(3))) == 3


class TestSample:
    def test_validation(self):
        for bad in ([], [1.5], [-1], [np.inf]):
            with pytest.raises(DomainError):
                Sample(np.array(bad, dtype=float))

    def test_support_counts(self):
        s = Sample([0, 2, 2, 5, 0, 0])
        assert np.array_equal(s.support, [0, 2, 5])
        assert np.array_equal(s.counts, [3, 2, 1])
        assert s.n == len(s) == 6

    def test_immutable(self):
        s = Sample([1, 2])
        with pytest.raises(ValueError):
            s.values[0] = 3


class TestContinuous:
    def test_inverse_survival(self):
        p = BurrParams(2.0, 1.5)
        u = np.array([0.9, 0.5, 0.01])
        x = uniform_to_burr(u, p)
        assert np.allclose(1.0 - burr_cdf(x, p), u, rtol=1e-12)

    def test_saturation(self):
        x = uniform_to_burr(1e-300, BurrParams(0.1, 0.01))
        assert np.isfinite(x) and x > 1e308

    def test_ks(self):
        p = BurrParams(3.0, 0.7)
        x = sample_continuous_burr(SeededGenerator(3), p, 20000)
        assert stats.kstest(x, lambda t: burr_cdf(t, p)).pvalue > 1e-3


class TestDiscrete:
    @pytest.mark.parametrize("alpha,theta", [(3, 0.2), (1, 0.5), (0.5, 0.3), (2, 0.9)])
    def test_floor_gof(self, alpha, theta):
        p = DBurrParams(alpha, theta)
        s = sample_dburr(SeededGenerator(11), p, 20000)
        assert chi2_pvalue(s.values, p) > 1e-3

    @pytest.mark.parametrize("alpha,theta", [(3, 0.2), (0.5, 0.3)])
    def test_quantile_gof(self, alpha, theta):
        p = DBurrParams(alpha, theta)
        s = sample_dburr_quantile(SeededGenerator(12), p, 20000)
        assert chi2_pvalue(s.values, p) > 1e-3

    def test_quantile_definition(self):
        p = DBurrParams(1.3, 0.4)
        u = SeededGenerator(1).uniform(2000)
        x = dburr_quantile(u, p)
        # smallest x with F(x) >= u
        assert np.all(1.0 - dburr_survival(x + 1, p) >= u)
        lower = x[x > 0]
        assert np.all(1.0 - dburr_survival(lower, p) < u[x > 0])

    def test_quantile_bad_u(self):
        with pytest.raises(DomainError):
            dburr_quantile(np.array([0.0, 0.5]), DBurrParams(1, 0.5))

    def test_floor_equals_quantile_on_same_uniforms(self):
        # floor(Y) with S_Y(Y) = u is the discrete quantile at 1 - u
        p = DBurrParams(2.0, 0.2)
        u = SeededGenerator(2).uniform(5000)
        floor = np.floor(uniform_to_burr(u, p.to_continuous()))
        assert np.array_equal(floor, dburr_quantile(1.0 - u, p))

    def test_mean_matches_moment(self):
        p = DBurrParams(2.0, 0.2)
        s = sample_dburr(SeededGenerator(21), p, 10**5)
        m = dburr_moment(1, p)
        se = s.values.std(ddof=1) / math.sqrt(s.n)
        assert abs(s.values.mean() - m) < 3 * se

    def test_deterministic(self):
        p = DBurrParams(2.0, 0.3)
        assert np.array_equal(sample_dburr(SeededGenerator(7), p, 50).values,
                              sample_dburr(SeededGenerator(7), p, 50).values)

    def test_heavy_tail_stays_finite(self):
        s = sample_dburr(SeededGenerator(0), DBurrParams(0.2, 0.95), 1000)
        assert np.all(np.isfinite(s.values))


class TestCsv:
    def test_roundtrip(self, tmp_path):
        s = sample_dburr(SeededGenerator(8), DBurrParams(2, 0.2), 25)
        path = write_sample_csv(tmp_path / "s.csv", s, extra={"theta": 0.2})
        text = path.read_text().splitlines()
        assert text[0] == "# seed=8 theta=0.2" and text[1] == "x" and len(text) == 27
        back = read_sample_csv(path)
        assert back.seed == 8 and np.array_equal(back.values, s.values)

    def test_large_values_exact(self, tmp_path):
        s = Sample([0.0, 2.0**70])
        back = read_sample_csv(write_sample_csv(tmp_path / "s.csv", s))
        assert back.values[1] == 2.0**70

    def test_unwritable_path_in_message(self, tmp_path):
        target = tmp_path / "missing" / "s.csv"
        with pytest.raises(OSError, match="missing"):
            write_sample_csv(target, Sample([1.0]))

    def test_bad_content(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x\n1\n-2\n")
        with pytest.raises(DomainError):
            read_sample_csv(p)
        p.write_text("y\n1\n")
        with pytest.raises(DomainError, match="header"):
            read_sample_csv(p)
