import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mvergo as mv
from mvergo.measures import CloudTooLargeError, SizeMismatchError


def w2_bruteforce(a: np.ndarray, b: np.ndarray) -> float:
    """Independent oracle: minimum over all permutation matchings (n <= 7)."""
    n = a.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(float(np.sum((a[i] - b[j]) ** 2)) for i, j in enumerate(perm))
        best = min(best, cost)
    return math.sqrt(best / n)


def random_cloud(rng, n, d, scale=1.0, shift=0.0):
    return mv.EmpiricalMeasure(shift + scale * rng.standard_normal((n, d)))


class TestEmpiricalMeasure:
    def test_one_dim_list_is_column(self):
        mu = mv.EmpiricalMeasure([1.0, 2.0, 3.0])
        assert mu.size == 3 and mu.dim == 1

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            mv.EmpiricalMeasure([[np.nan]])

    def test_points_read_only(self):
        mu = mv.EmpiricalMeasure([[1.0, 2.0]])
        with pytest.raises(ValueError):
            mu.points[0, 0] = 5.0

    def test_second_moment(self):
        mu = mv.EmpiricalMeasure([[3.0, 4.0], [0.0, 0.0]])
        assert mu.second_moment() == pytest.approx(12.5)


class TestW2Exact:
    def test_identical_clouds_zero(self):
        rng = np.random.default_rng(0)
        mu = random_cloud(rng, 20, 3)
        assert mv.w2_exact(mu, mu) == 0.0

    def test_single_points(self):
        mu = mv.EmpiricalMeasure([[1.0, 2.0]])
        nu = mv.EmpiricalMeasure([[4.0, 6.0]])
        assert mv.w2_exact(mu, nu) == pytest.approx(5.0)

    def test_two_point_1d_prefers_parallel_matching(self):
        mu = mv.EmpiricalMeasure([0.0, 1.0])
        nu = mv.EmpiricalMeasure([2.0, 3.0])
        # parallel matching costs sqrt((4+4)/2)=2, crossing sqrt((9+1)/2)
        assert mv.w2_exact(mu, nu) == pytest.approx(2.0)
        assert w2_bruteforce(mu.points, nu.points) == pytest.approx(2.0)

    @pytest.mark.parametrize("n,d,seed", [(4, 1, 1), (5, 2, 2), (6, 3, 3), (7, 2, 4)])
    def test_matches_bruteforce(self, n, d, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_cloud(rng, n, d), random_cloud(rng, n, d, shift=0.7)
        assert mv.w2_exact(mu, nu) == pytest.approx(
            w2_bruteforce(mu.points, nu.points), abs=1e-12
        )

    def test_size_and_cap_errors(self):
        rng = np.random.default_rng(5)
        with pytest.raises(SizeMismatchError):
            mv.w2_exact(random_cloud(rng, 3, 1), random_cloud(rng, 4, 1))
        with pytest.raises(SizeMismatchError):
            mv.w2_exact(random_cloud(rng, 3, 1), random_cloud(rng, 3, 2))
        big = random_cloud(rng, 600, 1)
        with pytest.raises(CloudTooLargeError, match="w2_sliced|subsample"):
            mv.w2_exact(big, big)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 24), st.integers(1, 3), st.integers(0, 10**6))
    def test_metric_axioms(self, n, d, seed):
        rng = np.random.default_rng(seed)
        mu, nu, rho = (random_cloud(rng, n, d) for _ in range(3))
        dmn = mv.w2_exact(mu, nu)
        assert dmn == pytest.approx(mv.w2_exact(nu, mu), abs=1e-12)
        assert dmn <= mv.w2_exact(mu, rho) + mv.w2_exact(rho, nu) + 1e-9
        assert mv.w2_exact(mu, mu) == 0.0

    def test_zero_iff_equal_as_multisets(self):
        mu = mv.EmpiricalMeasure([1.0, 2.0, 3.0])
        nu = mv.EmpiricalMeasure([3.0, 1.0, 2.0])  # permuted
        assert mv.w2_exact(mu, nu) == 0.0
        assert mv.w2_exact(mu, mv.EmpiricalMeasure([1.0, 2.0, 3.5])) > 0.0


class TestW2Sliced:
    def test_1d_equals_exact(self):
        rng = np.random.default_rng(7)
        mu, nu = random_cloud(rng, 64, 1), random_cloud(rng, 64, 1, shift=1.0)
        assert mv.w2_sliced(mu, nu, 5, seed=0) == pytest.approx(
            mv.w2_exact(mu, nu), abs=1e-12
        )

    def test_identical_zero(self):
        rng = np.random.default_rng(8)
        mu = random_cloud(rng, 32, 4)
        assert mv.w2_sliced(mu, mu, 8, seed=0) == 0.0

    def test_shifted_gaussian_bounded_by_shift(self):
        shift = np.array([3.0, 0.0])
        mu = mv.GaussianLaw([0.0, 0.0], np.eye(2)).sample(256, 1)
        nu = mv.EmpiricalMeasure(mu.points + shift)
        sliced = mv.w2_sliced(mu, nu, 64, seed=2)
        exact = mv.w2_exact(mu, nu)
        assert exact == pytest.approx(3.0, abs=1e-12)
        assert sliced <= 3.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(4, 128), st.integers(0, 10**6))
    def test_never_exceeds_exact(self, n, seed):
        rng = np.random.default_rng(seed)
        mu = random_cloud(rng, n, 2)
        nu = random_cloud(rng, n, 2, scale=1.3, shift=0.4)
        assert mv.w2_sliced(mu, nu, 16, seed) <= mv.w2_exact(mu, nu) * (1 + 1e-9)

    def test_zero_dirs_rejected(self):
        mu = mv.EmpiricalMeasure([0.0, 1.0])
        with pytest.raises(ValueError):
            mv.w2_sliced(mu, mu, 0, seed=0)


class TestGaussianLaw:
    def test_validates_symmetry_and_psd(self):
        with pytest.raises(ValueError):
            mv.GaussianLaw([0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(ValueError):
            mv.GaussianLaw([0.0], [[-1.0]])

    def test_gaussian_w2_closed_forms(self):
        n01 = mv.GaussianLaw(0.0, 1.0)
        assert mv.gaussian_w2(n01, n01) == 0.0
        assert mv.gaussian_w2(n01, mv.GaussianLaw(3.0, 1.0)) == pytest.approx(3.0)
        # 1D: sqrt(dm^2 + (s_a - s_b)^2)
        assert mv.gaussian_w2(n01, mv.GaussianLaw(0.0, 4.0)) == pytest.approx(1.0)

    def test_gaussian_kl_closed_forms(self):
        n01 = mv.GaussianLaw(0.0, 1.0)
        assert mv.gaussian_kl(n01, n01) == 0.0
        assert mv.gaussian_kl(mv.GaussianLaw(1.0, 1.0), n01) == pytest.approx(0.5)
        assert mv.gaussian_kl(mv.GaussianLaw(0.0, 2.0), n01) == pytest.approx(
            0.5 * (2.0 - 1.0 - math.log(2.0))
        )

    def test_kl_singular_reference_is_infinite(self):
        n01 = mv.GaussianLaw(0.0, 1.0)
        assert mv.gaussian_kl(n01, mv.GaussianLaw(0.0, 0.0)) == math.inf

    def test_kl_quadrature_oracle_1d(self):
        # independent check of the closed form by numerical integration
        a, b = mv.GaussianLaw(0.7, 2.3), mv.GaussianLaw(-0.2, 1.1)
        xs = np.linspace(-15, 15, 200001)
        pa = np.exp(-((xs - 0.7) ** 2) / (2 * 2.3)) / math.sqrt(2 * math.pi * 2.3)
        pb = np.exp(-((xs + 0.2) ** 2) / (2 * 1.1)) / math.sqrt(2 * math.pi * 1.1)
        oracle = float(np.trapezoid(pa * np.log(pa / pb), xs))
        assert mv.gaussian_kl(a, b) == pytest.approx(oracle, abs=1e-8)

    def test_gaussian_w2_agrees_with_exact_on_samples(self):
        a, b = mv.GaussianLaw(0.0, 1.0), mv.GaussianLaw(3.0, 1.0)
        vals = [mv.w2_exact(a.sample(512, 50 + i), b.sample(512, 950 + i)) for i in range(12)]
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        assert abs(float(np.mean(vals)) - 3.0) <= 3 * se

    def test_talagrand_with_gaussian_constant_on_random_grid(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            d = int(rng.integers(1, 4))
            q = rng.standard_normal((d, d))
            cov = q @ q.T + 0.3 * np.eye(d)
            inv = mv.GaussianLaw(rng.standard_normal(d), cov)
            q0 = rng.standard_normal((d, d))
            mu0 = mv.GaussianLaw(
                inv.mean + rng.standard_normal(d), q0 @ q0.T + 0.2 * np.eye(d)
            )
            c_const = 2.0 * float(np.linalg.eigvalsh(cov).max())
            kl = mv.gaussian_kl(mu0, inv)
            assert mv.gaussian_w2(mu0, inv) ** 2 <= c_const * kl * (1 + 1e-12)


class TestMomentMatch:
    def test_two_point_cloud(self):
        g = mv.moment_match(mv.EmpiricalMeasure([-1.0, 1.0]))
        assert g.mean == pytest.approx([0.0])
        assert g.cov[0, 0] == pytest.approx(1.0)

    def test_repeated_point_degenerate(self):
        g = mv.moment_match(mv.EmpiricalMeasure([2.0, 2.0]))
        assert g.mean == pytest.approx([2.0])
        assert g.cov[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_large_standard_normal_sample(self):
        mu = mv.standard_normal_cloud(100000, 2, seed=3)
        g = mv.moment_match(mu)
        assert np.max(np.abs(g.cov - np.eye(2))) < 0.05

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            mv.moment_match(mv.EmpiricalMeasure([1.0]))


class TestExpQuadraticMoment:
    def test_point_mass_at_origin(self):
        rep = mv.exp_quadratic_moment(mv.point_cloud([0.0], 5), 0.3)
        assert rep.estimate == 1.0 and not rep.overflowed

    def test_two_point_cloud(self):
        rep = mv.exp_quadratic_moment(mv.EmpiricalMeasure([1.0, -1.0]), 1.0)
        assert rep.estimate == pytest.approx(math.e)

    def test_gaussian_analytic_value(self):
        # E exp(eps x^2) = (1 - 2 eps)^{-1/2} for x ~ N(0,1)
        mu = mv.standard_normal_cloud(200000, 1, seed=11)
        rep = mv.exp_quadratic_moment(mu, 0.25)
        assert rep.estimate == pytest.approx(math.sqrt(2.0), rel=0.02)

    def test_overflow_flagged_not_fatal(self):
        rep = mv.exp_quadratic_moment(mv.EmpiricalMeasure([50.0]), 1.0)
        assert rep.overflowed and rep.estimate == math.inf

    def test_estimate_at_least_one_property(self):
        rng = np.random.default_rng(4)
        for seed in range(10):
            mu = random_cloud(np.random.default_rng(seed), 50, 2)
            assert mv.exp_quadratic_moment(mu, 0.1).estimate >= 1.0


class TestCloudCsv:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 4), st.integers(0, 10**6))
    def test_round_trip_bit_exact(self, n, d, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        mu = mv.EmpiricalMeasure(rng.standard_normal((n, d)) * 10.0 ** rng.integers(-8, 8))
        path = tmp_path_factory.mktemp("clouds") / "cloud.csv"
        mv.save_cloud(mu, path)
        back = mv.load_cloud(path)
        assert np.array_equal(back.points, mu.points)

    def test_header_required(self, tmp_path):
        path = tmp_path / "noheader.csv"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(ValueError, match="header"):
            mv.load_cloud(path)

    def test_header_written(self, tmp_path):
        path = tmp_path / "c.csv"
        mv.save_cloud(mv.EmpiricalMeasure([[1.0, 2.0]]), path)
        assert path.read_text().splitlines()[0] == "x1,x2"


class TestSubsample:
    def test_cap_respected_and_deterministic(self):
        mu = mv.standard_normal_cloud(1000, 2, seed=5)
        sub1 = mv.subsample(mu, 128, seed=9)
        sub2 = mv.subsample(mu, 128, seed=9)
        assert sub1.size == 128
        assert np.array_equal(sub1.points, sub2.points)

    def test_small_cloud_passthrough(self):
        mu = mv.standard_normal_cloud(10, 1, seed=5)
        assert mv.subsample(mu, 128, seed=0) is mu
