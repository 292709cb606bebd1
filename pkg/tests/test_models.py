import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln
from scipy.stats import poisson as sp_poisson

from pie import (
    ConfigError,
    DataError,
    LinearFunctional,
    ModelSpec,
    ObservationSet,
    TemperedTarget,
    apply_functional,
    partition,
    tempered_log_density,
)


class TestPartition:
    def test_disjoint_cover_small(self):
        plan = partition(6, 3, 7)
        assert sorted(plan.shard_sizes) == [2, 2, 2]
        seen = np.concatenate([plan.shard_indices(j) for j in range(3)])
        assert sorted(seen) == list(range(6))

    def test_remainder_rule(self):
        plan = partition(7, 3, 1)
        assert plan.shard_sizes.tolist() == [3, 2, 2]

    def test_divisible(self):
        plan = partition(10000, 10, 0)
        assert plan.shard_sizes.tolist() == [1000] * 10

    def test_invalid(self):
        with pytest.raises(ConfigError):
            partition(5, 0, 0)
        with pytest.raises(ConfigError):
            partition(5, 6, 0)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 200), seed=st.integers(-(2 ** 31), 2 ** 31),
           data=st.data())
    def test_properties(self, n, seed, data):
        K = data.draw(st.integers(1, n))
        plan = partition(n, K, seed)
        shards = [plan.shard_indices(j) for j in range(K)]
        union = np.concatenate(shards)
        assert union.size == n and np.unique(union).size == n
        assert plan.shard_sizes.max() - plan.shard_sizes.min() <= 1
        again = partition(n, K, seed)
        assert np.array_equal(plan.assignments, again.assignments)


class TestTemperedLogDensity:
    def poisson_target(self, y, temper, a=1.0, b=1.0):
        model = ModelSpec("poisson-gamma", {"a": a, "b": b})
        return TemperedTarget(model, ObservationSet(y), temper)

    def test_hand_worked_value(self):
        # 2 * (sum_i y_i log 1 - 3 - log(1! 2! 3!)) + log Gamma(1,1) kernel at 1
        target = self.poisson_target([1, 2, 3], temper=2.0)
        expected = 2.0 * (-3.0 - np.log(12.0)) - 1.0
        assert tempered_log_density(target, [1.0]) == pytest.approx(expected, rel=1e-12)

    def test_untempered_equals_ordinary_kernel(self):
        t1 = self.poisson_target([4, 0, 2], temper=1.0)
        # manual: loglik + logprior for Gamma(1,1) prior
        theta = 1.7
        loglik = sp_poisson.logpmf([4, 0, 2], theta).sum()
        assert tempered_log_density(t1, [theta]) == pytest.approx(loglik - theta, rel=1e-12)

    def test_linear_in_temper(self):
        y = [2, 1, 5, 0]
        base = self.poisson_target(y, temper=1.0)
        for c in (1.0, 2.5, 7.0):
            tc = self.poisson_target(y, temper=c)
            t2c = self.poisson_target(y, temper=2 * c)
            theta = [0.9]
            prior = tempered_log_density(base, theta) - sp_poisson.logpmf(y, 0.9).sum()
            lhs = tempered_log_density(t2c, theta) - prior
            rhs = 2.0 * (tempered_log_density(tc, theta) - prior)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_matches_direct_sum_random_inputs(self):
        g = np.random.default_rng(5)
        for _ in range(10):
            y = g.poisson(4.0, size=g.integers(1, 20))
            K = float(g.integers(1, 9))
            theta = float(g.uniform(0.2, 6.0))
            target = self.poisson_target(y, temper=K, a=2.0, b=0.5)
            loglik = sp_poisson.logpmf(y, theta).sum()
            logprior = 2.0 * np.log(0.5) - gammaln(2.0) + np.log(theta) - 0.5 * theta
            got = tempered_log_density(target, [theta])
            assert got == pytest.approx(K * loglik + logprior, rel=1e-10)

    def test_support_sentinel(self):
        target = self.poisson_target([1, 2], temper=2.0)
        assert tempered_log_density(target, [-1.0]) == -np.inf
        assert tempered_log_density(target, [0.0]) == -np.inf
        bern = TemperedTarget(
            ModelSpec("bernoulli-beta", {"a": 1, "b": 1}), ObservationSet([0, 1]), 2.0
        )
        assert tempered_log_density(bern, [1.5]) == -np.inf

    def test_temper_below_one_rejected(self):
        with pytest.raises(ConfigError):
            self.poisson_target([1], temper=0.5)

    def test_exponential_family_matches_scipy(self):
        from scipy.stats import expon, gamma as sp_gamma

        y = [0.5, 1.5, 0.2]
        model = ModelSpec("exponential-gamma", {"a": 2.0, "b": 1.0})
        target = TemperedTarget(model, ObservationSet(y), 3.0)
        theta = 1.3
        loglik = expon.logpdf(y, scale=1.0 / theta).sum()
        logprior = sp_gamma.logpdf(theta, 2.0, scale=1.0)
        assert tempered_log_density(target, [theta]) == pytest.approx(
            3.0 * loglik + logprior, rel=1e-10)

    def test_bernoulli_family_matches_scipy(self):
        from scipy.stats import bernoulli as sp_bern, beta as sp_beta

        y = [1, 0, 0, 1, 1]
        model = ModelSpec("bernoulli-beta", {"a": 2.0, "b": 3.0})
        target = TemperedTarget(model, ObservationSet(y), 5.0)
        theta = 0.35
        loglik = sp_bern.logpmf(y, theta).sum()
        logprior = sp_beta.logpdf(theta, 2.0, 3.0)
        assert tempered_log_density(target, [theta]) == pytest.approx(
            5.0 * loglik + logprior, rel=1e-10)

    def test_normal_linear_density_finite(self):
        model = ModelSpec(
            "normal-linear-nig",
            {"a": 6.0, "b": 2.0, "mu_star": [0.0, 0.0], "omega": np.eye(2)},
            parameter_dim=3,
        )
        obs = ObservationSet([1.0, -1.0, 0.5], design=[[1, 1], [1, -1], [-1, 1]])
        target = TemperedTarget(model, obs, 3.0)
        assert np.isfinite(tempered_log_density(target, [0.1, -0.2, 1.3]))
        assert tempered_log_density(target, [0.1, -0.2, -1.0]) == -np.inf


class TestApplyFunctional:
    def test_coordinate_projection(self):
        draws = np.array([[1.0, 2.0], [3.0, 4.0]])
        f = LinearFunctional([1.0, 0.0])
        assert np.array_equal(apply_functional(f, draws), draws[:, 0])

    def test_affine(self):
        f = LinearFunctional([0.0, 2.0], b=1.0)
        assert apply_functional(f, np.array([[3.0, 5.0]]))[0] == 11.0

    def test_sum_of_identity(self):
        f = LinearFunctional([1.0, 1.0])
        out = apply_functional(f, np.eye(2))
        assert np.array_equal(out, [1.0, 1.0])

    def test_shape_error(self):
        with pytest.raises(ConfigError):
            apply_functional(LinearFunctional([1.0]), np.ones((3, 2)))

    def test_commutes_with_row_permutation(self):
        g = np.random.default_rng(0)
        draws = g.standard_normal((50, 3))
        f = LinearFunctional([0.5, -1.0, 2.0], b=0.3)
        perm = g.permutation(50)
        assert np.allclose(apply_functional(f, draws)[perm],
                           apply_functional(f, draws[perm]))

    def test_zero_functional_rejected(self):
        with pytest.raises(ConfigError):
            LinearFunctional([0.0, 0.0])


class TestTypes:
    def test_observation_validation(self):
        with pytest.raises(DataError):
            ObservationSet([])
        with pytest.raises(DataError):
            ObservationSet([1.0, np.inf])
        with pytest.raises(DataError):
            ObservationSet([1.0, 2.0], design=[[1.0]])

    def test_take(self):
        obs = ObservationSet([1.0, 2.0, 3.0], design=[[1], [2], [3]])
        sub = obs.take([2, 0])
        assert sub.responses.tolist() == [3.0, 1.0]
        assert sub.design[:, 0].tolist() == [3.0, 1.0]

    def test_modelspec_validation(self):
        with pytest.raises(ConfigError):
            ModelSpec("poisson-gamma", {"a": 0.0, "b": 1.0})
        with pytest.raises(ConfigError):
            ModelSpec("nope", {})
        with pytest.raises(ConfigError):
            ModelSpec("normal-linear-nig",
                      {"a": 4.0, "b": 1.0, "mu_star": [0.0], "omega": [[1.0]]},
                      parameter_dim=2)
        with pytest.raises(ConfigError):
            ModelSpec("normal-linear-nig",
                      {"a": 5.0, "b": 1.0, "mu_star": [0.0], "omega": [[-1.0]]},
                      parameter_dim=2)

    def test_immutable(self):
        obs = ObservationSet([1.0, 2.0])
        with pytest.raises(ValueError):
            obs.responses[0] = 9.0
