import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvar.errors import InsufficientDataError, SingularityError, UndefinedTestError
from gvar.simulators import SimConfig, simulate
from gvar.var_baseline import benjamini_hochberg, fit_var, lagged_design, test_gc, var_signs


def var_series(coefs, T, seed, noise=0.0, c=None):
    """Iterate a VAR with the given ``[lag, target, source]`` matrices."""
    rng = np.random.default_rng(seed)
    K, p, _ = coefs.shape
    x = np.zeros((T, p))
    x[:K] = rng.normal(size=(K, p))
    c = np.zeros(p) if c is None else c
    for t in range(K, T):
        x[t] = c + sum(coefs[k] @ x[t - 1 - k] for k in range(K)) + noise * rng.normal(size=p)
    return x


def stable_coefs(rng, K, p):
    A = rng.uniform(-1, 1, size=(K, p, p))
    return A / (2.5 * K * p)


class TestFit:
    def test_exact_when_noise_free(self):
        # the transient towards the fixed point keeps [1, x_{t-1}] full rank
        M = np.array([[0.5, -0.3], [0.2, 0.4]])
        x = np.zeros((12, 2))
        x[0] = [1.0, -1.0]
        for t in range(1, 12):
            x[t] = M @ x[t - 1] + np.array([0.1, 0.05])
        model = fit_var(x, 1)
        assert np.max(np.abs(model.coefs[0] - M)) < 1e-8
        assert np.max(np.abs(model.intercept - [0.1, 0.05])) < 1e-8

    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.tsa.api")
        rng = np.random.default_rng(4)
        x = var_series(stable_coefs(rng, 2, 4), 300, 4, noise=1.0)
        ours = fit_var(x, 2)
        ref = sm.VAR(x).fit(2, trend="c")
        assert np.max(np.abs(ours.coefs - ref.coefs)) < 1e-10
        assert np.max(np.abs(ours.intercept - ref.intercept)) < 1e-10
        assert np.max(np.abs(ours.sigma_u - ref.sigma_u)) < 1e-10

    def test_constant_series_is_singular(self):
        with pytest.raises(SingularityError):
            fit_var(np.ones((50, 2)), 1)

    def test_duplicated_variable_is_singular(self):
        x = np.random.default_rng(0).normal(size=(80, 2))
        with pytest.raises(SingularityError):
            fit_var(np.column_stack([x, x[:, 0]]), 1)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            fit_var(np.random.default_rng(0).normal(size=(5, 3)), 1)  # T - K = Kp + 1

    def test_design_layout(self):
        x = np.arange(12.0).reshape(6, 2)
        Z = lagged_design(x, 2)
        assert Z.shape == (4, 5)
        assert Z[0].tolist() == [1.0, 2.0, 3.0, 0.0, 1.0]


class TestGrangerTests:
    def test_f_statistics_match_statsmodels_ols(self):
        sm = pytest.importorskip("statsmodels.api")
        rng = np.random.default_rng(7)
        K, p = 2, 3
        x = var_series(stable_coefs(rng, K, p), 250, 7, noise=1.0)
        result = test_gc(fit_var(x, K), x)
        Z = lagged_design(x, K)
        for target in range(p):
            full = sm.OLS(x[K:, target], Z).fit()
            for source in range(p):
                if source == target:
                    continue
                keep = np.ones(Z.shape[1], bool)
                keep[1 + source + p * np.arange(K)] = False
                restricted = sm.OLS(x[K:, target], Z[:, keep]).fit()
                f, pv, df = full.compare_f_test(restricted)
                assert abs(result.F[source, target] - f) < 1e-8 * max(1, f)
                assert abs(result.pvalues[source, target] - pv) < 1e-10
                assert df == K
        assert np.isnan(np.diag(result.F)).all()

    def test_recovers_linear_benchmark(self):
        off = ~np.eye(4, dtype=bool)
        false_pos = 0
        for seed in range(5):
            series, truth = simulate(SimConfig(system="linear", seed=seed, T=2000))
            pred = test_gc(fit_var(series, 1), series).adjacency
            assert np.all(pred[(truth.adjacency == 1) & off] == 1)
            false_pos += int(np.sum(pred[(truth.adjacency == 0) & off]))
        # 40 null pairs tested at FDR 0.05
        assert false_pos <= 3

    def test_signs_on_linear_data(self):
        series, truth = simulate(SimConfig(system="linear", seed=2, T=2000))
        model = fit_var(series, 1)
        signs = var_signs(model)
        edges = (truth.adjacency == 1) & ~np.eye(4, dtype=bool)
        assert np.array_equal(signs[edges], truth.sign[edges])

    def test_zero_residual_is_undefined(self):
        M = np.array([[0.5, -0.3], [0.2, 0.4]])
        x = np.zeros((12, 2))
        x[0] = [1.0, -1.0]
        for t in range(1, 12):
            x[t] = M @ x[t - 1] + np.array([0.1, 0.05])
        with pytest.raises(UndefinedTestError):
            test_gc(fit_var(x, 1), x)


class TestBenjaminiHochberg:
    def test_hand_case(self):
        pv = np.array([0.01, 0.04, 0.03, 0.005, 0.5])
        # sorted: 0.005, 0.01, 0.03, 0.04, 0.5 vs 0.01, 0.02, 0.03, 0.04, 0.05
        assert benjamini_hochberg(pv, 0.05).tolist() == [True, True, True, True, False]

    def test_step_up_rejects_below_a_failing_rank(self):
        pv = np.array([0.011, 0.02])  # 0.011 > 0.01 but 0.02 <= 0.02
        assert benjamini_hochberg(pv, 0.02).tolist() == [True, True]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0.001, 0.5))
    def test_matches_statsmodels(self, pv, q):
        multi = pytest.importorskip("statsmodels.stats.multitest")
        ref, *_ = multi.multipletests(pv, alpha=q, method="fdr_bh")
        assert benjamini_hochberg(pv, q).tolist() == ref.tolist()

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30),
           st.floats(0.001, 0.5), st.floats(0.001, 0.5))
    def test_monotone_in_q(self, pv, a, b):
        lo, hi = min(a, b), max(a, b)
        assert np.all(benjamini_hochberg(pv, lo) <= benjamini_hochberg(pv, hi))

    def test_empty(self):
        assert benjamini_hochberg([]).size == 0
