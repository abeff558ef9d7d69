import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvar.errors import ConfigError
from gvar.simulators import (
    LINEAR_EDGES,
    SimConfig,
    lorenz96_rhs,
    simulate,
)


class TestLorenz96:
    def test_truth_has_four_targets_per_source(self):
        _, truth = simulate(SimConfig(system="lorenz96", p=20, T=10))
        assert np.all(truth.adjacency.sum(axis=1) == 4)
        assert np.all(truth.adjacency.sum(axis=0) == 4)
        assert np.all(truth.sign == 0)
        # x^3 depends on x^1, x^2, x^3 and x^4
        assert truth.adjacency[[0, 1, 2, 3], 2].tolist() == [1, 1, 1, 1]
        assert truth.adjacency[19, 0] == 1 and truth.adjacency[18, 0] == 1

    def test_rhs_against_explicit_indices(self, rng):
        x = rng.normal(size=7)
        expected = [(x[(i + 1) % 7] - x[i - 2]) * x[i - 1] - x[i] + 3.0 for i in range(7)]
        assert np.allclose(lorenz96_rhs(x, 3.0), expected, atol=1e-14)

    def test_zero_state_is_fixed_point_without_forcing(self):
        series, _ = simulate(SimConfig(system="lorenz96", p=6, T=50, F=0.0, noise=0.0,
                                       x0=[0.0] * 6))
        assert np.all(series.values == 0.0)

    def test_unforced_energy_decays_exponentially(self):
        # advection conserves sum x^2, so it decays as exp(-2 t) when F = 0
        x0 = np.random.default_rng(3).normal(size=8)
        cfg = SimConfig(system="lorenz96", p=8, T=200, F=0.0, noise=0.0, burn_in=0,
                        stride=1, dt=0.01, x0=list(x0))
        series, _ = simulate(cfg)
        energy = np.sum(series.values ** 2, axis=1)
        assert np.all(np.diff(energy) <= 0)
        expected = energy[0] * np.exp(-2 * 0.01 * np.arange(200))
        assert np.max(np.abs(energy - expected) / expected) < 1e-6

    def test_bit_identical_given_seed(self):
        cfg = SimConfig(system="lorenz96", p=20, T=500, F=10, seed=7)
        a, _ = simulate(cfg)
        b, _ = simulate(SimConfig(**cfg.to_dict()))
        assert np.array_equal(a.values, b.values)
        c, _ = simulate(SimConfig(system="lorenz96", p=20, T=500, F=10, seed=8))
        assert not np.array_equal(a.values, c.values)

    def test_shape_and_names(self):
        series, _ = simulate(SimConfig(system="lorenz96", p=5, T=33))
        assert series.values.shape == (33, 5)
        assert series.names[0] == "x1"

    def test_small_p_rejected(self):
        with pytest.raises(ConfigError):
            simulate(SimConfig(system="lorenz96", p=3))


class TestLotkaVolterra:
    def test_default_truth_counts(self):
        _, truth = simulate(SimConfig(system="lotka_volterra", T=5))
        p = 10
        off = truth.sign.copy()
        np.fill_diagonal(off, 0)
        assert truth.adjacency.shape == (20, 20)
        # prey columns receive two negative parents, all predators
        assert np.all((off[:, :p] == -1).sum(axis=0) == 2)
        assert np.all((off[:, :p] == 1).sum(axis=0) == 0)
        assert np.all(np.nonzero(off[:, :p] == -1)[0] >= p)
        # predator columns receive two positive parents, all prey
        assert np.all((off[:, p:] == 1).sum(axis=0) == 2)
        assert np.all((off[:, p:] == -1).sum(axis=0) == 0)
        assert np.all(np.nonzero(off[:, p:] == 1)[0] < p)
        assert np.all(np.diag(truth.adjacency) == 1) and np.all(np.diag(truth.sign) == 0)

    def test_decoupled_species_have_no_edges(self):
        _, truth = simulate(SimConfig(system="lotka_volterra", T=5, beta=0.0, delta=0.0))
        assert np.array_equal(truth.adjacency, np.eye(20, dtype=int))

    def test_two_species_signs(self):
        _, truth = simulate(SimConfig(system="lotka_volterra", p=1, n_parents=1, T=5))
        assert truth.sign.tolist() == [[0, 1], [-1, 0]]

    def test_populations_nonnegative(self):
        series, _ = simulate(SimConfig(system="lotka_volterra", p=3, T=300, noise=2.0, seed=1))
        assert np.all(series.values >= 0)

    def test_noise_free_matches_scipy_integrator(self):
        integrate = pytest.importorskip("scipy.integrate")
        cfg = SimConfig(system="lotka_volterra", p=2, n_parents=1, T=50, noise=0.0, burn_in=0,
                        x0=[12.0, 15.0, 11.0, 14.0])

        def rhs(_, s):
            x, y = s[:2], s[2:]
            # prey i hunted by predator i; predator j eats prey j
            return np.concatenate([1.1 * x - 0.2 * x * y - 2.75e-5 * x * x,
                                   0.2 * y * x - 1.1 * y])

        times = cfg.dt * cfg.stride * np.arange(50)
        ref = integrate.solve_ivp(rhs, (0, times[-1]), cfg.x0, t_eval=times,
                                  rtol=1e-10, atol=1e-10, method="DOP853").y.T
        series, _ = simulate(cfg)
        assert np.max(np.abs(series.values - ref)) < 1e-4

    def test_nonpositive_start_rejected(self):
        with pytest.raises(ConfigError):
            simulate(SimConfig(system="lotka_volterra", p=1, n_parents=1, x0=[1.0, 0.0]))

    def test_bad_parent_count(self):
        with pytest.raises(ConfigError):
            simulate(SimConfig(system="lotka_volterra", p=2, n_parents=3))


class TestLinear:
    def test_truth_edges(self):
        _, truth = simulate(SimConfig(system="linear"))
        names = ["x", "w", "y", "z"]
        edges = {(names[j], names[i]) for j, i in zip(*np.nonzero(truth.adjacency))}
        assert edges == {("x", "x"), ("x", "w"), ("w", "w"), ("w", "y"), ("y", "y"),
                         ("w", "z"), ("y", "z"), ("z", "z")}
        assert len(LINEAR_EDGES) == 8

    def test_hand_recursion(self):
        cfg = SimConfig(system="linear", coefficients=[0.5] * 8, noise=0.0, burn_in=0,
                        x0=[1.0] * 4, T=4)
        series, truth = simulate(cfg)
        expected = [[1.0, 1.0, 1.0, 1.0],
                    [0.5, 1.0, 1.0, 1.5],
                    [0.25, 0.75, 1.0, 1.75],
                    [0.125, 0.5, 0.875, 1.75]]
        assert series.values.tolist() == expected
        assert np.all(truth.sign[truth.adjacency == 1] == 1)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_coefficient_support(self, seed):
        _, truth = simulate(SimConfig(system="linear", seed=seed, T=2))
        mags = np.abs(truth.coefficients)
        assert np.all((mags >= 0.2) & (mags <= 0.8))
        for a, (src, tgt) in zip(truth.coefficients, LINEAR_EDGES):
            assert truth.sign[src, tgt] == np.sign(a)

    def test_innovation_variance(self):
        cfg = SimConfig(system="linear", coefficients=[0.0] * 8, T=20000, seed=0)
        series, _ = simulate(cfg)
        assert abs(series.values.var() - 0.16) < 0.01


class TestConfig:
    @pytest.mark.parametrize("bad", [
        {"system": "henon"}, {"T": 1}, {"dt": 0.0}, {"noise": -1.0}, {"stride": 0},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            SimConfig(**bad)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            SimConfig.from_dict({"system": "linear", "sigma": 1})
