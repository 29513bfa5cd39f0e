"""Tests for the KdV pseudospectral solver and its frozen-observation benchmark."""

import json

import numpy as np
import pytest

from accboed.benchmarks.kdv import (
    KdvField,
    KdvSetup,
    SolverDiverged,
    default_initial_condition,
    kdv_observable,
    kdv_observable_batch,
    kdv_solve,
    load_kdv_observations,
    make_kdv_setup,
    save_kdv_observations,
    space_grid,
    true_posterior_samples,
)

THETA_TRUE = (6.0, 1.0)


def soliton(x, t, c=1.0, x0=15.0):
    """Traveling-wave solution of u_t + 6 u u_x + u_xxx = 0."""
    return (c / 2.0) / np.cosh(np.sqrt(c) * (x - c * t - x0) / 2.0) ** 2


@pytest.fixture(scope="module")
def setup():
    return make_kdv_setup(seed=0)


class TestSolver:
    def test_soliton_oracle(self):
        base = KdvSetup()
        x = space_grid(base)
        field = kdv_solve(THETA_TRUE, base, u0=soliton(x, 0.0))
        t1_row = 100  # t = 1.0 on the 500-step grid over [0, 5]
        assert np.max(np.abs(field.u[t1_row] - soliton(x, 1.0))) < 1e-3

    def test_mass_conservation(self):
        field = kdv_solve(THETA_TRUE, KdvSetup())
        mass = field.u.mean(axis=1)
        assert np.max(np.abs(mass - mass[0])) / abs(mass[0]) < 1e-6

    def test_timestep_halving(self):
        base = KdvSetup()
        coarse = kdv_solve(THETA_TRUE, base)
        fine = kdv_solve(THETA_TRUE, base, n_time=2 * base.n_time)
        assert np.max(np.abs(coarse.u[-1] - fine.u[-1])) < 1e-4

    def test_spectral_tail_monotone_in_dispersion(self):
        # Stronger dispersion smooths the field, so the high-wavenumber
        # energy at the final time decreases monotonically with theta2.
        base = KdvSetup()
        k = np.fft.fftfreq(base.n_space)
        tails = []
        for theta2 in (0.5, 1.0, 2.0):
            field = kdv_solve((6.0, theta2), base)
            spectrum = np.abs(np.fft.fft(field.u[-1])) ** 2
            tails.append(spectrum[np.abs(k) > 0.25].sum())
        assert tails[0] > tails[1] > tails[2]

    def test_divergence_raises_with_theta_attached(self):
        base = KdvSetup()
        x = space_grid(base)
        with pytest.raises(SolverDiverged) as err:
            kdv_solve(THETA_TRUE, base, u0=200.0 * default_initial_condition(x))
        assert err.value.theta == THETA_TRUE

    def test_bilinear_interpolation_exact_on_planes(self):
        x = np.linspace(0.0, 10.0, 10, endpoint=False)
        t = np.linspace(0.0, 1.0, 6)
        u = x[None, :] + 2.0 * t[:, None]
        field = KdvField(u, x, t, (0.0, 10.0))
        xq = np.array([0.5, 3.25, 7.9])
        tq = np.array([0.1, 0.55, 0.9])
        np.testing.assert_allclose(field.at(xq, tq), xq + 2.0 * tq, atol=1e-12)

    def test_interpolation_wraps_periodically(self):
        x = np.linspace(0.0, 10.0, 10, endpoint=False)
        t = np.array([0.0, 1.0])
        u = np.tile(np.cos(2.0 * np.pi * x / 10.0), (2, 1))
        field = KdvField(u, x, t, (0.0, 10.0))
        # Query between the last node (x=9) and the periodic image of x=0.
        expected = 0.5 * (np.cos(2.0 * np.pi * 0.9) + np.cos(0.0))
        assert field.at(9.5, 0.5) == pytest.approx(expected, abs=1e-12)

    def test_query_outside_domain_raises(self):
        field = kdv_solve(THETA_TRUE, KdvSetup(n_time=10, t_domain=(0.0, 0.1)))
        with pytest.raises(ValueError):
            field.at(31.0, 0.05)
        with pytest.raises(ValueError):
            field.at(5.0, 0.2)


class TestObservations:
    def test_layout_and_finiteness(self, setup):
        assert setup.obs_locations.shape == (200, 2)
        assert np.all(setup.obs_locations[:, 0] >= 0.0)
        assert np.all(setup.obs_locations[:, 0] <= 30.0)
        assert np.all(setup.obs_locations[:, 1] > 0.0)  # t = 0 rows carry no signal
        assert np.all(setup.obs_locations[:, 1] <= 5.0)
        assert np.all(np.isfinite(setup.obs_values))

    def test_frozen_per_seed(self, setup):
        again = make_kdv_setup(seed=0)
        np.testing.assert_array_equal(setup.obs_locations, again.obs_locations)
        np.testing.assert_array_equal(setup.obs_values, again.obs_values)
        assert make_kdv_setup(seed=1).obs_values[0] != setup.obs_values[0]

    def test_noise_floor_at_true_parameters(self, setup):
        floor = kdv_observable(setup.theta_true, setup)
        assert floor == pytest.approx(setup.obs_noise_std**2, rel=1.0)  # within 2x

    def test_far_parameters_dominate_noise_floor(self, setup):
        floor = kdv_observable(setup.theta_true, setup)
        assert kdv_observable((12.0, 4.0), setup) >= 10.0 * floor

    def test_batch_matches_scalar(self, setup):
        thetas = [(6.0, 1.0), (8.0, 2.0), (4.0, 0.5)]
        batch = kdv_observable_batch(thetas, setup)
        scalars = [kdv_observable(th, setup) for th in thetas]
        np.testing.assert_array_equal(batch, scalars)

    def test_batch_caps_divergence_as_inf(self, setup):
        x = space_grid(setup)
        blown = kdv_observable_batch(
            [setup.theta_true], setup, u0=200.0 * default_initial_condition(x)
        )
        assert np.isinf(blown[0])

    def test_observable_requires_observations(self):
        with pytest.raises(ValueError):
            kdv_observable(THETA_TRUE, KdvSetup())

    def test_artifact_roundtrip(self, setup, tmp_path):
        csv_path = tmp_path / "obs.csv"
        json_path = tmp_path / "obs.json"
        save_kdv_observations(setup, csv_path, json_path)
        loaded = load_kdv_observations(csv_path, json_path)
        np.testing.assert_array_equal(loaded.obs_locations, setup.obs_locations)
        np.testing.assert_array_equal(loaded.obs_values, setup.obs_values)
        assert loaded.theta_true == setup.theta_true
        assert json.loads(json_path.read_text())["seed"] == 0


class TestTruePosterior:
    def test_concentrates_on_true_parameters(self, setup):
        samples = true_posterior_samples(setup, n_samples=500, seed=3, grid_per_dim=21)
        assert samples.shape == (500, 2)
        mean = samples.mean(axis=0)
        assert abs(mean[0] - 6.0) < 0.1
        assert abs(mean[1] - 1.0) < 0.05
        assert np.all(samples[:, 0] >= 3.0) and np.all(samples[:, 0] <= 12.0)
        assert np.all(samples[:, 1] >= 0.0) and np.all(samples[:, 1] <= 4.0)
        assert samples.std(axis=0).max() < 0.1
