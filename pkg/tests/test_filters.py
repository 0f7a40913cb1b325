"""Dynamics, EKF, and field-of-view checks."""

import math

import numpy as np
import pytest

from mcmctrack.errors import ConfigError, NumericalError, SingularStateError
from mcmctrack.filters import (
    MU_EARTH,
    DynamicsConfig,
    GaussianTrack,
    SensorModel,
    flow_jacobian,
    in_bounded_fov,
    in_fov,
    measurement_likelihood,
    predict_track,
    process_noise,
    propagate_state,
    sample_fov_point,
    update_track,
)


def default_sensor(p_d=0.9, r=None, half=math.pi / 12, max_range=5.0e4):
    return SensorModel(
        origin=np.zeros(2),
        boresight_angle=0.0,
        fov_half_angle=half,
        r=np.eye(2) if r is None else r,
        p_d=p_d,
        max_range=max_range,
    )


class TestPropagate:
    def test_circular_orbit_closes_after_one_period(self):
        radius = 7000.0
        speed = math.sqrt(MU_EARTH / radius)
        period = 2.0 * math.pi * math.sqrt(radius**3 / MU_EARTH)
        s0 = np.array([radius, 0.0, 0.0, speed])
        cfg = DynamicsConfig(mu=MU_EARTH, dt=period, integrator_substeps=4096)
        s1 = propagate_state(s0, cfg)
        assert np.linalg.norm(s1[:2] - s0[:2]) / radius < 1e-6
        assert np.linalg.norm(s1[2:] - s0[2:]) / speed < 1e-6

    def test_zero_dt_is_identity(self):
        s = np.array([1.0e4, -2.0e3, 1.0, -2.0])
        out = propagate_state(s, DynamicsConfig(dt=0.0))
        np.testing.assert_array_equal(out, s)

    def test_zero_mu_is_straight_line(self):
        out = propagate_state(
            np.array([1.0, 0.0, 1.0, 0.0]), DynamicsConfig(mu=0.0, dt=2.0)
        )
        np.testing.assert_allclose(out, [3.0, 0.0, 1.0, 0.0], atol=1e-12)

    def test_reversible_under_negated_dt(self):
        s0 = np.array([20000.0, 5000.0, -1.0, 3.5])
        fwd = DynamicsConfig(mu=MU_EARTH, dt=600.0, integrator_substeps=64)
        back = DynamicsConfig(mu=MU_EARTH, dt=-600.0, integrator_substeps=64)
        s2 = propagate_state(propagate_state(s0, fwd), back)
        assert np.linalg.norm(s2 - s0) / np.linalg.norm(s0) < 1e-6

    def test_singularity_guard(self):
        with pytest.raises(SingularStateError):
            propagate_state(np.array([0.5, 0.0, 0.0, 0.0]), DynamicsConfig(dt=10.0))

    def test_deterministic(self):
        s = np.array([15000.0, 2000.0, -0.5, 3.0])
        cfg = DynamicsConfig(dt=300.0)
        np.testing.assert_array_equal(propagate_state(s, cfg), propagate_state(s, cfg))


class TestDynamicsConfig:
    def test_rejects_negative_q(self):
        with pytest.raises(ConfigError):
            DynamicsConfig(q=-1.0)

    def test_rejects_zero_substeps(self):
        with pytest.raises(ConfigError):
            DynamicsConfig(integrator_substeps=0)


def _cv_transition(dt):
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    return f


class TestPredict:
    def test_linear_case_matches_closed_form(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(4, 4))
        cov = a @ a.T + 0.1 * np.eye(4)
        track = GaussianTrack("t00", [10.0, -3.0, 0.5, 0.2], cov)
        cfg = DynamicsConfig(mu=0.0, dt=5.0, q=0.0)
        out = predict_track(track, cfg)
        f = _cv_transition(5.0)
        np.testing.assert_allclose(out.covariance, f @ cov @ f.T, rtol=0, atol=1e-10)
        np.testing.assert_allclose(out.mean, f @ track.mean, atol=1e-10)

    def test_zero_dt_zero_q_identity(self):
        track = GaussianTrack("t00", [1.0e4, 0.0, 0.0, 2.0], np.diag([4.0, 4.0, 0.01, 0.01]))
        out = predict_track(track, DynamicsConfig(dt=0.0, q=0.0))
        np.testing.assert_array_equal(out.mean, track.mean)
        np.testing.assert_allclose(out.covariance, track.covariance, atol=1e-15)

    def test_label_preserved_and_process_noise_added(self):
        track = GaussianTrack("abc", [2.0e4, 0.0, 0.0, 4.0], np.eye(4))
        out = predict_track(track, DynamicsConfig(dt=60.0, q=1e-6))
        assert out.label == "abc"
        assert np.trace(out.covariance) > np.trace(track.covariance)

    def test_psd_preserved_over_random_inputs(self):
        rng = np.random.default_rng(42)
        cfg = DynamicsConfig(dt=300.0, q=1e-9)
        for _ in range(1000):
            radius = rng.uniform(7000.0, 50000.0)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            state = np.array(
                [
                    radius * math.cos(theta),
                    radius * math.sin(theta),
                    rng.uniform(-8.0, 8.0),
                    rng.uniform(-8.0, 8.0),
                ]
            )
            a = rng.normal(size=(4, 4))
            cov = a @ a.T + 1e-6 * np.eye(4)
            out = predict_track(GaussianTrack("t00", state, cov), cfg)
            scale = max(1.0, float(np.abs(out.covariance).max()))
            assert np.linalg.eigvalsh(out.covariance).min() >= -1e-9 * scale
            np.testing.assert_allclose(out.covariance, out.covariance.T)

    def test_process_noise_matches_formula(self):
        cfg = DynamicsConfig(dt=10.0, q=2.0)
        q = process_noise(cfg)
        assert q[0, 0] == pytest.approx(2.0 * 1000.0 / 3.0)
        assert q[0, 2] == pytest.approx(2.0 * 100.0 / 2.0)
        assert q[2, 2] == pytest.approx(20.0)


class TestUpdate:
    def test_likelihood_at_mode_with_unit_noise(self):
        # Zero prior covariance, unit measurement noise, return at the
        # predicted measurement: density equals the bivariate normal mode.
        track = GaussianTrack("t00", [0.0, 0.0, 0.0, 0.0], np.zeros((4, 4)))
        _, lik = update_track(track, np.zeros(2), default_sensor())
        assert lik == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-12)

    def test_zero_gain_limit(self):
        track = GaussianTrack("t00", [1.0, 2.0, 0.3, 0.4], np.zeros((4, 4)))
        post, _ = update_track(track, np.array([5.0, -7.0]), default_sensor())
        np.testing.assert_allclose(post.mean, track.mean, atol=1e-12)

    def test_posterior_moves_toward_measurement(self):
        track = GaussianTrack("t00", [0.0, 0.0, 0.0, 0.0], np.eye(4))
        post, _ = update_track(track, np.array([1.0, 0.0]), default_sensor())
        assert 0.0 < post.mean[0] < 1.0
        assert post.covariance[0, 0] < track.covariance[0, 0]

    def test_matches_grid_bayes_posterior(self):
        # Full 4-D grid quadrature oracle on a unit-scale linear-Gaussian
        # instance.
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4)) * 0.3
        prior_cov = a @ a.T + np.eye(4)
        prior_mean = rng.normal(size=4)
        z = prior_mean[:2] + rng.normal(size=2) * 0.5
        sensor = default_sensor(r=np.array([[0.5, 0.1], [0.1, 0.4]]))
        track = GaussianTrack("t00", prior_mean, prior_cov)
        post, lik = update_track(track, z, sensor)

        sig = np.sqrt(np.diag(prior_cov))
        axes = [np.linspace(prior_mean[i] - 6 * sig[i], prior_mean[i] + 6 * sig[i], 33)
                for i in range(4)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
        dev = grid - prior_mean
        pinv = np.linalg.inv(prior_cov)
        log_prior = -0.5 * np.einsum("ni,ij,nj->n", dev, pinv, dev)
        rinv = np.linalg.inv(sensor.r)
        zdev = grid[:, :2] - z
        log_lik = -0.5 * np.einsum("ni,ij,nj->n", zdev, rinv, zdev)
        w = np.exp(log_prior + log_lik - (log_prior + log_lik).max())
        w /= w.sum()
        mean_grid = w @ grid
        dev_post = grid - mean_grid
        cov_grid = (w[:, None] * dev_post).T @ dev_post
        np.testing.assert_allclose(post.mean, mean_grid, atol=1e-3)
        np.testing.assert_allclose(post.covariance, cov_grid, atol=1e-3)

    def test_likelihood_integrates_to_one(self):
        track = GaussianTrack(
            "t00", [0.0, 0.0, 0.0, 0.0], np.diag([2.0, 1.0, 0.1, 0.1])
        )
        sensor = default_sensor(r=np.array([[1.0, 0.3], [0.3, 2.0]]))
        s_cov = track.covariance[:2, :2] + sensor.r
        half = 6.0 * np.sqrt(np.diag(s_cov))
        rng = np.random.default_rng(11)
        n = 100_000
        pts = rng.uniform(-half, half, size=(n, 2))
        vals = np.array([measurement_likelihood(track, p, sensor) for p in pts])
        volume = float(np.prod(2.0 * half))
        integral = vals.mean() * volume
        assert abs(integral - 1.0) < 0.02

    def test_singular_innovation_raises(self):
        track = GaussianTrack("t00", np.zeros(4), np.zeros((4, 4)))
        bad = SensorModel(
            origin=np.zeros(2), boresight_angle=0.0, fov_half_angle=1.0,
            r=np.array([[1.0, 0.0], [0.0, 1.0]]), p_d=0.9,
        )
        object.__setattr__(bad, "r", np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(NumericalError):
            update_track(track, np.zeros(2), bad)

    def test_matches_kalman_closed_form_linear(self):
        rng = np.random.default_rng(5)
        cov = np.diag([4.0, 3.0, 0.5, 0.25])
        mean = rng.normal(size=4)
        z = rng.normal(size=2)
        sensor = default_sensor(r=np.diag([0.5, 0.5]))
        post, lik = update_track(GaussianTrack("t00", mean, cov), z, sensor)
        h = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        s = h @ cov @ h.T + sensor.r
        k = cov @ h.T @ np.linalg.inv(s)
        expect_mean = mean + k @ (z - h @ mean)
        expect_cov = (np.eye(4) - k @ h) @ cov
        np.testing.assert_allclose(post.mean, expect_mean, atol=1e-10)
        np.testing.assert_allclose(post.covariance, expect_cov, atol=1e-10)
        expect_lik = math.exp(
            -0.5 * (z - mean[:2]) @ np.linalg.inv(s) @ (z - mean[:2])
        ) / (2 * math.pi * math.sqrt(np.linalg.det(s)))
        assert lik == pytest.approx(expect_lik, rel=1e-10)


class TestFov:
    def test_along_boresight(self):
        sensor = default_sensor()
        assert in_fov(np.array([1000.0, 0.0, 0.0, 0.0]), sensor)

    def test_boundary_inclusive(self):
        half = 0.2
        sensor = default_sensor(half=half)
        ang = half
        pos = 1000.0 * np.array([math.cos(ang), math.sin(ang)])
        assert in_fov(np.array([pos[0], pos[1], 0.0, 0.0]), sensor)

    def test_outside(self):
        sensor = default_sensor(half=0.2)
        assert not in_fov(np.array([0.0, 1000.0, 0.0, 0.0]), sensor)

    def test_half_pi_always_true(self):
        sensor = default_sensor(half=math.pi)
        for ang in np.linspace(0, 2 * math.pi, 17):
            assert in_fov(np.array([math.cos(ang), 2.0 * math.sin(ang), 0, 0]) * 500, sensor)

    def test_origin_errors(self):
        with pytest.raises(ValueError):
            in_fov(np.zeros(4), default_sensor())

    def test_bounded_fov_respects_range(self):
        sensor = default_sensor(max_range=100.0)
        assert in_bounded_fov(np.array([50.0, 0.0]), sensor)
        assert not in_bounded_fov(np.array([150.0, 0.0]), sensor)

    def test_sampled_points_inside_wedge(self):
        sensor = default_sensor()
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = sample_fov_point(sensor, rng)
            assert in_bounded_fov(p, sensor)


class TestTrackValidation:
    def test_indefinite_covariance_rejected(self):
        with pytest.raises(NumericalError):
            GaussianTrack("t00", np.zeros(4), -np.eye(4))

    def test_covariance_symmetrized(self):
        cov = np.eye(4)
        cov[0, 1] = 0.2
        track = GaussianTrack("t00", np.zeros(4), cov)
        assert track.covariance[1, 0] == pytest.approx(0.1)
        assert track.covariance[0, 1] == pytest.approx(0.1)

    def test_jacobian_close_to_identity_for_small_dt(self):
        s = np.array([2.0e4, 1.0e4, -1.0, 3.0])
        jac = flow_jacobian(s, DynamicsConfig(dt=1.0))
        np.testing.assert_allclose(jac, np.eye(4) + np.diag([1.0, 1.0], k=2), atol=1e-4)
