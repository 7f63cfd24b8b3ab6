import math

import pytest

import gpode
from gpode import linear


def xcosx_posterior():
    xs = [-4.0 + i for i in range(9)]
    ys = [x * math.cos(x) for x in xs]
    return gpode.condition(gpode.TrainingSet(xs, ys, 1e-4))


def test_version():
    assert gpode.__version__.startswith("0.1.0")


def test_prototype_fixed_points():
    m = linear.LinearModelDist(1.0, 1.0)
    assert linear.naive_euler_fixed_point(m, 0.5) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert linear.iter_flow_fixed_point(m, 0.5) == pytest.approx(math.tanh(0.25), abs=1e-12)
    assert linear.exact_fixed_point_var(m) == 1.0


def test_pull_matches_corrected_euler_on_linear_model():
    m = linear.LinearModelDist(1.0, 1.0)
    x0 = gpode.GaussianState(1.0, 0.25)
    pull = gpode.pull_trajectory(linear.embed(m), x0, 0.05, 5.0)
    ref = linear.propagate(m, x0, 0.05, 5.0, linear.Propagator.corrected_euler)
    assert len(pull) == len(ref) == 101
    assert max(abs(a - b) for a, b in zip(pull.vars, ref.vars)) < 1e-10


def test_gp_and_moments():
    gp = xcosx_posterior()
    assert gp.mean(1.0) == pytest.approx(math.cos(1.0), abs=0.05)
    assert gp.var(0.0) < 1e-3
    s = gpode.GaussianState(0.6, 0.005)
    closed = gpode.closed_form_moments(gp, s)
    quad = gpode.quadrature_moments(gpode.GpField(gp), s)
    assert closed.e_mu == pytest.approx(quad.e_mu, abs=1e-8)
    assert closed.e_sigma2 == pytest.approx(quad.e_sigma2, abs=1e-8)


def test_sampling_and_ensemble():
    gp = xcosx_posterior()
    draws = gpode.sample_on_grid(gp, [-1.0, 0.0, 1.0], 16, seed=3)
    assert draws.shape == (16, 3)
    field = gpode.GpField(gp)
    stats = gpode.ensemble_stats(field, gpode.GaussianState(0.6, 0.005), n_fields=20, n_initial=5, h=0.1, T=2.0)
    assert len(stats) == 21
    assert stats.sample_count == 100
    again = gpode.ensemble_stats(field, gpode.GaussianState(0.6, 0.005), n_fields=20, n_initial=5, h=0.1, T=2.0,
                                 workers=2)
    assert list(stats.vars) == list(again.vars)


def test_grid_escape_raises():
    field = gpode.LinearField(0.0, 0.01, 2.0)
    with pytest.raises(gpode.GridEscape):
        gpode.ensemble_stats(field, gpode.GaussianState(0.0, 0.01), n_fields=5, n_initial=2, h=0.1, T=4.0,
                             grid_lo=-1.0, grid_hi=1.0, grid_points=50)


def test_run_experiment_in_memory():
    cfg = gpode.default_config("prototype")
    cfg["step_sizes"] = [0.5]
    cfg["methods"] = ["analytic", "naive_euler"]
    summary, trajectories = gpode.run_experiment(cfg)
    assert summary["per_step"][0]["euler_fixed_point"] == pytest.approx(1.0 / 3.0)
    assert {t.method for t in trajectories} == {"analytic", "naive_euler"}


def test_config_error():
    cfg = gpode.default_config("prototype")
    cfg["step_sizes"] = [2.5]
    with pytest.raises(gpode.ConfigError, match="stability limit"):
        gpode.run_experiment(cfg)
