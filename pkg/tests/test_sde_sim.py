import io
import math
from dataclasses import replace

import numpy as np
import pytest

from ewslab.errors import EmptyAnalysisWindow, NonFiniteState, ValidationError
from ewslab.ou_analytics import EXAMPLE_PARAMS, OUParams, stationary_covariance
from ewslab.sde_sim import (
    FoldSimConfig,
    NoiseMatrix,
    Path,
    _transition,
    analysis_cutoff,
    exact_ou_path,
    exact_ou_step,
    fold_drift,
    mix64,
    observable_series,
    run_rng,
    simulate_em,
    simulate_ensemble,
    simulate_fold,
)

P = EXAMPLE_PARAMS


def test_mix64_known_answer():
    # first SplitMix64 output for state 0
    assert mix64(0, 0) == 0xE220A8397B1DCDAF
    assert len({mix64(7, i) for i in range(1000)}) == 1000


def test_exact_step_zero_dt_is_identity():
    state = np.array([0.3, -1.2])
    np.testing.assert_array_equal(exact_ou_step(P, None, state, 0.0, run_rng(1)), state)


def test_exact_step_long_dt_is_stationary_law():
    (dx, dy), (l11, l21, l22), v = _transition(P, None, 200.0)
    assert dx == pytest.approx(0.0, abs=1e-40) and dy == pytest.approx(0.0, abs=1e-80)
    cov = np.array([[l11 * l11, l11 * l21], [l11 * l21, l21 * l21 + l22 * l22]])
    np.testing.assert_allclose(cov, v.as_array(), rtol=1e-12)


def test_exact_step_conditional_moments():
    rng = run_rng(3)
    state = np.array([1.0, -0.5])
    draws = np.array([exact_ou_step(P, None, state, 1.0, rng) for _ in range(40000)])
    mean = np.array([math.exp(-0.5) * 1.0, math.exp(-1.0) * -0.5])
    v = stationary_covariance(P).as_array()
    d = np.diag([math.exp(-0.5), math.exp(-1.0)])
    cond = v - d @ v @ d.T
    se = np.sqrt(np.diag(cond) / len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    np.testing.assert_allclose(np.cov(draws.T), cond, rtol=0.05)


def test_exact_step_noise_matrix_override():
    sigma = NoiseMatrix(1.0, 0.0, 1.0)
    _, _, v = _transition(P, sigma, 1.0)
    assert v.v12 == 0 and v.v11 == pytest.approx(1.0)


def test_exact_chain_reproduces_stationary_covariance():
    path = exact_ou_path(P, 10**6, 1.0, run_rng(5))
    cov = np.cov(np.vstack([path.x, path.y]))
    np.testing.assert_allclose(cov, stationary_covariance(P).as_array(), rtol=0.02)


def test_exact_chain_is_centred():
    path = exact_ou_path(P, 10**6, 1.0, run_rng(6))
    v = stationary_covariance(P)
    for series, var, lam in ((path.x, v.v11, P.lambda_x), (path.y, v.v22, P.lambda_y)):
        phi = math.exp(-lam)
        # standard error of the mean of an AR(1) series
        se = math.sqrt(var / len(series) * (1 + phi) / (1 - phi))
        assert abs(series.mean()) < 4 * se


def test_em_constant_without_drift_and_noise():
    path = simulate_em(lambda s, t: np.zeros(2), NoiseMatrix(0, 0, 0), [0.4, -0.2], 5.0, 0.1, seed=1)
    assert np.all(path.x == 0.4) and np.all(path.y == -0.2)
    assert len(path) == 51


def test_em_fold_converges_to_equilibrium():
    path = simulate_em(fold_drift(lambda t: 1.0), NoiseMatrix(0, 0, 0), [1.2, 0.5], 30.0, 0.01, seed=1)
    assert path.x[-1] == pytest.approx(1.0, abs=1e-9)
    assert path.y[-1] == pytest.approx(0.0, abs=1e-9)


def test_em_is_deterministic_and_seed_dependent():
    drift = fold_drift(lambda t: 1.0)
    a = simulate_em(drift, NoiseMatrix(0.1, 1, 2), [1, 0], 10.0, 0.01, seed=9)
    b = simulate_em(drift, NoiseMatrix(0.1, 1, 2), [1, 0], 10.0, 0.01, seed=9)
    c = simulate_em(drift, NoiseMatrix(0.1, 1, 2), [1, 0], 10.0, 0.01, seed=10)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_em_explicit_increments_and_batches():
    dW = np.zeros((10, 2, 3))
    dW[0, 1, :] = [1.0, 2.0, 3.0]
    path = simulate_em(lambda s, t: np.zeros_like(s), NoiseMatrix(0.0, 1.0, 2.0), np.zeros((2, 3)), 1.0, 0.1, dW=dW)
    np.testing.assert_allclose(path.x[-1], [1, 2, 3])
    np.testing.assert_allclose(path.y[-1], [2, 4, 6])


def test_em_aborts_on_blow_up():
    with pytest.raises(NonFiniteState) as info:
        simulate_em(lambda s, t: np.array([s[0] ** 2, 0.0]), NoiseMatrix(0, 0, 0), [2.0, 0.0], 10.0, 0.01, seed=1)
    assert info.value.path.truncated
    assert np.all(np.abs(info.value.path.x) <= 1e6)


def test_ramp_endpoints():
    cfg = FoldSimConfig()
    assert cfg.alpha(0.0) == cfg.alpha0
    assert cfg.alpha(cfg.t_total) == cfg.alpha0 - cfg.alpha_slope_frac


def test_default_fold_geometry():
    cfg = FoldSimConfig(alpha_slope_frac=0.5)  # stays far from the fold: no tipping
    assert cfg.n_steps == 300_000 and cfg.sample_dt == pytest.approx(1.0)
    path = simulate_fold(cfg, 0)
    assert path.tipped_at is None
    assert len(path) == 10_001 - 100
    assert path.times[0] == 100.0
    np.testing.assert_allclose(np.diff(path.times), 1.0)


def test_fold_without_noise_tracks_equilibrium():
    cfg = FoldSimConfig(epsilon=0.0)
    path = simulate_fold(cfg, 0)
    t_cut = cfg.alpha_inverse(cfg.alpha_cut)
    assert path.tipped_at is None or path.tipped_at > t_cut
    keep = path.times <= t_cut
    np.testing.assert_allclose(path.x[keep], np.sqrt(cfg.alpha(path.times[keep])), atol=1e-2)
    assert np.all(path.y == 0)


def test_fold_determinism_and_run_independence():
    cfg = FoldSimConfig(t_total=2000.0, seed=42)
    a, b = simulate_fold(cfg, 3), simulate_fold(cfg, 3)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.x, simulate_fold(cfg, 4).x)


def test_ensemble_independent_of_worker_count():
    cfg = FoldSimConfig(t_total=1000.0, n_runs=3, seed=7)
    seq = simulate_ensemble(cfg, workers=1)
    par = simulate_ensemble(cfg, workers=2)
    for a, b in zip(seq, par):
        np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(seq[1].x, simulate_fold(cfg, 1).x)


def test_tipping_monotone_in_threshold():
    cfg = FoldSimConfig(t_total=3000.0, epsilon=0.4, seed=5)
    tips = [simulate_fold(replace(cfg, tip_threshold=th), 0).tipped_at for th in (-0.2, -0.5, -0.8)]
    assert all(t is not None for t in tips)
    assert tips[0] <= tips[1] <= tips[2]


def test_tipped_path_stops_at_threshold():
    cfg = FoldSimConfig(t_total=3000.0, epsilon=0.4, seed=5)
    path = simulate_fold(cfg, 0)
    assert path.times[-1] <= path.tipped_at
    assert np.all(path.x >= cfg.tip_threshold)


def test_config_validation():
    with pytest.raises(ValidationError):
        FoldSimConfig(dt=0.0).validate()
    with pytest.raises(ValidationError):
        FoldSimConfig(t_total=50.0).validate()
    with pytest.raises(ValidationError):
        FoldSimConfig(subsample=0).validate()


def _ramp_path(cfg, tipped_at=None):
    times = np.arange(cfg.burn_in, cfg.t_total + 1)
    return Path(times=times, x=np.zeros_like(times), y=np.zeros_like(times), tipped_at=tipped_at)


def test_analysis_cutoff_default_ramp():
    cfg = FoldSimConfig()
    path = _ramp_path(cfg)
    stop = analysis_cutoff(path, cfg)
    # alpha(t) >= 0.05  <=>  t <= 0.95 T / 1.1 = 8636.36...
    assert path.times[stop - 1] == 8636.0
    assert cfg.alpha(path.times[stop]) < cfg.alpha_cut <= cfg.alpha(path.times[stop - 1])


def test_analysis_cutoff_respects_tipping():
    cfg = FoldSimConfig()
    stop = analysis_cutoff(_ramp_path(cfg, tipped_at=5000.0), cfg)
    assert _ramp_path(cfg).times[stop - 1] < 5000.0


def test_analysis_cutoff_empty():
    cfg = FoldSimConfig(alpha_cut=1.5)
    with pytest.raises(EmptyAnalysisWindow):
        analysis_cutoff(_ramp_path(cfg), cfg)
    with pytest.raises(EmptyAnalysisWindow):
        analysis_cutoff(_ramp_path(FoldSimConfig(), tipped_at=900.0), FoldSimConfig())


def test_observable_series():
    path = Path(times=np.arange(4.0), x=np.array([1.0, 2, 3, 4]), y=np.array([0.5, -1, 2, 0]))
    np.testing.assert_array_equal(observable_series(path, 0.0), path.x)
    np.testing.assert_allclose(observable_series(path, -math.pi / 4), (path.x - path.y) / math.sqrt(2))
    np.testing.assert_allclose(observable_series(path, 0.7) + observable_series(path, 0.7 + math.pi), 0, atol=1e-15)


def test_path_csv_round_trip():
    path = Path(times=np.array([0.0, 1.0]), x=np.array([0.1, 1 / 3]), y=np.array([-2.5, 1e-17]))
    buf = io.StringIO()
    path.to_csv(buf, obs=0.0)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x,y,psi"
    back = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 1], path.x)
    np.testing.assert_array_equal(back[:, 2], path.y)
    buf = io.StringIO()
    path.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "t,x,y"
