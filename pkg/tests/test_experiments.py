import io
import math
from dataclasses import replace

import numpy as np
import pytest

from ewslab.config import ExperimentConfig, GridSpec, parse_config
from ewslab.errors import ZeroVariance
from ewslab.experiments import (
    linearised_params,
    run_fig1,
    run_fig2,
    run_fig3,
    run_theorem,
    theorem_draws,
    write_outputs,
)
from ewslab.ou_analytics import Observable, OUParams, theorem_derivatives
from ewslab.sde_sim import FoldSimConfig


def read_csv(text):
    return np.genfromtxt(io.StringIO(text), delimiter=",", names=True, dtype=None, encoding="utf-8")


CFG = ExperimentConfig()
SMALL = replace(CFG, grids=GridSpec(n_beta=64, n_lambda=64))


def test_fig1_turning_points():
    res = run_fig1(CFG)
    data = read_csv(res.files["fig1.csv"])
    assert data["lambda_x"][0] == 1e-3 and data["lambda_x"][-1] == 1.0
    for col in ("var_psi", "ac1_psi"):
        i = int(np.argmin(data[col]))
        assert 0.3 < data["lambda_x"][i] < 0.9
    assert abs(res.summary["lambda_star"] - 0.6) < 0.1


def test_fig1_without_coupling_is_monotone():
    data = read_csv(run_fig1(replace(CFG, ou=replace(CFG.ou, c=0.0))).files["fig1.csv"])
    assert np.all(np.diff(data["var_psi"]) < 0)
    assert np.all(np.diff(data["ac1_psi"]) < 0)


def test_fig1_beta_zero_matches_edge_case_forms():
    cfg = replace(CFG, obs=Observable(0.0))
    data = read_csv(run_fig1(cfg).files["fig1.csv"])
    p = cfg.ou
    lam = data["lambda_x"]
    np.testing.assert_allclose(data["var_psi"], (p.sigma_x**2 + p.c**2) / (2 * lam), rtol=1e-12)
    np.testing.assert_allclose(data["ac1_psi"], np.exp(-lam), rtol=1e-12)


def test_fig2_row_at_three_quarter_pi_matches_fig1():
    cfg = replace(CFG, grids=GridSpec(n_beta=256, n_lambda=64))
    grid = read_csv(run_fig2(cfg).files["fig2.csv"])
    fig1 = read_csv(run_fig1(cfg).files["fig1.csv"])
    row = grid[np.isclose(grid["beta"], 0.75 * math.pi)]
    assert len(row) == 64
    np.testing.assert_allclose(row["var"], fig1["var_psi"], rtol=1e-12)
    np.testing.assert_allclose(row["ac1"], fig1["ac1_psi"], rtol=1e-12)


def test_fig2_signs_and_blue_region():
    res = run_fig2(SMALL)
    data = read_csv(res.files["fig2.csv"])
    assert set(np.unique(data["var_sign"])) <= {-1, 0, 1}
    assert set(np.unique(data["ac_sign"])) <= {-1, 0, 1}
    assert res.summary["blue_cells_var"] > 0 and res.summary["blue_cells_ac"] > 0
    assert len(data) == res.summary["cells"] == 64 * 64


def test_fig2_without_coupling_has_no_blue_cells():
    cfg = replace(SMALL, ou=replace(CFG.ou, c=0.0))
    data = read_csv(run_fig2(cfg).files["fig2.csv"])
    off_axis = ~np.isclose(np.mod(data["beta"], math.pi / 2), 0.0)
    assert np.all(data["var_sign"][off_axis] < 1)
    assert np.all(data["ac_sign"][off_axis] < 1)


def test_fig2_svg_does_not_alter_csv():
    plain = run_fig2(SMALL)
    fancy = run_fig2(replace(SMALL, emit_svg=True))
    assert fancy.files["fig2.csv"] == plain.files["fig2.csv"]
    assert any(k.endswith(".svg") for k in fancy.files)


def test_linearised_params():
    p = linearised_params(CFG, 0.25)
    assert p == OUParams(1.0, 1.0, 0.1 * 0.1, 0.1 * 2.0, 0.1 * 1.0)


def test_theorem_draw_ranges():
    for p in theorem_draws(200, seed=3):
        assert 0.2 <= p.lambda_y <= 2 and 0.05 <= p.lambda_x <= p.lambda_y
        assert 0.05 <= p.sigma_x <= 3 and 0.05 <= p.sigma_y <= 3
        assert 0.1 <= abs(p.c) <= 2


def test_run_theorem_small():
    res = run_theorem(CFG, n_draws=10)
    data = read_csv(res.files["theorem.csv"])
    assert res.summary == {"draws": 10, "side_ok": 10}
    np.testing.assert_allclose(data["fd_dvar"], data["dvar"], rtol=1e-5)
    np.testing.assert_allclose(data["fd_dac"], data["dac"], rtol=1e-5)
    assert np.all(data["interval_hi"] > data["interval_lo"])


def test_zero_coupling_has_flat_mixed_partials():
    assert theorem_derivatives(OUParams(0.4, 1.0, 0.5, 1.5, 0.0)) == (0.0, 0.0)


def _fig3_small(**sim):
    fields = dict(t_total=3000.0, n_runs=2, seed=1)
    fields.update(sim)
    return replace(CFG, experiment="fig3", sim=replace(FoldSimConfig(), **fields))


def test_fig3_zero_noise_aborts():
    with pytest.raises(ZeroVariance):
        run_fig3(_fig3_small(epsilon=0.0))
    quiet = replace(_fig3_small(), ou=OUParams(0.5, 1.0, 0.0, 0.0, 0.0))
    with pytest.raises(ZeroVariance):
        run_fig3(quiet)


def test_fig3_outputs_and_reruns(tmp_path):
    cfg = _fig3_small()
    a, b = run_fig3(cfg, workers=1), run_fig3(cfg, workers=2)
    assert a.files == b.files
    assert {"indicators.csv", "indicators_runs.csv", "overlay.csv", "trends.csv", "paths/run_000.csv"} <= set(a.files)
    ind = read_csv(a.files["indicators.csv"])
    assert set(ind["estimator_id"]) == {"variance", "ac1", "psd_max", "km_rate", "gls_rate", "psd_fit_rate"}
    assert set(ind["run_id"]) == {"mean"}
    overlay = read_csv(a.files["overlay.csv"])
    np.testing.assert_allclose(overlay["lambda_x"], 2 * np.sqrt(overlay["alpha"]))
    assert a.files["paths/run_000.csv"].startswith("t,x,y,psi\n")
    out = write_outputs(a, cfg, tmp_path / "one")
    out2 = write_outputs(b, cfg, tmp_path / "one")
    assert out == out2
    resolved = parse_config((out / "config.resolved.ini").read_text())
    assert resolved.sim.seed == 1


def test_fig3_svg_is_pure_add_on():
    cfg = _fig3_small(n_runs=1)
    plain = run_fig3(cfg, workers=1)
    fancy = run_fig3(replace(cfg, emit_svg=True), workers=1)
    assert {k: v for k, v in fancy.files.items() if not k.endswith(".svg")} == plain.files
    assert "fig3_variance.svg" in fancy.files
