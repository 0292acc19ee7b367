"""Named experiments: analytic sweeps, trend maps, the fold-SDE ensemble and
the mixing-angle theorem check.

Each ``run_*`` function returns an :class:`ExperimentResult` whose ``files``
map relative output paths to file contents. Nothing touches the filesystem
until :func:`write_outputs`, which keeps reruns trivially comparable.
"""
from __future__ import annotations

import io
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from . import svg
from .config import ExperimentConfig, dump_config
from .errors import EmptyAnalysisWindow, NonFiniteState, ZeroVariance
from .ews_estimators import (
    ESTIMATOR_IDS,
    NonConvergenceWarning,
    ensemble_mean,
    indicator_trend,
    window_indicators,
)
from .ou_analytics import (
    OUParams,
    deceitful_interval,
    lambda_star,
    mixed_partials_fd,
    observable_autocorrelation,
    observable_variance,
    theorem_derivatives,
    trend_sign_map,
)
from .sde_sim import analysis_cutoff, observable_series, run_rng, simulate_ensemble

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    name: str
    files: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else repr(v) for v in row) + "\n")
    return buf.getvalue()


def _lambda_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(cfg.grids.lambda_min, cfg.ou.lambda_y, cfg.grids.n_lambda)


def run_fig1(cfg: ExperimentConfig) -> ExperimentResult:
    """Var[psi] and AC(1) against lambda_x for the configured observable."""
    lam = _lambda_grid(cfg)
    var = [observable_variance(cfg.ou.with_lambda_x(l), cfg.obs) for l in lam.tolist()]
    ac = [observable_autocorrelation(cfg.ou.with_lambda_x(l), cfg.obs) for l in lam.tolist()]
    res = ExperimentResult("fig1")
    res.files["fig1.csv"] = _csv("lambda_x,var_psi,ac1_psi", zip(lam.tolist(), var, ac))
    ls = lambda_star(cfg.ou, cfg.obs, cfg.grids.lambda_min, cfg.ou.lambda_y)
    res.summary = {"lambda_star_var": ls.var, "lambda_star_ac": ls.ac, "lambda_star": ls.combined}
    if cfg.emit_svg:
        res.files["fig1_var.svg"] = svg.line_plot({"Var[psi]": (lam, var)}, "variance", "lambda_x", "Var")
        res.files["fig1_ac1.svg"] = svg.line_plot({"AC(1)": (lam, ac)}, "lag-1 autocorrelation", "lambda_x", "AC(1)")
    return res


def run_fig2(cfg: ExperimentConfig) -> ExperimentResult:
    """Statistics and their lambda_x-trend signs on a (beta, lambda_x) grid."""
    betas = np.linspace(0.0, math.pi, cfg.grids.n_beta, endpoint=False)
    tm = trend_sign_map(cfg.ou, betas, _lambda_grid(cfg))
    rows = []
    for i, b in enumerate(tm.beta_grid.tolist()):
        for j, l in enumerate(tm.lambda_grid.tolist()):
            rows.append((b, l, float(tm.var[i, j]), float(tm.ac[i, j]), str(int(tm.var_sign[i, j])), str(int(tm.ac_sign[i, j]))))
    res = ExperimentResult("fig2")
    res.files["fig2.csv"] = _csv("beta,lambda_x,var,ac1,var_sign,ac_sign", rows)
    res.summary = {
        "blue_cells_var": int(np.sum(tm.var_sign > 0)),
        "blue_cells_ac": int(np.sum(tm.ac_sign > 0)),
        "cells": int(tm.var_sign.size),
    }
    if cfg.emit_svg:
        for name, grid in (("var", tm.var_sign), ("ac1", tm.ac_sign)):
            res.files[f"fig2_{name}_sign.svg"] = svg.sign_heatmap(
                grid, tm.lambda_grid, tm.beta_grid, f"trend of {name} (blue: deceitful)", "lambda_x", "beta"
            )
    return res


def linearised_params(cfg: ExperimentConfig, alpha: float) -> OUParams:
    """OU constants of the fold model linearised at x* = sqrt(alpha)."""
    s = cfg.fold_config().sigma
    eps = cfg.sim.epsilon
    return OUParams(2.0 * math.sqrt(alpha), 1.0, eps * s.s11, eps * s.s22, eps * s.s12)


def run_fig3(cfg: ExperimentConfig, workers=None) -> ExperimentResult:
    """Fold-SDE ensemble, windowed indicators, ensemble means and their trends."""
    fold = cfg.fold_config()
    s = fold.sigma
    if fold.epsilon == 0 or (s.s11 == 0 and s.s12 == 0 and s.s22 == 0):
        raise ZeroVariance("no stochastic forcing: every indicator window has zero variance")
    paths = simulate_ensemble(fold, workers)
    res = ExperimentResult("fig3")
    per_run: dict[str, list] = {k: [] for k in ESTIMATOR_IDS}
    used = 0
    n_nonconv = 0
    for i, path in enumerate(paths):
        buf = io.StringIO()
        path.to_csv(buf, cfg.obs)
        res.files[f"paths/run_{i:03d}.csv"] = buf.getvalue()
        if path.truncated:
            log.warning("run %d left the admissible state box; excluded", i)
            continue
        try:
            stop = analysis_cutoff(path, fold, cfg.window.length)
        except EmptyAnalysisWindow as exc:
            log.warning("run %d excluded: %s", i, exc)
            continue
        psi = observable_series(path, cfg.obs)[:stop]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergenceWarning)
            ind = window_indicators(psi, path.times[:stop], cfg.window, cfg.welch, run_id=str(i))
        n_nonconv += sum(issubclass(w.category, NonConvergenceWarning) for w in caught)
        for k, v in ind.items():
            per_run[k].append(v)
        used += 1
    if used == 0:
        raise EmptyAnalysisWindow("no run provides a full analysis window")
    if n_nonconv:
        log.info("GLS AR(1) hit max_iter in %d windows", n_nonconv)

    means = {k: ensemble_mean(v) for k, v in per_run.items()}
    rows = [r for k in ESTIMATOR_IDS for r in means[k].csv_rows()]
    res.files["indicators.csv"] = "t_center,value,estimator_id,run_id\n" + "".join(r + "\n" for r in rows)
    rows = [r for k in ESTIMATOR_IDS for ind in per_run[k] for r in ind.csv_rows()]
    res.files["indicators_runs.csv"] = "t_center,value,estimator_id,run_id\n" + "".join(r + "\n" for r in rows)

    centers = means["variance"].centers
    alpha = fold.alpha(centers)
    overlay = []
    for t, a in zip(centers.tolist(), alpha.tolist()):
        p = linearised_params(cfg, a)
        overlay.append((t, a, p.lambda_x, observable_variance(p, cfg.obs), observable_autocorrelation(p, cfg.obs)))
    res.files["overlay.csv"] = _csv("t_center,alpha,lambda_x,var_psi,ac1_psi", overlay)

    trends = {k: indicator_trend(means[k]) for k in ESTIMATOR_IDS}
    res.files["trends.csv"] = _csv("estimator_id,slope,sign", ((k, sl, str(sg)) for k, (sl, sg) in trends.items()))
    res.summary = {"runs_used": used, "runs": len(paths), "trend_signs": {k: sg for k, (_, sg) in trends.items()}}

    if cfg.emit_svg:
        p0 = paths[0]
        res.files["fig3_paths.svg"] = svg.line_plot(
            {"X": (p0.times, p0.x), "Y": (p0.times, p0.y), "psi": (p0.times, observable_series(p0, cfg.obs))},
            "sample path (run 0)", "t", "state",
        )
        for k in ESTIMATOR_IDS:
            series = {f"{k} (mean of {used})": (centers, means[k].values)}
            if k == "variance":
                series["linearised"] = (centers, [r[3] for r in overlay])
            elif k == "ac1":
                series["linearised"] = (centers, [r[4] for r in overlay])
            res.files[f"fig3_{k}.svg"] = svg.line_plot(series, k, "t", k)
    return res


def _theorem_draw(rng, delta: float) -> OUParams:
    ly = rng.uniform(0.2, 2.0)
    lx = rng.uniform(delta, ly)
    sx, sy = rng.uniform(0.05, 3.0, size=2)
    c = 0.0
    while abs(c) < 0.1:
        c = rng.uniform(-2.0, 2.0)
    return OUParams(float(lx), float(ly), float(sx), float(sy), float(c))


def theorem_draws(n: int, seed: int, delta: float = 0.05) -> list[OUParams]:
    rng = run_rng(seed, 0)
    return [_theorem_draw(rng, delta) for _ in range(n)]


def run_theorem(cfg: ExperimentConfig, n_draws=None) -> ExperimentResult:
    """Closed-form vs finite-difference mixed partials and the deceitful interval
    for random parameter draws with lambda_x <= lambda_y and |c| >= 0.1."""
    n = cfg.grids.n_draws if n_draws is None else n_draws
    delta = cfg.grids.delta
    rows = []
    n_ok = 0
    for p in theorem_draws(n, cfg.sim.seed, delta):
        dvar, dac = theorem_derivatives(p)
        fdv, fda = mixed_partials_fd(p)
        try:
            lo, hi = deceitful_interval(p, delta)
            # positive mixed partials put the interval above pi/2
            above = dvar > 0
            side_ok = hi > lo and (lo == 0.5 * math.pi if above else hi == 0.5 * math.pi)
        except Exception as exc:  # recorded per draw, never fatal
            log.warning("draw %s: %s", p, exc)
            lo = hi = float("nan")
            side_ok = False
        n_ok += side_ok
        rows.append((p.lambda_x, p.lambda_y, p.sigma_x, p.sigma_y, p.c, dvar, dac, fdv, fda, lo, hi, str(side_ok).lower()))
    res = ExperimentResult("theorem")
    res.files["theorem.csv"] = _csv(
        "lambda_x,lambda_y,sigma_x,sigma_y,c,dvar,dac,fd_dvar,fd_dac,interval_lo,interval_hi,side_ok", rows
    )
    res.summary = {"draws": n, "side_ok": n_ok}
    return res


RUNNERS = {"fig1": run_fig1, "fig2": run_fig2, "fig3": run_fig3, "theorem": run_theorem}


def write_outputs(result: ExperimentResult, cfg: ExperimentConfig, out_dir) -> FsPath:
    """Write all result files plus the resolved configuration (with seed)."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = replace(cfg, experiment=result.name if result.name in RUNNERS else cfg.experiment, output_dir=str(out))
    files = {"config.resolved.ini": dump_config(resolved), **result.files}
    for rel, text in files.items():
        dest = out / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return out
