"""Sectioned ``key = value`` experiment configuration.

Example::

    # everything is optional; omitted keys take the defaults below
    [experiment]
    experiment = fig3
    output_dir = out/fig3

    [ou]
    c = 0

    [observable]
    beta = -0.7853981633974483

Keys are unique across sections, so a key written before any section header
is assigned to the section that owns it. Unknown sections or keys are errors.

Defaults
--------
experiment  experiment=fig1, output_dir=out, emit_svg=false
ou          lambda_x=0.5, lambda_y=1, sigma_x=0.1, sigma_y=2, c=1
observable  beta=-pi/4
sim         t_total=10000, dt=1/30, subsample=30, epsilon=0.1, alpha0=1,
            alpha_slope_frac=1.1, x0=sqrt(alpha0), y0=0, burn_in=100,
            tip_threshold=-0.5, alpha_cut=0.05, seed=0, n_runs=20
window      length=1000, stride=250, detrend=linear
welch       segment=256, overlap=0.5
grids       lambda_min=0.001, n_beta=256, n_lambda=256, delta=0.05, n_draws=100

The fold simulation uses the noise matrix [[sigma_x, c], [0, sigma_y]] from
the ``[ou]`` section, scaled by ``epsilon``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path as FsPath

from .errors import ParseError, ValidationError
from .ews_estimators import WelchSpec, WindowSpec
from .ou_analytics import Observable, OUParams
from .sde_sim import FoldSimConfig, NoiseMatrix

EXPERIMENTS = ("fig1", "fig2", "fig3", "theorem", "custom")


@dataclass(frozen=True)
class GridSpec:
    lambda_min: float = 1e-3
    n_beta: int = 256
    n_lambda: int = 256
    delta: float = 0.05
    n_draws: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "fig1"
    ou: OUParams = OUParams(lambda_x=0.5, lambda_y=1.0, sigma_x=0.1, sigma_y=2.0, c=1.0)
    obs: Observable = Observable(beta=-math.pi / 4)
    sim: FoldSimConfig = field(default_factory=FoldSimConfig)
    window: WindowSpec = WindowSpec()
    welch: WelchSpec = WelchSpec()
    grids: GridSpec = GridSpec()
    output_dir: str = "out"
    emit_svg: bool = False

    def fold_config(self) -> FoldSimConfig:
        """Simulation settings with the noise matrix taken from ``ou``."""
        return replace(self.sim, sigma=NoiseMatrix.from_params(self.ou))

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        p = self.ou
        if not (p.lambda_x > 0 and p.lambda_y > 0):
            raise ValidationError("stationarity requires lambda_x > 0 and lambda_y > 0")
        for name in ("sigma_x", "sigma_y", "c", "lambda_x", "lambda_y"):
            if not math.isfinite(getattr(p, name)):
                raise ValidationError(f"ou.{name} must be finite")
        if not math.isfinite(self.obs.beta):
            raise ValidationError("observable.beta must be finite")
        self.sim.validate()
        self.window.validate()
        self.welch.validate()
        if self.welch.segment > self.window.length:
            raise ValidationError("Welch segment must not exceed the window length")
        g = self.grids
        if not 0 < g.lambda_min < p.lambda_y:
            raise ValidationError("grids.lambda_min must lie in (0, lambda_y)")
        if g.n_beta < 2 or g.n_lambda < 2 or g.n_draws < 1:
            raise ValidationError("grid sizes must be >= 2 and n_draws >= 1")
        if not g.delta > 0:
            raise ValidationError("grids.delta must be positive")
        return self


# section -> (target attribute, {key: converter})
def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float(s: str) -> float:
    s = s.strip()
    # allow simple fractions such as 1/30
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


def _int(s: str) -> int:
    return int(s.strip(), 0)


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else _float(s)


_SCHEMA = {
    "experiment": {"experiment": str.strip, "output_dir": str.strip, "emit_svg": _bool},
    "ou": {k: _float for k in ("lambda_x", "lambda_y", "sigma_x", "sigma_y", "c")},
    "observable": {"beta": _float},
    "sim": {
        "t_total": _float, "dt": _float, "subsample": _int, "epsilon": _float,
        "alpha0": _float, "alpha_slope_frac": _float, "x0": _opt_float, "y0": _float,
        "burn_in": _float, "tip_threshold": _float, "alpha_cut": _float,
        "seed": _int, "n_runs": _int,
    },
    "window": {"length": _int, "stride": _int, "detrend": str.strip},
    "welch": {"segment": _int, "overlap": _float},
    "grids": {"lambda_min": _float, "n_beta": _int, "n_lambda": _int, "delta": _float, "n_draws": _int},
}
_OWNER = {key: sec for sec, keys in _SCHEMA.items() for key in keys}


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, dict] = {sec: {} for sec in _SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        sec = section if section is not None else _OWNER.get(key)
        if sec is None or key not in _SCHEMA[sec]:
            where = f"section [{section}]" if section else "any section"
            raise ParseError(f"unknown key {key!r} in {where}", lineno)
        try:
            values[sec][key] = _SCHEMA[sec][key](val)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    return _build(values)


def _build(values: dict[str, dict]) -> ExperimentConfig:
    base = ExperimentConfig()
    sim = values["sim"]
    if "subsample" in sim and sim["subsample"] < 1:
        raise ValidationError("sim.subsample must be >= 1")
    cfg = replace(
        base,
        ou=replace(base.ou, **values["ou"]),
        obs=Observable(**values["observable"]) if values["observable"] else base.obs,
        sim=replace(base.sim, **sim),
        window=replace(base.window, **values["window"]),
        welch=replace(base.welch, **values["welch"]),
        grids=replace(base.grids, **values["grids"]),
        **values["experiment"],
    )
    return cfg.validate()


def load_config(file) -> ExperimentConfig:
    if file is None:
        return ExperimentConfig().validate()
    return parse_config(FsPath(file).read_text(encoding="utf-8"))


def dump_config(cfg: ExperimentConfig) -> str:
    """Fully resolved configuration in the same format ``parse_config`` reads."""
    sim = cfg.sim
    sections = {
        "experiment": {
            "experiment": cfg.experiment,
            "output_dir": cfg.output_dir,
            "emit_svg": str(cfg.emit_svg).lower(),
        },
        "ou": {f.name: getattr(cfg.ou, f.name) for f in fields(cfg.ou)},
        "observable": {"beta": cfg.obs.beta},
        "sim": {k: ("none" if k == "x0" and sim.x0 is None else getattr(sim, k)) for k in _SCHEMA["sim"]},
        "window": {k: getattr(cfg.window, k) for k in _SCHEMA["window"]},
        "welch": {k: getattr(cfg.welch, k) for k in _SCHEMA["welch"]},
        "grids": {k: getattr(cfg.grids, k) for k in _SCHEMA["grids"]},
    }
    lines = ["# resolved ewslab configuration"]
    for sec, kv in sections.items():
        lines.append(f"\n[{sec}]")
        for k, v in kv.items():
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"
