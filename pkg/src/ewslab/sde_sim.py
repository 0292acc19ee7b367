"""Path generation for the linear OU system and the ramped fold SDE.

Two integrators live here: an exact Gaussian transition sampler for the
linear system (used as a validation oracle), and Euler-Maruyama for the
nonlinear, non-autonomous fold model

    dX = (-X^2 + alpha(t)) dt + eps (s11 dW1 + s12 dW2)
    dY = -Y dt                + eps s22 dW2,     alpha(t) = alpha0 - k t / T.

Every run draws its noise from its own counter-based generator keyed by a
mix of (master seed, run index), so ensembles give bit-identical paths no
matter how many workers produce them or in which order.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import EmptyAnalysisWindow, NonFiniteState, ValidationError
from .ou_analytics import OUParams, Observable, _beta, stationary_covariance

STATE_BOUND = 1e6
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseMatrix:
    """Upper-triangular noise coupling [[s11, s12], [0, s22]]."""

    s11: float
    s12: float
    s22: float

    @classmethod
    def from_params(cls, p: OUParams) -> "NoiseMatrix":
        return cls(p.sigma_x, p.c, p.sigma_y)

    def as_array(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [0.0, self.s22]])


@dataclass(frozen=True)
class FoldSimConfig:
    t_total: float = 1e4
    dt: float = 1.0 / 30.0
    subsample: int = 30
    epsilon: float = 0.1
    alpha0: float = 1.0
    alpha_slope_frac: float = 1.1
    sigma: NoiseMatrix = field(default_factory=lambda: NoiseMatrix(0.1, 1.0, 2.0))
    x0: Optional[float] = None  # None: sqrt(alpha0)
    y0: float = 0.0
    burn_in: float = 100.0
    tip_threshold: float = -0.5
    alpha_cut: float = 0.05
    seed: int = 0
    n_runs: int = 20

    def validate(self) -> None:
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if int(self.subsample) != self.subsample or self.subsample < 1:
            raise ValidationError("subsample must be an integer >= 1")
        if not self.t_total > self.burn_in:
            raise ValidationError("t_total must exceed burn_in")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be non-negative")
        if self.n_runs < 1:
            raise ValidationError("n_runs must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be non-negative")
        n = self.t_total / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValidationError("t_total must be an integer multiple of dt")

    @property
    def sample_dt(self) -> float:
        return self.subsample * self.dt

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))

    @property
    def initial_x(self) -> float:
        return math.sqrt(self.alpha0) if self.x0 is None else self.x0

    def alpha(self, t):
        return self.alpha0 - self.alpha_slope_frac * np.asarray(t) / self.t_total

    def alpha_inverse(self, a: float) -> float:
        """Time at which the ramp reaches alpha = a."""
        return (self.alpha0 - a) * self.t_total / self.alpha_slope_frac


@dataclass
class Path:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    tipped_at: Optional[float] = None
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self, fh, obs=None) -> None:
        cols = [self.times, self.x, self.y]
        header = "t,x,y"
        if obs is not None:
            cols.append(observable_series(self, obs))
            header += ",psi"
        fh.write(header + "\n")
        for row in zip(*(c.tolist() for c in cols)):
            fh.write(",".join(repr(v) for v in row) + "\n")


# --- seeding ----------------------------------------------------------------

def mix64(seed: int, run_index: int) -> int:
    """SplitMix64-style avalanche of (seed, run_index) to a 64-bit key."""
    z = (seed + (run_index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def run_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=mix64(seed, run_index)))


# --- linear OU oracle -------------------------------------------------------

def _transition(p: OUParams, sigma: Optional[NoiseMatrix], dt: float):
    if sigma is not None:
        p = OUParams(p.lambda_x, p.lambda_y, sigma.s11, sigma.s22, sigma.s12)
    v = stationary_covariance(p)
    dx, dy = math.exp(-p.lambda_x * dt), math.exp(-p.lambda_y * dt)
    q11 = v.v11 * (1.0 - dx * dx)
    q12 = v.v12 * (1.0 - dx * dy)
    q22 = v.v22 * (1.0 - dy * dy)
    # 2x2 Cholesky of the conditional covariance; tolerate rank deficiency
    l11 = math.sqrt(max(q11, 0.0))
    l21 = q12 / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(q22 - l21 * l21, 0.0))
    return (dx, dy), (l11, l21, l22), v


def exact_ou_step(p: OUParams, sigma: Optional[NoiseMatrix], state, dt: float, rng) -> np.ndarray:
    """Draw the state dt later from the exact Gaussian transition law."""
    (dx, dy), (l11, l21, l22), _ = _transition(p, sigma, dt)
    g1, g2 = rng.standard_normal(2)
    x, y = state
    return np.array([dx * x + l11 * g1, dy * y + l21 * g1 + l22 * g2])


def exact_ou_path(
    p: OUParams,
    n: int,
    dt: float = 1.0,
    rng=None,
    sigma: Optional[NoiseMatrix] = None,
    state0=None,
) -> Path:
    """Chain ``n`` exact steps starting from ``state0`` or a stationary draw."""
    rng = np.random.default_rng() if rng is None else rng
    (dx, dy), (l11, l21, l22), v = _transition(p, sigma, dt)
    if state0 is None:
        state0 = rng.multivariate_normal(np.zeros(2), v.as_array())
    g = rng.standard_normal((n - 1, 2))
    ex = l11 * g[:, 0]
    ey = l21 * g[:, 0] + l22 * g[:, 1]
    x = np.empty(n)
    y = np.empty(n)
    x[0], y[0] = state0
    x[1:] = lfilter([1.0], [1.0, -dx], ex, zi=[dx * x[0]])[0]
    y[1:] = lfilter([1.0], [1.0, -dy], ey, zi=[dy * y[0]])[0]
    return Path(times=np.arange(n) * dt, x=x, y=y)


# --- Euler-Maruyama ---------------------------------------------------------

def simulate_em(
    drift: Callable,
    sigma: NoiseMatrix,
    x0,
    t_total: float,
    dt: float,
    seed: Optional[int] = None,
    *,
    dW=None,
    t0: float = 0.0,
    record_every: int = 1,
    bound: float = STATE_BOUND,
) -> Path:
    """Euler-Maruyama: s_{k+1} = s_k + drift(s_k, t_k) dt + S dW_k.

    ``x0`` may be a length-2 state or a ``(2, m)`` batch of states. Brownian
    increments are drawn from ``seed`` unless passed in ``dW`` with shape
    ``(n_steps, 2[, m])``; supplying them lets several step sizes share one
    Brownian path. If the state leaves ``[-bound, bound]^2`` the returned path
    is truncated and flagged; it is never silently continued.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    n_steps = int(round(t_total / dt))
    state = np.array(x0, dtype=float)
    s = sigma.as_array()
    if dW is None:
        dW = run_rng(0 if seed is None else seed).standard_normal((n_steps, *state.shape)) * math.sqrt(dt)
    dW = np.asarray(dW)
    if dW.shape[0] < n_steps:
        raise ValidationError("not enough Brownian increments for t_total/dt steps")
    rec = [state.copy()]
    truncated = False
    for k in range(n_steps):
        t = t0 + k * dt
        nxt = state + np.asarray(drift(state, t)) * dt + np.tensordot(s, dW[k], axes=1)
        if not np.all(np.abs(nxt) <= bound):
            truncated = True
            break
        state = nxt
        if (k + 1) % record_every == 0:
            rec.append(state.copy())
    arr = np.array(rec)
    times = t0 + np.arange(len(rec)) * record_every * dt
    path = Path(times=times, x=arr[:, 0], y=arr[:, 1], truncated=truncated)
    if truncated:
        raise NonFiniteState(f"state left the box |s| <= {bound} near t={t0 + k * dt}", path)
    return path


def fold_drift(alpha: Callable[[float], float]) -> Callable:
    def drift(state, t):
        return np.array([-state[0] * state[0] + alpha(t), -state[1]])

    return drift


def simulate_fold(cfg: FoldSimConfig, run_index: int = 0) -> Path:
    """One subsampled fold path; stops at the first crossing of ``tip_threshold``.

    A run that escapes the admissible box is returned truncated with
    ``truncated=True`` (the caller decides whether to drop it).
    """
    cfg.validate()
    n_steps = cfg.n_steps
    dt = cfg.dt
    sub = int(cfg.subsample)
    g = run_rng(cfg.seed, run_index).standard_normal((n_steps, 2))
    amp = cfg.epsilon * math.sqrt(dt)
    s = cfg.sigma
    e1 = (amp * (s.s11 * g[:, 0] + s.s12 * g[:, 1])).tolist()
    e2 = (amp * s.s22 * g[:, 1]).tolist()
    alpha = cfg.alpha(np.arange(n_steps) * dt).tolist()

    n_samples = n_steps // sub + 1
    xs = np.empty(n_samples)
    ys = np.empty(n_samples)
    x, y = float(cfg.initial_x), float(cfg.y0)
    xs[0], ys[0] = x, y
    tip = cfg.tip_threshold
    decay = 1.0 - dt
    tipped_at = None
    truncated = False
    kept = 1
    for k in range(n_steps):
        x = x + (alpha[k] - x * x) * dt + e1[k]
        y = y * decay + e2[k]
        if not (abs(x) <= STATE_BOUND and abs(y) <= STATE_BOUND):
            truncated = True
            break
        if x < tip:
            tipped_at = (k + 1) * dt
            break
        if (k + 1) % sub == 0:
            xs[kept], ys[kept] = x, y
            kept += 1

    times = np.arange(kept) * cfg.sample_dt
    first = int(math.ceil(cfg.burn_in / cfg.sample_dt - 1e-9))
    return Path(
        times=times[first:],
        x=xs[first:kept].copy(),
        y=ys[first:kept].copy(),
        tipped_at=tipped_at,
        truncated=truncated,
    )


def _fold_job(args):
    cfg, i = args
    return simulate_fold(cfg, i)


def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get("EWSLAB_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def simulate_ensemble(cfg: FoldSimConfig, workers: Optional[int] = None) -> list[Path]:
    """All ``cfg.n_runs`` paths, ordered by run index."""
    cfg.validate()
    jobs = [(cfg, i) for i in range(cfg.n_runs)]
    n = worker_count(workers)
    if n == 1:
        return [_fold_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_fold_job, jobs))


def observable_series(path: Path, obs) -> np.ndarray:
    beta = _beta(obs)
    return math.cos(beta) * np.asarray(path.x) + math.sin(beta) * np.asarray(path.y)


def analysis_cutoff(path: Path, cfg: FoldSimConfig, min_samples: int = 1000) -> int:
    """Exclusive stop index of the samples admitted to estimation.

    Samples are kept while alpha(t) >= ``cfg.alpha_cut`` and, for a tipped
    run, strictly before the tipping time.
    """
    t = np.asarray(path.times)
    ok = cfg.alpha(t) >= cfg.alpha_cut
    if path.tipped_at is not None:
        ok &= t < path.tipped_at
    # admissible samples form a prefix because alpha decreases in time
    stop = int(np.argmin(ok)) if not ok.all() else len(t)
    if stop < min_samples:
        raise EmptyAnalysisWindow(
            f"only {stop} samples before the analysis cutoff, need {min_samples}"
        )
    return stop
