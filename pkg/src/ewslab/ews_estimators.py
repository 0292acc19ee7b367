"""Sliding-window early-warning indicators for scalar time series.

Six estimators are provided: variance, lag-1 autocorrelation, the maximum of a
Welch power spectrum, and three restoring-rate estimates (binned Kramers-Moyal
drift slope, iterated GLS for AR(1) with AR(1) residuals, and a Lorentzian fit
to the Welch spectrum). Series are assumed to be sampled at a unit interval
unless ``dt`` says otherwise.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import signal

from .errors import (
    DegenerateBins,
    FitDegenerate,
    SeriesTooShort,
    ValidationError,
    ZeroVariance,
)

ESTIMATOR_IDS = ("variance", "ac1", "psd_max", "km_rate", "gls_rate", "psd_fit_rate")


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class WindowSpec:
    length: int = 1000
    stride: int = 250
    detrend: str = "linear"

    def validate(self) -> None:
        if self.length < 16:
            raise ValidationError("window length must be >= 16")
        if not 1 <= self.stride <= self.length:
            raise ValidationError("window stride must lie in [1, length]")
        if self.detrend not in ("none", "mean", "linear"):
            raise ValidationError(f"unknown detrend mode {self.detrend!r}")


@dataclass(frozen=True)
class WelchSpec:
    segment: int = 256
    overlap: float = 0.5
    taper: str = "hann"

    def validate(self) -> None:
        if self.segment < 4:
            raise ValidationError("Welch segment must be >= 4")
        if not 0 <= self.overlap < 1:
            raise ValidationError("Welch overlap must lie in [0, 1)")
        if self.taper != "hann":
            raise ValidationError("only the Hann taper is supported")


@dataclass
class IndicatorSeries:
    centers: np.ndarray
    values: np.ndarray
    estimator_id: str
    run_id: str = "mean"

    def __len__(self) -> int:
        return len(self.centers)

    def csv_rows(self) -> Iterable[str]:
        for t, v in zip(self.centers.tolist(), self.values.tolist()):
            yield f"{t!r},{v!r},{self.estimator_id},{self.run_id}"


# --- windowing ----------------------------------------------------------------

def detrend(segment, mode: str = "linear") -> np.ndarray:
    seg = np.asarray(segment, dtype=float)
    if mode == "none":
        return seg.copy()
    if mode == "mean":
        return seg - seg.mean()
    if mode == "linear":
        i = np.arange(len(seg), dtype=float)
        slope, icpt = np.polyfit(i, seg, 1)
        return seg - (slope * i + icpt)
    raise ValidationError(f"unknown detrend mode {mode!r}")


def windows(series, spec: WindowSpec = WindowSpec(), times=None):
    """Yield ``(center, detrended segment)`` for each sliding window.

    Centers are sample indices, or times when ``times`` is given.
    """
    spec.validate()
    x = np.asarray(series, dtype=float)
    if len(x) < spec.length:
        raise SeriesTooShort(f"series of {len(x)} samples is shorter than window {spec.length}")
    out = []
    for start in range(0, len(x) - spec.length + 1, spec.stride):
        stop = start + spec.length
        if times is None:
            center = start + 0.5 * (spec.length - 1)
        else:
            center = 0.5 * (float(times[start]) + float(times[stop - 1]))
        out.append((center, detrend(x[start:stop], spec.detrend)))
    return out


# --- scalar estimators --------------------------------------------------------

def var_estimator(segment) -> float:
    x = np.asarray(segment, dtype=float)
    if len(x) < 2:
        raise SeriesTooShort("variance needs at least 2 samples")
    return float(np.var(x))


def ac1_estimator(segment) -> float:
    x = np.asarray(segment, dtype=float)
    if len(x) < 3:
        raise SeriesTooShort("AC(1) needs at least 3 samples")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom <= 0.0:
        raise ZeroVariance("AC(1) undefined for a constant segment")
    return float(np.dot(x[:-1], x[1:]) / denom)


def welch_psd(segment, spec: WelchSpec = WelchSpec(), dt: float = 1.0):
    """One-sided Hann-tapered Welch spectrum; returns ``(freqs, psd)``."""
    spec.validate()
    x = np.asarray(segment, dtype=float)
    if len(x) < spec.segment:
        raise SeriesTooShort(f"segment of {len(x)} samples is shorter than Welch segment {spec.segment}")
    return signal.welch(
        x,
        fs=1.0 / dt,
        window=spec.taper,
        nperseg=spec.segment,
        noverlap=int(spec.overlap * spec.segment),
        detrend="constant",
        return_onesided=True,
        scaling="density",
    )


def psd_max(segment, spec: WelchSpec = WelchSpec(), dt: float = 1.0) -> float:
    _, s = welch_psd(segment, spec, dt)
    return float(np.max(s[1:]))


@dataclass(frozen=True)
class KMFit:
    rate: float
    slope: float
    stderr: float
    centers: np.ndarray
    drift: np.ndarray
    counts: np.ndarray


def km_drift_fit(segment, n_bins: int = 20, dt: float = 1.0, finite_dt_correction: bool = True) -> KMFit:
    """Binned first Kramers-Moyal coefficient and its weighted linear fit.

    The raw estimate of the restoring rate is minus the fitted slope of the
    conditional mean increment. For a linear process sampled at ``dt`` that
    slope equals ``(exp(-lambda dt) - 1) / dt``, so with
    ``finite_dt_correction`` the rate is reported as ``-log(1 + slope dt) / dt``.
    """
    x = np.asarray(segment, dtype=float)
    if len(x) < 10 * n_bins:
        raise SeriesTooShort(f"need at least {10 * n_bins} samples for {n_bins} bins")
    lo, hi = np.percentile(x, [5.0, 95.0])
    if not hi > lo:
        raise DegenerateBins("value range between the 5th and 95th percentiles is empty")
    edges = np.linspace(lo, hi, n_bins + 1)
    xs = x[:-1]
    inc = np.diff(x) / dt
    inside = (xs >= lo) & (xs <= hi)
    idx = np.clip(np.searchsorted(edges, xs[inside], side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=inc[inside], minlength=n_bins)
    keep = counts > 0
    if keep.sum() < 3:
        raise DegenerateBins("fewer than 3 non-empty bins")
    centers = 0.5 * (edges[:-1] + edges[1:])[keep]
    w = counts[keep].astype(float)
    d1 = sums[keep] / w
    xm = np.average(centers, weights=w)
    ym = np.average(d1, weights=w)
    sxx = np.sum(w * (centers - xm) ** 2)
    slope = np.sum(w * (centers - xm) * (d1 - ym)) / sxx
    resid = d1 - ym - slope * (centers - xm)
    dof = max(len(centers) - 2, 1)
    stderr = math.sqrt(np.sum(w * resid**2) / dof / sxx)
    if finite_dt_correction:
        phi = max(1.0 + slope * dt, 1e-6)
        rate = -math.log(phi) / dt
    else:
        rate = -slope
    return KMFit(float(rate), float(slope), stderr, centers, d1, counts[keep])


def km_drift_rate(segment, n_bins: int = 20, dt: float = 1.0, finite_dt_correction: bool = True) -> float:
    return km_drift_fit(segment, n_bins, dt, finite_dt_correction).rate


_PHI_LO, _PHI_HI = 1e-6, 1.0 - 1e-6


def gls_ar1_phi(segment, max_iter: int = 10, tol: float = 1e-6) -> tuple[float, float, bool]:
    """Feasible GLS for x_{i+1} = phi x_i + eta_i with AR(1) residuals eta.

    Returns ``(phi, rho, converged)``; phi is clamped to (1e-6, 1 - 1e-6).
    """
    x = np.asarray(segment, dtype=float)
    if len(x) < 50:
        raise SeriesTooShort("GLS AR(1) needs at least 50 samples")
    x = x - x.mean()
    reg, resp = x[:-1], x[1:]
    denom = float(np.dot(reg, reg))
    if denom <= 0.0:
        raise ZeroVariance("GLS AR(1) undefined for a constant segment")
    phi = float(np.dot(reg, resp) / denom)
    rho = 0.0
    converged = False
    for _ in range(max_iter):
        e = resp - phi * reg
        ee = float(np.dot(e, e))
        rho = float(np.dot(e[:-1], e[1:]) / ee) if ee > 0 else 0.0
        rho = min(max(rho, -1.0 + 1e-6), 1.0 - 1e-6)
        # Prais-Winsten transform whitens covariance rho^|i-j|
        scale0 = math.sqrt(1.0 - rho * rho)
        wx = np.concatenate(([scale0 * reg[0]], reg[1:] - rho * reg[:-1]))
        wy = np.concatenate(([scale0 * resp[0]], resp[1:] - rho * resp[:-1]))
        new = float(np.dot(wx, wy) / np.dot(wx, wx))
        done = abs(new - phi) < tol
        phi = new
        if done:
            converged = True
            break
    return min(max(phi, _PHI_LO), _PHI_HI), rho, converged


def gls_ar1_rate(segment, max_iter: int = 10, tol: float = 1e-6, dt: float = 1.0) -> float:
    phi, _, converged = gls_ar1_phi(segment, max_iter, tol)
    if not converged:
        warnings.warn(f"GLS AR(1) did not converge in {max_iter} iterations", NonConvergenceWarning)
    return -math.log(phi) / dt


def _golden(fun: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def lorentzian_power(freqs, lam: float, dt: Optional[float] = None) -> np.ndarray:
    """Unit-amplitude Lorentzian 1 / (lam^2 + (2 pi f)^2).

    With ``dt`` the spectrum is folded over all aliases ``f + k / dt``, which
    is the exact spectral shape of an OU process sampled at interval ``dt``:
    ``dt sinh(lam dt) / (2 lam (cosh(lam dt) - cos(2 pi f dt)))``.
    """
    f = np.asarray(freqs, dtype=float)
    if dt is None:
        return 1.0 / (lam * lam + (2.0 * math.pi * f) ** 2)
    x = lam * dt
    # cosh(x) - cos(y) = 2 sinh^2(x/2) + 2 sin^2(y/2), no cancellation at small x
    denom = 2.0 * np.sinh(0.5 * x) ** 2 + 2.0 * np.sin(math.pi * f * dt) ** 2
    return dt * math.sinh(x) / (2.0 * lam * denom)


def fit_lorentzian(
    freqs,
    psd,
    dt: Optional[float] = None,
    lam_min: float = 1e-3,
    lam_max: float = 5.0,
    n_grid: int = 200,
):
    """Least-squares fit of log S(f) to log(a * lorentzian_power(f, lam, dt)).

    Uses positive frequencies with positive power only. ``a`` is solved in
    closed form for each trial ``lam``: a log-spaced grid picks the bracket
    and golden-section search refines it. Returns ``(lam, a)``.
    """
    f = np.asarray(freqs, dtype=float)
    s = np.asarray(psd, dtype=float)
    use = (f > 0) & (s > 0)
    if not np.any(s > 0) or use.sum() < 2:
        raise FitDegenerate("spectrum has no positive power at positive frequencies")
    logs = np.log(s[use])
    fu = f[use]

    def sse(lam: float) -> float:
        r = logs - np.log(lorentzian_power(fu, lam, dt))
        return float(np.sum((r - r.mean()) ** 2))

    grid = np.logspace(math.log10(lam_min), math.log10(lam_max), n_grid)
    costs = np.array([sse(l) for l in grid])
    i = int(np.argmin(costs))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    lam = _golden(sse, lo, hi)
    log_a = float(np.mean(logs - np.log(lorentzian_power(fu, lam, dt))))
    return lam, math.exp(log_a)


def psd_fit_rate(segment, spec: WelchSpec = WelchSpec(), dt: float = 1.0, aliased: bool = True) -> float:
    """Restoring rate from a Lorentzian fit to the Welch spectrum.

    ``aliased`` folds the model over the sampling aliases; without it the
    continuous Lorentzian overestimates the rate once lam * dt is not small.
    """
    f, s = welch_psd(segment, spec, dt)
    return fit_lorentzian(f, s, dt if aliased else None)[0]


# --- indicator series ---------------------------------------------------------

def window_indicators(
    series,
    times=None,
    window: WindowSpec = WindowSpec(),
    welch: WelchSpec = WelchSpec(),
    run_id: str = "0",
    estimators: Sequence[str] = ESTIMATOR_IDS,
    dt: float = 1.0,
) -> dict[str, IndicatorSeries]:
    """Evaluate the selected estimators on every window of ``series``."""
    funcs = {
        "variance": var_estimator,
        "ac1": ac1_estimator,
        "psd_max": lambda s: psd_max(s, welch, dt),
        "km_rate": lambda s: km_drift_rate(s, dt=dt),
        "gls_rate": lambda s: gls_ar1_rate(s, dt=dt),
        "psd_fit_rate": lambda s: psd_fit_rate(s, welch, dt),
    }
    wins = windows(series, window, times)
    centers = np.array([c for c, _ in wins])
    out = {}
    for name in estimators:
        fn = funcs[name]
        vals = np.array([fn(seg) for _, seg in wins])
        out[name] = IndicatorSeries(centers, vals, name, run_id)
    return out


def ensemble_mean(runs: Sequence[IndicatorSeries]) -> IndicatorSeries:
    """Mean per window index over all runs that reach that index."""
    if not runs:
        raise SeriesTooShort("no runs to average")
    n = max(len(r) for r in runs)
    longest = max(runs, key=len)
    total = np.zeros(n)
    count = np.zeros(n)
    for r in runs:
        if not np.array_equal(r.centers, longest.centers[: len(r)]):
            raise ValidationError("runs do not share a window grid")
        total[: len(r)] += r.values
        count[: len(r)] += 1
    return IndicatorSeries(longest.centers.copy(), total / count, runs[0].estimator_id, "mean")


def indicator_trend(ind: IndicatorSeries) -> tuple[float, int]:
    """OLS slope of value against window-center time, and its sign."""
    if len(ind) < 3:
        raise SeriesTooShort("trend needs at least 3 points")
    t = np.asarray(ind.centers, dtype=float)
    v = np.asarray(ind.values, dtype=float)
    tc = t - t.mean()
    slope = float(np.dot(tc, v - v.mean()) / np.dot(tc, tc))
    scale = float(np.max(np.abs(v))) or 1.0
    if abs(slope) < 1e-12 * scale:
        return slope, 0
    return slope, 1 if slope > 0 else -1
