"""Closed-form stationary statistics of the cross-coupled 2D Ornstein-Uhlenbeck process.

The process is

    dX = -lambda_x X dt + sigma_x dW1 + c dW2
    dY = -lambda_y Y dt               + sigma_y dW2

observed through the linear projection ``psi = cos(beta) X + sin(beta) Y``.
Everything here is a pure function of immutable inputs, so grid sweeps can be
evaluated in any order (or in parallel) with identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    DegenerateRate,
    NegativeLag,
    PreconditionViolated,
    SingularCovariance,
    ZeroSigmaY,
)

# centred finite-difference step for lambda_star / deceitful_interval (relative)
FD_STEP = 1e-6
# centred finite-difference step for trend maps (relative)
TREND_FD_STEP = 1e-4
BISECT_TOL = 1e-9
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class OUParams:
    """Constants of the linear SDE: two restoring rates, three noise couplings."""

    lambda_x: float
    lambda_y: float
    sigma_x: float
    sigma_y: float
    c: float

    def with_lambda_x(self, lambda_x: float) -> "OUParams":
        return replace(self, lambda_x=float(lambda_x))

    def drift_matrix(self) -> np.ndarray:
        return np.array([[-self.lambda_x, 0.0], [0.0, -self.lambda_y]])

    def noise_matrix(self) -> np.ndarray:
        return np.array([[self.sigma_x, self.c], [0.0, self.sigma_y]])

    def check_stationary(self) -> None:
        if not (self.lambda_x > 0 and self.lambda_y > 0):
            raise DegenerateRate(
                f"restoring rates must be positive, got lambda_x={self.lambda_x}, "
                f"lambda_y={self.lambda_y}"
            )


# parameters of the worked example: lambda_y=1, sigma_x=0.1, sigma_y=2, c=1
EXAMPLE_PARAMS = OUParams(lambda_x=0.5, lambda_y=1.0, sigma_x=0.1, sigma_y=2.0, c=1.0)


@dataclass(frozen=True)
class Observable:
    """Mixing angle of the linear observable psi = cos(beta) X + sin(beta) Y."""

    beta: float

    @property
    def weights(self) -> np.ndarray:
        return np.array([math.cos(self.beta), math.sin(self.beta)])


@dataclass(frozen=True)
class Cov2:
    v11: float
    v12: float
    v22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])

    @property
    def det(self) -> float:
        return self.v11 * self.v22 - self.v12 * self.v12

    def is_positive_definite(self) -> bool:
        return self.v11 > 0 and self.v22 > 0 and self.det > 0


@dataclass(frozen=True)
class Mat2:
    m11: float
    m12: float
    m21: float
    m22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        scale = max(abs(self.m12), abs(self.m21), 1.0)
        return abs(self.m12 - self.m21) <= tol * scale


@dataclass(frozen=True)
class TrendMap:
    """Sign of d(indicator)/d(lambda_x) on a (beta, lambda_x) grid.

    Arrays are indexed ``[i_beta, i_lambda]``. Sign -1 means the indicator
    grows as lambda_x decreases (consistent with critical slowing down),
    +1 means it shrinks (deceitful), 0 means flat within tolerance.
    """

    beta_grid: np.ndarray
    lambda_grid: np.ndarray
    var_sign: np.ndarray
    ac_sign: np.ndarray
    var: np.ndarray
    ac: np.ndarray


class LambdaStar(NamedTuple):
    """Turning points of variance and AC(1) in lambda_x (None if monotone)."""

    var: Optional[float]
    ac: Optional[float]

    @property
    def combined(self) -> Optional[float]:
        found = [v for v in (self.var, self.ac) if v is not None]
        return max(found) if found else None


def _beta(obs) -> float:
    return float(obs.beta) if isinstance(obs, Observable) else float(obs)


# --- vectorised kernels (broadcast over beta and lambda_x) -----------------

def _cov_entries(lx, ly, sx, sy, c):
    v11 = (sx * sx + c * c) / (2.0 * lx)
    v22 = sy * sy / (2.0 * ly)
    v12 = sy * c / (lx + ly)
    return v11, v12, v22


def _variance(p: OUParams, beta, lx, *, lx_part: bool = False):
    # lx_part=True drops sin^2(beta) v22, the only lambda_x-free term, so that
    # differences in lambda_x do not suffer cancellation near beta = pi/2.
    v11, v12, v22 = _cov_entries(lx, p.lambda_y, p.sigma_x, p.sigma_y, p.c)
    cb, sb = np.cos(beta), np.sin(beta)
    part = cb * (cb * v11 + 2.0 * sb * v12)
    if lx_part:
        return part
    return part + sb * sb * v22


def _autocorrelation(p: OUParams, beta, lx, tau=1.0, *, excess: bool = False):
    # AC(tau) = exp(-lambda_y tau) + excess, with
    # excess = cos(b) (e^{-lx tau} - e^{-ly tau}) (cos(b) v11 + sin(b) v12) / Var
    v11, v12, v22 = _cov_entries(lx, p.lambda_y, p.sigma_x, p.sigma_y, p.c)
    cb, sb = np.cos(beta), np.sin(beta)
    var = cb * (cb * v11 + 2.0 * sb * v12) + sb * sb * v22
    ex, ey = np.exp(-lx * tau), np.exp(-p.lambda_y * tau)
    extra = cb * (ex - ey) * (cb * v11 + sb * v12) / var
    if excess:
        return extra
    return ey + extra


def _fd_lambda(fun, lx, rel_step):
    h = rel_step * np.maximum(1.0, lx)
    return (fun(lx + h) - fun(lx - h)) / (2.0 * h)


def _dvar_dlx(p, beta, lx, rel_step=FD_STEP):
    return _fd_lambda(lambda l: _variance(p, beta, l, lx_part=True), lx, rel_step)


def _dac_dlx(p, beta, lx, rel_step=FD_STEP):
    return _fd_lambda(lambda l: _autocorrelation(p, beta, l, excess=True), lx, rel_step)


# --- closed forms -----------------------------------------------------------

def stationary_covariance(p: OUParams) -> Cov2:
    """Solution V of the Lyapunov equation A V + V A^T + S S^T = 0."""
    p.check_stationary()
    v11, v12, v22 = _cov_entries(p.lambda_x, p.lambda_y, p.sigma_x, p.sigma_y, p.c)
    return Cov2(v11=v11, v12=v12, v22=v22)


def lyapunov_residual(p: OUParams) -> float:
    """Max-norm of A V + V A^T + S S^T for the closed-form V."""
    a = p.drift_matrix()
    s = p.noise_matrix()
    v = stationary_covariance(p).as_array()
    return float(np.max(np.abs(a @ v + v @ a.T + s @ s.T)))


def lag_covariance(p: OUParams, tau: float) -> Mat2:
    """Lag-tau covariance exp(tau A) V.

    Entry (i, j) is E[Z_i(t + tau) Z_j(t)]: row 1 decays with lambda_x,
    row 2 with lambda_y.
    """
    if tau < 0:
        raise NegativeLag(f"lag must be non-negative, got {tau}")
    v = stationary_covariance(p)
    ex, ey = math.exp(-p.lambda_x * tau), math.exp(-p.lambda_y * tau)
    return Mat2(m11=v.v11 * ex, m12=v.v12 * ex, m21=v.v12 * ey, m22=v.v22 * ey)


def lag_correlation(p: OUParams, tau: float) -> Mat2:
    r = lag_covariance(p, tau)
    v = stationary_covariance(p)
    if v.v11 <= 0 or v.v22 <= 0:
        raise SingularCovariance("a component has zero stationary variance")
    s1, s2 = math.sqrt(v.v11), math.sqrt(v.v22)
    return Mat2(
        m11=r.m11 / v.v11,
        m12=r.m12 / (s1 * s2),
        m21=r.m21 / (s1 * s2),
        m22=r.m22 / v.v22,
    )


def observable_variance(p: OUParams, obs) -> float:
    """Stationary variance of psi, i.e. the quadratic form w^T V w."""
    p.check_stationary()
    return float(_variance(p, _beta(obs), p.lambda_x))


def observable_autocorrelation(p: OUParams, obs, tau: float = 1.0) -> float:
    """Lag-tau autocorrelation of psi (tau = 1 is the usual AC(1))."""
    if tau < 0:
        raise NegativeLag(f"lag must be non-negative, got {tau}")
    p.check_stationary()
    beta = _beta(obs)
    if _variance(p, beta, p.lambda_x) <= 0:
        raise SingularCovariance(f"observable has zero variance at beta={beta}")
    return float(_autocorrelation(p, beta, p.lambda_x, tau))


def theorem_derivatives(p: OUParams) -> tuple[float, float]:
    """Mixed partials d/d(beta) d/d(lambda_x) of Var[psi] and AC(1) at beta = pi/2.

    Returns ``(dvar, dac)``. For lambda_x <= lambda_y both carry the sign of
    ``c * sigma_y``; the deceitful mixing angles therefore sit just above
    pi/2 when that sign is positive and just below when it is negative.
    """
    p.check_stationary()
    if p.sigma_y == 0:
        raise ZeroSigmaY("AC(1) mixed derivative is undefined for sigma_y = 0")
    lx, ly = p.lambda_x, p.lambda_y
    s2 = (lx + ly) ** 2
    dvar = 2.0 * p.c * p.sigma_y / s2
    dac = 2.0 * p.c * ly * (math.exp(-lx) * (1.0 + lx + ly) - math.exp(-ly)) / (s2 * p.sigma_y)
    return dvar, dac


def mixed_partials_fd(
    p: OUParams, h: float = 1e-5, beta: float = 0.5 * math.pi, richardson: bool = True
) -> tuple[float, float]:
    """Central-difference d/d(beta) d/d(lambda_x) of Var[psi] and AC(1).

    Independent check for ``theorem_derivatives``. With ``richardson`` the
    O(h^2) error is cancelled using a second evaluation at h/2; this matters
    when sigma_y is small and AC(1) is strongly curved in beta.
    """
    p.check_stationary()
    lx = p.lambda_x

    def mixed(f, h):
        return (f(beta + h, lx + h) - f(beta + h, lx - h) - f(beta - h, lx + h) + f(beta - h, lx - h)) / (4.0 * h * h)

    def both(h):
        return (
            mixed(lambda b, l: _variance(p, b, l, lx_part=True), h),
            mixed(lambda b, l: _autocorrelation(p, b, l, excess=True), h),
        )

    dvar, dac = both(h)
    if richardson:
        dvar2, dac2 = both(0.5 * h)
        dvar, dac = (4.0 * dvar2 - dvar) / 3.0, (4.0 * dac2 - dac) / 3.0
    return float(dvar), float(dac)


# --- numeric searches -------------------------------------------------------

def _last_sign_change(fun, lo: float, hi: float, n_scan: int) -> Optional[float]:
    grid = np.linspace(lo, hi, n_scan)
    vals = fun(grid)
    sgn = np.where(np.abs(vals) <= SIGN_TOL, 0, np.sign(vals)).astype(int)
    nz = np.flatnonzero(sgn)
    if nz.size < 2:
        return None
    changes = np.flatnonzero(sgn[nz[1:]] != sgn[nz[:-1]])
    if changes.size == 0:
        return None
    i = changes[-1]
    a, b = float(grid[nz[i]]), float(grid[nz[i + 1]])
    fa = float(fun(np.array(a)))
    while b - a > BISECT_TOL:
        m = 0.5 * (a + b)
        fm = float(fun(np.array(m)))
        if fm == 0.0:
            return m
        if math.copysign(1.0, fm) == math.copysign(1.0, fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def lambda_star(
    p_template: OUParams,
    obs,
    lambda_min: float,
    lambda_max: float,
    n_scan: int = 2000,
) -> LambdaStar:
    """Largest lambda_x in [lambda_min, lambda_max] where each indicator turns.

    Below the smaller of the two turning points both indicators increase
    monotonically as lambda_x decreases. ``None`` marks an indicator that is
    monotone on the interval.
    """
    if not (0 < lambda_min < lambda_max):
        raise DegenerateRate(f"need 0 < lambda_min < lambda_max, got {lambda_min}, {lambda_max}")
    p_template.with_lambda_x(lambda_min).check_stationary()
    beta = _beta(obs)
    lv = _last_sign_change(lambda l: _dvar_dlx(p_template, beta, l), lambda_min, lambda_max, n_scan)
    la = _last_sign_change(lambda l: _dac_dlx(p_template, beta, l), lambda_min, lambda_max, n_scan)
    return LambdaStar(var=lv, ac=la)


def _is_deceitful(p: OUParams, beta: float, lam: np.ndarray) -> bool:
    """Both indicators strictly increasing in lambda_x across the whole grid."""
    dv = _dvar_dlx(p, beta, lam)
    da = _dac_dlx(p, beta, lam)
    if not (np.all(dv > 0) and np.all(da > 0)):
        return False
    var = _variance(p, beta, lam, lx_part=True)
    ac = _autocorrelation(p, beta, lam, excess=True)
    return bool(np.all(np.diff(var) > 0) and np.all(np.diff(ac) > 0))


def deceitful_interval(
    p_template: OUParams,
    delta: float,
    grid_points: int = 64,
    resolution: float = 1e-3,
    min_width: float = 1e-14,
) -> tuple[float, float]:
    """Open interval of mixing angles next to pi/2 on which both Var and AC(1)
    decrease while lambda_x is lowered from lambda_y to ``delta``.

    The side of pi/2 follows the sign of ``c * sigma_y``. The width is found by
    halving until the first admissible offset, stepping outwards in steps of
    at most ``resolution``, and bisecting the first failing step.
    """
    p = p_template
    if p.c == 0 or p.sigma_x == 0 or p.sigma_y == 0:
        raise PreconditionViolated("c, sigma_x and sigma_y must all be non-zero")
    if not (0 < delta < p.lambda_y):
        raise PreconditionViolated(f"need 0 < delta < lambda_y, got delta={delta}")
    side = 1.0 if p.c * p.sigma_y > 0 else -1.0
    lam = np.linspace(delta, p.lambda_y, grid_points)
    half_pi = 0.5 * math.pi

    def ok(g: float) -> bool:
        return _is_deceitful(p, half_pi + side * g, lam)

    g = resolution
    while not ok(g):
        g *= 0.5
        if g < min_width:
            raise PreconditionViolated("no admissible mixing angle found near pi/2")
    good = g
    bad = None
    while good < half_pi:
        nxt = min(good + resolution, 2.0 * good, half_pi)
        if not ok(nxt):
            bad = nxt
            break
        good = nxt
    if bad is not None:
        while bad - good > BISECT_TOL * max(1.0, good):
            m = 0.5 * (good + bad)
            if ok(m):
                good = m
            else:
                bad = m
    lo, hi = sorted((half_pi, half_pi + side * good))
    return lo, hi


def trend_sign_map(
    p_template: OUParams,
    beta_grid=None,
    lambda_grid=None,
    lambda_min: float = 1e-3,
    n_beta: int = 256,
    n_lambda: int = 256,
) -> TrendMap:
    """Signs of the lambda_x-derivatives of Var[psi] and AC(1) over a grid."""
    if beta_grid is None:
        beta_grid = np.linspace(0.0, math.pi, n_beta, endpoint=False)
    if lambda_grid is None:
        lambda_grid = np.linspace(lambda_min, p_template.lambda_y, n_lambda)
    beta_grid = np.asarray(beta_grid, dtype=float)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if np.any(lambda_grid <= 0) or p_template.lambda_y <= 0:
        raise DegenerateRate("all lambda values must be positive")
    b = beta_grid[:, None]
    lx = lambda_grid[None, :]
    dv = _dvar_dlx(p_template, b, lx, TREND_FD_STEP)
    da = _dac_dlx(p_template, b, lx, TREND_FD_STEP)

    def sign(d):
        return np.where(np.abs(d) < SIGN_TOL, 0, np.sign(d)).astype(np.int8)

    return TrendMap(
        beta_grid=beta_grid,
        lambda_grid=lambda_grid,
        var_sign=sign(dv),
        ac_sign=sign(da),
        var=_variance(p_template, b, lx),
        ac=_autocorrelation(p_template, b, lx),
    )
