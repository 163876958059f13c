"""Distribution-function estimates for fields on the sphere (N = 2).

For t > 0, with mu(t) = mes(u > t), g(t) = integral over {u > t} of |grad u| and
h(t) the same integral of |grad u|^2:

    P(u > t)   >= C_I mu^(1/2)                        (isoperimetry, mu <= |M|/2)
    -g'        =  P(u > t)                            (coarea)
    -h'        <= ||f||_1                             (energy identity)
    (-g')^2    <= (-mu') (-h')                        (Cauchy-Schwarz on the level line)

give -mu' >= (-g')^2 / (-h') >= C_I^2 mu / ||f||_1, so -mu' >= C mu with
C = C_I^2 / ||f||_1, and mu(t) <= mu(0) exp(-C t). Inverting, the decreasing
rearrangement of u^+ is bounded by a - b log s with b = 1 / C.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coarea import generic_thresholds
from .errors import DomainError, ParameterError
from .fields import LevelGeometry, ScalarField, level_measure, sublevel_measure, write_csv
from .isoperimetry import SPHERE_CONSTANT, cap_scan

DECAY_SLACK = 0.05
ENERGY_SLACK = 0.05


def normalize_median(u: ScalarField, iterations: int = 200) -> ScalarField:
    """Shift u by a median level c so that mes(u > c) and mes(u < c) are both <= |M|/2."""
    half = 0.5 * u.mesh.total_area
    lo, hi = u.min, u.max
    if lo == hi:
        return u - lo
    geo = LevelGeometry(u)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        mu, _, _ = geo.sweep([mid])
        if mu[0] <= half:
            hi = mid
        else:
            lo = mid
    if sublevel_measure(u, hi) > half * (1 + 1e-9):
        # a plateau of positive area sits at the median; bisection stops just above it
        vals = u.values
        snap = float(vals[np.argmin(np.abs(vals - hi))])
        if level_measure(u, snap) <= half * (1 + 1e-9):
            hi = snap
    return u - hi


def is_normalized(u: ScalarField, rtol: float = 1e-9) -> bool:
    half = 0.5 * u.mesh.total_area
    return level_measure(u, 0.0) <= half * (1 + rtol) and sublevel_measure(u, 0.0) <= half * (1 + rtol)


def calibrated_isoperimetric_constant(sphere, angles=None) -> float:
    """sqrt(2 pi) reduced by the relative deficit of the best polar-cap level set on this mesh."""
    if angles is None:
        angles = np.linspace(0.05, np.pi / 2, 40)
    _, measured = cap_scan(sphere, angles, method="level")
    slack = max(0.0, 1.0 - measured / SPHERE_CONSTANT)
    return SPHERE_CONSTANT * (1.0 - slack)


@dataclass
class EstimateChainReport:
    thresholds: np.ndarray
    mu: np.ndarray
    C: float
    mu0: float
    level_length: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h: np.ndarray = field(default_factory=lambda: np.zeros(0))
    neg_dmu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    neg_dg: np.ndarray = field(default_factory=lambda: np.zeros(0))
    neg_dh: np.ndarray = field(default_factory=lambda: np.zeros(0))
    check11: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    check13: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    check14: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    residual12: np.ndarray = field(default_factory=lambda: np.zeros(0))
    isoperimetric_constant: float = SPHERE_CONSTANT
    f_l1: float = np.nan

    def pass_fraction(self, name: str) -> float:
        c = getattr(self, name)
        return float(np.mean(c)) if len(c) else 1.0

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ["t", "mu", "P", "g", "h", "check11", "check13", "check14"],
            zip(self.thresholds, self.mu, self.level_length, self.g, self.h, self.check11, self.check13, self.check14),
        )

    def summary(self) -> dict:
        return {
            "C": self.C,
            "C_I": self.isoperimetric_constant,
            "f_l1": self.f_l1,
            "mu0": self.mu0,
            "pass11": self.pass_fraction("check11"),
            "pass13": self.pass_fraction("check13"),
            "pass14": self.pass_fraction("check14"),
            "max_residual12": float(self.residual12.max()) if len(self.residual12) else 0.0,
        }


def estimate_chain(u: ScalarField, f_l1: float, t_grid=None, C_I: float | None = None, step: float | None = None,
                   n_thresholds: int = 100) -> EstimateChainReport:
    """Evaluate the per-threshold inequalities on a median-normalized field.

    The default grid covers the interior 90% of (0, max u). Thresholds are moved
    off vertex values and derivatives are centered differences whose stencils
    contain no vertex value, so they are exact for the piecewise-quadratic
    t-dependence of mu, g and h.
    """
    if not f_l1 > 0:
        raise ParameterError("f_l1 must be positive")
    if not is_normalized(u):
        raise DomainError("field is not median-normalized")
    if C_I is None:
        C_I = calibrated_isoperimetric_constant(u.mesh)
    C = C_I**2 / f_l1
    mu0 = level_measure(u, 0.0)
    umax = u.max
    if umax <= 0:
        if t_grid is not None and len(t_grid):
            raise ParameterError("u^+ vanishes; no thresholds available")
        return EstimateChainReport(np.zeros(0), np.zeros(0), C, mu0, isoperimetric_constant=C_I, f_l1=f_l1)
    if t_grid is None:
        t_grid = np.linspace(0.05 * umax, 0.95 * umax, n_thresholds)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(t_grid <= 0) or np.any(t_grid >= umax):
        raise ParameterError("thresholds must lie in (0, max u)")
    if step is None:
        step = 1e-3 * umax
    t, hstep = generic_thresholds(u, t_grid, step)
    geo = LevelGeometry(u)
    gn = geo.grad_norm
    w = np.column_stack([gn, gn**2])
    mu, P, W = geo.sweep(t, w)
    mup, _, Wp = geo.sweep(t + hstep, w)
    mum, _, Wm = geo.sweep(t - hstep, w)
    neg_dmu = (mum - mup) / (2 * hstep)
    neg_dg = (Wm[:, 0] - Wp[:, 0]) / (2 * hstep)
    neg_dh = (Wm[:, 1] - Wp[:, 1]) / (2 * hstep)
    check11 = P >= C_I * np.sqrt(np.maximum(mu, 0.0))
    check13 = neg_dh <= (1 + ENERGY_SLACK) * f_l1
    check14 = np.where(neg_dmu > 0, neg_dg**2 <= neg_dmu * neg_dh * (1 + 1e-9) + 1e-300, True)
    res12 = np.abs(neg_dg - P) / np.maximum(P, np.finfo(float).tiny)
    return EstimateChainReport(
        t, mu, C, mu0, P, W[:, 0], W[:, 1], neg_dmu, neg_dg, neg_dh,
        check11, check13, check14, res12, C_I, f_l1,
    )


@dataclass
class DecayVerdict:
    ok: bool
    worst_margin: float


def decay_bound_check(report: EstimateChainReport, slack: float = DECAY_SLACK) -> DecayVerdict:
    """mu(t) <= (1 + slack) mu(0) exp(-C t) at every sampled t >= 0.

    The margin at t is 1 - mu(t) / ((1 + slack) mu(0) exp(-C t)); the verdict passes when its minimum is >= 0.
    """
    t = np.asarray(report.thresholds)
    mu = np.asarray(report.mu)
    sel = t >= 0
    if not sel.any() or report.mu0 <= 0:
        return DecayVerdict(True, 1.0)
    bound = (1 + slack) * report.mu0 * np.exp(-report.C * t[sel])
    margin = 1.0 - mu[sel] / bound
    worst = float(margin.min())
    return DecayVerdict(worst >= 0, worst)


def decreasing_rearrangement(u: ScalarField, s, n_grid: int = 4000) -> np.ndarray:
    """u^{+*}(s) = inf {t >= 0 : mes(u > t) <= s}, from exact measures on a dense grid."""
    umax = max(u.max, 0.0)
    s = np.asarray(s, dtype=float)
    if umax == 0:
        return np.zeros_like(s)
    t = np.linspace(0.0, umax, n_grid)
    mu, _, _ = LevelGeometry(u).sweep(t)
    mu = np.minimum.accumulate(np.maximum(mu, 0.0))
    # mu is nonincreasing in t; interpolate t as a function of mu
    return np.interp(s, mu[::-1], t[::-1], left=umax, right=0.0)


@dataclass
class LogFit:
    a: float
    b: float
    max_residual: float
    bound_ok: bool
    lq_norms: dict


def log_bound_residual(u: ScalarField, a: float, b: float, s) -> float:
    """max over s of u^{+*}(s) - (a - b log s)."""
    s = np.asarray(s, dtype=float)
    return float(np.max(decreasing_rearrangement(u, s) - (a - b * np.log(s))))


def fit_log_profile(s, us, inflation: float = 0.05):
    """Least squares of us by a - b log s; returns (a, b, max residual, bound holds with a inflated)."""
    s = np.asarray(s, dtype=float)
    us = np.asarray(us, dtype=float)
    X = np.column_stack([np.ones_like(s), -np.log(s)])
    (a, b), *_ = np.linalg.lstsq(X, us, rcond=None)
    resid = us - (a - b * np.log(s))
    bound = us - (a + inflation * abs(a) - b * np.log(s))
    return float(a), float(b), float(resid.max()), bool(bound.max() <= 0)


def rearrangement_log_fit(u: ScalarField, n_samples: int = 200, delta_frac: float = 1e-3,
                          inflation: float = 0.05) -> LogFit:
    """Least-squares fit of u^{+*}(s) by a - b log s on log-spaced s in [mu(max u) + delta, mu(0)].

    The bound holds when u^{+*}(s) <= a + inflation * |a| - b log s on all samples.
    Also reports the L^q norms of u^+ for q in {2, 4, 8}.
    """
    if not is_normalized(u):
        raise DomainError("field is not median-normalized")
    if u.max <= 0:
        return LogFit(0.0, 0.0, 0.0, True, {"2": 0.0, "4": 0.0, "8": 0.0})
    mu0 = level_measure(u, 0.0)
    delta = delta_frac * mu0
    s = np.geomspace(delta, mu0, n_samples)
    a, b, max_res, ok = fit_log_profile(s, decreasing_rearrangement(u, s), inflation)
    mass = u.mesh.operators.mass
    up = np.maximum(u.values, 0.0)
    lq = {str(q): float(np.sum(mass * up**q) ** (1.0 / q)) for q in (2, 4, 8)}
    return LogFit(a, b, max_res, ok, lq)
