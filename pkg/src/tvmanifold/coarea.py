"""Layer-cake decomposition and the coarea identity for piecewise-linear fields.

Within one face the level lines of the linear interpolant are parallel segments
whose length is a tent function of t, peaking at the middle vertex value with
length ``lmid``. Integrating over t gives ``(c - a) * lmid / 2`` per face, which
is the face's area times |grad u|. Summing over faces is the discrete form of
V(u) = integral of P(u > t) dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .fields import LevelGeometry, ScalarField, l1_norm, write_csv


@dataclass(frozen=True)
class LayerCakeField:
    threshold: float
    values: np.ndarray


@dataclass
class CoareaResult:
    closed_form: float
    quadrature: float
    thresholds: np.ndarray
    level_lengths: np.ndarray


@dataclass
class DerivativeCheck:
    max_residual: float
    thresholds: np.ndarray
    steps: np.ndarray
    level_lengths: np.ndarray
    g: np.ndarray
    neg_dg: np.ndarray
    residuals: np.ndarray

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ["t", "P_level", "g", "residual"],
            zip(self.thresholds, self.level_lengths, self.g, self.residuals),
        )


def layer_cake_decompose(u: ScalarField, t: float) -> LayerCakeField:
    """b(t, x) at vertices: +1 if u > t >= 0, -1 if u <= t < 0, else 0."""
    v = u.values
    b = np.zeros(len(v), dtype=np.int8)
    if t >= 0:
        b[v > t] = 1
    else:
        b[v <= t] = -1
    return LayerCakeField(float(t), b)


def _trapezoid(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def layer_cake_l1_check(u: ScalarField, t_grid) -> float:
    """Relative gap between the t-quadrature of the measure of {b(t,.) != 0} and the exact L1 norm.

    For t >= 0 the measure is mes(u > t); for t < 0 it is mes(u <= t). Each side
    is integrated separately with 0 and the field extremes added to the grid.
    """
    t = np.unique(np.asarray(t_grid, dtype=float))
    total = 0.0
    hi = max(u.max, 0.0)
    lo = min(u.min, 0.0)
    if hi > 0:
        tp = np.unique(np.concatenate([[0.0, hi], t[(t > 0) & (t < hi)]]))
        # left limit at the maximum so a plateau there is not halved by the trapezoid
        mu, _, _ = LevelGeometry(u).sweep(np.append(tp[:-1], np.nextafter(hi, 0.0)))
        total += _trapezoid(mu, tp)
    if lo < 0:
        tn = np.unique(np.concatenate([[lo, 0.0], t[(t > lo) & (t < 0)]]))
        # mes(u <= t) = mes(-u >= -t); a.e. equal to mes(-u > -t)
        mun, _, _ = LevelGeometry(-u).sweep(-np.concatenate([[np.nextafter(lo, 0.0)], tn[1:]]))
        total += _trapezoid(mun, tn)
    exact = l1_norm(u)
    if exact == 0:
        return abs(total)
    return abs(total - exact) / exact


def coarea_closed_form(u: ScalarField) -> float:
    """Sum over faces of the integral over t of the level-segment length."""
    geo = LevelGeometry(u)
    span = geo.sorted_vals[:, 2] - geo.sorted_vals[:, 0]
    return float(np.sum(0.5 * span * geo.lmid))


def coarea_integral(u: ScalarField, n_thresholds: int = 1000) -> CoareaResult:
    """Closed-form coarea integral plus trapezoid quadrature of t -> P(u > t)."""
    closed = coarea_closed_form(u)
    if u.is_constant():
        return CoareaResult(closed, 0.0, np.array([u.min]), np.zeros(1))
    t = np.linspace(u.min, u.max, n_thresholds)
    _, P, _ = LevelGeometry(u).sweep(t)
    return CoareaResult(closed, _trapezoid(P, t), t, P)


def generic_thresholds(u: ScalarField, t_grid, step: float):
    """Move each t to the middle of its gap between consecutive distinct vertex values.

    Returns (t, h) where h <= step keeps [t - h, t + h] free of vertex values, so
    g(t) is an exact quadratic on the stencil.
    """
    vals = np.unique(u.values)
    # values a few ulps apart count as one; their gap is too small for a stencil
    tol = 1e-12 * max(np.abs(vals).max(), vals[-1] - vals[0])
    vals = vals[np.concatenate([[True], np.diff(vals) > tol])]
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= vals[0]) or np.any(t >= vals[-1]):
        raise ParameterError("thresholds must lie strictly inside (min u, max u)")
    j = np.searchsorted(vals, t, side="right")
    lo, hi = vals[j - 1], vals[j]
    on_vertex = t == lo
    # a threshold sitting on a vertex value moves into the gap above it
    mid = 0.5 * (lo + hi)
    t_new = np.where(on_vertex | (t - lo < 0.5 * step) | (hi - t < 0.5 * step), mid, t)
    h = np.minimum(step, 0.49 * np.minimum(t_new - lo, hi - t_new))
    return t_new, h


def derivative_identity_check(u: ScalarField, t_grid, step: float = 1e-3) -> DerivativeCheck:
    """Compare the central difference of g(t) = integral over {u > t} of |grad u| with P(u > t).

    Residuals are |(-dg/dt) - P| / P at each (de-duplicated, vertex-avoiding) threshold.
    """
    if u.is_constant():
        raise DomainError("derivative identity needs a nonconstant field")
    t, h = generic_thresholds(u, t_grid, step)
    geo = LevelGeometry(u)
    w = geo.grad_norm[:, None]
    _, P, g = geo.sweep(t, w)
    _, _, gp = geo.sweep(t + h, w)
    _, _, gm = geo.sweep(t - h, w)
    neg_dg = (gm[:, 0] - gp[:, 0]) / (2 * h)
    res = np.abs(neg_dg - P) / np.maximum(P, np.finfo(float).tiny)
    return DerivativeCheck(float(res.max()), t, h, P, g[:, 0], neg_dg, res)


def _clipped_fraction(ui, uj, t):
    """Fraction of the segment from value ui to uj where the linear interpolant exceeds t."""
    lo, hi = np.minimum(ui, uj), np.maximum(ui, uj)
    span = hi - lo
    frac = np.divide(hi - t, span, out=np.zeros_like(span), where=span > 0)
    frac = np.clip(frac, 0.0, 1.0)
    return np.where(span > 0, frac, (lo > t).astype(float))


def superlevel_boundary_length(u: ScalarField, t: float) -> float:
    """Boundary length of the face-clipped region {u > t}, from polygon perimeters.

    Each face contributes the perimeter of its clipped polygon (edge pieces above
    t plus the cut segment between explicit crossing points). Edge pieces are
    then removed once per incident face, which leaves only the interior cut.
    """
    m = u.mesh
    fv = u.values[m.faces]
    P = m.corners
    perim = np.zeros(m.n_faces)
    cross_pts = []
    for k in range(3):
        i, j = k, (k + 1) % 3
        ui, uj = fv[:, i], fv[:, j]
        elen = np.linalg.norm(P[:, j] - P[:, i], axis=1)
        perim += elen * _clipped_fraction(ui, uj, t)
        cross = (ui > t) != (uj > t)
        s = np.divide(t - ui, uj - ui, out=np.zeros_like(ui), where=cross)
        cross_pts.append((cross, P[:, i] + s[:, None] * (P[:, j] - P[:, i])))
    first = np.full((m.n_faces, 3), np.nan)
    second = np.full((m.n_faces, 3), np.nan)
    for cross, x in cross_pts:
        take_first = cross & np.isnan(first[:, 0])
        take_second = cross & ~take_first
        first[take_first] = x[take_first]
        second[take_second] = x[take_second]
    has_cut = ~np.isnan(second[:, 0])
    perim[has_cut] += np.linalg.norm(first[has_cut] - second[has_cut], axis=1)
    e = m.edges
    incident = (m.edge_faces >= 0).sum(axis=1)
    shared = m.edge_lengths * _clipped_fraction(u.values[e[:, 0]], u.values[e[:, 1]], t)
    return float(perim.sum() - np.sum(incident * shared))
