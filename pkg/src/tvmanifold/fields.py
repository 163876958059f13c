"""Scalar and vector fields on meshes, exact super-level measures and distribution curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ParameterError
from .mesh import Mesh


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Piecewise-linear field given by one value per vertex."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_vertices,):
            raise ParameterError(f"expected {self.mesh.n_vertices} vertex values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, c):
        other = c.values if isinstance(c, ScalarField) else c
        return ScalarField(self.mesh, self.values + other)

    def __sub__(self, c):
        other = c.values if isinstance(c, ScalarField) else c
        return ScalarField(self.mesh, self.values - other)

    def __mul__(self, a):
        return ScalarField(self.mesh, self.values * a)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.mesh, -self.values)

    def gradient(self) -> np.ndarray:
        return self.mesh.gradient(self.values)

    def gradient_norm(self) -> np.ndarray:
        return np.linalg.norm(self.gradient(), axis=1)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def is_constant(self) -> bool:
        return bool(np.ptp(self.values) == 0)


@dataclass(frozen=True, eq=False)
class FaceVectorField:
    """One tangent vector per face."""

    mesh: Mesh
    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.shape != (self.mesh.n_faces, 3):
            raise ParameterError(f"expected ({self.mesh.n_faces}, 3) face vectors, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("vector components must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def normal_component(self) -> np.ndarray:
        return np.einsum("fk,fk->f", self.vectors, self.mesh.normals)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    def divergence(self) -> np.ndarray:
        return self.mesh.divergence(self.vectors)


@dataclass(frozen=True, eq=False)
class Region:
    """Set of faces, stored as a boolean membership mask."""

    mesh: Mesh
    mask: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.shape != (self.mesh.n_faces,):
            raise ParameterError(f"expected {self.mesh.n_faces} face flags, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def area(self) -> float:
        return float(self.mesh.areas[self.mask].sum())

    def complement(self) -> "Region":
        return Region(self.mesh, ~self.mask, f"~{self.label}" if self.label else "")

    def is_empty(self) -> bool:
        return not self.mask.any()

    def is_full(self) -> bool:
        return bool(self.mask.all())

    def vertex_lift(self) -> ScalarField:
        """1 on vertices whose faces are all in the region, 0 with none, 1/2 otherwise."""
        m = self.mesh
        count = np.bincount(m.faces.ravel(), minlength=m.n_vertices)
        inside = np.bincount(m.faces.ravel(), weights=np.repeat(self.mask.astype(float), 3), minlength=m.n_vertices)
        v = np.where(inside == count, 1.0, np.where(inside == 0, 0.0, 0.5))
        return ScalarField(m, v)

    @classmethod
    def polar_cap(cls, mesh: Mesh, angle: float, axis=(0.0, 0.0, 1.0)) -> "Region":
        """Faces whose centroid direction lies within ``angle`` of ``axis``."""
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        c = mesh.centroids / np.linalg.norm(mesh.centroids, axis=1, keepdims=True)
        return cls(mesh, c @ ax > np.cos(angle), f"cap:{angle!r}")


@dataclass(frozen=True)
class DistributionCurve:
    """Sampled t -> mes(u > t)."""

    thresholds: np.ndarray
    values: np.ndarray
    total_area: float = field(default=np.nan)

    def to_csv(self, path) -> None:
        write_csv(path, ["t", "mu"], zip(self.thresholds, self.values))


# ---------------------------------------------------------------------- level-set geometry
class LevelGeometry:
    """Per-face data for exact level-set integrals of a piecewise-linear field.

    For a face with sorted vertex values a <= b <= c the level line at t = b runs
    from the middle vertex to the edge (a, c); its length ``lmid`` is measured
    geometrically, not through the gradient.
    """

    def __init__(self, u: ScalarField):
        m = u.mesh
        fv = u.values[m.faces]
        order = np.argsort(fv, axis=1, kind="stable")
        self.field = u
        self.sorted_vals = np.take_along_axis(fv, order, axis=1)
        pts = np.take_along_axis(m.corners, order[:, :, None], axis=1)
        a, b, c = self.sorted_vals.T
        span = c - a
        s = np.divide(b - a, span, out=np.zeros_like(span), where=span > 0)
        q = pts[:, 0] + s[:, None] * (pts[:, 2] - pts[:, 0])
        self.lmid = np.where(span > 0, np.linalg.norm(pts[:, 1] - q, axis=1), 0.0)
        self.areas = m.areas
        self.grad_norm = u.gradient_norm()

    def sweep(self, thresholds, weights=None):
        """(mu, P, W) at each threshold; see :func:`tvmanifold._pykernels.level_sweep`."""
        t = np.asarray(thresholds, dtype=float)
        if weights is None:
            weights = np.zeros((len(self.areas), 0))
        order = np.argsort(t, kind="stable")
        mu, P, W = kernels.level_sweep(self.sorted_vals, self.areas, self.lmid, weights, t[order])
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        return mu[inv], P[inv], W[inv]


# ---------------------------------------------------------------------- operations
def total_gradient_norm(u: ScalarField) -> float:
    """Discrete total variation: sum over faces of area * |grad u|."""
    return float(np.sum(u.mesh.areas * u.gradient_norm()))


def level_measure(u: ScalarField, t: float) -> float:
    """Exact area of {u > t} for the piecewise-linear interpolant."""
    mu, _, _ = LevelGeometry(u).sweep([t])
    return float(max(mu[0], 0.0))


def sublevel_measure(u: ScalarField, t: float) -> float:
    """Exact area of {u < t}."""
    return level_measure(-u, -t)


def level_length(u: ScalarField, t: float) -> float:
    """Length of the level line {u = t}."""
    _, P, _ = LevelGeometry(u).sweep([t])
    return float(P[0])


def distribution_curve(u: ScalarField, grid) -> DistributionCurve:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ParameterError("threshold grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("threshold grid must be strictly increasing")
    mu, _, _ = LevelGeometry(u).sweep(grid)
    mu = np.clip(mu, 0.0, u.mesh.total_area)
    mu = np.minimum.accumulate(mu)
    return DistributionCurve(grid, mu, u.mesh.total_area)


def l1_norm(u: ScalarField) -> float:
    """Exact integral of |u| for the piecewise-linear interpolant."""
    return positive_part_integral(u) + positive_part_integral(-u)


def positive_part_integral(u: ScalarField) -> float:
    """Exact integral of max(u, 0) for the piecewise-linear interpolant."""
    m = u.mesh
    fv = u.values[m.faces]
    a, b, c = np.sort(fv, axis=1).T
    A = m.areas
    out = np.zeros(len(A))
    # all nonnegative: mean value times area
    pos = a >= 0
    out[pos] = A[pos] * (a[pos] + b[pos] + c[pos]) / 3.0
    # one negative vertex: whole-face integral minus the negative corner tetra
    one = (a < 0) & (b >= 0)
    if np.any(one):
        aa, bb, cc, AA = a[one], b[one], c[one], A[one]
        neg = AA * aa**3 / ((aa - bb) * (aa - cc)) / 3.0
        out[one] = AA * (aa + bb + cc) / 3.0 - neg
    # two negative vertices: only the positive corner tetra
    two = (b < 0) & (c > 0)
    if np.any(two):
        aa, bb, cc, AA = a[two], b[two], c[two], A[two]
        out[two] = AA * cc**3 / ((cc - aa) * (cc - bb)) / 3.0
    return float(out.sum())


def random_smooth_field(mesh: Mesh, rng: np.random.Generator, modes: int = 6) -> ScalarField:
    """Sum of a few random low-frequency plane waves; integer wavenumbers on periodic meshes."""
    X = mesh.vertices
    vals = np.zeros(mesh.n_vertices)
    for _ in range(modes):
        if mesh.periodic:
            k = 2 * np.pi * rng.integers(-3, 4, size=3).astype(float)
            k[2] = 0.0
        else:
            k = rng.normal(0.0, 2.0, size=3)
        vals += rng.normal() * np.sin(X @ k + rng.uniform(0, 2 * np.pi))
    return ScalarField(mesh, vals)


def write_csv(path, header, rows) -> None:
    """CSV with a header row and 17 significant digits."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def read_csv(path):
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def field_to_csv(u: ScalarField, path) -> None:
    write_csv(path, ["vertex_id", "value"], enumerate(u.values))


def field_from_csv(mesh: Mesh, path) -> ScalarField:
    header, rows = read_csv(path)
    if header[:2] != ["vertex_id", "value"]:
        raise ParameterError(f"{path}: expected header vertex_id,value")
    vals = np.full(mesh.n_vertices, np.nan)
    for r in rows:
        vals[int(r[0])] = float(r[1])
    return ScalarField(mesh, vals)
