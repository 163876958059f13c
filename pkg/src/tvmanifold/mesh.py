"""Triangulated 2-manifolds, piecewise-linear differential operators and mesh generators."""

from __future__ import annotations

from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay

from .errors import ParameterError

MAX_ICOSPHERE_SUBDIV = 8


def _frozen(a, dtype=float):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Mesh:
    """Immutable oriented triangle mesh.

    Geometry is taken from per-face corner positions, ``vertices[faces] +
    corner_shift``; the optional shift lets a periodic mesh (flat torus) keep
    one vertex per lattice site while every face stays a flat Euclidean triangle.
    """

    def __init__(self, vertices, faces, corner_shift=None, name="mesh"):
        self.vertices = _frozen(vertices)
        self.faces = _frozen(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ParameterError("vertices must have shape (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ParameterError("faces must have shape (F, 3)")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ParameterError("face index out of range")
        corners = self.vertices[self.faces]
        if corner_shift is not None:
            corners = corners + np.asarray(corner_shift, dtype=float)
        self.corners = _frozen(corners)
        self.name = name
        self.periodic = corner_shift is not None and bool(np.any(np.asarray(corner_shift) != 0))

        e1 = self.corners[:, 1] - self.corners[:, 0]
        e2 = self.corners[:, 2] - self.corners[:, 0]
        n = np.cross(e1, e2)
        dbl = np.linalg.norm(n, axis=1)
        if np.any(dbl <= 0):
            raise ParameterError("degenerate face (zero area)")
        self.areas = _frozen(0.5 * dbl)
        self.normals = _frozen(n / dbl[:, None])

        # hat-function gradients: grad phi_i = n x (opposite edge, ccw) / 2A
        p0, p1, p2 = self.corners[:, 0], self.corners[:, 1], self.corners[:, 2]
        gc = np.stack(
            [np.cross(self.normals, p2 - p1), np.cross(self.normals, p0 - p2), np.cross(self.normals, p1 - p0)],
            axis=1,
        )
        self.grad_coef = _frozen(gc / dbl[:, None, None])
        self._build_edges()

    # ------------------------------------------------------------------ topology
    def _build_edges(self):
        F = len(self.faces)
        he_from = self.faces.reshape(-1)
        he_to = self.faces[:, [1, 2, 0]].reshape(-1)
        he_face = np.repeat(np.arange(F), 3)
        he_local = np.tile(np.arange(3), F)
        key = np.minimum(he_from, he_to) * len(self.vertices) + np.maximum(he_from, he_to)
        uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise ParameterError("non-manifold edge (more than two faces)")
        E = len(uniq)
        edge_faces = -np.ones((E, 2), dtype=np.int64)
        edge_dir = np.zeros((E, 2), dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        slot = np.where(first, 0, 1)
        edge_faces[inv[order], slot] = he_face[order]
        edge_dir[inv[order], slot] = np.sign(he_to[order] - he_from[order])
        self.edges = _frozen(np.stack([uniq // len(self.vertices), uniq % len(self.vertices)], axis=1), np.int64)
        self.edge_faces = _frozen(edge_faces, np.int64)
        # length from the first incident face's corners (periodic meshes)
        f0 = edge_faces[:, 0]
        loc = he_local[order][first]
        a = self.corners[f0, loc]
        b = self.corners[f0, (loc + 1) % 3]
        self.edge_lengths = _frozen(np.linalg.norm(b - a, axis=1))
        interior = edge_faces[:, 1] >= 0
        self._orientation_ok = bool(np.all(edge_dir[interior, 0] != edge_dir[interior, 1]))
        self.is_closed = bool(np.all(interior))
        bmask = np.zeros(len(self.vertices), dtype=bool)
        bmask[self.edges[~interior].ravel()] = True
        self.boundary_vertices = _frozen(bmask, bool)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def mean_edge_length(self) -> float:
        return float(self.edge_lengths.mean())

    def is_oriented(self) -> bool:
        """Every interior edge is traversed once in each direction."""
        return self._orientation_ok

    def audit(self) -> None:
        """Raise ParameterError unless the mesh is an oriented manifold with positive areas."""
        if not self._orientation_ok:
            raise ParameterError(f"{self.name}: inconsistent orientation")
        if np.any(self.areas <= 0):
            raise ParameterError(f"{self.name}: nonpositive face area")

    @cached_property
    def centroids(self) -> np.ndarray:
        return _frozen(self.corners.mean(axis=1))

    @cached_property
    def face_adjacency(self) -> sparse.csr_matrix:
        """Face-to-face adjacency through shared edges."""
        inner = self.edge_faces[self.edge_faces[:, 1] >= 0]
        F = self.n_faces
        i = np.concatenate([inner[:, 0], inner[:, 1]])
        j = np.concatenate([inner[:, 1], inner[:, 0]])
        return sparse.csr_matrix((np.ones(len(i)), (i, j)), shape=(F, F))

    # ------------------------------------------------------------------ operators
    @cached_property
    def operators(self) -> "LinearOperatorBundle":
        return LinearOperatorBundle(self)

    def gradient(self, u) -> np.ndarray:
        """Per-face gradient (F, 3) of the piecewise-linear interpolant of vertex values ``u``."""
        u = np.asarray(u, dtype=float)
        # differences against the first corner make constants map to exact zeros
        fu = u[self.faces]
        d = fu[:, 1:] - fu[:, :1]
        return np.einsum("fi,fik->fk", d, self.grad_coef[:, 1:])

    def divergence(self, phi) -> np.ndarray:
        return self.operators.divergence(phi)

    def scaled(self, s: float) -> "Mesh":
        shift = self.corners - self.vertices[self.faces]
        return Mesh(self.vertices * s, self.faces, corner_shift=shift * s, name=f"{self.name}*{s}")


class LinearOperatorBundle:
    """Gradient, divergence, lumped mass and cotangent stiffness of a mesh.

    Divergence is the negative adjoint of the gradient for the pairing
    ``<u, v>_M = sum mass*u*v`` on vertices and ``<X, Y>_A = sum area*X.Y`` on faces.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        F, V = mesh.n_faces, mesh.n_vertices
        rows = (3 * np.arange(F)[:, None, None] + np.arange(3)[None, None, :]).repeat(3, axis=1)
        cols = np.broadcast_to(mesh.faces[:, :, None], (F, 3, 3))
        self.grad = sparse.csr_matrix(
            (mesh.grad_coef.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(3 * F, V)
        )
        self.mass = _frozen(np.bincount(mesh.faces.ravel(), weights=np.repeat(mesh.areas, 3), minlength=V) / 3.0)
        A3 = sparse.diags(np.repeat(mesh.areas, 3))
        self.grad_t_area = (self.grad.T @ A3).tocsr()
        self.stiffness = (self.grad_t_area @ self.grad).tocsr()

    @property
    def mass_matrix(self) -> sparse.dia_matrix:
        return sparse.diags(self.mass)

    def gradient(self, u) -> np.ndarray:
        return (self.grad @ np.asarray(u, dtype=float)).reshape(-1, 3)

    def divergence(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float).reshape(-1)
        return -(self.grad_t_area @ phi) / self.mass

    def pairing_residual(self, u, phi) -> float:
        """Relative residual of sum_f A<grad u, phi> + sum_v m u div(phi)."""
        lhs = float(np.sum(self.mesh.areas[:, None] * self.gradient(u) * np.asarray(phi).reshape(-1, 3)))
        rhs = -float(np.sum(self.mass * np.asarray(u) * self.divergence(phi)))
        scale = float(
            np.sum(self.mesh.areas * np.linalg.norm(self.gradient(u), axis=1) * np.linalg.norm(np.asarray(phi).reshape(-1, 3), axis=1))
        )
        return abs(lhs - rhs) / max(scale, np.finfo(float).tiny)


# ---------------------------------------------------------------------- generators
_ICO_PHI = (1.0 + 5.0**0.5) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _ICO_PHI, 0], [1, _ICO_PHI, 0], [-1, -_ICO_PHI, 0], [1, -_ICO_PHI, 0],
        [0, -1, _ICO_PHI], [0, 1, _ICO_PHI], [0, -1, -_ICO_PHI], [0, 1, -_ICO_PHI],
        [_ICO_PHI, 0, -1], [_ICO_PHI, 0, 1], [-_ICO_PHI, 0, -1], [-_ICO_PHI, 0, 1],
    ],
    dtype=float,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def build_icosphere(subdiv: int) -> Mesh:
    """Unit icosphere with ``20 * 4**subdiv`` faces, re-projected after each split."""
    if not isinstance(subdiv, (int, np.integer)) or not 0 <= subdiv <= MAX_ICOSPHERE_SUBDIV:
        raise ParameterError(f"subdiv must be an integer in [0, {MAX_ICOSPHERE_SUBDIV}], got {subdiv!r}")
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES
    for _ in range(subdiv):
        V = len(verts)
        e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
        key = np.minimum(e[:, 0], e[:, 1]) * V + np.maximum(e[:, 0], e[:, 1])
        uniq, inv = np.unique(key, return_inverse=True)
        a, b = uniq // V, uniq % V
        mid = verts[a] + verts[b]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        verts = np.vstack([verts, mid])
        F = len(faces)
        m01, m12, m20 = (V + inv[:F], V + inv[F : 2 * F], V + inv[2 * F :])
        f0, f1, f2 = faces[:, 0], faces[:, 1], faces[:, 2]
        faces = np.concatenate(
            [
                np.stack([f0, m01, m20], axis=1),
                np.stack([f1, m12, m01], axis=1),
                np.stack([f2, m20, m12], axis=1),
                np.stack([m01, m12, m20], axis=1),
            ]
        )
    return Mesh(verts, faces, name=f"icosphere:{subdiv}")


def build_flat_torus(n: int) -> Mesh:
    """Periodic ``n x n`` triangulation of the unit square (flat torus), embedded in z = 0."""
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise ParameterError(f"torus resolution must be an integer >= 3, got {n!r}")
    h = 1.0 / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    verts = np.stack([i.ravel() * h, j.ravel() * h, np.zeros(n * n)], axis=1)

    def vid(a, b):
        return (a % n) * n + (b % n)

    i, j = i.ravel(), j.ravel()
    faces = np.concatenate(
        [
            np.stack([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)], axis=1),
            np.stack([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)], axis=1),
        ]
    )
    # unwrapped corner offsets (i, j) -> (i+di, j+dj)
    di = np.array([[0, 1, 1], [0, 1, 0]])
    dj = np.array([[0, 0, 1], [0, 1, 1]])
    ci = np.concatenate([i[:, None] + di[0], i[:, None] + di[1]])
    cj = np.concatenate([j[:, None] + dj[0], j[:, None] + dj[1]])
    shift = np.zeros(faces.shape + (3,))
    shift[..., 0] = (ci - ci % n) * h
    shift[..., 1] = (cj - cj % n) * h
    return Mesh(verts, faces, corner_shift=shift, name=f"torus:{n}")


def disk_ring_radii(radius: float, target_edge: float, growth: float = 0.0, core: float = 1.0) -> np.ndarray:
    """Ring radii for :func:`build_disk`.

    Spacing is ``target_edge * max(1, (1 + growth * (r - core)))`` for ``r > core``,
    so radii inside ``core`` (and more generally inside any common prefix) do not
    depend on ``radius``. The outermost interior ring is dropped when it would sit
    closer than half a spacing to the boundary.
    """
    radii = [0.0]
    r = 0.0
    while True:
        step = target_edge * max(1.0, 1.0 + growth * (r - core))
        nxt = r + step
        if nxt >= radius - 0.5 * step:
            break
        radii.append(nxt)
        r = nxt
    radii.append(radius)
    return np.asarray(radii)


def build_disk(radius: float, target_edge: float, growth: float = 0.0, core: float = 1.0, center=(0.0, 0.0)) -> Mesh:
    """Planar disk built from concentric vertex rings and Delaunay triangulation.

    With ``growth = 0`` the mesh is quasi-uniform with edges <= 2*target_edge.
    ``growth > 0`` coarsens linearly beyond ``core`` (used for large radii).
    Boundary vertices lie exactly on the circle of the given radius.
    """
    if not (np.isfinite(radius) and np.isfinite(target_edge)) or radius <= 0 or target_edge <= 0:
        raise ParameterError("radius and target_edge must be positive")
    if target_edge >= radius:
        raise ParameterError("target_edge must be smaller than radius")
    if growth < 0:
        raise ParameterError("growth must be nonnegative")
    radii = disk_ring_radii(radius, target_edge, growth, core)
    pts = [np.zeros((1, 2))]
    for k in range(1, len(radii)):
        spacing = radii[k] - radii[k - 1]
        m = max(6, int(np.ceil(2 * np.pi * radii[k] / spacing)))
        th = (np.arange(m) + 0.5 * (k % 2)) * 2 * np.pi / m
        pts.append(radii[k] * np.stack([np.cos(th), np.sin(th)], axis=1))
    P = np.vstack(pts) + np.asarray(center, dtype=float)
    tri = Delaunay(P).simplices.astype(np.int64)
    a, b, c = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri = tri[np.abs(cross) > 1e-14 * radius**2]
    flip = cross[np.abs(cross) > 1e-14 * radius**2] < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    verts = np.column_stack([P, np.zeros(len(P))])
    mesh = Mesh(verts, tri, name=f"disk:{radius},{target_edge}")
    mesh.ring_radii = radii
    mesh.center = np.asarray(center, dtype=float)
    return mesh


# ---------------------------------------------------------------------- stereographic maps
def stereographic_to_sphere(x) -> np.ndarray:
    """Inverse stereographic projection from the north pole; (0,0) maps to (0,0,-1).

    Accepts one point of shape (2,) or an array (n, 2).
    """
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    d = 1.0 + r2
    return np.concatenate([2 * x / d[..., None], ((r2 - 1) / d)[..., None]], axis=-1)


def sphere_to_stereographic(X) -> np.ndarray:
    """Planar preimage of points on the unit sphere; the north pole maps to inf."""
    X = np.asarray(X, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return X[..., :2] / (1.0 - X[..., 2])[..., None]


def conformal_factor(x) -> np.ndarray:
    """Area density of the inverse stereographic map, (2 / (1 + |x|^2))^2."""
    x = np.asarray(x, dtype=float)
    return (2.0 / (1.0 + np.sum(x * x, axis=-1))) ** 2


# ---------------------------------------------------------------------- OFF I/O
def write_off(mesh: Mesh, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path) -> Mesh:
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ParameterError(f"{path}: missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ParameterError(f"{path}: only triangles are supported")
            faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
            pos += 4
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"{path}: malformed OFF file") from exc
    return Mesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3), name=Path(path).stem)
