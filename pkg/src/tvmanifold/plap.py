"""p-Laplacian with point sources on planar disks (N = 2).

The zero-boundary problem on a disk is solved as the minimizer of the convex
energy ``J(u) = (1/p) sum_f area |grad u|^p - sum_v mass * load * u`` over
fields vanishing on the boundary ring.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.sparse.linalg import spsolve

from .errors import DomainError, NumericError, ParameterError
from .fields import ScalarField, write_csv
from .mesh import Mesh, build_disk, sphere_to_stereographic

N_DIM = 2


# ---------------------------------------------------------------------- problem description
@dataclass(frozen=True)
class Pole:
    x: float
    y: float
    gamma: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class PlapProblem:
    p: float
    poles: tuple
    radius: float
    sigma: float
    tol: float = 1e-9
    max_iters: int = 200

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if not (self.radius > 0 and self.sigma > 0):
            raise ParameterError("radius and sigma must be positive")
        poles = tuple(q if isinstance(q, Pole) else Pole(**q) for q in self.poles)
        object.__setattr__(self, "poles", poles)
        for i, a in enumerate(poles):
            if np.hypot(a.x, a.y) > self.radius - 2 * self.sigma:
                raise ParameterError(f"pole {i} lies within 2*sigma of the boundary")
            for b in poles[i + 1 :]:
                if np.hypot(a.x - b.x, a.y - b.y) <= 2 * self.sigma:
                    raise ParameterError("poles must be more than 2*sigma apart")

    @property
    def total_charge(self) -> float:
        return float(sum(q.gamma for q in self.poles))

    @property
    def source_l1(self) -> float:
        return float(sum(abs(q.gamma) for q in self.poles))

    def balanced(self, atol: float = 1e-12) -> bool:
        return abs(self.total_charge) <= atol

    def with_radius(self, radius: float) -> "PlapProblem":
        return PlapProblem(self.p, self.poles, radius, self.sigma, self.tol, self.max_iters)

    def to_json(self) -> str:
        d = asdict(self)
        d["poles"] = [asdict(q) for q in self.poles]
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PlapProblem":
        required = {"p", "poles", "radius", "sigma"}
        missing = required - set(d)
        if missing:
            raise ParameterError(f"problem is missing keys {sorted(missing)}")
        unknown = set(d) - required - {"tol", "max_iters"}
        if unknown:
            raise ParameterError(f"unknown problem keys {sorted(unknown)}")
        try:
            poles = tuple(Pole(float(q["x"]), float(q["y"]), float(q["gamma"])) for q in d["poles"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError("each pole needs numeric x, y, gamma") from exc
        return cls(
            float(d["p"]), poles, float(d["radius"]), float(d["sigma"]),
            float(d.get("tol", 1e-9)), int(d.get("max_iters", 200)),
        )

    @classmethod
    def from_json(cls, text: str) -> "PlapProblem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"malformed problem JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ParameterError("problem JSON must be an object")
        return cls.from_dict(d)


@dataclass
class SolveOutcome:
    solution: ScalarField
    energy: float
    residual: float
    iterations: int
    converged: bool
    energies: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        m = self.solution.mesh
        write_csv(
            path,
            ["vertex_id", "x", "y", "value"],
            ((i, m.vertices[i, 0], m.vertices[i, 1], self.solution.values[i]) for i in range(m.n_vertices)),
        )


# ---------------------------------------------------------------------- fundamental solutions
def fundamental_constant(p: float) -> float:
    """C_p with A(C_p r^((p-2)/(p-1))) = delta in the plane; 1/(2 pi) for the logarithm at p = 2."""
    if not p > 1:
        raise ParameterError("p must exceed 1")
    if p == N_DIM:
        return 1.0 / (2 * np.pi)
    return (p - 1) / (2 - p) * (2 * np.pi) ** (-1.0 / (p - 1))


def fundamental_solution(p: float, r) -> np.ndarray | float:
    """Radial solution of -div(|grad phi|^(p-2) grad phi) = delta in the plane."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("fundamental solution needs r > 0")
    C = fundamental_constant(p)
    if p == N_DIM:
        out = C * np.log(1.0 / r)
    else:
        out = C * r ** ((p - N_DIM) / (p - 1))
    return float(out) if out.ndim == 0 else out


def flux_oracle(p: float, r: float, n_quad: int = 64) -> float:
    """Outward flux of -|grad phi|^(p-2) grad phi through the circle of radius r.

    The gradient is taken by central differences of :func:`fundamental_solution`
    in Cartesian coordinates at quadrature points on the circle, so the check is
    independent of the closed-form constant.
    """
    th = 2 * np.pi * (np.arange(n_quad) + 0.5) / n_quad
    x = r * np.stack([np.cos(th), np.sin(th)], axis=1)
    d = 1e-5 * r
    gx = (fundamental_solution(p, np.hypot(x[:, 0] + d, x[:, 1])) - fundamental_solution(p, np.hypot(x[:, 0] - d, x[:, 1]))) / (2 * d)
    gy = (fundamental_solution(p, np.hypot(x[:, 0], x[:, 1] + d)) - fundamental_solution(p, np.hypot(x[:, 0], x[:, 1] - d))) / (2 * d)
    g = np.stack([gx, gy], axis=1)
    gn = np.linalg.norm(g, axis=1)
    q = -(gn ** (p - 2))[:, None] * g
    normal = x / r
    return float(np.sum(np.einsum("ik,ik->i", q, normal)) * 2 * np.pi * r / n_quad)


def superposed_fundamental(problem: PlapProblem, xy) -> np.ndarray:
    """sum_i gamma_i phi(x - a_i) at planar points."""
    xy = np.asarray(xy, dtype=float)
    out = np.zeros(len(xy))
    for q in problem.poles:
        out += q.gamma * fundamental_solution(problem.p, np.linalg.norm(xy - q.position, axis=1))
    return out


# ---------------------------------------------------------------------- sources
def _bump(r, sigma):
    s = np.clip(r / sigma, 0.0, 1.0)
    return np.where(r < sigma, (1 - s * s) ** 2, 0.0)


def local_edge_length(mesh: Mesh, center, radius) -> float:
    """Longest edge with an endpoint within ``radius`` of ``center``."""
    xy = mesh.vertices[:, :2]
    near = np.linalg.norm(xy - np.asarray(center), axis=1) <= radius
    sel = near[mesh.edges[:, 0]] | near[mesh.edges[:, 1]]
    if not sel.any():
        return np.inf
    return float(mesh.edge_lengths[sel].max())


def mollified_source(problem: PlapProblem, mesh: Mesh) -> np.ndarray:
    """Per-vertex load: sum of radial bumps (1 - (r/sigma)^2)^2 each renormalized to mass gamma_i."""
    mass = mesh.operators.mass
    xy = mesh.vertices[:, :2]
    load = np.zeros(mesh.n_vertices)
    for i, q in enumerate(problem.poles):
        h = local_edge_length(mesh, q.position, problem.sigma)
        if not h <= problem.sigma / 2:
            raise ParameterError(f"mesh does not resolve the bump of pole {i} (edge {h:.3g} > sigma/2)")
        b = _bump(np.linalg.norm(xy - q.position, axis=1), problem.sigma)
        b[mesh.boundary_vertices] = 0.0
        load += q.gamma * b / np.sum(mass * b)
    return load


# ---------------------------------------------------------------------- solver
def _face_flux_data(gf, p, delta):
    """Per-face weights for the energy gradient and (regularized) Hessian."""
    s2 = np.sum(gf * gf, axis=1)
    reg = s2 + delta * delta
    w = reg ** ((p - 2) / 2)
    w2 = (p - 2) * reg ** ((p - 4) / 2)
    return w, w2


def p_energy(mesh: Mesh, p: float, load, u) -> float:
    g = np.linalg.norm(mesh.gradient(u), axis=1)
    return float(np.sum(mesh.areas * g**p) / p - np.sum(mesh.operators.mass * load * u))


def solve_dirichlet(mesh: Mesh, p: float, load, tol: float = 1e-9, max_iters: int = 200) -> SolveOutcome:
    """Minimize the p-energy with zero boundary values.

    p = 2 is a single sparse solve. Otherwise damped Newton steps with Armijo
    backtracking on the true energy; the Hessian uses |grad u|^2 + delta^2 with
    delta = 1e-8 * mean |grad u| so that it stays definite where grad u = 0.
    Convergence: max |dJ/du| over interior vertices <= tol * max |mass * load|.
    """
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    if mesh.is_closed:
        raise ParameterError("Dirichlet solve needs a mesh with boundary")
    load = np.asarray(load, dtype=float)
    ops = mesh.operators
    interior = ~mesh.boundary_vertices
    rhs = ops.mass * load
    scale = float(np.max(np.abs(rhs[interior]))) if interior.any() else 0.0
    u = np.zeros(mesh.n_vertices)
    if scale == 0.0:
        return SolveOutcome(ScalarField(mesh, u), 0.0, 0.0, 0, True, [0.0])
    K_II = ops.stiffness[interior][:, interior].tocsc()
    u[interior] = spsolve(K_II, rhs[interior])
    if not np.all(np.isfinite(u)):
        raise NumericError("linear solve failed", step=0)
    G = ops.grad
    A = mesh.areas

    def grad_J(v):
        gf = (G @ v).reshape(-1, 3)
        s2 = np.sum(gf * gf, axis=1)
        w = np.zeros_like(s2)
        np.power(s2, (p - 2) / 2, out=w, where=s2 > 0)
        q = (A * w)[:, None] * gf
        return G.T @ q.reshape(-1) - rhs

    if p == 2:
        r = grad_J(u)
        res = float(np.max(np.abs(r[interior]))) / scale
        E = p_energy(mesh, p, load, u)
        return SolveOutcome(ScalarField(mesh, u), E, res, 1, res <= max(tol, 1e-12), [E])

    # initial guess: best multiple of the p = 2 solution, c = (L / S)^(1/(p-1))
    gn = np.linalg.norm(mesh.gradient(u), axis=1)
    S = float(np.sum(A * gn**p))
    L = float(np.sum(rhs * u))
    if S > 0 and L > 0:
        u = u * (L / S) ** (1.0 / (p - 1))
    E = p_energy(mesh, p, load, u)
    energies = [E]
    converged = False
    res = np.inf
    it = 0
    F = mesh.n_faces
    rows = (3 * np.arange(F)[:, None, None] + np.arange(3)[None, :, None]).repeat(3, axis=2)
    cols = (3 * np.arange(F)[:, None, None] + np.arange(3)[None, None, :]).repeat(3, axis=1)
    for it in range(1, max_iters + 1):
        r = grad_J(u)
        res = float(np.max(np.abs(r[interior]))) / scale
        if res <= tol:
            converged = True
            it -= 1
            break
        gf = mesh.gradient(u)
        delta = 1e-8 * float(np.mean(np.linalg.norm(gf, axis=1)))
        w, w2 = _face_flux_data(gf, p, delta)
        blocks = A[:, None, None] * (w[:, None, None] * np.eye(3)[None] + w2[:, None, None] * gf[:, :, None] * gf[:, None, :])
        D = sparse.csr_matrix((blocks.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(3 * F, 3 * F))
        H = (G.T @ D @ G).tocsr()[interior][:, interior].tocsc()
        d = np.zeros_like(u)
        d[interior] = -spsolve(H, r[interior])
        if not np.all(np.isfinite(d)):
            raise NumericError("Newton system solve failed", step=it)
        slope = float(r[interior] @ d[interior])
        if slope >= 0:
            d = np.zeros_like(u)
            d[interior] = -r[interior]
            slope = float(r[interior] @ d[interior])
        step = 1.0
        while True:
            cand = u + step * d
            Ec = p_energy(mesh, p, load, cand)
            if Ec <= E + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                break
        if not Ec < E:
            # no further decrease representable: stationary to rounding
            res = float(np.max(np.abs(grad_J(u)[interior]))) / scale
            converged = res <= tol
            break
        u, E = cand, Ec
        energies.append(E)
    return SolveOutcome(ScalarField(mesh, u), E, res, it, converged, energies)


def solve_problem(problem: PlapProblem, mesh: Mesh) -> SolveOutcome:
    return solve_dirichlet(mesh, problem.p, mollified_source(problem, mesh), problem.tol, problem.max_iters)


def problem_mesh(problem: PlapProblem, target_edge: float | None = None, growth: float = 0.0, core: float = 1.0) -> Mesh:
    """Disk mesh resolving the source bumps (target edge sigma / 3, realized edges stay below sigma / 2)."""
    h = target_edge if target_edge is not None else problem.sigma / 3.0
    return build_disk(problem.radius, h, growth=growth, core=core)


# ---------------------------------------------------------------------- diagnostics
def annulus_mask(mesh: Mesh, r_in: float, r_out: float) -> np.ndarray:
    r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
    return (r >= r_in) & (r <= r_out)


def lq_norm(mesh: Mesh, values, q: float, mask=None) -> float:
    mass = mesh.operators.mass
    sel = np.ones(mesh.n_vertices, dtype=bool) if mask is None else mask
    return float(np.sum(mass[sel] * np.abs(values[sel]) ** q) ** (1.0 / q))


@dataclass
class BoundednessReport:
    radii: list
    sup_w: list
    increments: list
    ratios: list
    bounded: bool
    lq_norms: dict

    def to_dict(self) -> dict:
        return asdict(self)


def boundedness_diagnostic(outcomes, problem: PlapProblem, annulus=(1.0, 2.0), ratio_limit: float = 0.75) -> BoundednessReport:
    """sup over the annulus of |u_R - sum gamma_i phi(x - a_i)| along growing radii R.

    The trend is bounded when each increment is below ``ratio_limit`` times the previous one.
    """
    if len(outcomes) < 3:
        raise ParameterError("need at least three radii")
    radii = []
    sups = []
    lq = {}
    qs = [problem.p - 1 + 0.5, 2 * problem.p]
    for out in outcomes:
        mesh = out.solution.mesh
        R = float(np.max(np.linalg.norm(mesh.vertices[:, :2], axis=1)))
        radii.append(R)
        sel = annulus_mask(mesh, *annulus)
        if not sel.any():
            raise ParameterError("annulus contains no vertices")
        w = out.solution.values[sel] - superposed_fundamental(problem, mesh.vertices[sel, :2])
        sups.append(float(np.max(np.abs(w))))
        lq[f"{R:.6g}"] = {f"{q:.6g}": lq_norm(mesh, out.solution.values, q, sel) for q in qs}
    if np.any(np.diff(radii) <= 0):
        raise ParameterError("radii must be increasing")
    inc = np.abs(np.diff(sups))
    ratios = [float(inc[i + 1] / inc[i]) if inc[i] > 0 else 0.0 for i in range(len(inc) - 1)]
    bounded = all(r < ratio_limit for r in ratios) or float(inc.max()) <= 1e-12
    return BoundednessReport(radii, sups, inc.tolist(), ratios, bool(bounded), lq)


def contour_flux(solution: ScalarField, p: float, inside_faces) -> float:
    """Outward flux of -|grad u|^(p-2) grad u across the edge contour bounding ``inside_faces``.

    Each contour edge uses the mean flux vector of its two faces.
    """
    m = solution.mesh
    gf = solution.gradient()
    gn = np.linalg.norm(gf, axis=1)
    q = -(gn ** (p - 2))[:, None] * gf
    ef = m.edge_faces
    inner = ef[:, 1] >= 0
    f0, f1 = ef[:, 0], np.where(inner, ef[:, 1], 0)
    cut = inner & (inside_faces[f0] != inside_faces[f1])
    fin = np.where(inside_faces[f0], f0, f1)[cut]
    fout = np.where(inside_faces[f0], f1, f0)[cut]
    a = m.vertices[m.edges[cut, 0], :2]
    b = m.vertices[m.edges[cut, 1], :2]
    t = b - a
    nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
    # orient the (unnormalized) normal away from the inside face
    to_in = m.centroids[fin, :2] - 0.5 * (a + b)
    nrm *= np.where(np.einsum("ik,ik->i", nrm, to_in) > 0, -1.0, 1.0)[:, None]
    qe = 0.5 * (q[fin, :2] + q[fout, :2])
    return float(np.sum(np.einsum("ik,ik->i", qe, nrm)))


# ---------------------------------------------------------------------- conformal transfer
def locate_points(mesh: Mesh, pts, k: int = 16):
    """Containing face and barycentric weights for each point; face -1 when not found.

    Planar meshes (z = 0) use 2-D barycentric coordinates; others project each
    point radially onto the candidate face plane.
    """
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    planar = bool(np.all(mesh.vertices[:, 2] == 0))
    if planar and pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(n)])
    face = -np.ones(n, dtype=np.int64)
    bary = np.zeros((n, 3))
    ok = np.all(np.isfinite(pts), axis=1)
    if not ok.any():
        return face, bary
    tree = cKDTree(mesh.centroids)
    kk = min(k, mesh.n_faces)
    _, cand = tree.query(pts[ok], k=kk)
    cand = cand.reshape(ok.sum(), kk)
    idx_ok = np.nonzero(ok)[0]
    best_score = np.full(len(idx_ok), -np.inf)
    for j in range(kk):
        f = cand[:, j]
        C = mesh.corners[f]
        x = pts[idx_ok]
        if not planar:
            nrm = mesh.normals[f]
            s = np.einsum("ik,ik->i", nrm, C[:, 0]) / np.einsum("ik,ik->i", nrm, x)
            x = x * s[:, None]
        v0, v1 = C[:, 1] - C[:, 0], C[:, 2] - C[:, 0]
        v2 = x - C[:, 0]
        d00 = np.einsum("ik,ik->i", v0, v0)
        d01 = np.einsum("ik,ik->i", v0, v1)
        d11 = np.einsum("ik,ik->i", v1, v1)
        d20 = np.einsum("ik,ik->i", v2, v0)
        d21 = np.einsum("ik,ik->i", v2, v1)
        den = d00 * d11 - d01 * d01
        l1 = (d11 * d20 - d01 * d21) / den
        l2 = (d00 * d21 - d01 * d20) / den
        lam = np.stack([1 - l1 - l2, l1, l2], axis=1)
        score = lam.min(axis=1)
        better = score > best_score
        best_score = np.where(better, score, best_score)
        face[idx_ok[better]] = f[better]
        bary[idx_ok[better]] = lam[better]
    miss = best_score < -1e-9
    face[idx_ok[miss]] = -1
    return face, bary


def evaluate(field: ScalarField, pts, k: int = 16):
    """Linear interpolant at points; returns (values, found mask)."""
    face, bary = locate_points(field.mesh, pts, k)
    found = face >= 0
    vals = np.full(len(face), np.nan)
    fv = field.values[field.mesh.faces[face[found]]]
    vals[found] = np.einsum("ik,ik->i", fv, bary[found])
    return vals, found


@dataclass
class TransferResult:
    field: ScalarField
    sampled: np.ndarray


def conformal_transfer(planar: ScalarField, sphere: Mesh, fill: float = 0.0) -> TransferResult:
    """Pull a planar field back to the sphere through the stereographic map.

    Sphere vertices whose preimage falls outside the disk mesh are unsampled and
    receive ``fill``.
    """
    X = sphere.vertices / np.linalg.norm(sphere.vertices, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pre = sphere_to_stereographic(X)
    vals, found = evaluate(planar, pre)
    vals = np.where(found, vals, fill)
    return TransferResult(ScalarField(sphere, vals), found)


def dirichlet_energy(u: ScalarField, face_mask=None) -> float:
    g2 = np.sum(u.gradient() ** 2, axis=1)
    sel = slice(None) if face_mask is None else face_mask
    return float(np.sum(u.mesh.areas[sel] * g2[sel]))


def save_problem(problem: PlapProblem, path) -> None:
    Path(path).write_text(problem.to_json() + "\n")
