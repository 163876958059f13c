"""Perimeter of face regions: edge cut, dual total variation and the heat-flow limit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .errors import NumericError, ParameterError
from .fields import FaceVectorField, Region, ScalarField, total_gradient_norm, write_csv
from .mesh import Mesh


@dataclass
class DualTVResult:
    value: float
    certificate: FaceVectorField
    iterations: int
    violation: float
    converged: bool

    def to_csv(self, path) -> None:
        v = self.certificate.vectors
        write_csv(path, ["face_id", "vx", "vy", "vz"], ((i, *v[i]) for i in range(len(v))))


@dataclass
class HeatFlowTrace:
    tau: float
    times: np.ndarray
    values: np.ndarray
    fields: list = field(default_factory=list)
    masses: np.ndarray | None = None

    def damped(self, theta: float = 0.0) -> np.ndarray:
        return np.exp(-theta * self.times) * self.values

    def to_csv(self, path, theta: float = 0.0) -> None:
        write_csv(path, ["t", "f", "damped_f"], zip(self.times, self.values, self.damped(theta)))


@dataclass
class HeatPerimeter:
    value: float
    times: np.ndarray
    samples: np.ndarray


def perimeter_cut(region: Region) -> float:
    """Total length of interior edges separating the region from its complement."""
    m = region.mesh
    ef = m.edge_faces
    inner = ef[:, 1] >= 0
    sep = inner & (region.mask[ef[:, 0]] != region.mask[np.where(inner, ef[:, 1], 0)])
    return float(m.edge_lengths[sep].sum())


def spectral_bound(mesh: Mesh, iterations: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of -div∘grad (upper-biased by 1%)."""
    ops = mesh.operators
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(mesh.n_vertices)
    lam = 0.0
    for _ in range(iterations):
        y = ops.stiffness @ x / ops.mass
        nrm = np.sqrt(np.sum(ops.mass * y * y))
        if nrm == 0:
            return 0.0
        lam = nrm / np.sqrt(np.sum(ops.mass * x * x))
        x = y / nrm
    return 1.01 * lam


def tv_dual(u: ScalarField, max_iters: int = 200, tol: float = 1e-10) -> DualTVResult:
    """Projected ascent on sum_v mass*u*div(phi) over face fields with |phi| <= 1.

    The first step is 1/L with L the power-iteration bound of div∘grad; since the
    objective is linear, projected ascent never decreases it and the step is
    doubled after every improving iteration. Every iterate is feasible, so the
    returned value is a lower bound on the total variation.
    """
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    mesh = u.mesh
    ops = mesh.operators
    grad = u.gradient()
    L = spectral_bound(mesh)
    step = 1.0 / L if L > 0 else 1.0
    phi = np.zeros_like(grad)

    def objective(p):
        return float(np.sum(ops.mass * u.values * ops.divergence(p)))

    best = objective(phi)
    best_phi = phi
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        trial = phi - step * grad
        nrm = np.linalg.norm(trial, axis=1)
        trial = trial / np.maximum(nrm, 1.0)[:, None]
        val = objective(trial)
        dphi = float(np.max(np.abs(trial - phi))) if len(phi) else 0.0
        gain = val - best
        phi = trial
        if val >= best:
            best, best_phi = val, trial
        step *= 2.0
        if gain <= tol * max(abs(best), 1.0) and dphi <= tol:
            converged = True
            break
    violation = float(max(0.0, np.max(np.linalg.norm(best_phi, axis=1)) - 1.0)) if len(best_phi) else 0.0
    return DualTVResult(best, FaceVectorField(mesh, best_phi), it, violation, converged)


class HeatSolver:
    """Implicit Euler step (M + tau K) u_new = M u for a fixed step tau."""

    def __init__(self, mesh: Mesh, tau: float):
        if not tau > 0:
            raise ParameterError("tau must be positive")
        ops = mesh.operators
        self.mesh = mesh
        self.tau = float(tau)
        self.mass = ops.mass
        try:
            self._lu = splu((ops.mass_matrix + tau * ops.stiffness).tocsc())
        except RuntimeError as exc:
            raise NumericError(f"factorization failed: {exc}", step=0) from exc

    def step(self, u: np.ndarray, k: int = 1) -> np.ndarray:
        out = self._lu.solve(self.mass * u)
        if not np.all(np.isfinite(out)):
            raise NumericError("heat step produced non-finite values", step=k)
        return out


def heat_flow(u0: ScalarField, tau: float, steps: int, keep_fields: bool = False) -> HeatFlowTrace:
    """Evolve ``u0`` by ``steps`` implicit heat steps; trace f(t_k) = total variation of u(t_k), t_k = k*tau."""
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    solver = HeatSolver(u0.mesh, tau)
    # constants are fixed points; evolving the offset from one vertex value keeps them exact
    ref = float(u0.values[0])
    v = u0.values - ref
    vals = [total_gradient_norm(u0)]
    masses = [float(np.sum(solver.mass * u0.values))]
    kept = [u0] if keep_fields else []
    for k in range(1, steps + 1):
        v = solver.step(v, k)
        u = v + ref
        su = ScalarField(u0.mesh, u)
        vals.append(total_gradient_norm(su))
        masses.append(float(np.sum(solver.mass * u)))
        if keep_fields:
            kept.append(su)
    times = tau * np.arange(steps + 1)
    return HeatFlowTrace(float(tau), times, np.asarray(vals), kept, np.asarray(masses))


def default_schedule(mesh: Mesh) -> list[float]:
    h = mesh.mean_edge_length
    return [4 * h * h, 2 * h * h, h * h]


def perimeter_heat(region: Region, schedule=None) -> HeatPerimeter:
    """Perimeter as the small-time limit of the total variation of the heat-smoothed indicator.

    Each schedule time t is reached by one implicit step of size t from the
    vertex lift of the region; the limit t -> 0 uses two-point Richardson
    extrapolation in sqrt(t) on the last two samples.
    """
    mesh = region.mesh
    if schedule is None:
        schedule = default_schedule(mesh)
    times = np.asarray(schedule, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ParameterError("schedule must be nonempty")
    if np.any(times <= 0) or np.any(np.diff(times) >= 0):
        raise ParameterError("schedule must be strictly decreasing positive times")
    if region.is_empty() or region.is_full():
        return HeatPerimeter(0.0, times, np.zeros(len(times)))
    u0 = region.vertex_lift()
    samples = np.array([heat_flow(u0, t, 1).values[-1] for t in times])
    if len(times) == 1:
        return HeatPerimeter(float(samples[0]), times, samples)
    ra, rb = np.sqrt(times[-2]), np.sqrt(times[-1])
    fa, fb = samples[-2], samples[-1]
    value = (ra * fb - rb * fa) / (ra - rb)
    return HeatPerimeter(float(value), times, samples)


def monotonicity_check(trace: HeatFlowTrace, theta: float = 0.0) -> tuple[bool, float]:
    """Whether exp(-theta t) f(t) is nonincreasing up to slack 1e-8 f(0); returns (ok, worst increase)."""
    if len(trace.values) == 0:
        raise ParameterError("empty trace")
    if theta < 0:
        raise ParameterError("theta must be nonnegative")
    d = trace.damped(theta)
    if len(d) < 2:
        return True, 0.0
    inc = np.diff(d)
    worst = float(max(0.0, inc.max()))
    return worst <= 1e-8 * abs(trace.values[0]), worst


def empirical_theta(trace: HeatFlowTrace) -> float:
    """Smallest theta >= 0 making exp(-theta t) f(t) nonincreasing on the samples."""
    t, f = trace.times, trace.values
    theta = 0.0
    for k in range(len(t) - 1):
        if f[k + 1] > f[k] > 0:
            theta = max(theta, np.log(f[k + 1] / f[k]) / (t[k + 1] - t[k]))
    return float(theta)
