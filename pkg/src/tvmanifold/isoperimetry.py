"""Isoperimetric ratios of face regions, sphere cap scans and the Sobolev-type quotient (dimension 2)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ParameterError
from .fields import LevelGeometry, Region, ScalarField, total_gradient_norm, write_csv
from .mesh import Mesh
from .perimeter import perimeter_cut

SPHERE_CONSTANT = float(np.sqrt(2 * np.pi))


@dataclass
class IsoReport:
    descriptor: str
    area: float
    perimeter: float
    ratio: float
    running_min: float


def iso_ratio(region: Region) -> float:
    """P(E) / min(|E|, |M| - |E|)^(1/2)."""
    area = region.area
    total = region.mesh.total_area
    small = min(area, total - area)
    if region.is_empty() or region.is_full() or small <= 0:
        raise DomainError("isoperimetric ratio needs 0 < |E| < |M|")
    return perimeter_cut(region) / np.sqrt(small)


def _cap_level(mesh: Mesh, angle: float, axis) -> tuple[float, float]:
    """Exact area and boundary length of {x . axis > cos(angle)} for the linear height field."""
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    z = ScalarField(mesh, mesh.vertices @ ax)
    mu, P, _ = LevelGeometry(z).sweep([np.cos(angle)])
    return float(mu[0]), float(P[0])


def cap_scan(mesh: Mesh, angles, method: str = "cut", axis=(0.0, 0.0, 1.0)):
    """Isoperimetric ratios of polar caps; returns (reports, estimated constant).

    ``method="cut"`` uses face regions (centroid inside the cap) and edge cut
    perimeters. ``method="level"`` uses the exact super-level set of the linear
    height field, whose boundary cuts through faces.
    """
    angles = np.asarray(angles, dtype=float)
    if np.any(angles <= 0) or np.any(angles >= np.pi):
        raise ParameterError("cap angles must lie in (0, pi)")
    if method not in ("cut", "level"):
        raise ParameterError(f"unknown cap method {method!r}")
    total = mesh.total_area
    reports = []
    running = np.inf
    for a in angles:
        if method == "cut":
            E = Region.polar_cap(mesh, a, axis)
            area, per = E.area, perimeter_cut(E)
        else:
            area, per = _cap_level(mesh, a, axis)
        small = min(area, total - area)
        if small <= 0:
            raise DomainError(f"cap of angle {a} is empty or full on this mesh")
        ratio = per / np.sqrt(small)
        running = min(running, ratio)
        reports.append(IsoReport(f"cap:{float(a)!r}", area, per, ratio, running))
    return reports, float(running)


def reports_to_csv(reports, path) -> None:
    write_csv(path, ["angle_or_seed", "area", "perimeter", "ratio"], ((r.descriptor, r.area, r.perimeter, r.ratio) for r in reports))


def sobolev_quotient(u: ScalarField) -> float:
    """Total variation over (min_c integral |u - c|^2)^(1/2); the minimizing c is the mass-weighted mean."""
    if u.is_constant():
        raise DomainError("Sobolev quotient is undefined for a constant field")
    mass = u.mesh.operators.mass
    c = float(np.sum(mass * u.values) / np.sum(mass))
    denom = np.sqrt(np.sum(mass * (u.values - c) ** 2))
    if denom == 0:
        raise DomainError("field is constant up to mass-weighted rounding")
    return total_gradient_norm(u) / denom


def random_region(mesh: Mesh, rng: np.random.Generator, fraction: float | None = None, jitter: float | None = None) -> Region:
    """Connected face set grown from a random face; ``jitter`` blends breadth-first and random-frontier growth."""
    if fraction is None:
        fraction = rng.uniform(0.02, 0.98)
    if jitter is None:
        jitter = rng.uniform(0.0, 1.0)
    A = mesh.face_adjacency
    start = int(rng.integers(mesh.n_faces))
    target = max(1, min(mesh.n_faces - 1, int(round(fraction * mesh.n_faces))))
    rand = rng.random(4 * mesh.n_faces)
    mask = kernels.grow_region(A.indptr, A.indices, start, target, rand, jitter)
    return Region(mesh, mask, f"random:{fraction:.6f}:{jitter:.6f}")


@dataclass
class AuditResult:
    min_ratio: float
    ratios: np.ndarray
    failures: list
    areas: np.ndarray | None = None
    perimeters: np.ndarray | None = None


def random_region_audit(mesh: Mesh, count: int, seed: int, floor: float) -> AuditResult:
    """Iso ratios of ``count`` seeded random regions; regions with ratio < floor are returned as failures."""
    rng = np.random.default_rng(seed)
    ratios = np.empty(count)
    areas = np.empty(count)
    pers = np.empty(count)
    failures = []
    for i in range(count):
        E = random_region(mesh, rng)
        areas[i] = E.area
        pers[i] = perimeter_cut(E)
        ratios[i] = pers[i] / np.sqrt(min(areas[i], mesh.total_area - areas[i]))
        if ratios[i] < floor:
            failures.append({"index": i, "ratio": float(ratios[i]), "faces": np.nonzero(E.mask)[0].tolist()})
    return AuditResult(float(ratios.min()) if count else np.inf, ratios, failures, areas, pers)
