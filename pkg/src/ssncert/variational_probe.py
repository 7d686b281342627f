"""Numeric second-order diagnostics and polyhedral variational geometry.

Second-order difference quotients of catalog functions with a finite liminf
proxy, polyhedral tangent / normal cones and exposed faces (delegating to the
exact desk-scale machinery in polyhedra), and a curvature probe for the
outer second-order tangent sets of the two bespoke support sets.  Everything
sampled here is a diagnostic, never a certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polyhedra import (
    PolyhedralCone,
    Polytope,
    normal_cone_at,
    smallest_exposed_face_of,
    tangent_cone_at,
)
from .prox_catalog import (
    CatalogError,
    ProxSpec,
    phi_increment,
    phi_value,
    project_arc_segment_hull,
    project_cusp_set,
)

__all__ = [
    "PolyhedralCone",
    "Polytope",
    "QuotientSample",
    "second_diff_quotient",
    "estimate_d2",
    "tangent_cone",
    "normal_cone",
    "smallest_exposed_face",
    "second_tangent_distance",
]

DIVERGENCE_CAP = 1e6


@dataclass(frozen=True)
class QuotientSample:
    """One second-order difference quotient evaluation."""

    t: float
    h_used: np.ndarray
    value: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("step t must be positive")


def second_diff_quotient(phi: ProxSpec, x, v, h, t: float) -> QuotientSample:
    """[phi(x + t h) - phi(x) - t <v, h>] / (t^2 / 2); +inf off the domain."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    base = phi_value(phi, x)
    if not math.isfinite(base):
        raise CatalogError("phi(x) must be finite")
    val = phi_value(phi, x + t * h)
    if not math.isfinite(val):
        return QuotientSample(t, h, math.inf)
    quotient = (val - base - t * float(v @ h)) / (0.5 * t * t)
    return QuotientSample(t, h, quotient)


def estimate_d2(
    phi: ProxSpec,
    x,
    v,
    h,
    t_grid=None,
    h_perturbations: int = 20,
    seed: int = 0,
) -> dict:
    """Finite liminf proxy for the second subderivative along direction h.

    At every grid step t the quotient is minimized over h_perturbations
    random h~ with ||h~ - h|| <= 0.1 t; the estimate is the minimum over the
    tail of the grid.  diverging is set when the tail values exceed the
    divergence cap and grow monotonically (a finite sampling stand-in for
    liminf over t down to 0 and h~ -> h; an upper bound on the true liminf).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    if t_grid is None:
        t_grid = np.geomspace(1e-1, 1e-6, 12)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) >= 0):
        raise ValueError("t_grid must be strictly decreasing")
    if t_grid[-1] > 1e-6:
        raise ValueError("t_grid must reach 1e-6 or below")
    rng = np.random.default_rng(seed)

    def probe(t: float) -> float:
        best = second_diff_quotient(phi, x, v, h, t).value
        for _ in range(h_perturbations):
            d = rng.standard_normal(len(h))
            d *= 0.1 * t * rng.random() / max(np.linalg.norm(d), 1e-300)
            best = min(best, second_diff_quotient(phi, x, v, h + d, t).value)
        return best

    values = [probe(float(t)) for t in t_grid]
    tail = values[-5:] if len(values) >= 5 else values
    growing = all(b >= a for a, b in zip(tail, tail[1:]))
    diverging = growing and all(u > DIVERGENCE_CAP for u in tail)
    if not diverging and growing and tail[-1] > max(10.0 * abs(tail[0]), 1.0):
        # slow (e.g. 1/t) growth crosses the cap below the grid floor; extend
        # the probe there, where round-off is negligible against the cap
        deep = [probe(float(t_grid[-1]) * s) for s in (1e-1, 1e-2, 1e-3)]
        diverging = all(u > DIVERGENCE_CAP for u in deep[1:]) and deep[-1] >= deep[0]
    estimate = math.inf if diverging else min(tail)
    return {"estimate": estimate, "diverging": diverging, "values": values}


def tangent_cone(cone_set: Polytope | PolyhedralCone, x) -> PolyhedralCone:
    """Polyhedral tangent cone at a point of the set (active-facet analysis)."""
    return tangent_cone_at(cone_set, x)


def normal_cone(cone_set: Polytope | PolyhedralCone, x) -> PolyhedralCone:
    """Polar of the tangent cone at x."""
    return normal_cone_at(cone_set, x)


def smallest_exposed_face(polytope: Polytope, x) -> np.ndarray:
    """Vertex set of the smallest exposed face of the polytope containing x."""
    return smallest_exposed_face_of(polytope, x)


_EXAMPLE_SETS = ("arc_segment", "sharp_cusp")


def _set_distance(example_set: str, p: np.ndarray) -> float:
    if example_set == "arc_segment":
        return float(np.linalg.norm(p - project_arc_segment_hull(p)))
    return float(np.linalg.norm(p - project_cusp_set(p)))


def second_tangent_distance(example_set: str, lam, p, path_grid=None) -> float:
    """Estimate of dist(0, T^2(lambda, p)) for the two bespoke sets.

    The minimal second-order correction w with dist(lambda + t p + (t^2/2) w, set)
    = o(t^2) has norm 2 dist(lambda + t p, set) / t^2 in the limit, so the
    probe tracks that quantity along the grid; values escaping the divergence
    cap while growing report an empty tangent set (+inf).
    """
    if example_set not in _EXAMPLE_SETS:
        raise ValueError(f"example_set must be one of {_EXAMPLE_SETS}")
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    if path_grid is None:
        path_grid = np.geomspace(1e-2, 1e-5, 10)
    path_grid = np.asarray(path_grid, dtype=float)
    if _set_distance(example_set, lam) > 1e-9:
        raise ValueError("lambda must belong to the set")
    # tangency check: dist(lam + t p, set) must vanish to first order
    t0 = float(path_grid[0])
    if _set_distance(example_set, lam + t0 * p) > 0.5 * t0 * np.linalg.norm(p) + 1e-12:
        raise ValueError("p is not a tangent direction at lambda")
    values = [2.0 * _set_distance(example_set, lam + float(t) * p) / float(t) ** 2 for t in path_grid]
    # an empty outer second-order tangent set shows up as a minimal correction
    # whose norm keeps growing as t shrinks (any power of 1/t eventually
    # escapes); a nonempty set gives values settling at the curvature bound
    growing = all(b >= a * (1.0 - 1e-9) for a, b in zip(values, values[1:]))
    if values[-1] > DIVERGENCE_CAP:
        return math.inf
    if growing and values[-1] >= 2.0 * max(values[0], 1e-12):
        return math.inf
    return values[-1]
