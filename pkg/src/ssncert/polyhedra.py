"""Exact desk-scale polyhedral computation (n <= 6).

V-representations (vertices + rays), facet enumeration by brute force over
generator subsets, exact projections by active-set enumeration, and the
tangent / normal cone and exposed-face primitives built on top.  Everything
here trades generality for exactness at small dimension.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .matrix_core import Subspace, orthonormalize

__all__ = [
    "Polytope",
    "PolyhedralCone",
    "HRep",
    "hrep_of",
    "project_onto",
    "tangent_cone_at",
    "normal_cone_at",
    "polar_cone",
    "cone_from_halfspaces",
    "cone_hrep",
    "smallest_exposed_face_of",
]

MAX_DIM = 6
_TOL = 1e-9


def _rows(arr, n: int) -> np.ndarray:
    if arr is None:
        return np.zeros((0, n))
    a = np.asarray(arr, dtype=float)
    if a.size == 0:
        return np.zeros((0, n))
    a = np.atleast_2d(a)
    if a.shape[1] != n:
        raise ValueError(f"expected rows of length {n}, got shape {a.shape}")
    return a


def _dedup_rows(a: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    keep: list[np.ndarray] = []
    for row in a:
        if not any(np.linalg.norm(row - k) <= tol for k in keep):
            keep.append(row)
    return np.array(keep) if keep else a.reshape(0, a.shape[1])


def _null_space(m: np.ndarray, n: int, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of {h: m h = 0}; m may have zero rows."""
    if m.shape[0] == 0:
        return np.eye(n)
    u, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:].T


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polyhedron given by vertices and (optionally) recession rays."""

    vertices: np.ndarray
    rays: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] == 0:
            raise ValueError("polytope needs at least one vertex")
        n = v.shape[1]
        if n > MAX_DIM:
            raise ValueError(f"dimension {n} exceeds supported desk scale {MAX_DIM}")
        r = _rows(self.rays if self.rays is not None and np.size(self.rays) else None, n)
        object.__setattr__(self, "vertices", _dedup_rows(v))
        object.__setattr__(self, "rays", r)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """cone = {sum alpha_i g_i + l : alpha_i >= 0, l in lineality}."""

    generators: np.ndarray
    lineality: Subspace

    def __post_init__(self):
        n = self.lineality.n
        g = _rows(self.generators if np.size(self.generators) else None, n)
        if g.shape[0]:
            # store generators deflated against the lineality and normalized
            p = self.lineality.projector()
            g = g - g @ p
            norms = np.linalg.norm(g, axis=1)
            g = g[norms > 1e-12]
            if g.shape[0]:
                g = g / np.linalg.norm(g, axis=1, keepdims=True)
            g = _dedup_rows(g)
        object.__setattr__(self, "generators", g)

    @property
    def n(self) -> int:
        return self.lineality.n

    @classmethod
    def trivial(cls, n: int) -> "PolyhedralCone":
        return cls(np.zeros((0, n)), Subspace.trivial(n))

    @classmethod
    def full(cls, n: int) -> "PolyhedralCone":
        return cls(np.zeros((0, n)), Subspace.full(n))

    @classmethod
    def from_generators(cls, generators, n: int | None = None) -> "PolyhedralCone":
        g = np.atleast_2d(np.asarray(generators, dtype=float))
        dim = n if n is not None else g.shape[1]
        return cls(g, Subspace.trivial(dim))

    def contains(self, x, tol: float = _TOL) -> bool:
        x = np.asarray(x, dtype=float)
        resid = x - self.lineality.projector() @ x if self.lineality.dim else x.copy()
        if self.generators.shape[0] == 0:
            return float(np.linalg.norm(resid)) <= tol * (1.0 + float(np.linalg.norm(x)))
        _, err = nnls(self.generators.T, resid)
        return err <= tol * (1.0 + float(np.linalg.norm(x)))

    def dim_estimate(self) -> int:
        stack = np.vstack([self.generators, self.lineality.basis.T]) if self.lineality.dim else self.generators
        if stack.shape[0] == 0:
            return 0
        s = np.linalg.svd(stack, compute_uv=False)
        return int(np.sum(s > 1e-10 * max(1.0, s[0])))


@dataclass(frozen=True, eq=False)
class HRep:
    """a x <= b together with equality rows e x = f (affine-hull constraints)."""

    a: np.ndarray
    b: np.ndarray
    eq: np.ndarray
    eq_rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[1] if self.a.size else self.eq.shape[1]

    def contains(self, x, tol: float = _TOL) -> bool:
        x = np.asarray(x, dtype=float)
        scale = 1.0 + float(np.linalg.norm(x))
        ok_in = self.a.shape[0] == 0 or np.all(self.a @ x - self.b <= tol * scale)
        ok_eq = self.eq.shape[0] == 0 or np.all(np.abs(self.eq @ x - self.eq_rhs) <= tol * scale)
        return bool(ok_in and ok_eq)


def _facets_full_dim(points: np.ndarray, rays: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Facets of conv(points)+cone(rays), assumed full-dimensional in R^d.

    Works on the homogenization cone spanned by (p, 1) and (r, 0): every facet
    corresponds to a hyperplane through the origin spanned by d of the lifted
    generators with all generators on one side.
    """
    d = points.shape[1]
    lifted = np.vstack([np.column_stack([points, np.ones(len(points))]),
                        np.column_stack([rays, np.zeros(len(rays))])]) if len(rays) else \
        np.column_stack([points, np.ones(len(points))])
    m = lifted.shape[0]
    normals: list[np.ndarray] = []
    rhs: list[float] = []
    seen: list[np.ndarray] = []
    for subset in itertools.combinations(range(m), d):
        sub = lifted[list(subset)]
        ns = _null_space(sub, d + 1)
        if ns.shape[1] != 1:
            continue
        u = ns[:, 0]
        vals = lifted @ u
        span = max(1.0, float(np.max(np.abs(vals))))
        if np.all(vals <= tol * span):
            pass
        elif np.all(vals >= -tol * span):
            u = -u
        else:
            continue
        a, negb = u[:d], u[d]
        nrm = float(np.linalg.norm(a))
        if nrm <= tol:
            continue  # hyperplane at infinity
        a = a / nrm
        bval = -negb / nrm
        key = np.append(a, bval)
        if not any(np.linalg.norm(key - s) <= 1e-8 for s in seen):
            seen.append(key)
            normals.append(a)
            rhs.append(bval)
    return (np.array(normals) if normals else np.zeros((0, d)),
            np.array(rhs) if rhs else np.zeros(0))


def hrep_of(p: Polytope, tol: float = 1e-10) -> HRep:
    """Facet H-representation, with affine-hull equalities when degenerate."""
    v, r = p.vertices, p.rays
    n = p.n
    v0 = v[0]
    dirs = np.vstack([v - v0, r]) if r.shape[0] else v - v0
    u, s, vt = np.linalg.svd(dirs) if dirs.shape[0] else (None, np.zeros(0), np.eye(n))
    d = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    basis = vt[:d].T  # (n, d)
    comp = vt[d:]     # (n-d) rows spanning the orthogonal complement
    eq = comp
    eq_rhs = comp @ v0
    if d == 0:
        return HRep(np.zeros((0, n)), np.zeros(0), eq, eq_rhs)
    red_v = (v - v0) @ basis
    red_r = r @ basis if r.shape[0] else np.zeros((0, d))
    a_red, b_red = _facets_full_dim(red_v, red_r, tol=1e-9)
    a_amb = a_red @ basis.T
    b_amb = b_red + a_amb @ v0
    return HRep(a_amb, b_amb, eq, eq_rhs)


def project_onto(p: Polytope | HRep, point, tol: float = _TOL) -> np.ndarray:
    """Euclidean projection by exact active-set enumeration over facets."""
    h = p if isinstance(p, HRep) else hrep_of(p)
    x0 = np.asarray(point, dtype=float)
    n = h.n
    m = h.a.shape[0]
    scale = 1.0 + float(np.linalg.norm(x0))
    if h.contains(x0, tol):
        if h.eq.shape[0] == 0:
            return x0.copy()
    best = None
    best_dist = np.inf
    for size in range(0, min(n, m) + 1):
        for subset in itertools.combinations(range(m), size):
            rows = np.vstack([h.a[list(subset)], h.eq]) if subset or h.eq.shape[0] else np.zeros((0, n))
            rhs = np.concatenate([h.b[list(subset)], h.eq_rhs]) if rows.shape[0] else np.zeros(0)
            if rows.shape[0] == 0:
                x = x0.copy()
            else:
                gram = rows @ rows.T
                lam, *_ = np.linalg.lstsq(gram, rows @ x0 - rhs, rcond=None)
                x = x0 - rows.T @ lam
            if not h.contains(x, 10 * tol):
                continue
            d = x0 - x
            if float(np.linalg.norm(d)) <= tol * scale:
                return x
            # dual feasibility: x0 - x must be a nonnegative combination of the
            # active inequality normals plus an arbitrary equality component
            dd = d.copy()
            cols = []
            if h.eq.shape[0]:
                eq_basis = orthonormalize(h.eq, tol=1e-12)
                dd = dd - eq_basis.projector() @ dd
                act = h.a[list(subset)] if subset else np.zeros((0, n))
                act = act - act @ eq_basis.projector() if act.shape[0] else act
            else:
                act = h.a[list(subset)] if subset else np.zeros((0, n))
            if act.shape[0] == 0:
                dual_ok = float(np.linalg.norm(dd)) <= 10 * tol * scale
            else:
                _, err = nnls(act.T, dd)
                dual_ok = err <= 10 * tol * scale
            if dual_ok:
                return x
            dist = float(np.linalg.norm(d))
            if dist < best_dist:
                best, best_dist = x, dist
    if best is None:
        raise RuntimeError("projection failed: no feasible KKT candidate")
    return best


def cone_from_halfspaces(a_rows, eq_rows, n: int) -> PolyhedralCone:
    """V-representation of {h : a h <= 0, e h = 0} by subset enumeration."""
    a = _rows(a_rows if a_rows is not None and np.size(a_rows) else None, n)
    e = _rows(eq_rows if eq_rows is not None and np.size(eq_rows) else None, n)
    stack = np.vstack([a, e])
    lin_basis = _null_space(stack, n)
    lineality = Subspace(n, lin_basis) if lin_basis.shape[1] else Subspace.trivial(n)
    ldim = lineality.dim
    gens: list[np.ndarray] = []
    m = a.shape[0]
    for size in range(0, min(m, n) + 1):
        for subset in itertools.combinations(range(m), size):
            rows = np.vstack([a[list(subset)], e]) if subset or e.shape[0] else np.zeros((0, n))
            ns = _null_space(rows, n)
            if ns.shape[1] != ldim + 1:
                continue
            # direction orthogonal to the lineality inside the null space
            if ldim:
                proj = ns - lineality.basis @ (lineality.basis.T @ ns)
                u, s, vt = np.linalg.svd(proj)
                h = u[:, 0] if s[0] > 1e-10 else None
            else:
                h = ns[:, 0]
            if h is None:
                continue
            vals = a @ h if m else np.zeros(0)
            if np.all(vals <= _TOL):
                gens.append(h)
            elif np.all(-vals <= _TOL):
                gens.append(-h)
    g = _dedup_rows(np.array(gens)) if gens else np.zeros((0, n))
    return PolyhedralCone(g, lineality)


def polar_cone(c: PolyhedralCone) -> PolyhedralCone:
    """Polar {y : <y, h> <= 0 for all h in cone}."""
    eq = c.lineality.basis.T if c.lineality.dim else None
    return cone_from_halfspaces(c.generators, eq, c.n)


def cone_hrep(c: PolyhedralCone) -> tuple[np.ndarray, np.ndarray]:
    """(a, e) with cone = {h : a h <= 0, e h = 0}, from the double polar."""
    p = polar_cone(c)
    a = p.generators
    e = p.lineality.basis.T if p.lineality.dim else np.zeros((0, c.n))
    return a, e


def tangent_cone_at(p: Polytope | PolyhedralCone, x, tol: float = _TOL) -> PolyhedralCone:
    x = np.asarray(x, dtype=float)
    if isinstance(p, PolyhedralCone):
        if not p.contains(x, tol):
            raise ValueError("point is not in the cone")
        a, e = cone_hrep(p)
        active = a[np.abs(a @ x) <= tol * (1.0 + np.linalg.norm(x))] if a.shape[0] else a
        return cone_from_halfspaces(active, e, p.n)
    h = hrep_of(p)
    if not h.contains(x, tol):
        raise ValueError("point is not in the polytope")
    scale = 1.0 + float(np.linalg.norm(x))
    active = h.a[h.b - h.a @ x <= tol * scale] if h.a.shape[0] else h.a
    return cone_from_halfspaces(active, h.eq, h.n)


def normal_cone_at(p: Polytope | PolyhedralCone, x, tol: float = _TOL) -> PolyhedralCone:
    """Polar of the tangent cone: active facet normals plus affine-hull lines."""
    x = np.asarray(x, dtype=float)
    if isinstance(p, PolyhedralCone):
        return polar_cone(tangent_cone_at(p, x, tol))
    h = hrep_of(p)
    if not h.contains(x, tol):
        raise ValueError("point is not in the polytope")
    scale = 1.0 + float(np.linalg.norm(x))
    active = h.a[h.b - h.a @ x <= tol * scale] if h.a.shape[0] else np.zeros((0, h.n))
    lin = orthonormalize(h.eq, tol=1e-12) if h.eq.shape[0] else Subspace.trivial(h.n)
    return PolyhedralCone(active, lin)


def smallest_exposed_face_of(p: Polytope, x, tol: float = _TOL) -> np.ndarray:
    """Vertex set of the smallest exposed face of p containing x.

    Uses a relative-interior normal direction (mean of the active facet
    normals); the face is the maximizer set of that direction over p.
    """
    nc = normal_cone_at(p, x, tol)
    if nc.generators.shape[0] == 0:
        return p.vertices.copy()
    y = nc.generators.mean(axis=0)
    vals = p.vertices @ y
    top = float(np.max(vals))
    scale = 1.0 + abs(top)
    return p.vertices[vals >= top - tol * scale]
