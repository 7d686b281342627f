"""Catalog of nonsmooth functions with closed-form proximity operators.

Each catalog member knows how to evaluate itself, its prox, the finite
Bouligand-Jacobian enumeration of the prox where one exists, a subgradient
membership test, and a second-order descriptor (curvature matrix Q, domain
cone S, its affine hull, and the multiplier vector) at stationary points.

Every member is convex, so the prox-regularity constant rho is 0 and the
prox is single-valued and nonexpansive for all tau > 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .matrix_core import SymMatrix, Subspace, orthonormalize
from .polyhedra import (
    HRep,
    PolyhedralCone,
    Polytope,
    cone_from_halfspaces,
    cone_hrep,
    hrep_of,
    normal_cone_at,
    project_onto,
    tangent_cone_at,
)

__all__ = [
    "CatalogError",
    "EnumerationUnavailable",
    "ProxSpec",
    "SecondOrderDescriptor",
    "SequencePoint",
    "phi_value",
    "phi_increment",
    "prox_eval",
    "bd_prox_set",
    "subgradient_contains",
    "second_order_descriptor",
    "example_sequence",
    "project_arc_segment_hull",
    "project_cusp_set",
    "arc_segment_hessian",
    "cusp_hessian",
]

KINDS = (
    "zero",
    "l1",
    "indicator_orthant",
    "indicator_abs_cone",
    "group_l2",
    "polyhedral_support",
    "support_arc_segment",
    "support_sharp_cusp",
)

BOUNDARY_TOL = 1e-9
PATTERN_CAP = 1 << 16
SMOOTH_MARGIN = 1e-7


class CatalogError(ValueError):
    """Unsupported catalog kind / point / parameter combination."""


class EnumerationUnavailable(CatalogError):
    """Bouligand enumeration is not available at the requested point."""


@dataclass(frozen=True, eq=False)
class ProxSpec:
    """Catalog entry: a nonsmooth phi with closed-form prox machinery."""

    kind: str
    n: int
    weight: float = 1.0
    blocks: tuple[tuple[int, ...], ...] = ()
    vertices: tuple[tuple[float, ...], ...] | None = None
    rays: tuple[tuple[float, ...], ...] | None = None
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CatalogError(f"unknown catalog kind {self.kind!r}")
        if self.n < 1:
            raise CatalogError("ambient dimension must be positive")
        if self.kind in ("l1", "group_l2") and self.weight <= 0:
            raise CatalogError("weight must be positive")
        if self.kind == "group_l2":
            seen = sorted(i for b in self.blocks for i in b)
            if seen != list(range(self.n)):
                raise CatalogError("blocks must partition 0..n-1")
        if self.kind == "indicator_abs_cone" and self.n != 2:
            raise CatalogError("indicator_abs_cone is two-dimensional")
        if self.kind == "support_arc_segment" and self.n != 3:
            raise CatalogError("support_arc_segment is three-dimensional")
        if self.kind == "support_sharp_cusp" and self.n != 2:
            raise CatalogError("support_sharp_cusp is two-dimensional")
        if self.kind == "polyhedral_support" and not self.vertices:
            raise CatalogError("polyhedral_support needs vertices")

    # -- constructors --------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "ProxSpec":
        return cls("zero", n)

    @classmethod
    def l1(cls, n: int, weight: float = 1.0) -> "ProxSpec":
        return cls("l1", n, weight=weight)

    @classmethod
    def indicator_orthant(cls, n: int) -> "ProxSpec":
        return cls("indicator_orthant", n)

    @classmethod
    def indicator_abs_cone(cls) -> "ProxSpec":
        return cls("indicator_abs_cone", 2)

    @classmethod
    def group_l2(cls, blocks, weight: float = 1.0) -> "ProxSpec":
        blocks = tuple(tuple(int(i) for i in b) for b in blocks)
        n = sum(len(b) for b in blocks)
        return cls("group_l2", n, weight=weight, blocks=blocks)

    @classmethod
    def polyhedral_support(cls, vertices, rays=None) -> "ProxSpec":
        v = tuple(tuple(float(x) for x in row) for row in np.atleast_2d(vertices))
        r = None
        if rays is not None and np.size(rays):
            r = tuple(tuple(float(x) for x in row) for row in np.atleast_2d(rays))
        return cls("polyhedral_support", len(v[0]), vertices=v, rays=r)

    @classmethod
    def support_arc_segment(cls) -> "ProxSpec":
        return cls("support_arc_segment", 3)

    @classmethod
    def support_sharp_cusp(cls) -> "ProxSpec":
        return cls("support_sharp_cusp", 2)

    # -- serialization (problem-file format) ---------------------------
    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "n": self.n}
        if self.kind in ("l1", "group_l2"):
            d["weight"] = self.weight
        if self.kind == "group_l2":
            d["blocks"] = [list(b) for b in self.blocks]
        if self.kind == "polyhedral_support":
            d["vertices"] = [list(v) for v in self.vertices]
            if self.rays:
                d["rays"] = [list(r) for r in self.rays]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProxSpec":
        kind = d.get("kind")
        if kind not in KINDS:
            raise CatalogError(f"unknown catalog kind {kind!r}")
        if kind == "zero":
            return cls.zero(int(d["n"]))
        if kind == "l1":
            return cls.l1(int(d["n"]), float(d.get("weight", 1.0)))
        if kind == "indicator_orthant":
            return cls.indicator_orthant(int(d["n"]))
        if kind == "indicator_abs_cone":
            return cls.indicator_abs_cone()
        if kind == "group_l2":
            return cls.group_l2(d["blocks"], float(d.get("weight", 1.0)))
        if kind == "polyhedral_support":
            return cls.polyhedral_support(d["vertices"], d.get("rays"))
        if kind == "support_arc_segment":
            return cls.support_arc_segment()
        return cls.support_sharp_cusp()

    def _polytope(self) -> Polytope:
        rays = np.array(self.rays) if self.rays else None
        return Polytope(np.array(self.vertices), rays)


@dataclass(frozen=True, eq=False)
class SecondOrderDescriptor:
    """Second-order data (Q, S, aff S, lambda) of phi at a stationary pair.

    Q carries the curvature of the decomposition map, S the domain cone of
    the second-order difference quotients, aff_s its affine hull.  Invariants:
    range(Q) lies in aff_s and every generator / lineality direction of the
    cone lies in aff_s (both within 1e-10).
    """

    q: SymMatrix
    cone: PolyhedralCone
    aff_s: Subspace
    lambda_bar: np.ndarray | None = None

    def __post_init__(self):
        p = self.aff_s.projector()
        off = float(np.linalg.norm(self.q.a - p @ self.q.a @ p))
        if off > 1e-10:
            raise ValueError(f"range(Q) escapes aff(S) by {off:.3e}")
        for g in self.cone.generators:
            if float(np.linalg.norm(g - p @ g)) > 1e-10:
                raise ValueError("cone generator escapes aff(S)")
        if self.cone.lineality.dim and not self.aff_s.contains(self.cone.lineality, 1e-10):
            raise ValueError("cone lineality escapes aff(S)")
        if self.lambda_bar is not None:
            lb = np.asarray(self.lambda_bar, dtype=float).copy()
            lb.flags.writeable = False
            object.__setattr__(self, "lambda_bar", lb)


@dataclass(frozen=True, eq=False)
class SequencePoint:
    """One point of a published diagnostic sequence: (x_k, v_k, Hessian at x_k)."""

    x: np.ndarray
    v: np.ndarray
    hessian: SymMatrix


# ---------------------------------------------------------------------------
# function values
# ---------------------------------------------------------------------------

def _arc_support_2d(x1: float, x2: float) -> float:
    """sup of <x, c(theta)> over the arc c(theta) = (sin t, 1 - cos t), t in [0, pi]."""
    best = max(0.0, 2.0 * x2)
    if x1 > 0.0:
        theta = math.atan2(x1, -x2)
        if 0.0 < theta < math.pi:
            best = max(best, x1 * math.sin(theta) + x2 * (1.0 - math.cos(theta)))
    return best


def phi_value(spec: ProxSpec, x) -> float:
    """phi(x); +inf outside the effective domain."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise CatalogError(f"point of dimension {x.shape} against n={spec.n}")
    if spec.kind == "zero":
        return 0.0
    if spec.kind == "l1":
        return spec.weight * float(np.sum(np.abs(x)))
    if spec.kind == "indicator_orthant":
        return 0.0 if np.all(x >= -1e-12) else math.inf
    if spec.kind == "indicator_abs_cone":
        return 0.0 if x[0] >= abs(x[1]) - 1e-12 else math.inf
    if spec.kind == "group_l2":
        return spec.weight * sum(float(np.linalg.norm(x[list(b)])) for b in spec.blocks)
    if spec.kind == "polyhedral_support":
        poly = spec._polytope()
        if poly.rays.shape[0] and np.any(poly.rays @ x > 1e-12 * (1 + np.linalg.norm(x))):
            return math.inf
        return float(np.max(poly.vertices @ x))
    if spec.kind == "support_arc_segment":
        return max(abs(x[2]), _arc_support_2d(x[0], x[1]))
    # support_sharp_cusp
    if x[1] > 0.0:
        return math.inf
    if x[1] == 0.0:
        return 0.0 if x[0] == 0.0 else math.inf
    return abs(x[0]) ** 3 / (3.0 * x[1] ** 2)


def phi_increment(spec: ProxSpec, x, dx) -> float:
    """phi(x + dx) - phi(x), evaluated cancellation-free where possible.

    Second-order difference quotients divide this by t^2/2, so the naive
    float subtraction loses eps * phi(x) / t^2 of accuracy; the separable
    kinds admit stable incremental forms (sign-split absolute values, the
    conjugate norm-difference formula).  Kinds without one fall back to the
    plain difference.
    """
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if spec.kind == "zero":
        return 0.0
    if spec.kind == "l1":
        total = 0.0
        for a, d in zip(x, dx):
            b = a + d
            if a > 0 and b > 0:
                total += d
            elif a < 0 and b < 0:
                total -= d
            else:
                total += abs(b) - abs(a)
        return spec.weight * total
    if spec.kind == "group_l2":
        total = 0.0
        for blk in spec.blocks:
            idx = list(blk)
            a = x[idx]
            d = dx[idx]
            na = float(np.linalg.norm(a))
            nb = float(np.linalg.norm(a + d))
            denom = na + nb
            if denom == 0.0:
                continue
            total += (2.0 * float(a @ d) + float(d @ d)) / denom
        return spec.weight * total
    base = phi_value(spec, x)
    if not math.isfinite(base):
        raise CatalogError("phi(x) must be finite")
    val = phi_value(spec, x + dx)
    if not math.isfinite(val):
        return math.inf
    return val - base


# ---------------------------------------------------------------------------
# bespoke set geometry (hull of segment and arc; sharp-cusp epigraph set)
# ---------------------------------------------------------------------------

def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Minimize a unimodal f on [lo, hi] to interval width tol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _project_half_disc(p: np.ndarray) -> np.ndarray:
    """Projection onto {q : q1 >= 0, ||q - (0,1)|| <= 1} in the plane."""
    c = np.array([0.0, 1.0])
    inside_disc = float(np.linalg.norm(p - c)) <= 1.0
    if inside_disc and p[0] >= 0.0:
        return p.copy()
    cands = []
    d = p - c
    nd = float(np.linalg.norm(d))
    if nd > 0:
        q = c + d / nd
        if q[0] >= -1e-15:
            cands.append(q)
    if inside_disc and p[0] < 0.0:
        q = np.array([0.0, p[1]])
        if float(np.linalg.norm(q - c)) <= 1.0:
            cands.append(q)
    cands.append(np.array([0.0, min(max(p[1], 0.0), 2.0)]))
    best = min(cands, key=lambda q: float(np.linalg.norm(q - p)))
    return best


def project_arc_segment_hull(p) -> np.ndarray:
    """Projection onto conv(segment {(0,0,t): |t|<=1} + half-circle arc).

    The hull is the union over alpha in [0,1] of alpha*segment + (1-alpha)*D
    with D the half-disc hull of the arc; for fixed alpha the inner problem
    splits into a clamp in the segment coordinate and a half-disc projection,
    and the optimal value is convex in alpha, so a golden-section scan is
    exact to the requested width.
    """
    p = np.asarray(p, dtype=float)

    def inner(alpha: float) -> tuple[float, np.ndarray]:
        if alpha >= 1.0 - 1e-300:
            y = np.array([0.0, 0.0, min(max(p[2], -1.0), 1.0)])
            return float(np.sum((p - y) ** 2)), y
        q = _project_half_disc(p[:2] / (1.0 - alpha))
        xy = (1.0 - alpha) * q
        if alpha <= 0.0:
            y = np.array([xy[0], xy[1], 0.0])
        else:
            t = min(max(p[2] / alpha, -1.0), 1.0)
            y = np.array([xy[0], xy[1], alpha * t])
        return float(np.sum((p - y) ** 2)), y

    alpha = _golden_section(lambda a: inner(a)[0], 0.0, 1.0, 1e-12)
    best = min((inner(a) for a in (0.0, alpha, 1.0)), key=lambda t: t[0])
    return best[1]


def _cusp_boundary_project_branch(p: np.ndarray, sign: float) -> np.ndarray:
    """Projection of p onto the boundary branch y = (s*u, (2/3) u^(3/2)), u >= 0."""

    def fval(u: float) -> float:
        return (sign * u - p[0]) ** 2 + ((2.0 / 3.0) * u ** 1.5 - p[1]) ** 2

    hi = abs(p[0]) + (abs(p[1]) * 1.5 + 1.0) ** (2.0 / 3.0) + 1.0
    u = _golden_section(fval, 0.0, hi, 1e-10 * (1.0 + hi))
    for _ in range(40):  # Newton polish on the stationarity equation
        if u <= 0.0:
            break
        g = 2.0 * (sign * u - p[0]) * sign + 2.0 * ((2.0 / 3.0) * u ** 1.5 - p[1]) * u ** 0.5
        h = 2.0 + 2.0 * u + ((2.0 / 3.0) * u ** 1.5 - p[1]) / u ** 0.5
        if h <= 0.0 or not math.isfinite(h):
            break
        step = g / h
        u_new = u - step
        if u_new <= 0.0:
            u_new = u / 2.0
        if abs(u_new - u) <= 1e-16 * (1.0 + u):
            u = u_new
            break
        u = u_new
    cands = [0.0, u]
    ubest = min(cands, key=fval)
    return np.array([sign * ubest, (2.0 / 3.0) * ubest ** 1.5])


def project_cusp_set(p) -> np.ndarray:
    """Projection onto {x : x2 >= (2/3)|x1|^(3/2)}."""
    p = np.asarray(p, dtype=float)
    if p[1] >= (2.0 / 3.0) * abs(p[0]) ** 1.5:
        return p.copy()
    left = _cusp_boundary_project_branch(p, -1.0)
    right = _cusp_boundary_project_branch(p, 1.0)
    return min((right, left), key=lambda y: float(np.sum((y - p) ** 2)))


def arc_segment_hessian(x) -> SymMatrix:
    """Analytic Hessian of the arc-segment support function on its smooth region."""
    x = np.asarray(x, dtype=float)
    n2 = x[0] ** 2 + x[1] ** 2
    n1 = math.sqrt(n2)
    if n1 <= 0:
        raise CatalogError("Hessian undefined at the origin")
    h = np.zeros((3, 3))
    h[0, 0] = (n2 - x[0] ** 2) / n1 ** 3
    h[0, 1] = h[1, 0] = -x[0] * x[1] / n1 ** 3
    h[1, 1] = (n2 - x[1] ** 2) / n1 ** 3
    return SymMatrix(h)


def cusp_hessian(x) -> SymMatrix:
    """Analytic Hessian of the cusp support function |x1|^3 / (3 x2^2), x2 < 0."""
    x = np.asarray(x, dtype=float)
    if x[1] >= 0:
        raise CatalogError("Hessian defined only for x2 < 0")
    a = abs(x[0])
    h = np.array(
        [
            [2.0 * a / x[1] ** 2, -2.0 * x[0] * a / x[1] ** 3],
            [-2.0 * x[0] * a / x[1] ** 3, 2.0 * a ** 3 / x[1] ** 4],
        ]
    )
    return SymMatrix(h)


def _arc_segment_gradient(x: np.ndarray) -> np.ndarray:
    n1 = math.sqrt(x[0] ** 2 + x[1] ** 2)
    return np.array([x[0] / n1, 1.0 + x[1] / n1, 0.0])


def _in_arc_region(x: np.ndarray, margin: float = 0.0) -> bool:
    n1 = math.sqrt(x[0] ** 2 + x[1] ** 2)
    return x[0] > margin and x[1] < -margin and abs(x[2]) < n1 + x[1] - margin


# ---------------------------------------------------------------------------
# prox evaluation
# ---------------------------------------------------------------------------

def prox_eval(spec: ProxSpec, tau: float, z) -> np.ndarray:
    """Unique minimizer of phi(y) + ||z - y||^2 / (2 tau)."""
    if tau <= 0:
        raise CatalogError("tau must be positive")
    if tau * spec.rho >= 1:
        raise CatalogError("need tau * rho < 1")
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.n,):
        raise CatalogError(f"point of dimension {z.shape} against n={spec.n}")
    if spec.kind == "zero":
        return z.copy()
    if spec.kind == "l1":
        t = tau * spec.weight
        return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    if spec.kind == "indicator_orthant":
        return np.maximum(z, 0.0)
    if spec.kind == "indicator_abs_cone":
        if z[0] >= abs(z[1]):
            return z.copy()
        if z[0] <= -abs(z[1]):
            return np.zeros(2)
        if z[1] >= 0.0:
            s = 0.5 * (z[0] + z[1])
            return np.array([s, s])
        s = 0.5 * (z[0] - z[1])
        return np.array([s, -s])
    if spec.kind == "group_l2":
        out = np.zeros(spec.n)
        t = tau * spec.weight
        for b in spec.blocks:
            idx = list(b)
            zb = z[idx]
            nz = float(np.linalg.norm(zb))
            if nz > t:
                out[idx] = (1.0 - t / nz) * zb
        return out
    if spec.kind == "polyhedral_support":
        proj = project_onto(spec._polytope(), z / tau)
        return z - tau * proj
    if spec.kind == "support_arc_segment":
        w = np.array([z[0], z[1] - tau])
        m = float(np.linalg.norm(w))
        if z[0] > 0.0 and m > tau:
            xy = (1.0 - tau / m) * w
            x = np.array([xy[0], xy[1], z[2]])
            if _in_arc_region(x):
                return x
        return z - tau * project_arc_segment_hull(z / tau)
    # support_sharp_cusp
    return z - tau * project_cusp_set(z / tau)


# ---------------------------------------------------------------------------
# Bouligand enumeration
# ---------------------------------------------------------------------------

def _assemble_patterns(options: list[list[np.ndarray]], n_blocks_dim: list[list[int]], n: int):
    count = 1
    for opt in options:
        count *= len(opt)
        if count > PATTERN_CAP:
            raise CatalogError(f"pattern enumeration exceeds cap {PATTERN_CAP}")
    mats = []
    for combo in itertools.product(*options):
        d = np.zeros((n, n))
        for idx, block in zip(n_blocks_dim, combo):
            d[np.ix_(idx, idx)] = block
        mats.append(SymMatrix(d))
    return mats


def bd_prox_set(spec: ProxSpec, tau: float, z) -> list[SymMatrix]:
    """Bouligand subdifferential of the prox at z as a finite matrix list.

    Supported everywhere for the polyhedral kinds (active-pattern
    combinatorics, capped at 2^16 patterns) and on the smooth analytic
    regions of the two bespoke support-function sets, where the prox is
    differentiable and the list is the singleton {(I + tau H)^(-1)}.
    """
    if tau <= 0:
        raise CatalogError("tau must be positive")
    z = np.asarray(z, dtype=float)
    n = spec.n
    if spec.kind == "zero":
        return [SymMatrix.identity(n)]
    if spec.kind == "l1":
        t = tau * spec.weight
        bt = BOUNDARY_TOL * max(1.0, t)
        options = []
        for zi in z:
            gap = abs(zi) - t
            if gap > bt:
                options.append([np.array([[1.0]])])
            elif gap < -bt:
                options.append([np.array([[0.0]])])
            else:
                options.append([np.array([[1.0]]), np.array([[0.0]])])
        return _assemble_patterns(options, [[i] for i in range(n)], n)
    if spec.kind == "indicator_orthant":
        options = []
        for zi in z:
            if zi > BOUNDARY_TOL:
                options.append([np.array([[1.0]])])
            elif zi < -BOUNDARY_TOL:
                options.append([np.array([[0.0]])])
            else:
                options.append([np.array([[1.0]]), np.array([[0.0]])])
        return _assemble_patterns(options, [[i] for i in range(n)], n)
    if spec.kind == "indicator_abs_cone":
        tol = BOUNDARY_TOL * (1.0 + float(np.linalg.norm(z)))
        mats = []
        if z[0] >= abs(z[1]) - tol:
            mats.append(SymMatrix.identity(2))
        if z[1] >= abs(z[0]) - tol:
            mats.append(SymMatrix(np.full((2, 2), 0.5)))
        if z[1] <= -abs(z[0]) + tol:
            mats.append(SymMatrix(np.array([[0.5, -0.5], [-0.5, 0.5]])))
        if z[0] <= -abs(z[1]) + tol:
            mats.append(SymMatrix.zeros(2))
        return mats
    if spec.kind == "group_l2":
        t = tau * spec.weight
        bt = BOUNDARY_TOL * max(1.0, t)
        options = []
        idxs = [list(b) for b in spec.blocks]
        for idx in idxs:
            zb = z[idx]
            nz = float(np.linalg.norm(zb))
            k = len(idx)
            if nz - t > bt:
                u = zb / nz
                jac = (1.0 - t / nz) * np.eye(k) + (t / nz) * np.outer(u, u)
                options.append([jac])
            elif nz - t < -bt:
                options.append([np.zeros((k, k))])
            else:
                # on the threshold sphere nearby differentiability points are
                # either inside the dead zone (Jacobian 0) or outside
                # (Jacobian -> the rank-one projector onto z): exhaustive pair
                u = zb / nz
                options.append([np.outer(u, u), np.zeros((k, k))])
        return _assemble_patterns(options, idxs, n)
    if spec.kind == "polyhedral_support":
        return _bd_polyhedral_support(spec, tau, z)
    # bespoke kinds: available on the smooth analytic regions only
    x = prox_eval(spec, tau, z)
    scale = 1.0 + float(np.linalg.norm(z))
    if spec.kind == "support_arc_segment":
        if _in_arc_region(x, SMOOTH_MARGIN * scale):
            h = arc_segment_hessian(x)
            return [SymMatrix(np.linalg.inv(np.eye(3) + tau * h.a))]
        raise EnumerationUnavailable("arc-segment enumeration off the analytic region")
    if x[1] < -SMOOTH_MARGIN * scale:
        h = cusp_hessian(x)
        return [SymMatrix(np.linalg.inv(np.eye(2) + tau * h.a))]
    raise EnumerationUnavailable("cusp enumeration off the analytic region")


def _bd_polyhedral_support(spec: ProxSpec, tau: float, z: np.ndarray) -> list[SymMatrix]:
    """All limits of Dprox near z: I - P(face) over the normal-manifold cells at z/tau."""
    poly = spec._polytope()
    h = hrep_of(poly)
    p = z / tau
    n = spec.n
    m = h.a.shape[0]
    scale = 1.0 + float(np.linalg.norm(p))
    mats: list[np.ndarray] = []
    for size in range(0, min(n, m) + 1):
        for subset in itertools.combinations(range(m), size):
            rows = np.vstack([h.a[list(subset)], h.eq]) if subset or h.eq.shape[0] else np.zeros((0, n))
            rhs = np.concatenate([h.b[list(subset)], h.eq_rhs]) if rows.shape[0] else np.zeros(0)
            if rows.shape[0] == 0:
                q = p.copy()
                par = np.eye(n)
            else:
                gram = rows @ rows.T
                lam, *_ = np.linalg.lstsq(gram, rows @ p - rhs, rcond=None)
                q = p - rows.T @ lam
                u, s, vt = np.linalg.svd(rows)
                rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
                par = np.eye(n) - vt[:rank].T @ vt[:rank]
            if not h.contains(q, 10 * BOUNDARY_TOL * scale):
                continue
            from scipy.optimize import nnls as _nnls

            d = p - q
            if rows.shape[0]:
                act = h.a[list(subset)] if subset else np.zeros((0, n))
                dd = d.copy()
                if h.eq.shape[0]:
                    eqb = orthonormalize(h.eq, tol=1e-12)
                    dd = dd - eqb.projector() @ dd
                    act = act - act @ eqb.projector() if act.shape[0] else act
                if act.shape[0]:
                    _, err = _nnls(act.T, dd)
                    if err > 10 * BOUNDARY_TOL * scale:
                        continue
                elif float(np.linalg.norm(dd)) > 10 * BOUNDARY_TOL * scale:
                    continue
            elif float(np.linalg.norm(d)) > 10 * BOUNDARY_TOL * scale:
                continue
            dmat = np.eye(n) - par
            if not any(np.max(np.abs(dmat - m_)) <= 1e-9 for m_ in mats):
                mats.append(dmat)
    if not mats:
        raise EnumerationUnavailable("no normal-manifold cell found at the point")
    return [SymMatrix(m_) for m_ in mats]


# ---------------------------------------------------------------------------
# subgradients and second-order descriptors
# ---------------------------------------------------------------------------

def subgradient_contains(spec: ProxSpec, x, v, tol: float = 1e-9) -> bool:
    """True iff v is a subgradient of phi at x.

    Uses the prox characterization x = prox(x + tau0 v) with reference
    tau0 = 1; membership is tau-independent for the convex catalog.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(x - prox_eval(spec, 1.0, x + v))) <= tol


def _cone_and_aff(generators, lineality_vecs, n) -> tuple[PolyhedralCone, Subspace]:
    lin = orthonormalize(lineality_vecs, tol=1e-12) if lineality_vecs else Subspace.trivial(n)
    cone = PolyhedralCone(np.array(generators) if generators else np.zeros((0, n)), lin)
    spanning = list(lineality_vecs) + list(generators)
    aff = orthonormalize(spanning, tol=1e-12) if spanning else Subspace.trivial(n)
    return cone, aff


def second_order_descriptor(spec: ProxSpec, x_bar, v_bar) -> SecondOrderDescriptor:
    """Descriptor (Q, S, aff S, lambda) of phi at the stationary pair (x, v)."""
    x = np.asarray(x_bar, dtype=float)
    v = np.asarray(v_bar, dtype=float)
    if not subgradient_contains(spec, x, v, tol=1e-8):
        raise CatalogError("v_bar is not a subgradient of phi at x_bar")
    n = spec.n
    if spec.kind == "zero":
        return SecondOrderDescriptor(
            SymMatrix.zeros(n), PolyhedralCone.full(n), Subspace.full(n), np.zeros(n)
        )
    if spec.kind == "l1":
        w = spec.weight
        bt = BOUNDARY_TOL * max(1.0, w)
        gens, lins = [], []
        for i in range(n):
            e = np.eye(n)[i]
            if abs(x[i]) > 1e-12:
                lins.append(e)
            elif abs(v[i] - w) <= bt:
                gens.append(e)
            elif abs(v[i] + w) <= bt:
                gens.append(-e)
        cone, aff = _cone_and_aff(gens, lins, n)
        return SecondOrderDescriptor(SymMatrix.zeros(n), cone, aff, v.copy())
    if spec.kind == "indicator_orthant":
        gens, lins = [], []
        for i in range(n):
            e = np.eye(n)[i]
            if x[i] > 1e-12:
                lins.append(e)
            elif abs(v[i]) <= BOUNDARY_TOL:
                gens.append(e)
        cone, aff = _cone_and_aff(gens, lins, n)
        return SecondOrderDescriptor(SymMatrix.zeros(n), cone, aff, v.copy())
    if spec.kind == "indicator_abs_cone":
        cone_k = PolyhedralCone.from_generators(np.array([[1.0, 1.0], [1.0, -1.0]]))
        t_cone = tangent_cone_at(cone_k, x)
        a, e = cone_hrep(t_cone)
        if float(np.linalg.norm(v)) > BOUNDARY_TOL:
            e = np.vstack([e, v.reshape(1, -1)]) if e.shape[0] else v.reshape(1, -1)
        crit = cone_from_halfspaces(a, e, 2)
        spanning = list(crit.generators) + list(crit.lineality.basis.T)
        aff = orthonormalize(spanning, tol=1e-12) if spanning else Subspace.trivial(2)
        return SecondOrderDescriptor(SymMatrix.zeros(2), crit, aff, v.copy())
    if spec.kind == "group_l2":
        w = spec.weight
        bt = BOUNDARY_TOL * max(1.0, w)
        gens, lins = [], []
        q = np.zeros((n, n))
        for b in spec.blocks:
            idx = list(b)
            xb, vb = x[idx], v[idx]
            nx = float(np.linalg.norm(xb))
            if nx > 1e-12:
                u = xb / nx
                q[np.ix_(idx, idx)] = (w / nx) * (np.eye(len(idx)) - np.outer(u, u))
                for i in idx:
                    lins.append(np.eye(n)[i])
            else:
                nv = float(np.linalg.norm(vb))
                if abs(nv - w) <= bt and nv > 0:
                    g = np.zeros(n)
                    g[idx] = vb / nv
                    gens.append(g)
        cone, aff = _cone_and_aff(gens, lins, n)
        return SecondOrderDescriptor(SymMatrix(q), cone, aff, v.copy())
    if spec.kind == "polyhedral_support":
        poly = spec._polytope()
        val = phi_value(spec, x)
        if not math.isfinite(val):
            raise CatalogError("support function infinite at x_bar")
        scale = 1.0 + abs(val)
        face_mask = poly.vertices @ x >= val - BOUNDARY_TOL * scale
        face_rays = poly.rays[np.abs(poly.rays @ x) <= BOUNDARY_TOL * scale] if poly.rays.shape[0] else None
        face = Polytope(poly.vertices[face_mask], face_rays)
        nc = normal_cone_at(face, v)
        spanning = list(nc.generators) + list(nc.lineality.basis.T)
        aff = orthonormalize(spanning, tol=1e-12) if spanning else Subspace.trivial(n)
        return SecondOrderDescriptor(SymMatrix.zeros(n), nc, aff, v.copy())
    if spec.kind == "support_arc_segment":
        if float(np.linalg.norm(x)) <= 1e-10 and float(np.linalg.norm(v)) <= 1e-10:
            gens = [np.array([-1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])]
            cone, aff = _cone_and_aff(gens, [], 3)
            return SecondOrderDescriptor(SymMatrix.zeros(3), cone, aff, np.zeros(3))
        if _in_arc_region(x, 0.0):
            return SecondOrderDescriptor(
                arc_segment_hessian(x), PolyhedralCone.full(3), Subspace.full(3), v.copy()
            )
        raise CatalogError("descriptor available at the origin or on the analytic region only")
    # support_sharp_cusp
    if float(np.linalg.norm(x)) <= 1e-10 and float(np.linalg.norm(v)) <= 1e-10:
        cone, aff = _cone_and_aff([np.array([0.0, -1.0])], [], 2)
        return SecondOrderDescriptor(SymMatrix.zeros(2), cone, aff, np.zeros(2))
    if x[1] < 0.0:
        return SecondOrderDescriptor(
            cusp_hessian(x), PolyhedralCone.full(2), Subspace.full(2), v.copy()
        )
    raise CatalogError("descriptor available at the origin or on the analytic region only")


# ---------------------------------------------------------------------------
# published diagnostic sequences
# ---------------------------------------------------------------------------

def example_sequence(spec: ProxSpec, k: int) -> SequencePoint:
    """k-th point of the set's diagnostic sequence with its analytic Hessian."""
    if k < 2:
        raise CatalogError("need k >= 2")
    if spec.kind == "support_arc_segment":
        r = math.sqrt(1.0 - 1.0 / k**2)
        x = np.array([1.0 / k**2, -r / k, 0.0])
        v = np.array([1.0 / k, 1.0 - r, 0.0])
        return SequencePoint(x, v, arc_segment_hessian(x))
    if spec.kind == "support_sharp_cusp":
        x = np.array([-1.0 / k**3, -1.0 / k])
        v = np.array([-1.0 / k**4, (2.0 / 3.0) / k**6])
        return SequencePoint(x, v, cusp_hessian(x))
    raise CatalogError(f"no published sequence for kind {spec.kind!r}")
