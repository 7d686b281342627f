"""Semismooth Newton iteration on the normal map or the natural residual.

Each step solves M d = -F with M picked from the generalized-derivative
family at the current point, backtracks on the residual norm, and falls back
to a proximal-gradient step when the Newton direction stalls.  Traces record
iterates, residual norms, and the step type taken.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .residual_maps import CompositeProblem, m_nat_set, m_nor_set, natural_residual, normal_map

__all__ = [
    "SolverOptions",
    "SolveTrace",
    "NewtonBreakdown",
    "solve_normal_map",
    "solve_natural_residual",
    "rate_profile",
    "superlinear_flag",
]

ARMIJO = 1e-4
PIVOT_TOL = 1e-12


class NewtonBreakdown(RuntimeError):
    """Singular generalized Jacobian with the fallback disabled."""

    def __init__(self, matrix: np.ndarray):
        super().__init__("newton_breakdown: singular generalized Jacobian")
        self.matrix = matrix


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 100
    tol: float = 1e-11
    damping: float = 0.5
    min_step: float = 1e-8
    jacobian_pick: str = "first"  # "first" | "random"
    fallback: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.jacobian_pick not in ("first", "random"):
            raise ValueError("jacobian_pick must be 'first' or 'random'")


@dataclass
class SolveTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    step_types: list[str] = field(default_factory=list)
    converged: bool = False

    @property
    def solution(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1

    def to_dict(self) -> dict:
        quotients = rate_profile(self, self.iterates[-1]) if len(self.iterates) >= 2 else []
        rows = []
        for k, (r, _) in enumerate(zip(self.residual_norms, self.iterates)):
            rows.append(
                {
                    "k": k,
                    "residual": r,
                    "step_type": self.step_types[k] if k < len(self.step_types) else "",
                    "quotient": quotients[k] if k < len(quotients) else None,
                }
            )
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.residual_norms[-1],
            "solution": self.iterates[-1].tolist(),
            "table": rows,
        }


def _pick(mats: list[np.ndarray], opts: SolverOptions, rng: np.random.Generator) -> np.ndarray:
    if opts.jacobian_pick == "first" or len(mats) == 1:
        return mats[0]
    return mats[int(rng.integers(len(mats)))]


def _newton_direction(m: np.ndarray, r: np.ndarray) -> np.ndarray | None:
    """LU with partial pivoting; None when the smallest pivot signals singularity."""
    lu, piv = lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    scale = float(np.linalg.norm(m))
    if scale == 0.0 or np.min(pivots) <= PIVOT_TOL * scale:
        return None
    return lu_solve((lu, piv), -r, check_finite=False)


def _iterate(
    p: CompositeProblem,
    u0: np.ndarray,
    opts: SolverOptions,
    residual,
    jacobians,
    fallback_step,
) -> SolveTrace:
    rng = np.random.default_rng(opts.seed)
    trace = SolveTrace()
    u = np.asarray(u0, dtype=float).copy()
    r = residual(u)
    rn = float(np.linalg.norm(r))
    trace.iterates.append(u.copy())
    trace.residual_norms.append(rn)
    trace.step_types.append("initial")
    for _ in range(opts.max_iter):
        if rn <= opts.tol:
            trace.converged = True
            return trace
        d = None
        try:
            m = _pick(jacobians(u), opts, rng)
            d = _newton_direction(m, r)
        except Exception:
            if not opts.fallback:
                raise
        if d is None and not opts.fallback:
            raise NewtonBreakdown(m)
        candidate = None
        step_type = None
        if d is not None:
            t = 1.0
            while t >= opts.min_step:
                u_try = u + t * d
                r_try = residual(u_try)
                rn_try = float(np.linalg.norm(r_try))
                if rn_try <= (1.0 - ARMIJO * t) * rn:
                    candidate = (u_try, r_try, rn_try)
                    step_type = "newton" if t == 1.0 else "damped"
                    break
                t *= opts.damping
        if candidate is None and opts.fallback:
            u_try = fallback_step(u)
            r_try = residual(u_try)
            rn_try = float(np.linalg.norm(r_try))
            if rn_try <= rn * (1.0 + 1e-12):
                candidate = (u_try, r_try, rn_try)
                step_type = "fallback"
        if candidate is None:
            return trace  # stalled: honest non-converged trace
        u, r, rn = candidate
        trace.iterates.append(u.copy())
        trace.residual_norms.append(rn)
        trace.step_types.append(step_type)
    trace.converged = rn <= opts.tol
    return trace


def solve_normal_map(p: CompositeProblem, z0, opts: SolverOptions = SolverOptions()) -> SolveTrace:
    """Newton iteration z <- z - M^(-1) F_nor(z), M from the normal-map family."""

    def fallback(z: np.ndarray) -> np.ndarray:
        # proximal-gradient step re-lifted to z-space: the pre-prox point of
        # the next iterate is exactly x - tau grad f(x)
        x = p.prox(z)
        return x - p.tau * p.f.gradient(x)

    return _iterate(
        p,
        z0,
        opts,
        residual=lambda z: normal_map(p, z),
        jacobians=lambda z: m_nor_set(p, z),
        fallback_step=fallback,
    )


def solve_natural_residual(p: CompositeProblem, x0, opts: SolverOptions = SolverOptions()) -> SolveTrace:
    """Newton iteration on F_nat with the natural-residual derivative family."""

    def fallback(x: np.ndarray) -> np.ndarray:
        return p.prox(x - p.tau * p.f.gradient(x))

    return _iterate(
        p,
        x0,
        opts,
        residual=lambda x: natural_residual(p, x),
        jacobians=lambda x: m_nat_set(p, x),
        fallback_step=fallback,
    )


def rate_profile(trace: SolveTrace, ref) -> list[float]:
    """Convergence quotients ||u_{k+1} - ref|| / ||u_k - ref||.

    The profile is truncated at the first iterate that coincides with the
    reference (the quotient is undefined from there on); an exact-in-one-step
    trace therefore yields the single entry [0].
    """
    if len(trace.iterates) < 2:
        raise ValueError("need at least 2 iterates for a rate profile")
    ref = np.asarray(ref, dtype=float)
    dists = [float(np.linalg.norm(u - ref)) for u in trace.iterates]
    scale = 1.0 + float(np.linalg.norm(ref))
    profile: list[float] = []
    for k in range(len(dists) - 1):
        if dists[k] <= 1e-15 * scale:
            break
        profile.append(dists[k + 1] / dists[k])
    return profile


def superlinear_flag(profile: list[float]) -> bool:
    """True when the last three quotients strictly decrease and end at <= 0.1."""
    if len(profile) < 3:
        return len(profile) >= 1 and profile[-1] <= 0.1
    a, b, c = profile[-3:]
    return a > b > c and c <= 0.1
