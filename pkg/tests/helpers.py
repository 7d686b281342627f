"""Shared generators and independent oracles for the test suite.

Oracles here must stay independent of the library code paths they check:
they use plain numpy linear algebra, never the package's own solvers.
"""
from __future__ import annotations

import numpy as np

from ssncert.matrix_core import SymMatrix, Subspace, core_decompose, psd_margin


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_subspace(rng: np.random.Generator, n: int, k: int) -> Subspace:
    q = random_orthogonal(rng, n)
    return Subspace(n, q[:, :k])


def random_admissible_jacobian(
    rng: np.random.Generator, n: int, tau: float, rho: float, zero_prob: float = 0.4
) -> SymMatrix:
    """Random D with 0 <= D <= 1/(1 - tau*rho) I, some exactly-zero eigenvalues."""
    bound = 1.0 / (1.0 - tau * rho)
    lam = rng.uniform(0.0, bound, size=n)
    lam[rng.random(n) < zero_prob] = 0.0
    q = random_orthogonal(rng, n)
    return SymMatrix((q * lam) @ q.T)


def random_bounded_below(rng: np.random.Generator, n: int, tau: float) -> SymMatrix:
    """Random symmetric B with I + tau*B positive definite."""
    g = rng.standard_normal((n, n))
    b = (g + g.T) / 2.0
    lmin = float(np.linalg.eigvalsh(b)[0])
    if 1.0 + tau * lmin <= 1e-3:
        b = b * (0.95 / (tau * abs(lmin)))
    return SymMatrix(b)


def roundtrip_property(count: int, seed: int) -> float:
    """Max Frobenius reconstruction error over random admissible Jacobians."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, 9))
        tau = float(rng.uniform(0.1, 2.0))
        rho = float(rng.uniform(0.0, 0.9 / tau))
        d = random_admissible_jacobian(rng, n, tau, rho)
        dec = core_decompose(d, tau, rho)
        err = float(np.linalg.norm(dec.reconstruct() - d.a))
        worst = max(worst, err)
        assert psd_margin(dec.core, SymMatrix(-rho * np.eye(n))) >= -1e-10
    return worst


def projected_inverse_property(count: int, seed: int) -> float:
    """Min PSD margin of (I+B)^-1 - P_L (I + P_L B P_L)^-1 P_L over random (L, B)."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(count):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(0, n + 1))
        sub = random_subspace(rng, n, k)
        b = random_bounded_below(rng, n, 1.0)
        p = sub.projector()
        lhs = np.linalg.inv(np.eye(n) + b.a)
        rhs = p @ np.linalg.inv(np.eye(n) + p @ b.a @ p) @ p
        margin = psd_margin(SymMatrix(lhs), SymMatrix(rhs))
        worst = min(worst, margin)
    return worst


def convex_combination_closure_property(count: int, seed: int) -> float:
    """Min margin core >= P B P over random convex combinations of projected inverses."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(count):
        n = int(rng.integers(2, 7))
        tau = float(rng.uniform(0.2, 1.5))
        b = random_bounded_below(rng, n, tau)
        r = int(rng.integers(2, 5))
        mats = []
        for _ in range(r):
            k = int(rng.integers(0, n + 1))
            sub = random_subspace(rng, n, k)
            p = sub.projector()
            bump = rng.standard_normal((n, n))
            a_i = p @ (b.a + bump @ bump.T * rng.uniform(0, 1.0)) @ p
            mats.append(p @ np.linalg.inv(np.eye(n) + tau * a_i) @ p)
        weights = rng.exponential(size=r)
        weights /= weights.sum()
        combined = sum(w * m for w, m in zip(weights, mats))
        lmin_b = float(np.linalg.eigvalsh(b.a)[0])
        rho = max(0.0, -lmin_b) + 1e-12
        dec = core_decompose(SymMatrix(combined), tau, rho)
        p_r = dec.range.projector()
        margin = psd_margin(dec.core, SymMatrix(p_r @ b.a @ p_r))
        worst = min(worst, margin)
    return worst


def random_battery_instance(rng: np.random.Generator, n_max: int = 6):
    """Random quadratic + (l1 | orthant) instance with a margin-controlled spectrum.

    Returns (problem, x_bar, sigma_oracle) where sigma_oracle is the smallest
    eigenvalue of the Hessian restricted to the affine hull of the descriptor
    cone, computed independently with numpy from the construction pattern.
    The instance is regenerated until |sigma_oracle| >= 1e-4, keeping the
    battery verdicts away from tolerance boundaries.
    """
    from ssncert.prox_catalog import ProxSpec
    from ssncert.residual_maps import CompositeProblem

    while True:
        n = int(rng.integers(2, n_max + 1))
        q = random_orthogonal(rng, n)
        lam = rng.uniform(0.2, 3.0, n) * rng.choice([-1.0, 1.0], n, p=[0.35, 0.65])
        a = (q * lam) @ q.T
        tau = float(rng.uniform(0.3, 1.5))
        kind = rng.choice(["l1", "orthant"])
        x = np.zeros(n)
        v = np.zeros(n)
        aff_coords = []
        if kind == "l1":
            w = float(rng.uniform(0.4, 1.3))
            phi = ProxSpec.l1(n, w)
            for i in range(n):
                u = rng.random()
                if u < 0.4:  # x free
                    x[i] = rng.standard_normal() or 0.7
                    v[i] = w * np.sign(x[i])
                    aff_coords.append(i)
                elif u < 0.8:  # dual strictly interior
                    v[i] = w * rng.uniform(-0.8, 0.8)
                else:  # dual on the boundary (degenerate)
                    v[i] = w * rng.choice([-1.0, 1.0])
                    aff_coords.append(i)
        else:
            phi = ProxSpec.indicator_orthant(n)
            for i in range(n):
                u = rng.random()
                if u < 0.4:  # inactive
                    x[i] = rng.uniform(0.2, 2.0)
                    aff_coords.append(i)
                elif u < 0.8:  # strictly active
                    v[i] = -rng.uniform(0.2, 2.0)
                else:  # degenerate
                    aff_coords.append(i)
        b = a @ x + v
        problem = CompositeProblem.quadratic(a, b, phi, tau)
        if not aff_coords:
            sigma = np.inf
            return problem, x, sigma
        sub = a[np.ix_(aff_coords, aff_coords)]
        sigma = float(np.linalg.eigvalsh(sub)[0])
        if abs(sigma) >= 1e-4:
            return problem, x, sigma


def lasso_oracle(a: np.ndarray, b: np.ndarray, weight: float) -> np.ndarray:
    """Brute-force sign-enumeration minimizer of 0.5 <x,Ax> - <b,x> + w||x||_1.

    Requires A positive definite.  Enumerates supports; for each support the
    sign patterns are solved in one batched linear solve, then primal sign
    consistency and dual feasibility are checked.  Independent of the package
    solver by construction.
    """
    n = a.shape[0]
    best = None
    best_val = np.inf

    def objective(x):
        return 0.5 * x @ a @ x - b @ x + weight * np.abs(x).sum()

    for mask_bits in range(1 << n):
        support = [i for i in range(n) if mask_bits >> i & 1]
        k = len(support)
        if k == 0:
            if np.all(np.abs(b) <= weight + 1e-12):
                x = np.zeros(n)
                val = 0.0
                if val < best_val - 1e-15:
                    best, best_val = x, val
            continue
        idx = np.array(support)
        rest = np.array([i for i in range(n) if i not in support], dtype=int)
        a_ss = a[np.ix_(idx, idx)]
        signs = np.array(
            [[1.0 if bits >> j & 1 else -1.0 for j in range(k)] for bits in range(1 << k)]
        ).T  # (k, 2^k)
        rhs = b[idx][:, None] - weight * signs
        try:
            sols = np.linalg.solve(a_ss, rhs)
        except np.linalg.LinAlgError:
            continue
        ok = np.all(np.sign(sols) == signs, axis=0)
        if rest.size:
            grad_rest = a[np.ix_(rest, idx)] @ sols - b[rest][:, None]
            ok &= np.all(np.abs(grad_rest) <= weight + 1e-12, axis=0)
        for col in np.nonzero(ok)[0]:
            x = np.zeros(n)
            x[idx] = sols[:, col]
            val = objective(x)
            if val < best_val - 1e-15:
                best, best_val = x, val
    assert best is not None, "oracle found no candidate (A not PD?)"
    return best
