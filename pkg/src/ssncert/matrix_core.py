"""Dense symmetric-matrix and subspace algebra.

Carriers and primitives shared by the solver and the certification stack:
symmetric matrices with exact symmetrization on construction, orthonormal
subspaces with projectors, a self-contained cyclic-Jacobi eigensolver,
PSD orderings with measured margins, and the projected-inverse core
decomposition of admissible prox Jacobians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymMatrix",
    "Subspace",
    "CoreDecomposition",
    "orthonormalize",
    "sym_eig",
    "min_eig_on_subspace",
    "psd_margin",
    "psd_order",
    "range_of",
    "core_decompose",
]

SYM_REPAIR_TOL = 1e-8
PSD_DEFAULT_TOL = 1e-9
RANK_REL_TOL = 1e-10
RANK_ABS_FLOOR = 1e-12


def _square(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Dense symmetric matrix.

    Construction averages the input with its transpose; asymmetry beyond
    ``SYM_REPAIR_TOL`` (relative to the largest entry) is an error, below it
    is silently repaired.  The stored array is read-only.
    """

    a: np.ndarray

    def __post_init__(self):
        a = _square(self.a)
        gap = float(np.max(np.abs(a - a.T)))
        scale = max(1.0, float(np.max(np.abs(a))))
        if gap > SYM_REPAIR_TOL * scale:
            raise ValueError(f"asymmetry {gap:.3e} exceeds repair tolerance")
        sym = (a + a.T) / 2.0
        sym.flags.writeable = False
        object.__setattr__(self, "a", sym)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n: int) -> "SymMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def diagonal(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def __repr__(self) -> str:
        return f"SymMatrix(n={self.n})"


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^n stored as orthonormal basis columns.

    ``basis`` has shape (n, k); k = 0 represents the trivial subspace {0}.
    """

    n: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != self.n:
            raise ValueError(f"basis shape {b.shape} incompatible with n={self.n}")
        k = b.shape[1]
        if k:
            gram_err = float(np.max(np.abs(b.T @ b - np.eye(k))))
            if gram_err > 1e-12:
                raise ValueError(f"basis not orthonormal (gram error {gram_err:.3e})")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, np.eye(n))

    @classmethod
    def trivial(cls, n: int) -> "Subspace":
        return cls(n, np.zeros((n, 0)))

    def projector(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((self.n, self.n))
        return self.basis @ self.basis.T

    def contains_vector(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        resid = v - self.basis @ (self.basis.T @ v) if self.dim else v
        return float(np.linalg.norm(resid)) <= tol * (1.0 + float(np.linalg.norm(v)))

    def contains(self, other: "Subspace", tol: float = 1e-9) -> bool:
        """True when every basis vector of ``other`` lies in this subspace."""
        if other.dim == 0:
            return True
        p = self.projector()
        resid = other.basis - p @ other.basis
        return float(np.max(np.linalg.norm(resid, axis=0))) <= tol

    def __repr__(self) -> str:
        return f"Subspace(n={self.n}, dim={self.dim})"


def orthonormalize(vectors, tol: float = 1e-12) -> Subspace:
    """Orthonormal basis of span(vectors) by modified Gram-Schmidt.

    Vectors whose residual norm after deflation against the accepted basis
    is at most ``tol`` are dropped.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    vs = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if not vs:
        raise ValueError("need at least one vector (use Subspace.trivial for {0})")
    n = vs[0].shape[0]
    basis: list[np.ndarray] = []
    for v in vs:
        if v.shape[0] != n:
            raise ValueError(f"dimension mismatch: expected {n}, got {v.shape[0]}")
        w = v.copy()
        for _ in range(2):  # second pass restores orthogonality lost to cancellation
            for b in basis:
                w -= (b @ w) * b
        nrm = float(np.linalg.norm(w))
        if nrm <= tol:
            continue
        basis.append(w / nrm)
    if not basis:
        return Subspace.trivial(n)
    return Subspace(n, np.column_stack(basis))


def sym_eig(a, tol: float = 1e-13, max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and orthonormal eigenvector
    columns, so that ``a ~ v @ diag(w) @ v.T``.  Sweeps stop once the
    off-diagonal Frobenius mass drops below ``tol * ||a||_F``.  Self-contained
    on purpose: adequate for the desk scale (n <= 200) this library targets.
    """
    A = np.array(a, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("sym_eig expects a square matrix")
    V = np.eye(n)
    if n == 1:
        return A[0, :1].copy(), V
    fro = float(np.linalg.norm(A))
    if fro == 0.0:
        return np.zeros(n), V
    skip = 1e-18 * fro
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off2 = float(np.sum(A[mask] ** 2))
        if off2 <= (tol * fro) ** 2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                # symmetric Schur 2x2: pick the smaller rotation angle
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p].copy()
                rq = A[q].copy()
                A[p] = c * rp - s * rq
                A[q] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def min_eig_on_subspace(m: SymMatrix, s: Subspace) -> float:
    """Smallest eigenvalue of m restricted to the subspace s.

    Equals the minimum of <h, M h> over unit h in s; independent of the
    orthonormal basis chosen for s.  Raises on the trivial subspace, where
    the restriction is vacuous (callers treat the bound as holding with
    sigma = +inf).
    """
    if m.n != s.n:
        raise ValueError(f"dimension mismatch: matrix n={m.n}, subspace n={s.n}")
    if s.dim == 0:
        raise ValueError("trivial subspace: restricted bound is vacuous")
    b = s.basis
    w, _ = sym_eig(b.T @ m.a @ b)
    return float(w[0])


def psd_margin(m1: SymMatrix, m2: SymMatrix) -> float:
    """lambda_min(m1 - m2): nonnegative (up to tolerance) iff m1 >= m2."""
    if m1.n != m2.n:
        raise ValueError("dimension mismatch")
    w, _ = sym_eig(m1.a - m2.a)
    return float(w[0])


def psd_order(m1: SymMatrix, m2: SymMatrix, tol: float = PSD_DEFAULT_TOL) -> bool:
    """True iff m1 - m2 is positive semidefinite within tol."""
    return psd_margin(m1, m2) >= -tol


def range_of(m: SymMatrix, tol: float = RANK_REL_TOL) -> Subspace:
    """Range of a PSD matrix as a Subspace.

    Eigenvectors with eigenvalue above ``tol * lambda_max`` (absolute floor
    ``RANK_ABS_FLOOR`` when lambda_max vanishes) span the range; the relative
    threshold avoids spurious rank from round-off.
    """
    w, v = sym_eig(m.a)
    if w[0] < -tol:
        raise ValueError(f"matrix is not PSD within tol (lambda_min={w[0]:.3e})")
    lmax = float(w[-1])
    cutoff = max(tol * lmax, RANK_ABS_FLOOR) if lmax > 0 else RANK_ABS_FLOOR
    cols = v[:, w > cutoff]
    if cols.shape[1] == 0:
        return Subspace.trivial(m.n)
    return Subspace(m.n, cols)


@dataclass(frozen=True, eq=False)
class CoreDecomposition:
    """Projected-inverse representation D = P (I + tau*core)^(-1) P.

    ``range`` carries the projector P onto the range of the source matrix,
    ``core`` the symmetric matrix A with range(A) inside range(D).
    """

    range: Subspace
    core: SymMatrix
    tau: float

    def reconstruct(self) -> np.ndarray:
        p = self.range.projector()
        inv = np.linalg.inv(np.eye(self.range.n) + self.tau * self.core.a)
        return p @ inv @ p


def core_decompose(d: SymMatrix, tau: float, rho: float = 0.0) -> CoreDecomposition:
    """Write an admissible prox Jacobian D as P (I + tau*A)^(-1) P.

    Requires 0 <= D <= (1/(1 - tau*rho)) I within 1e-10.  On the positive
    eigenblock U diag(lam) U^T the core is A = (1/tau) U (lam^(-1) - 1) U^T,
    which satisfies range(A) subset range(D) and A + rho*I >= 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tau * rho >= 1:
        raise ValueError("need tau*rho < 1")
    bound = 1.0 / (1.0 - tau * rho)
    w, v = sym_eig(d.a)
    if w[0] < -1e-10:
        raise ValueError(f"negative eigenvalue {w[0]:.3e} beyond tolerance")
    if w[-1] > bound + 1e-10:
        raise ValueError(
            f"eigenvalue {w[-1]:.6e} exceeds admissible bound {bound:.6e}"
        )
    lmax = float(w[-1])
    cutoff = max(RANK_REL_TOL * lmax, RANK_ABS_FLOOR) if lmax > 0 else RANK_ABS_FLOOR
    mask = w > cutoff
    if not np.any(mask):
        return CoreDecomposition(Subspace.trivial(d.n), SymMatrix.zeros(d.n), tau)
    lam = np.clip(w[mask], cutoff, bound)
    u = v[:, mask]
    core = SymMatrix((u * ((1.0 / lam - 1.0) / tau)) @ u.T)
    return CoreDecomposition(Subspace(d.n, u), core, tau)
