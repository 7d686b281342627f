"""Composite problems and their first-order residual maps.

A composite problem is min f(x) + phi(x) with smooth f (quadratic data or
callbacks) and a catalog phi.  This module evaluates the natural residual
x - prox(x - tau grad f(x)), the normal map grad f(prox(z)) + (z - prox(z))/tau,
and the generalized-derivative families of both maps built from the finite
Bouligand enumeration of the prox.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matrix_core import SymMatrix
from .prox_catalog import ProxSpec, bd_prox_set, phi_value, prox_eval

__all__ = [
    "QuadraticObjective",
    "CallbackObjective",
    "CompositeProblem",
    "StationaryTriple",
    "natural_residual",
    "normal_map",
    "m_nor_set",
    "m_nat_set",
]


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """f(x) = 0.5 <x, A x> - <b, x> with symmetric A."""

    a: SymMatrix
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).copy()
        if b.shape != (self.a.n,):
            raise ValueError("b has wrong dimension")
        b.flags.writeable = False
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.n

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ self.a.a @ x) - float(self.b @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.a.a @ x - self.b

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.a.a


@dataclass(frozen=True, eq=False)
class CallbackObjective:
    """Smooth objective given by value/gradient/hessian callbacks.

    Callbacks must supply exact Hessians and be safe for concurrent calls;
    certification verdicts are only as good as the supplied derivatives.
    """

    n: int
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    hessian_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, x: np.ndarray) -> float:
        return float(self.value_fn(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient_fn(x), dtype=float)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.hessian_fn(x), dtype=float)


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """(f, phi, tau) with tau * rho(phi) < 1."""

    f: QuadraticObjective | CallbackObjective
    phi: ProxSpec
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tau * self.phi.rho >= 1:
            raise ValueError("need tau * rho < 1")
        if self.f.n != self.phi.n:
            raise ValueError("f and phi dimensions differ")

    @property
    def n(self) -> int:
        return self.phi.n

    @classmethod
    def quadratic(cls, a, b, phi: ProxSpec, tau: float) -> "CompositeProblem":
        a = a if isinstance(a, SymMatrix) else SymMatrix(np.asarray(a, dtype=float))
        return cls(QuadraticObjective(a, b), phi, tau)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.f.value(x) + phi_value(self.phi, x)

    def prox(self, z) -> np.ndarray:
        return prox_eval(self.phi, self.tau, z)

    def to_dict(self) -> dict:
        if not isinstance(self.f, QuadraticObjective):
            raise ValueError("only quadratic objectives serialize to problem files")
        return {
            "schema_version": 1,
            "f": {"type": "quadratic", "A": self.f.a.a.tolist(), "b": self.f.b.tolist()},
            "phi": self.phi.to_dict(),
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompositeProblem":
        fspec = d["f"]
        if fspec.get("type") != "quadratic":
            raise ValueError(f"unsupported objective type {fspec.get('type')!r}")
        phi = ProxSpec.from_dict(d["phi"])
        return cls.quadratic(np.array(fspec["A"], dtype=float), np.array(fspec["b"], dtype=float), phi, float(d["tau"]))


@dataclass(frozen=True, eq=False)
class StationaryTriple:
    """(x, v, z) with v = -grad f(x), z = x + tau v, and x = prox(z)."""

    x_bar: np.ndarray
    v_bar: np.ndarray
    z_bar: np.ndarray

    @classmethod
    def at(cls, p: CompositeProblem, x_bar, tol: float = 1e-9) -> "StationaryTriple":
        x = np.asarray(x_bar, dtype=float)
        v = -p.f.gradient(x)
        z = x + p.tau * v
        gap = float(np.linalg.norm(x - p.prox(z)))
        if gap > tol:
            raise ValueError(f"point is not stationary: ||x - prox(z)|| = {gap:.3e}")
        return cls(x, v, z)


def natural_residual(p: CompositeProblem, x) -> np.ndarray:
    """F_nat(x) = x - prox(x - tau * grad f(x)); zero exactly at stationarity."""
    x = np.asarray(x, dtype=float)
    return x - p.prox(x - p.tau * p.f.gradient(x))


def normal_map(p: CompositeProblem, z) -> np.ndarray:
    """F_nor(z) = grad f(prox(z)) + (z - prox(z)) / tau."""
    z = np.asarray(z, dtype=float)
    px = p.prox(z)
    return p.f.gradient(px) + (z - px) / p.tau


def m_nor_set(p: CompositeProblem, z) -> list[np.ndarray]:
    """Generalized derivatives of the normal map at z.

    One matrix grad^2 f(prox(z)) D + (I - D)/tau per enumerated Bouligand
    element D, in enumeration order.  Clarke elements are convex combinations
    formed downstream.
    """
    z = np.asarray(z, dtype=float)
    px = p.prox(z)
    hess = p.f.hessian(px)
    eye = np.eye(p.n)
    return [hess @ d.a + (eye - d.a) / p.tau for d in bd_prox_set(p.phi, p.tau, z)]


def m_nat_set(p: CompositeProblem, x) -> list[np.ndarray]:
    """Generalized derivatives of the natural residual at x.

    One matrix I - D (I - tau grad^2 f(x)) per Bouligand element D of the
    prox at x - tau grad f(x); at stationary triples these are tau times the
    transposes of the m_nor_set elements, in the same order.
    """
    x = np.asarray(x, dtype=float)
    hess = p.f.hessian(x)
    eye = np.eye(p.n)
    w = x - p.tau * p.f.gradient(x)
    return [eye - d.a @ (eye - p.tau * hess) for d in bd_prox_set(p.phi, p.tau, w)]
