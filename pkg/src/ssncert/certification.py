"""Second-order regularity certification battery.

Runs the equivalence cross-checks at a stationary point: the restricted
second-order bound (SSOSC), the generalized-Jacobian bound over Bouligand
elements and over the Clarke hull, the structural projected-inverse
conditions P1/P2, invertibility of the normal-map derivative family,
sampled strong-metric-regularity probes of the three residual maps, a
quadratic-growth probe, and a perturbation-stability test.

Taxonomy: "certified" verdicts come only from finite exact enumerations;
sampling gives "probe" verdicts, and a probe never overturns a certificate
(contradictions are logged as warnings with witnesses).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .matrix_core import SymMatrix, Subspace, core_decompose, min_eig_on_subspace, psd_margin
from .prox_catalog import (
    EnumerationUnavailable,
    ProxSpec,
    SecondOrderDescriptor,
    bd_prox_set,
    phi_value,
    second_order_descriptor,
)
from .residual_maps import (
    CompositeProblem,
    StationaryTriple,
    m_nor_set,
    natural_residual,
    normal_map,
)

__all__ = [
    "ConditionVerdict",
    "CertificationReport",
    "CrossCheckOptions",
    "check_ssosc",
    "check_jacobian_condition",
    "clarke_hull_probe",
    "check_P1",
    "check_P2",
    "bd_regularity",
    "smr_probe",
    "perturbation_stability",
    "cross_check",
    "problem_digest",
]

CONDITION_IDS = (
    "i",
    "ii_growth",
    "iii_smr_subdiff",
    "iv_smr_nor",
    "v_cd",
    "vi_bd",
    "vii_bd_gj",
    "viii_cd_gj",
    "ix_nbhd_gj",
    "x_smr_nat",
    "P1",
    "P2",
)
TOL_POS = 1e-9
PSD_TOL = 1e-9
SMR_FLOOR = 1e-6
HULL_MATCH_TOL = 1e-8


@dataclass
class ConditionVerdict:
    id: str
    status: str  # certified_true | certified_false | probe_true | probe_false | not_applicable
    sigma: float | None = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in CONDITION_IDS:
            raise ValueError(f"unknown condition id {self.id!r}")

    @property
    def truth(self) -> bool | None:
        if self.status in ("certified_true", "probe_true"):
            return True
        if self.status in ("certified_false", "probe_false"):
            return False
        return None

    @property
    def certified(self) -> bool:
        return self.status.startswith("certified")

    def to_dict(self) -> dict:
        sigma = None
        if self.sigma is not None:
            sigma = self.sigma if math.isfinite(self.sigma) else "inf"
        return {"id": self.id, "status": self.status, "sigma": sigma, "detail": self.detail}


@dataclass
class CertificationReport:
    verdicts: list[ConditionVerdict]
    consensus: str  # "consistent" | "inconsistent"
    inconsistent_ids: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    problem_hash: str = ""

    def verdict(self, cond_id: str) -> ConditionVerdict:
        for v in self.verdicts:
            if v.id == cond_id:
                return v
        raise KeyError(cond_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "problem_hash": self.problem_hash,
            "consensus": self.consensus,
            "inconsistent_ids": self.inconsistent_ids,
            "notes": self.notes,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


# throughput helper for the sampling loops: LAPACK min-eigenvalue; the
# spec-facing operations in matrix_core keep the self-contained Jacobi path
def _fast_min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


def _bound_margin(hess: np.ndarray, ds: list[np.ndarray], tau: float, sigma: float) -> float:
    """min over D of lambda_min(D H D + (D - D^2)/tau - sigma D^2).

    The matrix vanishes identically off range(D), so the unrestricted
    eigenvalue test equals the range-restricted one (the extra eigenvalues
    are exact zeros).
    """
    worst = math.inf
    for d in ds:
        d2 = d @ d
        m = d @ hess @ d + (d - d2) / tau - sigma * d2
        worst = min(worst, _fast_min_eig(m))
    return worst


def _sigma_bisect(hess: np.ndarray, ds: list[np.ndarray], tau: float) -> tuple[float | None, dict]:
    """Largest sigma passing the generalized-Jacobian bound, by bisection.

    Returns (sigma, detail); sigma is None when no positive sigma passes and
    +inf when the bound is vacuous (all D vanish).  The reported value is the
    lower bisection endpoint at 1e-10 relative width (conservative).
    """
    if max((float(np.max(np.abs(d))) for d in ds), default=0.0) <= 1e-14:
        return math.inf, {"vacuous": True}
    lo = 1e-12
    if _bound_margin(hess, ds, tau, lo) < -PSD_TOL:
        return None, {"margin_at_floor": _bound_margin(hess, ds, tau, lo)}
    hi = 1.0
    for _ in range(80):
        if _bound_margin(hess, ds, tau, hi) < -PSD_TOL:
            break
        hi *= 2.0
    else:
        return math.inf, {"vacuous": True}
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if _bound_margin(hess, ds, tau, mid) >= -PSD_TOL:
            lo = mid
        else:
            hi = mid
    return lo, {"margin_at_sigma": _bound_margin(hess, ds, tau, lo)}


def check_ssosc(desc: SecondOrderDescriptor, hess_f: SymMatrix, tol_pos: float = TOL_POS) -> ConditionVerdict:
    """Restricted second-order bound: <h, (H + Q) h> >= sigma ||h||^2 on aff(S).

    sigma is the smallest restricted eigenvalue; a trivial affine hull makes
    the condition vacuous (sigma = +inf).
    """
    if hess_f.n != desc.q.n:
        raise ValueError("dimension mismatch between Hessian and descriptor")
    if desc.aff_s.dim == 0:
        return ConditionVerdict("i", "certified_true", math.inf, {"vacuous": True})
    sigma = min_eig_on_subspace(SymMatrix(hess_f.a + desc.q.a), desc.aff_s)
    status = "certified_true" if sigma > tol_pos else "certified_false"
    return ConditionVerdict("i", status, sigma, {"aff_dim": desc.aff_s.dim})


def check_jacobian_condition(
    p: CompositeProblem,
    st: StationaryTriple,
    sigma_grid: tuple[float, float] | None = None,
    d_set: list[SymMatrix] | None = None,
    exhaustive: bool = True,
) -> ConditionVerdict:
    """Bouligand-set bound D H D + (D - D^2)/tau >= sigma D^2 for all D.

    Reports the largest admissible sigma (bisection, conservative endpoint).
    The verdict is certified only when the enumeration is exhaustive;
    callers may pass a known partial d_set with exhaustive=False to probe.
    """
    if d_set is None:
        d_set = bd_prox_set(p.phi, p.tau, st.z_bar)
    hess = p.f.hessian(st.x_bar)
    ds = [d.a for d in d_set]
    if sigma_grid is not None:
        lo, hi = sigma_grid
        margin = _bound_margin(hess, ds, p.tau, lo)
        sigma, detail = _sigma_bisect(hess, ds, p.tau)
        detail["margin_at_grid_lo"] = margin
        detail["grid"] = [lo, hi]
    else:
        sigma, detail = _sigma_bisect(hess, ds, p.tau)
    detail["n_elements"] = len(ds)
    detail["exhaustive"] = exhaustive
    ok = sigma is not None and sigma > TOL_POS
    prefix = "certified" if exhaustive else "probe"
    return ConditionVerdict("vii_bd_gj", f"{prefix}_{'true' if ok else 'false'}", sigma, detail)


def clarke_hull_probe(
    p: CompositeProblem,
    st: StationaryTriple,
    sigma: float,
    d_set: list[SymMatrix],
    samples: int = 1000,
    seed: int = 0,
) -> tuple[bool, float, list[float] | None]:
    """Sampled convex combinations of the enumerated elements tested at sigma.

    Returns (all passed, worst margin, witness weights of the worst case).
    """
    if not math.isfinite(sigma):
        return True, math.inf, None
    rng = np.random.default_rng(seed)
    hess = p.f.hessian(st.x_bar)
    k = len(d_set)
    stack = np.stack([d.a for d in d_set])
    worst = math.inf
    witness = None
    weights = rng.exponential(size=(samples, k))
    weights /= weights.sum(axis=1, keepdims=True)
    combos = np.einsum("sk,kij->sij", weights, stack)
    d2 = combos @ combos
    mats = combos @ hess @ combos + (combos - d2) / p.tau - sigma * d2
    eigs = np.linalg.eigvalsh(mats)[:, 0]
    idx = int(np.argmin(eigs))
    worst = float(eigs[idx])
    witness = weights[idx].tolist() if worst < -PSD_TOL else None
    return worst >= -PSD_TOL, worst, witness


def check_P1(
    d_set: list[SymMatrix],
    desc: SecondOrderDescriptor,
    tau: float,
    rho: float = 0.0,
    exhaustive: bool = True,
) -> ConditionVerdict:
    """Projected-inverse structure of every enumerated element.

    Each D must decompose as P (I + tau*A)^(-1) P with range(D) inside
    aff(S) and core A >= P Q P on its range.
    """
    per_d = []
    ok = True
    for d in d_set:
        dec = core_decompose(d, tau, rho)
        in_aff = desc.aff_s.contains(dec.range, 1e-9)
        proj = dec.range.projector()
        margin = psd_margin(dec.core, SymMatrix(proj @ desc.q.a @ proj))
        good = in_aff and margin >= -PSD_TOL
        ok = ok and good
        per_d.append({"range_dim": dec.range.dim, "in_aff": in_aff, "core_margin": margin})
    prefix = "certified" if exhaustive else "probe"
    return ConditionVerdict("P1", f"{prefix}_{'true' if ok else 'false'}", None, {"per_d": per_d})


def _project_simplex(w: np.ndarray) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(w) + 1)
    cond = u - css / ks > 0
    k = int(np.max(np.nonzero(cond)[0])) + 1 if np.any(cond) else 1
    theta = css[k - 1] / k
    return np.maximum(w - theta, 0.0)


def check_P2(
    desc: SecondOrderDescriptor,
    d_set: list[SymMatrix],
    tau: float,
    exhaustive: bool = True,
) -> ConditionVerdict:
    """Membership of P = Pi_A (I + tau Q)^(-1) Pi_A in the hull of the enumeration.

    The convex-hull feasibility problem is a least-squares over the weight
    simplex, solved by accelerated projected gradient; the match tolerance is
    1e-8 in Frobenius norm (exact at desk scale).
    """
    n = desc.q.n
    proj = desc.aff_s.projector()
    target = proj @ np.linalg.inv(np.eye(n) + tau * desc.q.a) @ proj
    k = len(d_set)
    if k == 0:
        return ConditionVerdict("P2", "not_applicable", None, {"reason": "empty enumeration"})
    x = np.stack([d.a.ravel() for d in d_set])  # (k, n^2)
    t = target.ravel()
    gram = x @ x.T
    lip = max(float(np.linalg.eigvalsh(gram)[-1]), 1e-30)
    w = np.full(k, 1.0 / k)
    y = w.copy()
    momentum = 1.0
    for _ in range(10_000):
        grad = gram @ y - x @ t
        w_new = _project_simplex(y - grad / lip)
        momentum_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum**2))
        y = w_new + (momentum - 1.0) / momentum_new * (w_new - w)
        if float(np.linalg.norm(w_new - w)) <= 1e-15:
            w = w_new
            break
        w, momentum = w_new, momentum_new
    mismatch = float(np.linalg.norm(x.T @ w - t))
    ok = mismatch <= HULL_MATCH_TOL
    prefix = "certified" if exhaustive else "probe"
    detail = {"mismatch": mismatch, "weights": w.tolist()}
    return ConditionVerdict("P2", f"{prefix}_{'true' if ok else 'false'}", None, detail)


def bd_regularity(m_set: list[np.ndarray]) -> ConditionVerdict:
    """Invertibility of every matrix in the normal-map derivative family."""
    sigmas = []
    ok = True
    for m in m_set:
        sv = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
        sigmas.append(float(sv[-1]))
        norm = float(sv[0])
        if norm == 0.0 or sv[-1] < 1e-10 * norm:
            ok = False
    status = "certified_true" if ok else "certified_false"
    return ConditionVerdict("vi_bd", status, None, {"sigma_min": sigmas})


_SMR_IDS = {"nat": "x_smr_nat", "nor": "iv_smr_nor", "subdiff": "iii_smr_subdiff"}


def smr_probe(
    map_kind: str,
    p: CompositeProblem,
    center,
    radius: float,
    pairs: int = 10_000,
    seed: int = 0,
) -> ConditionVerdict:
    """Sampled lower Lipschitz bound sigma ||y - z|| <= ||F(y) - F(z)||.

    Pairs are drawn in three strata: independent points in the ball, nearby
    pairs at log-spaced separations, and pairs clustered around the center at
    log-spaced scales (the last catches degeneracy exactly at the base point).
    For the subdifferential map the samples are graph pairs (x, grad f(x)+v)
    obtained by prox inversion of ball points.
    """
    if map_kind not in _SMR_IDS:
        raise ValueError(f"map_kind must be one of {sorted(_SMR_IDS)}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if pairs < 1000:
        raise ValueError("need at least 10^3 sampled pairs")
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=float)
    n = center.shape[0]

    def unit() -> np.ndarray:
        u = rng.standard_normal(n)
        return u / np.linalg.norm(u)

    def ball() -> np.ndarray:
        return center + radius * rng.random() ** (1.0 / n) * unit()

    if map_kind == "nat":
        fmap = lambda u: (u, natural_residual(p, u))
    elif map_kind == "nor":
        fmap = lambda u: (u, normal_map(p, u))
    else:
        def fmap(w):
            x = p.prox(w)
            v = (w - x) / p.tau
            return x, p.f.gradient(x) + v

    sigma = math.inf
    witness = None
    for i in range(pairs):
        stratum = i % 3
        if stratum == 0:
            w1, w2 = ball(), ball()
        elif stratum == 1:
            w1 = ball()
            w2 = w1 + radius * 10.0 ** rng.uniform(-6, 0) * unit()
        else:
            s = radius * 10.0 ** rng.uniform(-6, 0)
            w1 = center + s * rng.random() * unit()
            w2 = center + s * rng.random() * unit()
        x1, f1 = fmap(w1)
        x2, f2 = fmap(w2)
        gap = float(np.linalg.norm(x1 - x2))
        if gap <= 1e-14 * (1.0 + radius):
            continue
        q = float(np.linalg.norm(f1 - f2)) / gap
        if q < sigma:
            sigma = q
            witness = (x1.tolist(), x2.tolist())
    ok = sigma >= SMR_FLOOR
    detail: dict = {"pairs": pairs, "radius": radius}
    if not ok:
        detail["witness"] = witness
    return ConditionVerdict(_SMR_IDS[map_kind], f"probe_{'true' if ok else 'false'}", sigma, detail)


def perturbation_stability(
    d: SymMatrix,
    b: SymMatrix,
    tau: float,
    sigma: float,
    trials: int = 20,
    delta: float = 1e-4,
    seed: int = 0,
) -> bool:
    """Stability of the Jacobian bound under PSD-preserving perturbations.

    Requires the unperturbed bound D B D + (D - D^2)/tau >= sigma D^2; checks
    that all sampled (D~, B~) within Frobenius distance delta satisfy the
    quartered bound sigma/4.  Non-PSD perturbations of D are rejection-resampled.
    """
    n = d.n
    base = _bound_margin(b.a, [d.a], tau, sigma)
    if base < -PSD_TOL:
        raise ValueError(f"unperturbed bound fails (margin {base:.3e})")
    rng = np.random.default_rng(seed)

    def sym_perturbation() -> np.ndarray:
        g = rng.standard_normal((n, n))
        e = (g + g.T) / 2.0
        return e * (delta * rng.random() / max(np.linalg.norm(e), 1e-300))

    for _ in range(trials):
        for _ in range(1000):
            d_tilde = d.a + sym_perturbation()
            if _fast_min_eig(d_tilde) >= -1e-14:
                break
        else:
            raise ValueError("could not sample a PSD perturbation of D")
        b_tilde = b.a + sym_perturbation()
        if _bound_margin(b_tilde, [d_tilde], tau, sigma / 4.0) < -PSD_TOL:
            return False
    return True


def problem_digest(p: CompositeProblem, st: StationaryTriple) -> str:
    try:
        payload = p.to_dict()
    except ValueError:
        payload = {
            "phi": p.phi.to_dict(),
            "tau": p.tau,
            "hess_at_x": np.asarray(p.f.hessian(st.x_bar)).tolist(),
        }
    payload["at"] = st.x_bar.tolist()
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class CrossCheckOptions:
    seed: int = 0
    smr_pairs: int = 1000
    smr_radius: float = 0.1
    growth_samples: int = 1000
    growth_radius: float = 1e-2
    hull_samples: int = 1000
    nbhd_points: int = 20
    nbhd_radius: float = 1e-3
    probes: bool = True
    d_set: tuple[SymMatrix, ...] | None = None  # known partial enumeration override
    exhaustive: bool | None = None


def _growth_probe(p: CompositeProblem, st: StationaryTriple, opts: CrossCheckOptions) -> ConditionVerdict:
    """Quadratic-growth sampling on the v = 0 slice around x_bar."""
    rng = np.random.default_rng(opts.seed + 1)
    n = p.n
    psi0 = p.objective(st.x_bar)
    sigma2 = math.inf
    witness = None
    for _ in range(opts.growth_samples):
        u = rng.standard_normal(n)
        u /= np.linalg.norm(u)
        r = opts.growth_radius * rng.random() ** (1.0 / n)
        x = st.x_bar + r * u
        psi = p.objective(x)
        if not math.isfinite(psi):
            continue
        q = 2.0 * (psi - psi0) / r**2
        if q < sigma2:
            sigma2 = q
            witness = x.tolist()
    ok = sigma2 >= SMR_FLOOR
    detail: dict = {"samples": opts.growth_samples, "radius": opts.growth_radius}
    if not ok:
        detail["witness"] = witness
    return ConditionVerdict("ii_growth", f"probe_{'true' if ok else 'false'}", sigma2, detail)


def _neighborhood_probe(p: CompositeProblem, st: StationaryTriple, opts: CrossCheckOptions) -> ConditionVerdict:
    """Re-runs the Jacobian bound at sampled points near z_bar (probe for ix)."""
    rng = np.random.default_rng(opts.seed + 2)
    n = p.n
    sigmas = []
    skipped = 0
    for _ in range(opts.nbhd_points):
        z = st.z_bar + opts.nbhd_radius * rng.standard_normal(n)
        try:
            ds = [d.a for d in bd_prox_set(p.phi, p.tau, z)]
        except EnumerationUnavailable:
            skipped += 1
            continue
        hess = p.f.hessian(p.prox(z))
        sigma, _ = _sigma_bisect(hess, ds, p.tau)
        sigmas.append(sigma if sigma is not None else -math.inf)
    if not sigmas:
        return ConditionVerdict("ix_nbhd_gj", "not_applicable", None, {"skipped": skipped})
    worst = min(sigmas)
    ok = worst > TOL_POS
    return ConditionVerdict(
        "ix_nbhd_gj",
        f"probe_{'true' if ok else 'false'}",
        None if math.isinf(worst) and worst < 0 else worst,
        {"points": len(sigmas), "skipped": skipped, "radius": opts.nbhd_radius},
    )


def cross_check(
    p: CompositeProblem,
    st: StationaryTriple,
    opts: CrossCheckOptions = CrossCheckOptions(),
) -> CertificationReport:
    """Full condition battery with consensus analysis.

    Certified verdicts of the restricted bound (i) and the Jacobian bounds
    (vii)/(viii) must agree when the structural conditions P1 and P2 are
    certified; a certified disagreement marks the report inconsistent (a
    library bug by the underlying equivalences).  When P1 or P2 fails, the
    divergence is expected and reported as a note.  Probes never trigger
    inconsistency.
    """
    notes: list[str] = []
    verdicts: list[ConditionVerdict] = []
    desc = second_order_descriptor(p.phi, st.x_bar, st.v_bar)
    hess = SymMatrix(np.asarray(p.f.hessian(st.x_bar), dtype=float))

    v_i = check_ssosc(desc, hess)
    verdicts.append(v_i)

    if opts.d_set is not None:
        d_set: list[SymMatrix] | None = list(opts.d_set)
        exhaustive = bool(opts.exhaustive) if opts.exhaustive is not None else False
    else:
        try:
            d_set = bd_prox_set(p.phi, p.tau, st.z_bar)
            exhaustive = True if opts.exhaustive is None else bool(opts.exhaustive)
        except EnumerationUnavailable:
            d_set = None
            exhaustive = False
            notes.append("Bouligand enumeration unavailable at z_bar; Jacobian-side conditions skipped")

    if d_set is not None:
        v_p1 = check_P1(d_set, desc, p.tau, p.phi.rho, exhaustive=exhaustive)
        v_p2 = check_P2(desc, d_set, p.tau, exhaustive=exhaustive)
        v_vii = check_jacobian_condition(p, st, d_set=d_set, exhaustive=exhaustive)
        hull_ok, hull_margin, hull_witness = clarke_hull_probe(
            p, st, v_vii.sigma if v_vii.sigma is not None else 0.0, d_set, opts.hull_samples, opts.seed
        )
        if v_vii.truth is False:
            # a failing Bouligand element already lies in the Clarke hull
            v_viii = ConditionVerdict(
                "viii_cd_gj",
                v_vii.status,
                v_vii.sigma,
                {"derived": "Bouligand failure implies hull failure"},
            )
        elif exhaustive and v_p1.status == "certified_true" and v_vii.certified:
            v_viii = ConditionVerdict(
                "viii_cd_gj",
                "certified_true",
                v_vii.sigma,
                {"promotion": "hull closure under certified P1", "hull_margin": hull_margin},
            )
            if not hull_ok:
                notes.append(
                    f"warning: hull sampling contradicts the certified bound (margin {hull_margin:.3e}, witness {hull_witness}); certificate retained"
                )
        else:
            v_viii = ConditionVerdict(
                "viii_cd_gj",
                f"probe_{'true' if hull_ok else 'false'}",
                v_vii.sigma,
                {"hull_margin": hull_margin, "hull_witness": hull_witness},
            )
        m_set = m_nor_set(p, st.z_bar) if opts.d_set is None else [
            np.asarray(p.f.hessian(st.x_bar)) @ d.a + (np.eye(p.n) - d.a) / p.tau for d in d_set
        ]
        v_vi = bd_regularity(m_set)
        if not exhaustive and v_vi.certified:
            v_vi = ConditionVerdict("vi_bd", v_vi.status.replace("certified", "probe"), v_vi.sigma, v_vi.detail)
        v_v = ConditionVerdict(
            "v_cd",
            v_viii.status,
            None,
            {"derived_from": "viii", "note": "hull invertibility implied by the hull bound"},
        )
        verdicts.extend([v_p1, v_p2, v_vii, v_viii, v_v, v_vi])
    else:
        for cid in ("P1", "P2", "vii_bd_gj", "viii_cd_gj", "v_cd", "vi_bd"):
            verdicts.append(ConditionVerdict(cid, "not_applicable", None, {"reason": "no enumeration"}))
        v_p1 = v_p2 = v_vii = v_viii = None  # type: ignore[assignment]

    if opts.probes:
        verdicts.append(_growth_probe(p, st, opts))
        verdicts.append(_neighborhood_probe(p, st, opts))
        verdicts.append(smr_probe("subdiff", p, st.z_bar, opts.smr_radius, opts.smr_pairs, opts.seed + 3))
        verdicts.append(smr_probe("nor", p, st.z_bar, opts.smr_radius, opts.smr_pairs, opts.seed + 4))
        verdicts.append(smr_probe("nat", p, st.x_bar, opts.smr_radius, opts.smr_pairs, opts.seed + 5))

    # consensus over the certified equivalence core {i, vii, viii}
    consensus = "consistent"
    inconsistent: list[str] = []
    if d_set is not None:
        structural_ok = v_p1.status == "certified_true" and v_p2.status == "certified_true"
        core = [v for v in (v_i, v_vii, v_viii) if v.certified]
        truths = {v.id: v.truth for v in core}
        if structural_ok and len(set(truths.values())) > 1:
            consensus = "inconsistent"
            inconsistent = sorted(truths)
        vi_verdict = next(v for v in verdicts if v.id == "vi_bd")
        if structural_ok and vi_verdict.status == "certified_false" and any(t for t in truths.values()):
            consensus = "inconsistent"
            inconsistent = sorted(set(inconsistent) | {"vi_bd"})
        if vi_verdict.truth and v_i.truth is False:
            notes.append(
                "expected divergence: strong second-order necessary condition fails; "
                "invertibility of the derivative family alone does not certify the restricted bound"
            )
        if not structural_ok and v_i.truth is not None and v_vii.truth is not None and v_i.truth != v_vii.truth:
            notes.append(
                "expected divergence: structural condition P1/P2 not certified, so the restricted "
                "bound and the Jacobian bound may legitimately differ"
            )
    return CertificationReport(
        verdicts=verdicts,
        consensus=consensus,
        inconsistent_ids=inconsistent,
        notes=notes,
        problem_hash=problem_digest(p, st),
    )
