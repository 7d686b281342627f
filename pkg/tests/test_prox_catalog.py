import math

import numpy as np
import pytest

from ssncert.matrix_core import SymMatrix
from ssncert.prox_catalog import (
    CatalogError,
    EnumerationUnavailable,
    ProxSpec,
    bd_prox_set,
    example_sequence,
    phi_value,
    project_arc_segment_hull,
    project_cusp_set,
    prox_eval,
    second_order_descriptor,
    subgradient_contains,
)

ALL_CONVEX = [
    ProxSpec.zero(3),
    ProxSpec.l1(3, 0.7),
    ProxSpec.indicator_orthant(3),
    ProxSpec.indicator_abs_cone(),
    ProxSpec.group_l2([[0, 1], [2]], 1.3),
    ProxSpec.polyhedral_support([[0, 0], [1, 0], [0, 1], [1, 1]]),
    ProxSpec.support_arc_segment(),
    ProxSpec.support_sharp_cusp(),
]


def matrices_equal_as_sets(actual, expected, tol=1e-12):
    actual = [np.asarray(a) for a in actual]
    expected = [np.asarray(e) for e in expected]
    if len(actual) != len(expected):
        return False
    used = set()
    for a in actual:
        hit = None
        for j, e in enumerate(expected):
            if j not in used and np.max(np.abs(a - e)) <= tol:
                hit = j
                break
        if hit is None:
            return False
        used.add(hit)
    return True


class TestProxEval:
    def test_soft_threshold(self):
        spec = ProxSpec.l1(2, 1.0)
        np.testing.assert_allclose(prox_eval(spec, 1.0, [2.5, -0.3]), [1.5, 0.0], atol=1e-15)

    def test_abs_cone_zero_region(self):
        spec = ProxSpec.indicator_abs_cone()
        np.testing.assert_allclose(prox_eval(spec, 0.7, [-2.0, 1.0]), [0.0, 0.0])

    def test_orthant_clamp(self):
        spec = ProxSpec.indicator_orthant(2)
        np.testing.assert_allclose(prox_eval(spec, 2.0, [-1.0, 3.0]), [0.0, 3.0])

    def test_abs_cone_all_regions(self):
        spec = ProxSpec.indicator_abs_cone()
        np.testing.assert_allclose(prox_eval(spec, 1.0, [2.0, 1.0]), [2.0, 1.0])
        np.testing.assert_allclose(prox_eval(spec, 1.0, [0.0, 2.0]), [1.0, 1.0])
        np.testing.assert_allclose(prox_eval(spec, 1.0, [0.0, -2.0]), [1.0, -1.0])

    def test_nonexpansiveness_all_members(self):
        rng = np.random.default_rng(42)
        per_member = 10_000 // len(ALL_CONVEX) + 1
        for spec in ALL_CONVEX:
            tau = 0.8
            for _ in range(per_member):
                z1 = rng.standard_normal(spec.n) * 2.0
                z2 = rng.standard_normal(spec.n) * 2.0
                p1 = prox_eval(spec, tau, z1)
                p2 = prox_eval(spec, tau, z2)
                lhs = np.linalg.norm(p1 - p2)
                rhs = np.linalg.norm(z1 - z2) * (1 + 1e-12)
                assert lhs <= rhs + 1e-12, spec.kind

    def test_prox_optimality_finite_members(self):
        rng = np.random.default_rng(7)
        finite = [s for s in ALL_CONVEX if s.kind in ("zero", "l1", "group_l2", "polyhedral_support", "support_arc_segment")]
        for spec in finite:
            tau = 1.3
            for _ in range(3):
                z = rng.standard_normal(spec.n) * 1.5
                x = prox_eval(spec, tau, z)
                fx = phi_value(spec, x) + np.sum((z - x) ** 2) / (2 * tau)
                for _ in range(1000):
                    y = x + rng.standard_normal(spec.n) * rng.uniform(0.001, 1.0)
                    fy = phi_value(spec, y) + np.sum((z - y) ** 2) / (2 * tau)
                    assert fx <= fy + 1e-9, spec.kind


class TestBouligandSets:
    def test_orthant_origin_full_set(self):
        spec = ProxSpec.indicator_orthant(2)
        mats = [m.a for m in bd_prox_set(spec, 1.0, [0.0, 0.0])]
        expected = [np.eye(2), np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.zeros((2, 2))]
        for got, exp in zip(mats, expected):
            np.testing.assert_array_equal(got, exp)

    def test_l1_boundary(self):
        spec = ProxSpec.l1(1, 1.0)
        mats = [m.a for m in bd_prox_set(spec, 1.0, [1.0])]
        assert matrices_equal_as_sets(mats, [np.array([[0.0]]), np.array([[1.0]])])

    def test_l1_smooth(self):
        spec = ProxSpec.l1(1, 1.0)
        mats = [m.a for m in bd_prox_set(spec, 1.0, [3.0])]
        assert matrices_equal_as_sets(mats, [np.array([[1.0]])])

    def test_all_jacobians_in_admissible_band(self):
        rng = np.random.default_rng(3)
        for spec in ALL_CONVEX:
            tau = 0.9
            for _ in range(25):
                z = rng.standard_normal(spec.n) * 1.5
                # hit kinks on purpose half the time
                if rng.random() < 0.5 and spec.kind == "l1":
                    z[0] = tau * spec.weight
                try:
                    mats = bd_prox_set(spec, tau, z)
                except EnumerationUnavailable:
                    continue
                for m in mats:
                    w = np.linalg.eigvalsh(m.a)
                    assert w[0] >= -1e-10, spec.kind
                    assert w[-1] <= 1.0 + 1e-9, spec.kind  # rho = 0 for the catalog

    def test_finite_difference_consistency_at_singletons(self):
        rng = np.random.default_rng(11)
        for spec in ALL_CONVEX:
            tau = 0.7
            hits = 0
            while hits < 5:
                z = rng.standard_normal(spec.n) * 1.7
                try:
                    mats = bd_prox_set(spec, tau, z)
                except EnumerationUnavailable:
                    continue
                if len(mats) != 1:
                    continue
                hits += 1
                d = mats[0].a
                step = 1e-6
                fd = np.zeros_like(d)
                for j in range(spec.n):
                    e = np.zeros(spec.n)
                    e[j] = step
                    fd[:, j] = (prox_eval(spec, tau, z + e) - prox_eval(spec, tau, z - e)) / (2 * step)
                assert np.max(np.abs(fd - d)) <= 1e-4, spec.kind

    def test_abs_cone_origin(self):
        spec = ProxSpec.indicator_abs_cone()
        mats = [m.a for m in bd_prox_set(spec, 1.0, [0.0, 0.0])]
        expected = [
            np.eye(2),
            np.full((2, 2), 0.5),
            np.array([[0.5, -0.5], [-0.5, 0.5]]),
            np.zeros((2, 2)),
        ]
        assert matrices_equal_as_sets(mats, expected)

    def test_group_sphere_pair(self):
        spec = ProxSpec.group_l2([[0, 1]], 1.0)
        z = np.array([0.6, 0.8])  # exactly on the tau*w sphere for tau=1
        mats = [m.a for m in bd_prox_set(spec, 1.0, z)]
        u = z / 1.0
        assert matrices_equal_as_sets(mats, [np.outer(u, u), np.zeros((2, 2))], tol=1e-9)

    def test_bespoke_unavailable_at_kink(self):
        with pytest.raises(EnumerationUnavailable):
            bd_prox_set(ProxSpec.support_sharp_cusp(), 1.0, [0.0, 0.0])


class TestSubgradient:
    def test_l1_interior_of_subdifferential(self):
        spec = ProxSpec.l1(2, 1.0)
        assert subgradient_contains(spec, [2.0, 0.0], [1.0, 0.5])

    def test_orthant_normal_cone(self):
        spec = ProxSpec.indicator_orthant(2)
        assert subgradient_contains(spec, [0.0, 1.0], [-3.0, 0.0])

    def test_l1_bound_violated(self):
        spec = ProxSpec.l1(2, 1.0)
        assert not subgradient_contains(spec, [2.0, 0.0], [2.0, 0.0])


class TestDescriptors:
    def test_orthant_origin(self):
        desc = second_order_descriptor(ProxSpec.indicator_orthant(2), [0.0, 0.0], [0.0, 0.0])
        assert np.max(np.abs(desc.q.a)) == 0.0
        assert desc.aff_s.dim == 2
        assert desc.cone.contains([1.0, 1.0]) and not desc.cone.contains([-1.0, 0.0])

    def test_cusp_origin(self):
        desc = second_order_descriptor(ProxSpec.support_sharp_cusp(), [0.0, 0.0], [0.0, 0.0])
        assert desc.aff_s.dim == 1
        assert desc.aff_s.contains_vector([0.0, 1.0])
        assert desc.cone.contains([0.0, -1.0]) and not desc.cone.contains([0.0, 1.0])

    def test_arc_segment_origin(self):
        desc = second_order_descriptor(ProxSpec.support_arc_segment(), np.zeros(3), np.zeros(3))
        assert desc.aff_s.dim == 2
        assert desc.cone.contains([-1.0, -2.0, 0.0])
        assert not desc.cone.contains([1.0, 0.0, 0.0])
        assert not desc.cone.contains([0.0, 0.0, 1.0])

    def test_group_l2_mixed_blocks(self):
        spec = ProxSpec.group_l2([[0, 1], [2, 3]], 2.0)
        x = np.array([3.0, 4.0, 0.0, 0.0])
        v = np.array([2.0 * 0.6, 2.0 * 0.8, 1.2, 1.6])  # boundary dual on the zero block
        desc = second_order_descriptor(spec, x, v)
        u = np.array([0.6, 0.8])
        q_expected = np.zeros((4, 4))
        q_expected[:2, :2] = (2.0 / 5.0) * (np.eye(2) - np.outer(u, u))
        np.testing.assert_allclose(desc.q.a, q_expected, atol=1e-12)
        assert desc.aff_s.dim == 3
        assert desc.cone.contains([1.0, 0.5, 0.6, 0.8])

    def test_rejects_non_subgradient(self):
        with pytest.raises(CatalogError):
            second_order_descriptor(ProxSpec.l1(2, 1.0), [2.0, 0.0], [2.0, 0.0])


class TestExampleSequences:
    def test_cusp_hessian_closed_form(self):
        spec = ProxSpec.support_sharp_cusp()
        for k in (2, 10, 50):
            sp = example_sequence(spec, k)
            expected = 2.0 * np.array([[1.0 / k, -1.0 / k**3], [-1.0 / k**3, 1.0 / k**5]])
            np.testing.assert_allclose(sp.hessian.a, expected, atol=1e-14)
            assert subgradient_contains(spec, sp.x, sp.v, tol=1e-9)

    def test_cusp_dprox_limit_is_identity(self):
        spec = ProxSpec.support_sharp_cusp()
        for k, bound in ((100, 0.05), (1000, 1e-2), (10_000, 1e-3)):
            sp = example_sequence(spec, k)
            d = np.linalg.inv(np.eye(2) + sp.hessian.a)
            assert np.linalg.norm(d - np.eye(2)) <= bound

    def test_arc_segment_limit_matrix(self):
        spec = ProxSpec.support_arc_segment()
        target = np.diag([0.0, 1.0, 1.0])
        for k in (100, 1000, 10_000):
            sp = example_sequence(spec, k)
            d = np.linalg.inv(np.eye(3) + sp.hessian.a)
            assert np.linalg.norm(d - target) <= 10.0 / k
            assert subgradient_contains(spec, sp.x, sp.v, tol=1e-9)

    def test_sequence_points_are_prox_fixed(self):
        # z_k = x_k + tau v_k must recover x_k through the prox for tau = 1
        for spec in (ProxSpec.support_arc_segment(), ProxSpec.support_sharp_cusp()):
            sp = example_sequence(spec, 25)
            x = prox_eval(spec, 1.0, sp.x + sp.v)
            np.testing.assert_allclose(x, sp.x, atol=1e-9)

    def test_unsupported_kind(self):
        with pytest.raises(CatalogError):
            example_sequence(ProxSpec.l1(2), 10)


class TestBespokeProjections:
    def test_cusp_projection_stationarity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.standard_normal(2) * 2.0
            y = project_cusp_set(p)
            assert y[1] >= (2.0 / 3.0) * abs(y[0]) ** 1.5 - 1e-9
            # projection is no farther than any sampled feasible point
            d0 = np.linalg.norm(y - p)
            for _ in range(200):
                t = rng.standard_normal() * 2.0
                q = np.array([t, (2.0 / 3.0) * abs(t) ** 1.5 + abs(rng.standard_normal())])
                assert d0 <= np.linalg.norm(q - p) + 1e-8

    def test_arc_hull_projection_feasibility_and_optimality(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            p = rng.standard_normal(3) * 1.5
            y = project_arc_segment_hull(p)
            d0 = np.linalg.norm(y - p)
            # random feasible points: alpha * segment + (1-alpha) * half-disc
            for _ in range(300):
                alpha = rng.random()
                t = rng.uniform(-1, 1)
                ang = rng.uniform(0, math.pi)
                r = math.sqrt(rng.random())
                q2 = np.array([r * math.sin(ang), 1 - r * math.cos(ang)])
                if q2[0] < 0:
                    q2[0] = 0.0
                q = alpha * np.array([0, 0, t]) + (1 - alpha) * np.array([q2[0], q2[1], 0.0])
                assert d0 <= np.linalg.norm(q - p) + 1e-7


class TestSerialization:
    def test_round_trip_all_kinds(self):
        for spec in ALL_CONVEX:
            back = ProxSpec.from_dict(spec.to_dict())
            assert back.kind == spec.kind and back.n == spec.n
            z = np.linspace(-1, 1, spec.n)
            np.testing.assert_allclose(
                prox_eval(back, 0.9, z), prox_eval(spec, 0.9, z), atol=1e-14
            )

    def test_rejects_unknown_kind(self):
        with pytest.raises(CatalogError):
            ProxSpec.from_dict({"kind": "nuclear_norm", "n": 2})
