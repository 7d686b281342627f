import numpy as np
import pytest

from ssncert.prox_catalog import ProxSpec
from ssncert.residual_maps import (
    CallbackObjective,
    CompositeProblem,
    StationaryTriple,
    m_nat_set,
    m_nor_set,
    natural_residual,
    normal_map,
)

from helpers import lasso_oracle


def kcone_problem():
    return CompositeProblem.quadratic(
        np.diag([2.0, -1.0]), np.zeros(2), ProxSpec.indicator_abs_cone(), 0.5
    )


def orthant_problem():
    return CompositeProblem.quadratic(
        np.array([[2.0, 2.0], [2.0, 1.0]]), np.zeros(2), ProxSpec.indicator_orthant(2), 1.0
    )


def lasso_problem():
    return CompositeProblem.quadratic(np.eye(2), np.array([3.0, 0.5]), ProxSpec.l1(2, 1.0), 1.0)


class TestNaturalResidual:
    def test_kcone_piecewise_formula_points(self):
        p = kcone_problem()
        np.testing.assert_allclose(natural_residual(p, [1.0, 0.0]), [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(natural_residual(p, [0.0, 2.0]), [-1.5, 0.5], atol=1e-15)

    def test_kcone_formula_on_grid(self):
        p = kcone_problem()
        for x1 in np.linspace(-1, 1, 10):
            for x2 in np.linspace(-1, 1, 10):
                got = natural_residual(p, [x1, x2])
                expected = np.array([x1 - 0.75 * abs(x2), 0.25 * x2])
                np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_zero_phi_reduces_to_scaled_gradient(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        p = CompositeProblem.quadratic(a, np.array([1.0, -1.0]), ProxSpec.zero(2), 0.3)
        x = np.array([0.4, -0.2])
        np.testing.assert_allclose(
            natural_residual(p, x), 0.3 * (a @ x - np.array([1.0, -1.0])), atol=1e-15
        )


class TestNormalMap:
    def test_orthant_stationary_at_zero(self):
        np.testing.assert_allclose(normal_map(orthant_problem(), [0.0, 0.0]), [0.0, 0.0])

    def test_zero_phi_is_gradient(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        p = CompositeProblem.quadratic(a, np.zeros(2), ProxSpec.zero(2), 0.7)
        z = np.array([1.0, 2.0])
        np.testing.assert_allclose(normal_map(p, z), a @ z, atol=1e-15)

    def test_lasso_stationary_point(self):
        # brute-force sign enumeration gives x* = (2, 0), so z* = x* + v* = (3, 0.5)
        p = lasso_problem()
        x_star = lasso_oracle(np.eye(2), np.array([3.0, 0.5]), 1.0)
        np.testing.assert_allclose(x_star, [2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(normal_map(p, [3.0, 0.5]), [0.0, 0.0], atol=1e-14)


class TestGeneralizedDerivativeSets:
    def test_orthant_four_matrices(self):
        ms = m_nor_set(orthant_problem(), [0.0, 0.0])
        expected = [
            np.array([[2.0, 2.0], [2.0, 1.0]]),
            np.array([[2.0, 0.0], [2.0, 1.0]]),
            np.array([[1.0, 2.0], [0.0, 1.0]]),
            np.eye(2),
        ]
        assert len(ms) == 4
        for got, exp in zip(ms, expected):
            np.testing.assert_array_equal(got, exp)

    def test_zero_phi_singletons(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        p = CompositeProblem.quadratic(a, np.zeros(2), ProxSpec.zero(2), 0.5)
        np.testing.assert_allclose(m_nor_set(p, [1.0, 1.0])[0], a, atol=1e-15)
        np.testing.assert_allclose(m_nat_set(p, [1.0, 1.0])[0], 0.5 * a, atol=1e-15)

    def test_l1_scalar_boundary(self):
        p = CompositeProblem.quadratic(np.array([[2.0]]), np.zeros(1), ProxSpec.l1(1, 1.0), 1.0)
        ms = m_nor_set(p, [1.0])
        got = sorted(float(m[0, 0]) for m in ms)
        assert got == pytest.approx([1.0, 2.0])

    def test_m_nat_element(self):
        mn = m_nat_set(orthant_problem(), [0.0, 0.0])
        np.testing.assert_array_equal(mn[1], np.array([[2.0, 2.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(mn[0], np.array([[2.0, 2.0], [2.0, 1.0]]))

    def test_transpose_identity_random_lasso(self):
        rng = np.random.default_rng(17)
        checked = 0
        while checked < 100:
            n = int(rng.integers(1, 5))
            g = rng.standard_normal((n, n))
            a = g @ g.T + 0.5 * np.eye(n)
            phi = ProxSpec.l1(n, float(rng.uniform(0.3, 1.5)))
            tau = float(rng.uniform(0.2, 1.2))
            # choose a stationary point, then set b to make it stationary
            x = rng.standard_normal(n)
            x[rng.random(n) < 0.5] = 0.0
            v = np.where(
                np.abs(x) > 0,
                phi.weight * np.sign(x),
                phi.weight * rng.uniform(-1, 1, n),
            )
            b = a @ x + v
            p = CompositeProblem.quadratic(a, b, phi, tau)
            st = StationaryTriple.at(p, x)
            nat = m_nat_set(p, st.x_bar)
            nor = m_nor_set(p, st.z_bar)
            assert len(nat) == len(nor)
            for mn_, mo_ in zip(nat, nor):
                assert np.max(np.abs(mn_ - tau * mo_.T)) <= 1e-10
            checked += 1


class TestStationaryTriple:
    def test_valid_triple(self):
        st = StationaryTriple.at(lasso_problem(), [2.0, 0.0])
        np.testing.assert_allclose(st.v_bar, [1.0, 0.5], atol=1e-14)
        np.testing.assert_allclose(st.z_bar, [3.0, 0.5], atol=1e-14)

    def test_rejects_nonstationary(self):
        with pytest.raises(ValueError, match="not stationary"):
            StationaryTriple.at(lasso_problem(), [5.0, 5.0])

    def test_residual_zero_consistency(self):
        p = lasso_problem()
        st = StationaryTriple.at(p, [2.0, 0.0])
        assert np.linalg.norm(natural_residual(p, st.x_bar)) <= 1e-9
        assert np.linalg.norm(normal_map(p, st.z_bar)) <= 1e-9

    def test_residual_comparability_near_solution(self):
        # generic strongly-regular instance (I - tau*A nonsingular, A != I)
        a = np.array([[2.0, 0.3], [0.3, 1.0]])
        x_star = np.array([1.0, 0.0])
        v_star = np.array([1.0, 0.2])  # subgradient of ||.||_1 at x_star
        b = a @ x_star + v_star
        p = CompositeProblem.quadratic(a, b, ProxSpec.l1(2, 1.0), 0.5)
        rng = np.random.default_rng(23)
        fn = np.linalg.norm(natural_residual(p, x_star))
        fo = np.linalg.norm(normal_map(p, x_star - p.tau * p.f.gradient(x_star)))
        assert fn <= 1e-9 and fo <= 1e-9
        for _ in range(50):
            x = x_star + rng.standard_normal(2) * rng.uniform(1e-4, 0.5)
            fn = np.linalg.norm(natural_residual(p, x))
            fo = np.linalg.norm(normal_map(p, x - p.tau * p.f.gradient(x)))
            assert (fn <= 1e-9) == (fo <= 1e-9)


class TestSerialization:
    def test_round_trip(self):
        p = lasso_problem()
        q = CompositeProblem.from_dict(p.to_dict())
        z = np.array([0.3, -0.7])
        np.testing.assert_allclose(normal_map(q, z), normal_map(p, z), atol=1e-15)

    def test_callback_objectives_do_not_serialize(self):
        f = CallbackObjective(1, lambda x: 0.0, lambda x: np.zeros(1), lambda x: np.zeros((1, 1)))
        p = CompositeProblem(f, ProxSpec.zero(1), 1.0)
        with pytest.raises(ValueError):
            p.to_dict()
