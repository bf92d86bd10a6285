import numpy as np
import pytest

from asdpde import build_grid, build_transport
from asdpde.asd import (
    BasicLagrangian,
    asd_verify,
    compose_antisym,
    compose_skew_boundary,
    default_probes,
    make_basic,
    make_broken_sign,
    regularize,
    resolvent_J,
)
from asdpde.convex import (
    FieldFunctional,
    PointwisePotential,
    fenchel_gap,
)
from asdpde.mesh import VectorFieldSpec

_ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _scalar_phi(pot=None):
    if pot is None:
        pot = PointwisePotential.power(1.0, 2.0) + PointwisePotential.linear(1.0)
    return FieldFunctional(weights=np.ones(1), potential=pot)


class TestBasicLagrangian:
    def test_quadratic_value_example(self):
        # phi = u^2/2: L(1, -1) = phi(1) + phi*(1) = 1/2 + 1/2 = 1
        L = make_basic(_scalar_phi(PointwisePotential.power(1.0, 2.0)))
        assert L.value(np.array([1.0]), np.array([-1.0])) == pytest.approx(1.0)

    def test_zero_minimum_at_stationary_pair(self):
        # I(x) = L(x, 0) >= 0 with equality iff grad phi(x) = 0
        pot = PointwisePotential.power(1.0, 2.0) + PointwisePotential.linear(1.0)
        L = make_basic(_scalar_phi(pot))
        x_star = np.array([-1.0])  # grad = x + 1 = 0
        assert L.value(x_star, np.zeros(1)) == pytest.approx(0.0, abs=1e-14)
        for x in (-2.0, 0.0, 1.5):
            assert L.value(np.array([x]), np.zeros(1)) > 0.0

    def test_pair_values_matches_scalar(self, rng):
        L = make_basic(_scalar_phi())
        X = rng.standard_normal((5, 1))
        P = rng.standard_normal((4, 1))
        M = L.pair_values(X, P)
        for j in range(5):
            for k in range(4):
                assert M[j, k] == pytest.approx(L.value(X[j], P[k]), abs=1e-12)

    def test_partial_derivatives_by_finite_differences(self, rng):
        L = make_basic(_scalar_phi())
        x = rng.standard_normal(1)
        p = rng.standard_normal(1)
        h = 1e-6
        d1_num = (L.value(x + h, p) - L.value(x - h, p)) / (2 * h)
        d2_num = (L.value(x, p + h) - L.value(x, p - h)) / (2 * h)
        assert L.d1(x, p)[0] == pytest.approx(d1_num, abs=1e-6)
        assert L.d2(x, p)[0] == pytest.approx(d2_num, abs=1e-6)


class TestAsdVerify:
    def test_basic_is_anti_selfdual(self):
        res = asd_verify(make_basic(_scalar_phi()), 4.0, 101, 1)
        assert res <= 5e-3

    def test_broken_sign_is_detected(self):
        res = asd_verify(make_broken_sign(_scalar_phi()), 4.0, 101, 1)
        assert res >= 0.1

    def test_antisym_composition(self):
        phi = FieldFunctional(
            weights=np.ones(2), potential=PointwisePotential.power(1.0, 2.0)
        )
        res = asd_verify(compose_antisym(phi, _ROT), 4.0, 41, 2)
        assert res <= 5e-2

    def test_regularized_keeps_identity(self):
        res = asd_verify(regularize(make_basic(_scalar_phi()), 0.5), 4.0, 101, 1)
        assert res <= 5e-3

    def test_residual_shrinks_with_refinement(self):
        L = make_basic(_scalar_phi())
        coarse = asd_verify(L, 4.0, 51, 1)
        fine = asd_verify(L, 4.0, 201, 1)
        assert fine < coarse

    def test_dof_limit(self):
        phi = FieldFunctional(
            weights=np.ones(4), potential=PointwisePotential.power(1.0, 2.0)
        )
        with pytest.raises(ValueError, match="<= 3"):
            asd_verify(make_basic(phi), 1.0, 5, 4)

    def test_weight_count_mismatch(self):
        with pytest.raises(ValueError, match="dof count"):
            asd_verify(make_basic(_scalar_phi()), 1.0, 5, 2)

    def test_default_probes_are_deterministic_and_inside(self):
        a = default_probes(2, 4.0)
        b = default_probes(2, 4.0)
        for (pa, xa), (pb, xb) in zip(a, b):
            np.testing.assert_array_equal(pa, pb)
            np.testing.assert_array_equal(xa, xb)
            assert np.max(np.abs(pa)) <= 1.0 and np.max(np.abs(xa)) <= 1.0


class TestRegularizedClosedForm:
    def test_quadratic_exact_identity(self, rng):
        # phi = beta u^2 / 2: both L_lam and its conjugate have closed
        # forms, and they satisfy the identity exactly.
        beta, lam = 1.5, 0.5
        phi = _scalar_phi(PointwisePotential.quadratic(beta))
        L = regularize(make_basic(phi), lam)
        for _ in range(20):
            x, p = rng.standard_normal(2)
            conj = (
                (1 + lam * beta) * p**2 / (2 * beta)
                + beta * x**2 / (2 * (1 + lam * beta))
            )
            assert conj == pytest.approx(
                L.value(np.array([-x]), np.array([-p])), abs=1e-12
            )

    def test_value_matches_closed_form(self, rng):
        beta, lam = 1.5, 0.5
        phi = _scalar_phi(PointwisePotential.quadratic(beta))
        L = regularize(make_basic(phi), lam)
        x, p = 0.7, -0.3
        expected = (
            beta * x**2 / (2 * (1 + lam * beta))
            + p**2 / (2 * beta)
            + lam * p**2 / 2
        )
        assert L.value(np.array([x]), np.array([p])) == pytest.approx(
            expected, abs=1e-14
        )

    def test_d1_is_yosida_map(self, rng):
        phi = _scalar_phi(
            PointwisePotential.power(1.0, 4.0) + PointwisePotential.quadratic(0.5)
        )
        L0 = make_basic(phi)
        L = regularize(L0, 0.3)
        x = rng.standard_normal(1)
        J = resolvent_J(L0, 0.3, x)
        np.testing.assert_allclose(L.d1(x, None), (x - J) / 0.3, atol=1e-12)
        # the resolvent is the prox of phi
        np.testing.assert_allclose(J, phi.prox(0.3, x), atol=1e-14)

    def test_d1_d2_finite_differences(self, rng):
        phi = _scalar_phi(
            PointwisePotential.power(1.0, 4.0) + PointwisePotential.quadratic(0.5)
        )
        L = regularize(make_basic(phi), 0.3)
        x = rng.standard_normal(1)
        p = rng.standard_normal(1)
        h = 1e-6
        d1_num = (L.value(x + h, p) - L.value(x - h, p)) / (2 * h)
        d2_num = (L.value(x, p + h) - L.value(x, p - h)) / (2 * h)
        assert L.d1(x, p)[0] == pytest.approx(d1_num, abs=1e-7)
        assert L.d2(x, p)[0] == pytest.approx(d2_num, abs=1e-7)


class TestRegularizeErrors:
    def test_lam_must_be_positive(self):
        with pytest.raises(ValueError, match="lam"):
            regularize(make_basic(_scalar_phi()), 0.0)

    def test_broken_sign_rejected(self):
        with pytest.raises(ValueError, match="broken-sign"):
            regularize(make_broken_sign(_scalar_phi()), 0.5)

    def test_antisym_with_nonzero_matrix_rejected(self):
        phi = FieldFunctional(
            weights=np.ones(2), potential=PointwisePotential.power(1.0, 2.0)
        )
        with pytest.raises(ValueError, match="not supported"):
            regularize(compose_antisym(phi, _ROT), 0.5)

    def test_antisym_with_zero_matrix_allowed(self):
        phi = FieldFunctional(
            weights=np.ones(2), potential=PointwisePotential.power(1.0, 2.0)
        )
        L = regularize(compose_antisym(phi, np.zeros((2, 2))), 0.5)
        assert L.lam == 0.5

    def test_unknown_type_rejected(self):
        with pytest.raises(TypeError):
            regularize(object(), 0.5)


class TestComposedBoundary:
    def _setup(self, n=17):
        g = build_grid(1, [(0.0, 1.0)], [n])
        op = build_transport(g, VectorFieldSpec.from_strings("(1+x)/2"))
        pot = PointwisePotential.power(1.0, 2.0) + PointwisePotential.quadratic(1.0)
        phi = FieldFunctional.on_grid(g, pot)
        return g, op, phi, compose_skew_boundary(make_basic(phi), op)

    def test_green_decomposition_of_certificate(self, rng):
        # M(x, 0) = gap_phi(x, -Ax) + ||b2 x||^2, hence M(x, 0) >= 0
        g, op, phi, M = self._setup()
        for _ in range(20):
            x = rng.standard_normal(17)
            val = M.value(x, np.zeros(17))
            gap = fenchel_gap(phi, x, -op.apply(x))
            assert val == pytest.approx(
                gap + op.trace_norm_sq_minus(x), abs=1e-12
            )
            assert val >= -1e-12

    def test_d1_d2_finite_differences(self, rng):
        g, op, phi, M = self._setup()
        x = rng.standard_normal(17)
        p = rng.standard_normal(17)
        w = g.weights
        h = 1e-6
        for i in (0, 8, 16):
            e = np.zeros(17)
            e[i] = 1.0
            d1_num = (M.value(x + h * e, p) - M.value(x - h * e, p)) / (2 * h)
            d2_num = (M.value(x, p + h * e) - M.value(x, p - h * e)) / (2 * h)
            assert w[i] * M.d1(x, p)[i] == pytest.approx(d1_num, abs=1e-5)
            assert w[i] * M.d2(x, p)[i] == pytest.approx(d2_num, abs=1e-5)

    def test_requires_basic_kernel(self):
        g = build_grid(1, [(0.0, 1.0)], [9])
        op = build_transport(g, VectorFieldSpec.from_strings("1"))
        with pytest.raises(TypeError, match="basic"):
            compose_skew_boundary(object(), op)
