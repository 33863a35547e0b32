"""Matrix symbols, ellipticity, image bundles and functionals from operators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisocancel import (
    HomogeneityPattern,
    MatrixPolynomial,
    NonEllipticError,
    dilate,
    distance,
    ellipticity_check,
    evaluate,
    functional_from_operator,
    gn_bundle,
    image_bundle,
    load_spec,
    sphere_quadrature,
)

ISO2 = HomogeneityPattern((1.0, 1.0))


def gradient2():
    return MatrixPolynomial(2, 1, (((1, 0), np.array([[1.0], [0.0]])), ((0, 1), np.array([[0.0], [1.0]]))), ISO2)


def gn_symbol():
    return load_spec("gn3").symbol()


def random_unit(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# --------------------------------------------------------------------------- evaluate


def test_evaluate_gradient():
    np.testing.assert_allclose(evaluate(gradient2(), [3.0, 4.0]), [[3.0], [4.0]])


def test_evaluate_partial_laplacian():
    # pure polynomial convention: xi_2^2 + xi_3^2 with no (2 pi i)^2 factor
    a = HomogeneityPattern((1.0, 1.0, 1.0))
    lap = MatrixPolynomial(1, 1, (((0, 2, 0), np.eye(1)), ((0, 0, 2), np.eye(1))), a)
    assert evaluate(lap, [0.0, 1.0, 0.0])[0, 0] == pytest.approx(1.0)


def test_order_inferred_and_checked():
    assert gn_symbol().order == pytest.approx(1.5)
    with pytest.raises(ValueError):
        MatrixPolynomial(1, 1, (((1, 0), np.eye(1)), ((0, 2), np.eye(1))), ISO2)
    with pytest.raises(ValueError):
        MatrixPolynomial(1, 1, (((1, 0), np.eye(1)),), ISO2, order=2.0)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20))
@settings(max_examples=50)
def test_evaluate_homogeneity(seed, t):
    A = gn_symbol()
    xi = np.random.default_rng(seed).standard_normal(3)
    lhs = evaluate(A, dilate(t, xi, A.pattern))
    rhs = t ** -A.order * evaluate(A, xi)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(rhs).max())


# --------------------------------------------------------------------------- ellipticity


def test_ellipticity_gradient():
    rep = ellipticity_check(gradient2(), sphere_quadrature(2, 64))
    assert rep.is_elliptic and rep.min_singular_value == pytest.approx(1.0)


def test_ellipticity_detects_degeneracy():
    A = MatrixPolynomial(2, 1, (((1, 0), np.array([[1.0], [0.0]])),), ISO2)
    rep = ellipticity_check(A, sphere_quadrature(2, 64))
    assert not rep.is_elliptic
    assert abs(rep.argmin_node[0]) < 1e-12


def test_ellipticity_gn_minimum():
    # |(zeta_1, 1 - zeta_1^2)| is smallest at zeta_1^2 = 1/2
    rep = ellipticity_check(gn_symbol(), sphere_quadrature(3, 96))
    assert rep.is_elliptic
    assert rep.min_singular_value == pytest.approx(math.sqrt(3) / 2, rel=1e-3)


# --------------------------------------------------------------------------- image bundle


def test_image_bundle_gradient_is_radial_line():
    omega = image_bundle(gradient2(), sphere_quadrature(2, 32))
    z = np.array([0.6, 0.8])
    from anisocancel import Subspace

    assert distance(omega(z), Subspace.span(z[:, None])) < 1e-12


def test_image_bundle_gn_matches_closed_form():
    omega = image_bundle(gn_symbol(), sphere_quadrature(3, 16))
    z = random_unit(np.random.default_rng(0), 50, 3)
    P1, P2 = omega.projectors(z), gn_bundle().projectors(z)
    np.testing.assert_allclose(P1, P2, atol=1e-12)
    assert omega.frames(z).shape == (50, 2, 1)


def test_image_bundle_rejects_non_elliptic():
    A = MatrixPolynomial(2, 1, (((1, 0), np.array([[1.0], [0.0]])),), ISO2)
    with pytest.raises(NonEllipticError) as info:
        image_bundle(A, sphere_quadrature(2, 64))
    assert info.value.node is not None


# --------------------------------------------------------------------------- functional from operator


def test_functional_gradient_identity_p():
    A = gradient2()
    P = MatrixPolynomial(1, 1, (((0, 0), np.eye(1)),), ISO2)
    B = functional_from_operator(A, P)
    z = np.array([0.6, 0.8])
    w = np.array([2.0, -1.0 + 1j])
    # B(zeta) = zeta^* composed with the projection onto C zeta
    assert B.apply(z[None], w)[0] == pytest.approx(z @ w)


def test_functional_hand_computed():
    A = gradient2()
    P = MatrixPolynomial(1, 1, (((2, 0), np.eye(1)), ((0, 2), np.eye(1))), ISO2)
    B = functional_from_operator(A, P)
    np.testing.assert_allclose(B([1.0, 0.0]), [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(B([0.6, 0.8]), [0.6, 0.8], atol=1e-14)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_functional_inverts_symbol(seed):
    rng = np.random.default_rng(seed)
    A = gn_symbol()
    P = MatrixPolynomial(1, 1, (((0, 1, 0), np.array([[1.0 + 2j]])),), A.pattern)
    B = functional_from_operator(A, P)
    z = random_unit(rng, 20, 3)
    v = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    Av = evaluate(A, z)[:, :, 0] * v[:, None]
    expected = evaluate(P, z)[:, 0, 0] * v
    np.testing.assert_allclose(B.apply(z, Av), expected, rtol=1e-10, atol=1e-12)


def test_functional_shape_checks():
    A = gradient2()
    with pytest.raises(ValueError):
        functional_from_operator(A, MatrixPolynomial(2, 1, (((0, 0), np.ones((2, 1))),), ISO2))
    other = HomogeneityPattern((1.5, 0.5))
    with pytest.raises(ValueError):
        functional_from_operator(A, MatrixPolynomial(1, 1, (((0, 0), np.eye(1)),), other))
