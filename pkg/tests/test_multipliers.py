"""Grid functions, truncated multipliers, Riesz potentials and small experiments."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisocancel import (
    GridFunction,
    HomogeneityPattern,
    TruncationWindow,
    apply_truncated_multiplier,
    constant_bundle,
    eta,
    gn_bundle,
    gn_pattern,
    kernel_ft_sup_experiment,
    kms_bundle,
    l2_embedding_experiment,
    linfty_embedding_experiment,
    norms,
    riesz_apply,
    spectral_project_to_bundle,
)
from anisocancel.bundles import kms_normal
from anisocancel.multipliers import (
    UnresolvedWindowWarning,
    bilinearization_check,
    bundle_family,
    delta_response_experiment,
    log_fit,
    matched_box,
    near_delta,
    plateau_variation,
    resolved_eta_range,
    single_mode,
    windowed_plancherel,
)
from anisocancel.symbols import coordinate_functional

ISO2 = HomogeneityPattern((1.0, 1.0))
ANISO2 = HomogeneityPattern((1.4, 0.6))
BOX = 2 * math.pi


def random_grid(seed, shape=(32, 32), ell=1, box=BOX):
    rng = np.random.default_rng(seed)
    return GridFunction(rng.standard_normal((ell,) + shape) + 1j * rng.standard_normal((ell,) + shape), box)


def mode_eta(k, box, a):
    box = (box,) * len(k) if np.isscalar(box) else box
    return eta(np.array(k) / np.array(box), a)


# --------------------------------------------------------------------------- grid functions


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_round_trip_and_parseval(seed):
    f = random_grid(seed, (16, 24), ell=2, box=(3.0, 5.0))
    g = GridFunction.from_spectrum(f.spectral, f.box)
    np.testing.assert_allclose(g.samples, f.samples, rtol=0, atol=1e-12 * np.abs(f.samples).max())
    assert f.spectral_l2() == pytest.approx(f.norms().l2, rel=1e-10)


def test_grid_function_is_read_only():
    f = random_grid(0)
    with pytest.raises(ValueError):
        f.samples[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        GridFunction(np.zeros((1, 1, 4)), BOX)


def test_norms_examples():
    n = 64
    half = np.zeros((n, n))
    half[: n // 2] = 1.0
    f = GridFunction(half, BOX, components=False)
    assert norms(f).l1 == pytest.approx(BOX ** 2 / 2)
    m = single_mode((n, n), BOX, (3, -2))
    assert norms(m).linf == pytest.approx(1.0) and norms(m).l2 == pytest.approx(BOX)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_norms_interpolation(seed):
    f = GridFunction(np.abs(random_grid(seed).samples), BOX)
    n = norms(f)
    assert n.l2 ** 2 <= n.l1 * n.linf * (1 + 1e-12)


def test_near_delta_has_unit_mass_and_flat_spectrum():
    f = near_delta((64, 64), BOX, [1.0, 1j])
    assert np.sum(f.samples[0]).real * f.cell == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    spec = np.abs(f.spectral[0])
    assert spec.min() / spec.max() > 0.99


# --------------------------------------------------------------------------- windows


def test_window_validation():
    with pytest.raises(ValueError):
        TruncationWindow(2.0, 1.0)
    with pytest.raises(ValueError):
        TruncationWindow(0.0, 1.0)
    assert TruncationWindow(1.0, math.e).log_ratio == pytest.approx(1.0)


def test_resolved_range_matched_box():
    box = matched_box(ANISO2)
    lo, hi = resolved_eta_range((256, 256), box, ANISO2)
    assert lo == pytest.approx(1 / (2 * math.pi))
    assert hi == pytest.approx(min((128 / L) ** (1 / aj) for L, aj in zip(box, ANISO2.a)))


def test_unresolved_window_warns():
    f = random_grid(1)
    with pytest.warns(UnresolvedWindowWarning):
        apply_truncated_multiplier(f, coordinate_functional(constant_bundle(np.eye(1), 2), 0), ISO2,
                                   TruncationWindow(0.01, 1.0))


# --------------------------------------------------------------------------- single-mode laws


SCALAR = coordinate_functional(constant_bundle(np.eye(1), 2), 0)


@pytest.mark.parametrize("a", [ISO2, ANISO2])
@pytest.mark.parametrize("k", [(3, 1), (-5, 2), (0, 7)])
def test_single_mode_eigenfunction(a, k):
    box = (2.0, 3.0)
    f = single_mode((32, 32), box, k)
    e = mode_eta(k, box, a)
    inside = TruncationWindow(e / 2, e * 2)
    out = apply_truncated_multiplier(f, SCALAR, a, inside, warn=False)
    np.testing.assert_allclose(out.samples, e ** -2.0 * f.samples, atol=1e-12 * e ** -2.0)
    outside = TruncationWindow(e * 1.5, e * 3)
    assert np.abs(apply_truncated_multiplier(f, SCALAR, a, outside, warn=False).samples).max() < 1e-14


@pytest.mark.parametrize("a", [ISO2, ANISO2])
def test_riesz_single_mode(a):
    f = single_mode((32, 32), BOX, (4, -3))
    out = riesz_apply(f, 0.7, a)
    np.testing.assert_allclose(out.samples, mode_eta((4, -3), BOX, a) ** -0.7 * f.samples, rtol=1e-12)


def test_riesz_isotropic_is_classical():
    f = single_mode((16, 16), 1.0, (3, 4))
    np.testing.assert_allclose(riesz_apply(f, 1.0, ISO2).samples, f.samples / 5.0, rtol=1e-12)


@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_riesz_composition(b1, b2, seed):
    f = random_grid(seed)
    two = riesz_apply(riesz_apply(f, b1, ANISO2), b2, ANISO2)
    one = riesz_apply(f, b1 + b2, ANISO2)
    np.testing.assert_allclose(two.spectral, one.spectral, rtol=1e-10, atol=1e-10 * np.abs(one.spectral).max())


def test_riesz_rejects_bad_order():
    with pytest.raises(ValueError):
        riesz_apply(random_grid(0), 2.0, ISO2)


def test_riesz_zero_frequency_stays_zero():
    f = GridFunction(np.ones((1, 8, 8)), BOX)
    assert np.abs(riesz_apply(f, 1.0, ISO2).samples).max() == 0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_windowed_plancherel_identity(seed):
    f = random_grid(seed, (32, 32))
    win = TruncationWindow(0.5, 9.0)
    direct = riesz_apply(f, 1.0, ANISO2, win).norms().l2
    assert direct == pytest.approx(windowed_plancherel(f, ANISO2, win), rel=1e-10)


# --------------------------------------------------------------------------- bundle projection


def test_projection_full_space_is_identity():
    f = random_grid(2, ell=2)
    out = spectral_project_to_bundle(f, constant_bundle(np.eye(2), 2), ISO2)
    np.testing.assert_allclose(out.spectral, f.spectral, atol=1e-12)


def test_projection_onto_first_axis():
    f = random_grid(3, ell=2)
    out = spectral_project_to_bundle(f, constant_bundle(np.eye(2)[:, :1], 2), ISO2)
    S = np.array(out.spectral)
    assert np.abs(S[1]).ravel()[1:].max() == 0  # only the zero frequency keeps component 2
    np.testing.assert_allclose(S[0], f.spectral[0])


def test_projection_idempotent_on_kms():
    omega, a = kms_bundle(1, 2, 1)
    f = random_grid(4, ell=2)
    once = spectral_project_to_bundle(f, omega, a)
    twice = spectral_project_to_bundle(once, omega, a)
    np.testing.assert_allclose(twice.spectral, once.spectral, atol=1e-13 * np.abs(once.spectral).max())


# --------------------------------------------------------------------------- KMS bundle


def test_kms_bundle_shape_and_pattern():
    omega, a = kms_bundle(2, 3, 2)
    assert (omega.ambient_dim, omega.dim) == (3, 2)
    assert sum(a.a) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        kms_bundle(0, 1, 1)


def test_kms_normal_matches_direct_formula():
    # zeta_1^{j kappa} zeta_2^{(N + 1 - j) lambda} is our normal times zeta_2^lambda
    z = np.array([[0.6, 0.8], [-0.28, 0.96]])
    direct = np.column_stack([z[:, 1] ** 2, z[:, 0] * z[:, 1]])
    ours = kms_normal(z, 1, 1, 1)
    np.testing.assert_allclose(ours * z[:, 1:2], direct)
    omega, _ = kms_bundle(1, 1, 1)
    F = omega.frames(z)
    np.testing.assert_allclose(np.einsum("nl,nlk->nk", direct, F), 0, atol=1e-15)


# --------------------------------------------------------------------------- invariances


def test_translation_invariance_of_ratios():
    omega, a = gn_bundle(), gn_pattern()
    shape, box = (32, 16, 16), matched_box(a)
    lo, hi = resolved_eta_range(shape, box, a)
    fam = bundle_family(shape, box, omega, a, [3 * lo], count=1, seed=3)
    (_, f), = list(fam)
    g = f.translated((5, -3, 7))
    wins = [TruncationWindow(lo, hi)]
    B = coordinate_functional(omega, 1)
    r = linfty_embedding_experiment(omega, B, a, [f, g], wins).ratios
    assert r[0, 0] == pytest.approx(r[1, 0], rel=1e-10)


def test_dilation_invariance_of_l2_ratios():
    f = spectral_project_to_bundle(random_grid(5, (32, 32), ell=2), kms_bundle(1, 2, 1)[0], kms_bundle(1, 2, 1)[1])
    a = kms_bundle(1, 2, 1)[1]
    s = 3.0
    win = TruncationWindow(0.4, 3.0)
    r1 = l2_embedding_experiment(kms_bundle(1, 2, 1)[0], a, [f], [win]).ratios[0, 0]
    r2 = l2_embedding_experiment(kms_bundle(1, 2, 1)[0], a, [f.dilated(s, a)],
                                 [TruncationWindow(win.eps / s, win.R / s)]).ratios[0, 0]
    assert r1 == pytest.approx(r2, rel=1e-10)


def test_multiplier_commutes_with_translation():
    f = random_grid(6, ell=1)
    win = TruncationWindow(0.5, 4.0)
    lhs = apply_truncated_multiplier(f.translated((3, 5)), SCALAR, ANISO2, win, warn=False)
    rhs = apply_truncated_multiplier(f, SCALAR, ANISO2, win, warn=False).translated((3, 5))
    np.testing.assert_allclose(lhs.samples, rhs.samples, atol=1e-12)


# --------------------------------------------------------------------------- small experiments


def test_kernel_ft_linearity():
    wins = [TruncationWindow(1.0, 10.0), TruncationWindow(1.0, 30.0)]
    one = kernel_ft_sup_experiment(lambda z: z[:, 0], ISO2, wins, shape=(128, 128), box=(BOX, BOX))
    two = kernel_ft_sup_experiment(lambda z: 2 * z[:, 0], ISO2, wins, shape=(128, 128), box=(BOX, BOX))
    np.testing.assert_allclose(two.sups, 2 * np.array(one.sups), rtol=1e-12)
    assert one.mikhlin_passes


def test_delta_response_small_grid():
    omega = constant_bundle(np.eye(1), 2)
    B = coordinate_functional(omega, 0)
    lo, hi = resolved_eta_range((256, 256), matched_box(ISO2), ISO2)
    wins = [TruncationWindow(4 * lo, 4 * lo * r) for r in (3.0, 10.0)]
    res = delta_response_experiment(B, ISO2, [1.0], wins, shape=(256, 256))
    assert res.sphere_residual.real == pytest.approx(2 * math.pi, rel=1e-12)
    assert max(res.relative_errors) < 0.05


def test_bilinearization_small():
    omega, a = gn_bundle(), gn_pattern()
    shape, box = (32, 16, 16), matched_box(a)
    lo, hi = resolved_eta_range(shape, box, a)
    fam = list(bundle_family(shape, box, omega, a, [2 * lo, 4 * lo], count=4, seed=1))
    win = TruncationWindow(lo, hi)
    for (_, f), (_, g) in zip(fam, fam[::-1]):
        lhs, rhs = bilinearization_check(f, g, a, win)
        assert lhs <= rhs + 1e-9


def test_fit_helpers():
    x = np.array([1.0, 2.0, 3.0])
    fit = log_fit(x, 2 * x + 1)
    assert fit.slope == pytest.approx(2) and fit.r2 == pytest.approx(1)
    assert plateau_variation([4.0, 3.0, 4.0]) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        log_fit([1.0], [1.0])


def test_family_members_lie_in_bundle():
    omega, a = gn_bundle(), gn_pattern()
    shape, box = (32, 16, 16), matched_box(a)
    lo, _ = resolved_eta_range(shape, box, a)
    fam = bundle_family(shape, box, omega, a, [2 * lo], count=2, seed=0, symbol=None)
    for _, f in fam:
        again = spectral_project_to_bundle(f, omega, a)
        np.testing.assert_allclose(again.spectral, f.spectral, atol=1e-12 * np.abs(f.spectral).max())
        assert abs(f.spectral[(slice(None),) + (0, 0, 0)]).max() == 0
