"""Scores, information matrices, and Wasserstein distances.

Frozen reference numbers come from 30-digit quadrature over the textbook
density/quantile formulas, independent of the library's integration code.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from wimlab import families
from wimlab.errors import (
    DimensionMismatch,
    DivisionByZero,
    NotSmooth,
    NotWellDefined,
)
from wimlab.families import Distribution1D, location_scale_transport_map
from wimlab.geometry import (
    expectation,
    fim,
    fisher_score,
    poisson_residual,
    w2_distance_1d,
    wasserstein_score,
    wasserstein_score_grad,
    wim,
    wim_from_distance,
)


# ---------------------------------------------------------------------------
# Wasserstein scores
# ---------------------------------------------------------------------------

SMOOTH_CASES = [
    (families.gaussian(), (0.7, 1.3)),
    (families.exponential(), (0.4, 1.3)),
    (families.laplacian(), (-0.3, 1.7)),
    (families.uniform(), (-1.2, 2.5)),
    (families.location_scale("logistic"), (0.3, 1.6)),
]


@pytest.mark.parametrize("fam, theta", SMOOTH_CASES, ids=lambda v: getattr(v, "name", ""))
def test_score_closed_form_matches_quadrature_route(fam, theta):
    u = np.linspace(0.15, 0.85, 5)
    xs = families.quantile(fam, theta, u)
    for i in range(fam.dim):
        closed = wasserstein_score(fam, theta, i, xs)
        constructive = wasserstein_score(fam, theta, i, xs, method="quadrature")
        np.testing.assert_allclose(constructive, closed, atol=5e-8, rtol=1e-7)


@pytest.mark.parametrize("fam, theta", SMOOTH_CASES, ids=lambda v: getattr(v, "name", ""))
def test_score_gradient_equals_generic_formula(fam, theta):
    u = np.linspace(0.1, 0.9, 7)
    xs = families.quantile(fam, theta, u)
    for i in range(fam.dim):
        closed = wasserstein_score_grad(fam, theta, i, xs)
        generic = wasserstein_score_grad(fam, theta, i, xs, method="generic")
        np.testing.assert_allclose(generic, closed, rtol=1e-10, atol=1e-12)


def test_score_gradient_is_spatial_derivative_of_score(gaussian_fam):
    theta = (0.7, 1.3)
    xs = np.linspace(-1.5, 3.0, 9)
    h = 1e-6
    for i in range(2):
        fd = (
            wasserstein_score(gaussian_fam, theta, i, xs + h)
            - wasserstein_score(gaussian_fam, theta, i, xs - h)
        ) / (2 * h)
        np.testing.assert_allclose(
            wasserstein_score_grad(gaussian_fam, theta, i, xs), fd, atol=1e-8
        )


def test_score_is_mean_zero(gaussian_fam, laplacian_fam):
    for fam, theta in [(gaussian_fam, (0.7, 1.3)), (laplacian_fam, (-0.3, 1.7))]:
        for i in range(2):
            mean = expectation(fam, theta, lambda z: wasserstein_score(fam, theta, i, z))
            assert mean == pytest.approx(0.0, abs=1e-9)


def test_score_on_product_family_adds_over_factors(gaussian_fam):
    prod = families.product(gaussian_fam, gaussian_fam)
    pt = np.array([0.4, -0.9])
    got = wasserstein_score(prod, (0.1, 1.2), 0, pt)
    want = wasserstein_score(gaussian_fam, (0.1, 1.2), 0, 0.4) + wasserstein_score(
        gaussian_fam, (0.1, 1.2), 0, -0.9
    )
    assert got == pytest.approx(want, rel=1e-12)


def test_score_raises_on_atomic_family():
    fam = families.relu_family("f")
    with pytest.raises(NotSmooth):
        wasserstein_score(fam, (0.5,), 0, 1.0)


def test_score_grad_division_by_zero_outside_support(uniform_fam):
    with pytest.raises(DivisionByZero):
        wasserstein_score_grad(uniform_fam, (0.0, 1.0), 0, 2.0, method="generic")


def test_poisson_residual_small_at_interior_points(gaussian_fam, laplacian_fam):
    for fam, theta in [(gaussian_fam, (0.7, 1.3)), (laplacian_fam, (-0.3, 1.7))]:
        xs = families.quantile(fam, theta, np.linspace(0.2, 0.8, 7))
        for i in range(2):
            for x in xs:
                try:
                    res = poisson_residual(fam, theta, i, float(x))
                except NotSmooth:
                    continue  # grid point fell on a kink guard band
                assert abs(res) < 1e-6


def test_poisson_residual_guards_kinks_and_boundaries(laplacian_fam, uniform_fam):
    with pytest.raises(NotSmooth):
        poisson_residual(laplacian_fam, (-0.3, 1.7), 1, -0.3)
    with pytest.raises(NotSmooth):
        poisson_residual(uniform_fam, (0.0, 1.0), 0, 1.0 - 1e-9)


# ---------------------------------------------------------------------------
# information matrices
# ---------------------------------------------------------------------------

def test_wim_quadrature_agrees_with_analytic(gaussian_fam, exponential_fam):
    for fam, theta in [(gaussian_fam, (0.7, 1.3)), (exponential_fam, (0.4, 1.3))]:
        analytic = wim(fam, theta, method="analytic")
        quad = wim(fam, theta, method="quadrature")
        assert analytic.method == "analytic"
        assert quad.method == "quadrature"
        np.testing.assert_allclose(quad.matrix, analytic.matrix, atol=1e-8)


def test_wim_quadrature_path_without_closed_forms(gaussian_fam):
    stripped = dataclasses.replace(
        gaussian_fam, wim_closed=None, w_score_closed=None, w_score_xgrad_closed=None
    )
    got = wim(stripped, (0.7, 1.3))
    assert got.method == "quadrature"
    np.testing.assert_allclose(got.matrix, np.eye(2), atol=1e-9)
    with pytest.raises(NotWellDefined):
        wim(stripped, (0.7, 1.3), method="analytic")


def test_exponential_wim_off_diagonal_is_negative(exponential_fam):
    lam = 1.3
    got = wim(exponential_fam, (0.4, lam), method="quadrature").matrix
    expected = np.array(
        [[1.0, -1.0 / lam**2], [-1.0 / lam**2, 2.0 / lam**4]]
    )
    np.testing.assert_allclose(got, expected, atol=1e-9)
    # sanity: with this sign the information bound for T(x) = x is attained
    # (Cov_W[T] = 1 = grad^T G^{-1} grad); the opposite sign would give 5.
    grad = np.array([1.0, -1.0 / lam**2])
    bound = grad @ np.linalg.solve(expected, grad)
    assert bound == pytest.approx(1.0, rel=1e-12)


def test_wim_separability_for_products(gaussian_fam, laplacian_fam):
    theta = (0.2, 1.1)
    prod = families.product(gaussian_fam, gaussian_fam)
    np.testing.assert_allclose(
        wim(prod, theta).matrix, 2.0 * wim(gaussian_fam, theta).matrix, atol=1e-12
    )


def test_wim_min_eig_positive(gaussian_fam):
    info = wim(gaussian_fam, (0.0, 2.0))
    assert info.min_eig > 0.9


def test_info_matrix_coerces_under_asarray(gaussian_fam):
    info = wim(gaussian_fam, (0.0, 1.0))
    np.testing.assert_array_equal(np.asarray(info), info.matrix)
    np.testing.assert_array_equal(np.round(info, 6), info.matrix)
    copied = np.array(info, copy=True)
    copied[0, 0] = 99.0
    assert info.matrix[0, 0] == 1.0


def test_wim_distance_probe_matches_analytic(gaussian_fam, uniform_fam):
    for fam, theta in [(gaussian_fam, (0.7, 1.3)), (uniform_fam, (-1.2, 2.5))]:
        probe = wim_from_distance(fam, theta)
        assert probe.method == "distance-fd"
        np.testing.assert_allclose(
            probe.matrix, wim(fam, theta).matrix, atol=5e-4
        )


def test_relu_wim_from_distance_and_fim_not_well_defined():
    from scipy.special import ndtr

    for kind, closed in [("f", lambda t: 1.0 - ndtr(t)), ("h", ndtr)]:
        fam = families.relu_family(kind)
        for th in (-1.1, 0.0, 0.6):
            got = wim(fam, (th,)).matrix[0, 0]
            assert got == pytest.approx(closed(th), abs=1e-3)
            assert fam.wim_closed(np.array([th]))[0, 0] == pytest.approx(
                closed(th), rel=1e-12
            )
        with pytest.raises(NotWellDefined):
            fim(fam, (0.6,))


def test_relu_wim_closed_literals():
    f = families.relu_family("f")
    h = families.relu_family("h")
    assert f.wim_closed(np.array([0.6]))[0, 0] == pytest.approx(
        0.27425311775007358, abs=1e-14
    )
    assert h.wim_closed(np.array([-1.1]))[0, 0] == pytest.approx(
        0.13566606094638268, abs=1e-14
    )


def test_fisher_score_and_fim(gaussian_fam, laplacian_fam):
    theta = (0.7, 1.3)
    xs = np.linspace(-1.0, 2.5, 7)
    closed = fisher_score(gaussian_fam, theta, 1, xs)
    generic = fisher_score(gaussian_fam, theta, 1, xs, method="fd")
    np.testing.assert_allclose(generic, closed, rtol=1e-6, atol=1e-8)

    got = fim(gaussian_fam, theta, method="quadrature").matrix
    np.testing.assert_allclose(got, np.diag([1 / 1.69, 2 / 1.69]), atol=1e-8)
    np.testing.assert_allclose(
        fim(laplacian_fam, (-0.3, 1.7)).matrix, np.diag([2.89, 1 / 2.89]), rtol=1e-12
    )


def test_fisher_not_well_defined_components(exponential_fam, uniform_fam):
    with pytest.raises(NotWellDefined) as err:
        fisher_score(exponential_fam, (0.4, 1.3), 0, 1.0)
    assert getattr(err.value, "component", None) == 0
    # the rate component exists: d/dlam log p = 1/lam - (x - m)
    val = fisher_score(exponential_fam, (0.4, 1.3), 1, 1.0)
    assert val == pytest.approx(1 / 1.3 - 0.6, rel=1e-12)
    for fam in (exponential_fam, uniform_fam, families.semicircle()):
        with pytest.raises(NotWellDefined):
            fim(fam, (0.4, 1.3) if fam.name != "semicircle" else (0.5, 2.0))


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def test_w2_gaussian_pair_exact(gaussian_fam):
    got = w2_distance_1d((gaussian_fam, (0.0, 1.0)), (gaussian_fam, (1.0, 2.0)))
    assert got == pytest.approx(2.0, abs=1e-5)


def test_w2_uniform_pair_exact(uniform_fam):
    # quantiles u and 1 + 2u: integral of (1 + u)^2 du = 7/3
    got = w2_distance_1d((uniform_fam, (0.0, 1.0)), (uniform_fam, (1.0, 3.0)))
    assert got == pytest.approx(7.0 / 3.0, abs=1e-10)


def test_w2_cross_family_frozen_value(gaussian_fam, laplacian_fam):
    got = w2_distance_1d((gaussian_fam, (0.0, 1.0)), (laplacian_fam, (0.0, 1.5)))
    assert got == pytest.approx(0.0384487427527817484, abs=2e-5)


def test_w2_accepts_distribution_objects(gaussian_fam):
    a = Distribution1D.from_family(gaussian_fam, (0.0, 1.0))
    b = Distribution1D.from_family(gaussian_fam, (3.0, 1.0))
    assert w2_distance_1d(a, b) == pytest.approx(9.0, abs=1e-4)
    with pytest.raises(DimensionMismatch):
        w2_distance_1d(a, "not a distribution")


def test_w2_same_law_is_zero(gaussian_fam):
    assert w2_distance_1d((gaussian_fam, (0.3, 0.9)), (gaussian_fam, (0.3, 0.9))) == 0.0


def test_location_scale_transport_map_pushes_forward():
    fam = families.location_scale("logistic")
    ta, tb = (0.3, 1.6), (-1.0, 0.7)
    tmap = location_scale_transport_map(ta, tb)
    u = np.linspace(0.05, 0.95, 11)
    qa = families.quantile(fam, ta, u)
    qb = families.quantile(fam, tb, u)
    # the affine monotone map sends the u-quantile of A to the u-quantile of B
    np.testing.assert_allclose(tmap(qa), qb, atol=1e-12)
    # and the straight-line cost it realizes equals W2^2
    cost = expectation(fam, ta, lambda x: (tmap(x) - x) ** 2)
    assert cost == pytest.approx(w2_distance_1d((fam, ta), (fam, tb)), rel=1e-4)


def test_expectation_rejects_non_smooth():
    with pytest.raises(NotSmooth):
        expectation(families.relu_family("f"), (0.5,), lambda z: z)
