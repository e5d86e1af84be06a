"""Entropy functionals, the metric Hessian, and log-Sobolev certificates.

Frozen reference numbers come from 30-digit quadrature and symbolic
differentiation of the textbook KL formulas, independent of this library.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from wimlab import families
from wimlab.errors import DivisionByZero, SupportMismatch
from wimlab.functional import (
    GAP_TOLERANCE,
    default_lsi_grid,
    entropy,
    entropy_report,
    lsi_ratio,
    max_certifiable_alpha,
    relative_entropy,
    relative_entropy_grad,
    relative_fisher_info,
    riw_check,
    wasserstein_christoffel,
    wasserstein_hessian,
)

G_THETA = (0.7, 1.3)
G_STAR = (-0.2, 0.8)
L_THETA = (0.4, 2.2)
L_STAR = (0.0, 1.5)


# ---------------------------------------------------------------------------
# entropy and relative entropy
# ---------------------------------------------------------------------------

def test_entropy_closed_and_quadrature(gaussian_fam):
    want = -1.6813027976721638
    assert entropy(gaussian_fam, G_THETA) == pytest.approx(want, abs=1e-12)
    stripped = dataclasses.replace(gaussian_fam, entropy_closed=None)
    assert entropy(stripped, G_THETA) == pytest.approx(want, abs=1e-9)


def test_relative_entropy_closed_and_quadrature(gaussian_fam, laplacian_fam):
    assert relative_entropy(gaussian_fam, G_THETA, G_STAR) == pytest.approx(
        0.96761718421829919, abs=1e-12
    )
    stripped = dataclasses.replace(gaussian_fam, rel_entropy_closed=None)
    assert relative_entropy(stripped, G_THETA, G_STAR) == pytest.approx(
        0.96761718421829919, abs=1e-9
    )
    assert relative_entropy(laplacian_fam, L_THETA, L_STAR) == pytest.approx(
        0.26579878294809308, abs=1e-12
    )


def test_relative_entropy_infinite_without_absolute_continuity(
    exponential_fam, uniform_fam
):
    # exponential support starts left of the reference's: KL = +infinity
    assert relative_entropy(exponential_fam, (0.1, 2.0), (0.2, 1.3)) == math.inf
    # same through the quadrature preflight (no closed form registered)
    stripped = dataclasses.replace(uniform_fam, rel_entropy_closed=None)
    assert relative_entropy(stripped, (0.0, 2.0), (0.5, 1.5)) == math.inf


def test_relative_entropy_grad_closed_fd_and_support_mismatch(
    gaussian_fam, laplacian_fam, exponential_fam
):
    np.testing.assert_allclose(
        relative_entropy_grad(gaussian_fam, G_THETA, G_STAR),
        [1.40625, 1.2620192307692308],
        atol=1e-12,
    )
    stripped = dataclasses.replace(gaussian_fam, rel_entropy_grad_closed=None)
    np.testing.assert_allclose(
        relative_entropy_grad(stripped, G_THETA, G_STAR),
        [1.40625, 1.2620192307692308],
        rtol=1e-6,
    )
    np.testing.assert_allclose(
        relative_entropy_grad(laplacian_fam, L_THETA, L_STAR),
        [0.87782563247762795, 0.21287441922684722],
        atol=1e-12,
    )
    with pytest.raises(SupportMismatch):
        relative_entropy_grad(exponential_fam, (0.1, 2.0), (0.2, 1.3))


def test_relative_fisher_info_value_and_identity(gaussian_fam):
    got = relative_fisher_info(gaussian_fam, G_THETA, G_STAR)
    assert got == pytest.approx(3.5702316013313609, rel=1e-12)
    # location-scale form: (mu-mu*)^2/sigma*^4 + (sigma/sigma*^2 - 1/sigma)^2
    mu, sig = G_THETA
    mus, sigs = G_STAR
    direct = (mu - mus) ** 2 / sigs**4 + (sig / sigs**2 - 1 / sig) ** 2
    assert got == pytest.approx(direct, rel=1e-12)


def test_entropy_report_bundle(gaussian_fam):
    rep = entropy_report(gaussian_fam, G_THETA, G_STAR)
    assert rep.H == pytest.approx(-1.6813027976721638, abs=1e-12)
    assert rep.H_rel == pytest.approx(0.96761718421829919, abs=1e-12)
    assert rep.I_rel == pytest.approx(3.5702316013313609, rel=1e-12)
    # Gaussian G_W = I, so the Wasserstein gradient is the plain gradient
    np.testing.assert_allclose(rep.grad_W, [1.40625, 1.2620192307692308], atol=1e-12)
    assert rep.theta == tuple(G_THETA)


# ---------------------------------------------------------------------------
# Christoffel symbols and the metric Hessian
# ---------------------------------------------------------------------------

def test_christoffel_gaussian_vanishes(gaussian_fam):
    gamma = wasserstein_christoffel(gaussian_fam, G_THETA)
    np.testing.assert_allclose(gamma, 0.0, atol=1e-12)


def test_christoffel_laplacian_closed_and_fd(laplacian_fam):
    gamma = wasserstein_christoffel(laplacian_fam, L_THETA)
    expected = np.zeros((2, 2, 2))
    expected[1, 1, 1] = -2.0 / 2.2
    np.testing.assert_allclose(gamma, expected, atol=1e-12)
    stripped = dataclasses.replace(laplacian_fam, christoffel_closed=None)
    np.testing.assert_allclose(
        wasserstein_christoffel(stripped, L_THETA), expected, atol=1e-5
    )


def test_hessian_gaussian_value(gaussian_fam):
    rep = wasserstein_hessian(gaussian_fam, G_THETA, G_STAR)
    mu, sig = G_THETA
    mus, sigs = G_STAR
    np.testing.assert_allclose(
        rep.hess, np.diag([1 / sigs**2, 1 / sig**2 + 1 / sigs**2]), atol=1e-10
    )


def test_hessian_laplacian_frozen_value(laplacian_fam):
    # symbolic differentiation of the closed KL, plus the -Gamma.grad term
    expected = np.array(
        [
            [1.3687836085492185, 0.24886974700894882],
            [0.24886974700894882, 0.25186061515865185],
        ]
    )
    rep = wasserstein_hessian(laplacian_fam, L_THETA, L_STAR)
    np.testing.assert_allclose(rep.hess, expected, atol=1e-10)
    # finite-difference route (no closed second partials) agrees
    stripped = dataclasses.replace(laplacian_fam, rel_entropy_d2_closed=None)
    rep_fd = wasserstein_hessian(stripped, L_THETA, L_STAR)
    np.testing.assert_allclose(rep_fd.hess, expected, rtol=1e-4, atol=1e-6)


def test_hessian_is_positive_definite_near_reference(gaussian_fam):
    rep = wasserstein_hessian(gaussian_fam, (0.1, 1.05), (0.0, 1.0))
    assert np.linalg.eigvalsh(rep.hess)[0] > 0


# ---------------------------------------------------------------------------
# LSI certificates
# ---------------------------------------------------------------------------

def test_riw_check_gaussian_threshold(gaussian_fam):
    star = (0.0, 1.0)
    grid = default_lsi_grid(gaussian_fam, star)
    alpha = 0.5  # 1/(2 sigma*^2)
    cert = riw_check(gaussian_fam, grid, star, alpha)
    assert cert.holds
    assert cert.min_gap_eig >= -GAP_TOLERANCE
    worse = riw_check(gaussian_fam, grid, star, 1.2 * alpha)
    assert not worse.holds
    assert worse.min_gap_eig < -1e-3


def test_max_certifiable_alpha_gaussian_exact(gaussian_fam):
    # Hess = diag(1/sigma*^2, ...) with G_W = I: the binding generalized
    # eigenvalue is exactly 1/sigma*^2 at every grid point.
    star = (1.0, 2.0)
    grid = default_lsi_grid(gaussian_fam, star)
    alpha = max_certifiable_alpha(gaussian_fam, grid, star)
    assert alpha == pytest.approx(1 / (2 * 2.0**2), rel=1e-12)


def test_lsi_ratio_value_and_guards(gaussian_fam, exponential_fam):
    ratio = lsi_ratio(gaussian_fam, G_THETA, G_STAR)
    assert ratio == pytest.approx(3.5702316013313609 / (2 * 0.96761718421829919), rel=1e-10)
    with pytest.raises(DivisionByZero):
        lsi_ratio(gaussian_fam, G_STAR, G_STAR)
    # infinite KL: no positive alpha satisfies the defining inequality
    assert lsi_ratio(exponential_fam, (0.1, 2.0), (0.2, 1.3)) == 0.0


def test_default_lsi_grid_shape_and_exclusions(gaussian_fam):
    star = (0.0, 1.0)
    grid = default_lsi_grid(gaussian_fam, star)
    assert grid.shape == (2500, 2)
    assert np.all(grid[:, 1] > 0)
    assert not np.any(np.all(grid == np.asarray(star), axis=1))


def test_default_lsi_grid_rejects_unsupported_shapes():
    with pytest.raises(ValueError):
        default_lsi_grid(families.relu_family("f"), (0.5,))
    with pytest.raises(ValueError):
        default_lsi_grid(families.uniform(), (0.0, 1.0))


def test_laplacian_certificate_matches_printed_min_formula(laplacian_fam):
    # On a region where the reference-vs-point separation is large enough
    # that the Hessian is effectively diagonal, the certified constant
    # coincides (to 1e-6) with the per-entry min formula
    #   min( lam lam* e^{-lam |m - m*|},
    #        (lam^2 + lam* e^{-lam |m-m*|} lam (m - m*)^2) / 2 ).
    star = np.array([0.0, 1.0])
    ms = np.setdiff1d(np.linspace(-1.0, 1.0, 11), [0.0])
    lams = np.linspace(4.0, 10.0, 13)
    grid = np.array([(m, l) for m in ms for l in lams])
    certified = 2.0 * max_certifiable_alpha(laplacian_fam, grid, star)

    lam_s = star[1]
    u = np.abs(grid[:, 0] - star[0])
    lam = grid[:, 1]
    e = np.exp(-lam * u)
    formula = np.minimum(lam * lam_s * e, 0.5 * (lam**2 + lam_s * e * lam * u**2))
    assert certified == pytest.approx(float(formula.min()), abs=1e-6)
