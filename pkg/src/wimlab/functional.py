"""Entropy functionals, Wasserstein Hessians, and LSI/Poincare certificates.

All functionals follow the negative-entropy sign convention

    H(theta)            = E_theta[log p(x; theta)],
    H(theta | theta*)   = KL(p_theta || p_theta*),

so that the relative entropy is nonnegative and vanishes exactly at the
reference parameter.  The relative Fisher information is its squared
Wasserstein-gradient norm,

    I(theta | theta*) = grad H^T G_W(theta)^{-1} grad H,

which is also the dissipation rate -dH/dt along the Wasserstein gradient
flow of H(. | theta*) restricted to the family.

A log-Sobolev inequality LSI(alpha) inside the family,
H(theta|theta*) <= I(theta|theta*) / (2 alpha), is certified through the
Hessian criterion: if

    Hess_W H(. | theta*)  >=  2 alpha G_W      on a parameter region,

where Hess_W is the metric Hessian (raw second partials corrected by the
Levi-Civita Christoffel symbols of G_W), then LSI(alpha) holds on that
region.  ``riw_check`` evaluates the worst eigenvalue gap over a grid and
issues the certificate; ``lsi_ratio`` gives the pointwise largest admissible
alpha for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._numeric import fd_step
from .errors import (
    DivisionByZero,
    NonDifferentiableMetric,
    NotSmooth,
    QuadratureFailure,
    SingularWIM,
    SupportMismatch,
)
from .families import FamilyDescriptor, ProductFamily, check_theta
from .geometry import expectation, wim

__all__ = [
    "EntropyReport",
    "HessianReport",
    "LsiCertificate",
    "entropy",
    "relative_entropy",
    "relative_entropy_grad",
    "relative_fisher_info",
    "entropy_report",
    "wasserstein_christoffel",
    "wasserstein_hessian",
    "riw_check",
    "max_certifiable_alpha",
    "lsi_ratio",
    "default_lsi_grid",
]

GAP_TOLERANCE = 1e-8
"""Eigenvalue slack below zero still counted as "holds" (round-off guard)."""


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropyReport:
    """Entropy functionals of one parameter point against a reference."""

    H: float          # negative differential entropy E[log p]
    H_rel: float      # KL(p_theta || p_theta*)
    I_rel: float      # relative Fisher information in the Wasserstein metric
    grad_W: np.ndarray  # Wasserstein gradient G_W^{-1} grad_theta H_rel
    theta: tuple
    theta_star: tuple

    def __post_init__(self):
        if self.H_rel < -1e-12:
            raise ValueError(f"relative entropy must be >= 0, got {self.H_rel}")


@dataclass(frozen=True)
class HessianReport:
    """Metric Hessian of the relative entropy and its ingredients."""

    hess: np.ndarray         # d x d, Hess_W H_rel = d2 H - Gamma^k . grad_k H
    christoffel: np.ndarray  # (d, d, d), Gamma[k, i, j] = Gamma^k_{ij}
    theta: tuple
    theta_star: tuple

    def __post_init__(self):
        if not np.allclose(self.hess, self.hess.T, atol=1e-8):
            raise ValueError("metric Hessian must be symmetric")


@dataclass(frozen=True)
class LsiCertificate:
    """Outcome of the Hessian-domination check over a parameter grid."""

    alpha: float
    grid: np.ndarray          # (n_points, d) parameter points checked
    min_gap_eig: float        # min over grid of least eig(Hess - 2 alpha G_W)
    holds: bool
    argmin: tuple = ()        # grid point attaining min_gap_eig

    def __post_init__(self):
        if self.holds != (self.min_gap_eig >= -GAP_TOLERANCE):
            raise ValueError("holds flag inconsistent with min_gap_eig")


# ---------------------------------------------------------------------------
# entropy functionals
# ---------------------------------------------------------------------------

def _require_scalar_family(fam):
    if isinstance(fam, ProductFamily):
        raise NotSmooth(
            "entropy functionals on product families: sum the factor values"
        )


def entropy(fam: FamilyDescriptor, theta) -> float:
    """H(theta) = E[log p(x; theta)] (closed form if registered, else quadrature)."""
    _require_scalar_family(fam)
    theta = check_theta(fam, theta)
    if fam.entropy_closed is not None:
        return float(fam.entropy_closed(theta))
    return _entropy_quadrature(fam, theta)


def _entropy_quadrature(fam, theta) -> float:
    def integrand(z: float) -> float:
        p = float(fam.density_fn(theta, z))
        return math.log(p) if p > 0.0 else 0.0  # p log p -> 0 at the tails

    return expectation(fam, theta, integrand)


def relative_entropy(fam: FamilyDescriptor, theta, theta_star) -> float:
    """KL(p_theta || p_theta*); +inf when the reference does not dominate."""
    _require_scalar_family(fam)
    theta = check_theta(fam, theta)
    theta_star = check_theta(fam, theta_star)
    if fam.rel_entropy_closed is not None:
        return float(fam.rel_entropy_closed(theta, theta_star))
    return _relative_entropy_quadrature(fam, theta, theta_star)


def _relative_entropy_quadrature(fam, theta, theta_star) -> float:
    lo_t, hi_t = fam.support(theta)
    lo_s, hi_s = fam.support(theta_star)
    if lo_t < lo_s - 1e-12 or hi_t > hi_s + 1e-12:
        return math.inf  # p_theta has mass where the reference vanishes

    def integrand(z: float) -> float:
        p = float(fam.density_fn(theta, z))
        if p <= 0.0:
            return 0.0
        q = float(fam.density_fn(theta_star, z))
        if q <= 0.0:
            raise SupportMismatch(
                f"{fam.name}: reference density vanishes inside the support "
                f"of theta={tuple(theta)}"
            )
        return math.log(p / q)

    return expectation(fam, theta, integrand)


def relative_entropy_grad(fam: FamilyDescriptor, theta, theta_star) -> np.ndarray:
    """grad_theta KL(p_theta || p_theta*), closed form else central differences."""
    _require_scalar_family(fam)
    theta = check_theta(fam, theta)
    theta_star = check_theta(fam, theta_star)
    if fam.rel_entropy_grad_closed is not None:
        return np.asarray(fam.rel_entropy_grad_closed(theta, theta_star), dtype=float)
    h0 = relative_entropy(fam, theta, theta_star)
    if not math.isfinite(h0):
        raise SupportMismatch(
            f"{fam.name}: relative entropy infinite at theta={tuple(theta)}; "
            "no gradient"
        )
    grad = np.empty(fam.dim)
    for j in range(fam.dim):
        h = fd_step(theta[j], 1e-6)
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        grad[j] = (
            relative_entropy(fam, tp, theta_star)
            - relative_entropy(fam, tm, theta_star)
        ) / (2.0 * h)
    return grad


def relative_fisher_info(fam: FamilyDescriptor, theta, theta_star) -> float:
    """I(theta|theta*) = grad H_rel^T G_W(theta)^{-1} grad H_rel."""
    grad = relative_entropy_grad(fam, theta, theta_star)
    g = wim(fam, theta).matrix
    try:
        nat = np.linalg.solve(g, grad)
    except np.linalg.LinAlgError as exc:
        raise SingularWIM(
            f"{fam.name}: WIM singular at theta={tuple(np.atleast_1d(theta))}"
        ) from exc
    return float(grad @ nat)


def entropy_report(fam: FamilyDescriptor, theta, theta_star) -> EntropyReport:
    """Bundle H, H_rel, I_rel and the Wasserstein gradient at one point."""
    theta = check_theta(fam, theta)
    theta_star = check_theta(fam, theta_star)
    grad = relative_entropy_grad(fam, theta, theta_star)
    g = wim(fam, theta).matrix
    nat = np.linalg.solve(g, grad)
    return EntropyReport(
        H=entropy(fam, theta),
        H_rel=relative_entropy(fam, theta, theta_star),
        I_rel=float(grad @ nat),
        grad_W=nat,
        theta=tuple(theta),
        theta_star=tuple(theta_star),
    )


# ---------------------------------------------------------------------------
# Christoffel symbols and the metric Hessian
# ---------------------------------------------------------------------------

def wasserstein_christoffel(
    fam: FamilyDescriptor, theta, h_scale: float = 1e-5
) -> np.ndarray:
    """Levi-Civita Christoffel symbols of G_W at theta, Gamma[k, i, j].

    Closed form when registered; otherwise central finite differences of the
    metric entries,

        Gamma^k_ij = (1/2) G^{kl} (d_i G_lj + d_j G_li - d_l G_ij).
    """
    _require_scalar_family(fam)
    theta = check_theta(fam, theta)
    if fam.christoffel_closed is not None:
        return np.asarray(fam.christoffel_closed(theta), dtype=float)
    d = fam.dim
    g0 = wim(fam, theta).matrix
    dg = np.empty((d, d, d))  # dg[l, i, j] = d G_ij / d theta_l
    for l in range(d):
        h = fd_step(theta[l], h_scale)
        tp, tm = theta.copy(), theta.copy()
        tp[l] += h
        tm[l] -= h
        try:
            gp = wim(fam, tp).matrix
            gm = wim(fam, tm).matrix
        except Exception as exc:  # metric not evaluable in a neighborhood
            raise NonDifferentiableMetric(
                f"{fam.name}: cannot differentiate G_W at theta={tuple(theta)}"
            ) from exc
        dg[l] = (gp - gm) / (2.0 * h)
    lowered = np.empty((d, d, d))  # Gamma_{ij,l}
    for i in range(d):
        for j in range(d):
            for l in range(d):
                lowered[i, j, l] = 0.5 * (dg[i][l, j] + dg[j][l, i] - dg[l][i, j])
    try:
        ginv = np.linalg.inv(g0)
    except np.linalg.LinAlgError as exc:
        raise SingularWIM(f"{fam.name}: WIM singular at theta={tuple(theta)}") from exc
    return np.einsum("kl,ijl->kij", ginv, lowered)


def _rel_entropy_d2(fam, theta, theta_star, h_scale: float = 1e-5) -> np.ndarray:
    """Raw second partials of the relative entropy (no metric correction)."""
    if fam.rel_entropy_d2_closed is not None:
        return np.asarray(fam.rel_entropy_d2_closed(theta, theta_star), dtype=float)
    d = fam.dim
    f0 = relative_entropy(fam, theta, theta_star)
    if not math.isfinite(f0):
        raise SupportMismatch(
            f"{fam.name}: relative entropy infinite at theta={tuple(theta)}; "
            "no Hessian"
        )

    def f(t):
        return relative_entropy(fam, t, theta_star)

    out = np.empty((d, d))
    steps = [fd_step(theta[j], h_scale) for j in range(d)]
    for i in range(d):
        hi_ = steps[i]
        tp, tm = theta.copy(), theta.copy()
        tp[i] += hi_
        tm[i] -= hi_
        out[i, i] = (f(tp) - 2.0 * f0 + f(tm)) / hi_**2
        for j in range(i + 1, d):
            hj = steps[j]
            tpp, tpm, tmp, tmm = (theta.copy() for _ in range(4))
            tpp[[i, j]] += [hi_, hj]
            tpm[[i, j]] += [hi_, -hj]
            tmp[[i, j]] += [-hi_, hj]
            tmm[[i, j]] += [-hi_, -hj]
            out[i, j] = out[j, i] = (f(tpp) - f(tpm) - f(tmp) + f(tmm)) / (
                4.0 * hi_ * hj
            )
    return out


def wasserstein_hessian(fam: FamilyDescriptor, theta, theta_star) -> HessianReport:
    """Metric Hessian of H(. | theta*) at theta: d2 H - Gamma^k_ij d_k H."""
    _require_scalar_family(fam)
    theta = check_theta(fam, theta)
    theta_star = check_theta(fam, theta_star)
    d2 = _rel_entropy_d2(fam, theta, theta_star)
    gamma = wasserstein_christoffel(fam, theta)
    grad = relative_entropy_grad(fam, theta, theta_star)
    hess = d2 - np.einsum("kij,k->ij", gamma, grad)
    hess = 0.5 * (hess + hess.T)
    return HessianReport(
        hess=hess,
        christoffel=gamma,
        theta=tuple(theta),
        theta_star=tuple(theta_star),
    )


# ---------------------------------------------------------------------------
# LSI certificates
# ---------------------------------------------------------------------------

def _as_grid(fam, theta_grid) -> np.ndarray:
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None] if fam.dim == 1 else grid[None, :]
    if grid.ndim != 2 or grid.shape[1] != fam.dim:
        raise ValueError(
            f"grid must have shape (n, {fam.dim}), got {grid.shape}"
        )
    return grid


def riw_check(fam: FamilyDescriptor, theta_grid, theta_star, alpha: float) -> LsiCertificate:
    """Certify LSI(alpha) on a grid via Hess_W H_rel >= 2 alpha G_W.

    Evaluates the least eigenvalue of (Hess - 2 alpha G_W) at every grid
    point; the certificate holds when the worst one stays above -1e-8.
    """
    theta_star = check_theta(fam, theta_star)
    grid = _as_grid(fam, theta_grid)
    worst = math.inf
    argmin: tuple = ()
    for row in grid:
        rep = wasserstein_hessian(fam, row, theta_star)
        gw = wim(fam, row).matrix
        gap = rep.hess - 2.0 * alpha * gw
        lam = float(scipy.linalg.eigh(gap, eigvals_only=True)[0])
        if lam < worst:
            worst = lam
            argmin = tuple(float(v) for v in row)
    return LsiCertificate(
        alpha=float(alpha),
        grid=grid,
        min_gap_eig=worst,
        holds=worst >= -GAP_TOLERANCE,
        argmin=argmin,
    )


def max_certifiable_alpha(fam: FamilyDescriptor, theta_grid, theta_star) -> float:
    """Largest alpha the Hessian criterion certifies on the grid.

    Equals half the minimum over the grid of the least generalized eigenvalue
    of (Hess_W H_rel, G_W); riw_check at this alpha holds with min_gap_eig 0
    at the binding grid point.
    """
    theta_star = check_theta(fam, theta_star)
    grid = _as_grid(fam, theta_grid)
    worst = math.inf
    for row in grid:
        rep = wasserstein_hessian(fam, row, theta_star)
        gw = wim(fam, row).matrix
        lam = float(scipy.linalg.eigh(rep.hess, gw, eigvals_only=True)[0])
        worst = min(worst, lam)
    return 0.5 * worst


def lsi_ratio(fam: FamilyDescriptor, theta, theta_star) -> float:
    """Pointwise largest alpha with H_rel <= I_rel / (2 alpha): I / (2 H)."""
    h = relative_entropy(fam, theta, theta_star)
    if h <= 0.0:
        raise DivisionByZero(
            "lsi_ratio undefined at theta = theta_star (relative entropy 0)"
        )
    if not math.isfinite(h):
        return 0.0  # reference does not dominate: no positive alpha works
    return relative_fisher_info(fam, theta, theta_star) / (2.0 * h)


def default_lsi_grid(
    fam: FamilyDescriptor,
    theta_star,
    n_loc: int = 50,
    n_scale: int = 50,
) -> np.ndarray:
    """Default (location, scale) grid around theta_star for LSI sweeps.

    Location spans +-5 standard deviations around the reference location
    (even point count, so the reference location itself is never a grid
    point); the positive second component spans [0.1, 5] times its reference
    value.  Requires a two-parameter family whose second component is
    positivity-constrained.
    """
    theta_star = check_theta(fam, theta_star)
    if fam.dim != 2 or 1 not in fam.positive_components:
        raise ValueError(
            f"{fam.name}: default grid needs a (location, positive-scale) family"
        )
    # Characteristic spatial width from the quantile spread (family-agnostic;
    # for rate-parameterized families 'scale' grows as the rate shrinks).
    q84 = float(fam.quantile_fn(theta_star, np.asarray(0.84)))
    q16 = float(fam.quantile_fn(theta_star, np.asarray(0.16)))
    width = 0.5 * (q84 - q16)
    locs = np.linspace(theta_star[0] - 5 * width, theta_star[0] + 5 * width, n_loc)
    scales = np.linspace(0.1 * theta_star[1], 5.0 * theta_star[1], n_scale)
    ll, ss = np.meshgrid(locs, scales, indexing="ij")
    return np.column_stack([ll.ravel(), ss.ravel()])
