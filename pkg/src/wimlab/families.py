"""Parametric families on the real line and their registered closed forms.

A family is a bundle of callables (density, CDF, CDF parameter-gradient,
quantile) plus optional closed forms (Wasserstein scores, information
matrices, entropies, ...).  Downstream modules consume families only through
the :class:`FamilyDescriptor` interface, falling back to quadrature whenever
a closed form is absent, so a new family is usable the moment it provides the
four basic callables.

Conventions
-----------
* ``theta`` is a 1-d float array of length ``dim``; closed-form callables
  broadcast over a leading batch axis (``theta`` of shape ``(n, dim)`` with
  ``x`` of shape ``(n,)``) because the online-dynamics engine evaluates whole
  ensembles in lock step.
* Location/scale families order parameters as (location, scale).
* CDF parameter gradients return one column per parameter; for families with
  bounded support they are zero outside the support.
* ``smooth`` is False for push-forward families with atoms; density-based
  operations raise :class:`~wimlab.errors.NotSmooth` for those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri

from ._numeric import bisect_increasing
from .errors import (
    ConfigError,
    DimensionMismatch,
    DomainError,
    NonCdfInput,
    NotSmooth,
    SupportMismatch,
)

__all__ = [
    "FamilyDescriptor",
    "ProductFamily",
    "Distribution1D",
    "gaussian",
    "exponential",
    "laplacian",
    "uniform",
    "semicircle",
    "location_scale",
    "relu_family",
    "product",
    "resolve_family",
    "check_theta",
    "density",
    "cdf",
    "cdf_param_grad",
    "quantile",
    "sample",
    "FAMILY_NAMES",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FamilyDescriptor:
    """A 1-d parametric family plus whatever closed forms it registers.

    Only ``name`` through ``quantile_fn`` are mandatory.  Every ``*_closed``
    field defaults to None, meaning "no closed form: use quadrature or report
    not-well-defined", matching how the information-matrix tables treat
    missing entries.
    """

    name: str
    dim: int
    param_names: tuple[str, ...]
    validate: Callable[[np.ndarray], Optional[str]]
    support: Callable[[np.ndarray], tuple[float, float]]
    quad_bounds: Callable[[np.ndarray], tuple[float, float]]
    density_fn: Callable
    cdf_fn: Callable
    cdf_param_grad_fn: Callable
    quantile_fn: Callable
    smooth: bool = True
    breakpoints: Callable[[np.ndarray], tuple[float, ...]] = lambda theta: ()
    atoms: Callable[[np.ndarray], tuple[tuple[float, float], ...]] = lambda theta: ()
    # Components that must stay strictly positive (scale-type parameters).
    positive_components: tuple[int, ...] = ()
    # --- closed forms (None => not registered) ---
    w_score_closed: Optional[Callable] = None        # (theta, x) -> (..., dim)
    w_score_xgrad_closed: Optional[Callable] = None  # spatial gradient, same shape
    wim_closed: Optional[Callable] = None            # theta -> (..., dim, dim)
    fisher_components: tuple[bool, ...] = ()
    fisher_score_closed: Optional[Callable] = None     # full vector or None
    fisher_score_xgrad_closed: Optional[Callable] = None
    # True when the spatial gradient of a Fisher score exists only in the
    # distributional sense (Dirac at a kink): usable a.e. by the dynamics but
    # rejected by quadrature-based sensitivity integrals.
    fisher_xgrad_distributional: bool = False
    fim_closed: Optional[Callable] = None
    entropy_closed: Optional[Callable] = None
    rel_entropy_closed: Optional[Callable] = None       # (theta, theta_star)
    rel_entropy_grad_closed: Optional[Callable] = None  # (theta, theta_star) -> (dim,)
    rel_entropy_d2_closed: Optional[Callable] = None    # raw second partials
    christoffel_closed: Optional[Callable] = None       # theta -> (dim, dim, dim)

    def __repr__(self) -> str:  # keep reprs short in test failure output
        return f"FamilyDescriptor({self.name!r})"


@dataclass(frozen=True)
class ProductFamily:
    """Independent product of factor families sharing one parameter vector.

    The sample space is R^k (one coordinate per factor); scores add across
    factors and the Wasserstein information matrix is the sum of the factor
    matrices.
    """

    factors: tuple[FamilyDescriptor, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.factors) < 2:
            raise ConfigError("product family needs at least two factors")
        dims = {f.dim for f in self.factors}
        if len(dims) != 1:
            raise DimensionMismatch(
                f"product factors must share parameter dimension, got {sorted(dims)}"
            )
        if not self.name:
            object.__setattr__(
                self, "name", "product:" + ",".join(f.name for f in self.factors)
            )

    @property
    def dim(self) -> int:
        return self.factors[0].dim

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.factors[0].param_names

    @property
    def smooth(self) -> bool:
        return all(f.smooth for f in self.factors)

    def validate(self, theta: np.ndarray) -> Optional[str]:
        for f in self.factors:
            msg = f.validate(theta)
            if msg:
                return msg
        return None

    def __repr__(self) -> str:
        return f"ProductFamily({self.name!r})"


Family = FamilyDescriptor  # short alias used in annotations


# ---------------------------------------------------------------------------
# generic parameter / evaluation plumbing
# ---------------------------------------------------------------------------

def check_theta(fam, theta) -> np.ndarray:
    """Validate and canonicalize a parameter vector for ``fam``.

    Raises ``DimensionMismatch`` for wrong shape and ``DomainError`` when the
    vector violates the family's domain constraints.
    """
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 1 or arr.size != fam.dim:
        raise DimensionMismatch(
            f"{fam.name} expects theta of shape ({fam.dim},), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{fam.name}: non-finite parameter {arr!r}")
    msg = fam.validate(arr)
    if msg:
        raise DomainError(f"{fam.name}: {msg} (theta={arr!r})")
    return arr


def density(fam, theta, x):
    """Density p(x; theta).  Raises NotSmooth for families with atoms."""
    theta = check_theta(fam, theta)
    if isinstance(fam, ProductFamily):
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != len(fam.factors):
            raise DimensionMismatch(
                f"{fam.name} expects points with last axis {len(fam.factors)}"
            )
        out = np.ones(pts.shape[:-1], dtype=float)
        for k, f in enumerate(fam.factors):
            out = out * density(f, theta, pts[..., k])
        return out
    if not fam.smooth:
        raise NotSmooth(f"{fam.name} has an atom; density is not a function")
    return fam.density_fn(theta, np.asarray(x, dtype=float))


def cdf(fam, theta, x):
    """Cumulative distribution function F(x; theta) (right-continuous)."""
    theta = check_theta(fam, theta)
    return fam.cdf_fn(theta, np.asarray(x, dtype=float))


def cdf_param_grad(fam, theta, x):
    """Gradient of the CDF in theta: array (..., dim)."""
    theta = check_theta(fam, theta)
    return fam.cdf_param_grad_fn(theta, np.asarray(x, dtype=float))


def quantile(fam, theta, u):
    """Generalized inverse CDF at u in (0, 1)."""
    theta = check_theta(fam, theta)
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise DomainError("quantile arguments must lie strictly inside (0, 1)")
    return fam.quantile_fn(theta, u)


def sample(fam, theta, n: int, rng: np.random.Generator):
    """Draw n variates by inverse-CDF sampling from the given stream.

    Deterministic given the generator state.  For product families the result
    has shape (n, k) with independent columns.
    """
    theta = check_theta(fam, theta)
    if isinstance(fam, ProductFamily):
        cols = [sample(f, theta, n, rng) for f in fam.factors]
        return np.stack(cols, axis=-1)
    u = rng.random(n)
    # random() can return exactly 0.0; nudge into the open interval.
    u = np.maximum(u, 1e-16)
    return fam.quantile_fn(theta, u)


# ---------------------------------------------------------------------------
# Gaussian (mu, sigma)
# ---------------------------------------------------------------------------

def _gauss_density(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    z = (x - mu) / sig
    return np.exp(-0.5 * z * z) / (sig * math.sqrt(_TWO_PI))


def _gauss_cdf(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    return ndtr((x - mu) / sig)


def _gauss_cdf_pgrad(theta, x):
    p = _gauss_density(theta, x)
    mu, sig = theta[..., 0], theta[..., 1]
    z = (x - mu) / sig
    return np.stack([-p, -p * z], axis=-1)


def _gauss_w_score(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    d = x - mu
    return np.stack([d, (d * d - sig * sig) / (2.0 * sig)], axis=-1)


def _gauss_w_score_xgrad(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    ones = np.broadcast_to(1.0, np.broadcast_shapes(np.shape(x), mu.shape)).astype(float)
    return np.stack([ones, (x - mu) / sig], axis=-1)


def _gauss_wim(theta):
    shape = theta.shape[:-1] + (2, 2)
    out = np.zeros(shape)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    return out


def _gauss_fisher(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    d = x - mu
    return np.stack([d / sig**2, d * d / sig**3 - 1.0 / sig], axis=-1)


def _gauss_fisher_xgrad(theta, x):
    mu, sig = theta[..., 0], theta[..., 1]
    g0 = np.broadcast_to(1.0 / sig**2, np.broadcast_shapes(np.shape(x), mu.shape))
    return np.stack([g0.astype(float), 2.0 * (x - mu) / sig**3], axis=-1)


def _gauss_fim(theta):
    sig = theta[1]
    return np.diag([1.0 / sig**2, 2.0 / sig**2])


def _gauss_entropy(theta):
    # E[log p] = -1/2 log(2 pi) - log sigma - 1/2
    return -0.5 * math.log(_TWO_PI) - math.log(theta[1]) - 0.5


def _gauss_rel_entropy(theta, theta_star):
    mu, sig = theta
    mus, sigs = theta_star
    return (
        math.log(sigs / sig)
        - 0.5
        + (sig**2 + (mu - mus) ** 2) / (2.0 * sigs**2)
    )


def _gauss_rel_grad(theta, theta_star):
    mu, sig = theta
    mus, sigs = theta_star
    return np.array([(mu - mus) / sigs**2, -1.0 / sig + sig / sigs**2])


def _gauss_rel_d2(theta, theta_star):
    sig = theta[1]
    sigs = theta_star[1]
    return np.array([[1.0 / sigs**2, 0.0], [0.0, 1.0 / sig**2 + 1.0 / sigs**2]])


def gaussian() -> FamilyDescriptor:
    """Normal family N(mu, sigma^2) with parameters (mu, sigma)."""
    return FamilyDescriptor(
        name="gaussian",
        dim=2,
        param_names=("mu", "sigma"),
        validate=lambda t: None if t[1] > 0 else "sigma must be positive",
        support=lambda t: (-math.inf, math.inf),
        quad_bounds=lambda t: (t[0] - 12.0 * t[1], t[0] + 12.0 * t[1]),
        density_fn=_gauss_density,
        cdf_fn=_gauss_cdf,
        cdf_param_grad_fn=_gauss_cdf_pgrad,
        quantile_fn=lambda t, u: t[..., 0] + t[..., 1] * ndtri(u),
        positive_components=(1,),
        w_score_closed=_gauss_w_score,
        w_score_xgrad_closed=_gauss_w_score_xgrad,
        wim_closed=_gauss_wim,
        fisher_components=(True, True),
        fisher_score_closed=_gauss_fisher,
        fisher_score_xgrad_closed=_gauss_fisher_xgrad,
        fim_closed=_gauss_fim,
        entropy_closed=_gauss_entropy,
        rel_entropy_closed=_gauss_rel_entropy,
        rel_entropy_grad_closed=_gauss_rel_grad,
        rel_entropy_d2_closed=_gauss_rel_d2,
        christoffel_closed=lambda t: np.zeros((2, 2, 2)),
    )


# ---------------------------------------------------------------------------
# Exponential with location (m, lambda): p = lambda exp(-lambda (x - m)), x >= m
# ---------------------------------------------------------------------------

def _expo_density(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.where(z >= 0.0, lam * np.exp(-lam * np.maximum(z, 0.0)), 0.0)


def _expo_cdf(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.where(z >= 0.0, -np.expm1(-lam * np.maximum(z, 0.0)), 0.0)


def _expo_cdf_pgrad(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = np.maximum(x - m, 0.0)
    inside = (x - m) >= 0.0
    e = np.exp(-lam * z)
    return np.stack(
        [np.where(inside, -lam * e, 0.0), np.where(inside, z * e, 0.0)], axis=-1
    )


def _expo_w_score(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.stack([z - 1.0 / lam, 1.0 / lam**3 - z * z / (2.0 * lam)], axis=-1)


def _expo_w_score_xgrad(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    ones = np.broadcast_to(1.0, np.broadcast_shapes(np.shape(x), m.shape)).astype(float)
    return np.stack([ones, -(x - m) / lam], axis=-1)


def _expo_wim(theta):
    lam = theta[..., 1]
    shape = theta.shape[:-1] + (2, 2)
    out = np.zeros(shape)
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = -1.0 / lam**2
    out[..., 1, 0] = -1.0 / lam**2
    out[..., 1, 1] = 2.0 / lam**4
    return out


def _expo_fisher(theta, x):
    # Only the lambda component exists; geometry handles per-component access.
    m, lam = theta[..., 0], theta[..., 1]
    lam_score = 1.0 / lam - (x - m)
    nan = np.full(np.shape(lam_score), np.nan)
    return np.stack([nan, lam_score], axis=-1)


def _expo_rel_entropy(theta, theta_star):
    m, lam = theta
    ms, lams = theta_star
    if m < ms:
        return math.inf  # theta's support leaks outside the reference support
    return math.log(lam / lams) - 1.0 + lams * (m - ms + 1.0 / lam)


def _expo_rel_grad(theta, theta_star):
    m, lam = theta
    ms, lams = theta_star
    if m < ms:
        raise SupportMismatch("relative entropy infinite for m < m*; no gradient")
    return np.array([lams, 1.0 / lam - lams / lam**2])


def exponential() -> FamilyDescriptor:
    """Shifted exponential with parameters (m, lambda), support [m, inf)."""
    return FamilyDescriptor(
        name="exponential",
        dim=2,
        param_names=("m", "lambda"),
        validate=lambda t: None if t[1] > 0 else "lambda must be positive",
        support=lambda t: (t[0], math.inf),
        quad_bounds=lambda t: (t[0], t[0] + 45.0 / t[1]),
        density_fn=_expo_density,
        cdf_fn=_expo_cdf,
        cdf_param_grad_fn=_expo_cdf_pgrad,
        quantile_fn=lambda t, u: t[..., 0] - np.log1p(-u) / t[..., 1],
        positive_components=(1,),
        w_score_closed=_expo_w_score,
        w_score_xgrad_closed=_expo_w_score_xgrad,
        wim_closed=_expo_wim,
        fisher_components=(False, True),
        fisher_score_closed=_expo_fisher,
        fisher_score_xgrad_closed=None,
        fim_closed=None,
        entropy_closed=lambda t: math.log(t[1]) - 1.0,
        rel_entropy_closed=_expo_rel_entropy,
        rel_entropy_grad_closed=_expo_rel_grad,
    )


# ---------------------------------------------------------------------------
# Laplacian (m, lambda): p = (lambda / 2) exp(-lambda |x - m|)
# ---------------------------------------------------------------------------

def _lap_density(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    return 0.5 * lam * np.exp(-lam * np.abs(x - m))


def _lap_cdf(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.where(
        z < 0.0, 0.5 * np.exp(lam * np.minimum(z, 0.0)),
        1.0 - 0.5 * np.exp(-lam * np.maximum(z, 0.0)),
    )


def _lap_cdf_pgrad(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    p = _lap_density(theta, x)
    return np.stack([-p, (x - m) * p / lam], axis=-1)


def _lap_quantile(theta, u):
    m, lam = theta[..., 0], theta[..., 1]
    lower = m + np.log(np.maximum(2.0 * u, 1e-300)) / lam
    upper = m - np.log(np.maximum(2.0 * (1.0 - u), 1e-300)) / lam
    return np.where(u < 0.5, lower, upper)


def _lap_w_score(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.stack([z, 1.0 / lam**3 - z * z / (2.0 * lam)], axis=-1)


def _lap_w_score_xgrad(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    ones = np.broadcast_to(1.0, np.broadcast_shapes(np.shape(x), m.shape)).astype(float)
    return np.stack([ones, -(x - m) / lam], axis=-1)


def _lap_wim(theta):
    lam = theta[..., 1]
    shape = theta.shape[:-1] + (2, 2)
    out = np.zeros(shape)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 2.0 / lam**4
    return out


def _lap_fisher(theta, x):
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    return np.stack([lam * np.sign(z), 1.0 / lam - np.abs(z)], axis=-1)


def _lap_fisher_xgrad(theta, x):
    # a.e. spatial gradient; the m component also carries a Dirac at x = m,
    # so this closure is flagged distributional (see descriptor).
    m, lam = theta[..., 0], theta[..., 1]
    z = x - m
    zeros = np.zeros(np.broadcast_shapes(np.shape(x), m.shape))
    return np.stack([zeros, -np.sign(z)], axis=-1)


def _lap_rel_entropy(theta, theta_star):
    m, lam = theta
    ms, lams = theta_star
    u = abs(m - ms)
    return math.log(lam / lams) - 1.0 + lams * u + (lams / lam) * math.exp(-lam * u)


def _lap_rel_grad(theta, theta_star):
    m, lam = theta
    ms, lams = theta_star
    u = abs(m - ms)
    s = math.copysign(1.0, m - ms) if m != ms else 0.0
    e = math.exp(-lam * u)
    return np.array(
        [s * lams * (1.0 - e), 1.0 / lam - lams * e * (1.0 + u * lam) / lam**2]
    )


def _lap_rel_d2(theta, theta_star):
    m, lam = theta
    ms, lams = theta_star
    u = abs(m - ms)
    e = math.exp(-lam * u)
    d2 = np.empty((2, 2))
    d2[0, 0] = lam * lams * e
    d2[0, 1] = d2[1, 0] = lams * (m - ms) * e
    d2[1, 1] = -1.0 / lam**2 + lams * e * (u**2 * lam**2 + 2.0 * u * lam + 2.0) / lam**3
    return d2


def _lap_christoffel(theta):
    lam = theta[1]
    gamma = np.zeros((2, 2, 2))
    gamma[1, 1, 1] = -2.0 / lam  # Gamma^lambda_{lambda lambda} for g = diag(1, 2/l^4)
    return gamma


def laplacian() -> FamilyDescriptor:
    """Laplace (double exponential) family with parameters (m, lambda)."""
    return FamilyDescriptor(
        name="laplacian",
        dim=2,
        param_names=("m", "lambda"),
        validate=lambda t: None if t[1] > 0 else "lambda must be positive",
        support=lambda t: (-math.inf, math.inf),
        quad_bounds=lambda t: (t[0] - 45.0 / t[1], t[0] + 45.0 / t[1]),
        density_fn=_lap_density,
        cdf_fn=_lap_cdf,
        cdf_param_grad_fn=_lap_cdf_pgrad,
        quantile_fn=_lap_quantile,
        breakpoints=lambda t: (t[0],),
        positive_components=(1,),
        w_score_closed=_lap_w_score,
        w_score_xgrad_closed=_lap_w_score_xgrad,
        wim_closed=_lap_wim,
        fisher_components=(True, True),
        fisher_score_closed=_lap_fisher,
        fisher_score_xgrad_closed=_lap_fisher_xgrad,
        fisher_xgrad_distributional=True,
        fim_closed=lambda t: np.diag([t[1] ** 2, 1.0 / t[1] ** 2]),
        entropy_closed=lambda t: math.log(0.5 * t[1]) - 1.0,
        rel_entropy_closed=_lap_rel_entropy,
        rel_entropy_grad_closed=_lap_rel_grad,
        rel_entropy_d2_closed=_lap_rel_d2,
        christoffel_closed=_lap_christoffel,
    )


# ---------------------------------------------------------------------------
# Uniform (a, b)
# ---------------------------------------------------------------------------

def _unif_density(theta, x):
    a, b = theta[..., 0], theta[..., 1]
    inside = (x >= a) & (x <= b)
    return np.where(inside, 1.0 / (b - a), 0.0)


def _unif_cdf(theta, x):
    a, b = theta[..., 0], theta[..., 1]
    return np.clip((x - a) / (b - a), 0.0, 1.0)


def _unif_cdf_pgrad(theta, x):
    a, b = theta[..., 0], theta[..., 1]
    inside = (x > a) & (x < b)
    w2 = (b - a) ** 2
    return np.stack(
        [np.where(inside, (x - b) / w2, 0.0), np.where(inside, -(x - a) / w2, 0.0)],
        axis=-1,
    )


def _unif_w_score(theta, x):
    a, b = theta[..., 0], theta[..., 1]
    w = b - a
    return np.stack(
        [-((x - b) ** 2) / (2.0 * w) + w / 6.0, (x - a) ** 2 / (2.0 * w) - w / 6.0],
        axis=-1,
    )


def _unif_w_score_xgrad(theta, x):
    a, b = theta[..., 0], theta[..., 1]
    w = b - a
    return np.stack([(b - x) / w, (x - a) / w], axis=-1)


def _unif_wim(theta):
    shape = theta.shape[:-1] + (2, 2)
    out = np.empty(shape)
    out[..., 0, 0] = out[..., 1, 1] = 1.0 / 3.0
    out[..., 0, 1] = out[..., 1, 0] = 1.0 / 6.0
    return out


def _unif_rel_entropy(theta, theta_star):
    a, b = theta
    a_s, b_s = theta_star
    if a < a_s or b > b_s:
        return math.inf
    return math.log((b_s - a_s) / (b - a))


def uniform() -> FamilyDescriptor:
    """Uniform family on [a, b] with parameters (a, b)."""
    return FamilyDescriptor(
        name="uniform",
        dim=2,
        param_names=("a", "b"),
        validate=lambda t: None if t[0] < t[1] else "requires a < b",
        support=lambda t: (t[0], t[1]),
        quad_bounds=lambda t: (t[0], t[1]),
        density_fn=_unif_density,
        cdf_fn=_unif_cdf,
        cdf_param_grad_fn=_unif_cdf_pgrad,
        quantile_fn=lambda t, u: t[..., 0] + u * (t[..., 1] - t[..., 0]),
        w_score_closed=_unif_w_score,
        w_score_xgrad_closed=_unif_w_score_xgrad,
        wim_closed=_unif_wim,
        fisher_components=(False, False),
        entropy_closed=lambda t: -math.log(t[1] - t[0]),
        rel_entropy_closed=_unif_rel_entropy,
    )


# ---------------------------------------------------------------------------
# Semicircle (m, R): p = 2 sqrt(R^2 - (x - m)^2) / (pi R^2)
# ---------------------------------------------------------------------------

def _semi_density(theta, x):
    m, r = theta[..., 0], theta[..., 1]
    z = x - m
    inside = np.abs(z) <= r
    val = 2.0 * np.sqrt(np.maximum(r * r - z * z, 0.0)) / (math.pi * r * r)
    return np.where(inside, val, 0.0)


def _semi_cdf(theta, x):
    m, r = theta[..., 0], theta[..., 1]
    z = np.clip(x - m, -r, r)
    root = np.sqrt(np.maximum(r * r - z * z, 0.0))
    return 0.5 + (z * root / (r * r) + np.arcsin(z / r)) / math.pi


def _semi_cdf_pgrad(theta, x):
    m, r = theta[..., 0], theta[..., 1]
    p = _semi_density(theta, x)
    return np.stack([-p, -(x - m) * p / r], axis=-1)


def _semi_quantile(theta, u):
    lo, hi = theta[0] - theta[1], theta[0] + theta[1]
    return bisect_increasing(lambda x: _semi_cdf(theta, x), u, lo, hi)


def _semi_w_score(theta, x):
    m, r = theta[..., 0], theta[..., 1]
    z = x - m
    return np.stack([z, (0.5 * z * z - r * r / 8.0) / r], axis=-1)


def _semi_w_score_xgrad(theta, x):
    m, r = theta[..., 0], theta[..., 1]
    ones = np.broadcast_to(1.0, np.broadcast_shapes(np.shape(x), m.shape)).astype(float)
    return np.stack([ones, (x - m) / r], axis=-1)


def _semi_wim(theta):
    shape = theta.shape[:-1] + (2, 2)
    out = np.zeros(shape)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 0.25
    return out


def semicircle() -> FamilyDescriptor:
    """Wigner semicircle family with parameters (m, R).

    The Fisher information diverges (the boundary integral of p'^2/p is not
    integrable), so Fisher objects are reported not-well-defined.
    """
    return FamilyDescriptor(
        name="semicircle",
        dim=2,
        param_names=("m", "R"),
        validate=lambda t: None if t[1] > 0 else "R must be positive",
        support=lambda t: (t[0] - t[1], t[0] + t[1]),
        quad_bounds=lambda t: (t[0] - t[1], t[0] + t[1]),
        density_fn=_semi_density,
        cdf_fn=_semi_cdf,
        cdf_param_grad_fn=_semi_cdf_pgrad,
        quantile_fn=_semi_quantile,
        positive_components=(1,),
        w_score_closed=_semi_w_score,
        w_score_xgrad_closed=_semi_w_score_xgrad,
        wim_closed=_semi_wim,
        fisher_components=(False, False),
    )


# ---------------------------------------------------------------------------
# Location-scale family from a symmetric base density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Base:
    """Standardized base distribution for location-scale constructions."""

    name: str
    density: Callable
    cdf: Callable
    quantile: Callable
    second_moment: float
    tail: float  # |z| beyond which mass is negligible


_LOGISTIC = _Base(
    name="logistic",
    density=lambda z: expit(z) * expit(-z),
    cdf=expit,
    quantile=logit,
    second_moment=math.pi**2 / 3.0,
    tail=42.0,
)

_BASES = {"logistic": _LOGISTIC}


def location_scale(base: str = "logistic") -> FamilyDescriptor:
    """Location-scale family p(x; m, lambda) = p0((x - m)/lambda)/lambda.

    The base density must be symmetric about zero with finite second moment;
    the Wasserstein information matrix is then the constant
    diag(1, E[z^2]) in the (m, lambda) coordinates.
    """
    if base not in _BASES:
        raise ConfigError(
            f"unknown location-scale base {base!r}; available: {sorted(_BASES)}"
        )
    b = _BASES[base]
    m2 = b.second_moment

    def dens(theta, x):
        m, lam = theta[..., 0], theta[..., 1]
        return b.density((x - m) / lam) / lam

    def cdf_fn(theta, x):
        m, lam = theta[..., 0], theta[..., 1]
        return b.cdf((x - m) / lam)

    def pgrad(theta, x):
        m, lam = theta[..., 0], theta[..., 1]
        z = (x - m) / lam
        p = b.density(z) / lam
        return np.stack([-p, -z * p], axis=-1)

    def w_score(theta, x):
        m, lam = theta[..., 0], theta[..., 1]
        z = (x - m) / lam
        return np.stack([x - m, 0.5 * lam * (z * z - m2)], axis=-1)

    def w_score_xgrad(theta, x):
        m, lam = theta[..., 0], theta[..., 1]
        z = (x - m) / lam
        ones = np.broadcast_to(1.0, np.shape(z)).astype(float)
        return np.stack([ones, z], axis=-1)

    def wim_fn(theta):
        shape = theta.shape[:-1] + (2, 2)
        out = np.zeros(shape)
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = m2
        return out

    return FamilyDescriptor(
        name=f"location-scale:{base}",
        dim=2,
        param_names=("m", "lambda"),
        validate=lambda t: None if t[1] > 0 else "lambda must be positive",
        support=lambda t: (-math.inf, math.inf),
        quad_bounds=lambda t: (t[0] - b.tail * t[1], t[0] + b.tail * t[1]),
        density_fn=dens,
        cdf_fn=cdf_fn,
        cdf_param_grad_fn=pgrad,
        quantile_fn=lambda t, u: t[..., 0] + t[..., 1] * b.quantile(u),
        positive_components=(1,),
        w_score_closed=w_score,
        w_score_xgrad_closed=w_score_xgrad,
        wim_closed=wim_fn,
        fisher_components=(True, True),
    )


def location_scale_transport_map(
    theta_a: Sequence[float], theta_b: Sequence[float]
) -> Callable[[np.ndarray], np.ndarray]:
    """Optimal transport map between two members of one location-scale family.

    The map is the affine l(x) = m_b + (lambda_b / lambda_a) (x - m_a); it
    pushes p(.; theta_a) forward to p(.; theta_b) and is the W2-optimal map
    because it is the monotone (quantile) coupling.
    """
    ma, la = float(theta_a[0]), float(theta_a[1])
    mb, lb = float(theta_b[0]), float(theta_b[1])
    if la <= 0 or lb <= 0:
        raise DomainError("scale parameters must be positive")
    return lambda x: mb + (lb / la) * (np.asarray(x, dtype=float) - ma)


# ---------------------------------------------------------------------------
# ReLU push-forward families (scalar parameter, one atom)
# ---------------------------------------------------------------------------

def relu_family(kind: str, source: str = "gaussian") -> FamilyDescriptor:
    """Push-forward of a source law X through a ReLU, parameter theta in R.

    kind="f": Y = max(X - theta, 0) (shift then clip; atom at 0 of mass
    F0(theta)).  kind="h": Y = max(X, theta) (clip from below; atom at theta
    of the same mass).  Only the standard Gaussian source is registered.

    These laws have an atom, so they are not smooth: density-based operations
    raise NotSmooth, and the information matrix is obtained from distance
    probes (the closed forms 1 - F0(theta) / F0(theta) are registered for
    cross-checking).
    """
    if source != "gaussian":
        raise ConfigError(f"unsupported relu source {source!r}")
    f0_cdf, f0_quantile = ndtr, ndtri
    if kind == "f":

        def cdf_fn(theta, y):
            th = theta[..., 0]
            return np.where(y < 0.0, 0.0, f0_cdf(y + th))

        def quant(theta, u):
            th = theta[..., 0]
            return np.maximum(f0_quantile(u) - th, 0.0)

        def pgrad(theta, y):
            th = theta[..., 0]
            phi = np.exp(-0.5 * (y + th) ** 2) / math.sqrt(_TWO_PI)
            return np.where(y > 0.0, phi, 0.0)[..., None]

        atoms_fn = lambda t: ((0.0, float(ndtr(t[0]))),)
        wim_fn = lambda t: np.array([[1.0 - ndtr(t[..., 0])]])
        support_fn = lambda t: (0.0, math.inf)
        name = "relu-f"
    elif kind == "h":

        def cdf_fn(theta, y):
            th = theta[..., 0]
            return np.where(y < th, 0.0, f0_cdf(y))

        def quant(theta, u):
            th = theta[..., 0]
            return np.maximum(f0_quantile(u), th)

        def pgrad(theta, y):
            # F(y) = F0(y) for y > theta: no theta dependence off the atom.
            return np.zeros(np.shape(y) + (1,))

        atoms_fn = lambda t: ((float(t[0]), float(ndtr(t[0]))),)
        wim_fn = lambda t: np.array([[float(ndtr(t[..., 0]))]])
        support_fn = lambda t: (t[0], math.inf)
        name = "relu-h"
    else:
        raise ConfigError(f"relu kind must be 'f' or 'h', got {kind!r}")

    def no_density(theta, x):
        raise NotSmooth(f"{name} has an atom; density undefined")

    return FamilyDescriptor(
        name=name,
        dim=1,
        param_names=("theta",),
        validate=lambda t: None,
        support=support_fn,
        quad_bounds=lambda t: (min(0.0, t[0]) - 13.0, max(0.0, t[0]) + 13.0),
        density_fn=no_density,
        cdf_fn=cdf_fn,
        cdf_param_grad_fn=pgrad,
        quantile_fn=quant,
        smooth=False,
        atoms=atoms_fn,
        wim_closed=wim_fn,
        fisher_components=(False,),
    )


# ---------------------------------------------------------------------------
# products, registry
# ---------------------------------------------------------------------------

def product(*factors: FamilyDescriptor) -> ProductFamily:
    """Independent product of factor families sharing the parameter vector."""
    return ProductFamily(factors=tuple(factors))


_BUILDERS: dict[str, Callable[[], FamilyDescriptor]] = {
    "gaussian": gaussian,
    "exponential": exponential,
    "laplacian": laplacian,
    "uniform": uniform,
    "semicircle": semicircle,
    "relu-f": lambda: relu_family("f"),
    "relu-h": lambda: relu_family("h"),
}

FAMILY_NAMES = tuple(sorted(_BUILDERS)) + ("location-scale:<base>", "product:<a>,<b>")

_CACHE: dict[str, FamilyDescriptor | ProductFamily] = {}


def resolve_family(name: str):
    """Look up a family by registry name.

    Supports composite names: "product:gaussian,gaussian" and
    "location-scale:logistic".  Raises ConfigError for unknown names.
    """
    if name in _CACHE:
        return _CACHE[name]
    if name.startswith("product:"):
        parts = [p.strip() for p in name[len("product:"):].split(",") if p.strip()]
        if len(parts) < 2:
            raise ConfigError(f"product family needs >= 2 factors, got {name!r}")
        fam = ProductFamily(factors=tuple(resolve_family(p) for p in parts))
    elif name.startswith("location-scale:"):
        fam = location_scale(name[len("location-scale:"):])
    elif name in _BUILDERS:
        fam = _BUILDERS[name]()
    else:
        raise ConfigError(
            f"unknown family {name!r}; known: {', '.join(FAMILY_NAMES)}"
        )
    _CACHE[name] = fam
    return fam


# ---------------------------------------------------------------------------
# generic one-dimensional distribution view (for distance routines)
# ---------------------------------------------------------------------------

class Distribution1D:
    """A concrete 1-d law exposed through its quantile function.

    Built either from a (family, theta) pair, from an explicit quantile
    callable, or from a raw CDF (inverted by bisection after a monotonicity
    check).  This is the common currency of the distance routines.
    """

    def __init__(self, quantile_fn: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self._q = quantile_fn
        self.label = label

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self._q(np.asarray(u, dtype=float)), dtype=float)

    @classmethod
    def from_family(cls, fam, theta) -> "Distribution1D":
        theta = check_theta(fam, theta)
        if isinstance(fam, ProductFamily):
            raise DimensionMismatch("product families are not 1-d distributions")
        return cls(lambda u: fam.quantile_fn(theta, u), label=f"{fam.name}{tuple(theta)}")

    @classmethod
    def from_cdf(
        cls,
        cdf_fn: Callable[[np.ndarray], np.ndarray],
        lo: float,
        hi: float,
        label: str = "",
        n_check: int = 512,
    ) -> "Distribution1D":
        """Wrap a raw CDF, validating monotonicity and range on a grid.

        Raises NonCdfInput when the callable decreases anywhere on the check
        grid or fails to approach 0 / 1 at the given support bounds.
        """
        grid = np.linspace(lo, hi, n_check)
        vals = np.asarray(cdf_fn(grid), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonCdfInput("cdf produced non-finite values")
        if np.any(np.diff(vals) < -1e-12):
            raise NonCdfInput("cdf is not nondecreasing")
        if vals[0] > 1e-6 or vals[-1] < 1.0 - 1e-6:
            raise NonCdfInput(
                f"cdf spans [{vals[0]:.3g}, {vals[-1]:.3g}] on [{lo}, {hi}]; "
                "expected [~0, ~1]"
            )
        if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-12):
            raise NonCdfInput("cdf values outside [0, 1]")

        def q(u):
            return bisect_increasing(lambda x: np.asarray(cdf_fn(x)), u, lo, hi)

        return cls(q, label=label or "cdf")
