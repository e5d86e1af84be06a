"""Wasserstein/Fisher scores, information matrices, and 1-d transport distances.

For a smooth 1-d family the Wasserstein score gradient has the closed form

    d/dx Phi_i(x) = - (d/dtheta_i F)(x; theta) / p(x; theta),

the score itself is its antiderivative normalized to mean zero, and the
Wasserstein information matrix (WIM) is

    G_ij(theta) = E[ d/dtheta_i F * d/dtheta_j F / p^2 ].

Families that register closed forms short-circuit the quadrature; everything
here also works from the four basic family callables alone, which is what the
cross-checking tests rely on.  Non-smooth families (atoms) only support the
distance-probe route ``wim_from_distance``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._numeric import (
    adaptive_integral,
    central_diff,
    fd_step,
    w2sq_from_quantiles,
)
from .errors import (
    DimensionMismatch,
    DivisionByZero,
    DomainError,
    NotSmooth,
    NotWellDefined,
    QuadratureFailure,
    StepTooSmall,
)
from .families import (
    Distribution1D,
    FamilyDescriptor,
    ProductFamily,
    check_theta,
)

__all__ = [
    "InfoMatrix",
    "expectation",
    "wasserstein_score",
    "wasserstein_score_grad",
    "wim",
    "fisher_score",
    "fim",
    "w2_distance_1d",
    "wim_from_distance",
    "poisson_residual",
]


@dataclass(frozen=True)
class InfoMatrix:
    """An information matrix together with how it was obtained.

    ``method`` is one of "analytic", "quadrature", "distance-fd".  Coerces
    to ``matrix`` under ``np.asarray`` for direct use in numpy expressions.
    """

    kind: str
    theta: tuple
    matrix: np.ndarray
    method: str

    @property
    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def __array__(self, dtype=None, copy=None):
        if copy:
            return np.array(self.matrix, dtype=dtype)
        return np.asarray(self.matrix, dtype=dtype)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"information matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def expectation(fam: FamilyDescriptor, theta, f: Callable) -> float:
    """E_theta[f(X)] by adaptive quadrature (smooth families only)."""
    theta = check_theta(fam, theta)
    if isinstance(fam, ProductFamily) or not fam.smooth:
        raise NotSmooth(f"{fam.name}: density-based expectation unavailable")
    lo, hi = fam.quad_bounds(theta)
    return adaptive_integral(
        lambda z: f(z) * float(fam.density_fn(theta, z)),
        lo,
        hi,
        points=fam.breakpoints(theta),
    )


def _require_smooth(fam, what: str):
    if isinstance(fam, ProductFamily):
        return  # products are handled by per-factor dispatch where supported
    if not fam.smooth:
        raise NotSmooth(f"{fam.name}: {what} requires a smooth family")


# ---------------------------------------------------------------------------
# Wasserstein scores
# ---------------------------------------------------------------------------

def wasserstein_score_grad(fam, theta, i: int, x, method: str = "auto"):
    """Spatial gradient of the i-th Wasserstein score at points x.

    Closed form -dF/dtheta_i / p; families may register a simplified version.
    Raises DivisionByZero where the density vanishes.
    """
    theta = check_theta(fam, theta)
    _check_component(fam, i)
    _require_smooth(fam, "wasserstein_score_grad")
    x = np.asarray(x, dtype=float)
    if method == "auto" and fam.w_score_xgrad_closed is not None:
        return fam.w_score_xgrad_closed(theta, x)[..., i]
    p = fam.density_fn(theta, x)
    if np.any(p <= 0.0):
        raise DivisionByZero(
            f"{fam.name}: density vanishes at some evaluation points; "
            "score gradient undefined there"
        )
    return -fam.cdf_param_grad_fn(theta, x)[..., i] / p


_SCORE_MEAN_CACHE: dict = {}


def wasserstein_score(fam, theta, i: int, x, method: str = "auto"):
    """The i-th Wasserstein score Phi_i(x; theta), normalized to E[Phi_i] = 0.

    method="auto" uses the registered closed form when present; "quadrature"
    forces the constructive route (antiderivative of -dF/dtheta_i / p plus
    mean-zero normalization), which is how closed forms are cross-checked.
    """
    theta = check_theta(fam, theta)
    _check_component(fam, i)
    if isinstance(fam, ProductFamily):
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != len(fam.factors):
            raise DimensionMismatch(
                f"{fam.name} expects points with last axis {len(fam.factors)}"
            )
        return sum(
            wasserstein_score(f, theta, i, pts[..., k], method=method)
            for k, f in enumerate(fam.factors)
        )
    _require_smooth(fam, "wasserstein_score")
    x = np.asarray(x, dtype=float)
    if method == "auto" and fam.w_score_closed is not None:
        return fam.w_score_closed(theta, x)[..., i]
    return _score_quadrature(fam, theta, i, x)


def _score_quadrature(fam, theta, i, x):
    lo, hi = fam.quad_bounds(theta)
    bps = fam.breakpoints(theta)

    def slope(z: float) -> float:
        p = float(fam.density_fn(theta, z))
        if p <= 0.0:
            raise DivisionByZero(f"{fam.name}: zero density inside support at {z}")
        return float(fam.cdf_param_grad_fn(theta, z)[i]) / p

    def unnormalized(pt: float) -> float:
        return -adaptive_integral(slope, lo, float(pt), points=bps)

    key = (fam.name, bytes(theta.tobytes()), i)
    if key not in _SCORE_MEAN_CACHE:
        _SCORE_MEAN_CACHE[key] = expectation(fam, theta, unnormalized)
    mean = _SCORE_MEAN_CACHE[key]
    flat = np.atleast_1d(x)
    vals = np.array([unnormalized(pt) - mean for pt in flat])
    return vals[0] if np.ndim(x) == 0 else vals.reshape(np.shape(x))


def _check_component(fam, i: int):
    if not (0 <= i < fam.dim):
        raise DimensionMismatch(
            f"component {i} out of range for {fam.name} (dim {fam.dim})"
        )


# ---------------------------------------------------------------------------
# information matrices
# ---------------------------------------------------------------------------

def wim(fam, theta, method: str = "auto") -> InfoMatrix:
    """Wasserstein information matrix G_W(theta).

    method: "auto" (closed form, else quadrature; distance probe for
    non-smooth families), "analytic", "quadrature", or "distance-fd".
    """
    theta = check_theta(fam, theta)
    if isinstance(fam, ProductFamily):
        if method == "distance-fd":
            return wim_from_distance(fam, theta)
        total = sum(wim(f, theta, method=method).matrix for f in fam.factors)
        how = "analytic" if all(f.wim_closed is not None for f in fam.factors) else "quadrature"
        if method == "quadrature":
            how = "quadrature"
        return InfoMatrix("wasserstein", tuple(theta), total, how)
    if method == "distance-fd":
        return wim_from_distance(fam, theta)
    if not fam.smooth:
        if method == "analytic":
            if fam.wim_closed is None:
                raise NotWellDefined(f"{fam.name}: no closed-form WIM registered")
            return InfoMatrix("wasserstein", tuple(theta), fam.wim_closed(theta), "analytic")
        if method == "quadrature":
            raise NotSmooth(f"{fam.name}: quadrature WIM needs a density")
        return wim_from_distance(fam, theta)
    if method in ("auto", "analytic") and fam.wim_closed is not None:
        return InfoMatrix("wasserstein", tuple(theta), fam.wim_closed(theta), "analytic")
    if method == "analytic":
        raise NotWellDefined(f"{fam.name}: no closed-form WIM registered")
    d = fam.dim
    g = np.empty((d, d))
    lo, hi = fam.quad_bounds(theta)
    bps = fam.breakpoints(theta)
    for i in range(d):
        for j in range(i, d):

            def integrand(z: float, i=i, j=j) -> float:
                p = float(fam.density_fn(theta, z))
                if p <= 0.0:
                    return 0.0
                dF = fam.cdf_param_grad_fn(theta, z)
                return float(dF[i]) * float(dF[j]) / p

            g[i, j] = g[j, i] = adaptive_integral(integrand, lo, hi, points=bps)
    return InfoMatrix("wasserstein", tuple(theta), g, "quadrature")


def fisher_score(fam, theta, i: int, x, method: str = "auto"):
    """The i-th Fisher score d/dtheta_i log p(x; theta).

    Raises NotWellDefined (with .component set) when the component does not
    exist for the family, e.g. the location component of the exponential.
    """
    theta = check_theta(fam, theta)
    _check_component(fam, i)
    if isinstance(fam, ProductFamily):
        raise NotSmooth("fisher_score on products: evaluate factors separately")
    if not fam.fisher_components or not fam.fisher_components[i]:
        raise NotWellDefined(
            f"{fam.name}: Fisher score undefined for component "
            f"{fam.param_names[i]!r}",
            component=i,
        )
    _require_smooth(fam, "fisher_score")
    x = np.asarray(x, dtype=float)
    if method == "auto" and fam.fisher_score_closed is not None:
        return fam.fisher_score_closed(theta, x)[..., i]
    # generic: central difference of log density in theta_i
    p = fam.density_fn(theta, x)
    if np.any(p <= 0.0):
        raise DomainError(f"{fam.name}: x outside support; log-density undefined")
    h = fd_step(theta[i], 1e-6)
    tp, tm = theta.copy(), theta.copy()
    tp[i] += h
    tm[i] -= h
    return (np.log(fam.density_fn(tp, x)) - np.log(fam.density_fn(tm, x))) / (2.0 * h)


def fim(fam, theta, method: str = "auto") -> InfoMatrix:
    """Fisher information matrix, or NotWellDefined when any component is.

    Follows the closed-form table where registered; otherwise integrates
    E[psi_i psi_j] by quadrature.
    """
    theta = check_theta(fam, theta)
    if isinstance(fam, ProductFamily):
        total = sum(fim(f, theta, method=method).matrix for f in fam.factors)
        return InfoMatrix("fisher", tuple(theta), total, "quadrature")
    if not fam.fisher_components or not all(fam.fisher_components):
        bad = [
            fam.param_names[k]
            for k, ok in enumerate(fam.fisher_components or [False] * fam.dim)
            if not ok
        ]
        raise NotWellDefined(
            f"{fam.name}: Fisher information not well defined "
            f"(components: {', '.join(bad)})"
        )
    _require_smooth(fam, "fim")
    if method in ("auto", "analytic") and fam.fim_closed is not None:
        return InfoMatrix("fisher", tuple(theta), np.asarray(fam.fim_closed(theta)), "analytic")
    if method == "analytic":
        raise NotWellDefined(f"{fam.name}: no closed-form FIM registered")
    d = fam.dim
    g = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            def integrand(z: float, i=i, j=j) -> float:
                si = float(fisher_score(fam, theta, i, z))
                sj = float(fisher_score(fam, theta, j, z))
                return si * sj
            g[i, j] = g[j, i] = expectation(fam, theta, integrand)
    return InfoMatrix("fisher", tuple(theta), g, "quadrature")


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def _as_distribution(obj) -> Distribution1D:
    if isinstance(obj, Distribution1D):
        return obj
    if isinstance(obj, tuple) and len(obj) == 2:
        fam, theta = obj
        return Distribution1D.from_family(fam, theta)
    if hasattr(obj, "quantile"):
        return Distribution1D(lambda u: obj.quantile(u))
    raise DimensionMismatch(
        "expected Distribution1D, (family, theta) pair, or object with .quantile"
    )


def w2_distance_1d(dist_a, dist_b) -> float:
    """Squared 2-Wasserstein distance between two laws on R.

    Accepts :class:`Distribution1D` instances, (family, theta) pairs, or any
    object with a vectorized ``quantile``.  Computed through the quantile
    coupling W2^2 = int_0^1 (Q_A - Q_B)^2 du, which is exact in one dimension
    including atoms (quantile functions of mixed laws are simply
    discontinuous).  Note the return value is the *squared* distance.
    """
    qa = _as_distribution(dist_a)
    qb = _as_distribution(dist_b)
    return w2sq_from_quantiles(qa.quantile, qb.quantile)


def _w2sq_pair(fam, theta_a, theta_b) -> float:
    """W2^2 between two members of the same family (products supported)."""
    if isinstance(fam, ProductFamily):
        return sum(_w2sq_pair(f, theta_a, theta_b) for f in fam.factors)
    return w2_distance_1d((fam, theta_a), (fam, theta_b))


def wim_from_distance(fam, theta, h: float = 1e-3) -> InfoMatrix:
    """WIM recovered from local distance probes.

    Uses the second-order expansion W2^2(theta, theta + v) ~ v^T G v with the
    symmetric probe [D(v) + D(-v)] / 2 and polarization for off-diagonal
    entries, then validates against a half-step (Richardson) recomputation;
    disagreement beyond 1e-3 relative raises StepTooSmall.  This is the only
    WIM route available to non-smooth (atomic) families.
    """
    theta = check_theta(fam, theta)
    d = fam.dim

    def probe(v: np.ndarray, step: float) -> float:
        dp = _w2sq_pair(fam, theta, theta + step * v)
        dm = _w2sq_pair(fam, theta, theta - step * v)
        return (dp + dm) / (2.0 * step * step)

    def assemble(step: float) -> np.ndarray:
        g = np.empty((d, d))
        basis = np.eye(d)
        for i in range(d):
            g[i, i] = probe(basis[i], step)
        for i in range(d):
            for j in range(i + 1, d):
                a_plus = probe(basis[i] + basis[j], step)
                a_minus = probe(basis[i] - basis[j], step)
                g[i, j] = g[j, i] = (a_plus - a_minus) / 4.0
        return g

    g1 = assemble(h)
    g2 = assemble(0.5 * h)
    # 1e-3 relative for O(1) entries, with an absolute floor so quadrature
    # noise on nearly-degenerate metrics (entries << 1) is not mistaken for
    # finite-difference instability
    tol = max(1e-3 * float(np.max(np.abs(g2))), 1e-4)
    if np.max(np.abs(g1 - g2)) > tol:
        raise StepTooSmall(
            f"distance-probe WIM unstable at h={h}: max deviation "
            f"{np.max(np.abs(g1 - g2)):.3e} exceeds tolerance {tol:.3e}"
        )
    return InfoMatrix("wasserstein", tuple(theta), g2, "distance-fd")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def poisson_residual(fam, theta, i: int, x: float, h_scale: float = 1e-5) -> float:
    """Residual of the weighted Poisson equation the score must satisfy:

        d/dx log p * Phi_i' + Phi_i'' + d/dtheta_i log p  =  0.

    Evaluated pointwise at interior points x where the density is twice
    differentiable; raises NotSmooth at (or too close to) kinks and support
    boundaries, where the equation does not hold pointwise.
    """
    theta = check_theta(fam, theta)
    _check_component(fam, i)
    _require_smooth(fam, "poisson_residual")
    x = float(x)
    hx = fd_step(x, h_scale)
    lo, hi = fam.support(theta)
    if not (lo + 2 * hx < x < hi - 2 * hx):
        raise NotSmooth(f"{fam.name}: x={x} too close to the support boundary")
    for bp in fam.breakpoints(theta):
        if abs(x - bp) < 4 * hx:
            raise NotSmooth(f"{fam.name}: x={x} too close to kink at {bp}")

    def logp(z: float) -> float:
        p = float(fam.density_fn(theta, z))
        if p <= 0.0:
            raise DivisionByZero(f"density vanishes at {z}")
        return np.log(p)

    def grad_i(z: float) -> float:
        return float(wasserstein_score_grad(fam, theta, i, z))

    dlogp_dx = central_diff(logp, x, hx)
    phi_p = grad_i(x)
    phi_pp = central_diff(grad_i, x, hx)
    ht = fd_step(theta[i], h_scale)
    tp, tm = theta.copy(), theta.copy()
    tp[i] += ht
    tm[i] -= ht
    dlogp_dti = (
        np.log(float(fam.density_fn(tp, x))) - np.log(float(fam.density_fn(tm, x)))
    ) / (2.0 * ht)
    return float(dlogp_dx * phi_p + phi_pp + dlogp_dti)
