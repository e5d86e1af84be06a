"""Wasserstein covariance of statistics and the Cramer-Rao machinery.

A statistic T is viewed as a cotangent vector; its Wasserstein covariance with
another statistic is Cov_W[T1, T2] = E[T1' T2'].  The parameter-derivative of
an expectation obeys d/dtheta_i E[T] = E[Phi_i' T'] (integration by parts of
the continuity equation), which gives a quadrature route that never
differentiates through the density.  The bound

    Cov_W[T] >= grad_theta E[T]^T G_W^{-1} grad_theta E[T]

holds with equality exactly on span{1, Phi_1, ..., Phi_d}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numeric import fd_step
from .errors import QuadratureFailure, SingularWIM
from .families import check_theta
from .geometry import expectation, wasserstein_score_grad, wim

__all__ = [
    "Statistic",
    "polynomial_statistic",
    "wasserstein_covariance",
    "expectation_param_grad",
    "CramerRaoReport",
    "cramer_rao",
    "efficiency_residual",
]


@dataclass(frozen=True)
class Statistic:
    """A scalar statistic with (optionally analytic) spatial gradient.

    ``xgrad_poly`` holds the coefficients (lowest degree first) of T' when T
    is polynomial; covariance integrals then reduce to moment dot products.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "T"
    xgrad_poly: Optional[tuple] = None

    def grad_at(self, x):
        if self.grad is not None:
            return self.grad(x)
        x = np.asarray(x, dtype=float)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        return (self.fn(x + h) - self.fn(x - h)) / (2.0 * h)

    def __repr__(self) -> str:
        return f"Statistic({self.label!r})"


def polynomial_statistic(coeffs: Sequence[float], label: str = "") -> Statistic:
    """Statistic T(x) = sum_k coeffs[k] x^k with analytic derivative."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
    return Statistic(
        fn=lambda x: np.polynomial.polynomial.polyval(np.asarray(x, float), c),
        grad=lambda x: np.polynomial.polynomial.polyval(np.asarray(x, float), dc),
        label=label or f"poly(deg {c.size - 1})",
        xgrad_poly=tuple(float(v) for v in dc),
    )


_MOMENT_CACHE: dict = {}


def _moments(fam, theta, k_max: int) -> np.ndarray:
    """E[X^k] for k = 0..k_max, cached per (family, theta)."""
    key = (fam.name, tuple(float(v) for v in theta))
    have = _MOMENT_CACHE.get(key, np.ones(1))
    if have.size <= k_max:
        vals = np.empty(k_max + 1)
        vals[: have.size] = have
        for k in range(have.size, k_max + 1):
            vals[k] = expectation(fam, theta, lambda z, k=k: z**k)
        if not np.all(np.isfinite(vals)):
            raise QuadratureFailure(
                f"{fam.name}: moment of order <= {k_max} diverges at theta={theta!r}"
            )
        _MOMENT_CACHE[key] = vals
        have = vals
    return have[: k_max + 1]


def _probe_integrable(fam, theta, t: Statistic) -> float:
    """E[(T')^2]; the pre-integrability probe for all covariance integrals."""
    val = expectation(fam, theta, lambda z: float(t.grad_at(z)) ** 2)
    if not np.isfinite(val):
        raise QuadratureFailure(
            f"statistic {t.label!r}: E[(T')^2] is not finite at theta={theta!r}"
        )
    return val


def wasserstein_covariance(fam, theta, t1: Statistic, t2: Optional[Statistic] = None) -> float:
    """Cov_W[T1, T2] = E[T1'(X) T2'(X)] (T2 defaults to T1)."""
    theta = check_theta(fam, theta)
    p1 = t1.xgrad_poly
    p2 = p1 if (t2 is None or t2 is t1) else t2.xgrad_poly
    if p1 is not None and p2 is not None:
        prod = np.polynomial.polynomial.polymul(np.asarray(p1), np.asarray(p2))
        return float(prod @ _moments(fam, theta, prod.size - 1))
    if t2 is None or t2 is t1:
        return _probe_integrable(fam, theta, t1)
    _probe_integrable(fam, theta, t1)
    _probe_integrable(fam, theta, t2)
    return expectation(
        fam, theta, lambda z: float(t1.grad_at(z)) * float(t2.grad_at(z))
    )


def expectation_param_grad(
    fam, theta, t: Statistic, method: str = "score"
) -> np.ndarray:
    """Gradient of theta -> E_theta[T] as a length-d vector.

    method="score" uses the covariance identity d_i E[T] = E[Phi_i' T'];
    method="fd" central-differences the plain expectation in theta (the
    independent cross-check route).
    """
    theta = check_theta(fam, theta)
    d = fam.dim
    if method == "fd":
        out = np.empty(d)
        for i in range(d):
            h = fd_step(theta[i], 1e-5)
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            ep = expectation(fam, tp, lambda z: float(t.fn(z)))
            em = expectation(fam, tm, lambda z: float(t.fn(z)))
            out[i] = (ep - em) / (2.0 * h)
        return out
    if method != "score":
        raise ValueError(f"unknown method {method!r}")
    _probe_integrable(fam, theta, t)
    out = np.empty(d)
    for i in range(d):
        out[i] = expectation(
            fam,
            theta,
            lambda z, i=i: float(wasserstein_score_grad(fam, theta, i, z))
            * float(t.grad_at(z)),
        )
    return out


@dataclass(frozen=True)
class CramerRaoReport:
    """Both sides of the Wasserstein-Cramer-Rao bound for a batch of statistics."""

    theta: tuple
    labels: tuple[str, ...]
    lhs: np.ndarray              # m x m covariance matrix Cov_W[T_i, T_j]
    rhs: np.ndarray              # m x m information bound
    gap: np.ndarray = field(init=False)
    min_eig_gap: float = field(init=False)
    efficient: bool = field(init=False)

    def __post_init__(self):
        gap = self.lhs - self.rhs
        object.__setattr__(self, "gap", gap)
        object.__setattr__(self, "min_eig_gap", float(np.linalg.eigvalsh(gap)[0]))
        scale = max(1.0, float(np.linalg.norm(self.lhs)))
        object.__setattr__(
            self, "efficient", bool(np.linalg.norm(gap) < 1e-6 * scale)
        )


def cramer_rao(fam, theta, stats: Sequence[Statistic] | Statistic) -> CramerRaoReport:
    """Evaluate the Wasserstein-Cramer-Rao bound for one or more statistics.

    Returns the covariance matrix (lhs), the information bound (rhs), their
    difference, its smallest eigenvalue (>= 0 up to quadrature noise), and an
    efficiency flag (gap negligible relative to the covariance scale).
    """
    if isinstance(stats, Statistic):
        stats = [stats]
    stats = list(stats)
    theta = check_theta(fam, theta)
    m = len(stats)
    lhs = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            lhs[i, j] = lhs[j, i] = wasserstein_covariance(
                fam, theta, stats[i], stats[j]
            )
    grads = np.stack(
        [expectation_param_grad(fam, theta, t) for t in stats], axis=1
    )  # (d, m)
    g = wim(fam, theta).matrix
    try:
        sol = np.linalg.solve(g, grads)
    except np.linalg.LinAlgError as exc:
        raise SingularWIM(f"{fam.name}: WIM singular at theta={tuple(theta)}") from exc
    rhs = grads.T @ sol
    return CramerRaoReport(
        theta=tuple(theta),
        labels=tuple(t.label for t in stats),
        lhs=lhs,
        rhs=0.5 * (rhs + rhs.T),
    )


def efficiency_residual(fam, theta, t: Statistic) -> float:
    """Scalar slack Cov_W[T] - grad^T G_W^{-1} grad (zero iff T is efficient)."""
    report = cramer_rao(fam, theta, t)
    return float(report.gap[0, 0])
