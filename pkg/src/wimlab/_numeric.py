"""Shared numerical kernels: quadrature, bisection inversion, finite differences.

Conventions used throughout the package:

* Adaptive integration is scipy's QUADPACK (Gauss-Kronrod) with absolute
  tolerance 1e-10, after splitting the integration interval at the family's
  interior kinks and atoms.  Infinite tails are truncated at family-provided
  bounds chosen so the discarded mass is far below tolerance.
* Quantile-coupling integrals over u in (0, 1) use a fixed composite
  Gauss-Legendre rule (4096 panels x 16 nodes).  The rule is open, so quantile
  functions are never evaluated at u = 0 or u = 1.
* Central finite differences use step h = scale * max(1, |x|); derivative
  routines that advertise a reliability check compare the h and h/2 estimates
  (Richardson) and raise ``StepTooSmall`` when they disagree.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import QuadratureFailure, StepTooSmall

QUAD_EPSABS = 1e-10
"""Absolute tolerance for adaptive Gauss-Kronrod integration."""

BISECT_TOL = 1e-12
"""Bracket width at which quantile bisection stops."""


def adaptive_integral(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    points: Iterable[float] = (),
    epsabs: float = QUAD_EPSABS,
) -> float:
    """Integrate ``f`` on [lo, hi], splitting at interior break points.

    Parameters
    ----------
    f : callable
        Scalar integrand, smooth on each sub-interval between break points.
    lo, hi : float
        Finite integration bounds (callers truncate infinite tails first).
    points : iterable of float
        Interior locations of kinks/atoms; the interval is split there so the
        Gauss-Kronrod panels never straddle a non-smooth point.
    epsabs : float
        Absolute tolerance passed to QUADPACK.

    Raises
    ------
    QuadratureFailure
        If QUADPACK reports a warning and the error estimate is not within
        tolerance of the result.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise QuadratureFailure(f"non-finite integration bounds ({lo}, {hi})")
    if hi <= lo:
        return 0.0
    cuts = sorted({float(p) for p in points if lo < p < hi})
    edges = [lo, *cuts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        out = quad(f, a, b, epsabs=epsabs, epsrel=epsabs, limit=200, full_output=1)
        val, abserr = out[0], out[1]
        if len(out) > 3:  # QUADPACK warning message present
            if abserr > max(100.0 * epsabs, 1e-8 * abs(val)):
                raise QuadratureFailure(
                    f"quadrature on [{a}, {b}] failed: {out[3]} (err={abserr:.2e})"
                )
        total += val
    return total


def bisect_increasing(
    g: Callable[[np.ndarray], np.ndarray],
    target: np.ndarray,
    lo: float,
    hi: float,
    tol: float = BISECT_TOL,
) -> np.ndarray:
    """Generalized inverse of a nondecreasing function by vectorized bisection.

    Returns (approximately) the smallest x in [lo, hi] with g(x) >= target,
    which is the right convention for quantile functions of CDFs that may
    have flat pieces or jumps.
    """
    target = np.asarray(target, dtype=float)
    lo_arr = np.full(target.shape, float(lo))
    hi_arr = np.full(target.shape, float(hi))
    span = float(hi) - float(lo)
    n_iter = max(1, int(np.ceil(np.log2(max(span, tol) / tol))) + 2)
    for _ in range(n_iter):
        mid = 0.5 * (lo_arr + hi_arr)
        geq = g(mid) >= target
        hi_arr = np.where(geq, mid, hi_arr)
        lo_arr = np.where(geq, lo_arr, mid)
    return hi_arr


def _gl_grid(panels: int = 4096, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    u = (a[:, None] + half[:, None] * (nodes[None, :] + 1.0)).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return u, w


_U_NODES, _U_WEIGHTS = _gl_grid()


def w2sq_from_quantiles(
    qa: Callable[[np.ndarray], np.ndarray],
    qb: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Squared 2-Wasserstein distance int_0^1 (Q_A(u) - Q_B(u))^2 du.

    Both arguments must be vectorized quantile functions defined on (0, 1).
    The fixed composite Gauss-Legendre rule resolves the monotone integrand
    to ~1e-6 relative accuracy even for Gaussian tails.
    """
    diff = np.asarray(qa(_U_NODES), dtype=float) - np.asarray(qb(_U_NODES), dtype=float)
    if not np.all(np.isfinite(diff)):
        raise QuadratureFailure("quantile difference not finite on (0, 1)")
    return float(np.dot(_U_WEIGHTS, diff * diff))


def fd_step(x: float, scale: float) -> float:
    """Relative-absolute hybrid step h = scale * max(1, |x|)."""
    return scale * max(1.0, abs(float(x)))


def central_diff(f: Callable[[float], float], x: float, h: float) -> float:
    """Plain central difference (f(x+h) - f(x-h)) / 2h."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def central_diff_checked(
    f: Callable[[float], float],
    x: float,
    h: float,
    rtol: float = 1e-3,
) -> float:
    """Central difference with a Richardson consistency check.

    Compares the step-h and step-h/2 estimates; if they differ by more than
    ``rtol`` relative to scale, the step cannot be trusted and
    ``StepTooSmall`` is raised (the name follows the public API: the failure
    mode is a step too small for the noise level or too large for curvature).
    """
    d1 = central_diff(f, x, h)
    d2 = central_diff(f, x, 0.5 * h)
    scale = max(abs(d1), abs(d2), 1e-12)
    if abs(d1 - d2) > rtol * scale:
        raise StepTooSmall(
            f"finite-difference estimates disagree at x={x}: {d1!r} vs {d2!r}"
        )
    # The h/2 estimate is the more accurate of the two.
    return d2


def gradient_fd(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    scale: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = fd_step(x[i], scale)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def ordered_chunks(n: int, chunk: int) -> Sequence[range]:
    """Deterministic partition of range(n) into contiguous chunks."""
    return [range(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
