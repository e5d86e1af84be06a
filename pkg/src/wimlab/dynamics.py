"""Online natural-gradient estimation dynamics and variance-curve machinery.

The iterate preconditions the chosen score with the *Wasserstein* information
matrix regardless of score kind:

    theta_{t+1} = theta_t + (1/t) G_W(theta_t)^{-1} s(x_t; theta_t),

where s is the Wasserstein score Phi^W (kind WASSERSTEIN) or the Fisher score
grad_theta log p (kind FISHER); equivalently theta_{t+1} = theta_t -
(1/t) G_W^{-1} grad_theta l with l the instantaneous loss, whose gradient is
-s.  Since E[d s / d theta] = -G_X (G_X = G_W resp. G_F), the mean recursion
contracts at rate governed by B = G_W^{-1} G_X: Wasserstein scores give
t*V_t -> G_W^{-1} (Cramer-Rao-type efficiency), Fisher scores give
V_t = O(t^{-2 alpha}) with alpha the smallest generalized eigenvalue of
(G_F, G_W) — the Poincare constant of the family.

V_t is the Wasserstein covariance of the estimator: with S_t =
d theta_t / d(x_1..x_{t-1}) the per-sample sensitivity matrix,
V_t = E[S_t S_t^T].  The ensemble runner propagates the Gram matrix
P_t = S_t S_t^T directly (algebraically identical, O(d^2) per step instead of
O(d t)); the scalar ``step`` carries the full S_t so finite-difference oracles
can check every column.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DomainEscape,
    InsufficientData,
    NotWellDefined,
    QuadratureFailure,
    SingularWIM,
)
from .families import FamilyDescriptor, check_theta
from .geometry import expectation, fim, wim

__all__ = [
    "ScoreKind",
    "TrajectoryState",
    "VarianceCurve",
    "RateFit",
    "step",
    "run_ensemble",
    "predict_variance_curve",
    "score_sensitivity",
    "poincare_alpha",
    "fit_rate",
    "default_record_grid",
]

DOMAIN_FLOOR = 1e-3
"""Clamping floor for positivity-constrained parameter components."""

_CHUNK = 512
"""Trajectories per ensemble chunk; fixed so results never depend on threads."""


class ScoreKind(str, Enum):
    WASSERSTEIN = "wasserstein"
    FISHER = "fisher"


@dataclass(frozen=True)
class TrajectoryState:
    """State of one online trajectory.

    ``sens`` holds S_t = d theta_t / d(x_1, ..., x_{t-1}) with one column per
    past sample (so t-1 columns at step index t).
    """

    t: int
    theta: np.ndarray
    sens: np.ndarray
    clamped: bool = False

    def __post_init__(self):
        if self.sens.shape != (self.theta.size, self.t - 1):
            raise ValueError(
                f"sens must be d x (t-1) = {self.theta.size}x{self.t - 1}, "
                f"got {self.sens.shape}"
            )


@dataclass(frozen=True)
class VarianceCurve:
    """V_t on a recording grid, plus the provenance needed to reproduce it."""

    times: np.ndarray
    v: np.ndarray  # (len(times), d, d)
    ensemble_size: int
    seed: int
    kind: ScoreKind
    family: str
    theta_star: tuple
    theta0: tuple
    n_flagged: int = 0

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.v, axis1=1, axis2=2)


@dataclass(frozen=True)
class RateFit:
    """Least-squares power-law fit of a variance curve."""

    slope: float
    constant: np.ndarray  # d x d: mean of t^{-slope}-rescaled V_t over window
    window: tuple[float, float]
    r2: float
    n_points: int


def default_record_grid(t_max: int) -> np.ndarray:
    """40 logarithmically spaced integer times in [10, t_max], deduplicated."""
    lo = min(10, t_max)
    pts = np.logspace(math.log10(lo), math.log10(t_max), 40)
    return np.unique(np.round(pts).astype(int))


# ---------------------------------------------------------------------------
# score closures
# ---------------------------------------------------------------------------

def _score_closures(fam: FamilyDescriptor, kind: ScoreKind):
    """Vectorized (score, spatial-gradient) callables for the dynamics.

    Both accept theta of shape (..., d) with x broadcastable to the batch
    shape and return (..., d).
    """
    if kind == ScoreKind.WASSERSTEIN:
        if fam.w_score_closed is None or fam.w_score_xgrad_closed is None:
            raise NotWellDefined(
                f"{fam.name}: dynamics needs registered closed-form "
                "Wasserstein scores"
            )
        return fam.w_score_closed, fam.w_score_xgrad_closed
    if kind == ScoreKind.FISHER:
        if not fam.fisher_components or not all(fam.fisher_components):
            raise NotWellDefined(
                f"{fam.name}: Fisher score not well-defined for all components"
            )
        score = fam.fisher_score_closed
        if score is None:
            raise NotWellDefined(
                f"{fam.name}: dynamics needs registered closed-form Fisher scores"
            )
        xgrad = fam.fisher_score_xgrad_closed
        if xgrad is None:
            def xgrad(theta, x, _s=score):  # central difference in x
                h = 1e-6 * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))
                return (_s(theta, x + h) - _s(theta, x - h)) / (2.0 * h[..., None])
        return score, xgrad
    raise ValueError(f"unknown score kind {kind!r}")


def _wim_batch(fam: FamilyDescriptor, thetas: np.ndarray) -> np.ndarray:
    if fam.wim_closed is None:
        raise NotWellDefined(f"{fam.name}: dynamics needs a closed-form WIM")
    return fam.wim_closed(thetas)


def _natgrad(fam, score_fn, thetas: np.ndarray, x) -> np.ndarray:
    """u = G_W(theta)^{-1} s(x; theta), batched over leading axes."""
    g = _wim_batch(fam, thetas)
    s = score_fn(thetas, x)
    try:
        return np.linalg.solve(g, s[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularWIM(f"{fam.name}: singular WIM in natural-gradient step") from exc


# ---------------------------------------------------------------------------
# scalar step (oracle-checkable)
# ---------------------------------------------------------------------------

def step(
    fam: FamilyDescriptor,
    state: TrajectoryState,
    theta_star,
    kind: ScoreKind,
    x_t: float,
) -> TrajectoryState:
    """One online update, propagating the full sensitivity matrix.

    theta_star is accepted for interface symmetry with the ensemble runner
    (samples are drawn outside); it does not enter the update.  Sensitivity
    update: existing columns are left-multiplied by M = I + (1/t) d/dtheta
    [G_W^{-1} s], the new column is (1/t) G_W^{-1} d/dx s; Jacobians in theta
    use central finite differences with h = 1e-6 * max(1, |theta_j|).
    """
    theta = check_theta(fam, state.theta)
    t = state.t
    d = fam.dim
    score_fn, xgrad_fn = _score_closures(fam, kind)

    u0 = _natgrad(fam, score_fn, theta, x_t)
    jac = np.empty((d, d))
    for j in range(d):
        h = 1e-6 * max(1.0, abs(theta[j]))
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        jac[:, j] = (
            _natgrad(fam, score_fn, tp, x_t) - _natgrad(fam, score_fn, tm, x_t)
        ) / (2.0 * h)
    m = np.eye(d) + jac / t

    g = _wim_batch(fam, theta)
    new_col = np.linalg.solve(g, xgrad_fn(theta, x_t)) / t

    new_theta = theta + u0 / t
    if not np.all(np.isfinite(new_theta)):
        raise DomainEscape(
            f"{fam.name}: non-finite parameter after step {t}: {new_theta!r}"
        )
    clamped = state.clamped
    clamped_now = []
    for i in fam.positive_components:
        if new_theta[i] < DOMAIN_FLOOR:
            new_theta[i] = DOMAIN_FLOOR
            clamped = True
            clamped_now.append(i)

    sens = np.concatenate([m @ state.sens, new_col[:, None]], axis=1)
    # clamping is a projection: its Jacobian zeroes the clamped coordinate
    if clamped_now:
        sens[clamped_now, :] = 0.0
    return TrajectoryState(t=t + 1, theta=new_theta, sens=sens, clamped=clamped)


# ---------------------------------------------------------------------------
# ensemble runner (Gram propagation, chunked, deterministic)
# ---------------------------------------------------------------------------

def _run_chunk(
    fam,
    kind: ScoreKind,
    theta_star: np.ndarray,
    theta0: np.ndarray,
    t_max: int,
    seeds: Sequence[np.random.SeedSequence],
    grid: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Run one chunk of trajectories in vectorized lock step.

    Returns (per-grid-time sums of P over unflagged lanes, per-grid-time
    unflagged counts, flagged count at the end).
    """
    nc = len(seeds)
    d = fam.dim
    score_fn, xgrad_fn = _score_closures(fam, kind)
    gens = [np.random.Generator(np.random.Philox(s)) for s in seeds]

    thetas = np.tile(theta0, (nc, 1))
    p = np.zeros((nc, d, d))
    flagged = np.zeros(nc, dtype=bool)
    eye = np.eye(d)
    v_sums = np.zeros((len(grid), d, d))
    counts = np.zeros(len(grid), dtype=int)
    grid_pos = {int(tt): k for k, tt in enumerate(grid)}

    block = 2048
    t = 1
    with np.errstate(all="ignore"):  # flagged lanes may overflow harmlessly
        while t < t_max:
            nb = min(block, t_max - t)
            u01 = np.empty((nc, nb))
            for i, gen in enumerate(gens):
                u01[i] = gen.random(nb)
            np.maximum(u01, 1e-16, out=u01)
            xs = fam.quantile_fn(theta_star, u01)
            for b in range(nb):
                x = xs[:, b]
                g = _wim_batch(fam, thetas)
                try:
                    u0 = np.linalg.solve(g, score_fn(thetas, x)[..., None])[..., 0]
                except np.linalg.LinAlgError as exc:
                    raise SingularWIM(f"{fam.name}: singular WIM in ensemble") from exc
                jac = np.empty((nc, d, d))
                for j in range(d):
                    h = 1e-6 * np.maximum(1.0, np.abs(thetas[:, j]))
                    tp = thetas.copy()
                    tm = thetas.copy()
                    tp[:, j] += h
                    tm[:, j] -= h
                    up = np.linalg.solve(
                        _wim_batch(fam, tp), score_fn(tp, x)[..., None]
                    )[..., 0]
                    um = np.linalg.solve(
                        _wim_batch(fam, tm), score_fn(tm, x)[..., None]
                    )[..., 0]
                    jac[:, :, j] = (up - um) / (2.0 * h)[:, None]
                m = eye[None, :, :] + jac / t
                c = np.linalg.solve(g, xgrad_fn(thetas, x)[..., None])[..., 0] / t
                p = np.einsum("nij,njk,nlk->nil", m, p, m) + c[:, :, None] * c[:, None, :]
                thetas = thetas + u0 / t

                bad = ~np.isfinite(thetas).all(axis=1)
                for i in fam.positive_components:
                    low = thetas[:, i] < DOMAIN_FLOOR
                    flagged |= low
                    thetas[low, i] = DOMAIN_FLOOR
                if bad.any():
                    flagged |= bad
                    thetas[bad] = theta_star  # keep arithmetic finite; lane is out
                    p[bad] = 0.0

                t += 1
                k = grid_pos.get(t)
                if k is not None:
                    good = ~flagged
                    v_sums[k] = p[good].sum(axis=0)
                    counts[k] = int(good.sum())
    return v_sums, counts, int(flagged.sum())


def run_ensemble(
    fam: FamilyDescriptor,
    theta_star,
    theta0=None,
    kind: ScoreKind = ScoreKind.WASSERSTEIN,
    t_max: int = 10_000,
    n: int = 1000,
    seed: int = 0,
    record_grid: Optional[np.ndarray] = None,
    threads: Optional[int] = None,
) -> VarianceCurve:
    """Monte-Carlo estimate of the Wasserstein covariance curve V_t.

    Runs ``n`` independent trajectories with samples x_t ~ p_{theta_star},
    propagating per-trajectory sensitivity Grams in vectorized lock step.
    Per-trajectory RNG streams come from counter-based splitting
    (SeedSequence.spawn -> Philox), and the reduction order is fixed, so the
    output is identical for any thread count.  Trajectories clamped at the
    domain floor (or escaping) are flagged, excluded from the averages from
    that moment on, and counted in ``n_flagged``.

    ``threads`` defaults to the WIMLAB_THREADS environment variable (else 1);
    it caps the number of chunk workers.
    """
    theta_star = check_theta(fam, theta_star)
    if theta0 is None:
        theta0 = theta_star + np.array([1.0, 0.5][: fam.dim])
    theta0 = check_theta(fam, theta0)
    if n < 1 or t_max < 2:
        raise InsufficientData("need n >= 1 and t_max >= 2")
    grid = default_record_grid(t_max) if record_grid is None else np.asarray(
        sorted(set(int(t) for t in record_grid))
    )
    if threads is None:
        threads = int(os.environ.get("WIMLAB_THREADS", "1") or "1")
    threads = max(1, threads)

    children = np.random.SeedSequence(seed).spawn(n)
    chunks = [children[lo : lo + _CHUNK] for lo in range(0, n, _CHUNK)]

    def work(ch):
        return _run_chunk(fam, kind, theta_star, theta0, t_max, ch, grid)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(chunks))) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(ch) for ch in chunks]

    v_sums = sum(r[0] for r in results)
    counts = sum(r[1] for r in results)
    flagged = sum(r[2] for r in results)
    counts = np.maximum(counts, 1)
    v = v_sums / counts[:, None, None]
    return VarianceCurve(
        times=grid,
        v=v,
        ensemble_size=n,
        seed=seed,
        kind=kind,
        family=fam.name,
        theta_star=tuple(theta_star),
        theta0=tuple(theta0),
        n_flagged=flagged,
    )


# ---------------------------------------------------------------------------
# deterministic recursion and its ingredients
# ---------------------------------------------------------------------------

def score_sensitivity(fam, theta_star, kind: ScoreKind) -> np.ndarray:
    """The matrix J = E[(d/dx s)(d/dx s)^T] at theta_star, by quadrature.

    For Wasserstein scores this equals G_W(theta_star).  Raises
    QuadratureFailure when a score's spatial derivative exists only
    distributionally (e.g. the Laplacian Fisher location score, whose
    derivative contains a Dirac term the quadrature cannot see).
    """
    theta_star = check_theta(fam, theta_star)
    if kind == ScoreKind.WASSERSTEIN:
        return wim(fam, theta_star, method="quadrature").matrix
    if not fam.fisher_components or not all(fam.fisher_components):
        raise NotWellDefined(
            f"{fam.name}: Fisher scores not well-defined for all components"
        )
    if fam.fisher_xgrad_distributional:
        raise QuadratureFailure(
            f"{fam.name}: Fisher score spatial gradient has Dirac components; "
            "the sensitivity integral is not a quadrature problem"
        )
    _, xgrad_fn = _score_closures(fam, kind)
    d = fam.dim
    out = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            def integrand(z, i=i, j=j):
                gvec = xgrad_fn(theta_star, float(z))
                return float(gvec[..., i]) * float(gvec[..., j])
            out[i, j] = out[j, i] = expectation(fam, theta_star, integrand)
    return out


def poincare_alpha(fam, theta_star) -> float:
    """alpha = sup{a : G_F >= a G_W} = least generalized eigenvalue of (G_F, G_W)."""
    theta_star = check_theta(fam, theta_star)
    gf = fim(fam, theta_star).matrix
    gw = wim(fam, theta_star).matrix
    vals = scipy.linalg.eigh(gf, gw, eigvals_only=True)
    return float(vals[0])


def predict_variance_curve(
    fam,
    theta_star,
    kind: ScoreKind,
    t_max: int,
    v_init: Optional[np.ndarray] = None,
    record_grid: Optional[np.ndarray] = None,
) -> VarianceCurve:
    """Deterministic variance recursion at theta_star.

    Propagates the covariance of the linearized iterate exactly:

        V_{t+1} = (I - B/t) V_t (I - B/t)^T + C / t^2,

    with B = G_W^{-1} G_X (G_X = G_W for Wasserstein scores, G_F for Fisher
    scores, via E[d s/d theta] = -G_X) and C = G_W^{-1} J G_W^{-1}.  From
    V_init = 0 the first step gives V_2 = C.  Wasserstein scores converge as
    t V_t -> G_W^{-1}; Fisher scores as O(t^{-2 alpha}) when 2 alpha <= 1.
    """
    theta_star = check_theta(fam, theta_star)
    d = fam.dim
    gw = wim(fam, theta_star).matrix
    jmat = score_sensitivity(fam, theta_star, kind)
    gx = gw if kind == ScoreKind.WASSERSTEIN else fim(fam, theta_star).matrix
    b = np.linalg.solve(gw, gx)
    c = np.linalg.solve(gw, np.linalg.solve(gw, jmat).T)
    c = 0.5 * (c + c.T)
    grid = default_record_grid(t_max) if record_grid is None else np.asarray(
        sorted(set(int(t) for t in record_grid))
    )
    v = np.zeros((d, d)) if v_init is None else np.array(v_init, dtype=float)
    eye = np.eye(d)
    out = np.zeros((len(grid), d, d))
    grid_pos = {int(tt): k for k, tt in enumerate(grid)}
    if 1 in grid_pos:
        out[grid_pos[1]] = v
    for t in range(1, t_max):
        a = eye - b / t
        v = a @ v @ a.T + c / (t * t)
        k = grid_pos.get(t + 1)
        if k is not None:
            out[k] = v
    return VarianceCurve(
        times=grid,
        v=out,
        ensemble_size=0,
        seed=0,
        kind=kind,
        family=fam.name,
        theta_star=tuple(theta_star),
        theta0=tuple(theta_star),
        n_flagged=0,
    )


def fit_rate(curve: VarianceCurve, window: tuple[float, float] = (100.0, 10_000.0)) -> RateFit:
    """Least-squares power-law fit of log tr(V_t) against log t.

    The constant matrix is the window average of t^{-slope} V_t, i.e. the C in
    V_t ~ C t^slope; for Wasserstein-efficient curves it estimates G_W^{-1}.
    """
    lo, hi = window
    tr = curve.trace
    mask = (curve.times >= lo) & (curve.times <= hi) & (tr > 0)
    if int(mask.sum()) < 5:
        raise InsufficientData(
            f"rate fit needs >= 5 grid points in window {window}, have {int(mask.sum())}"
        )
    logt = np.log(curve.times[mask].astype(float))
    logv = np.log(tr[mask])
    slope, intercept = np.polyfit(logt, logv, 1)
    pred = slope * logt + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    scale = curve.times[mask].astype(float) ** (-slope)
    constant = np.mean(curve.v[mask] * scale[:, None, None], axis=0)
    return RateFit(
        slope=float(slope),
        constant=constant,
        window=(float(lo), float(hi)),
        r2=r2,
        n_points=int(mask.sum()),
    )
