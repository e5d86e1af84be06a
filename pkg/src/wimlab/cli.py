"""Command-line front end for wimlab.

Subcommands
-----------
info        information matrices and score values for one parameter point
cramer-rao  Wasserstein-Cramer-Rao gap for a batch of polynomial statistics
simulate    Monte-Carlo online natural-gradient ensemble + rate fit
predict     deterministic variance recursion + rate fit
lsi         log-Sobolev certificate over a parameter grid
relu-wim    numeric-vs-analytic WIM sweep for the rectifier push-forwards

Every run is described by an :class:`ExperimentConfig` that round-trips
through JSON (``--config``), with command-line flags overriding file values.
Results are printed as a short summary and, when ``--out`` is given, written
as a ``ResultBundle``: one ``meta.json`` (full config echo, library version,
wall time) plus one CSV per table, numbers in 17-significant-digit decimal so
re-runs can be compared bit for bit.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import (
    ScoreKind,
    fit_rate,
    predict_variance_curve,
    run_ensemble,
)
from .errors import ConfigError, NotWellDefined, WimlabError
from .estimation import cramer_rao, polynomial_statistic
from .families import ProductFamily, check_theta, resolve_family
from .functional import (
    default_lsi_grid,
    lsi_ratio,
    max_certifiable_alpha,
    riw_check,
    wasserstein_hessian,
)
from .errors import DivisionByZero
from .geometry import fim, wim, wim_from_distance

__all__ = ["ExperimentConfig", "ResultBundle", "main", "run_config"]

COMMANDS = ("info", "cramer-rao", "simulate", "predict", "lsi", "relu-wim")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment, fully determined and JSON round-trippable."""

    command: str
    family: str = "gaussian"
    theta: Optional[tuple] = None
    theta_star: Optional[tuple] = None
    theta0: Optional[tuple] = None
    statistics: Optional[list] = None  # list of polynomial coefficient lists
    score: str = "wasserstein"
    t_max: int = 10_000
    ensemble: int = 1000
    seed: int = 0
    alpha: Optional[float] = None
    grid: Optional[tuple] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(
                f"unknown command {self.command!r}; expected one of {COMMANDS}"
            )
        if self.score not in ("wasserstein", "fisher"):
            raise ConfigError(
                f"score must be 'wasserstein' or 'fisher', got {self.score!r}"
            )
        for name in ("theta", "theta_star", "theta0", "grid"):
            val = getattr(self, name)
            if val is not None:
                try:
                    setattr(self, name, tuple(float(v) for v in val))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name} must be a sequence of numbers") from exc
        if self.statistics is not None:
            stats = self.statistics
            if stats and not isinstance(stats[0], (list, tuple)):
                stats = [stats]  # single coefficient list
            try:
                self.statistics = [[float(c) for c in row] for row in stats]
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    "statistics must be a list of polynomial coefficient lists"
                ) from exc
        for name in ("t_max", "ensemble", "seed"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or isinstance(val, bool):
                raise ConfigError(f"{name} must be an integer, got {val!r}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for name in ("theta", "theta_star", "theta0", "grid"):
            if out[name] is not None:
                out[name] = list(out[name])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(
                f"unknown config field(s): {', '.join(unknown)}; "
                f"known: {', '.join(sorted(known))}"
            )
        if "command" not in data:
            raise ConfigError("config must specify a command")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# result bundle
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


@dataclass
class ResultBundle:
    """Everything one run produced: metadata plus named CSV tables."""

    config: ExperimentConfig
    meta: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    summary: list = field(default_factory=list)  # human-readable lines

    def add_table(self, name: str, header: Sequence[str], rows) -> None:
        self.tables[name] = (list(header), [tuple(r) for r in rows])

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        meta = {
            "config": self.config.to_dict(),
            "version": __version__,
            **self.meta,
        }
        with open(os.path.join(out_dir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        for name, (header, rows) in self.tables.items():
            with open(os.path.join(out_dir, f"{name}.csv"), "w") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")

    def print_summary(self, stream=None) -> None:
        stream = sys.stdout if stream is None else stream
        for line in self.summary:
            print(line, file=stream)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _matrix_lines(label: str, mat: np.ndarray) -> list:
    rows = ["[" + ", ".join(f"{v:.6g}" for v in row) + "]" for row in np.atleast_2d(mat)]
    return [f"{label} = " + "; ".join(rows)]


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _require(cfg: ExperimentConfig, name: str):
    val = getattr(cfg, name)
    if val is None:
        raise ConfigError(f"command {cfg.command!r} requires --{name.replace('_', '-')}")
    return val


def _cmd_info(cfg: ExperimentConfig) -> ResultBundle:
    fam = resolve_family(cfg.family)
    theta = check_theta(fam, _require(cfg, "theta"))
    bundle = ResultBundle(config=cfg)
    gw = wim(fam, theta)
    bundle.meta["wim"] = gw.matrix
    bundle.meta["wim_method"] = gw.method
    bundle.summary += _matrix_lines("G_W", gw.matrix)
    try:
        gf = fim(fam, theta)
        bundle.meta["fim"] = gf.matrix
        bundle.summary += _matrix_lines("G_F", gf.matrix)
    except NotWellDefined as exc:
        bundle.meta["fim"] = "not-well-defined"
        bundle.summary.append(f"G_F = not-well-defined ({exc})")
    if not isinstance(fam, ProductFamily) and fam.smooth:
        us = np.linspace(0.05, 0.95, 19)
        xs = np.array([float(fam.quantile_fn(theta, u)) for u in us])
        header = ["u", "x"]
        cols = [us, xs]
        if fam.w_score_closed is not None:
            sc = np.array([fam.w_score_closed(theta, x) for x in xs])
            for i, pname in enumerate(fam.param_names):
                header.append(f"w_score_{pname}")
                cols.append(sc[:, i])
        if fam.fisher_score_closed is not None and all(fam.fisher_components):
            fs = np.array([fam.fisher_score_closed(theta, x) for x in xs])
            for i, pname in enumerate(fam.param_names):
                header.append(f"fisher_score_{pname}")
                cols.append(fs[:, i])
        bundle.add_table("scores", header, zip(*cols))
    return bundle


def _default_statistics(cfg: ExperimentConfig) -> list:
    """100 random polynomial statistics of degree <= 5, reproducible by seed."""
    rng = np.random.default_rng(cfg.seed)
    stats = []
    for _ in range(100):
        deg = int(rng.integers(1, 6))
        coeffs = rng.uniform(-1.0, 1.0, deg + 1)
        stats.append(coeffs.tolist())
    return stats


def _cmd_cramer_rao(cfg: ExperimentConfig) -> ResultBundle:
    fam = resolve_family(cfg.family)
    theta = check_theta(fam, _require(cfg, "theta"))
    coeff_rows = cfg.statistics if cfg.statistics else _default_statistics(cfg)
    stats = [
        polynomial_statistic(row, label=f"poly{k}") for k, row in enumerate(coeff_rows)
    ]
    bundle = ResultBundle(config=cfg)
    rows = []
    worst = math.inf
    n_efficient = 0
    for k, stat in enumerate(stats):
        rep = cramer_rao(fam, theta, stat)
        gap = float(rep.gap[0, 0])
        worst = min(worst, gap)
        n_efficient += int(rep.efficient)
        rows.append((k, len(coeff_rows[k]) - 1, rep.lhs[0, 0], rep.rhs[0, 0], gap))
    bundle.add_table(
        "cramer_rao", ["statistic", "degree", "cov_w", "bound", "gap"], rows
    )
    bundle.meta["min_gap"] = worst
    bundle.meta["n_statistics"] = len(stats)
    bundle.meta["n_efficient"] = n_efficient
    bundle.summary.append(
        f"Wasserstein-Cramer-Rao over {len(stats)} statistics at "
        f"theta={tuple(float(v) for v in theta)}: min gap {worst:.3e} "
        f"({n_efficient} efficient within 1e-6)"
    )
    return bundle


def _curve_bundle(cfg: ExperimentConfig, curve, label: str) -> ResultBundle:
    bundle = ResultBundle(config=cfg)
    d = curve.v.shape[1]
    header = ["t"] + [f"v{i}{j}" for i in range(d) for j in range(d)] + ["trace"]
    rows = [
        (int(t),) + tuple(curve.v[k].ravel()) + (float(curve.trace[k]),)
        for k, t in enumerate(curve.times)
    ]
    bundle.add_table("variance_curve", header, rows)
    window = (100.0, float(cfg.t_max))
    fit = fit_rate(curve, window=window)
    bundle.meta["fit"] = {
        "slope": fit.slope,
        "constant": fit.constant,
        "window": list(fit.window),
        "r2": fit.r2,
        "n_points": fit.n_points,
    }
    bundle.meta["n_flagged"] = curve.n_flagged
    theta_star = tuple(float(v) for v in curve.theta_star)
    bundle.summary.append(
        f"{label}: family={curve.family} kind={curve.kind.value} "
        f"theta*={theta_star} t_max={cfg.t_max}"
    )
    bundle.summary.append(
        f"  fitted slope {fit.slope:.4f} on t in [{window[0]:g}, {window[1]:g}] "
        f"(r2 {fit.r2:.4f}); flagged trajectories: {curve.n_flagged}"
    )
    bundle.summary += _matrix_lines("  rate constant", fit.constant)
    return bundle


def _kind(cfg: ExperimentConfig) -> ScoreKind:
    return ScoreKind.WASSERSTEIN if cfg.score == "wasserstein" else ScoreKind.FISHER


def _cmd_simulate(cfg: ExperimentConfig) -> ResultBundle:
    fam = resolve_family(cfg.family)
    theta_star = _require(cfg, "theta_star")
    threads = int(os.environ.get("WIMLAB_THREADS", "1") or "1")
    curve = run_ensemble(
        fam,
        theta_star,
        theta0=cfg.theta0,
        kind=_kind(cfg),
        t_max=cfg.t_max,
        n=cfg.ensemble,
        seed=cfg.seed,
        threads=threads,
    )
    bundle = _curve_bundle(cfg, curve, "simulate")
    bundle.meta["theta0"] = list(curve.theta0)
    bundle.meta["ensemble"] = curve.ensemble_size
    bundle.meta["seed"] = curve.seed
    return bundle


def _cmd_predict(cfg: ExperimentConfig) -> ResultBundle:
    fam = resolve_family(cfg.family)
    theta_star = _require(cfg, "theta_star")
    curve = predict_variance_curve(fam, theta_star, _kind(cfg), t_max=cfg.t_max)
    return _curve_bundle(cfg, curve, "predict")


def _lsi_grid(cfg: ExperimentConfig, fam, theta_star) -> np.ndarray:
    if cfg.grid is None:
        return default_lsi_grid(fam, theta_star)
    g = cfg.grid
    if len(g) != 6:
        raise ConfigError(
            "--grid for lsi takes 6 numbers: loc_lo,loc_hi,n_loc,scale_lo,scale_hi,n_scale"
        )
    locs = np.linspace(g[0], g[1], int(g[2]))
    scales = np.linspace(g[3], g[4], int(g[5]))
    ll, ss = np.meshgrid(locs, scales, indexing="ij")
    return np.column_stack([ll.ravel(), ss.ravel()])


def _cmd_lsi(cfg: ExperimentConfig) -> ResultBundle:
    fam = resolve_family(cfg.family)
    theta_star = check_theta(fam, _require(cfg, "theta_star"))
    grid = _lsi_grid(cfg, fam, theta_star)
    alpha = cfg.alpha
    if alpha is None:
        alpha = max_certifiable_alpha(fam, grid, theta_star)
    cert = riw_check(fam, grid, theta_star, alpha)
    bundle = ResultBundle(config=cfg)
    bundle.meta["certificate"] = {
        "alpha": cert.alpha,
        "min_gap_eig": cert.min_gap_eig,
        "holds": cert.holds,
        "argmin": list(cert.argmin),
        "n_grid": int(len(grid)),
    }
    rows = []
    for row in grid:
        rep = wasserstein_hessian(fam, row, theta_star)
        gw = wim(fam, row).matrix
        gap_eig = float(np.linalg.eigvalsh(rep.hess - 2.0 * alpha * gw)[0])
        try:
            ratio = lsi_ratio(fam, row, theta_star)
        except DivisionByZero:
            ratio = math.nan  # grid point coincides with the reference
        rows.append(tuple(row) + (ratio, gap_eig))
    header = [f"theta_{p}" for p in fam.param_names] + ["lsi_ratio", "min_eig_gap"]
    bundle.add_table("lsi_grid", header, rows)
    bundle.summary.append(
        f"LSI certificate for {fam.name} at "
        f"theta*={tuple(float(v) for v in theta_star)}: "
        f"alpha={cert.alpha:.6g} holds={cert.holds} "
        f"(min gap eigenvalue {cert.min_gap_eig:.3e} over {len(grid)} points)"
    )
    return bundle


def _cmd_relu_wim(cfg: ExperimentConfig) -> ResultBundle:
    if cfg.family not in ("relu-f", "relu-h"):
        raise ConfigError(
            f"relu-wim requires family 'relu-f' or 'relu-h', got {cfg.family!r}"
        )
    fam = resolve_family(cfg.family)
    g = cfg.grid if cfg.grid is not None else (-3.0, 3.0, 61)
    if len(g) != 3:
        raise ConfigError("--grid for relu-wim takes 3 numbers: lo,hi,n")
    thetas = np.linspace(g[0], g[1], int(g[2]))
    bundle = ResultBundle(config=cfg)
    rows = []
    worst = 0.0
    for th in thetas:
        numeric = float(wim_from_distance(fam, (th,)).matrix[0, 0])
        analytic = float(fam.wim_closed(np.asarray([th]))[0, 0])
        err = abs(numeric - analytic)
        worst = max(worst, err)
        rows.append((th, numeric, analytic, err))
    bundle.add_table(
        "relu_wim", ["theta", "wim_numeric", "wim_analytic", "abs_err"], rows
    )
    try:
        fim(fam, (float(thetas[0]),))
        fisher_marker = "defined"  # pragma: no cover - rectifiers never get here
    except NotWellDefined:
        fisher_marker = "not-well-defined"
    bundle.meta["max_abs_err"] = worst
    bundle.meta["fim"] = fisher_marker
    bundle.summary.append(
        f"{fam.name}: max |numeric - analytic| WIM error {worst:.3e} over "
        f"theta in [{g[0]:g}, {g[1]:g}] ({int(g[2])} points); "
        f"Fisher matrix: {fisher_marker}"
    )
    return bundle


_RUNNERS = {
    "info": _cmd_info,
    "cramer-rao": _cmd_cramer_rao,
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "lsi": _cmd_lsi,
    "relu-wim": _cmd_relu_wim,
}


def run_config(cfg: ExperimentConfig) -> ResultBundle:
    """Execute one experiment and return its bundle (library entry point)."""
    start = time.perf_counter()
    bundle = _RUNNERS[cfg.command](cfg)
    bundle.meta["wall_time_s"] = time.perf_counter() - start
    bundle.meta["seed"] = bundle.meta.get("seed", cfg.seed)
    return bundle


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wimlab",
        description="Wasserstein information matrices, Cramer-Rao bounds, "
        "natural-gradient dynamics, and LSI certificates for 1-d families.",
    )
    parser.add_argument("--version", action="version", version=f"wimlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--family", help="family name (see wimlab.families.FAMILY_NAMES)")
        p.add_argument("--theta", type=_floats, help="parameter point, comma-separated")
        p.add_argument("--theta-star", type=_floats, dest="theta_star",
                       help="reference/sampling parameter point")
        p.add_argument("--theta0", type=_floats, help="dynamics initial point")
        p.add_argument("--score", choices=["wasserstein", "fisher"],
                       help="score kind for the dynamics")
        p.add_argument("--t-max", type=int, dest="t_max", help="number of online steps")
        p.add_argument("--ensemble", type=int, help="Monte-Carlo ensemble size")
        p.add_argument("--seed", type=int, help="root RNG seed")
        p.add_argument("--alpha", type=float, help="LSI constant to certify")
        p.add_argument("--grid", type=_floats,
                       help="grid spec (lsi: 6 numbers, relu-wim: 3 numbers)")
        p.add_argument("--out", help="directory for meta.json + CSV tables")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command is None:
        raise ConfigError("no command given; expected one of " + ", ".join(COMMANDS))
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        file_cfg = ExperimentConfig.from_json(text)
        if file_cfg.command != args.command:
            raise ConfigError(
                f"config file says command {file_cfg.command!r}, "
                f"command line says {args.command!r}"
            )
        data = file_cfg.to_dict()
    data["command"] = args.command
    for name in (
        "family", "theta", "theta_star", "theta0", "score",
        "t_max", "ensemble", "seed", "alpha", "grid", "out",
    ):
        val = getattr(args, name, None)
        if val is not None:
            data[name] = val
    # relu-wim only operates on the rectifier families; when no family was
    # chosen anywhere, default to relu-f rather than the global default
    if args.command == "relu-wim" and "family" not in data:
        data["family"] = "relu-f"
    return ExperimentConfig.from_dict(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        bundle = run_config(cfg)
    except ConfigError as exc:
        print(f"wimlab: config error: {exc}", file=sys.stderr)
        return 2
    except WimlabError as exc:
        print(f"wimlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    bundle.print_summary()
    if cfg.out:
        try:
            bundle.write(cfg.out)
        except OSError as exc:
            print(f"wimlab: config error: cannot write --out: {exc}", file=sys.stderr)
            return 2
        print(f"wrote {cfg.out}/meta.json and {len(bundle.tables)} table(s)")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
