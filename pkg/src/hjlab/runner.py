"""Experiment configuration, validation and orchestration.

Configs are flat key/value text with INI-style sections, one file per
experiment.  `validate` classifies the parameter point against every
threshold before anything runs; `run` executes the experiment and persists a
manifest (config echo plus artifact hashes), CSV rows and optional solution
slabs.  All randomness flows from the single config seed through a
counter-based generator, so identical configs reproduce bit-identical CSVs
regardless of execution order.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import Field, SpaceTimeField, TorusGrid
from .hamiltonian import ExponentBook, HamiltonianSpec
from .hj import BlowUpError, HJProblem, make_singular_f, manufacture_rhs, solve_hj
from .fp import FPProblem, solve_fp
from .io import save_slab, sha256_file, write_csv, write_json
from .lab import (
    check_stability,
    measure_holder,
    nt_for_norm_runs,
    run_maxreg_sweep,
)
from .mfg import Coupling, MFGProblem, monitor_first_order, normalize_density, solve_mfg, sweep_thresholds
from .spaces import NormReport, holder_seminorm, lq_spacetime_norm, w21q_norm
from .verify import verify_spaces

__all__ = ["RunConfig", "ValidationError", "load_config", "validate", "run", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("hj", "fp", "maxreg", "holder", "stability", "mfg", "sweep", "verify-spaces")

OUTPUT_ROOT_ENV = "HJLAB_OUTPUT_ROOT"

CSV_SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """Config rejected before any solve was launched."""


@dataclass
class RunConfig:
    """Parsed experiment configuration."""

    kind: str
    seed: int
    outdir: str
    sections: dict = field(default_factory=dict)
    source_text: str = ""

    def get(self, section: str, key: str, default=None, cast=None):
        sec = self.sections.get(section, {})
        if key not in sec:
            return default
        raw = sec[key]
        if cast is bool:
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if cast is not None:
            return cast(raw)
        return raw

    def require(self, section: str, key: str, cast=float):
        sec = self.sections.get(section, {})
        if key not in sec:
            raise ValidationError(f"missing required key [{section}] {key}")
        try:
            return cast(sec[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for [{section}] {key}: {exc}") from exc

    def floats(self, section: str, key: str, default: list[float] | None = None) -> list[float]:
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ValidationError(f"missing required list [{section}] {key}")
            return list(default)
        try:
            return [float(tok) for tok in str(raw).replace(",", " ").split()]
        except ValueError as exc:
            raise ValidationError(f"bad list for [{section}] {key}: {exc}") from exc

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()[:16]


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config does not parse: {exc}") from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}
    exp = sections.get("experiment", {})
    kind = exp.get("kind", "").strip()
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError as exc:
        raise ValidationError(f"bad seed: {exc}") from exc
    outdir = exp.get("outdir", path.stem)
    return RunConfig(kind, seed, outdir, sections, text)


def _book_from_config(cfg: RunConfig) -> ExponentBook:
    d = int(cfg.get("grid", "d", 1, int))
    gamma = cfg.require("hamiltonian", "gamma") if "hamiltonian" in cfg.sections else 2.0
    q = cfg.get("exponents", "q", None, float)
    r = cfg.get("exponents", "r", None, float)
    return ExponentBook(d, gamma, q, r)


def validate(cfg: RunConfig) -> tuple[ExponentBook, list[str], list[str]]:
    """Classify the parameter point; returns (book, warnings, errors)."""
    warnings: list[str] = []
    errors: list[str] = []
    try:
        book = _book_from_config(cfg)
    except (ValidationError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc

    d = int(cfg.get("grid", "d", 1, int))
    n = int(cfg.get("grid", "n", 64, int))
    T = float(cfg.get("grid", "T", 0.25, float))
    try:
        TorusGrid(d, n, T, max(1, int(cfg.get("grid", "nt", nt_for_norm_runs(n, T), int))))
    except ValueError as exc:
        errors.append(str(exc))

    gamma = book.gamma
    if gamma <= book.gamma_lower_subquadratic and gamma < 2:
        warnings.append(
            f"outside the subquadratic regularity hypothesis: gamma = {gamma} "
            f"<= 1 + 2/(d+2) = {book.gamma_lower_subquadratic}"
        )
    if book.q is not None:
        if book.q <= book.q_threshold:
            warnings.append(
                f"q = {book.q} at or below the maximal-regularity threshold "
                f"{book.q_threshold}: verdicts are withheld, runs are exploratory"
            )
        if gamma >= 2 and book.alpha_pred is None:
            warnings.append("q at or below (d+2)/gamma': no Hoelder exponent is predicted")
        if book.q is not None and book.alpha_pred is not None and not book.alpha_is_formula:
            warnings.append(
                f"q >= (d+2)/(gamma'-1): exponent formula unavailable, using the "
                f"configured fallback alpha = {book.alpha_pred}"
            )
    if book.r is not None:
        sign = cfg.get("mfg", "coupling", "monotone")
        cap = book.r_max_monotone if sign == "monotone" else book.r_max_focusing
        if cap is None:
            warnings.append("gamma below 1 + 1/(d+1): coupled-system thresholds unavailable")
        elif book.r >= cap:
            warnings.append(
                f"coupling growth r = {book.r} at or above the {sign} threshold {cap}: "
                "existence is not asserted in this regime"
            )
    if gamma == 2.0:
        sub, sup = book.q_crit_sub, book.q_crit_super
        if abs(sub - sup) > 1e-12:
            errors.append(f"internal: threshold branches disagree at gamma=2 ({sub} vs {sup})")
    return book, warnings, errors


def _out_root(explicit: str | None = None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def run(cfg: RunConfig, output_root: str | None = None) -> Path:
    """Execute the experiment; returns the output directory.

    Exit-code semantics live in the CLI: validation failures raise
    ValidationError before any artifact is written; solver blow-ups are data
    and land in the verdict columns.
    """
    book, warnings, errors = validate(cfg)
    if errors:
        raise ValidationError("; ".join(errors))
    outdir = _out_root(output_root) / cfg.outdir
    outdir.mkdir(parents=True, exist_ok=True)

    handler = _HANDLERS[cfg.kind]
    columns, rows, extra = handler(cfg, book, outdir)
    for row in rows:
        row["config_hash"] = cfg.config_hash
    columns = ["config_hash"] + columns
    csv_path = write_csv(outdir / "results.csv", columns, rows)

    artifacts = {csv_path.name: sha256_file(csv_path)}
    for name in extra.pop("artifact_paths", []):
        artifacts[Path(name).name] = sha256_file(name)
    manifest = {
        "schema_version": CSV_SCHEMA_VERSION,
        "kind": cfg.kind,
        "config": cfg.sections,
        "config_hash": cfg.config_hash,
        "columns": columns,
        "book": book.to_dict(),
        "warnings": warnings,
        "package_version": __version__,
        "artifacts": artifacts,
        **extra,
    }
    write_json(outdir / "manifest.json", manifest)
    return outdir


# -- experiment handlers -------------------------------------------------------


def _grid_from_config(cfg: RunConfig) -> TorusGrid:
    d = int(cfg.get("grid", "d", 1, int))
    n = int(cfg.get("grid", "n", 64, int))
    T = float(cfg.get("grid", "T", 0.25, float))
    nt = int(cfg.get("grid", "nt", nt_for_norm_runs(n, T), int))
    return TorusGrid(d, n, T, nt)


def _spec_from_config(cfg: RunConfig, grid: TorusGrid) -> HamiltonianSpec:
    gamma = cfg.require("hamiltonian", "gamma")
    h0 = cfg.get("hamiltonian", "h0", 1.0, float)
    variation = cfg.get("hamiltonian", "h_variation", 0.0, float)
    drift = cfg.get("hamiltonian", "drift", 0.0, float)
    if variation == 0.0 and drift == 0.0:
        return HamiltonianSpec.isotropic(grid, gamma, h0)
    return HamiltonianSpec.cosine(grid, gamma, h0, variation, drift)


def _handle_hj(cfg: RunConfig, book: ExponentBook, outdir):
    grid = _grid_from_config(cfg)
    spec = _spec_from_config(cfg, grid)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    mode = cfg.get("hj", "mode", "manufactured")
    q = book.q or 2.0
    if mode == "manufactured":
        amp = cfg.get("hj", "amplitude", 0.1, float)
        u_star = SpaceTimeField.from_function(
            grid, lambda t, *xs: amp * math.exp(-t) * np.sin(2.0 * np.pi * xs[0]) * np.ones(grid.shape)
        )
        f = manufacture_rhs(u_star, spec)
        problem = HJProblem(grid, spec, f, u_star.initial())
        sol = solve_hj(problem, grid.nt)
        err = float(np.max(np.abs(sol.u.values - u_star.values)))
        row = {"mode": mode, "n": grid.n, "nt": grid.nt, "max_error": err,
               "residual": sol.residual, "blow_up": False}
    else:
        sigma = cfg.get("hj", "sigma", 0.1, float)
        amp = cfg.get("hj", "amplitude", 1.0, float)
        x0 = tuple(rng.uniform(0, 1, grid.d))
        f = make_singular_f(grid, q, x0, grid.T / 2.0, sigma, amp)
        problem = HJProblem(grid, spec, f, Field.constant(grid, 0.0))
        try:
            sol = solve_hj(problem, grid.nt)
            row = {"mode": mode, "n": grid.n, "nt": grid.nt,
                   "max_error": math.nan, "residual": sol.residual, "blow_up": False}
        except BlowUpError:
            sol = None
            row = {"mode": mode, "n": grid.n, "nt": grid.nt,
                   "max_error": math.nan, "residual": math.nan, "blow_up": True}
    extra = {}
    if sol is not None:
        reports = [
            NormReport("w21q", w21q_norm(sol.u, q), {"q": q}).to_dict(),
            NormReport("lq_spacetime", lq_spacetime_norm(sol.u, q), {"q": q}).to_dict(),
            NormReport("sup", float(np.max(np.abs(sol.u.values))), {"p": "inf"}).to_dict(),
        ]
        norms_path = write_json(outdir / "norms.json", {"reports": reports})
        extra["artifact_paths"] = [str(norms_path)]
        if cfg.get("output", "slabs", False, bool):
            slab = save_slab(sol.u, outdir / "solution.npy",
                             {"kind": "hj", "residual": sol.residual,
                              "hamiltonian": _spec_from_config(cfg, grid).to_dict()})
            extra["artifact_paths"] += [str(slab), str(slab.with_suffix(".json"))]
    columns = ["mode", "n", "nt", "max_error", "residual", "blow_up"]
    return columns, [row], extra


def _handle_fp(cfg: RunConfig, book: ExponentBook, outdir):
    grid = _grid_from_config(cfg)
    drift_c = cfg.get("fp", "drift", 0.0, float)
    datum = Field.from_function(grid, lambda *xs: 1.0 + 0.5 * np.cos(2.0 * np.pi * xs[0]) * np.ones(grid.shape))
    drift = np.zeros((grid.nt + 1, grid.d) + grid.shape)
    drift[:, 0] = drift_c
    sol = solve_fp(FPProblem(grid, drift, datum, "backward"), grid.nt)
    row = {
        "n": grid.n, "nt": grid.nt, "drift": drift_c,
        "mass_error": sol.mass_error, "min_rho": sol.min_value, "max_rho": sol.max_value,
    }
    return ["n", "nt", "drift", "mass_error", "min_rho", "max_rho"], [row], {}


def _handle_maxreg(cfg: RunConfig, book: ExponentBook, outdir):
    gamma = cfg.require("hamiltonian", "gamma")
    d = int(cfg.get("grid", "d", 1, int))
    q = cfg.require("exponents", "q")
    sigmas = cfg.floats("ladder", "sigma", [0.2, 0.1414, 0.1, 0.0707])
    n_seeds = int(cfg.get("ladder", "seeds", 1, int))
    record = run_maxreg_sweep(
        gamma, d, q, sigmas, list(range(n_seeds)),
        n=int(cfg.get("grid", "n", 64, int)),
        T=float(cfg.get("grid", "T", 0.25, float)),
        amplitude=cfg.get("ladder", "amplitude", 1.0, float),
        band=cfg.get("tolerances", "band", 4.0, float),
        master_seed=cfg.seed,
        workers=int(cfg.get("experiment", "workers", 1, int)),
    )
    for row in record.rows:
        row.update({"gamma": gamma, "d": d, "q": q,
                    "q_threshold": book.q_threshold,
                    "verdict_bounded": record.verdicts["bounded"]})
    columns = ["gamma", "d", "q", "q_threshold", "sigma", "seed", "n", "nt",
               "f_norm_q", "u_w21q", "du_lgq", "M", "residual", "blow_up", "verdict_bounded"]
    return columns, record.rows, {"verdicts": record.verdicts, "ratios": record.ratios}


def _handle_holder(cfg: RunConfig, book: ExponentBook, outdir):
    gamma = cfg.require("hamiltonian", "gamma")
    d = int(cfg.get("grid", "d", 1, int))
    q = cfg.require("exponents", "q")
    book = ExponentBook(d, gamma, q)
    alpha = book.alpha_pred
    n = int(cfg.get("grid", "n", 128, int))
    T = float(cfg.get("grid", "T", 0.25, float))
    sigmas = cfg.floats("ladder", "sigma", [0.2, 0.1414, 0.1, 0.0707])
    amplitude = cfg.get("ladder", "amplitude", 1.0, float)
    nt = nt_for_norm_runs(n, T)
    grid = TorusGrid(d, n, T, nt)
    spec = _spec_from_config(cfg, grid)
    rows = []
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    seminorms = []
    increment_rows = []
    for sigma in sigmas:
        x0 = tuple(rng.uniform(0, 1, d))
        f = make_singular_f(grid, q, x0, T / 2.0, sigma, amplitude)
        row = {"gamma": gamma, "d": d, "q": q, "sigma": sigma, "n": n, "nt": nt,
               "alpha_pred": alpha, "alpha_is_formula": book.alpha_is_formula}
        try:
            sol = solve_hj(HJProblem(grid, spec, f, Field.constant(grid, 0.0)), nt)
            est = measure_holder(sol.u)
            sup_semi = max(
                holder_seminorm(sol.u.slice(j), alpha)
                for j in range(0, nt + 1, max(1, nt // 16))
            )
            row.update({"alpha_hat_min": est.alpha_min, "alpha_hat_final": est.alpha_final,
                        "holder_seminorm_sup": sup_semi, "blow_up": False})
            seminorms.append(sup_semi)
            for shift, inc in zip(est.shifts, est.final_increments):
                increment_rows.append({"config_hash": cfg.config_hash, "sigma": sigma,
                                       "shift": shift, "increment": inc})
        except BlowUpError:
            row.update({"alpha_hat_min": math.nan, "alpha_hat_final": math.nan,
                        "holder_seminorm_sup": math.nan, "blow_up": True})
        rows.append(row)
    band = cfg.get("tolerances", "band", 4.0, float)
    ok = len(seminorms) == len(sigmas) and max(seminorms) / min(seminorms) <= band
    for row in rows:
        row["verdict_bounded"] = ok
    columns = ["gamma", "d", "q", "sigma", "n", "nt", "alpha_pred", "alpha_is_formula",
               "alpha_hat_min", "alpha_hat_final", "holder_seminorm_sup", "blow_up",
               "verdict_bounded"]
    inc_path = write_csv(outdir / "increments.csv",
                         ["config_hash", "sigma", "shift", "increment"], increment_rows)
    extra = {"verdicts": {"bounded": ok}, "artifact_paths": [str(inc_path)]}
    return columns, rows, extra


def _handle_stability(cfg: RunConfig, book: ExponentBook, outdir):
    gamma = cfg.require("hamiltonian", "gamma")
    d = int(cfg.get("grid", "d", 1, int))
    ks = cfg.floats("ladder", "k", [1.0, 2.0, 4.0, 8.0])
    n = int(cfg.get("grid", "n", 64, int))
    T = float(cfg.get("grid", "T", 0.25, float))
    sigma = cfg.get("ladder", "sigma_f", 0.08, float)
    amplitude = cfg.get("ladder", "amplitude", 0.01, float)
    nt = nt_for_norm_runs(n, T)
    grid = TorusGrid(d, n, T, nt)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    x0 = tuple(rng.uniform(0, 1, d))
    f = make_singular_f(grid, ExponentBook(d, gamma).q_crit_sub, x0, T / 2.0, sigma, amplitude)
    u0 = Field.from_function(
        grid,
        lambda *xs: (0.5 * np.cos(2 * np.pi * xs[0]) + 0.3 * np.sin(6 * np.pi * xs[0])) * np.ones(grid.shape),
    )
    record = check_stability(f, u0, ks, ExponentBook(d, gamma, ExponentBook(d, gamma).q_crit_sub))
    for row in record.rows:
        row.update({"gamma": gamma, "d": d, "q": record.parameters["q"], "p": record.parameters["p"],
                    "verdict_bounded": record.verdicts["bounded"],
                    "rhs_monotone": record.verdicts["rhs_monotone_decreasing"]})
    columns = ["gamma", "d", "q", "p", "k", "lhs", "rhs", "ratio", "f_residual",
               "u0_residual", "verdict_bounded", "rhs_monotone"]
    return columns, record.rows, {"verdicts": record.verdicts}


def _handle_mfg(cfg: RunConfig, book: ExponentBook, outdir):
    grid = _grid_from_config(cfg)
    spec = _spec_from_config(cfg, grid)
    sign = cfg.get("mfg", "coupling", "monotone")
    r = cfg.get("exponents", "r", 1.0, float)
    strength = cfg.get("mfg", "strength", 1.0, float)
    delta = cfg.get("mfg", "delta", 0.5, float)
    tol = cfg.get("mfg", "tol", 1e-6, float)
    max_iters = int(cfg.get("mfg", "max_iters", 200, int))
    m0 = normalize_density(Field.from_function(
        grid, lambda *xs: 1.0 + 0.5 * np.cos(2 * np.pi * xs[0]) * np.ones(grid.shape)
    ))
    uT = Field.from_function(grid, lambda *xs: 0.2 * np.cos(2 * np.pi * xs[0]) * np.ones(grid.shape))
    problem = MFGProblem(grid, spec, Coupling(sign, r, strength), m0, uT)
    sol = solve_mfg(problem, grid.nt, delta=delta, max_iters=max_iters, tol=tol)
    row = {
        "gamma": spec.gamma, "d": grid.d, "r": r, "sign": sign, "n": grid.n, "nt": grid.nt,
        "converged": sol.converged, "blew_up": sol.blew_up, "iterations": sol.iterations,
        "final_residual": sol.residuals[-1] if sol.residuals else math.nan,
        "min_density": sol.min_density,
    }
    if sol.converged:
        fo = monitor_first_order(sol, problem)
        row.update({"kinetic": fo.kinetic, "coupling_power": fo.coupling_power,
                    "identity_defect": fo.identity_defect})
        row.update(sol.smoothness_surrogate())
    else:
        row.update({"kinetic": math.nan, "coupling_power": math.nan, "identity_defect": math.nan,
                    "u_tail_slope": math.nan, "m_tail_slope": math.nan})
    columns = ["gamma", "d", "r", "sign", "n", "nt", "converged", "blew_up", "iterations",
               "final_residual", "min_density", "kinetic", "coupling_power", "identity_defect",
               "u_tail_slope", "m_tail_slope"]
    return columns, [row], {}


def _handle_sweep(cfg: RunConfig, book: ExponentBook, outdir):
    gamma = cfg.require("hamiltonian", "gamma")
    d = int(cfg.get("grid", "d", 1, int))
    sign = cfg.get("mfg", "coupling", "monotone")
    r_values = cfg.floats("ladder", "r", [0.5, 1.0, 1.5, 2.0])
    record = sweep_thresholds(
        gamma, d, r_values, sign,
        n=int(cfg.get("grid", "n", 32, int)),
        T=float(cfg.get("grid", "T", 0.25, float)),
        strength=cfg.get("mfg", "strength", 1.0, float),
        delta=cfg.get("mfg", "delta", 0.5, float),
        max_iters=int(cfg.get("mfg", "max_iters", 150, int)),
        tol=cfg.get("mfg", "tol", 1e-5, float),
        workers=int(cfg.get("experiment", "workers", 1, int)),
    )
    columns = ["gamma", "d", "r", "sign", "r_max", "below_threshold", "converged",
               "blew_up", "iterations", "final_residual"]
    return columns, record.rows, {"verdicts": record.verdicts}


def _handle_verify_spaces(cfg: RunConfig, book: ExponentBook, outdir):
    results = verify_spaces(seed=cfg.seed, n=int(cfg.get("grid", "n", 64, int)))
    rows = [{"check": r["check"], "passed": r["passed"], "detail": r["detail"]} for r in results]
    return ["check", "passed", "detail"], rows, {
        "verdicts": {"all_passed": all(r["passed"] for r in results)}
    }


_HANDLERS = {
    "hj": _handle_hj,
    "fp": _handle_fp,
    "maxreg": _handle_maxreg,
    "holder": _handle_holder,
    "stability": _handle_stability,
    "mfg": _handle_mfg,
    "sweep": _handle_sweep,
    "verify-spaces": _handle_verify_spaces,
}
