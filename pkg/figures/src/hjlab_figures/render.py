"""Render experiment CSV tables into deterministic figures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hjlab-figures"

import matplotlib.pyplot as plt
import numpy as np

from .boundaries import hj_regularity_thresholds, mfg_growth_thresholds
from .figspec import FigureSpec

__all__ = ["RenderResult", "render", "read_rows"]


@dataclass(frozen=True)
class RenderResult:
    """Written image plus the data that went into it (for verification)."""

    path: Path
    curves: dict = field(default_factory=dict)    # name -> (x array, y array)
    markers: list = field(default_factory=list)   # dicts of plotted rows


def read_rows(path: Path, required: tuple[str, ...]) -> list[dict]:
    """Read a CSV table, failing loudly with the first missing column name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise ValueError(f"input CSV {path} is missing required column {col!r}")
        return list(reader)


def _truthy(raw: str) -> bool:
    return str(raw).strip().lower() in ("1", "true", "yes")


def _save(fig, spec: FigureSpec) -> None:
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    suffix = spec.out.suffix.lower()
    if suffix == ".svg":
        metadata = {"Date": None}
    else:
        metadata = {"Software": None}
    fig.savefig(spec.out, dpi=spec.dpi, metadata=metadata)
    plt.close(fig)


def render(spec: FigureSpec) -> RenderResult:
    """Dispatch on the figure kind; returns the written path and curve data."""
    return _RENDERERS[spec.kind](spec)


def _regime_map_hj(spec: FigureSpec) -> RenderResult:
    gammas = np.linspace(spec.gamma_min, spec.gamma_max, spec.samples)
    sub = np.array([hj_regularity_thresholds(g, spec.d)["q_crit_sub"] for g in gammas])
    sup = np.array([hj_regularity_thresholds(g, spec.d)["q_crit_super"] for g in gammas])
    threshold = np.where(gammas < 2.0, sub, sup)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(gammas, sub, color="#888888", lw=1.0, ls=":", label="subquadratic branch")
    ax.plot(gammas, sup, color="#bbbbbb", lw=1.0, ls=":", label="superquadratic branch")
    ax.plot(gammas, threshold, color="#c62828", lw=2.0, label="maximal-regularity threshold")
    ax.axvline(2.0, color="#dddddd", lw=0.8)
    markers = []
    if spec.csv is not None:
        rows = read_rows(spec.csv, ("gamma", "q", "verdict_bounded"))
        for row in rows:
            g, q = float(row["gamma"]), float(row["q"])
            ok = _truthy(row["verdict_bounded"])
            ax.plot([g], [q], marker="o" if ok else "x",
                    color="#2e7d32" if ok else "#c62828", ms=7)
            markers.append({"gamma": g, "q": q, "bounded": ok})
    ax.set_xlabel("gradient growth gamma")
    ax.set_ylabel("integrability q")
    ax.set_title(spec.title or f"maximal-regularity regimes, d = {spec.d}")
    ax.legend(loc="upper left", fontsize=8)
    _save(fig, spec)
    return RenderResult(spec.out, {
        "q_crit_sub": (gammas, sub),
        "q_crit_super": (gammas, sup),
        "q_threshold": (gammas, threshold),
    }, markers)


def _regime_map_mfg(spec: FigureSpec) -> RenderResult:
    gammas = np.linspace(spec.gamma_min, spec.gamma_max, spec.samples)
    mono = np.array([
        _finite_or_nan(mfg_growth_thresholds(g, spec.d)["r_max_monotone"]) for g in gammas
    ])
    foc = np.array([mfg_growth_thresholds(g, spec.d)["r_max_focusing"] for g in gammas])

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if np.any(np.isfinite(mono)):
        ax.plot(gammas, mono, color="#1565c0", lw=2.0, label="monotone cap")
    ax.plot(gammas, foc, color="#ef6c00", lw=2.0, label="focusing cap")
    ax.axvline(2.0, color="#dddddd", lw=0.8)
    markers = []
    if spec.csv is not None:
        rows = read_rows(spec.csv, ("gamma", "r", "converged"))
        for row in rows:
            g, r = float(row["gamma"]), float(row["r"])
            ok = _truthy(row["converged"])
            ax.plot([g], [r], marker="o" if ok else "x",
                    color="#2e7d32" if ok else "#c62828", ms=7)
            markers.append({"gamma": g, "r": r, "converged": ok})
    ax.set_xlabel("gradient growth gamma")
    ax.set_ylabel("coupling growth r")
    ax.set_title(spec.title or f"coupled-system growth caps, d = {spec.d}")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, spec)
    return RenderResult(spec.out, {
        "r_max_monotone": (gammas, mono),
        "r_max_focusing": (gammas, foc),
    }, markers)


def _finite_or_nan(v) -> float:
    if v is None:
        return math.nan
    return float(v)


def _holder_fit(spec: FigureSpec) -> RenderResult:
    if spec.csv is None:
        raise ValueError("holder-fit needs an input CSV")
    rows = read_rows(spec.csv, ("sigma", "shift", "increment"))
    by_sigma: dict[float, list[tuple[float, float]]] = {}
    for row in rows:
        by_sigma.setdefault(float(row["sigma"]), []).append(
            (float(row["shift"]), float(row["increment"]))
        )
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    curves = {}
    markers = []
    for i, (sigma, pts) in enumerate(sorted(by_sigma.items(), reverse=True)):
        pts.sort()
        h = np.array([p[0] for p in pts])
        inc = np.array([p[1] for p in pts])
        good = inc > 0
        ax.loglog(h[good], inc[good], "o-", ms=4, lw=1.0, label=f"sigma = {sigma:g}")
        if good.sum() >= 2:
            slope = np.polyfit(np.log(h[good]), np.log(inc[good]), 1)[0]
            markers.append({"sigma": sigma, "alpha_hat": float(slope)})
        curves[f"sigma={sigma:g}"] = (h, inc)
    ax.set_xlabel("shift distance")
    ax.set_ylabel("max increment")
    ax.set_title(spec.title or "Hoelder increment fits")
    ax.legend(fontsize=8)
    _save(fig, spec)
    return RenderResult(spec.out, curves, markers)


def _ladder(spec: FigureSpec) -> RenderResult:
    if spec.csv is None:
        raise ValueError("ladder needs an input CSV")
    rows = read_rows(spec.csv, ("sigma", "M"))
    sigma = np.array([float(r["sigma"]) for r in rows])
    m_val = np.array([float(r["M"]) for r in rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.loglog(sigma, m_val, "o", ms=6, color="#1565c0")
    finite = m_val[np.isfinite(m_val)]
    if finite.size:
        gm = math.exp(float(np.mean(np.log(finite))))
        ax.axhline(2.0 * gm, color="#c62828", lw=0.8, ls="--", label="band (x2 of geo-mean)")
        ax.axhline(0.5 * gm, color="#c62828", lw=0.8, ls="--")
    ax.set_xlabel("concentration scale sigma")
    ax.set_ylabel("M(sigma)")
    ax.set_title(spec.title or "maximal-regularity ladder")
    ax.legend(fontsize=8)
    _save(fig, spec)
    return RenderResult(spec.out, {"ladder": (sigma, m_val)}, [])


def _convergence(spec: FigureSpec) -> RenderResult:
    if spec.csv is None:
        raise ValueError("convergence needs an input CSV")
    rows = read_rows(spec.csv, ("resolution", "error"))
    res = np.array([float(r["resolution"]) for r in rows])
    err = np.array([float(r["error"]) for r in rows])
    order = np.argsort(res)
    res, err = res[order], err[order]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.loglog(res, err, "o-", color="#1565c0", label="measured")
    if res.size >= 2 and err[0] > 0:
        guide = err[0] * (res / res[0]) ** (-2.0)
        ax.loglog(res, guide, "--", color="#888888", label="second order")
    ax.set_xlabel("resolution")
    ax.set_ylabel("error")
    ax.set_title(spec.title or "convergence")
    ax.legend(fontsize=8)
    _save(fig, spec)
    return RenderResult(spec.out, {"convergence": (res, err)}, [])


_RENDERERS = {
    "regime-map-hj": _regime_map_hj,
    "regime-map-mfg": _regime_map_mfg,
    "holder-fit": _holder_fit,
    "ladder": _ladder,
    "convergence": _convergence,
}
