"""Figure specifications: INI files naming a kind, inputs and an output path."""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

FIGURE_KINDS = ("regime-map-hj", "regime-map-mfg", "holder-fit", "ladder", "convergence")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    out: Path
    csv: Path | None = None
    d: int = 1
    gamma_min: float = 1.1
    gamma_max: float = 4.0
    samples: int = 200
    dpi: int = 120
    title: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")
        if self.gamma_min <= 1.0 or self.gamma_max <= self.gamma_min:
            raise ValueError("need 1 < gamma_min < gamma_max")


def load_figure_spec(path: Path | str) -> FigureSpec:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(path.read_text())
    fig = dict(parser["figure"]) if parser.has_section("figure") else {}
    if "kind" not in fig or "out" not in fig:
        raise ValueError("figure spec needs [figure] kind and out")
    csv = fig.get("csv")
    base = path.parent
    return FigureSpec(
        kind=fig["kind"].strip(),
        out=(base / fig["out"]).resolve() if not Path(fig["out"]).is_absolute() else Path(fig["out"]),
        csv=(base / csv).resolve() if csv and not Path(csv).is_absolute() else (Path(csv) if csv else None),
        d=int(fig.get("d", 1)),
        gamma_min=float(fig.get("gamma_min", 1.1)),
        gamma_max=float(fig.get("gamma_max", 4.0)),
        samples=int(fig.get("samples", 200)),
        dpi=int(fig.get("dpi", 120)),
        title=fig.get("title", ""),
    )
