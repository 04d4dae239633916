"""Secondary acceptance: figure/boundary agreement and render determinism."""

import math

import numpy as np
import pytest

from hjlab_figures.determinism import strip_metadata
from hjlab_figures.figspec import FigureSpec
from hjlab_figures.render import render

from test_boundaries import as_float, solver_book


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{criterion}: {detail}"


class TestA13FigureBoundaryAgreement:
    def test_rendered_curves_match_solver_book(self, tmp_path):
        d = 1
        spec = FigureSpec("regime-map-hj", tmp_path / "m.png", d=d,
                          gamma_min=1.25, gamma_max=4.1, samples=20)
        result = render(spec)
        gammas, sub = result.curves["q_crit_sub"]
        _, sup = result.curves["q_crit_super"]
        worst = 0.0
        for i, gamma in enumerate(gammas):  # 20 sampled gamma values
            book = solver_book(tmp_path, float(gamma), d)
            worst = max(worst, abs(sub[i] - as_float(book["q_crit_sub"])))
            worst = max(worst, abs(sup[i] - as_float(book["q_crit_super"])))
        curves_ok = worst <= 1e-10

        datas = []
        for tag in ("a", "b"):
            out = tmp_path / f"det_{tag}.png"
            render(FigureSpec("regime-map-hj", out, d=d, samples=20,
                              gamma_min=1.25, gamma_max=4.1))
            datas.append(strip_metadata(out.read_bytes()))
        stable = datas[0] == datas[1]
        report(
            "A13", curves_ok and stable,
            f"boundary curves match the solver book at 20 gamma samples "
            f"(worst defect {worst:.2e} <= 1e-10); re-render byte-stable after "
            f"metadata stripping",
        )
