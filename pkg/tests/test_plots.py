import numpy as np
import pytest

from olfalign.metrics import roc_curve
from olfalign.pipelines import AGGREGATE, AlignmentReport, ReportRow
from olfalign.plots import (
    render_descriptor_bars_svg,
    render_plots,
    render_roc_svg,
    render_rsm_svg,
    render_scatter_svg,
)
from olfalign.rsa import Rsm


def _regress_report():
    rows = [
        ReportRow("regress", "d", "m", 0, "sweet", "cc", 0.4, 0.1, 5),
        ReportRow("regress", "d", "m", 0, "sour", "cc", 0.2, 0.05, 5),
        ReportRow("regress", "d", "m", 0, AGGREGATE, "cc", 0.3, 0.07, 5),
        ReportRow("regress", "d", "m", 0, "sweet", "nrmse", 0.15, 0.01, 5),
        ReportRow("regress", "d", "m", 0, "sour", "nrmse", 0.2, 0.02, 5),
        ReportRow("regress", "d", "m", 0, AGGREGATE, "nrmse", 0.175, 0.015, 5),
    ]
    return AlignmentReport("regress", rows, "")


class TestRenderPlots:
    def test_empty_report_noop_with_warning(self, tmp_path, caplog):
        report = AlignmentReport("regress", [], "")
        with caplog.at_level("WARNING"):
            written = render_plots(report, tmp_path)
        assert written == []
        assert any("empty report" in r.message for r in caplog.records)
        assert list(tmp_path.iterdir()) == []

    def test_regress_bars_written(self, tmp_path):
        written = render_plots(_regress_report(), tmp_path)
        names = sorted(p.name for p in written)
        assert names == ["bars_cc.svg", "bars_nrmse.svg"]

    def test_byte_identical_rerender(self, tmp_path):
        a = render_plots(_regress_report(), tmp_path / "a")
        b = render_plots(_regress_report(), tmp_path / "b")
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_rsa_layer_series(self, tmp_path):
        rows = [ReportRow("rsa", "d", "m", layer, AGGREGATE, "rsa_r", 0.1 * layer, None, 9)
                for layer in range(4)]
        written = render_plots(AlignmentReport("rsa", rows, ""), tmp_path)
        assert [p.name for p in written] == ["layers.svg"]

    def test_rsa_single_layer_bars(self, tmp_path):
        rows = [ReportRow("rsa", "pairs_a", "m", "final", AGGREGATE, "rsa_r", 0.6, None, 9)]
        written = render_plots(AlignmentReport("rsa", rows, ""), tmp_path)
        assert [p.name for p in written] == ["rsa.svg"]


class TestPrimitiveCharts:
    def test_roc_svg_contains_curves_and_diagonal(self, tmp_path, rng):
        scores = rng.random(50)
        labels = (rng.random(50) > 0.5).astype(float)
        labels[:2] = [0.0, 1.0]
        curves = [roc_curve(scores, labels)] * 3
        render_roc_svg(curves, tmp_path / "roc.svg")
        text = (tmp_path / "roc.svg").read_text()
        assert text.count("<polyline") == 4   # 3 thin + 1 mean
        assert "stroke-dasharray" in text      # chance diagonal
        assert "mean AUC" in text

    def test_bars_need_matching_rows(self, tmp_path):
        with pytest.raises(ValueError):
            render_descriptor_bars_svg(_regress_report(), "missing", tmp_path / "x.svg")

    def test_rsm_masked_cells_blank(self, tmp_path):
        mask = np.array([[True, False], [False, True]])
        rsm = Rsm(odorants=("a", "b"), matrix=np.eye(2), mask=mask)
        render_rsm_svg(rsm, tmp_path / "rsm.svg")
        text = (tmp_path / "rsm.svg").read_text()
        # two unit-diagonal cells plus frame: exactly 3 rects beyond background
        assert text.count("<rect") == 2 + 1 + 1

    def test_scatter_svg(self, tmp_path, rng):
        from olfalign.pipelines import PcaScatterData

        data = PcaScatterData(
            odorants=("a", "b", "c"),
            coords=rng.standard_normal((3, 2)),
            broad_names=("x", "y", "z"),
            broad_membership=np.eye(3, dtype=bool),
            narrow_names=("n",),
            narrow_membership=np.array([[True], [False], [False]]),
        )
        render_scatter_svg(data, tmp_path / "s.svg")
        text = (tmp_path / "s.svg").read_text()
        assert text.count("<circle") == 3
