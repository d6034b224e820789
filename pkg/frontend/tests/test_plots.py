"""Plot rendering: series structure, determinism (criterion 9), errors."""

import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from vtl_plots import PlotError, plot_fig2, plot_predictor, read_rows
from vtl_plots.cli import main as cli_main
from vtl_plots.plots import predict_g

DATA = Path(__file__).resolve().parent / "data"
FIG2_CSV = DATA / "fig2.csv"
ER_CSV = DATA / "er.csv"

# Verdict summary printed by the conftest reporter.
CRITERIA = {
    9: "plot_fig2 renders a 4-series chart from the sweep CSV and reruns "
       "are pixel-identical",
}


def _series(fig):
    """Visible (legend-labeled) data lines of the figure's axes."""
    ax = fig.axes[0]
    return [l for l in ax.lines if not l.get_label().startswith("_")]


class TestReadRows:
    def test_parses_sample(self):
        rows = read_rows(FIG2_CSV)
        assert len(rows) == 32
        assert {r.n for r in rows} == {10, 15, 20, 25}

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        text = FIG2_CSV.read_text().replace("gAvg", "gMean")
        bad.write_text(text)
        with pytest.raises(PlotError, match="missing column 'gAvg'"):
            read_rows(bad)

    def test_malformed_row_named(self, tmp_path):
        lines = FIG2_CSV.read_text().splitlines()
        lines[3] = "fig2,10,ring,3,noninteractive,1,not-a-number,10,1,1,1,0,0"
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines))
        with pytest.raises(PlotError, match="malformed row 4"):
            read_rows(bad)

    def test_short_row_named(self, tmp_path):
        lines = FIG2_CSV.read_text().splitlines()
        lines[5] = "fig2,10,ring"
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines))
        with pytest.raises(PlotError, match="malformed row 6"):
            read_rows(bad)


class TestFig2:
    def test_criterion_9_four_series_pixel_identical(self, tmp_path):
        """[SECONDARY] criterion 9: 4-series chart, rerun pixel-identical."""
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        fig = plot_fig2(FIG2_CSV, a)
        plot_fig2(FIG2_CSV, b)
        lines = _series(fig)
        assert [l.get_label() for l in lines] == [
            "N=10", "N=15", "N=20", "N=25"]
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_saturation_reference_lines(self, tmp_path):
        fig = plot_fig2(FIG2_CSV, tmp_path / "o.png")
        refs = [l for l in fig.axes[0].lines
                if l.get_label().startswith("_N=")]
        assert sorted(l.get_ydata()[0] for l in refs) == [10, 15, 20, 25]

    def test_single_n_ok(self, tmp_path):
        lines = [l for l in FIG2_CSV.read_text().splitlines()
                 if l.startswith("scenario") or ",10,ring," in l]
        sub = tmp_path / "sub.csv"
        sub.write_text("\n".join(lines) + "\n")
        fig = plot_fig2(sub, tmp_path / "o.png")
        assert [l.get_label() for l in _series(fig)] == ["N=10"]

    def test_gap_not_interpolated(self, tmp_path):
        lines = [l for l in FIG2_CSV.read_text().splitlines()
                 if not l.startswith("fig2,10,ring,3,")]
        sub = tmp_path / "gap.csv"
        sub.write_text("\n".join(lines) + "\n")
        fig = plot_fig2(sub, tmp_path / "o.png")
        n10 = next(l for l in _series(fig) if l.get_label() == "N=10")
        ys = list(n10.get_ydata())
        assert math.isnan(ys[2])  # c=3 stays a gap

    def test_no_ring_rows_error(self, tmp_path):
        with pytest.raises(PlotError, match="no ring rows"):
            plot_fig2(ER_CSV, tmp_path / "o.png")


class TestPredictor:
    def test_measured_and_predicted_series(self, tmp_path):
        fig = plot_predictor(ER_CSV, tmp_path / "o.png")
        labels = [l.get_label() for l in _series(fig)]
        assert labels == [
            "measured gAvg (per seed)",
            "measured gAvg (mean)",
            "predicted 2·f·c·lnN/lnc (f=1)",
        ]
        pred = next(l for l in fig.axes[0].lines
                    if l.get_label().startswith("predicted"))
        p16 = 2 * math.log(16) / 16
        assert pred.get_ydata()[0] == pytest.approx(predict_g(16, p16))

    def test_f_scales_prediction(self, tmp_path):
        fig1 = plot_predictor(ER_CSV, tmp_path / "a.png", f=1.0)
        fig2 = plot_predictor(ER_CSV, tmp_path / "b.png", f=2.0)
        y1 = next(l for l in fig1.axes[0].lines
                  if l.get_label().startswith("predicted")).get_ydata()
        y2 = next(l for l in fig2.axes[0].lines
                  if l.get_label().startswith("predicted")).get_ydata()
        assert list(y2) == pytest.approx([2 * v for v in y1])

    def test_logx_deterministic(self, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        fig = plot_predictor(ER_CSV, a, logx=True)
        plot_predictor(ER_CSV, b, logx=True)
        assert fig.axes[0].get_xscale() == "log"
        assert a.read_bytes() == b.read_bytes()

    def test_mean_fraction_decreases(self):
        # The committed sample reflects the scale-out trend.
        rows = [r for r in read_rows(ER_CSV) if r.topology == "erdosRenyi"]
        by_n = {}
        for r in rows:
            by_n.setdefault(r.n, []).append(r.g_avg)
        fracs = [sum(v) / len(v) / n for n, v in sorted(by_n.items())]
        assert fracs[0] > fracs[1] > fracs[2]


class TestCli:
    def test_fig2_end_to_end(self, tmp_path):
        out = tmp_path / "fig2.png"
        res = CliRunner().invoke(cli_main, [
            "--input", str(FIG2_CSV), "--output", str(out), "--kind", "fig2"])
        assert res.exit_code == 0, res.output
        assert out.exists()

    def test_predictor_with_flags(self, tmp_path):
        out = tmp_path / "pred.png"
        res = CliRunner().invoke(cli_main, [
            "--input", str(ER_CSV), "--output", str(out),
            "--kind", "predictorOverlay", "--f", "1.5", "--logx"])
        assert res.exit_code == 0, res.output

    def test_error_exit_nonzero(self, tmp_path):
        res = CliRunner().invoke(cli_main, [
            "--input", str(tmp_path / "missing.csv"),
            "--output", str(tmp_path / "o.png"), "--kind", "fig2"])
        assert res.exit_code == 1
        assert "error:" in res.output
