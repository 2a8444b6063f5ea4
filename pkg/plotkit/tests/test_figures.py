import hashlib
from pathlib import Path

import pytest

from plotkit import FIGURE_IDS, FigureSpec, SchemaMismatch, build_figure, render
from plotkit.cli import cli
from plotkit.figures import read_table

DATA = Path(__file__).parent / "data"
INPUTS = {
    "torque_regression": DATA / "static_torque.csv",
    "bode_magnitude": DATA / "bode.csv",
    "bode_phase": DATA / "bode.csv",
    "thermal_rise": DATA / "thermal_curves.csv",
    "thermal_fall": DATA / "thermal_curves.csv",
    "noise_bars": DATA / "noise_levels.csv",
}


def test_every_figure_id_has_a_golden_input():
    assert set(INPUTS) == set(FIGURE_IDS)


@pytest.mark.parametrize("figure_id", sorted(FIGURE_IDS))
def test_renders_from_golden_csv(figure_id, tmp_path):
    out = tmp_path / f"{figure_id}.svg"
    render(FigureSpec(figure_id, INPUTS[figure_id], out))
    body = out.read_bytes()
    assert body.startswith(b"<?xml")
    assert len(body) > 2000


def test_bode_magnitude_series_shape():
    header, rows = read_table(INPUTS["bode_magnitude"])
    fig = build_figure("bode_magnitude", header, rows)
    lines = fig.axes[0].get_lines()
    assert len(lines) == 6  # one series per amplitude
    for line in lines:
        assert len(line.get_xdata()) == 20  # one point per grid frequency


def test_bode_phase_lag_plotted_downward():
    header, rows = read_table(INPUTS["bode_phase"])
    fig = build_figure("bode_phase", header, rows)
    for line in fig.axes[0].get_lines():
        ys = line.get_ydata()
        assert min(ys) < 0  # lag is negative and stays below zero


@pytest.mark.parametrize("figure_id", sorted(FIGURE_IDS))
def test_svg_rendering_is_byte_stable(figure_id, tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    render(FigureSpec(figure_id, INPUTS[figure_id], a))
    render(FigureSpec(figure_id, INPUTS[figure_id], b))
    assert a.read_bytes() == b.read_bytes()


def test_never_mutates_input(tmp_path):
    src = INPUTS["bode_magnitude"]
    before = hashlib.sha256(src.read_bytes()).hexdigest()
    render(FigureSpec("bode_magnitude", src, tmp_path / "x.svg"))
    assert hashlib.sha256(src.read_bytes()).hexdigest() == before


def test_empty_but_valid_csv_renders_empty_axes(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("amplitude_rad_s,freq_hz,gain_db,phase_deg\r\n")
    out = tmp_path / "empty.svg"
    render(FigureSpec("bode_magnitude", empty, out))
    assert out.exists()
    header, rows = read_table(empty)
    fig = build_figure("bode_magnitude", header, rows)
    assert fig.axes[0].get_lines() == []


def test_schema_mismatch_names_missing_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("amplitude_rad_s,freq_hz\r\n5.0,0.1\r\n")
    with pytest.raises(SchemaMismatch) as e:
        render(FigureSpec("bode_magnitude", bad, tmp_path / "x.svg"))
    assert "gain_db" in str(e.value)


def test_unknown_figure_id_rejected():
    with pytest.raises(SchemaMismatch):
        build_figure("spectrogram", ["a"], [])


class TestCli:
    def test_render_via_cli(self, tmp_path, capsys):
        out = tmp_path / "fig.svg"
        rc = cli(["noise_bars", "--in", str(INPUTS["noise_bars"]), "--out", str(out)])
        assert rc == 0
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_schema_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\r\n1,2\r\n")
        rc = cli(["bode_phase", "--in", str(bad), "--out", str(tmp_path / "f.svg")])
        assert rc == 1
        assert "missing column" in capsys.readouterr().err

    def test_unknown_id_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            cli(["nonsense", "--in", "a.csv", "--out", "b.svg"])
        assert e.value.code == 2

    def test_missing_input_file(self, tmp_path, capsys):
        rc = cli(
            [
                "bode_phase",
                "--in",
                str(tmp_path / "nope.csv"),
                "--out",
                str(tmp_path / "f.svg"),
            ]
        )
        assert rc == 1
