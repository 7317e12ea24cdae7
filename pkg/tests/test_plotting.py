import numpy as np

from invopt.cli import main
from invopt.plotting import Series, regret_svg, series_from_trace
from invopt.sim import RandomVertexSets, make_instance, run_experiment, write_trace


def test_single_trace_gives_two_polylines():
    tr = run_experiment(make_instance(RandomVertexSets(2), 1000, 0), "ons")
    svg = regret_svg([series_from_trace(tr)])
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 2
    assert svg.count('stroke-dasharray="5,3"') == 1
    assert ">1e3<" in svg
    # subsampled but keeps the final point
    pts = svg.split('points="')[1].split('"')[0].split()
    assert 2 <= len(pts) <= 400


def test_empty_series_gives_axes_only():
    svg = regret_svg([Series("empty", np.zeros(0), np.zeros(0), np.zeros(0))])
    assert "<polyline" not in svg and "<rect" in svg


def test_plot_subcommand(tmp_path, capsys):
    tr = run_experiment(make_instance(RandomVertexSets(2), 0, 0), "ons")
    path = write_trace(tr, tmp_path / "empty.csv")
    out = tmp_path / "fig.svg"
    assert main(["plot", str(path), "-o", str(out)]) == 0
    assert "<polyline" not in out.read_text()
    assert main(["plot", str(tmp_path / "missing.csv"), "-o", str(out)]) == 2
