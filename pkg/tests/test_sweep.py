import math

import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lossyphase import gaussian as ga
from lossyphase import sweep
from lossyphase.errors import ConfigError

# -- config grammar -----------------------------------------------------------


def test_parse_axis():
    ax = sweep.parse_value("0:2:5")
    assert ax == sweep.Axis(0.0, 2.0, 5)
    npt.assert_allclose(ax.values(), [0, 0.5, 1, 1.5, 2])
    log = sweep.parse_value("1e-3:1e5:9:log")
    npt.assert_allclose(log.values(), [10.0**k for k in range(-3, 6)], rtol=1e-12)


def test_parse_lists_and_fractions():
    assert sweep.parse_value("1/2, 1/8") == (0.5, 0.125)
    assert sweep.parse_value("0.3") == (0.3,)
    assert sweep.parse_value("none, 0.1") == (None, 0.1)


@pytest.mark.parametrize("text", ["", "0:1", "0:1:x", "a, b", "1/0", "0:1:3:cubic", "-1:1:3:log", "0:1:0"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        sweep.parse_value(text)


def test_read_config_text():
    text = "# header\nn_loss = 0:1:3  # trailing comment\n\nmu = 1/2\nmu = 1/4\n"
    assert sweep.read_config_text(text) == {"n_loss": "0:1:3", "mu": "1/4"}
    with pytest.raises(ConfigError):
        sweep.read_config_text("just words")
    with pytest.raises(ConfigError):
        sweep.read_config_text(" = 3")


def test_defaults():
    cfg = sweep.build_config("fig4", {})
    assert cfg.mode == "analytic"
    assert cfg.values("mu") == (0.5, 0.125, 0.03125, 0.0078125)
    assert len(cfg.values("n_loss")) == 41
    cfg = sweep.build_config("compare", {})
    assert len(sweep._grid(cfg, ("alpha", "r", "sigma"))) == 18
    assert cfg.cutoff_cap == 100 and cfg.tolerance == 1e-4


@pytest.mark.parametrize("raw", [
    {"bogus": "1"},
    {"mode": "oracle"},
    {"format": "xml"},
    {"tolerance": "0"},
    {"cutoff_cap": "1"},
    {"jobs": "0"},
    {"jobs": "two"},
    {"mu": "1.5"},
    {"n_loss": "-1:1:3"},
    {"n_loss": "0:1:3", "mu": "0.1:0.4:3", "n_total": "1:10:3"},
    {"ideal_squeezing": "maybe"},
])
def test_fig4_config_errors(raw):
    with pytest.raises(ConfigError):
        sweep.build_config("fig4", raw)


@pytest.mark.parametrize("raw", [
    {"sigma": "1"},
    {"alpha": "0", "r": "0"},
    {"mode": "measurement"},
])
def test_compare_config_errors(raw):
    with pytest.raises(ConfigError):
        sweep.build_config("compare", raw)


def test_measure_config_errors():
    with pytest.raises(ConfigError):
        sweep.build_config("measure", {"transmittance": "1.5"})
    with pytest.raises(ConfigError):
        sweep.build_config("measure", {"phi": "1"})


def test_unknown_command():
    with pytest.raises(ConfigError):
        sweep.build_config("fig7", {})


def test_load_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n_loss = 0:1:3\nformat = tsv\n")
    cfg = sweep.load_config("fig6", path, {"n_loss": "0:1:2"})
    assert cfg.values("n_loss") == (0.0, 1.0)
    assert cfg.delimiter == "\t"


# -- tables -------------------------------------------------------------------

cells = st.one_of(
    st.none(),
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False),
    st.sampled_from(["ok", "tolerance", "infeasible"]),
)


@given(st.lists(st.lists(cells, min_size=3, max_size=3), max_size=6))
def test_table_round_trip(rows):
    table = sweep.Table(["a", "b", "c"], rows)
    for delim in (",", "\t"):
        assert sweep.Table.from_text(table.to_text(delim), delim) == table


def test_table_text_format():
    text = sweep.Table(["x", "y"], [[0.1, None], [1 / 3, "ok"]]).to_text()
    assert text == "x,y\n0.10000000000000001,\n0.33333333333333331,ok\n"


def test_fig4_table():
    t = sweep.run_fig4([0.0, 0.5], [0.5, 0.125], 10.0)
    assert t.columns[:5] == ["n_loss", "N", "sigma", "enhancement[mu=0.5]", "enhancement[mu=0.125]"]
    assert t.column("enhancement[mu=0.5]") == [1.0, 0.5]
    # exact fisher column lies above the high-squeezing value
    ideal = sweep.run_fig4([0.5], [0.5], 10.0, ideal_squeezing=True)
    assert t.rows[1][t.columns.index("fisher[mu=0.5]")] > ideal.rows[0][ideal.columns.index("fisher[mu=0.5]")]


def test_fig4_curves_cross():
    t = sweep.run_fig4(sweep.Axis(0, 2, 201).values(), [0.5, 0.125])
    diff = [a - b for a, b in zip(t.column("enhancement[mu=0.5]"), t.column("enhancement[mu=0.125]"))]
    xs = t.column("n_loss")
    brackets = [(xs[i], xs[i + 1]) for i in range(len(diff) - 1) if diff[i] > 0 >= diff[i + 1]]
    assert len(brackets) == 1
    # 4 mu (1 - mu) / (1 + 4 mu n) equal for mu = 1/2, 1/8 at n = 3/2
    lo, hi = brackets[0]
    assert lo < 1.5 <= hi + 1e-12


def test_fig5_table():
    t = sweep.run_fig5([0.0, 2.0])
    assert t.column("mu_opt") == [0.5, 0.25]
    assert all(o >= h for o, h in zip(t.column("enhancement_opt"), t.column("enhancement_half")))


def test_fig6_anchors():
    t = sweep.run_fig6([0.0, 0.5])
    assert t.column("improvement_ratio")[0] == 1.0
    npt.assert_allclose(t.column("improvement_ratio")[1], 1.072, atol=5e-4)


def test_compare_point():
    rec = sweep.compare_point((0.5, 0.3, 0.1), 1e-10, 100, 1e-4)
    assert rec.status == "ok"
    assert rec.rel_dev < 1e-6
    assert rec.f_analytic == ga.fisher_information(ga.InputSpec(0.5, 0.3, 0.1))


def test_compare_point_infeasible():
    rec = sweep.compare_point((0.5, 1.0, 0.1), 1e-10, 40, 1e-4)
    assert rec.status == "infeasible"
    assert rec.f_oracle is None


def test_measure_point():
    rec = sweep.measure_point((0.5, 0.3, 0.1, 0.0, None), 1e-10, 100, 1e-4)
    assert rec.status == "ok"
    npt.assert_allclose(rec.extra["mean"], rec.extra["matrix_mean"], atol=1e-10)
    npt.assert_allclose(rec.sensitivity_measurement, rec.f_analytic, rtol=1e-6)
    # counting without the local oscillator cannot beat the bound
    assert 0 <= rec.extra["sensitivity_direct"] <= rec.f_analytic * (1 + 1e-8)


def test_parallel_map_keeps_order():
    points = [(0.5, 0.3, 0.0), (1.0, 0.3, 0.1), (0.5, 0.6, 0.0)]
    serial, _ = sweep.run_compare(points, jobs=1)
    parallel, _ = sweep.run_compare(points, jobs=2)
    assert serial.to_text() == parallel.to_text()


def test_validate_table_rejects_bad_rows():
    sweep.validate_table(sweep.run_fig6([0.0, 1.0]))
    with pytest.raises(ValueError):
        sweep.validate_table(sweep.Table(["n_loss", "mu_opt"], [[-1.0, 0.3]]))
    with pytest.raises(ValueError):
        sweep.validate_table(sweep.Table(["N", "F_analytic"], [[2.0, 1.0]]))
    with pytest.raises(ValueError):
        sweep.validate_table(sweep.Table(["enhancement_opt", "enhancement_half"], [[0.3, 0.4]]))


def test_write_and_load(tmp_path):
    t = sweep.run_fig5([0.0, 0.25, math.pi])
    path = tmp_path / "fig5.tsv"
    sweep.write_table(t, path, "\t")
    assert sweep.load_table(path) == t
