import math
import subprocess
import sys

import pytest

from faskit.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, bundled_config, main
from faskit.experiments import (
    KINDS,
    ConfigError,
    ResultTable,
    Row,
    point_seed,
    run_experiment,
    spec_from_mapping,
)
from faskit.montecarlo import Estimate
from faskit.output import csv_columns, csv_text, emit_csv, emit_plot, plot_svg, read_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def spec(kind, params, name, values, **top):
    return spec_from_mapping({"kind": kind, "params": params,
                              "sweep": {"name": name, "values": values}, **top})


AVG = spec("avg-variance", {"geometry": "linear", "ports_per_axis": 100, "W": 0.5},
           "n_hat", list(range(1, 11)), trials=1)
DMT = spec("dmt", {"variant": "fas", "Np_tx": 13, "Np_rx": 13, "n_min": 4}, "r", [0, 1, 2, 3, 4])


def table_with(values, names=("m",)):
    rows = [Row(float(i), {n: Estimate(v, v * 0.9, v * 1.1, 10, 0.0) for n in names}, 10)
            for i, v in enumerate(values)]
    return ResultTable(DMT, tuple(names), rows, "test")


class TestRunExperiment:
    def test_avg_variance(self):
        t = run_experiment(AVG)
        vals = [r.metrics["avg_variance"].value for r in t.rows]
        assert len(t.rows) == 10
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= 1.0 + 1e-12

    def test_dmt_169(self):
        t = run_experiment(DMT)
        assert t.rows[0].metrics["d"].value == 169
        assert t.rows[-1].metrics["d"].value == 0

    def test_rows_bracket(self):
        s = spec("outage", {"scheme": "tx", "ports_per_axis": 4}, "snr_db", [10.0, 20.0], trials=500)
        for row in run_experiment(s).rows:
            for est in row.metrics.values():
                assert est.ci_low <= est.value <= est.ci_high

    def test_error_row(self):
        s = spec("dmt", {"Np_tx": 3, "Np_rx": 13, "n_min": 4}, "r", [0, 1])
        t = run_experiment(s)
        assert t.failed and len(t.rows) == 2
        assert t.rows[0].error.startswith("ValueError")

    def test_point_seeds_distinct(self):
        seeds = {point_seed(7, i) for i in range(100)}
        assert len(seeds) == 100
        assert point_seed(7, 3) == point_seed(7, 3)


class TestSchema:
    @pytest.mark.parametrize("cfg,path", [
        ({"kind": "dmt", "sweep": {"name": "r", "values": [1, 1]}}, "sweep.values"),
        ({"kind": "dmt", "sweep": {"name": "r", "values": []}}, "sweep.values"),
        ({"kind": "dmt", "sweep": {"name": "r", "values": [0]}, "trials": 0}, "trials"),
        ({"kind": "dmt", "sweep": {"name": "r", "values": [0]}, "seed": -1}, "seed"),
        ({"kind": "dmt", "sweep": {"name": "bogus", "values": [0]}}, "sweep.name"),
        ({"kind": "dmt", "params": {"Np_tx": "x"}, "sweep": {"name": "r", "values": [0]}},
         "params.Np_tx"),
        ({"kind": "dmt", "params": {"nope": 1}, "sweep": {"name": "r", "values": [0]}},
         "params.nope"),
        ({"kind": "warp", "sweep": {"name": "r", "values": [0]}}, "kind"),
        ({"kind": "dmt", "sweep": {"name": "r", "values": [0]}, "extra": 1}, "extra"),
    ])
    def test_field_paths(self, cfg, path):
        with pytest.raises(ConfigError) as err:
            spec_from_mapping(cfg)
        assert str(err.value).startswith(path)

    def test_kind_mismatch(self):
        with pytest.raises(ConfigError, match="^kind"):
            spec_from_mapping({"kind": "dmt", "sweep": {"name": "r", "values": [0]}}, "gdof")

    def test_decreasing_allowed(self):
        assert spec("dmt", {}, "r", [3, 2, 1]).sweep.values == (3, 2, 1)

    @pytest.mark.parametrize("kind", KINDS)
    def test_bundled_configs_validate(self, kind):
        s = spec_from_mapping(tomllib.loads(bundled_config(kind)), kind)
        assert s.kind == kind and len(s.sweep.values) >= 2

    def test_digest_depends_on_seed(self):
        assert spec("dmt", {}, "r", [0], seed=1).digest() != spec("dmt", {}, "r", [0], seed=2).digest()


class TestCsv:
    def test_byte_identical_runs(self):
        s = spec("outage", {"scheme": "dual", "ports_per_axis": 3}, "snr_db", [10.0, 15.0],
                 trials=400, seed=5)
        assert csv_text(run_experiment(s)) == csv_text(run_experiment(s))

    def test_thread_independent(self, monkeypatch):
        s = spec("fama-outage", {"N": 20, "W": 2.0}, "gamma_th_db", [0.0, 5.0], trials=3000, seed=3)
        monkeypatch.setenv("FAS_KIT_THREADS", "1")
        one = csv_text(run_experiment(s))
        monkeypatch.setenv("FAS_KIT_THREADS", "4")
        assert csv_text(run_experiment(s)) == one

    def test_empty_table(self, tmp_path):
        t = ResultTable(DMT, ("d",), [], "exact")
        emit_csv(t, tmp_path / "e.csv")
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert all(l.startswith("#") for l in lines[:-1])
        assert lines[-1] == ",".join(csv_columns(t))

    def test_round_trip(self, tmp_path):
        vals = [math.pi, 1 / 3, 1e-300, 12345.678901234567, 0.1 + 0.2]
        t = table_with(vals)
        emit_csv(t, tmp_path / "r.csv")
        parsed = read_csv(tmp_path / "r.csv")
        assert parsed.column("value") == vals
        assert parsed.column("ci_low") == [v * 0.9 for v in vals]
        assert parsed.metadata["kind"] == "dmt"
        assert parsed.metadata["spec_sha256"] == DMT.digest()

    def test_constant_columns(self, tmp_path):
        t = run_experiment(spec("dmt", {"Np_tx": 3, "Np_rx": 13, "n_min": 2}, "r", [0, 1, 2]))
        t2 = run_experiment(spec("dmt", {"Np_tx": 3, "Np_rx": 13, "n_min": 4}, "r", [0, 1]))
        for tab in (t, t2, table_with([1.0, 2.0], ("a", "b"))):
            emit_csv(tab, tmp_path / "c.csv")
            parsed = read_csv(tmp_path / "c.csv")
            assert {len(r) for r in parsed.rows} == {len(parsed.columns)}

    def test_wall_time_only_with_timing(self):
        assert "wall_time_s" not in csv_columns(run_experiment(DMT))
        timed = spec("dmt", {}, "r", [0, 1], timing=True)
        assert "wall_time_s" in csv_columns(run_experiment(timed))


class TestPlot:
    def test_one_polyline_per_metric(self):
        svg, rep = plot_svg(table_with([1.0, 2.0], ("a", "b")))
        assert svg.count("<polyline") == 2 and rep.skipped == 0
        svg, _ = plot_svg(table_with([1.0, 2.0]))
        assert svg.count("<polyline") == 1

    def test_log_zero_skipped(self):
        _, rep = plot_svg(table_with([0.0, 1.0, 2.0]), "log-y")
        assert rep.skipped == 1 and len(rep.warnings) == 1

    def test_deterministic(self, tmp_path):
        t = run_experiment(AVG)
        emit_plot(t, tmp_path / "a.svg")
        emit_plot(t, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_rejects_axes(self):
        with pytest.raises(ValueError):
            plot_svg(table_with([1.0]), "polar")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


DMT_TOML = """
kind = "dmt"
seed = 1
[params]
Np_tx = {tx}
Np_rx = 13
n_min = 4
[sweep]
name = "r"
values = [0, 1]
"""


class TestMain:
    def test_ok(self, tmp_path):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        out = tmp_path / "o.csv"
        assert main(["dmt", "--config", cfg, "--out", str(out), "--plot", str(tmp_path / "p.svg")]) == EXIT_OK
        assert read_csv(out).column("value")[0] == 169
        assert (tmp_path / "p.svg").exists()

    def test_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx='"many"'))
        assert main(["dmt", "--config", cfg]) == EXIT_CONFIG
        assert "params.Np_tx" in capsys.readouterr().err

    def test_bad_toml(self, tmp_path):
        assert main(["dmt", "--config", write(tmp_path, "b.toml", "kind = ")]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["dmt", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG

    def test_numerical(self, tmp_path, capsys):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=3))
        assert main(["dmt", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == EXIT_NUMERICAL
        assert "error at r=0" in capsys.readouterr().err
        assert read_csv(tmp_path / "o.csv").rows[0][-1].startswith("error")

    def test_io_error(self, tmp_path):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        assert main(["dmt", "--config", cfg, "--out", str(tmp_path / "no" / "o.csv")]) == EXIT_IO

    def test_flag_overrides(self, tmp_path, capsys):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        assert main(["dmt", "--config", cfg, "--seed", "99"]) == EXIT_OK
        assert "# seed: 99" in capsys.readouterr().out

    def test_threads_flag(self, tmp_path, capsys):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        assert main(["dmt", "--config", cfg, "--threads", "0"]) == EXIT_CONFIG

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "--kind", "gdof"]) == EXIT_OK
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        assert main(["validate", "--config", cfg]) == EXIT_OK
        assert main(["validate", "--config", cfg, "--kind", "cuma"]) == EXIT_CONFIG

    def test_bundled_default(self, capsys):
        assert main(["diversity-table"]) == EXIT_OK
        assert "# kind: diversity-table" in capsys.readouterr().out

    def test_fixtures(self, tmp_path):
        assert main(["fixtures", "--dir", str(tmp_path), "--kinds", "dmt", "avg-variance"]) == EXIT_OK
        assert (tmp_path / "dmt.csv").exists() and (tmp_path / "avg-variance.csv").exists()

    def test_console_script(self, tmp_path):
        cfg = write(tmp_path, "d.toml", DMT_TOML.format(tx=13))
        runs = [subprocess.run([sys.executable, "-m", "faskit.cli", "dmt", "--config", cfg, "--threads", str(n)],
                               capture_output=True, check=True).stdout for n in (1, 3)]
        assert runs[0] == runs[1] and b"169" in runs[0]
