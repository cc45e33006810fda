"""Harness tests: config grammar, metric CSV contract, plots, report, CLI."""

import math

import numpy as np
import pytest

from mbdl.bench import (DEFAULT_BASELINES, METRIC_COLUMNS, ExperimentConfig,
                        GridPoint, MetricRecord, MetricWriter, compare_report,
                        emit_plots, parse_config, read_metrics, run_experiment,
                        ser_record, wilson_interval)
from mbdl.bench.cli import main
from mbdl.errors import UsageError


# -- config grammar ----------------------------------------------------------


MINIMAL = """
[experiment]
kind = detnet
id = tiny          ; trailing comment
seeds = 0, 1
[grid]
snr_db = 8 10      # two points
n_train = 256
"""


def write_config(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_minimal_config(tmp_path):
    cfg = parse_config(write_config(tmp_path, MINIMAL))
    assert cfg.kind == "detnet"
    assert cfg.exp_id == "tiny"
    assert cfg.output == "tiny"
    assert cfg.seeds == (0, 1)
    assert cfg.workers == 1
    assert cfg.grid == {"snr_db": [8, 10], "n_train": [256]}


def test_points_cartesian_product_seeds_innermost(tmp_path):
    cfg = parse_config(write_config(tmp_path, MINIMAL))
    points = cfg.points()
    assert points == [
        GridPoint(8, 256, None, 0), GridPoint(8, 256, None, 1),
        GridPoint(10, 256, None, 0), GridPoint(10, 256, None, 1)]
    assert points[0].token() == "8|256|None|0"


def test_value_tokens_parse_int_float_string(tmp_path):
    cfg = parse_config(write_config(tmp_path, """
[experiment]
kind = deepsic
[grid]
snr_db = 10
n_train = 500
[model]
channel = poisson
spread = 0.25
constellation = -1, 1
"""))
    assert cfg.model["channel"] == "poisson"
    assert cfg.model["spread"] == 0.25
    assert cfg.model["constellation"] == [-1, 1]


def test_unknown_kind_lists_valid_kinds(tmp_path):
    path = write_config(tmp_path, MINIMAL.replace("detnet", "legacy"))
    with pytest.raises(UsageError, match="legacy.*detnet.*kalman"):
        parse_config(path)


def test_missing_grid_section_rejected(tmp_path):
    path = write_config(tmp_path, """
[experiment]
kind = detnet
""")
    with pytest.raises(UsageError, match="grid"):
        parse_config(path)


def test_unknown_grid_axis_rejected():
    with pytest.raises(UsageError, match="snr"):
        ExperimentConfig(kind="detnet", exp_id="x", output="x", seeds=(0,),
                         workers=1, grid={"snr": [10]})


def test_unknown_experiment_key_rejected(tmp_path):
    path = write_config(tmp_path, """
[experiment]
kind = detnet
epochs = 3
[grid]
snr_db = 10
""")
    with pytest.raises(UsageError, match="epochs"):
        parse_config(path)


def test_empty_seed_list_rejected():
    with pytest.raises(UsageError, match="seed"):
        ExperimentConfig(kind="detnet", exp_id="x", output="x", seeds=(),
                         workers=1, grid={"snr_db": [10]})


# -- Wilson interval and records ----------------------------------------------


def wilson_by_root_finding(errors, trials, z):
    """Independent check: the interval ends are the two p solving
    (phat - p)^2 = z^2 p(1-p)/n, found by dense scanning plus bisection."""
    phat = errors / trials

    def g(p):
        return (phat - p) ** 2 - z * z * p * (1.0 - p) / trials

    grid_pts = np.linspace(0.0, 1.0, 20001)
    vals = [g(p) for p in grid_pts]
    roots = []
    if vals[-1] == 0.0:
        roots.append(grid_pts[-1])
    for a, b, ga, gb in zip(grid_pts[:-1], grid_pts[1:], vals[:-1], vals[1:]):
        if ga == 0.0:
            roots.append(a)
        if ga * gb < 0:
            lo, hi = a, b
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if g(lo) * g(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
    return min(roots), max(roots)


@pytest.mark.parametrize("errors,trials", [(0, 50), (1, 50), (13, 100),
                                           (97, 100), (100, 100)])
def test_wilson_matches_root_finding(errors, trials):
    z = 1.959963984540054
    lo, hi = wilson_interval(errors, trials, z)
    ref_lo, ref_hi = wilson_by_root_finding(errors, trials, z)
    assert math.isclose(lo, ref_lo, abs_tol=2e-4)
    assert math.isclose(hi, ref_hi, abs_tol=2e-4)
    assert 0.0 <= lo <= errors / trials <= hi <= 1.0


def test_wilson_rejects_bad_counts():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_record_validates_metric_name_and_ranges():
    with pytest.raises(ValueError, match="unknown metric"):
        MetricRecord("e", "m", None, None, None, 0, "BER", 0.1)
    with pytest.raises(ValueError, match="SER"):
        MetricRecord("e", "m", None, None, None, 0, "SER", 1.5)
    with pytest.raises(ValueError, match="trial"):
        MetricRecord("e", "m", None, None, None, 0, "MSE", 0.5, trials=0)


def test_ser_record_carries_interval():
    point = GridPoint(10.0, 500, None, 3)
    rec = ser_record("exp", "map", point, 25, 1000)
    assert rec.value == 0.025
    assert rec.trials == 1000
    assert rec.wilson_lo < 0.025 < rec.wilson_hi


# -- CSV round trip ------------------------------------------------------------


def sample_records():
    point = GridPoint(10.0, 500, 5, 0)
    return [
        ser_record("exp", "map", point, 10, 2000),
        MetricRecord("exp", "net", 10.0, 500, 5, 0, "MSE", 0.125,
                     trials=20),
        MetricRecord("exp", "net", None, None, None, 0, "params", 250.0),
    ]


def test_csv_round_trip(tmp_path):
    path = tmp_path / "metrics.csv"
    with MetricWriter(path) as writer:
        for rec in sample_records():
            writer.write(rec)
    rows = read_metrics(path)
    assert [r.method for r in rows] == ["map", "net", "net"]
    assert rows[0].value == 0.005
    assert rows[0].wilson_lo is not None
    assert rows[1].snr_db == 10.0 and rows[1].n_train == 500
    assert rows[2].snr_db is None and rows[2].metric == "params"


def test_read_metrics_names_missing_column(tmp_path):
    path = tmp_path / "metrics.csv"
    cols = [c for c in METRIC_COLUMNS if c != "trials"]
    path.write_text(",".join(cols) + "\n")
    with pytest.raises(UsageError, match="trials"):
        read_metrics(path)


def test_read_metrics_rejects_reordered_columns(tmp_path):
    path = tmp_path / "metrics.csv"
    cols = list(METRIC_COLUMNS)
    cols[0], cols[1] = cols[1], cols[0]
    path.write_text(",".join(cols) + "\n")
    with pytest.raises(UsageError, match="order"):
        read_metrics(path)


def test_read_metrics_rejects_missing_file(tmp_path):
    with pytest.raises(UsageError, match="cannot read"):
        read_metrics(tmp_path / "absent.csv")


# -- experiment sweep ----------------------------------------------------------


FAST_DETNET = """
[experiment]
kind = detnet
id = fast
seeds = 0
[grid]
snr_db = 10
n_train = 64
[train]
epochs = 1
batch_size = 32
[eval]
n_symbols = 200
pgd_iters = 5
"""


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(write_config(tmp_path, FAST_DETNET))
    first = run_experiment(cfg, tmp_path / "a")
    second = run_experiment(cfg, tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes().startswith(
        ",".join(METRIC_COLUMNS).encode() + b"\r\n")


def test_unknown_model_key_fails_fast(tmp_path):
    text = FAST_DETNET + "[model]\nbandwidth = 3\n"
    cfg = parse_config(write_config(tmp_path, text))
    with pytest.raises(UsageError, match="bandwidth"):
        run_experiment(cfg, tmp_path / "out")


def test_failure_mid_grid_keeps_finished_rows(tmp_path, monkeypatch):
    import mbdl.bench.experiments as experiments

    real = experiments.RUNNERS["detnet"]
    calls = []

    def flaky(config, point):
        calls.append(point)
        if len(calls) > 1:
            raise RuntimeError("boom")
        return real(config, point)

    monkeypatch.setitem(experiments.RUNNERS, "detnet", flaky)
    text = FAST_DETNET.replace("snr_db = 10", "snr_db = 8 10")
    cfg = parse_config(write_config(tmp_path, text))
    with pytest.raises(RuntimeError):
        run_experiment(cfg, tmp_path / "out")
    rows = read_metrics(tmp_path / "out" / "metrics.csv")
    assert rows and all(r.snr_db == 8.0 for r in rows)


# -- plot script emission --------------------------------------------------------


def test_emit_plots_declares_relative_curves(tmp_path):
    run_dir = tmp_path / "runs" / "exp"
    run_dir.mkdir(parents=True)
    path = run_dir / "metrics.csv"
    with MetricWriter(path) as writer:
        for rec in sample_records():
            writer.write(rec)
    script = emit_plots([path], tmp_path)
    text = script.read_text()
    assert script.name == "plot_metrics.py"
    assert "runs/exp/metrics.csv" in text
    assert str(tmp_path) not in text
    assert text.count("'method': 'map'") == 1
    assert "'metric': 'SER'" in text
    assert "'metric': 'MSE'" in text
    assert "'metric': 'params'" not in text


def test_emit_plots_rejects_empty_input(tmp_path):
    with pytest.raises(UsageError, match="metric"):
        emit_plots([], tmp_path)


# -- comparison report -------------------------------------------------------------


def report_fixture(tmp_path):
    point0 = GridPoint(10.0, 500, 5, 0)
    point1 = GridPoint(10.0, 500, 5, 1)
    path = tmp_path / "metrics.csv"
    with MetricWriter(path) as writer:
        writer.write(ser_record("mimo", "deepsic", point0, 12, 1000))
        writer.write(ser_record("mimo", "sic", point0, 10, 1000))
        writer.write(ser_record("mimo", "map", point0, 8, 1000))
        writer.write(ser_record("mimo", "deepsic", point1, 30, 1000))
        writer.write(ser_record("mimo", "sic", point1, 10, 1000))
        writer.write(ser_record("mimo", "map", point1, 9, 1000))
        writer.write(MetricRecord("mimo", "deepsic", 10.0, 500, 5, 0,
                                  "params", 904.0))
    return path


def test_report_ratios_and_majority(tmp_path):
    path = report_fixture(tmp_path)
    text = compare_report([path])
    assert "deepsic" in text and "ratio" in text
    assert "1.2" in text           # 12/10 at seed 0
    # the 1.5x claim holds at seed 0 (1.2) but not seed 1 (3.0): no
    # majority, so it fails; the 2x sic-vs-map claim holds at both seeds
    assert "1/2 cells" in text and "2/2 cells" in text
    assert text.count("PASS") == 1
    assert "904" in text


def test_report_is_deterministic(tmp_path):
    path = report_fixture(tmp_path)
    assert compare_report([path]) == compare_report([path])


def test_report_names_missing_baseline(tmp_path):
    path = tmp_path / "metrics.csv"
    with MetricWriter(path) as writer:
        writer.write(ser_record("mimo", "deepsic", GridPoint(10.0, 500, 5, 0),
                                12, 1000))
    with pytest.raises(UsageError, match="baseline.*deepsic"):
        compare_report([path])


def test_default_baseline_table_covers_runner_methods():
    for method in ("deepsic", "detnet", "learned-fg", "csgm", "pnp",
                   "hybrid", "blackbox", "dcea"):
        assert method in DEFAULT_BASELINES


# -- CLI ---------------------------------------------------------------------------


def test_cli_run_plots_report_roundtrip(tmp_path, capsys):
    cfg_path = write_config(tmp_path, FAST_DETNET)
    out_root = tmp_path / "results"
    assert main(["run", str(cfg_path), "--out", str(out_root)]) == 0
    assert (out_root / "fast" / "metrics.csv").exists()
    assert (out_root / "fast" / "timings.csv").exists()
    assert main(["plots", str(out_root)]) == 0
    assert (out_root / "plot_metrics.py").exists()
    assert main(["report", str(out_root)]) == 0
    captured = capsys.readouterr()
    assert "relational claims" in captured.out
    assert (out_root / "report.txt").exists()


def test_cli_env_var_sets_output_root(tmp_path, monkeypatch):
    cfg_path = write_config(tmp_path, FAST_DETNET)
    root = tmp_path / "from-env"
    monkeypatch.setenv("MBDL_OUTPUT_ROOT", str(root))
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(cfg_path)]) == 0
    assert (root / "fast" / "metrics.csv").exists()


def test_cli_usage_errors_exit_2(tmp_path, capsys):
    bad = write_config(tmp_path, MINIMAL.replace("detnet", "legacy"))
    assert main(["run", str(bad)]) == 2
    assert main(["report", str(tmp_path / "nowhere")]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_runtime_failure_exits_1(tmp_path, monkeypatch):
    import mbdl.bench.experiments as experiments

    def exploding(config, point):
        raise RuntimeError("boom")

    monkeypatch.setitem(experiments.RUNNERS, "detnet", exploding)
    cfg_path = write_config(tmp_path, FAST_DETNET)
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 1
