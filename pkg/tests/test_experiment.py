import math

import pytest

from blindptycho import _csv
from blindptycho.cli import main
from blindptycho.errors import AliasingError, ConfigError
from blindptycho.experiment import ExperimentConfig, run_sweep, run_wdd_demo, validate_config


def small(tmp_path, **kw):
    base = dict(d=32, delta=4, N=3, trials=2, iters=300, snr_grid=(math.inf, 20.0),
                out_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


def rows(path):
    meta, cols, body = _csv.read_table(path)
    return meta, cols, body


def test_default_config_is_valid():
    cfg = validate_config(ExperimentConfig())
    assert (cfg.d, cfg.delta, cfg.N, cfg.trials, cfg.iters, cfg.kappa) == (64, 6, 4, 100, 1000, 6)


def test_every_problem_is_reported():
    with pytest.raises(ConfigError) as info:
        validate_config(ExperimentConfig(delta=100, snr_grid=(), mode="nope", trials=-1))
    text = " ".join(info.value.problems)
    for needle in ("delta=100", "snr_grid", "mode", "trials"):
        assert needle in text
    assert len(info.value.problems) >= 4
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig(snr_grid=(math.nan,)))
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig(N=20))
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig(mode="subsampled", K=5))
    with pytest.raises(ConfigError):
        validate_config(ExperimentConfig(d="sixty"))


def test_string_values_are_coerced():
    cfg = validate_config(ExperimentConfig(d="32", delta="4", N="2", snr_grid="inf, 10",
                                           wall_time="yes"))
    assert cfg.d == 32 and cfg.snr_grid == (math.inf, 10.0) and cfg.wall_time is True


def test_sweep_outputs(tmp_path):
    out = run_sweep(small(tmp_path))
    meta, cols, body = rows(f"{out}/trials.csv")
    assert meta["schema_version"] == "1"
    assert cols[:4] == ["trial", "seed", "snr_db", "estimator"]
    assert "wall_time_s" not in cols
    assert len(body) == 2 * 2 * 8
    _, scols, summary = rows(f"{out}/summary.csv")
    assert scols == ["snr_db", "estimator", "mean_error", "median_error", "count"]
    table = {(r[0], r[1]): float(r[2]) for r in summary}
    for snr in ("20", "inf"):
        for t in ("x", "m"):
            assert table[(snr, f"min-{t}")] <= table[(snr, f"argmin-{t}")] <= table[(snr, f"max-{t}")]
    assert table[("inf", "argmin-x")] <= 0.05
    _, hcols, hist = rows(f"{out}/histogram.csv")
    assert hcols == ["snr_db", "index", "shift", "count_x", "count_m"]
    assert sum(int(r[3]) for r in hist if r[0] == "inf") == 2


def test_sweep_is_deterministic_and_parallel_safe(tmp_path):
    a = run_sweep(small(tmp_path, out_dir=str(tmp_path / "a")))
    b = run_sweep(small(tmp_path, out_dir=str(tmp_path / "b"), workers=2))
    for name in ("trials.csv", "summary.csv", "histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_zero_trials_writes_header_only(tmp_path):
    out = run_sweep(small(tmp_path, trials=0))
    _, cols, body = rows(f"{out}/trials.csv")
    assert cols and body == []


def test_zero_shift_mode(tmp_path):
    out = run_sweep(small(tmp_path, mode="blind-zero-shift", snr_grid=(math.inf,)))
    _, _, body = rows(f"{out}/trials.csv")
    assert {r[3] for r in body} == {"noshift-x", "noshift-m"}


def test_wall_time_column(tmp_path):
    out = run_sweep(small(tmp_path, trials=1, snr_grid=(math.inf,), wall_time=True))
    _, cols, body = rows(f"{out}/trials.csv")
    assert cols[-1] == "wall_time_s" and float(body[0][-1]) > 0


def test_wdd_demo(tmp_path):
    out = run_wdd_demo(ExperimentConfig(mode="wdd-known-mask", trials=2, snr_grid=(math.inf, 30.0),
                                        out_dir=str(tmp_path / "w")))
    _, cols, body = rows(f"{out}/wdd.csv")
    assert cols == ["trial", "seed", "snr_db", "K", "L", "error", "status"]
    assert all(float(r[5]) <= 1e-6 for r in body if r[2] == "inf")
    out = run_wdd_demo(ExperimentConfig(mode="subsampled", trials=2, snr_grid=(math.inf,),
                                        out_dir=str(tmp_path / "s")))
    _, _, body = rows(f"{out}/wdd.csv")
    assert all(r[3] == "32" and float(r[5]) <= 1e-4 for r in body)
    with pytest.raises(ConfigError):
        run_wdd_demo(ExperimentConfig(mode="subsampled", K=7, out_dir=str(tmp_path)))
    with pytest.raises(AliasingError):
        run_wdd_demo(ExperimentConfig(mode="subsampled", L=32, out_dir=str(tmp_path)))
    with pytest.raises(ConfigError):
        run_wdd_demo(ExperimentConfig(mode="blind-multi-shift", out_dir=str(tmp_path)))


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        run_sweep(small(tmp_path, out_dir=str(blocker / "sub")))


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# small run\nd=32\ndelta = 4\nN=2\ntrials=1\niters=200\nsnr_grid=inf\n")
    out = tmp_path / "cli"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(out), "--trials", "2"]) == 0
    _, _, body = rows(out / "trials.csv")
    assert {r[0] for r in body} == {"0", "1"}  # flag overrode the file
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "d=32" in capsys.readouterr().out
    assert main(["validate", "--delta", "100", "--snr-grid", ""]) == 2
    err = capsys.readouterr().err
    assert "delta=100" in err and "snr_grid" in err
    assert main(["wdd", "--L", "32", "--out-dir", str(tmp_path / "w")]) == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("colour=blue\n")
    assert main(["validate", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--mode", "bogus"])
    assert info.value.code == 2
