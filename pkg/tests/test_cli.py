import dataclasses
import math
import os

import numpy as np
import pytest

from gsmgp.cli import main
from gsmgp.cli.config import ConfigError, ExperimentConfig, load_config, parse_config
from gsmgp.cli.experiment import (
    approx_bench, rank_report, run_experiment, synth_series,
)
from gsmgp.cli.io import DataError, load_model, load_series, save_model, write_series
from gsmgp.kernels import GridSpec, GsmModel, SubKernelGrid, generate_grids, gsm_kernel_value
from gsmgp.optim.problem import SolverReport

FAST = "m = 40\nmc_runs = 2\nmax_iters = 10\nsynth_n = 40\nsynth_n_star = 5\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- config ----------------------------------------------------------------

def test_parse_config_values():
    cfg = parse_config("m = 20  # grids\nsolver = admm\nsynth_freqs = 0.1, 0.2\nnoise_var = auto\nplot = no\n")
    assert cfg.m == 20 and cfg.solver == "admm"
    assert cfg.synth_freqs == (0.1, 0.2)
    assert cfg.noise_var is None and cfg.plot is False


@pytest.mark.parametrize("text", [
    "bogus = 1\n", "[section]\nm = 3\n", "m = many\n", "solver = sgd\n", "mu_low = 0.4\nmu_high = 0.1\n",
    "synth_freqs = 0.1\n", "admm_rho = 10\nadmm_rho_prime = 20\n", "mc_runs = 0\n",
])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_overrides(tmp_path):
    cfg = load_config(write(tmp_path / "c.cfg", "base_seed = 3\n"), {"base_seed": 9})
    assert cfg.base_seed == 9
    assert load_config(None).base_seed == 0
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


# -- series and model files --------------------------------------------------

def test_load_series_split(tmp_path):
    rows = "\n".join(f"{1990 + i},{math.sin(i)}" for i in range(106))
    s = load_series(write(tmp_path / "e.csv", "t,y\n" + rows + "\n"), 86, 20)
    assert (s.n, s.n_star) == (86, 20)
    assert s.times.tolist() == list(range(1, 107))
    assert s.values[-1] == math.sin(105)
    short = load_series(str(tmp_path / "e.csv"), 30, 10)
    assert short.values[0] == math.sin(66)


@pytest.mark.parametrize("body,where", [
    ("", "empty"),
    ("t,y\n", "no data"),
    ("t,z\n1,2\n", ":1:"),
    ("t,y\n1,2\n3,4\n2,5\n", ":4:"),
    ("t,y\n1,2\n1,3\n", ":3:"),
    ("t,y\n1,2\n2,abc\n", ":3:"),
    ("t,y\n1,2,3\n", ":2:"),
])
def test_load_series_errors(tmp_path, body, where):
    with pytest.raises(DataError, match=where):
        load_series(write(tmp_path / "bad.csv", body), None, 1)


def test_series_roundtrip(tmp_path):
    s = synth_series((0.1,), (1.0,), 0.01, 0.1, 30, 5, 4)
    write_series(tmp_path / "s.csv", s)
    back = load_series(str(tmp_path / "s.csv"), 30, 5)
    assert np.array_equal(back.values, s.values)


def test_model_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    grids = generate_grids(GridSpec(strategy="random", dimensionality="two_d", m=500, seed=1))
    model = GsmModel(grids, rng.exponential(size=500) * (rng.random(500) < 0.1), float(rng.random()))
    path = tmp_path / "m.txt"
    save_model(path, model)
    assert len(path.read_text().splitlines()) == 501
    back = load_model(path)
    assert back.grids == model.grids
    assert np.array_equal(back.alpha, model.alpha) and back.noise_var == model.noise_var


@pytest.mark.parametrize("body", [
    "0.1 0.0 -1.0\nnoise_var 0.1\n", "0.1 0.0\nnoise_var 0.1\n", "0.1 0.0 1.0\n",
    "0.1 0.0 x\nnoise_var 0.1\n", "0.7 0.0 1.0\nnoise_var 0.1\n", "noise_var 0.1\n0.1 0 1\n",
])
def test_load_model_rejects(tmp_path, body):
    with pytest.raises(DataError):
        load_model(write(tmp_path / "m.txt", body))


# -- synthetic data ------------------------------------------------------------

def test_synth_examples():
    z = synth_series((0.1, 0.3), (0.0, 0.0), 0.0, 0.0, 20, 5, 0)
    assert np.all(z.values == 0)
    a = synth_series((0.1, 0.3), (1.0, 1.0), 0.0, 0.1, 20, 5, 3)
    b = synth_series((0.1, 0.3), (1.0, 1.0), 0.0, 0.1, 20, 5, 3)
    assert np.array_equal(a.values, b.values)


def test_synth_autocovariance():
    freqs, weights, sigma = (0.1, 0.3), (1.0, 0.5), 0.01
    model = GsmModel([SubKernelGrid(f, sigma) for f in freqs], weights, 0.1)
    products = []
    for seed in range(200):
        v = synth_series(freqs, weights, sigma, 0.1, 30, 1, seed).values
        products.append(np.mean(v[:-1] * v[1:]))
    products = np.array(products)
    se = products.std(ddof=1) / np.sqrt(products.size)
    assert abs(products.mean() - gsm_kernel_value(1, model)) <= 3 * se


# -- harness ----------------------------------------------------------------------

def test_zero_series_gives_zero_error():
    cfg = parse_config(FAST + "synth_weights = 0, 0\nsynth_noise_var = 0\n")
    rep = run_experiment(cfg)
    assert rep.pfr == 0.0 and rep.mean_mse == 0.0


def test_failing_solver_counts():
    def broken(cfg, y, factors, model0):
        rep = SolverReport(termination="numerical_failure")
        rep.objective_trace.append(float("nan"))
        return model0, rep

    rep = run_experiment(parse_config(FAST), solver=broken)
    assert rep.pfr == 1.0 and rep.all_failed and math.isnan(rep.mean_mse)

    def crash(cfg, y, factors, model0):
        raise RuntimeError("boom")

    rep = run_experiment(parse_config(FAST), solver=crash)
    assert rep.pfr == 1.0 and rep.runs[0].error == "boom"


def test_failed_runs_excluded_from_mean():
    cfg = dataclasses.replace(parse_config(FAST), mc_runs=3)
    calls = []

    def flaky(cfg, y, factors, model0):
        from gsmgp.cli.experiment import solve
        calls.append(1)
        model, rep = solve(cfg, y, factors, model0)
        if len(calls) == 2:
            rep.termination = "numerical_failure"
        return model, rep

    rep = run_experiment(cfg, solver=flaky)
    ok = [r.mse for r in rep.runs if not r.failed]
    assert len(ok) == 2 and rep.mean_mse == pytest.approx(np.mean(ok))


def test_run_seeds_are_xor():
    cfg = dataclasses.replace(parse_config(FAST + "base_seed = 6\n"), mc_runs=3)
    assert [r.seed for r in run_experiment(cfg).runs] == [6, 7, 4]


def test_parallel_matches_serial():
    cfg = dataclasses.replace(parse_config(FAST + "grid_strategy = random\n"), mc_runs=3)
    serial = run_experiment(cfg)
    pooled = run_experiment(dataclasses.replace(cfg, workers=2))
    assert [r.mse for r in serial.runs] == [r.mse for r in pooled.runs]


def test_two_frequency_pfr():
    cfg = parse_config("mc_runs = 10\n")
    rep = run_experiment(cfg)
    assert rep.pfr <= 0.2


# -- ranks and approximation ------------------------------------------------------------

def test_rank_relation():
    grids = generate_grids(GridSpec(m=500))
    for n in (86, 148, 450, 680):
        hi, lo, mean = rank_report(n, grids)
        assert math.sqrt(n) <= hi <= 1.7 * math.sqrt(n)
        assert abs(hi - 2 * lo) <= 2
        assert lo <= mean <= hi


def test_rank_report_cosine():
    grids = generate_grids(GridSpec(m=50, fixed_sigma=0.0))
    hi, lo, _ = rank_report(40, grids, rel_tol=1e-10)
    assert {hi, lo} <= {1, 2}
    with pytest.raises(ValueError):
        rank_report(10, [])


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config("m = 3\nm = 4\n")


def test_approx_bench():
    n = 30
    rows = approx_bench(n, SubKernelGrid(0.2, 0.05), nystrom_budgets=(5, n), rff_budgets=(50, 400), seeds=5)
    assert [r[:2] for r in rows] == [("nystrom", 5), ("nystrom", n), ("rff", 50), ("rff", 400)]
    full = rows[1]
    assert full[3] <= 1e-8 and full[2] <= n * n
    assert rows[3][3] <= rows[2][3]
    assert rows[2][2] == n * 100
    with pytest.raises(ValueError):
        approx_bench(n, SubKernelGrid(0.2, 0.05), nystrom_budgets=(n + 1,))
    with pytest.raises(ValueError):
        approx_bench(n, SubKernelGrid(0.2, 0.05))


# -- command line ---------------------------------------------------------------------------

def run_cli(tmp_path, *args, cfg_text=FAST, name="out"):
    cfg = write(tmp_path / "exp.cfg", cfg_text)
    out = tmp_path / name
    code = main(["--config", cfg, "--out", str(out), *args])
    return code, out


def test_fit_outputs(tmp_path, capsys):
    code, out = run_cli(tmp_path, "fit")
    assert code == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == "run,seed,mse,nll,iters,nnz,failed,wall_ms"
    assert len(lines) == 4 and lines[-1].startswith("# runs=2 failed=")
    assert lines[1].endswith(",")
    assert (out / "timing.csv").exists()
    assert sorted(os.listdir(out / "models")) == ["run_000.txt", "run_001.txt"]
    assert (out / "predictions.csv").exists()
    assert "pfr=" in capsys.readouterr().out


def test_fit_deterministic_and_plot_independent(tmp_path):
    _, a = run_cli(tmp_path, "fit", name="a")
    _, b = run_cli(tmp_path, "fit", name="b")
    _, c = run_cli(tmp_path, "fit", cfg_text=FAST + "plot = false\n", name="c")
    ra = (a / "results.csv").read_bytes()
    assert ra == (b / "results.csv").read_bytes() == (c / "results.csv").read_bytes()
    assert not (c / "plot.svg").exists()


def test_fit_wall_time_column(tmp_path):
    _, out = run_cli(tmp_path, "fit", cfg_text=FAST + "record_wall_time = true\n")
    row = (out / "results.csv").read_text().splitlines()[1]
    assert row.rsplit(",", 1)[1].isdigit()


def test_predict_roundtrip(tmp_path, capsys):
    _, out = run_cli(tmp_path, "fit")
    capsys.readouterr()
    code, pout = run_cli(tmp_path, "predict", "--model", str(out / "models" / "run_000.txt"), name="p")
    assert code == 0
    assert capsys.readouterr().out.startswith("mse=")
    first = (out / "results.csv").read_text().splitlines()[1].split(",")
    if first[6] == "0":
        assert (pout / "predictions.csv").read_text() == (out / "predictions.csv").read_text()


def test_seed_flag(tmp_path):
    _, a = run_cli(tmp_path, "--seed", "5", "fit", name="a")
    assert (a / "results.csv").read_text().splitlines()[1].split(",")[1] == "5"


def test_other_commands(tmp_path):
    code, out = run_cli(tmp_path, "ranks", "--n", "86", cfg_text="")
    assert code == 0
    assert (out / "ranks.csv").read_text().splitlines()[1].startswith("86,14,7,")
    code, out = run_cli(tmp_path, "approx", cfg_text="approx_n = 40\nnystrom_budgets = 5 40\n"
                        "rff_budgets = 10 20\napprox_seeds = 2\n")
    assert code == 0
    assert (out / "approx.csv").read_text().splitlines()[0] == "method,param,storage,rae"
    code, out = run_cli(tmp_path, "synth", cfg_text="synth_n = 10\nsynth_n_star = 3\n")
    assert code == 0
    assert len((out / "series.csv").read_text().splitlines()) == 14
    code, out = run_cli(tmp_path, "bench", cfg_text="m = 10\nsynth_n = 20\nsynth_n_star = 3\nmax_iters = 5\n")
    assert code == 0
    rows = (out / "bench.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["mm", "admm", "gradproj"]


def test_exit_codes(tmp_path, capsys):
    assert run_cli(tmp_path, "fit", cfg_text="nonsense = 1\n")[0] == 1
    assert run_cli(tmp_path, "fit", cfg_text=f"data = {tmp_path / 'nope.csv'}\n")[0] == 2
    bad = write(tmp_path / "bad.csv", "t,y\n2,1\n1,2\n")
    assert run_cli(tmp_path, "fit", cfg_text=f"data = {bad}\n")[0] == 2
    assert run_cli(tmp_path, "fit", cfg_text=FAST + "fail_threshold_factor = 1e-300\n")[0] == 3
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_fit_on_csv(tmp_path):
    s = synth_series((0.1, 0.3), (1.0, 1.0), 0.0, 0.1, 40, 5, 1)
    write_series(tmp_path / "d.csv", s)
    code, out = run_cli(tmp_path, "fit", cfg_text=FAST + f"data = {tmp_path / 'd.csv'}\ntest_len = 5\n")
    assert code == 0
