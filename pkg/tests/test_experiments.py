import csv
import json
import math
import os

import pytest

from zsight.errors import ConfigError
from zsight.experiments import (
    Runner,
    c_sweep,
    galaxy_study,
    nested_study,
    replicate_configs,
    replicate_study,
    run_experiment,
    sample_size_study,
)
from zsight.experiments.cli import main
from zsight.pydantics.Experiment import ExperimentConfig
from zsight.pydantics.Report import EstimateReport

BANANA_LOG_Z = -4.1543
CHIB_LOG_Z = -226.791


@pytest.fixture
def banana_config(tmp_path):
    return ExperimentConfig.load(
        None,
        [
            "bridge.m=3",
            "bridge.c=4.0",
            "sampler.per_rung=100",
            "sampler.burn_in=100",
            "estimator.method=tivis",
            f"out={tmp_path}",
        ],
    )


@pytest.fixture
def mixture_config(tmp_path):
    return ExperimentConfig.load(
        None,
        [
            "model.kind=mixture",
            "model.k=2",
            "bridge.kind=partial_data",
            "bridge.m=4",
            "bridge.c=1.0",
            "bridge.r_min=2",
            "sampler.per_rung=40",
            "sampler.gibbs_burn_in=20",
            f"out={tmp_path}",
        ],
    )


def test_config_defaults():
    config = ExperimentConfig()

    assert config.bridge.m == 5
    assert config.estimator.method == "recursive"
    assert config.config_hash() == ExperimentConfig().config_hash()
    assert config.updated(seed=3).config_hash() != config.config_hash()


def test_config_updated():
    config = ExperimentConfig().updated(**{"bridge.c": 2.0, "nested.n_live": 50})

    assert config.bridge.c == 2.0
    assert config.nested.n_live == 50
    assert config.nested.steps_for(50) == 500

    with pytest.raises(ConfigError):
        ExperimentConfig().updated(**{"bridge.m": 1})


def test_config_load(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text("bridge:\n  m: 7\n  c: 3.0\nsampler:\n  per_rung: 20\n")

    config = ExperimentConfig.load(str(path), ["bridge.c=0.5", "seed=4"])

    assert config.bridge.m == 7
    assert config.bridge.c == 0.5
    assert config.sampler.per_rung == 20
    assert config.seed == 4


@pytest.mark.parametrize(
    "overrides",
    [["model.colour=red"], ["bridge.m=1"], ["sampler.steps=10"], ["estimator.quad_points=200"], ["bridge.m"]],
)
def test_config_errors(overrides):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(None, overrides)


def test_config_bad_path(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(tmp_path / "missing.yaml"))

    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")

    with pytest.raises(ConfigError):
        ExperimentConfig.load(str(path))


def test_report(tmp_path):
    report = EstimateReport(method="recursive", log_z=-4.2, se_hessian=0.1, se_bootstrap=math.nan)

    assert report.se_bootstrap is None
    assert report.se == 0.1
    assert report.model_copy(update=dict(se_replicate=0.3)).se == 0.3
    assert str(report) == "recursive: log_z=-4.200000 se=0.1"

    path = report.write(str(tmp_path / "nested" / "report.json"))

    assert EstimateReport.read(path) == report


def test_runner_tivis(banana_config: ExperimentConfig):
    runner = Runner(banana_config)
    reports = runner.run_all()

    assert set(reports) == {"recursive", "tivis"}

    recursive, tivis = reports["recursive"], reports["tivis"]

    assert recursive.log_z == pytest.approx(BANANA_LOG_Z, abs=1.0)
    assert tivis.log_z == pytest.approx(recursive.log_z, abs=0.05)
    assert recursive.log_z_rungs[0] == 0.0
    assert recursive.se_hessian > 0
    assert recursive.diagnostics["counts"] == [100, 100, 100]
    assert recursive.config_hash == banana_config.config_hash()

    files = set(os.listdir(runner.directory))

    assert {"report-recursive.json", "report-tivis.json", "trace.csv", "pool.pt"} <= files

    with open(os.path.join(runner.directory, "trace.csv")) as file:
        assert len(list(csv.reader(file))) == 301


def test_runner_determinism(banana_config: ExperimentConfig):
    first = Runner(banana_config).run()
    second = Runner(banana_config).run()
    other = Runner(banana_config.updated(seed=1)).run()

    assert first.log_z == second.log_z
    assert first.log_z != other.log_z


def test_report_reruns(banana_config: ExperimentConfig):
    runner = Runner(banana_config)
    report = runner.run()

    stored = EstimateReport.read(os.path.join(runner.directory, "report-tivis.json"))

    again = run_experiment(ExperimentConfig.validate_dict(stored.config))

    assert again.log_z == stored.log_z == report.log_z


def test_runner_reweight_pool(banana_config: ExperimentConfig):
    config = banana_config.updated(**{"estimator.method": "recursive"})

    runner = Runner(config)
    report = runner.run()

    result = Runner(config).reweight(os.path.join(runner.directory, "pool.pt"))

    assert result.log_z == pytest.approx(report.log_z, abs=1e-8)
    assert result.se is None

    with pytest.raises(ConfigError):
        Runner(config).reweight()

    with pytest.raises(ConfigError):
        Runner(config).reweight(os.path.join(runner.directory, "missing.pt"))

    with pytest.raises(ConfigError):
        Runner(config.updated(**{"reweight.preset": "chib"})).reweight(os.path.join(runner.directory, "pool.pt"))


def test_runner_nested(banana_config: ExperimentConfig):
    config = banana_config.updated(**{"estimator.method": "ins", "nested.n_live": 20, "nested.steps": 60})

    runner = Runner(config)
    reports = runner.run_all()

    assert set(reports) == {"nested", "ins", "shell_recursive"}
    assert reports["ins"].diagnostics["n_live"] == 20
    assert reports["nested"].diagnostics["steps"] == 60
    assert all(math.isfinite(report.log_z) for report in reports.values())
    assert "nested.csv" in os.listdir(runner.directory)


def test_runner_baselines(banana_config: ExperimentConfig):
    ame = Runner(banana_config.updated(**{"estimator.method": "ame", "sampler.per_rung": 2000})).run()

    assert ame.method == "ame"
    assert ame.log_z == pytest.approx(BANANA_LOG_Z, abs=0.5)

    hme = Runner(banana_config.updated(**{"estimator.method": "hme", "sampler.burn_in": 200})).run()

    assert hme.method == "hme"
    assert math.isfinite(hme.log_z)


def test_runner_mixture(mixture_config: ExperimentConfig):
    runner = Runner(mixture_config)
    report = runner.run()

    assert report.diagnostics["bridge"]["kind"] == "partial_data"
    assert report.diagnostics["counts"] == [40, 40, 40, 40]
    assert math.isfinite(report.log_z)

    same = runner.reweight()

    assert same.log_z == pytest.approx(report.log_z, abs=1e-8)

    alternative = Runner(mixture_config.updated(**{"reweight.preset": "data_driven"})).reweight(
        os.path.join(runner.directory, "pool.pt")
    )

    assert math.isfinite(alternative.log_z)
    assert 1.0 <= alternative.ess <= 160


def test_runner_config_errors(banana_config: ExperimentConfig, mixture_config: ExperimentConfig):
    with pytest.raises(ConfigError):
        Runner(banana_config.updated(**{"bridge.kind": "nested_shells"})).run()

    with pytest.raises(ConfigError):
        Runner(banana_config.updated(**{"bridge.kind": "partial_data"})).run()

    with pytest.raises(ConfigError):
        Runner(mixture_config.updated(**{"model.k": None})).run()


def test_replicate_configs():
    configs = replicate_configs(ExperimentConfig(), 3, 7)

    assert len({config.seed for config in configs}) == 3
    assert [config.seed for config in configs] == [config.seed for config in replicate_configs(ExperimentConfig(), 3, 7)]


def test_replicate_study(banana_config: ExperimentConfig):
    config = banana_config.updated(**{"estimator.method": "recursive", "sampler.per_rung": 50})

    first = replicate_study(config, R=2, base_seed=5)
    second = replicate_study(config, R=2, base_seed=5)

    assert [row.method for row in first.rows] == ["recursive"]
    assert first.rows[0].replicates == 2
    assert first.rows[0].mean_log_z == second.rows[0].mean_log_z
    assert first.rows[0].se_replicate > 0
    assert first.base_seed == 5

    with pytest.raises(ConfigError):
        replicate_study(config, R=1)


def test_sample_size_study(banana_config: ExperimentConfig, tmp_path):
    config = banana_config.updated(
        **{"estimator.method": "recursive", "study.n_tot_grid": [60, 120], "replicates": 2}
    )

    summary = sample_size_study(config)

    assert [row.setting for row in summary.rows] == [{"n_tot": 60}, {"n_tot": 120}]
    assert summary.truth == BANANA_LOG_Z

    with open(tmp_path / "sample-size.json") as file:
        assert len(json.load(file)["rows"]) == 2

    with open(tmp_path / "sample-size.csv") as file:
        rows = list(csv.reader(file))

    assert rows[0][:2] == ["n_tot", "method"]
    assert len(rows) == 3


def test_c_sweep(banana_config: ExperimentConfig, tmp_path):
    config = banana_config.updated(
        **{"estimator.method": "recursive", "sampler.per_rung": 50, "study.c_grid": [1.0, 2.0], "replicates": 2}
    )

    summary = c_sweep(config)

    assert [row.setting for row in summary.rows] == [{"c": 1.0}, {"c": 2.0}]
    assert all(row.method == "recursive" and row.replicates == 2 for row in summary.rows)
    assert all(math.isfinite(row.mean_log_z) for row in summary.rows)
    assert summary.truth is None

    with open(tmp_path / "c-sweep.csv") as file:
        rows = list(csv.reader(file))

    assert rows[0][:2] == ["c", "method"]
    assert len(rows) == 3


def test_nested_study(banana_config: ExperimentConfig, tmp_path):
    config = banana_config.updated(**{"nested.n_live_grid": [10, 20], "replicates": 2})

    summary = nested_study(config)

    assert [(row.setting["n_live"], row.method) for row in summary.rows] == [
        (n_live, method) for n_live in (10, 20) for method in ("ins", "nested", "shell_recursive")
    ]
    assert all(row.replicates == 2 and row.failures == 0 for row in summary.rows)
    assert summary.truth == BANANA_LOG_Z

    with open(tmp_path / "nested.json") as file:
        assert len(json.load(file)["rows"]) == 6


def test_cli_config_error(capsys):
    assert main(["estimate", "--set", "bridge.m=1"]) == 2

    assert "error=ConfigError" in capsys.readouterr().err


def test_cli_oracle(capsys):
    assert main(["oracle"]) == 0

    output = json.loads(capsys.readouterr().out)

    assert output["model"] == "banana"
    assert output["log_z"] == pytest.approx(BANANA_LOG_Z, abs=1e-3)


def test_cli_estimate(tmp_path, capsys):
    code = main(
        [
            "estimate",
            "--out",
            str(tmp_path),
            "--seed",
            "3",
            "--set",
            "bridge.m=3",
            "--set",
            "sampler.per_rung=50",
            "--set",
            "sampler.burn_in=50",
        ]
    )

    assert code == 0
    assert "recursive: log_z=" in capsys.readouterr().out


@pytest.mark.slow
def test_galaxy_study(tmp_path):
    config = ExperimentConfig.load(None, ["model.kind=mixture", "model.k_range=[2, 3]", f"out={tmp_path}"])

    posterior = galaxy_study(config)

    assert [row.k for row in posterior.rows] == [2, 3]
    assert sum(row.posterior for row in posterior.rows) == pytest.approx(1.0)
    assert set(posterior.alternatives) == {"data_driven", "richardson_green"}
    assert os.path.exists(tmp_path / "galaxy.json")
    assert os.path.exists(tmp_path / "galaxy.csv")

    uniform = galaxy_study(config.updated(**{"reweight.prior_k": "uniform"}))

    assert uniform.prior == "uniform"
    assert [row.log_z for row in uniform.rows] == [row.log_z for row in posterior.rows]


@pytest.mark.slow
def test_banana_replicates(banana_config: ExperimentConfig, replicates: int):
    config = banana_config.updated(
        **{"estimator.method": "recursive", "bridge.m": 5, "bridge.c": 5.0, "sampler.per_rung": 250, "sampler.burn_in": 1000}
    )

    summary = replicate_study(config, R=replicates)

    assert summary.rows[0].mean_log_z == pytest.approx(BANANA_LOG_Z, abs=0.1)


@pytest.fixture
def chib_config(tmp_path):
    return ExperimentConfig.load(
        None,
        [
            "model.kind=mixture",
            "model.k=3",
            "model.variant=chib78",
            "model.preset=chib",
            "bridge.kind=partial_data",
            "bridge.m=10",
            "bridge.c=2.0",
            "bridge.r_min=3",
            "sampler.per_rung=200",
            f"out={tmp_path}",
        ],
    )


@pytest.mark.slow
def test_chib_benchmark(chib_config: ExperimentConfig, replicates: int):
    row = replicate_study(chib_config, R=replicates).rows[0]

    assert row.mean_log_z == pytest.approx(CHIB_LOG_Z, abs=3 * math.sqrt(0.089**2 + row.se_replicate**2))
    assert 0.075 <= row.se_replicate <= 0.225


@pytest.mark.slow
def test_chib_c_sweep(chib_config: ExperimentConfig, replicates: int):
    summary = c_sweep(chib_config.updated(**{"study.c_grid": [0.5, 1.0, 2.0, 4.0], "replicates": replicates}))

    best = min(summary.rows, key=lambda row: row.se_replicate)

    assert best.setting == {"c": 2.0}
