import json

import numpy as np
import pytest

from seerzsl.cli import main as cli_main
from seerzsl.data import load_dataset
from seerzsl.evaluation import MetricsReport, ablate_run
from seerzsl.pipeline import ConfigError, PipelineError, RunConfig, train_full


class TestRunConfig:
    def test_zero_outer_iterations_rejected(self, quick_config):
        with pytest.raises(ConfigError):
            quick_config.replace(outer_iterations=0).validate()

    def test_negative_weights_rejected(self, quick_config):
        for field in ("beta_vae", "beta_cvae", "lambda_guidance", "penalty_alpha"):
            with pytest.raises(ConfigError):
                quick_config.replace(**{field: -0.5}).validate()

    def test_small_z_dim_rejected(self, quick_config):
        with pytest.raises(ConfigError):
            quick_config.replace(z_dim=1).validate()

    def test_needs_exactly_one_source(self, quick_config):
        with pytest.raises(ConfigError):
            quick_config.replace(data_dir="somewhere").validate()
        with pytest.raises(ConfigError):
            quick_config.replace(synthetic=None).validate()

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown config fields"):
            RunConfig.from_dict({"synthetic": {"classes": 4}, "bogus": 1})

    def test_json_round_trip(self, quick_config, tmp_path):
        quick_config.save(tmp_path / "run.json")
        back = RunConfig.from_json(tmp_path / "run.json")
        assert back == quick_config


class TestTrainFull:
    def test_run_directory_contents(self, quick_config, tmp_path):
        out = tmp_path / "run"
        bundle, report = train_full(quick_config, out_dir=out)
        for name in ("config.json", "metrics.json", "anchors.csv", "split.json",
                     "model.bin", "model.manifest", "model.json"):
            assert (out / name).exists(), name
        assert not (out / "FAILED").exists()
        loaded = MetricsReport.load(out / "metrics.json")
        assert loaded.harmonic == pytest.approx(report.harmonic)

    def test_stage_order(self, quick_config, tmp_path):
        _, report = train_full(quick_config, out_dir=tmp_path / "run")
        stages = [s for s in report.stage_order if s != "guidance"]
        assert stages == ["vae", "wgan", "cvae"] * quick_config.outer_iterations
        assert report.stage_order.index("guidance") == 1  # after the first VAE pass

    def test_reproducible_metrics_and_archives(self, quick_config, tmp_path):
        _, first = train_full(quick_config, out_dir=tmp_path / "a")
        _, second = train_full(quick_config, out_dir=tmp_path / "b")
        a = json.loads((tmp_path / "a" / "metrics.json").read_text())
        b = json.loads((tmp_path / "b" / "metrics.json").read_text())
        a.pop("wall_clock_s"), b.pop("wall_clock_s")
        assert a == b
        assert (tmp_path / "a" / "model.bin").read_bytes() == (tmp_path / "b" / "model.bin").read_bytes()

    def test_divergence_leaves_failure_marker(self, quick_config, tmp_path):
        bad = quick_config.replace(learning_rate=1e9, vae_epochs=40,
                                   outer_iterations=1)
        out = tmp_path / "boom"
        with pytest.raises(PipelineError):
            train_full(bad, out_dir=out)
        assert (out / "FAILED").exists()
        assert not (out / "metrics.json").exists()

    def test_export_embeddings(self, quick_config, tmp_path):
        config = quick_config.replace(export_embeddings=True)
        out = tmp_path / "run"
        train_full(config, out_dir=out)
        lines = (out / "embeddings.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["sample_id", "split", "class"]
        assert len(lines) == 1 + 6 * 12  # every sample exported

    def test_conventional_at_least_unseen(self, quick_config):
        _, report = train_full(quick_config)
        assert report.conventional_unseen >= report.unseen_accuracy - 1e-9


class TestAblate:
    def test_unknown_stage_rejected(self, quick_config):
        with pytest.raises(ValueError):
            ablate_run(quick_config, "classifier", seed=0)

    def test_drop_none_matches_train_full(self, quick_config):
        _, base = train_full(quick_config)
        ablated = ablate_run(quick_config, "none", seed=quick_config.seed)
        assert ablated.seen_accuracy == base.seen_accuracy
        assert ablated.unseen_accuracy == base.unseen_accuracy
        assert ablated.loss_curves == base.loss_curves

    def test_drop_cvae_skips_stage(self, quick_config):
        report = ablate_run(quick_config, "cvae", seed=quick_config.seed)
        assert "cvae" not in {k.split("_")[0] for k in report.loss_curves}
        assert report.config["ablate"] == "cvae"


class TestCli:
    def test_gen_data_creates_loadable_dataset(self, tmp_path, capsys):
        out = tmp_path / "data"
        code = cli_main(["gen-data", "--classes", "6", "--per-class", "5",
                         "--sem-dim", "3", "--visual-dim", "4", "--out", str(out),
                         "--unseen-fraction", "0.34"])
        assert code == 0
        ds = load_dataset(out)
        assert ds.n_classes == 6
        assert (out / "split.json").exists()

    def test_train_writes_metrics(self, quick_config, tmp_path):
        config_path = tmp_path / "run.json"
        quick_config.save(config_path)
        out = tmp_path / "run"
        code = cli_main(["train", "--config", str(config_path), "--out", str(out)])
        assert code == 0
        assert (out / "metrics.json").exists()

    def test_eval_recomputes(self, quick_config, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        quick_config.save(config_path)
        out = tmp_path / "run"
        assert cli_main(["train", "--config", str(config_path), "--out", str(out)]) == 0
        capsys.readouterr()
        code = cli_main(["eval", "--run", str(out)])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        recorded = MetricsReport.load(out / "metrics.json")
        assert printed["harmonic"] == pytest.approx(recorded.harmonic)

    def test_unknown_subcommand_exits_one_with_usage(self, capsys):
        assert cli_main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_exits_one(self, capsys):
        assert cli_main(["gen-data", "--halluci", "x", "--out", "y"]) == 1

    def test_validation_error_exits_one(self, tmp_path, capsys):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps({"synthetic": {"classes": 20}, "z_dim": 0}))
        code = cli_main(["train", "--config", str(config_path), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_ablate_command(self, quick_config, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        quick_config.save(config_path)
        code = cli_main(["ablate", "--config", str(config_path), "--drop", "cvae",
                         "--seed", "1"])
        assert code == 0
        assert "drop=cvae" in capsys.readouterr().out

    def test_sweep_writes_runs_csv(self, quick_config, tmp_path, monkeypatch):
        monkeypatch.setenv("SEER_THREADS", "1")
        config_path = tmp_path / "run.json"
        quick_config.save(config_path)
        out = tmp_path / "sweep"
        code = cli_main(["sweep", "--config", str(config_path),
                         "--grid", '{"beta_vae": [0.5, 1.0]}',
                         "--seeds", "1", "2", "--out", str(out)])
        assert code == 0
        lines = (out / "runs.csv").read_text().splitlines()
        assert len(lines) == 1 + 4  # header + 2 grid points x 2 seeds
        assert lines[0] == "beta_vae,seed,S,U,H,precision,recall"


class TestSweepValidation:
    def test_empty_grid_rejected(self, quick_config, tmp_path):
        from seerzsl.evaluation import sweep_run

        with pytest.raises(ValueError):
            sweep_run(quick_config, {}, [0], tmp_path)

    def test_invalid_grid_value_rejected(self, quick_config, tmp_path):
        from seerzsl.evaluation import sweep_run

        with pytest.raises(ConfigError):
            sweep_run(quick_config, {"beta_vae": [-1.0]}, [0], tmp_path)
        with pytest.raises(ConfigError):
            sweep_run(quick_config, {"z_dim": [1]}, [0], tmp_path)

    def test_single_point_grid_matches_train_full(self, quick_config, tmp_path, monkeypatch):
        from seerzsl.evaluation import sweep_run

        monkeypatch.setenv("SEER_THREADS", "1")
        reports = sweep_run(quick_config, {"beta_vae": [quick_config.beta_vae]},
                            [quick_config.seed], tmp_path / "sweep")
        _, base = train_full(quick_config)
        assert reports[0].harmonic == pytest.approx(base.harmonic)
        assert reports[0].seen_accuracy == pytest.approx(base.seen_accuracy)