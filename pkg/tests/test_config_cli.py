import json

import pytest

from fpplab.cli import main
from fpplab.campaign import run_campaign
from fpplab.config import ExperimentConfig, RunManifest, load_config
from fpplab.errors import ConfigError

TINY = dict(dimension=2, alpha=2.0, n_values=[8, 12], replicas=20,
            master_seed=4321, experiments=["fluctuation", "triangle"], workers=1)


class TestConfig:
    def test_round_trip_identity(self):
        cfg = ExperimentConfig.from_dict(TINY)
        again = ExperimentConfig.from_dict(cfg.to_json_dict())
        assert cfg == again

    @pytest.mark.parametrize("patch", [
        {"alpha": 1.0},
        {"dimension": 1},
        {"replicas": 1},
        {"n_values": []},
        {"n_values": [16, 8]},
        {"n_values": [8, 8]},
        {"experiments": ["nope"]},
        {"padding": -1.0},
        {"theta": 0.0},
        {"intensity": 0.0},
        {"workers": 0},
    ])
    def test_validation_rejects(self, patch):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, **patch})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, "replica": 3})

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_env_overrides(self, monkeypatch, tmp_path):
        cfg = ExperimentConfig.from_dict(TINY)
        monkeypatch.setenv("FPPLAB_WORKERS", "3")
        monkeypatch.setenv("FPPLAB_OUTPUT_DIR", str(tmp_path / "env-out"))
        assert cfg.resolved_workers() == 3
        assert cfg.resolved_output_dir() == tmp_path / "env-out"

    def test_padding_for(self):
        auto = ExperimentConfig.from_dict(TINY)
        assert auto.padding_for(16) == 8.0
        fixed = ExperimentConfig.from_dict({**TINY, "padding": 5.0})
        assert fixed.padding_for(16) == 5.0


class TestCampaignOrchestration:
    def test_empty_experiment_list_writes_manifest_only(self, tmp_path):
        cfg = ExperimentConfig.from_dict({**TINY, "experiments": []})
        manifest, _ = run_campaign(cfg, tmp_path)
        assert (tmp_path / "manifest.json").exists()
        assert manifest.digests == {}

    def test_repeat_run_reproduces_digests(self, tmp_path):
        cfg = ExperimentConfig.from_dict(TINY)
        m1, _ = run_campaign(cfg, tmp_path / "a")
        m2, _ = run_campaign(cfg, tmp_path / "b")
        assert m1.digests == m2.digests
        for name in m1.digests:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        cfg = ExperimentConfig.from_dict(TINY)
        m1, _ = run_campaign(cfg, tmp_path)
        back = RunManifest.read(tmp_path / "manifest.json")
        assert back.digests == m1.digests
        assert back.config == cfg.to_json_dict()
        assert set(back.experiment_seeds) == set(cfg.experiments)

    def test_different_seed_changes_outputs(self, tmp_path):
        m1, _ = run_campaign(ExperimentConfig.from_dict(TINY), tmp_path / "a")
        m2, _ = run_campaign(ExperimentConfig.from_dict({**TINY, "master_seed": 1}), tmp_path / "b")
        assert m1.digests != m2.digests


class TestCli:
    def write_config(self, tmp_path, **overrides):
        payload = {**TINY, "output_dir": str(tmp_path / "out"), **overrides}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        return path

    def test_run_and_report(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        assert main(["run", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "manifest.json" in out
        assert main(["report", str(tmp_path / "out")]) == 0
        rendered = capsys.readouterr().out
        assert "passage-time sweep" in rendered and "triangle" in rendered
        assert (tmp_path / "out" / "report.txt").exists()

    def test_report_rendering_is_stable(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        main(["run", str(cfg_path)])
        main(["report", str(tmp_path / "out")])
        first = (tmp_path / "out" / "report.txt").read_bytes()
        main(["report", str(tmp_path / "out")])
        assert (tmp_path / "out" / "report.txt").read_bytes() == first
        capsys.readouterr()

    def test_missing_config_exits_one(self, capsys):
        assert main(["run", "/definitely/not/here.json"]) == 1
        capsys.readouterr()

    def test_bad_config_exits_one(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({**TINY, "alpha": 0.5}))
        assert main(["run", str(path)]) == 1
        capsys.readouterr()

    def test_report_missing_dir_exits_one(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nothing")]) == 1
        capsys.readouterr()

    def test_output_dir_flag_overrides(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        assert main(["run", str(cfg_path), "--output-dir", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "manifest.json").exists()
        capsys.readouterr()


class TestResumeAndOverrides:
    def test_partial_campaign_seeds_are_selection_independent(self, tmp_path):
        both = ExperimentConfig.from_dict(TINY)
        only_triangle = ExperimentConfig.from_dict({**TINY, "experiments": ["triangle"]})
        run_campaign(both, tmp_path / "both")
        run_campaign(only_triangle, tmp_path / "tri")
        assert ((tmp_path / "both" / "triangle.json").read_bytes()
                == (tmp_path / "tri" / "triangle.json").read_bytes())

    def test_resume_never_changes_completed_outputs(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            {**TINY, "experiments": ["fluctuation", "triangle", "corridor"]})
        m1, _ = run_campaign(cfg, tmp_path / "out")
        before = {n: (tmp_path / "out" / n).read_bytes() for n in m1.digests}
        (tmp_path / "out" / "corridor.json").unlink()  # only this one should rerun
        m2, _ = run_campaign(cfg, tmp_path / "out", resume=True)
        assert m2.digests == m1.digests
        after = {n: (tmp_path / "out" / n).read_bytes() for n in m2.digests}
        assert after == before
        assert m2.timings_s["fluctuation"] == 0.0 and m2.timings_s["corridor"] > 0

    def test_phi_override_flows_to_bench(self, tmp_path):
        import json
        cfg = ExperimentConfig.from_dict(
            {**TINY, "experiments": ["corridor"], "phi_override": 9.0})
        run_campaign(cfg, tmp_path / "out")
        payload = json.loads((tmp_path / "out" / "corridor.json").read_text())
        assert payload["phi_n"] == 9.0

    def test_phi_override_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, "phi_override": 0.5})

    def test_cli_resume_flag(self, tmp_path, capsys):
        payload = {**TINY, "output_dir": str(tmp_path / "out")}
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(payload))
        assert main(["run", str(cfg_path)]) == 0
        first = (tmp_path / "out" / "fluctuation.csv").read_bytes()
        assert main(["run", str(cfg_path), "--resume"]) == 0
        assert (tmp_path / "out" / "fluctuation.csv").read_bytes() == first
        capsys.readouterr()
