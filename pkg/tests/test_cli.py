import numpy as np
import pytest

from dfedsim.cli import main
from dfedsim.model import load_model

RUN_CFG = """
algorithm = dfedalt
topology.kind = ring
topology.m = 4
seed = 5
rounds = 2
data.C = 4
data.d = 4
data.n_per_class = 30
data.class_sep = 4.0
data.alpha = 1.0
model.layer_dims = 4,6,4
optim.eta_v = 0.05
round.batch_size = 16
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(RUN_CFG, encoding="utf-8")
    return path


class TestRun:
    def test_writes_all_artifacts(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(cfg_file), "--output-dir", str(out)]) == 0
        assert (out / "metrics.csv").exists()
        assert (out / "config.echo").exists()
        checkpoints = sorted(out.glob("client_*.model"))
        assert len(checkpoints) == 4
        model = load_model(checkpoints[0])
        assert model.layer_dims == (4, 6, 4)
        header = (out / "metrics.csv").read_text().splitlines()[0]
        assert header == (
            "round,mean_personal_acc,std_personal_acc,mean_train_loss,"
            "delta_u_bar,delta_v,consensus_error,eta_u_t,eta_v_t"
        )

    def test_rerun_is_byte_identical(self, cfg_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg_file), "--output-dir", str(out_a)]) == 0
        assert main(["run", str(cfg_file), "--output-dir", str(out_b)]) == 0
        assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()

    def test_parallel_flag_matches_serial(self, cfg_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg_file), "--output-dir", str(out_a)]) == 0
        assert main(["run", str(cfg_file), "--output-dir", str(out_b), "--parallel"]) == 0
        assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()

    def test_refuses_overwrite_without_force(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(cfg_file), "--output-dir", str(out)]) == 0
        assert main(["run", str(cfg_file), "--output-dir", str(out)]) == 1
        assert "--force" in capsys.readouterr().err
        assert main(["run", str(cfg_file), "--output-dir", str(out), "--force"]) == 0

    def test_echo_round_trips(self, cfg_file, tmp_path):
        from dfedsim.config import parse_config, parse_config_text
        from dataclasses import replace

        out = tmp_path / "out"
        main(["run", str(cfg_file), "--output-dir", str(out)])
        echoed = parse_config_text((out / "config.echo").read_text())
        original = replace(parse_config(cfg_file), output_dir=str(out))
        assert echoed == original

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text(RUN_CFG + "optim.rho = -1\n", encoding="utf-8")
        assert main(["run", str(bad)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        # valid config whose pathological split starves a holder at runtime
        text = RUN_CFG.replace("data.n_per_class = 30", "data.n_per_class = 2")
        text = text.replace("data.alpha = 1.0", "data.partition = pathological\ndata.c_per_client = 4")
        text = text.replace("data.min_per_client = 10", "")
        bad = tmp_path / "starved.cfg"
        bad.write_text(text + "data.min_per_client = 1\n", encoding="utf-8")
        code = main(["run", str(bad), "--output-dir", str(tmp_path / "o")])
        err = capsys.readouterr().err
        assert code == 2
        assert "runtime error" in err and "partition" in err


class TestTopologyReport:
    def test_full8_row(self, capsys):
        assert main(["topology-report", "full", "8"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "kind,m,lambda,spectral_gap"
        kind, m, lam, gap = out[1].split(",")
        assert kind == "full" and m == "8"
        assert abs(float(lam)) < 1e-12
        assert float(gap) == pytest.approx(1.0, abs=1e-12)

    def test_bad_kind_is_config_error(self, capsys):
        assert main(["topology-report", "star", "8"]) == 1

    def test_grid_requires_square(self, capsys):
        assert main(["topology-report", "grid", "15"]) == 1


class TestPartitionReport:
    def test_histogram_shape_and_totals(self, cfg_file, capsys):
        assert main(["partition-report", str(cfg_file)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "client_id,class,train_count,test_count"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 4 * 4  # m clients x C classes
        total = sum(int(r[2]) + int(r[3]) for r in rows)
        assert total == 4 * 30


class TestBoundEval:
    def test_values_match_library(self, cfg_file, capsys):
        from dfedsim.config import parse_config, theory_constants
        from dfedsim.metrics import bound_rhs_dfedalt, bound_rhs_dfedsalt
        from dfedsim.topology import build_mixing_matrix, build_topology

        assert main(["bound-eval", str(cfg_file)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "bound,lambda,T,K_u,value"
        cfg = parse_config(cfg_file)
        mix = build_mixing_matrix(build_topology(cfg.topology_kind, cfg.m))
        alt_row = lines[1].split(",")
        salt_row = lines[2].split(",")
        constants = theory_constants(cfg)
        assert float(alt_row[4]) == pytest.approx(
            bound_rhs_dfedalt(constants, mix.lam, cfg.rounds), rel=1e-15
        )
        assert float(salt_row[4]) == pytest.approx(
            bound_rhs_dfedsalt(constants, mix.lam, cfg.rounds, cfg.K_u_epochs), rel=1e-15
        )


class TestSweep:
    def test_rho_grid_and_zero_equivalence(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(RUN_CFG.replace("dfedalt", "dfedsalt"), encoding="utf-8")
        base = tmp_path / "grid"
        code = main([
            "sweep", str(cfg), "--param", "optim.rho",
            "--values", "0,0.05,0.1", "--output-dir", str(base),
        ])
        assert code == 0
        sub = sorted(p.name for p in base.iterdir())
        assert sub == ["optim.rho=0", "optim.rho=0.05", "optim.rho=0.1"]
        # the rho=0 grid point reproduces a plain alternating-SGD run
        alt_cfg = tmp_path / "alt.cfg"
        alt_cfg.write_text(RUN_CFG, encoding="utf-8")
        alt_out = tmp_path / "alt_out"
        main(["run", str(alt_cfg), "--output-dir", str(alt_out)])
        assert (
            (base / "optim.rho=0" / "metrics.csv").read_bytes()
            == (alt_out / "metrics.csv").read_bytes()
        )
        assert (
            (base / "optim.rho=0.1" / "metrics.csv").read_bytes()
            != (alt_out / "metrics.csv").read_bytes()
        )

    def test_unknown_param_rejected(self, cfg_file, capsys):
        assert main([
            "sweep", str(cfg_file), "--param", "optim.bogus", "--values", "1,2",
        ]) == 1
