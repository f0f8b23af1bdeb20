import pytest

from dfedsim.config import (
    ConfigError,
    PartitionScheme,
    echo_config,
    parse_config,
    parse_config_text,
)
from dfedsim.protocol import Algorithm
from dfedsim.topology import TopologyKind

MINIMAL = """
algorithm = dfedalt
topology.kind = ring
topology.m = 8
seed = 42
"""


class TestParsing:
    def test_minimal_file_takes_documented_defaults(self):
        cfg = parse_config_text(MINIMAL)
        assert cfg.algorithm is Algorithm.DFEDALT
        assert cfg.topology_kind is TopologyKind.RING
        assert cfg.m == 8 and cfg.seed == 42
        assert cfg.rounds == 50
        assert cfg.partition is PartitionScheme.DIRICHLET
        assert cfg.alpha == 0.3
        assert cfg.layer_dims == (16, 32, 10)  # derived from data.d and data.C
        assert cfg.split_index == 1
        assert cfg.eta_u == 0.1 and cfg.eta_v == 0.001
        assert cfg.rho == 0.05
        assert cfg.output_dir == "./out"
        assert cfg.independent_init is False

    def test_layer_dims_default_tracks_data_shape(self):
        cfg = parse_config_text(MINIMAL + "data.d = 6\ndata.C = 3\n")
        assert cfg.layer_dims == (6, 32, 3)

    def test_split_index_default_is_last_layer(self):
        cfg = parse_config_text(MINIMAL + "model.layer_dims = 16,8,8,10\n")
        assert cfg.split_index == 2

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config_text("# header\n\n" + MINIMAL + "\n# trailing\n")
        assert cfg.m == 8

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.cfg")

    def test_syntax_error_reports_line_number(self):
        with pytest.raises(ConfigError, match=":3:"):
            parse_config_text("algorithm = dfedalt\nseed = 1\nbogus line\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'topology.n'"):
            parse_config_text(MINIMAL + "topology.n = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config_text(MINIMAL + "seed = 43\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing required key 'topology.m'"):
            parse_config_text("algorithm = dfedalt\ntopology.kind = ring\nseed = 1\n")

    def test_invalid_value_names_the_key(self):
        with pytest.raises(ConfigError, match="invalid value for 'topology.m'"):
            parse_config_text(MINIMAL.replace("topology.m = 8", "topology.m = eight"))

    def test_exp_alias_for_exponential(self):
        cfg = parse_config_text(MINIMAL.replace("ring", "exp"))
        assert cfg.topology_kind is TopologyKind.EXPONENTIAL

    def test_overrides_replace_values(self):
        cfg = parse_config_text(MINIMAL, overrides={"optim.rho": "0.7"})
        assert cfg.rho == 0.7

    def test_override_of_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text(MINIMAL, overrides={"optim.rh0": "0.7"})


class TestCrossFieldValidation:
    def test_grid_requires_perfect_square(self):
        text = MINIMAL.replace("ring", "grid").replace("topology.m = 8", "topology.m = 15")
        with pytest.raises(ConfigError, match="perfect square"):
            parse_config_text(text)

    def test_negative_rho_rejected(self):
        with pytest.raises(ConfigError, match="optim.rho"):
            parse_config_text(MINIMAL + "optim.rho = -0.1\n")

    def test_pathological_class_coverage(self):
        text = MINIMAL + "data.partition = pathological\ndata.c_per_client = 1\ndata.C = 10\n"
        with pytest.raises(ConfigError, match="cover"):
            parse_config_text(text.replace("topology.m = 8", "topology.m = 4"))

    def test_c_per_client_cannot_exceed_class_count(self):
        text = MINIMAL + "data.partition = pathological\ndata.c_per_client = 11\n"
        with pytest.raises(ConfigError, match="c_per_client"):
            parse_config_text(text)

    def test_layer_dims_must_match_data_shape(self):
        with pytest.raises(ConfigError, match="layer_dims"):
            parse_config_text(MINIMAL + "model.layer_dims = 8,16,10\n")

    def test_split_index_range(self):
        with pytest.raises(ConfigError, match="split_index"):
            parse_config_text(MINIMAL + "model.split_index = 2\n")

    def test_momentum_range(self):
        with pytest.raises(ConfigError, match="momentum"):
            parse_config_text(MINIMAL + "optim.momentum = 1.0\n")

    def test_dirichlet_feasibility_precheck(self):
        text = MINIMAL + "data.n_per_class = 5\ndata.min_per_client = 20\n"
        with pytest.raises(ConfigError, match="cannot give"):
            parse_config_text(text)

    def test_alpha_positive_for_dirichlet(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config_text(MINIMAL + "data.alpha = 0\n")


class TestEcho:
    def test_echo_round_trips_to_identical_config(self):
        cfg = parse_config_text(
            MINIMAL
            + "optim.eta_u = 0.30000000000000004\n"
            + "data.class_sep = 6.5\n"
            + "model.layer_dims = 16,8,10\n"
            + "init.independent = true\n"
        )
        echoed = echo_config(cfg)
        assert parse_config_text(echoed) == cfg

    def test_echo_contains_every_key(self):
        cfg = parse_config_text(MINIMAL)
        echoed = echo_config(cfg)
        for key in ("algorithm", "topology.kind", "data.alpha", "optim.rho",
                    "round.batch_size", "theory.F_gap", "init.independent"):
            assert f"{key} = " in echoed

    def test_echo_is_stable(self):
        cfg = parse_config_text(MINIMAL)
        assert echo_config(cfg) == echo_config(parse_config_text(echo_config(cfg)))
