import numpy as np
import pytest

from asdpde.config import ConfigError, dump_config, load_config, parse_config
from conftest import preset_path


GOOD = """
# comment
[grid]
dim = 1
extent_x = 0,1   # trailing comment
nodes_x = 9

[vectorfield]
ax = (1+x)/2
"""


class TestParsing:
    def test_sections_and_keys(self):
        cfg = parse_config(GOOD)
        assert cfg.get_int("grid", "dim") == 1
        assert cfg.get("vectorfield", "ax") == "(1+x)/2"

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config(GOOD)
        assert cfg.get_interval("grid", "extent_x") == (0.0, 1.0)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"unknown section \[turbo\]"):
            parse_config("[turbo]\nx = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[grid]\ncolor = red\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("[grid]\ndim = 1\ndim = 2\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="outside"):
            parse_config("dim = 1\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("[grid]\ndim 1\n")

    def test_empty_config(self):
        with pytest.raises(ConfigError, match="empty"):
            parse_config("# nothing here\n")

    def test_error_reports_line_number(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("[grid]\ndim = 1\nbogus_key = 2\n")


class TestGetters:
    def test_required_missing(self):
        cfg = parse_config(GOOD)
        with pytest.raises(ConfigError, match="missing required"):
            cfg.get("grid", "nodes_y", required=True)

    def test_defaults(self):
        cfg = parse_config(GOOD)
        assert cfg.get_float("potential", "p", default=2.0) == 2.0
        assert cfg.get_bool("solver", "debug_inconsistent_divergence") is False

    def test_float_and_int_validation(self):
        cfg = parse_config("[grid]\ndim = one\nnodes_x = 3.5\n")
        with pytest.raises(ConfigError, match="must be an integer"):
            cfg.get_int("grid", "dim")
        with pytest.raises(ConfigError, match="must be an integer"):
            cfg.get_int("grid", "nodes_x")

    def test_bool_values(self):
        cfg = parse_config("[solver]\ndebug_inconsistent_divergence = yes\n")
        assert cfg.get_bool("solver", "debug_inconsistent_divergence") is True
        cfg = parse_config("[solver]\ndebug_inconsistent_divergence = maybe\n")
        with pytest.raises(ConfigError, match="boolean"):
            cfg.get_bool("solver", "debug_inconsistent_divergence")

    def test_interval_validation(self):
        cfg = parse_config("[grid]\nextent_x = 0;1\n")
        with pytest.raises(ConfigError, match="lo,hi"):
            cfg.get_interval("grid", "extent_x")

    def test_expression_errors_are_config_errors(self):
        cfg = parse_config("[coefficients]\nf = sin(\n")
        with pytest.raises(ConfigError, match=r"\[coefficients\] f"):
            cfg.get_expression("coefficients", "f")

    def test_vector_and_matrix(self):
        cfg = parse_config(
            "[lagrangian]\nweights = 1,2\nmatrix = 0,1;-1,0\n"
        )
        np.testing.assert_array_equal(
            cfg.get_vector("lagrangian", "weights"), [1.0, 2.0]
        )
        np.testing.assert_array_equal(
            cfg.get_matrix("lagrangian", "matrix"),
            [[0.0, 1.0], [-1.0, 0.0]],
        )
        bad = parse_config("[lagrangian]\nmatrix = a,b\n")
        with pytest.raises(ConfigError, match="rows"):
            bad.get_matrix("lagrangian", "matrix")


class TestDump:
    def test_round_trip_is_stable(self):
        cfg = parse_config(GOOD)
        text = dump_config(cfg)
        again = dump_config(parse_config(text))
        assert text == again

    def test_sorted_output(self):
        cfg = parse_config("[grid]\nnodes_x = 3\ndim = 1\n")
        text = dump_config(cfg)
        assert text.index("dim") < text.index("nodes_x")


class TestPresets:
    @pytest.mark.parametrize(
        "name",
        [
            "stationary_homogeneous.cfg",
            "stationary_linear.cfg",
            "stationary_p3.cfg",
            "stationary_viscous.cfg",
            "evolution_linear_ode.cfg",
            "evolution_heat.cfg",
            "evolution_contraction.cfg",
            "evolution_transport.cfg",
            "lagrangian_basic.cfg",
            "lagrangian_broken.cfg",
            "lagrangian_antisym.cfg",
            "lagrangian_regularized.cfg",
            "checkskew_1d.cfg",
            "checkskew_2d.cfg",
            "checkskew_inconsistent.cfg",
        ],
    )
    def test_all_presets_parse(self, name):
        cfg = load_config(preset_path(name))
        assert cfg.sections
