"""Tests for config files, environment loading and manifests."""

import logging
import os

import pytest

from hydra_cd.config import (
    build_default_map,
    load_config,
    load_environment,
    manifest_float,
    manifest_l_star,
    normalize_key,
)
from hydra_cd.errors import ConfigError


class TestConfigFile:
    def test_normalize_key(self):
        assert normalize_key("  Eval-Every ") == "eval_every"

    def test_load_config(self, tmp_path):
        path = tmp_path / "hydra.env"
        path.write_text("# run settings\nTAU=4\nprotocol=asl\nlam=\n", encoding="utf-8")
        assert load_config(path) == {"tau": "4", "protocol": "asl"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.env")

    def test_default_map_routes_by_parameter(self, caplog):
        commands = {"solve": ["tau", "lam", "iters"], "generate": ["lam", "seed"]}
        with caplog.at_level(logging.WARNING, logger="hydra_cd.config"):
            default_map = build_default_map({"tau": "2", "lam": "0.5", "colour": "red"}, commands)
        assert default_map == {"solve": {"tau": "2", "lam": "0.5"}, "generate": {"lam": "0.5"}}
        assert "colour" in caplog.text

    def test_load_environment_reads_dotenv(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv("HYDRA_SOLVE_TAU", raising=False)
        (tmp_path / ".env").write_text("HYDRA_SOLVE_TAU=3\n", encoding="utf-8")
        load_environment()
        assert os.environ["HYDRA_SOLVE_TAU"] == "3"
        monkeypatch.delenv("HYDRA_SOLVE_TAU")


class TestManifest:
    def test_l_star_keys(self):
        assert manifest_l_star({"l_star": "1.25"}) == 1.25
        assert manifest_l_star({"optimal_value": "-2"}) == -2.0
        assert manifest_l_star({"seed": "1"}) is None

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            manifest_float({"lam": "one"}, "lam")
        with pytest.raises(ConfigError):
            manifest_l_star({"l_star": "inf"})
