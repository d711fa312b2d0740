# -*- coding: utf-8 -*-
from __future__ import annotations

from pathlib import Path

import pytest

from errors import ConfigurationError
from run_config import THREADS_ENV, RunConfig, defaults_text, load_config, parse_value

DEFAULT_FILE = Path(__file__).resolve().parents[1] / "config" / "axisym_default.txt"


def test_defaults_text_round_trips(tmp_path):
    path = tmp_path / "defaults.txt"
    path.write_text(defaults_text(), encoding="utf-8")
    assert load_config(str(path), environ={}) == RunConfig()


def test_shipped_default_file_matches_defaults():
    assert DEFAULT_FILE.read_text(encoding="utf-8") == defaults_text()
    assert load_config(str(DEFAULT_FILE), environ={}) == RunConfig()


def test_precedence_file_env_overrides(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("threads = 2\nn_panels = 20  # 細かめ\n\n", encoding="utf-8")
    assert load_config(str(path), environ={}).threads == 2
    assert load_config(str(path), environ={THREADS_ENV: "3"}).threads == 3
    config = load_config(str(path), ["threads=4"], environ={THREADS_ENV: "3"})
    assert config.threads == 4
    assert config.n_panels == 20


@pytest.mark.parametrize("key, text, expected", [
    ("n_panels", "40", 40),
    ("truncation_tol", "1e-10", 1e-10),
    ("truncation_tol", "auto", None),
    ("n_theta", "none", None),
    ("explicit_inverse", "yes", True),
    ("exterior_completion", "false", False),
    ("x0", "0.1, -0.2", (0.1, -0.2)),
    ("x0", "auto", None),
    ("curve", "starfish_torus:arms=3", "starfish_torus:arms=3"),
])
def test_parse_value(key, text, expected):
    assert parse_value(key, text) == expected


@pytest.mark.parametrize("key, text", [
    ("n_panels", "ten"),
    ("explicit_inverse", "maybe"),
    ("x0", "1,2,3"),
    ("no_such_key", "1"),
])
def test_parse_value_errors_name_the_key(key, text):
    with pytest.raises(ConfigurationError, match=key):
        parse_value(key, text)


def test_set_needs_key_value():
    with pytest.raises(ConfigurationError, match="key = value"):
        load_config(None, ["n_panels"], environ={})


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing.txt"):
        load_config(str(tmp_path / "missing.txt"), environ={})


@pytest.mark.parametrize("changes, match", [
    (dict(problem="both"), "problem"),
    (dict(n_gauss=8), "n_gauss"),
    (dict(n_panels=0), "n_panels"),
    (dict(fourier_modes=0), "fourier_modes"),
    (dict(fourier_modes=100, n_theta=64), "n_theta"),
    (dict(truncation_tol=-1.0), "truncation_tol"),
    (dict(threads=0), "threads"),
    (dict(recursion_policy="sideways"), "recursion_policy"),
    (dict(kernel_path="spectral"), "kernel_path"),
    (dict(x0=(-0.5, 0.0)), "x0"),
])
def test_validate_rejects(changes, match):
    with pytest.raises(ConfigurationError, match=match):
        RunConfig(**changes).validate()


def test_n_modes_is_half_of_fourier_modes():
    assert RunConfig(fourier_modes=100).n_modes == 50
    assert RunConfig(fourier_modes=25).n_modes == 12
