"""Tests for settings and YAML tolerance profiles."""

import logging

import pytest

from pptdyn.config import Settings, apply_settings, load_tolerance_profile, settings
from pptdyn.exceptions import ConfigurationError


@pytest.fixture(autouse=True)
def restore_settings():
    snapshot = settings.model_copy()
    yield
    apply_settings(snapshot)


class TestSettings:
    def test_defaults(self):
        s = Settings()
        assert s.app_name == "pptdyn"
        assert s.psd_tol == 1e-9
        assert s.gap_tol == 1e-6
        assert s.m_max == 64

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("PPTDYN_MAX_BLOCK_DIM", "64")
        assert Settings().max_block_dim == 64

    def test_version_from_environment(self, monkeypatch):
        monkeypatch.setenv("APP_VERSION", "9.9.9")
        assert Settings().app_version == "9.9.9"


class TestToleranceProfile:
    def test_profile_overrides(self, tmp_path):
        path = tmp_path / "loose.yaml"
        path.write_text("gap_tol: 1.0e-4\nmax_iter: 50\n")
        s = load_tolerance_profile(path, Settings())
        assert s.gap_tol == 1e-4
        assert s.max_iter == 50
        assert s.psd_tol == 1e-9
        assert s.tolerance_profile == path

    def test_unknown_keys_are_skipped(self, tmp_path, caplog):
        path = tmp_path / "extra.yaml"
        path.write_text("feas_tol: 1.0e-8\nsolver_colour: blue\n")
        with caplog.at_level(logging.WARNING, logger="pptdyn.config"):
            s = load_tolerance_profile(path, Settings())
        assert s.feas_tol == 1e-8
        assert "solver_colour" in caplog.text

    def test_empty_profile(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_tolerance_profile(path, Settings()).gap_tol == 1e-6

    @pytest.mark.parametrize("text", ["gap_tol: [1, 2\n", "- just\n- a list\n", "max_iter: lots\n"])
    def test_bad_profiles(self, tmp_path, text):
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(ConfigurationError):
            load_tolerance_profile(path, Settings())

    def test_missing_profile(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_tolerance_profile(tmp_path / "absent.yaml")

    def test_apply_settings(self, tmp_path):
        path = tmp_path / "digits.yaml"
        path.write_text("report_digits: 4\n")
        apply_settings(load_tolerance_profile(path))
        assert settings.report_digits == 4
