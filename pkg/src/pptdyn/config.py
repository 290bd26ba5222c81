"""Configuration management for pptdyn."""

import logging
import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def _get_app_version() -> str:
    """Get app version from environment, falling back to the packaged default."""
    version = os.getenv('APP_VERSION')
    if version:
        return version
    return "0.3.0"


class Settings(BaseSettings):
    """Numerical tolerances and runtime switches."""

    app_name: str = "pptdyn"
    app_version: str = Field(default_factory=_get_app_version, validation_alias="APP_VERSION")
    debug: bool = False
    log_level: str = "WARNING"

    # Linear algebra predicates
    herm_tol: float = 1e-12  # relative to max|M|
    eig_tol: float = 1e-10
    psd_tol: float = 1e-9  # min eigenvalue relative to the operator norm
    marginal_tol: float = 1e-9  # entrywise, TP and superchannel marginals

    # Solver
    gap_tol: float = 1e-6
    feas_tol: float = 1e-7
    max_iter: int = 200
    feasibility_margin: float = 1e-6
    agreement_tol: float = 1e-5
    max_block_dim: int = 32

    # Measures
    m_max: int = 64

    # Random instances
    sampling_margin: float = 1e-6
    max_attempts: int = 50
    min_mixing_weight: float = 1e-3

    # Reports
    report_digits: int = 12

    tolerance_profile: Optional[Path] = None

    model_config = SettingsConfigDict(
        env_prefix="PPTDYN_",
        env_file=".env",
        extra="ignore"
    )


def load_tolerance_profile(path: Path, base: Optional[Settings] = None) -> Settings:
    """Build settings from a YAML tolerance profile.

    Args:
        path: YAML file holding a flat mapping of setting names to values
        base: Settings to start from (defaults to the module singleton)

    Returns:
        A new Settings instance with the profile applied
    """
    base = base or settings
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Failed to read tolerance profile {path}: {e}")
        raise ConfigurationError(f"cannot read tolerance profile {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigurationError(f"tolerance profile {path} must be a mapping")

    known = set(Settings.model_fields)
    overrides = {}
    for key, value in data.items():
        if key not in known:
            logger.warning(f"Ignoring unknown setting '{key}' in {path}")
            continue
        overrides[key] = value

    try:
        return Settings.model_validate({**base.model_dump(), **overrides, 'tolerance_profile': path})
    except ValidationError as e:
        raise ConfigurationError(f"invalid tolerance profile {path}: {e}") from e


settings = Settings()
if settings.tolerance_profile is not None:
    settings = load_tolerance_profile(settings.tolerance_profile, settings)

HERM_TOL = settings.herm_tol
EIG_TOL = settings.eig_tol
PSD_TOL = settings.psd_tol
MARGINAL_TOL = settings.marginal_tol
GAP_TOL = settings.gap_tol
FEAS_TOL = settings.feas_tol


def apply_settings(new: Settings) -> None:
    """Copy `new` onto the shared settings object.

    Tolerances used as default arguments were bound at import and keep their values;
    set PPTDYN_TOLERANCE_PROFILE in the environment to change those.
    """
    for name in Settings.model_fields:
        setattr(settings, name, getattr(new, name))
