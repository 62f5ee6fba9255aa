from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application settings
    app_name: str = "ECS Metrology Workbench"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "WARNING"

    # Fock-space settings
    default_cutoff: int = 16
    tail_tolerance: float = 1e-5
    working_tail_tolerance: float = 1e-13

    # Estimation settings
    default_mu: int = 1
    working_phase: float = 0.3

    # Internal agreement checks
    agreement_tolerance: float = 1e-8
    parity_agreement_tolerance: float = 1e-6

    # Parity working-point search
    parity_grid_points: int = 2048
    parity_refine_tolerance: float = 1e-8

    # Output
    float_digits: int = 12

    # Sweep workers
    max_workers: int = 4

    model_config = SettingsConfigDict(env_file=".env", env_prefix="ECS_", case_sensitive=False)


# Singleton instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get application settings singleton"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
