"""
otalign Configuration Management
Handles environment variables and process-wide settings.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from otalign.exceptions import ConfigurationError

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


@dataclass
class OTAlignSettings:
    """Process-wide settings read from OTALIGN_* environment variables."""

    # Reproducibility
    seed: Optional[int] = None

    # Logging
    log_level: str = "WARNING"

    # Teacher cache (None disables it)
    cache_dir: Optional[Path] = None

    # Parallel pair evaluation
    max_workers: int = 1

    @classmethod
    def from_env(cls) -> "OTAlignSettings":
        """Load settings from environment variables."""
        seed = os.getenv("OTALIGN_SEED", "").strip()
        cache_dir = os.getenv("OTALIGN_CACHE_DIR", "").strip()
        workers = os.getenv("OTALIGN_MAX_WORKERS", "1").strip()
        try:
            return cls(
                seed=int(seed) if seed else None,
                log_level=os.getenv("OTALIGN_LOG_LEVEL", "WARNING").upper(),
                cache_dir=Path(cache_dir) if cache_dir else None,
                max_workers=int(workers),
            )
        except ValueError as exc:
            raise ConfigurationError("environment", f"OTALIGN_* variable is not an integer ({exc})") from exc

    def validate(self) -> list[str]:
        """Validate settings and return list of errors."""
        errors = []

        if self.log_level not in LOG_LEVELS:
            errors.append(f"Invalid log_level: {self.log_level}")

        if self.max_workers < 1 or self.max_workers > 16:
            errors.append(f"Invalid max_workers: {self.max_workers} (must be 1-16)")

        if self.seed is not None and self.seed < 0:
            errors.append(f"Invalid seed: {self.seed} (must be >= 0)")

        return errors


# Global settings instance
_settings: Optional[OTAlignSettings] = None


def get_settings() -> OTAlignSettings:
    """Get the global settings instance."""
    global _settings
    if _settings is None:
        settings = OTAlignSettings.from_env()
        errors = settings.validate()
        if errors:
            raise ConfigurationError("environment", "; ".join(errors))
        _settings = settings

    return _settings


def reset_settings() -> None:
    """Forget cached settings so the next get_settings() re-reads the environment."""
    global _settings
    _settings = None


def load_dotenv_if_exists() -> bool:
    """Load a .env file from the working directory if there is one."""
    from dotenv import load_dotenv

    env_file = Path(".env")
    if env_file.exists():
        load_dotenv(env_file)
        return True
    return False
