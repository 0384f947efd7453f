"""
Configuration settings for the PMU spoof-detection pipeline.
Loads environment variables and provides centralized access to configuration.
"""

import logging
import os
from dotenv import load_dotenv

# Load environment variables from .env file (override existing env vars)
load_dotenv(override=True)


class Settings:
    """Central configuration class for the application."""

    # Application Settings
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Experiment defaults
    SEED: int = int(os.getenv("PMU_SEED", "42"))
    WORKERS: int = int(os.getenv("PMU_WORKERS", "1"))
    RATE_HZ: int = int(os.getenv("PMU_RATE_HZ", "60"))
    WINDOW_LEN: int = int(os.getenv("PMU_WINDOW_LEN", "300"))
    LATENCY_RUN_LEN: int = int(os.getenv("LATENCY_RUN_LEN", "30"))

    # Training caps (rows drawn uniformly with the experiment seed)
    SVM_SUBSAMPLE_CAP: int = int(os.getenv("SVM_SUBSAMPLE_CAP", "20000"))
    MLP_SUBSAMPLE_CAP: int = int(os.getenv("MLP_SUBSAMPLE_CAP", "50000"))

    # Data Paths
    OUTPUT_DIR: str = os.getenv("PMU_OUTPUT_DIR", "out")
    DEFAULT_EXPERIMENT_FILE: str = os.path.join(os.path.dirname(__file__), "default_experiment.json")

    @classmethod
    def validate(cls) -> bool:
        """Validate that settings hold usable values."""
        positive_settings = {
            "PMU_WORKERS": cls.WORKERS,
            "PMU_RATE_HZ": cls.RATE_HZ,
            "LATENCY_RUN_LEN": cls.LATENCY_RUN_LEN,
            "SVM_SUBSAMPLE_CAP": cls.SVM_SUBSAMPLE_CAP,
            "MLP_SUBSAMPLE_CAP": cls.MLP_SUBSAMPLE_CAP,
        }

        invalid = [name for name, value in positive_settings.items() if value < 1]
        if cls.WINDOW_LEN < 2:
            invalid.append("PMU_WINDOW_LEN")
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL.upper()), int):
            invalid.append("LOG_LEVEL")

        if invalid:
            raise ValueError(f"Invalid environment variables: {', '.join(invalid)}")

        return True


# Global settings instance
settings = Settings()
