import logging
import os
from typing import Optional

import yaml
from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

# Charger les variables d'environnement depuis .env s'il existe
load_dotenv()


class Settings(BaseSettings):
    """
    Paramètres globaux du solveur. Chaque champ peut être surchargé par une
    variable d'environnement préfixée par CEQP_ (ex: CEQP_MAX_ITER=200).
    """
    model_config = SettingsConfigDict(
        env_prefix="CEQP_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Journalisation
    LOG_LEVEL: str = "info"

    # Boucle externe
    MAX_ITER: int = 5000
    TOL_STOP: float = 1e-9
    PARALLEL_WORKERS: int = 4

    # Sous-problèmes prox
    TOL_INNER: float = 1e-10
    INNER_MAX_ITER: int = 100_000
    INNER_MIN_STEP: float = 1e-12

    # Projection sur une intersection de demi-espaces
    EXACT_CUT_LIMIT: int = 12
    ACTIVE_SET_TOL: float = 1e-9
    DYKSTRA_TOL: float = 1e-12
    DYKSTRA_MAX_SWEEPS: int = 100_000
    DYKSTRA_DIVERGENCE_FACTOR: float = 1e12
    FEASIBILITY_TOL: float = 1e-12

    # Diagnostics
    INVARIANT_TOL: float = 1e-8
    ANCHOR_MONOTONE_TOL: float = 1e-10
    LIPSCHITZ_SAMPLES: int = 10_000
    LIPSCHITZ_TOL: float = 1e-10
    SUBGRADIENT_SAMPLES: int = 1000
    SUBGRADIENT_TOL: float = 1e-9
    KNOWN_SOLUTION_TOL: float = 1e-8
    SCHEDULE_CHECK_LIMIT: int = 1_000_000
    SEED: int = 0

    # Générateurs d'instances
    FIXED_POINT_BOX_MARGIN: float = 10.0

    # Traces
    TRACE_FORMAT: str = "csv"
    TRACE_WALL_TIME: bool = False

    CONFIG_PATH: Optional[str] = None


settings = Settings()

try:
    config_path = settings.CONFIG_PATH or os.environ.get("CEQP_CONFIG_PATH", "config/settings.yaml")
    if os.path.exists(config_path):
        with open(config_path, "r", encoding="utf-8") as f:
            yaml_config = yaml.safe_load(f) or {}
            for key, value in yaml_config.items():
                if hasattr(settings, key):
                    setattr(settings, key, value)
                else:
                    logger.warning(f"Clé de configuration inconnue ignorée: {key}")
except Exception as e:
    logger.error(f"Erreur lors du chargement de la configuration YAML: {e}")
