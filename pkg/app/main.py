"""
Point d'entrée principal de ceqp.
"""

import logging
import sys
from typing import List, Optional

from app.cli import EXIT_INVALID_INPUT, parse_config, run
from core.config import settings
from core.errors import ConfigError

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )


def main(argv: Optional[List[str]] = None) -> int:
    try:
        config, log_level = parse_config(argv)
    except ConfigError as e:
        configure_logging()
        logger.error(f"Configuration invalide: {e}")
        return EXIT_INVALID_INPUT
    configure_logging(log_level)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
