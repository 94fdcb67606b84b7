import logging
import os

logger = logging.getLogger("aad")

BANNER_WIDTH = 72
# status -> (nível, marcador)
_STATUS = {
    "success": (logging.INFO, "✅"),
    "loading": (logging.INFO, "🔄"),
    "info": (logging.INFO, "ℹ️"),
    "warning": (logging.WARNING, "⚠️"),
    "error": (logging.ERROR, "❌"),
}


def setup_logging(log_file: str | None = None, level: str | None = None) -> None:
    """Configura o logging do processo (arquivo + console)."""
    log_file = log_file or os.getenv("AAD_LOG_FILE", "aad.log")
    level_name = (level or os.getenv("AAD_LOG_LEVEL", "INFO")).upper()
    numeric_level = getattr(logging, level_name, None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    logging.basicConfig(
        level=numeric_level,
        format='%(asctime)s | %(levelname)s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        handlers=[
            logging.FileHandler(log_file, encoding='utf-8', mode='a'),
            logging.StreamHandler()
        ],
        force=True
    )
    if numeric_level != getattr(logging, level_name, None):
        logging.warning(
            f"AAD_LOG_LEVEL ('{level_name}') inválido. Usando INFO.")


def log_header(stage: str, **context) -> None:
    """Abre uma etapa do pipeline: nome da etapa e os parâmetros que a definem."""
    logger.info("─" * BANNER_WIDTH)
    logger.info(f"▶ {stage}")
    if context:
        logger.info("  " + " | ".join(f"{key}={value}" for key, value in context.items()))
    logger.info("─" * BANNER_WIDTH)


def log_status(message: str, status: str = "success") -> None:
    level, mark = _STATUS.get(status, _STATUS["info"])
    logger.log(level, f"{mark} {message}")
