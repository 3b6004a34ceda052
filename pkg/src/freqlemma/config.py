import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class Settings:
    """
    Process-level settings read from the environment (or a .env file).

    Nothing numeric lives here: every experiment parameter comes from a
    RunConfig file so that results never depend on the environment.
    """
    log_level: str = "INFO"
    api_host: str = "127.0.0.1"
    api_port: int = 8000


def get_settings() -> Settings:
    load_dotenv()

    port = os.getenv("FREQLEMMA_API_PORT", "8000")
    if not port.isdigit():
        raise RuntimeError(
            "FREQLEMMA_API_PORT must be an integer port number, "
            f"got {port!r}."
        )

    return Settings(
        log_level=os.getenv("FREQLEMMA_LOG_LEVEL", "INFO").upper(),
        api_host=os.getenv("FREQLEMMA_API_HOST", "127.0.0.1"),
        api_port=int(port),
    )


def configure_logging(level: Optional[str] = None) -> None:
    name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=logging.getLevelName(name) if name in logging.getLevelNamesMapping() else logging.INFO,
        format=LOG_FORMAT,
    )
