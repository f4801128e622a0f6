import logging
import os
from typing import Optional

from dotenv import find_dotenv, load_dotenv

logger = logging.getLogger("mimosim")

DEFAULT_OUT_DIR = "results"


def load_mimosim_env(env_file: Optional[str] = None) -> bool:
    """Load MIMOSIM_* defaults from a .env file using python-dotenv. Returns whether a file was found."""
    env_file_path = env_file or find_dotenv(".env", usecwd=True)
    if not env_file_path or not os.path.exists(env_file_path):
        logger.debug("No .env file found, using built-in defaults")
        return False
    if os.getenv("MIMOSIM_ENV_OVERRIDE", "").lower() == "true":
        logger.info("Loading env from %s, which may override existing environment variables", env_file_path)
        load_dotenv(env_file_path, override=True)
    else:
        logger.info("Loading env from %s, but not overriding existing environment variables", env_file_path)
        load_dotenv(env_file_path, override=False)
    return True


def env_seed() -> Optional[int]:
    value = os.getenv("MIMOSIM_SEED")
    return int(value) if value not in (None, "") else None


def env_out_dir() -> str:
    return os.getenv("MIMOSIM_OUT_DIR") or DEFAULT_OUT_DIR
