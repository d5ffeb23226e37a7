import os
from typing import Callable, TypeVar

from dotenv import load_dotenv


# Load environment variables from .env file
load_dotenv()

T = TypeVar("T")

DEFAULT_LAMBDA = 1.0
DEFAULT_DELTA = 1e-6
DEFAULT_CG_EPS = 1e-5
DEFAULT_PATCH_SIDE = 8
DEFAULT_THREADS = 1
DEFAULT_LOG_LEVEL = "WARNING"


def get_env_default(name: str, cast: Callable[[str], T], fallback: T) -> T:
    """
    Resolve a default from the environment, falling back to the built-in value.

    Args:
        name (str): Environment variable name, e.g. ``ORLS_LAMBDA``
        cast (Callable): Converter applied to the raw string
        fallback: Value used when the variable is unset or empty

    Returns:
        The converted environment value or the fallback

    Raises:
        ValueError: If the variable is set but cannot be converted
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return fallback
    try:
        return cast(raw.strip())
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid value for environment variable {name}: {raw!r}") from e


def default_lambda() -> float:
    return get_env_default("ORLS_LAMBDA", float, DEFAULT_LAMBDA)


def default_delta() -> float:
    return get_env_default("ORLS_DELTA", float, DEFAULT_DELTA)


def default_cg_eps() -> float:
    return get_env_default("ORLS_CG_EPS", float, DEFAULT_CG_EPS)


def default_patch_side() -> int:
    return get_env_default("ORLS_PATCH_SIDE", int, DEFAULT_PATCH_SIDE)


def default_threads() -> int:
    return get_env_default("ORLS_THREADS", int, DEFAULT_THREADS)


def default_log_level() -> str:
    return get_env_default("ORLS_LOG_LEVEL", str.upper, DEFAULT_LOG_LEVEL)
