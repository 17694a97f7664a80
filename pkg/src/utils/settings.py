import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel

ENV_PREFIX = "PARITY_VLE_"


class Settings(BaseModel):
    """Numeric tolerances and search bounds shared by the library and the CLI."""

    tolerance: float = 1e-9
    max_iterations: int = 1_000_000
    cap: int = 64
    max_r: int = 4
    tree_budget: int = 10_000
    option_budget: int = 200_000
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        values = {}
        for name in cls.model_fields:
            raw = os.environ.get(ENV_PREFIX + name.upper())
            if raw is not None and raw != "":
                values[name] = raw
        return cls(**values)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    load_dotenv()
    return Settings.from_env()
