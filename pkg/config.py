from functools import cached_property
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from placement.lp import SolveCache
from placement.oracle import EXHAUSTIVE_LIMIT


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="SAPO_", extra="ignore")

    output_dir: Path = Path("runs")
    seed: int = 0

    exhaustive_limit: int = Field(default=EXHAUSTIVE_LIMIT, gt=0)
    solve_cache_size: int = Field(default=100_000, gt=0)
    solve_cache_ttl_seconds: float = Field(default=3600, gt=0)

    @cached_property
    def solve_cache(self) -> SolveCache:
        return SolveCache(
            max_len=self.solve_cache_size,
            max_age_seconds=self.solve_cache_ttl_seconds,
        )


settings = Settings()  # type: ignore
