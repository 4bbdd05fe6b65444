from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings read from the environment (and `.env`).

    Run-specific choices (thresholds, estimator policies, output directory)
    live in `RunConfig`; these are the knobs an operator sets once per host.
    """

    model_config = SettingsConfigDict(
        env_prefix="PATCHSCALE_",
        env_file=".env",
        extra="ignore",
    )

    log_level: str = Field("INFO", description="loguru level for the stderr sink")
    progress: bool = Field(True, description="Show tqdm progress bars")
    jobs: int = Field(1, ge=1, description="Default worker pool width")
    seed: int = Field(20010101, ge=0, description="Default top-level seed")
    mc_trials: int = Field(10_000, ge=1, description="Default Monte Carlo trials")
    logfire_service_name: str = Field("patchscale", description="logfire service name")
    logfire_service_version: str = Field("0.1.0", description="logfire service version")
    environment: str = Field("development", description="Deployment environment label")
