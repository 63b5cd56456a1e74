"""Learn, stress-test, and evaluate individualized treatment policies."""

from .config import PipelineConfig, load_config, validate_config
from .pipeline import RunManifest, run_pipeline, run_stages

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "load_config",
    "validate_config",
    "RunManifest",
    "run_pipeline",
    "run_stages",
    "__version__",
]
