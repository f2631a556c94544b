from .answers import answers_match, oracle_answer
from .gen import generate_dataset
from .render import analytic_point, render_scene
from .scene import (
    CATEGORY_POOL,
    OracleObject,
    OracleScene,
    SceneSamplerConfig,
    read_scenes,
    sample_scene,
    write_scenes,
)

__all__ = [
    "CATEGORY_POOL", "OracleObject", "OracleScene", "SceneSamplerConfig",
    "analytic_point", "answers_match", "generate_dataset", "oracle_answer",
    "read_scenes", "render_scene", "sample_scene", "write_scenes",
]
