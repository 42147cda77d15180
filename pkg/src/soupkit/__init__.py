"""soupkit: train toy ingredient models, mix their parameters, and search
mixture weights with labels or with none at all."""

from __future__ import annotations

__version__ = "0.1.0"

from .tensor_store import (  # noqa: F401
    CheckpointMeta,
    TensorSet,
    assert_compatible,
    load_checkpoint,
    save_checkpoint,
)
from .mixer import (  # noqa: F401
    MixtureWeights,
    SimplexGridSpec,
    barycentric_centroid_grid,
    interpolation_path,
    mix,
    sample_simplex_uniform,
    sample_simplex_uniform_batch,
)
from .souping import (  # noqa: F401
    SeasonConfig,
    SelfSeasonConfig,
    greedy_soup,
    season_random,
    self_season,
    uniform_soup,
)
from .experiment import (  # noqa: F401
    ExperimentConfig,
    RunManifest,
    run_experiment,
)
