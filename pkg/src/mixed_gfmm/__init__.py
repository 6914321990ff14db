"""General fuzzy min-max classification of mixed continuous and categorical data
with single-pass online learning."""

from .entropy import (
    attribute_entropy,
    categorical_expansion_admissible,
    entropy_change,
    entropy_change_upper_bound,
    numeric_expansion_admissible,
)
from .errors import DataError, DimensionError, GfmmError, ModelFormatError, NumericError, PatternError
from .learner import (
    FitReport,
    Learner,
    fit_one,
    fit_stream,
    joint_overlap_with_other_classes,
    overlap_categorical,
    overlap_numeric,
)
from .membership import categorical_probability, mixed_membership, numeric_membership, ramp
from .model import (
    CategoryCounter,
    Column,
    ColumnKind,
    FeatureSchema,
    GfmmModel,
    HyperParams,
    Hyperbox,
    MixedPattern,
    absorb_pattern,
    create_point_hyperbox,
    restore_box,
    snapshot_box,
)
from .predictor import Prediction, predict, predict_batch

__version__ = "0.1.0"
