"""Online multivariate linear regression with hierarchical forecasting.

The package provides closed-form online ridge-style learners (vector and
matrix parameters, with Woodbury and Kronecker fast paths), tree-structured
aggregation and projection-based reconciliation, regret evaluation with
executable bound formulas, and a dataset/experiment harness with a CLI.
"""

from .datasets import (
    DatasetBundle,
    FeatureRecipe,
    ingest_csv,
    make_features,
    synth_generate,
)
from .errors import MultivawError
from .evaluation import (
    RegretReport,
    best_competitor,
    regret,
    regret_bound_general,
    regret_bound_ohf,
    regret_bound_ridge,
)
from .hierarchy import (
    HierarchySpec,
    MetaVAW,
    SummingMatrix,
    build_summing_matrix,
    coherence_check,
    metavaw_equivalence_audit,
    ohf_feature_matrix,
)
from .learners import (
    FTRL,
    OGD,
    VAW,
    ConstantMatrix,
    ExplicitSequence,
    KroneckerConstant,
    KroneckerMultiVAW,
    LearnerState,
    MultiVAW,
    RegularizationSchedule,
    ScaledIdentity,
    StepOutcome,
)

__version__ = "0.1.0"

__all__ = [
    "ConstantMatrix",
    "DatasetBundle",
    "ExplicitSequence",
    "FTRL",
    "FeatureRecipe",
    "HierarchySpec",
    "KroneckerConstant",
    "KroneckerMultiVAW",
    "LearnerState",
    "MetaVAW",
    "MultiVAW",
    "MultivawError",
    "OGD",
    "RegretReport",
    "RegularizationSchedule",
    "ScaledIdentity",
    "StepOutcome",
    "SummingMatrix",
    "VAW",
    "best_competitor",
    "build_summing_matrix",
    "coherence_check",
    "ingest_csv",
    "make_features",
    "metavaw_equivalence_audit",
    "ohf_feature_matrix",
    "regret",
    "regret_bound_general",
    "regret_bound_ohf",
    "regret_bound_ridge",
    "synth_generate",
]
