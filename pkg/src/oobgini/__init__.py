"""Random forests with out-of-bag penalized Gini variable importance."""

__version__ = "0.1.0"

from .dataset import Categorical, Continuous, Dataset, load_csv, shuffle_feature
from .errors import DomainError, InsufficientOobSupport, OobGiniError, ParseError, SchemaError
from .forest import Forest, ForestParams, bootstrap, fit, oob_error, oob_predict
from .importance import (
    MDI_SPEC,
    PRESETS,
    ImportanceReport,
    PenaltySpec,
    mda,
    mdi,
    node_decrease,
    penalized_impurity,
    pg_importance,
)
from .simlab import SimDesign, SimResult, expectation_test, gen_case, run_study
from .tree import NodeStats, Tree, TreeParams, best_split_categorical, best_split_continuous, gini, grow, route_oob

__all__ = [
    "Categorical", "Continuous", "Dataset", "load_csv", "shuffle_feature",
    "DomainError", "InsufficientOobSupport", "OobGiniError", "ParseError", "SchemaError",
    "Forest", "ForestParams", "bootstrap", "fit", "oob_error", "oob_predict",
    "MDI_SPEC", "PRESETS", "ImportanceReport", "PenaltySpec", "mda", "mdi", "node_decrease",
    "penalized_impurity", "pg_importance",
    "SimDesign", "SimResult", "expectation_test", "gen_case", "run_study",
    "NodeStats", "Tree", "TreeParams", "best_split_categorical", "best_split_continuous",
    "gini", "grow", "route_oob",
]
