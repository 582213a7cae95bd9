"""Compact weighted rule sets distilled from boosted tree ensembles."""

__version__ = "0.1.0"

from .approx import (CbcdState, CutPools, PathConfig, PathResult, active_set_fit,
                     block_solve, cbcd_fit, fit_path, lambda_grid, select_k,
                     state_selection)
from .dataio import (Condition, Dataset, Rule, RuleModel, SchemaVersionError,
                     load_csv, load_ensemble, load_rule_model, save_ensemble,
                     save_rule_model, split, write_csv, write_path_csv)
from .ensemble import Tree, TreeEnsemble, TreeNode, fit_gbt, predict, r2
from .exact import ExactConfig, ExactResult, solve_exact, warm_start
from .relax import RelaxConfig, RelaxResult, relax_and_round, solve_relaxation
from .rulespace import (AttributeScheme, RuleSpace, Selection, attribute_values,
                        build_rulespace, predict_rule_model, render_rules,
                        selection_to_rule_model, validate_rule_model)

__all__ = [
    "AttributeScheme", "CbcdState", "Condition", "CutPools", "Dataset",
    "ExactConfig", "ExactResult", "PathConfig", "PathResult", "RelaxConfig",
    "RelaxResult", "Rule", "RuleModel", "RuleSpace", "SchemaVersionError",
    "Selection", "Tree", "TreeEnsemble", "TreeNode", "active_set_fit",
    "attribute_values", "block_solve", "build_rulespace", "cbcd_fit",
    "fit_gbt", "fit_path", "lambda_grid", "load_csv", "load_ensemble",
    "load_rule_model", "predict", "predict_rule_model", "r2",
    "relax_and_round", "render_rules", "save_ensemble", "save_rule_model",
    "select_k", "selection_to_rule_model", "solve_exact", "solve_relaxation",
    "split", "state_selection", "validate_rule_model", "warm_start",
    "write_csv", "write_path_csv", "__version__",
]
