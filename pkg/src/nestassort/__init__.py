"""Dynamic assortment planning under nested logit choice."""

from .adversarial import AdversarialSpec, build_adversarial_instance, deviation_gap_check, kl_report
from .harness import ExperimentConfig, emit_csv, generate_instance, run_cell, run_experiment, summarize
from .level_sets import INFINITY, SingletonCatalog, build_catalog, true_value_table
from .model import NestedLogitInstance, choice_probabilities, expected_revenue, sample_choice
from .optimize import SingletonValueTable, binary_search_optimum, brute_force_full_space, brute_force_optimum
from .policy import NestedUCB, PolicyConfig, RegretTrace, optimal_revenue, run_policy

__version__ = "0.1.0"

__all__ = [
    "AdversarialSpec", "ExperimentConfig", "INFINITY", "NestedLogitInstance", "NestedUCB", "PolicyConfig",
    "RegretTrace", "SingletonCatalog", "SingletonValueTable", "binary_search_optimum", "brute_force_full_space",
    "brute_force_optimum", "build_adversarial_instance", "build_catalog", "choice_probabilities",
    "deviation_gap_check", "emit_csv", "expected_revenue", "generate_instance", "kl_report", "optimal_revenue",
    "run_cell", "run_experiment", "run_policy", "sample_choice", "summarize", "true_value_table",
]
