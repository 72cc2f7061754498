"""Hierarchical total correlation explanation.

Learns layered discrete latent factors that maximally explain the
multivariate dependence in a data matrix, with certified lower and upper
bounds on total correlation, structure recovery through sparse
column-to-factor weights, and per-sample anomaly scores.
"""

from .data import (
    CONTINUOUS,
    DISCRETE,
    INDEPENDENT,
    SUMMED_OVERLAP,
    BlockGaussianSpec,
    ColumnSchema,
    DataMatrix,
    GroundTruth,
    LatentTreeSpec,
    analytic_block_tc,
    as_data_matrix,
    empirical_joint,
    generate,
    load_csv,
    load_schema,
    schema_compatible,
    write_csv,
)
from .errors import CorexError, DataError, UnsupportedConfigError
from .graph import build_graph, graph_to_dot
from .hierarchy import CorexHierarchy, lift_labels
from .information import (
    JointTable,
    attach_factors,
    conditional_tc,
    entropy,
    mutual_information,
    state_space,
    tc_explained,
    tc_lower_term,
    total_correlation,
)
from .layer import CorexLayer, free_energy, init_labels, update_labels
from .marginals import (
    DiscreteMarginal,
    FactorPrior,
    GaussianMarginal,
    estimate_discrete,
    estimate_gaussian,
    estimate_prior,
    log_ratio,
)
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .structure import alpha_tree, alpha_unique, mutual_information_table

__version__ = "0.1.0"

__all__ = [
    "CONTINUOUS",
    "DISCRETE",
    "INDEPENDENT",
    "SUMMED_OVERLAP",
    "BlockGaussianSpec",
    "ColumnSchema",
    "CorexError",
    "CorexHierarchy",
    "CorexLayer",
    "DataMatrix",
    "DataError",
    "DiscreteMarginal",
    "FactorPrior",
    "GaussianMarginal",
    "GroundTruth",
    "JointTable",
    "LatentTreeSpec",
    "UnsupportedConfigError",
    "alpha_tree",
    "alpha_unique",
    "analytic_block_tc",
    "as_data_matrix",
    "attach_factors",
    "build_graph",
    "conditional_tc",
    "empirical_joint",
    "entropy",
    "estimate_discrete",
    "estimate_gaussian",
    "estimate_prior",
    "free_energy",
    "generate",
    "graph_to_dot",
    "init_labels",
    "lift_labels",
    "load_csv",
    "load_model",
    "load_schema",
    "log_ratio",
    "model_from_dict",
    "model_to_dict",
    "mutual_information",
    "mutual_information_table",
    "save_model",
    "schema_compatible",
    "state_space",
    "tc_explained",
    "tc_lower_term",
    "total_correlation",
    "update_labels",
    "write_csv",
]
