"""Fair node scoring by editing the priors of graph filters."""

from .baselines import fairwalk_normalize, lfpro, mult
from .editing import EditMechanism, EditParams, edit_priors, tune
from .filters import FilterSpec, apply_filter, heat_kernel, ppr, strictness_bound
from .graph import Graph, NormalizedAdjacency, load_edge_list, load_labels, normalize, propagate
from .metrics import ObjectiveSpec, SensitiveGroups, auc, objective, prule, prule_on_subset
from .optimizer import OptimizerSettings, minimize
from .stats import friedman, nemenyi

__version__ = "0.1.0"

__all__ = [
    "EditMechanism",
    "EditParams",
    "FilterSpec",
    "Graph",
    "NormalizedAdjacency",
    "ObjectiveSpec",
    "OptimizerSettings",
    "SensitiveGroups",
    "apply_filter",
    "auc",
    "edit_priors",
    "fairwalk_normalize",
    "friedman",
    "heat_kernel",
    "lfpro",
    "load_edge_list",
    "load_labels",
    "minimize",
    "mult",
    "nemenyi",
    "normalize",
    "objective",
    "ppr",
    "prule",
    "prule_on_subset",
    "propagate",
    "strictness_bound",
    "tune",
]
