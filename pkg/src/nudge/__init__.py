"""Fine-tuning of pre-computed embeddings for k-NN retrieval.

Given data record embeddings and labeled training/validation queries, the
solvers move each record within a bounded distance of its original position
to maximize validation top-1 accuracy, then the evaluator measures retrieval
quality (recall, NDCG) on held-out queries.
"""

from importlib import import_module

# The command line pins BLAS threading environment variables before numpy is
# first imported, so this module must not import numpy (or submodules that
# do) at package-import time. Attribute access loads lazily instead.
_EXPORTS = {
    "Aggregates": ".core",
    "CorrectnessVector": ".core",
    "FineTuneReport": ".core",
    "LabelSet": ".core",
    "as_matrix": ".core",
    "compute_aggregates": ".core",
    "correctness": ".core",
    "normalize_rows": ".core",
    "score_all": ".core",
    "unit_rows": ".core",
    "Interval": ".magnitude",
    "SweepResult": ".magnitude",
    "feasibility_intervals": ".magnitude",
    "magnitude_delta": ".magnitude",
    "max_overlap": ".magnitude",
    "nudge_m": ".magnitude",
    "GammaIntervalSet": ".sphere",
    "SphereGeometry": ".sphere",
    "entry_normalize": ".sphere",
    "feasible_caps": ".sphere",
    "nudge_n_exact": ".sphere",
    "nudge_n_grid": ".sphere",
    "prepare_geometry": ".sphere",
    "solve_sqrt_quadratic": ".sphere",
    "sphere_delta": ".sphere",
    "IterativeConfig": ".iterative",
    "nudge_im": ".iterative",
    "nudge_in": ".iterative",
    "MetricReport": ".metrics",
    "evaluate": ".metrics",
    "ndcg_at_k": ".metrics",
    "recall_at_k": ".metrics",
    "top_k": ".metrics",
    "EmbeddingFile": ".fileio",
    "FormatError": ".fileio",
    "read_labels": ".fileio",
    "split_parts": ".fileio",
    "write_labels": ".fileio",
    "METHODS": ".api",
    "finetune": ".api",
}

__all__ = sorted(_EXPORTS)
__version__ = "0.1.0"


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    value = getattr(import_module(module, __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
