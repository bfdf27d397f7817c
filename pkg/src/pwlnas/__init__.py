"""Loss-function toolkit for NAS performance predictors.

Modules
-------
arch     search-space description, encodings, mutation
bench    tabular ground truth, synthetic spaces, splits, query budget
nn       numpy GCN/MLP predictors with hand-written gradients
losses   regression, ranking and weighted losses, piecewise schedules
metrics  Kendall tau, Precision@T, N@K, portion sweeps
search   predictor-guided evolutionary search and baselines
cli      batch experiment driver (``python -m pwlnas``)
"""

from .arch import Architecture, SpaceSpec, canonical_key, encode, nb101_space, nb201_space
from .bench import BenchTable, PerfRecord, SynthSpec, load, save, split, synth_generate
from .losses import LossSpec, PwSchedule, pw_select
from .metrics import RankedEval, evaluate, kendall_tau, n_at_k, precision_at_t, run_sweep
from .nn import TrainConfig, fit, forward, grad_check, init_predictor
from .search import SearchConfig, build_mutation_testset, preset, pwlnas_search, random_search

__version__ = "0.1.0"

__all__ = [
    "Architecture", "SpaceSpec", "canonical_key", "encode", "nb101_space", "nb201_space",
    "BenchTable", "PerfRecord", "SynthSpec", "load", "save", "split", "synth_generate",
    "LossSpec", "PwSchedule", "pw_select",
    "RankedEval", "evaluate", "kendall_tau", "n_at_k", "precision_at_t", "run_sweep",
    "TrainConfig", "fit", "forward", "grad_check", "init_predictor",
    "SearchConfig", "build_mutation_testset", "preset", "pwlnas_search", "random_search",
]
