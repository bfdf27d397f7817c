"""Predictor-guided evolutionary search with a piecewise loss, plus baselines.

The search loop queries a random initial population, then repeatedly trains
a predictor on everything queried so far (with the loss the schedule picks
for that iteration), mutates the best queried architectures, and spends
queries on the candidates the predictor ranks highest.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .arch import canonical_key, encode, neighbors
from .bench import BenchTable, QueryLedger, query
from .errors import ExhaustedNeighborhood
from .losses import LossSpec, PwSchedule, pw_select
from .metrics import derive_seed, fmt_num
from .nn import TrainConfig, fit, init_predictor, predictor_scorer

# warm -> main loss pairings recommended per task family, with query budgets
PRESETS = {
    "nb201-like": (PwSchedule(LossSpec("hinge_rank"), LossSpec("mape"), 5), 100),
    "nb101-like": (PwSchedule(LossSpec("listmle"), LossSpec("warp"), 5), 150),
    "transnas-jigsaw-like": (PwSchedule(LossSpec("mse"), LossSpec("exp_weighted"), 5), 50),
    "transnas-other": (PwSchedule(LossSpec("hinge_rank"), LossSpec("warp"), 5), 50),
    "darts-like": (PwSchedule(LossSpec("hinge_rank"), LossSpec("mape"), 5), 100),
}


def preset(name: str, warm_iters: Optional[int] = None) -> PwSchedule:
    try:
        schedule, _ = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return schedule if warm_iters is None else replace(schedule, warm_iters=warm_iters)


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 100
    init_size: int = 20
    iters: int = 1000
    candidates_per_iter: int = 100
    parents_per_iter: int = 10
    queries_per_iter: int = 5
    schedule: Union[PwSchedule, LossSpec] = field(default_factory=lambda: preset("nb201-like"))
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    warm_start: bool = False

    def __post_init__(self):
        for name in ("budget", "init_size", "iters", "candidates_per_iter",
                     "parents_per_iter", "queries_per_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.init_size > self.budget:
            raise ValueError("init_size must not exceed budget")


@dataclass
class IterRecord:
    iter: int
    loss: Optional[LossSpec]
    queried: list
    spent: int
    best_val: float
    best_test: float

    @property
    def loss_label(self) -> str:
        return self.loss.label if self.loss is not None else "-"


@dataclass
class SearchTrace:
    method: str
    seed: int
    records: list = field(default_factory=list)
    best_key: str = ""
    best_val: float = float("-inf")
    best_test: float = float("nan")
    spent: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "seed", "iter", "loss", "spent", "best_val", "best_test"])
        for r in self.records:
            w.writerow([self.method, self.seed, r.iter, r.loss_label, r.spent,
                        fmt_num(r.best_val), fmt_num(r.best_test)])
        w.writerow([self.method, self.seed, "final", self.best_key, self.spent,
                    fmt_num(self.best_val), fmt_num(self.best_test)])
        return buf.getvalue()


class _Tracker:
    def __init__(self, table: BenchTable, budget: int):
        self.table = table
        self.ledger = QueryLedger(budget)
        self.order = []          # queried keys in query order
        self.best_key = None

    def ask(self, key):
        rec = query(self.table, key, self.ledger)
        if key not in self.order:
            self.order.append(key)
            best = None if self.best_key is None else self.table.record(self.best_key)
            if best is None or rec.val_perf > best.val_perf:
                self.best_key = key
        return rec

    def snapshot(self, trace, it, loss, keys):
        best = self.table.record(self.best_key)
        trace.records.append(IterRecord(it, loss, list(keys), self.ledger.spent,
                                        best.val_perf, best.test_perf))

    def finish(self, trace):
        best = self.table.record(self.best_key)
        trace.best_key, trace.best_val, trace.best_test = self.best_key, best.val_perf, best.test_perf
        trace.spent = self.ledger.spent
        return trace


def train_scorer(table, records, loss, train_cfg: TrainConfig, seed: int, init=None):
    """Fit a fresh (or ``init``-copied) predictor; return (scorer, predictor)."""
    spec = table.spec
    if init is None:
        p = init_predictor(train_cfg.backbone, spec, train_cfg.dims(), seed)
    else:
        p = init.copy()
    train = [(encode(r.arch, spec), r.val_perf) for r in records]
    fit(p, train, loss, replace(train_cfg, seed=seed))
    arch_scorer = predictor_scorer(p, spec)
    return (lambda recs: arch_scorer([r.arch for r in recs])), p


def oracle_factory(attr: str = "val_perf") -> Callable:
    """Predictor stub that scores with stored performance (for sanity checks)."""
    def factory(table, records, loss, iteration, seed):
        return lambda recs: np.array([getattr(r, attr) for r in recs])
    return factory


def _shuffled_neighbors(table, key, exclude, rng):
    nbrs = [canonical_key(a) for a in neighbors(table.record(key).arch, table.spec)]
    nbrs = [k for k in nbrs if k in table and k not in exclude]
    return [nbrs[i] for i in rng.permutation(len(nbrs))]


def _round_robin(pools, want):
    """Take one new key per pool in turn until ``want`` keys or all pools run dry.

    Returns ``(keys, source)`` with ``source[k]`` the pool index ``k`` came from.
    """
    chosen, source = [], {}
    cursor = [0] * len(pools)
    progressed = True
    while len(chosen) < want and progressed:
        progressed = False
        for i, pool in enumerate(pools):
            while cursor[i] < len(pool):
                k = pool[cursor[i]]
                cursor[i] += 1
                if k not in source:
                    source[k] = i
                    chosen.append(k)
                    progressed = True
                    break
            if len(chosen) >= want:
                break
    return chosen, source


def _candidates(table, queried, parents, want, rng):
    """Distinct unqueried in-table mutants of ``parents``, round-robin.

    Slots the parents' neighbourhoods cannot fill are sampled uniformly
    from the rest of the table.
    """
    pools = [_shuffled_neighbors(table, key, queried, rng) for key in parents]
    chosen, seen = _round_robin(pools, want)
    if len(chosen) < want:
        rest = [k for k in table.keys if k not in queried and k not in seen]
        extra = rng.permutation(len(rest))[:want - len(chosen)]
        chosen.extend(rest[i] for i in sorted(extra))
    return chosen


def pwlnas_search(table: BenchTable, cfg: SearchConfig,
                  predictor_factory: Optional[Callable] = None) -> SearchTrace:
    """Run the piecewise-loss predictor-guided evolutionary search.

    ``predictor_factory(table, queried_records, loss, iteration, seed)``
    replaces predictor training when given; it must return a callable that
    scores a list of :class:`PerfRecord`.
    """
    rng = np.random.default_rng(cfg.seed)
    tracker = _Tracker(table, cfg.budget)
    trace = SearchTrace("pwlnas", cfg.seed)
    init = [table.keys[i] for i in rng.choice(len(table), size=min(cfg.init_size, len(table)),
                                             replace=False)]
    for key in init:
        tracker.ask(key)
    tracker.snapshot(trace, 0, None, init)
    prev = None
    for t in range(1, cfg.iters + 1):
        remaining = tracker.ledger.remaining
        unqueried = len(table) - len(tracker.order)
        if remaining <= 0 or unqueried <= 0:
            break
        loss = pw_select(cfg.schedule, t)
        recs = [table.record(k) for k in tracker.order]
        seed = derive_seed(cfg.seed, "iter", t)
        if predictor_factory is not None:
            scorer = predictor_factory(table, recs, loss, t, seed)
        else:
            scorer, p = train_scorer(table, recs, loss, cfg.train_cfg, seed,
                                     prev if cfg.warm_start else None)
            prev = p
        by_val = sorted(tracker.order, key=lambda k: -table.record(k).val_perf)
        parents = by_val[:cfg.parents_per_iter]
        cands = _candidates(table, set(tracker.order), parents, min(cfg.candidates_per_iter, unqueried), rng)
        scores = np.asarray(scorer([table.record(k) for k in cands]), dtype=float)
        n_query = min(cfg.queries_per_iter, remaining, len(cands))
        picks = np.argsort(-scores, kind="stable")[:n_query]
        batch = [cands[i] for i in picks]
        for key in batch:
            tracker.ask(key)
        tracker.snapshot(trace, t, loss, batch)
    return tracker.finish(trace)


def random_search(table: BenchTable, budget: int, seed: int = 0) -> SearchTrace:
    """Uniform queries without replacement; one trace row per query."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    tracker = _Tracker(table, budget)
    trace = SearchTrace("random", seed)
    for it, idx in enumerate(rng.permutation(len(table))[:budget], 1):
        key = table.keys[idx]
        tracker.ask(key)
        tracker.snapshot(trace, it, None, [key])
    return tracker.finish(trace)


@dataclass
class MutationTestSet:
    keys: list
    seed_keys: list
    init_keys: list
    parent: dict  # mutant key -> seed key it was derived from


def build_mutation_testset(table: BenchTable, init_n: int = 50, seeds_top: int = 10,
                           out_n: int = 200, rng=None) -> MutationTestSet:
    """Single-edit neighbours of the best seeds of a random initial set.

    ``init_n`` architectures are drawn uniformly; the ``seeds_top`` best by
    validation performance become seeds. Seeds are visited round-robin, each
    contributing its next unused in-table neighbour (neighbours shuffled per
    seed), until ``out_n`` distinct non-seed mutants are collected.
    """
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if init_n > len(table):
        raise ExhaustedNeighborhood(0, out_n)
    init_keys = [table.keys[i] for i in rng.choice(len(table), size=init_n, replace=False)]
    seeds = sorted(init_keys, key=lambda k: -table.record(k).val_perf)[:seeds_top]
    pools = [_shuffled_neighbors(table, key, set(seeds), rng) for key in seeds]
    chosen, source = _round_robin(pools, out_n)
    if len(chosen) < out_n:
        raise ExhaustedNeighborhood(len(chosen), out_n)
    return MutationTestSet(chosen, seeds, init_keys, {k: seeds[source[k]] for k in chosen})
