"""Ranking metrics for predictors and the portion-sweep protocol."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidK, InvalidT, TooFew

DEFAULT_TS = (0.5, 1, 5)
DEFAULT_KS = (10,)


def ranks_desc(values) -> np.ndarray:
    """Rank 1 = largest value; equal values ranked by ascending index."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(-v, kind="stable")
    r = np.empty(len(v), dtype=np.int64)
    r[order] = np.arange(1, len(v) + 1)
    return r


@dataclass(frozen=True)
class RankedEval:
    pred_scores: np.ndarray
    gt_perfs: np.ndarray
    pred_ranks: np.ndarray
    actual_ranks: np.ndarray

    @classmethod
    def build(cls, pred_scores, gt_perfs) -> "RankedEval":
        p = np.asarray(pred_scores, dtype=float)
        g = np.asarray(gt_perfs, dtype=float)
        if p.shape != g.shape or p.ndim != 1:
            raise ValueError(f"score/perf shapes differ: {p.shape} vs {g.shape}")
        return cls(p, g, ranks_desc(p), ranks_desc(g))

    @property
    def n(self) -> int:
        return len(self.pred_scores)


def concordance_bruteforce(x, y):
    """``(n_c, n_d)`` by enumerating all pairs; tied pairs count in neither."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_c = n_d = 0
    for i in range(len(x)):
        prod = np.sign(x[i] - x[i + 1:]) * np.sign(y[i] - y[i + 1:])
        n_c += int(np.sum(prod > 0))
        n_d += int(np.sum(prod < 0))
    return n_c, n_d


def _tau_from_counts(n_c, n_d, n):
    return 2.0 * (n_c - n_d) / (n * (n - 1))


def kendall_tau_bruteforce(x, y) -> float:
    n = len(x)
    if n < 2:
        raise TooFew("Kendall's tau needs at least two items")
    return _tau_from_counts(*concordance_bruteforce(x, y), n)


def _count_inversions(seq) -> int:
    """Strict inversions ``i < j, seq[i] > seq[j]`` via a Fenwick tree."""
    seq = np.asarray(seq)
    _, dense = np.unique(seq, return_inverse=True)
    size = int(dense.max()) + 1 if len(dense) else 0
    tree = [0] * (size + 1)
    inv = 0
    seen = 0
    for v in dense.tolist():
        # count already-seen values <= v, the rest are strictly greater
        i, le = v + 1, 0
        while i > 0:
            le += tree[i]
            i -= i & -i
        inv += seen - le
        i = v + 1
        while i <= size:
            tree[i] += 1
            i += i & -i
        seen += 1
    return inv


def _tie_pairs(values) -> int:
    _, counts = np.unique(values, axis=0, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def concordance(x, y):
    """``(n_c, n_d)`` in O(n log n): sort by (x, y), count inversions of y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    order = np.lexsort((y, x))
    n_d = _count_inversions(y[order])
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(x)
    n2 = _tie_pairs(y)
    n3 = _tie_pairs(np.stack([x, y], axis=1))
    n_c = n0 - n1 - n2 + n3 - n_d
    return n_c, n_d


def kendall_tau(ev, gt_perfs=None) -> float:
    """``2 (n_c - n_d) / (n (n - 1))`` on raw values (tau-a).

    Accepts a :class:`RankedEval` or two vectors.
    """
    if gt_perfs is None:
        x, y = ev.pred_scores, ev.gt_perfs
    else:
        x, y = ev, gt_perfs
    n = len(x)
    if n < 2:
        raise TooFew("Kendall's tau needs at least two items")
    return _tau_from_counts(*concordance(x, y), n)


def top_count(T, n: int) -> int:
    """``M = max(1, floor(T * n / 100))``, evaluated exactly in decimal."""
    return max(1, math.floor(Fraction(str(T)) * n / 100))


def precision_at_t(ev: RankedEval, T) -> float:
    """Percentage of the predicted top-T% that is also in the actual top-T%."""
    if not 0 < T <= 100:
        raise InvalidT(f"T must be in (0, 100], got {T!r}")
    m = top_count(T, ev.n)
    hits = int(np.sum((ev.actual_ranks <= m) & (ev.pred_ranks <= m)))
    return 100.0 * hits / m


def n_at_k(ev: RankedEval, K: int) -> int:
    """Best actual rank among the K highest-scored architectures."""
    if not 1 <= K <= ev.n:
        raise InvalidK(f"K must be in [1, {ev.n}], got {K!r}")
    return int(ev.actual_ranks[ev.pred_ranks <= K].min())


@dataclass
class MetricReport:
    tau: float
    precision_at: dict
    n_at: dict
    n_eval: int


def report(ev: RankedEval, Ts=DEFAULT_TS, Ks=DEFAULT_KS) -> MetricReport:
    return MetricReport(
        tau=kendall_tau(ev),
        precision_at={T: precision_at_t(ev, T) for T in Ts},
        n_at={K: n_at_k(ev, K) for K in Ks if K <= ev.n},
        n_eval=ev.n,
    )


def evaluate(scorer, table, eval_keys=None, Ts=DEFAULT_TS, Ks=DEFAULT_KS) -> MetricReport:
    """Score ``eval_keys`` (default: the whole table) and rank against test performance.

    ``scorer`` is a :class:`~pwlnas.nn.Predictor` or any callable mapping a
    list of :class:`~pwlnas.bench.PerfRecord` to scores.
    """
    from .nn import Predictor, predictor_scorer

    keys = list(table.keys) if eval_keys is None else list(eval_keys)
    recs = [table.record(k) for k in keys]
    if isinstance(scorer, Predictor):
        arch_scorer = predictor_scorer(scorer, table.spec)
        scores = arch_scorer([r.arch for r in recs])
    else:
        scores = np.asarray(scorer(recs), dtype=float)
    gt = np.array([r.test_perf for r in recs])
    return report(RankedEval.build(scores, gt), Ts, Ks)


# --- portion sweeps -------------------------------------------------------

def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


def fmt_num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


@dataclass
class SweepResult:
    space: str
    Ts: tuple
    Ks: tuple
    rows: list = field(default_factory=list)        # raw per-run rows (dicts)
    aggregates: list = field(default_factory=list)  # one per (portion, loss)

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    def metric_names(self) -> list:
        return (["tau"] + [f"precision_{T:g}" for T in self.Ts]
                + [f"n_at_{K}" for K in self.Ks])

    def columns(self) -> list:
        names = self.metric_names()
        return (["space", "portion", "loss", "run"] + names + ["seed", "agg"]
                + [f"{m}_std" for m in names] + ["status"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for row in self.rows + self.aggregates:
            w.writerow([row.get(c, "") if isinstance(row.get(c, ""), str) else fmt_num(row.get(c))
                        for c in cols])
        return buf.getvalue()


def _metric_row(rep: MetricReport, Ts, Ks) -> dict:
    row = {"tau": rep.tau}
    for T in Ts:
        row[f"precision_{T:g}"] = rep.precision_at[T]
    for K in Ks:
        row[f"n_at_{K}"] = rep.n_at.get(K, math.nan)
    return row


def aggregate(rows, names) -> dict:
    """Mean and population std (ddof=0) of each metric over successful rows."""
    ok = [r for r in rows if r["status"] == "ok"]
    out = {}
    for m in names:
        vals = np.array([float(r[m]) for r in ok])
        out[m] = float(np.mean(vals)) if len(vals) else math.nan
        out[f"{m}_std"] = float(np.std(vals)) if len(vals) else math.nan
    return out


def _sweep_cell(job):
    (table, train_table, portion, loss, run, seed, cfg, Ts, Ks, eval_keys, scorer_factory) = job
    from .bench import split
    from .nn import fit, init_predictor, predictor_scorer
    from .arch import encode
    from dataclasses import replace

    try:
        train_keys, _ = split(train_table, portion, seed)
        recs = [train_table.record(k) for k in train_keys]
        if scorer_factory is not None:
            scorer = scorer_factory(table, recs, loss, seed)
        else:
            p = init_predictor(cfg.backbone, table.spec, cfg.dims(), seed)
            train = [(encode(r.arch, table.spec), r.val_perf) for r in recs]
            fit(p, train, loss, replace(cfg, seed=seed))
            arch_scorer = predictor_scorer(p, table.spec)
            scorer = lambda rs: arch_scorer([r.arch for r in rs])  # noqa: E731
        rep = evaluate(scorer, table, eval_keys, Ts, Ks)
        row = _metric_row(rep, Ts, Ks)
        row["status"] = "ok"
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        row = {"status": f"error: {exc.__class__.__name__}: {exc}".replace("\n", " ")}
    return row


def run_sweep(table, portions: Sequence[float], repeats: int, losses, cfg,
              Ts=DEFAULT_TS, Ks=DEFAULT_KS, base_seed: int = 0, space_name: str = None,
              eval_keys=None, jobs: int = 1,
              scorer_factory: Optional[Callable] = None, train_table=None) -> SweepResult:
    """Split -> fit -> evaluate for every (portion, loss, run).

    Per-run seeds are ``derive_seed(base_seed, portion, loss label, run)`` and
    re-randomize both the split and the predictor initialization. ``losses``
    holds :class:`LossSpec` or :class:`PwSchedule` entries. Training splits
    are drawn from ``train_table`` when given (e.g. a pool disjoint from
    ``eval_keys``), otherwise from ``table``.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    Ts, Ks = tuple(Ts), tuple(Ks)
    res = SweepResult(space_name or table.spec.name, Ts, Ks)
    cells = []
    for portion in portions:
        for loss in losses:
            for run in range(repeats):
                seed = derive_seed(base_seed, float(portion), loss.label, run)
                cells.append((portion, loss, run, seed))
    pool = table if train_table is None else train_table
    jobs_args = [(table, pool, p, l, r, s, cfg, Ts, Ks, eval_keys, scorer_factory)
                 for p, l, r, s in cells]
    if jobs > 1 and scorer_factory is None:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_cell, jobs_args))
    else:
        results = [_sweep_cell(a) for a in jobs_args]
    names = res.metric_names()
    for (portion, loss, run, seed), row in zip(cells, results):
        row.update(space=res.space, portion=portion, loss=loss.label, run=run, seed=seed, agg=0)
        res.rows.append(row)
    for portion in portions:
        for loss in losses:
            group = [r for r in res.rows if r["portion"] == portion and r["loss"] == loss.label]
            agg = aggregate(group, names)
            agg.update(space=res.space, portion=portion, loss=loss.label, run="",
                       seed=derive_seed(base_seed, float(portion), loss.label), agg=1,
                       status="ok" if all(r["status"] == "ok" for r in group) else "partial")
            res.aggregates.append(agg)
    return res
