"""Tabular ground truth: import/export, synthetic spaces, splits, query budget."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .arch import (FIXED_GRAPH, Architecture, SpaceSpec, canonical_key, iter_space,
                   random_architecture, space_size, validate)
from .errors import (BudgetExhausted, DuplicateKey, ExhaustedSpace, InvalidArch,
                     InvalidPortion, ParseError, UnknownKey)

UNITS = {"fraction": 1.0, "percent": 100.0}
CSV_FIELDS = ["id", "num_nodes", "adjacency_bits", "ops", "val", "test", "units"]
VAL_NOISE = 0.01


@dataclass(frozen=True)
class PerfRecord:
    arch: Architecture
    val_perf: float
    test_perf: float
    id: str = ""

    @property
    def key(self) -> str:
        return canonical_key(self.arch)


class BenchTable:
    """Immutable architecture -> performance table, indexed by canonical key."""

    def __init__(self, spec: SpaceSpec, records):
        self.spec = spec
        self.records = tuple(records)
        index = {}
        for pos, rec in enumerate(self.records):
            key = rec.key
            if key in index:
                raise DuplicateKey(key)
            index[key] = pos
        self.index = index
        self._keys = tuple(index)
        self.val = np.array([r.val_perf for r in self.records])
        self.test = np.array([r.test_perf for r in self.records])
        self.val.setflags(write=False)
        self.test.setflags(write=False)

    def __len__(self):
        return len(self.records)

    def __contains__(self, key):
        return key in self.index

    @property
    def keys(self) -> tuple:
        return self._keys

    def record(self, key: str) -> PerfRecord:
        try:
            return self.records[self.index[key]]
        except KeyError:
            raise UnknownKey(key) from None

    def position(self, key: str) -> int:
        try:
            return self.index[key]
        except KeyError:
            raise UnknownKey(key) from None

    def best_key(self, by: str = "val") -> str:
        values = self.val if by == "val" else self.test
        return self._keys[int(np.argmax(values))]


@dataclass
class QueryLedger:
    budget: int
    spent: int = 0
    queried_keys: set = field(default_factory=set)

    @property
    def remaining(self) -> int:
        return self.budget - self.spent


def query(table: BenchTable, key: str, ledger: QueryLedger) -> PerfRecord:
    """Look up ``key``, charging the ledger on first access only."""
    rec = table.record(key)
    if key not in ledger.queried_keys:
        if ledger.spent >= ledger.budget:
            raise BudgetExhausted(f"budget {ledger.budget} spent; cannot query {key!r}")
        ledger.queried_keys.add(key)
        ledger.spent += 1
    return rec


def _portion_count(portion, n: int) -> int:
    # decimal-exact so 0.3% of 1000 is 3, not floor(2.9999...)
    return max(1, math.floor(Fraction(str(portion)) * n / 100))


def split(table: BenchTable, portion: float, seed: int):
    """Seeded uniform train sample of ``max(1, floor(portion*N/100))`` keys.

    Returns ``(train_keys, holdout_keys)``; holdout keeps table order.
    """
    if not (isinstance(portion, (int, float)) and 0 < portion <= 100):
        raise InvalidPortion(f"portion must be in (0, 100], got {portion!r}")
    n = len(table)
    k = _portion_count(portion, n)
    picks = np.random.default_rng(seed).choice(n, size=k, replace=False)
    chosen = set(int(i) for i in picks)
    keys = table.keys
    return [keys[i] for i in picks], [keys[i] for i in range(n) if i not in chosen]


@dataclass(frozen=True)
class SynthSpec:
    """Seeded synthetic space.

    Performance mixes a smooth term (sum of per-op scores) with pairwise
    interaction noise between node (position, op) pairs and, for dense
    DAGs, between the ops at either end of each edge; ``ruggedness`` is the
    weight of the interaction term.
    """

    spec: SpaceSpec
    size: int
    seed: int = 0
    ruggedness: float = 0.3

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("size must be >= 2")
        if not 0 <= self.ruggedness <= 1:
            raise ValueError("ruggedness must be in [0, 1]")


class SynthScorer:
    """The noiseless ground-truth function of a :class:`SynthSpec`."""

    def __init__(self, s: SynthSpec):
        spec = s.spec
        rng = np.random.default_rng([s.seed, 0x5EED])
        n, v = spec.max_nodes, len(spec.op_vocabulary)
        self.spec = spec
        self.ruggedness = s.ruggedness
        self.op_index = {op: k for k, op in enumerate(spec.op_vocabulary)}
        op_scores = rng.standard_normal(v)
        if spec.io_ops is not None:
            for op in spec.io_ops:
                op_scores[self.op_index[op]] = 0.0
        self.op_scores = op_scores
        self.node_pair = rng.standard_normal((n, n, v, v))
        self.edge_pair = rng.standard_normal((v, v))

    def smooth(self, arch: Architecture) -> float:
        """Sum of per-op scores over the cell's nodes."""
        return float(sum(self.op_scores[self.op_index[op]] for op in arch.ops))

    def interaction(self, arch: Architecture) -> float:
        idx = [self.op_index[op] for op in arch.ops]
        n = arch.num_nodes
        iu, ju = np.triu_indices(n, 1)
        terms = self.node_pair[iu, ju, np.take(idx, iu), np.take(idx, ju)]
        total = float(terms.sum()) / math.sqrt(len(iu))
        if self.spec.edge_rule != FIXED_GRAPH:
            ei, ej = np.nonzero(arch.adjacency)
            if len(ei):
                e = self.edge_pair[np.take(idx, ei), np.take(idx, ej)]
                total += float(e.sum()) / math.sqrt(len(ei))
        return total

    def test_perf(self, arch: Architecture) -> float:
        free = max(1, arch.num_nodes - (2 if self.spec.io_ops else 0))
        z = ((1 - self.ruggedness) * self.smooth(arch) / math.sqrt(free)
             + self.ruggedness * self.interaction(arch))
        # gentle slope: the top of the table stays spread out well beyond the
        # val/test noise, so the best architectures are distinguishable
        return 0.3 + 0.7 / (1.0 + math.exp(-0.8 * z))


def synth_generate(s: SynthSpec) -> BenchTable:
    """Deterministic synthetic table of ``s.size`` distinct architectures.

    ``test_perf`` lies in (0.3, 1.0) and is a monotone function of the op-score
    sum when ruggedness is 0; ``val_perf`` adds uniform noise of amplitude 0.01.
    """
    spec = s.spec
    total = space_size(spec)
    if total is not None and s.size > total:
        raise ExhaustedSpace(f"requested {s.size} architectures, space has {total}")
    rng = np.random.default_rng(s.seed)
    if total is not None and s.size * 2 > total:
        everything = list(iter_space(spec))
        archs = [everything[i] for i in rng.choice(total, size=s.size, replace=False)]
    else:
        seen, archs = set(), []
        tries = 0
        while len(archs) < s.size:
            a = random_architecture(spec, rng)
            tries += 1
            k = canonical_key(a)
            if k not in seen:
                seen.add(k)
                archs.append(a)
            elif tries > 50 * s.size:
                raise ExhaustedSpace(f"only {len(archs)} distinct architectures found")
    scorer = SynthScorer(s)
    noise = np.random.default_rng([s.seed, 0x0A1]).uniform(-VAL_NOISE, VAL_NOISE, size=len(archs))
    recs = []
    for k, a in enumerate(archs):
        t = scorer.test_perf(a)
        v = min(1.0, max(0.0, t + float(noise[k])))
        recs.append(PerfRecord(a, v, t, id=f"synth-{k}"))
    return BenchTable(spec, recs)


def _norm_perf(value, units, line):
    try:
        scale = UNITS[units]
    except KeyError:
        raise ParseError(f"units must be one of {sorted(UNITS)}, got {units!r}", line) from None
    x = float(value) / scale
    if not math.isfinite(x):
        raise ParseError(f"non-finite performance {value!r}", line)
    return min(1.0, max(0.0, x))


def _make_record(spec, rid, n, adj, ops, val, test, units, line):
    try:
        arch = Architecture(int(n), np.array(adj, dtype=bool).reshape(int(n), int(n)), ops)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"bad architecture: {exc}", line) from None
    problems = validate(arch, spec)
    if problems:
        raise InvalidArch(problems, f"line {line}")
    return PerfRecord(arch, _norm_perf(val, units, line), _norm_perf(test, units, line), str(rid))


def space_sidecar(path) -> Path:
    return Path(str(path) + ".space.json")


def _resolve_format(path, fmt):
    if fmt is not None:
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise ValueError(f"cannot infer format from {path!r}; pass jsonl or csv")


def load(path, spec: Optional[SpaceSpec] = None, fmt: Optional[str] = None) -> BenchTable:
    """Read a JSONL or CSV table.

    Without ``spec`` the space is read from the ``<path>.space.json`` sidecar
    written by :func:`save`.
    """
    fmt = _resolve_format(path, fmt)
    if spec is None:
        side = space_sidecar(path)
        if not side.exists():
            raise FileNotFoundError(f"no space given and no sidecar {side}")
        spec = SpaceSpec.from_dict(json.loads(side.read_text()))
    records = []
    with open(path, newline="" if fmt == "csv" else None) as fh:
        if fmt == "jsonl":
            for line, text in enumerate(fh, 1):
                if not text.strip():
                    continue
                try:
                    d = json.loads(text)
                    rec = _make_record(spec, d["id"], d["num_nodes"], d["adjacency"], d["ops"],
                                       d["val"], d["test"], d.get("units", "fraction"), line)
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ParseError(f"malformed record ({exc.__class__.__name__}: {exc})",
                                     line) from None
                records.append(rec)
        else:
            reader = csv.DictReader(fh)
            missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise ParseError(f"missing CSV columns {sorted(missing)}", 1)
            for row in reader:
                line = reader.line_num
                try:
                    n = int(row["num_nodes"])
                    bits = row["adjacency_bits"]
                    if len(bits) != n * n or set(bits) - {"0", "1"}:
                        raise ValueError("adjacency_bits must be n*n characters of 0/1")
                    adj = [c == "1" for c in bits]
                    rec = _make_record(spec, row["id"], n, adj, row["ops"].split("|"),
                                       row["val"], row["test"], row["units"], line)
                except (ValueError, TypeError) as exc:
                    raise ParseError(str(exc), line) from None
                records.append(rec)
    return BenchTable(spec, records)


def save(table: BenchTable, path, fmt: Optional[str] = None, sidecar: bool = True) -> None:
    """Write ``table`` with fraction units; floats use shortest round-trip repr."""
    fmt = _resolve_format(path, fmt)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        if fmt == "jsonl":
            for rec in table.records:
                d = {"id": rec.id, "num_nodes": rec.arch.num_nodes,
                     "adjacency": rec.arch.adjacency.astype(int).tolist(),
                     "ops": list(rec.arch.ops), "val": rec.val_perf, "test": rec.test_perf,
                     "units": "fraction"}
                fh.write(json.dumps(d) + "\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for rec in table.records:
                bits = "".join("1" if b else "0" for b in rec.arch.adjacency.ravel())
                w.writerow([rec.id, rec.arch.num_nodes, bits, "|".join(rec.arch.ops),
                            repr(rec.val_perf), repr(rec.test_perf), "fraction"])
    if sidecar:
        space_sidecar(path).write_text(json.dumps(table.spec.to_dict(), indent=1) + "\n")
