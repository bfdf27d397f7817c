"""Cell architectures: representation, validation, encoding and mutation.

Architectures are node-op DAGs. Node 0 is the input, node ``num_nodes - 1``
the output, and edges only run from lower to higher node index. Spaces whose
operations sit on edges are expected to be converted to node-op form before
they reach this module (see :func:`nb201_space` for the conversion used for
the 201-style cell).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InvalidArch, NoValidMutation

DENSE_DAG = "dense-dag"
FIXED_GRAPH = "fixed-graph-ops-only"
EDGE_RULES = (DENSE_DAG, FIXED_GRAPH)

# enumerating dense-dag spaces is only attempted up to this many edge slots
_MAX_ENUM_EDGE_SLOTS = 15


@dataclass(frozen=True)
class SpaceSpec:
    """A cell search space.

    ``io_ops`` optionally pins the labels carried by the input and output
    node; those labels are then never used on intermediate nodes and are
    never mutated. ``fixed_adjacency`` is required for the fixed-graph rule.
    """

    max_nodes: int
    op_vocabulary: tuple
    edge_rule: str = DENSE_DAG
    fixed_adjacency: Optional[tuple] = None
    io_ops: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "op_vocabulary", tuple(self.op_vocabulary))
        if self.fixed_adjacency is not None:
            fixed = tuple(tuple(int(bool(v)) for v in row) for row in self.fixed_adjacency)
            object.__setattr__(self, "fixed_adjacency", fixed)
        if self.io_ops is not None:
            object.__setattr__(self, "io_ops", tuple(self.io_ops))
        problems = []
        if not self.op_vocabulary:
            problems.append("op_vocabulary is empty")
        if len(set(self.op_vocabulary)) != len(self.op_vocabulary):
            problems.append("op_vocabulary has repeated labels")
        for op in self.op_vocabulary:
            if not isinstance(op, str) or not op or "|" in op:
                problems.append(f"bad op label {op!r} (non-empty string without '|')")
        if self.max_nodes < 2:
            problems.append("max_nodes must be >= 2")
        if self.edge_rule not in EDGE_RULES:
            problems.append(f"edge_rule must be one of {EDGE_RULES}")
        if self.edge_rule == FIXED_GRAPH:
            if self.fixed_adjacency is None:
                problems.append("fixed-graph space needs fixed_adjacency")
            elif len(self.fixed_adjacency) != self.max_nodes:
                problems.append("fixed_adjacency must be max_nodes x max_nodes")
        if self.io_ops is not None:
            if len(self.io_ops) != 2 or any(op not in self.op_vocabulary for op in self.io_ops):
                problems.append("io_ops must be two labels from op_vocabulary")
            elif not self.cell_ops:
                problems.append("no labels left for intermediate nodes")
        if problems:
            raise ValueError("invalid SpaceSpec: " + "; ".join(problems))

    @property
    def cell_ops(self) -> tuple:
        """Labels allowed on intermediate nodes."""
        if self.io_ops is None:
            return self.op_vocabulary
        return tuple(op for op in self.op_vocabulary if op not in self.io_ops)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_nodes": self.max_nodes,
            "op_vocabulary": list(self.op_vocabulary),
            "edge_rule": self.edge_rule,
            "fixed_adjacency": None if self.fixed_adjacency is None
            else [list(r) for r in self.fixed_adjacency],
            "io_ops": None if self.io_ops is None else list(self.io_ops),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceSpec":
        fixed = d.get("fixed_adjacency")
        io = d.get("io_ops")
        return cls(
            max_nodes=int(d["max_nodes"]),
            op_vocabulary=tuple(d["op_vocabulary"]),
            edge_rule=d.get("edge_rule", DENSE_DAG),
            fixed_adjacency=None if fixed is None else tuple(tuple(r) for r in fixed),
            io_ops=None if io is None else tuple(io),
            name=d.get("name", "custom"),
        )


@dataclass(frozen=True, eq=False)
class Architecture:
    """A node-op cell. Equality and hashing go through :func:`canonical_key`."""

    num_nodes: int
    adjacency: np.ndarray
    ops: tuple

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "ops", tuple(self.ops))

    def __eq__(self, other):
        if not isinstance(other, Architecture):
            return NotImplemented
        return canonical_key(self) == canonical_key(other)

    def __hash__(self):
        return hash(canonical_key(self))

    def __repr__(self):
        return f"Architecture({canonical_key(self)!r})"

    def with_op(self, node: int, op: str) -> "Architecture":
        ops = list(self.ops)
        ops[node] = op
        return Architecture(self.num_nodes, self.adjacency, ops)

    def with_edge_toggled(self, i: int, j: int) -> "Architecture":
        adj = self.adjacency.copy()
        adj[i, j] = not adj[i, j]
        return Architecture(self.num_nodes, adj, self.ops)


@dataclass(frozen=True)
class EncodedArch:
    feature_matrix: np.ndarray
    norm_adjacency: np.ndarray
    adjacency: np.ndarray
    flat_vector: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.feature_matrix.shape[0]


def _on_path_mask(adj: np.ndarray) -> np.ndarray:
    """Nodes reachable from node 0 that also reach the last node."""
    n = adj.shape[0]
    fwd = np.zeros(n, dtype=bool)
    fwd[0] = True
    for j in range(1, n):
        fwd[j] = bool(np.any(adj[:j, j] & fwd[:j]))
    bwd = np.zeros(n, dtype=bool)
    bwd[n - 1] = True
    for i in range(n - 2, -1, -1):
        bwd[i] = bool(np.any(adj[i, i + 1:] & bwd[i + 1:]))
    return fwd & bwd


def validate(arch: Architecture, spec: SpaceSpec) -> list:
    """Return the list of violated invariants (empty when valid)."""
    problems = []
    n = arch.num_nodes
    adj = arch.adjacency
    if n < 2:
        problems.append(f"num_nodes {n} < 2")
    if n > spec.max_nodes:
        problems.append(f"num_nodes {n} exceeds max_nodes {spec.max_nodes}")
    if adj.shape != (n, n):
        problems.append(f"adjacency shape {adj.shape} != ({n}, {n})")
        return problems
    if len(arch.ops) != n:
        problems.append(f"ops has {len(arch.ops)} entries for {n} nodes")
    if np.any(np.tril(adj)):
        i, j = np.argwhere(np.tril(adj))[0]
        problems.append(f"not upper-triangular: edge ({i},{j})")
    unknown = [op for op in arch.ops if op not in spec.op_vocabulary]
    if unknown:
        problems.append(f"unknown op(s): {sorted(set(map(str, unknown)))}")
    if spec.io_ops is not None and len(arch.ops) == n and n >= 2:
        if arch.ops[0] != spec.io_ops[0] or arch.ops[-1] != spec.io_ops[1]:
            problems.append(f"input/output nodes must carry {spec.io_ops}")
        bad = [op for op in arch.ops[1:-1] if op in spec.io_ops]
        if bad:
            problems.append(f"io op label on intermediate node: {bad}")
    if spec.edge_rule == FIXED_GRAPH and spec.fixed_adjacency is not None:
        if n != spec.max_nodes or not np.array_equal(adj, np.array(spec.fixed_adjacency, dtype=bool)):
            problems.append("adjacency differs from the space's fixed graph")
    if n >= 2 and not np.any(np.tril(adj)):
        on_path = _on_path_mask(adj)
        if not on_path[0]:
            problems.append("no input->output path")
        stray = [k for k in range(1, n - 1) if not on_path[k]]
        if stray:
            problems.append(f"nodes not on an input->output path: {stray}")
    return problems


def is_valid(arch: Architecture, spec: SpaceSpec) -> bool:
    return not validate(arch, spec)


def check(arch: Architecture, spec: SpaceSpec, where: str = "") -> None:
    problems = validate(arch, spec)
    if problems:
        raise InvalidArch(problems, where)


def canonical_key(arch: Architecture) -> str:
    """Deterministic string key: ``"<n>:<row-major bits>:<op|op|...>"``.

    No isomorphism canonicalization is done, so two relabelled but
    isomorphic cells usually get different keys.
    """
    bits = "".join("1" if b else "0" for b in arch.adjacency.ravel())
    return f"{arch.num_nodes}:{bits}:{'|'.join(arch.ops)}"


def arch_from_key(key: str) -> Architecture:
    n_str, bits, ops = key.split(":", 2)
    n = int(n_str)
    adj = np.array([c == "1" for c in bits], dtype=bool).reshape(n, n)
    return Architecture(n, adj, ops.split("|"))


def encode(arch: Architecture, spec: SpaceSpec) -> EncodedArch:
    """One-hot op features plus the symmetric-normalized adjacency.

    The graph operator is ``D^-1/2 (A + A^T + I) D^-1/2`` with ``D`` the
    degree matrix of ``A + A^T + I``.
    """
    n = arch.num_nodes
    vocab = {op: k for k, op in enumerate(spec.op_vocabulary)}
    feats = np.zeros((n, len(vocab)))
    feats[np.arange(n), [vocab[op] for op in arch.ops]] = 1.0
    a = arch.adjacency.astype(float)
    s = a + a.T + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(s.sum(axis=1))
    norm = s * inv_sqrt[:, None] * inv_sqrt[None, :]
    flat = np.concatenate([a.ravel(), feats.ravel()])
    return EncodedArch(feats, norm, a, flat)


def _edit_candidates(arch: Architecture, spec: SpaceSpec) -> list:
    """All single edits as ("op", node, label) or ("edge", i, j) tuples."""
    n = arch.num_nodes
    edits = []
    if spec.io_ops is None:
        mutable, labels = range(n), spec.op_vocabulary
    else:
        mutable, labels = range(1, n - 1), spec.cell_ops
    for node in mutable:
        for op in labels:
            if op != arch.ops[node]:
                edits.append(("op", node, op))
    if spec.edge_rule == DENSE_DAG:
        for i, j in itertools.combinations(range(n), 2):
            edits.append(("edge", i, j))
    return edits


def _apply(arch: Architecture, edit: tuple) -> Architecture:
    kind, a, b = edit
    return arch.with_op(a, b) if kind == "op" else arch.with_edge_toggled(a, b)


def neighbors(arch: Architecture, spec: SpaceSpec) -> list:
    """Every valid architecture exactly one edit away, in canonical edit order."""
    out = []
    for edit in _edit_candidates(arch, spec):
        cand = _apply(arch, edit)
        if is_valid(cand, spec):
            out.append(cand)
    return out


def mutate(arch: Architecture, spec: SpaceSpec, rng: np.random.Generator) -> Architecture:
    """Apply one random op change or (dense-dag only) one edge toggle.

    Candidate edits are tried in a random order until one yields a valid
    cell, which makes the result uniform over valid neighbours.
    """
    edits = _edit_candidates(arch, spec)
    for idx in rng.permutation(len(edits)):
        cand = _apply(arch, edits[idx])
        if is_valid(cand, spec):
            return cand
    raise NoValidMutation(f"no single edit of {canonical_key(arch)} is valid")


def edit_distance(a: Architecture, b: Architecture) -> int:
    """Hamming distance over (edges, ops); cells of different size are inf."""
    if a.num_nodes != b.num_nodes:
        return np.iinfo(np.int64).max
    edges = int(np.sum(np.triu(a.adjacency, 1) != np.triu(b.adjacency, 1)))
    return edges + sum(x != y for x, y in zip(a.ops, b.ops))


def random_architecture(spec: SpaceSpec, rng: np.random.Generator,
                        max_tries: int = 10_000) -> Architecture:
    """Uniform over valid full-size cells (rejection sampling for dense DAGs)."""
    n = spec.max_nodes
    labels = spec.cell_ops
    for _ in range(max_tries):
        if spec.edge_rule == FIXED_GRAPH:
            adj = np.array(spec.fixed_adjacency, dtype=bool)
        else:
            adj = np.triu(rng.random((n, n)) < 0.5, 1)
        if spec.io_ops is None:
            ops = [labels[k] for k in rng.integers(len(labels), size=n)]
        else:
            mid = [labels[k] for k in rng.integers(len(labels), size=n - 2)]
            ops = [spec.io_ops[0], *mid, spec.io_ops[1]]
        arch = Architecture(n, adj, ops)
        if is_valid(arch, spec):
            return arch
    raise NoValidMutation("could not sample a valid architecture")


def _valid_adjacencies(spec: SpaceSpec) -> list:
    n = spec.max_nodes
    if spec.edge_rule == FIXED_GRAPH:
        return [np.array(spec.fixed_adjacency, dtype=bool)]
    slots = list(itertools.combinations(range(n), 2))
    if len(slots) > _MAX_ENUM_EDGE_SLOTS:
        raise ValueError(f"{len(slots)} edge slots is too many to enumerate")
    probe_ops = [spec.cell_ops[0]] * n
    if spec.io_ops is not None:
        probe_ops[0], probe_ops[-1] = spec.io_ops
    out = []
    for mask in range(1 << len(slots)):
        adj = np.zeros((n, n), dtype=bool)
        for b, (i, j) in enumerate(slots):
            if mask >> b & 1:
                adj[i, j] = True
        if is_valid(Architecture(n, adj, probe_ops), spec):
            out.append(adj)
    return out


def space_size(spec: SpaceSpec) -> Optional[int]:
    """Number of valid full-size cells, or None when too large to count."""
    try:
        n_adj = len(_valid_adjacencies(spec))
    except ValueError:
        return None
    n = spec.max_nodes
    free = n if spec.io_ops is None else n - 2
    return n_adj * len(spec.cell_ops) ** free


def iter_space(spec: SpaceSpec) -> Iterator[Architecture]:
    """Enumerate every valid full-size cell in a fixed order."""
    n = spec.max_nodes
    free = n if spec.io_ops is None else n - 2
    for adj in _valid_adjacencies(spec):
        for combo in itertools.product(spec.cell_ops, repeat=free):
            ops = list(combo) if spec.io_ops is None else [spec.io_ops[0], *combo, spec.io_ops[1]]
            yield Architecture(n, adj, ops)


# 201-style cell: 4 states, 6 edges carrying ops. In node-op form each edge
# becomes a node, giving input, e(0>1), e(0>2), e(1>2), e(0>3), e(1>3), e(2>3), output.
_NB201_EDGES = [(0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 6), (3, 6), (4, 7), (5, 7), (6, 7)]
NB201_OPS = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")
NB101_OPS = ("conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3")


def nb201_space() -> SpaceSpec:
    """Fixed 8-node graph, 5 ops on the 6 edge-nodes: 15625 cells."""
    adj = np.zeros((8, 8), dtype=int)
    for i, j in _NB201_EDGES:
        adj[i, j] = 1
    return SpaceSpec(
        max_nodes=8,
        op_vocabulary=("input", *NB201_OPS, "output"),
        edge_rule=FIXED_GRAPH,
        fixed_adjacency=tuple(map(tuple, adj)),
        io_ops=("input", "output"),
        name="nb201-like",
    )


def nb101_space(max_nodes: int = 5) -> SpaceSpec:
    """Dense DAG with 3 ops on intermediate nodes; 5 nodes by default."""
    return SpaceSpec(
        max_nodes=max_nodes,
        op_vocabulary=("input", *NB101_OPS, "output"),
        edge_rule=DENSE_DAG,
        io_ops=("input", "output"),
        name="nb101-like",
    )


SPACE_PRESETS = {"nb201-like": nb201_space, "nb101-like": nb101_space}


def space_preset(name: str) -> SpaceSpec:
    try:
        return SPACE_PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown space preset {name!r}; choose from {sorted(SPACE_PRESETS)}") from None


def chain(n: int, ops: Sequence[str]) -> Architecture:
    """Linear cell 0 -> 1 -> ... -> n-1."""
    adj = np.zeros((n, n), dtype=bool)
    adj[np.arange(n - 1), np.arange(1, n)] = True
    return Architecture(n, adj, ops)
