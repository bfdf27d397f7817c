"""Small numpy predictor engine with hand-derived gradients.

Two backbones map an :class:`~pwlnas.arch.EncodedArch` to a scalar score:

* ``gcn``: ``H' = ReLU(A_norm @ H @ W + b)`` per graph layer, mean-pool over
  the real nodes, then a linear readout.
* ``mlp``: ``h' = ReLU(h @ W + b)`` on the flattened (adjacency, one-hot)
  encoding, then a linear readout.

Cells smaller than the space's ``max_nodes`` are zero-padded; padded nodes
never feed real nodes (their adjacency columns are zero) and are masked out
of the pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import losses as L
from .arch import EncodedArch, SpaceSpec
from .errors import EmptyPairs, NoStrictPairs, NonFiniteLoss, ShapeError

CHECKPOINT_VERSION = 1
BACKBONES = ("gcn", "mlp")
DEFAULT_HIDDEN = {"gcn": (64, 64, 64), "mlp": (64, 64)}


@dataclass
class Predictor:
    backbone: str
    hidden_dims: tuple
    layers: list  # [(W, b), ...]; the last pair is the scalar readout
    max_nodes: int
    n_ops: int

    @property
    def input_dim(self) -> int:
        if self.backbone == "gcn":
            return self.n_ops
        return self.max_nodes * (self.max_nodes + self.n_ops)

    def params(self) -> list:
        return [a for wb in self.layers for a in wb]

    def copy(self) -> "Predictor":
        return Predictor(self.backbone, self.hidden_dims,
                         [(w.copy(), b.copy()) for w, b in self.layers],
                         self.max_nodes, self.n_ops)


@dataclass
class GraphBatch:
    """Padded, stacked encodings ready for :func:`forward`."""

    norm_adj: np.ndarray  # (B, M, M)
    feats: np.ndarray     # (B, M, V)
    mask: np.ndarray      # (B, M)
    flat: np.ndarray      # (B, M*M + M*V)

    def __len__(self):
        return self.feats.shape[0]

    def take(self, idx) -> "GraphBatch":
        return GraphBatch(self.norm_adj[idx], self.feats[idx], self.mask[idx], self.flat[idx])


@dataclass
class TrainConfig:
    """Optimizer and schedule settings.

    ``learning_rate=None`` picks 4e-3 for listwise losses and 1e-3 otherwise.
    ``batch_size`` falls back to full batch when the train set is smaller.
    """

    learning_rate: Optional[float] = None
    epochs: int = 300
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-5
    seed: int = 0
    backbone: str = "gcn"
    hidden_dims: Optional[tuple] = None

    def __post_init__(self):
        if self.learning_rate is not None and self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.adam_eps > 0):
            raise ValueError("bad adaptive-moment hyperparameters")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}")

    def lr_for(self, loss: L.LossSpec) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 4e-3 if loss.family == "listwise" else 1e-3

    def dims(self) -> tuple:
        return tuple(self.hidden_dims) if self.hidden_dims else DEFAULT_HIDDEN[self.backbone]


@dataclass
class TrainStats:
    epoch_losses: list = field(default_factory=list)
    skipped_batches: int = 0
    loss_label: str = ""

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else math.nan


def init_predictor(backbone: str, spec: SpaceSpec, hidden_dims: Sequence[int] = None,
                   seed: int = 0) -> Predictor:
    """Glorot-uniform weights, zero biases."""
    if backbone not in BACKBONES:
        raise ShapeError(f"unknown backbone {backbone!r}")
    dims = tuple(DEFAULT_HIDDEN[backbone] if hidden_dims is None else hidden_dims)
    if not dims or any(int(d) < 1 for d in dims):
        raise ShapeError("hidden_dims must be non-empty positive integers")
    p = Predictor(backbone, dims, [], spec.max_nodes, len(spec.op_vocabulary))
    rng = np.random.default_rng(seed)
    sizes = [p.input_dim, *dims, 1]
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        p.layers.append((rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return p


def stack(batch: Sequence[EncodedArch], max_nodes: int, n_ops: int) -> GraphBatch:
    B = len(batch)
    adj = np.zeros((B, max_nodes, max_nodes))
    raw = np.zeros((B, max_nodes, max_nodes))
    x = np.zeros((B, max_nodes, n_ops))
    mask = np.zeros((B, max_nodes))
    for k, enc in enumerate(batch):
        n = enc.num_nodes
        if n > max_nodes or enc.feature_matrix.shape[1] != n_ops:
            raise ShapeError(f"encoding {enc.feature_matrix.shape} does not fit "
                             f"({max_nodes}, {n_ops})")
        adj[k, :n, :n] = enc.norm_adjacency
        raw[k, :n, :n] = enc.adjacency
        x[k, :n] = enc.feature_matrix
        mask[k, :n] = 1.0
    flat = np.concatenate([raw.reshape(B, -1), x.reshape(B, -1)], axis=1)
    return GraphBatch(adj, x, mask, flat)


def _as_batch(p: Predictor, batch) -> GraphBatch:
    if isinstance(batch, GraphBatch):
        if batch.feats.shape[1:] != (p.max_nodes, p.n_ops):
            raise ShapeError("batch was stacked for a different space")
        return batch
    return stack(batch, p.max_nodes, p.n_ops)


def _forward(p: Predictor, gb: GraphBatch, start: int = 0, base=None):
    """Forward pass with a cache for :func:`backward`.

    With ``start > 0`` the hidden layers below ``start`` are taken from the
    cache ``base`` of an earlier pass instead of being recomputed.
    """
    cache = {"h": [], "inputs": [], "pre": []}
    gcn = p.backbone == "gcn"
    if start:
        for key in ("h", "inputs", "pre"):
            cache[key] = base[key][:start]
        h = base["h"][start]
    else:
        h = gb.feats if gcn else gb.flat
    for w, b in p.layers[start:-1]:
        x = gb.norm_adj @ h if gcn else h
        z = x @ w + b
        cache["h"].append(h)
        cache["inputs"].append(x)
        cache["pre"].append(z)
        h = np.maximum(z, 0.0)
    cache["h"].append(h)
    if gcn:
        cnt = gb.mask.sum(axis=1)
        pooled = np.einsum("bmd,bm->bd", h, gb.mask) / cnt[:, None]
        cache["cnt"] = cnt
    else:
        pooled = h
    cache["pooled"] = pooled
    w, b = p.layers[-1]
    scores = (pooled @ w + b)[:, 0]
    return scores, cache


def forward(p: Predictor, batch) -> np.ndarray:
    """Scores for a list of encodings (or a pre-stacked :class:`GraphBatch`)."""
    return _forward(p, _as_batch(p, batch))[0]


def _pattern(cache) -> tuple:
    return tuple(np.packbits(z > 0).tobytes() for z in cache["pre"])


def relu_pattern(p: Predictor, batch) -> tuple:
    """Which hidden units are active; equal patterns mean the same linear piece."""
    return _pattern(_forward(p, _as_batch(p, batch))[1])


def backward(p: Predictor, batch, d_scores) -> list:
    """Gradients of ``scores . d_scores`` for every layer, as ``[(dW, db), ...]``."""
    gb = _as_batch(p, batch)
    g = np.asarray(d_scores, dtype=float)
    if g.shape != (len(gb),):
        raise ShapeError(f"d_scores shape {g.shape} != ({len(gb)},)")
    _, cache = _forward(p, gb)
    w_out, _ = p.layers[-1]
    grads = [None] * len(p.layers)
    grads[-1] = (cache["pooled"].T @ g[:, None], np.array([g.sum()]))
    d_pooled = g[:, None] * w_out[:, 0][None, :]
    if p.backbone == "gcn":
        dh = d_pooled[:, None, :] * (gb.mask / cache["cnt"][:, None])[:, :, None]
        for l in range(len(p.layers) - 2, -1, -1):
            w, _ = p.layers[l]
            dz = dh * (cache["pre"][l] > 0)
            ah = cache["inputs"][l]
            grads[l] = (np.einsum("bmi,bmo->io", ah, dz), dz.sum(axis=(0, 1)))
            if l > 0:
                dh = np.swapaxes(gb.norm_adj, 1, 2) @ (dz @ w.T)
    else:
        dh = d_pooled
        for l in range(len(p.layers) - 2, -1, -1):
            w, _ = p.layers[l]
            dz = dh * (cache["pre"][l] > 0)
            grads[l] = (cache["inputs"][l].T @ dz, dz.sum(axis=0))
            if l > 0:
                dh = dz @ w.T
    return grads


class Adam:
    """Adaptive-moment optimizer with L2 weight decay on weight matrices."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(a) for a in params]
        self.v = [np.zeros_like(a) for a in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for a, g, m, v in zip(self.params, grads, self.m, self.v):
            if self.weight_decay and a.ndim == 2:
                g = g + self.weight_decay * a
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def loss_and_score_grad(loss: L.LossSpec, scores, targets, rng):
    """Loss on one batch; ``None`` when the batch has no usable pair."""
    try:
        return L.compute(loss, scores, targets, rng)
    except (NoStrictPairs, EmptyPairs):
        return None


def fit(p: Predictor, train, loss, cfg: TrainConfig, outer_iter: int = 1) -> TrainStats:
    """Train ``p`` in place.

    ``train`` is a list of ``(EncodedArch, target)`` pairs or a tuple
    ``(GraphBatch, targets)``. ``loss`` may be a :class:`PwSchedule`, in which
    case ``outer_iter`` picks the active piece. Pairwise losses pair up
    examples within each mini-batch; listwise losses treat the mini-batch as
    one list.
    """
    spec = L.pw_select(loss, outer_iter)
    if isinstance(train, tuple) and isinstance(train[0], GraphBatch):
        gb, y = train[0], np.asarray(train[1], dtype=float)
    else:
        if not train:
            raise ValueError("empty training set")
        gb = stack([e for e, _ in train], p.max_nodes, p.n_ops)
        y = np.array([t for _, t in train], dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    params = p.params()
    opt = Adam(params, cfg.lr_for(spec), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
    n_batches = max(1, math.ceil(n / cfg.batch_size))
    stats = TrainStats(loss_label=spec.label)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        vals = []
        for bi, idx in enumerate(np.array_split(perm, n_batches)):
            sub = gb.take(idx)
            scores = forward(p, sub)
            out = loss_and_score_grad(spec, scores, y[idx], rng)
            if out is None:
                stats.skipped_batches += 1
                continue
            value, g = out
            if not np.isfinite(value) or not np.all(np.isfinite(g)):
                raise NonFiniteLoss(epoch, bi, value)
            grads = backward(p, sub, g)
            opt.step([a for wb in grads for a in wb])
            vals.append(value)
        stats.epoch_losses.append(float(np.mean(vals)) if vals else math.nan)
    return stats


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int
    at_kink: bool = False

    def __float__(self):
        return self.max_rel_error


def grad_check(p: Predictor, loss: L.LossSpec, sample_batch, eps: float = 1e-4,
               n_params: int = 50, seed: int = 0) -> GradCheckResult:
    """Compare analytic parameter gradients of the total loss to central differences.

    ``sample_batch`` is ``(encodings or GraphBatch, targets)``. Any parameter
    whose +-eps perturbation changes a ReLU pattern or the loss's active
    piece is skipped; if the unperturbed point sits exactly on a loss kink
    the whole check is skipped and ``at_kink`` is set.
    """
    if not 0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")
    batch, targets = sample_batch
    gb = _as_batch(p, batch)
    y = np.asarray(targets, dtype=float)
    pairs = L.batch_pairs(loss, y, np.random.default_rng(seed)) if loss.kind in L.PAIRWISE else None

    # the numeric side runs in extended precision so round-off in the loss
    # value does not swamp gradients that are exactly zero
    wide = p.copy()
    for k, (w, b) in enumerate(wide.layers):
        wide.layers[k] = (w.astype(np.longdouble), b.astype(np.longdouble))
    gb_wide = GraphBatch(*(a.astype(np.longdouble) for a in
                           (gb.norm_adj, gb.feats, gb.mask, gb.flat)))
    y_wide = y.astype(np.longdouble)

    base_cache = None

    def evaluate(layer=0):
        scores, cache = _forward(wide, gb_wide, min(layer, len(wide.layers) - 1), base_cache)
        value, _ = L.compute(loss, scores, y_wide, np.random.default_rng(seed), pairs)
        sig = (_pattern(cache), L.kink_signature(loss, scores, y_wide, pairs, seed))
        return value, sig

    scores = forward(p, gb)
    _, g_scores = L.compute(loss, scores, y, np.random.default_rng(seed), pairs)
    _, base_sig = evaluate()
    base_cache = _forward(wide, gb_wide)[1]
    if base_sig[1][1]:
        return GradCheckResult(0.0, 0, 0, at_kink=True)
    analytic = np.concatenate([a.ravel() for wb in backward(p, gb, g_scores) for a in wb])
    params = wide.params()
    offsets = np.cumsum([0] + [a.size for a in params])
    total = int(offsets[-1])
    rng = np.random.default_rng(seed + 1)
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    worst, checked, skipped = 0.0, 0, 0
    for flat_idx in picks:
        which = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        arr, local = params[which], int(flat_idx - offsets[which])
        orig = arr.flat[local]
        arr.flat[local] = orig + eps
        f_plus, sig_plus = evaluate(which // 2)
        arr.flat[local] = orig - eps
        f_minus, sig_minus = evaluate(which // 2)
        arr.flat[local] = orig
        if sig_plus != base_sig or sig_minus != base_sig:
            skipped += 1
            continue
        numeric = float((f_plus - f_minus) / (2 * np.longdouble(eps)))
        a = float(analytic[flat_idx])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, rel)
        checked += 1
    return GradCheckResult(float(worst), checked, skipped)


@dataclass
class GradCheckCell:
    loss: str
    backbone: str
    restarts: int
    max_rel_error: float
    checked: int
    skipped: int
    kinks: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol and self.checked > 0


def grad_check_suite(kinds: Sequence[str] = L.KINDS, backbones: Sequence[str] = BACKBONES,
                     restarts: int = 20, batch: int = 12, spec: SpaceSpec = None,
                     eps: float = 1e-4, n_params: int = 50, seed: int = 0) -> list:
    """Run :func:`grad_check` over ``kinds x backbones``, ``restarts`` draws each.

    Every restart draws a fresh initialization, a random batch of
    architectures and random targets in [0.5, 0.95].
    """
    from .arch import encode, nb101_space, random_architecture

    spec = spec if spec is not None else nb101_space()
    cells = []
    for kind in kinds:
        for bb in backbones:
            rng = np.random.default_rng([seed, L.KINDS.index(kind), BACKBONES.index(bb)])
            worst, checked, skipped, kinks = 0.0, 0, 0, 0
            for r in range(restarts):
                p = init_predictor(bb, spec, None, seed=int(rng.integers(2**31)))
                encs = [encode(random_architecture(spec, rng), spec) for _ in range(batch)]
                y = rng.uniform(0.5, 0.95, size=batch)
                res = grad_check(p, L.LossSpec(kind), (encs, y), eps, n_params, seed=r)
                worst = max(worst, res.max_rel_error)
                checked += res.checked
                skipped += res.skipped
                kinks += res.at_kink
            cells.append(GradCheckCell(kind, bb, restarts, worst, checked, skipped, kinks))
    return cells


def save_predictor(p: Predictor, path) -> None:
    arrays = {f"w{k}": w for k, (w, _) in enumerate(p.layers)}
    arrays.update({f"b{k}": b for k, (_, b) in enumerate(p.layers)})
    np.savez(path, version=CHECKPOINT_VERSION, backbone=p.backbone,
             hidden_dims=np.array(p.hidden_dims), max_nodes=p.max_nodes, n_ops=p.n_ops,
             n_layers=len(p.layers), **arrays)


def load_predictor(path) -> Predictor:
    with np.load(path) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise ShapeError(f"unsupported checkpoint version {int(z['version'])}")
        layers = [(z[f"w{k}"].copy(), z[f"b{k}"].copy()) for k in range(int(z["n_layers"]))]
        return Predictor(str(z["backbone"]), tuple(int(d) for d in z["hidden_dims"]), layers,
                         int(z["max_nodes"]), int(z["n_ops"]))


def predictor_scorer(p: Predictor, spec: SpaceSpec, chunk: int = 4096):
    """Wrap a predictor as ``scorer(list_of_architectures) -> scores``."""
    from .arch import encode

    def score(archs):
        out = []
        for start in range(0, len(archs), chunk):
            encs = [encode(a, spec) for a in archs[start:start + chunk]]
            out.append(forward(p, stack(encs, p.max_nodes, p.n_ops)))
        return np.concatenate(out) if out else np.zeros(0)

    return score
