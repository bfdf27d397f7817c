"""Predictor losses with gradients w.r.t. the prediction scores.

Every loss returns ``(value, grad)`` where ``grad`` has the shape of
``scores``. Families:

* regression: ``mse``
* pairwise ranking: ``hinge_rank``, ``logistic_rank``, ``mse_sr``
* listwise ranking: ``listmle``
* weighted: ``mape``, ``exp_weighted``, ``warp``

The exact forms follow the methods each loss comes from; where those
leave a choice open the choice is stated next to the formula.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import EmptyPairs, LengthMismatch, NoStrictPairs

KINDS = ("mse", "hinge_rank", "logistic_rank", "mse_sr", "listmle", "mape",
         "exp_weighted", "warp")
WEIGHT_TYPES = ("gt", "exp_gt", "ranking", "none")
PAIRWISE = ("hinge_rank", "logistic_rank")
LISTWISE = ("listmle",)
WEIGHTED = ("mape", "exp_weighted", "warp")
# "all" pairs up to this batch size, per-anchor sampling above it
ALL_PAIRS_MAX_N = 256


@dataclass(frozen=True)
class LossSpec:
    kind: str
    margin: float = 0.1
    mix: float = 1.0
    alpha: float = 10.0
    epsilon: float = 1e-2
    weight_type: Optional[str] = None
    warp_max_trials: int = 32
    pairs_per_anchor: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; allowed: {', '.join(KINDS)}")
        if self.weight_type is None:
            object.__setattr__(self, "weight_type",
                               "exp_gt" if self.kind == "exp_weighted" else "none")
        if self.weight_type not in WEIGHT_TYPES:
            raise ValueError(f"unknown weight_type {self.weight_type!r}; "
                             f"allowed: {', '.join(WEIGHT_TYPES)}")
        if not self.margin > 0:
            raise ValueError("margin must be > 0")
        if not self.mix >= 0:
            raise ValueError("mix must be >= 0")
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.warp_max_trials < 1 or self.pairs_per_anchor < 1:
            raise ValueError("warp_max_trials and pairs_per_anchor must be >= 1")

    @property
    def family(self) -> str:
        if self.kind == "mse":
            return "regression"
        if self.kind in ("hinge_rank", "logistic_rank", "mse_sr"):
            return "pairwise"
        if self.kind in LISTWISE:
            return "listwise"
        return "weighted"

    @property
    def label(self) -> str:
        default = "exp_gt" if self.kind == "exp_weighted" else "none"
        if self.weight_type != default:
            return f"{self.kind}[{self.weight_type}]"
        return self.kind

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PwSchedule:
    """Warm-up loss for outer iterations ``1..warm_iters``, main loss after."""

    warm_loss: LossSpec
    main_loss: LossSpec
    warm_iters: int = 5

    def __post_init__(self):
        if self.warm_iters < 0:
            raise ValueError("warm_iters must be >= 0")

    @property
    def label(self) -> str:
        return f"pw({self.warm_loss.label}->{self.main_loss.label}@{self.warm_iters})"


def pw_select(schedule: Union[PwSchedule, LossSpec], outer_iter: int) -> LossSpec:
    if outer_iter < 1:
        raise ValueError("outer_iter is 1-indexed")
    if isinstance(schedule, LossSpec):
        return schedule
    return schedule.warm_loss if outer_iter <= schedule.warm_iters else schedule.main_loss


@dataclass(frozen=True)
class PairBatch:
    """Index pairs ``(hi[k], lo[k])`` with ``targets[hi] > targets[lo]``."""

    hi: np.ndarray
    lo: np.ndarray
    targets: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.hi)

    def __iter__(self):
        for i, j in zip(self.hi, self.lo):
            yield int(i), int(j), float(self.targets[i]), float(self.targets[j])


def _pair_batch(targets, hi, lo) -> PairBatch:
    return PairBatch(np.asarray(hi, dtype=np.intp), np.asarray(lo, dtype=np.intp),
                     np.asarray(targets, dtype=float))


def _as_float(scores, targets=None):
    # float64 unless the caller passes extended precision (used by grad checks)
    s = np.asarray(scores)
    if s.dtype != np.longdouble:
        s = s.astype(float)
    if targets is None:
        return s
    y = np.asarray(targets, dtype=s.dtype)
    if s.shape != y.shape:
        raise LengthMismatch(f"scores {s.shape} vs targets {y.shape}")
    return s, y


def sample_pairs(targets, rng: Optional[np.random.Generator] = None,
                 strategy: str = "all", k: int = 8) -> PairBatch:
    """Strictly ordered pairs from a target vector; ties are never paired.

    ``all`` lists every strict pair. ``per_anchor_k`` draws ``k`` partners
    with a different target for each element, with replacement.
    """
    y = np.asarray(targets, dtype=float)
    n = len(y)
    if n < 2:
        raise NoStrictPairs("need at least two targets")
    if strategy == "all":
        hi, lo = np.nonzero(y[:, None] > y[None, :])
        if len(hi) == 0:
            raise NoStrictPairs("all targets are equal")
        return _pair_batch(y, hi, lo)
    if strategy != "per_anchor_k":
        raise ValueError(f"unknown pair strategy {strategy!r}")
    if rng is None:
        raise ValueError("per_anchor_k needs an rng")
    his, los = [], []
    for i in range(n):
        partners = np.flatnonzero(y != y[i])
        if len(partners) == 0:
            continue
        for j in rng.choice(partners, size=k, replace=True):
            if y[i] > y[j]:
                his.append(i)
                los.append(j)
            else:
                his.append(j)
                los.append(i)
    if not his:
        raise NoStrictPairs("all targets are equal")
    return _pair_batch(y, his, los)


def adjacent_pairs(targets) -> PairBatch:
    """Neighbours in the target-sorted order (descending, ties by index)."""
    y = np.asarray(targets, dtype=float)
    order = np.argsort(-y, kind="stable")
    hi, lo = order[:-1], order[1:]
    strict = y[hi] > y[lo]
    return _pair_batch(y, hi[strict], lo[strict])


def _check_pairs(pairs: PairBatch, n: int):
    if len(pairs) == 0:
        raise EmptyPairs("pair batch is empty")
    if pairs.hi.max() >= n or pairs.lo.max() >= n:
        raise LengthMismatch("pair index out of range for scores")


def _scatter_pair_grad(n, pairs, g_pair):
    """Map d loss / d (s_hi - s_lo) onto the score vector."""
    grad = np.zeros(n)
    np.add.at(grad, pairs.hi, g_pair)
    np.add.at(grad, pairs.lo, -g_pair)
    return grad


def mse(scores, targets):
    s, y = _as_float(scores, targets)
    if len(s) == 0:
        raise LengthMismatch("empty batch")
    d = s - y
    return np.mean(d * d), 2.0 * d / len(s)


def hinge_rank(scores, pairs: PairBatch, margin: float = 0.1):
    """Mean of ``max(0, m - (s_hi - s_lo))``; gradient 0 exactly at the kink."""
    s = _as_float(scores)
    _check_pairs(pairs, len(s))
    slack = margin - (s[pairs.hi] - s[pairs.lo])
    active = slack > 0
    value = np.sum(np.where(active, slack, 0.0)) / len(pairs)
    g = np.where(active, -1.0 / len(pairs), 0.0)
    return value, _scatter_pair_grad(len(s), pairs, g)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    # stable on both tails
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_rank(scores, pairs: PairBatch):
    """Mean of ``log(1 + exp(-(s_hi - s_lo)))`` in softplus form."""
    s = _as_float(scores)
    _check_pairs(pairs, len(s))
    gap = s[pairs.hi] - s[pairs.lo]
    value = np.mean(_softplus(-gap))
    g = -_sigmoid(-gap) / len(pairs)
    return value, _scatter_pair_grad(len(s), pairs, g)


def mse_sr(scores, targets, pairs: Optional[PairBatch] = None, mix: float = 1.0):
    """MSE plus ``mix`` times a sequence-ranking term.

    The ranking term is the pairwise logistic loss over neighbours in the
    target-sorted sequence (``adjacent_pairs``) unless ``pairs`` is given.
    With no strict pair available the ranking term is zero.
    """
    value, grad = mse(scores, targets)
    if pairs is None:
        pairs = adjacent_pairs(targets)
    if mix == 0 or len(pairs) == 0:
        return value, grad
    sr, sr_grad = logistic_rank(scores, pairs)
    return value + mix * sr, grad + mix * sr_grad


def listmle(scores, targets):
    """Plackett-Luce negative log-likelihood of the target ordering.

    ``sum_k [logsumexp(s_pi[k:]) - s_pi[k]]`` with ``pi`` sorting the targets
    descending, ties broken by ascending index.
    """
    s, y = _as_float(scores, targets)
    n = len(s)
    if n == 0:
        raise LengthMismatch("empty batch")
    order = np.argsort(-y, kind="stable")
    sp = s[order]
    suffix_lse = np.logaddexp.accumulate(sp[::-1])[::-1]
    value = np.sum(suffix_lse - sp)
    # d/ds_pi[j] = -1 + sum_{k<=j} exp(s_pi[j] - lse_k)
    log_cum = np.logaddexp.accumulate(-suffix_lse)
    g_sorted = -1.0 + np.exp(sp + log_cum)
    grad = np.empty(n)
    grad[order] = g_sorted
    return value, grad


def mape(scores, targets, epsilon: float = 1e-2):
    """Absolute error relative to the target's error ``1 - y``.

    ``mean |s - y| / max(1 - y, eps)``: an architecture at 95% accuracy is
    weighted ten times more than one at 50%.
    """
    s, y = _as_float(scores, targets)
    denom = np.maximum(1.0 - y, epsilon)
    d = s - y
    value = np.mean(np.abs(d) / denom)
    return value, np.sign(d) / denom / len(s)


def target_ranks(targets) -> np.ndarray:
    """1 = highest target; ties by ascending index (stable sort)."""
    y = np.asarray(targets, dtype=float)
    order = np.argsort(-y, kind="stable")
    r = np.empty(len(y), dtype=np.int64)
    r[order] = np.arange(1, len(y) + 1)
    return r


def weight_of(y: float, r: int, n: int, weight_type: str, alpha: float = 10.0,
              y_max: Optional[float] = None) -> float:
    """Per-example weight.

    ``gt``: y. ``exp_gt``: exp(alpha*y) / exp(alpha*y_max) so the best
    example in the batch weighs 1. ``ranking``: 1 - (r-1)/n. ``none``: 1.
    """
    if weight_type == "gt":
        return float(y)
    if weight_type == "exp_gt":
        top = y if y_max is None else y_max
        return float(np.exp(alpha * (y - top)))
    if weight_type == "ranking":
        if not 1 <= r <= n:
            raise ValueError(f"rank {r} outside [1, {n}]")
        return 1.0 - (r - 1) / n
    if weight_type == "none":
        return 1.0
    raise ValueError(f"unknown weight_type {weight_type!r}")


def batch_weights(targets, weight_type: str, alpha: float = 10.0) -> np.ndarray:
    y = np.asarray(targets, dtype=float)
    n = len(y)
    if weight_type == "none":
        return np.ones(n)
    if weight_type == "gt":
        return y.copy()
    if weight_type == "exp_gt":
        return np.exp(alpha * (y - y.max()))
    if weight_type == "ranking":
        return 1.0 - (target_ranks(y) - 1) / n
    raise ValueError(f"unknown weight_type {weight_type!r}")


def exp_weighted(scores, targets, alpha: float = 10.0, weight_type: str = "exp_gt"):
    """Weighted squared error ``mean w_i (s_i - y_i)^2``."""
    s, y = _as_float(scores, targets)
    w = batch_weights(y, weight_type, alpha)
    d = s - y
    return np.mean(w * (d * d)), 2.0 * w * d / len(s)


def harmonic(k: int) -> float:
    return float(np.sum(1.0 / np.arange(1, k + 1))) if k > 0 else 0.0


def _warp_draws(scores, y, margin, max_trials, rng):
    """Sampling pass: list of (anchor, violator or -1, trials used)."""
    n = len(y)
    draws = []
    for i in np.argsort(-y, kind="stable"):
        lower = np.flatnonzero(y < y[i])
        if len(lower) == 0:
            continue
        hit = -1
        trials = 0
        while trials < max_trials:
            j = lower[rng.integers(len(lower))]
            trials += 1
            if scores[j] + margin > scores[i]:
                hit = int(j)
                break
        draws.append((int(i), hit, trials))
    return draws, n


def warp(scores, targets, margin: float = 0.1, max_trials: int = 32,
         weight_type: str = "none", rng: Optional[np.random.Generator] = None,
         alpha: float = 10.0):
    """Weighted approximate-rank pairwise loss.

    For each anchor (best target first) lower-target partners are drawn
    uniformly with replacement until one violates the margin. A violation
    after ``s`` draws estimates the anchor's rank as ``floor((n-1)/s)`` and
    the hinge is scaled by the harmonic number of that rank. The rank
    estimate is a constant for the gradient. The value is averaged over
    anchors that have at least one lower-target partner.
    """
    s, y = _as_float(scores, targets)
    if len(s) < 2:
        raise LengthMismatch("warp needs at least two examples")
    if rng is None:
        rng = np.random.default_rng(0)
    draws, n = _warp_draws(s, y, margin, max_trials, rng)
    grad = np.zeros(n)
    if not draws:
        return 0.0, grad
    w = batch_weights(y, weight_type, alpha)
    total = 0.0
    for i, j, trials in draws:
        if j < 0:
            continue
        phi = harmonic((n - 1) // trials) * w[i]
        total += phi * (margin - s[i] + s[j])
        grad[i] -= phi
        grad[j] += phi
    return total / len(draws), grad / len(draws)


def compute(spec: LossSpec, scores, targets, rng: Optional[np.random.Generator] = None,
            pairs: Optional[PairBatch] = None):
    """Evaluate ``spec`` on a batch, sampling pairs where the loss needs them."""
    s, y = _as_float(scores, targets)
    kind = spec.kind
    if kind == "mse":
        return mse(s, y)
    if kind in PAIRWISE:
        if pairs is None:
            pairs = batch_pairs(spec, y, rng)
        if kind == "hinge_rank":
            return hinge_rank(s, pairs, spec.margin)
        return logistic_rank(s, pairs)
    if kind == "mse_sr":
        return mse_sr(s, y, pairs, spec.mix)
    if kind == "listmle":
        return listmle(s, y)
    if kind == "mape":
        return mape(s, y, spec.epsilon)
    if kind == "exp_weighted":
        return exp_weighted(s, y, spec.alpha, spec.weight_type)
    return warp(s, y, spec.margin, spec.warp_max_trials, spec.weight_type,
                rng if rng is not None else np.random.default_rng(0), spec.alpha)


def batch_pairs(spec: LossSpec, targets, rng=None) -> PairBatch:
    n = len(targets)
    if n <= ALL_PAIRS_MAX_N:
        return sample_pairs(targets, strategy="all")
    if rng is None:
        rng = np.random.default_rng(0)
    return sample_pairs(targets, rng, "per_anchor_k", spec.pairs_per_anchor)


def kink_signature(spec: LossSpec, scores, targets, pairs: Optional[PairBatch] = None,
                   rng_seed: int = 0):
    """Which piece of a piecewise loss is active, plus an exact-kink flag.

    Two score vectors with equal signatures lie on the same smooth piece,
    so a central difference between them is meaningful.
    """
    s, y = _as_float(scores, targets)
    kind = spec.kind
    if kind == "hinge_rank":
        if pairs is None:
            pairs = batch_pairs(spec, y, np.random.default_rng(rng_seed))
        slack = spec.margin - (s[pairs.hi] - s[pairs.lo])
        return tuple(slack > 0), bool(np.any(slack == 0))
    if kind == "mape":
        d = s - y
        return tuple(np.sign(d)), bool(np.any(d == 0))
    if kind == "warp":
        draws, _ = _warp_draws(s, y, spec.margin, spec.warp_max_trials,
                               np.random.default_rng(rng_seed))
        hi, lo = np.nonzero(y[:, None] > y[None, :])
        return tuple(draws), bool(np.any(s[lo] + spec.margin == s[hi]))
    return (), False

