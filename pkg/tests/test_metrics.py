import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as O
from pwlnas.errors import InvalidK, InvalidT, TooFew
from pwlnas.losses import LossSpec
from pwlnas.metrics import (RankedEval, concordance, concordance_bruteforce, evaluate,
                            kendall_tau, kendall_tau_bruteforce, n_at_k, precision_at_t,
                            run_sweep, top_count)
from pwlnas.nn import TrainConfig


def ev(pred, gt):
    return RankedEval.build(np.asarray(pred, float), np.asarray(gt, float))


def test_tau_examples():
    x = np.arange(10.0)
    assert kendall_tau(ev(x, x)) == 1.0
    assert kendall_tau(ev(x, -x)) == -1.0
    pred, gt = [0.1, 0.4, 0.3, 0.2], [0.1, 0.2, 0.3, 0.4]
    assert concordance_bruteforce(pred, gt) == (3, 3)
    assert concordance(pred, gt) == (3, 3)
    assert kendall_tau(ev(pred, gt)) == 0.0
    with pytest.raises(TooFew):
        kendall_tau([1.0], [2.0])


def test_tau_a_counts_ties_in_neither():
    x, y = [1, 1, 2, 3], [1, 2, 2, 3]
    assert kendall_tau(x, y) == pytest.approx(O.tau_a(x, y), abs=0)
    assert kendall_tau([1, 1, 1], [1, 2, 3]) == 0.0


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=60))
def test_fast_tau_equals_bruteforce_with_ties(pairs):
    x, y = map(np.array, zip(*pairs))
    assert concordance(x, y) == concordance_bruteforce(x, y)
    assert kendall_tau(x, y) == kendall_tau_bruteforce(x, y) == O.tau_a(list(x), list(y))


def test_precision_examples():
    n = 100
    gt = np.linspace(0, 1, n)
    for T in (0.5, 1, 5, 10, 50, 100):
        assert precision_at_t(ev(gt, gt), T) == 100.0
    assert precision_at_t(ev(-gt, gt), 50) == 0.0
    gt2 = np.linspace(0, 1, 200)
    assert top_count(0.5, 200) == 1
    hit = gt2.copy()
    miss = gt2.copy()
    miss[0] = 5.0  # argmax prediction is the worst architecture
    assert precision_at_t(ev(hit, gt2), 0.5) == 100.0
    assert precision_at_t(ev(miss, gt2), 0.5) == 0.0
    with pytest.raises(InvalidT):
        precision_at_t(ev(gt, gt), 0)
    with pytest.raises(InvalidT):
        precision_at_t(ev(gt, gt), 101)


def test_top_count_exact_decimal():
    # 0.3% of 1000 is 3; naive float floor would give 2
    assert top_count(0.3, 1000) == 3
    assert top_count(0.1, 423) == 1


def test_n_at_k_examples():
    gt = np.linspace(0, 1, 100)
    assert n_at_k(ev(gt, gt), 10) == 1
    assert n_at_k(ev(-gt, gt), 10) == 91
    with pytest.raises(InvalidK):
        n_at_k(ev(gt, gt), 0)
    with pytest.raises(InvalidK):
        n_at_k(ev(gt, gt), 101)


def test_constant_scores_fall_back_to_index():
    gt = np.array([0.1, 0.9, 0.5, 0.3])
    e = ev(np.zeros(4), gt)
    assert list(e.pred_ranks) == [1, 2, 3, 4]
    assert n_at_k(e, 1) == 4 and n_at_k(e, 2) == 1


evals = st.integers(2, 80).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 25), min_size=n, max_size=n),
    st.lists(st.integers(0, 25), min_size=n, max_size=n)))


@given(evals, st.sampled_from([0.5, 1, 2.5, 5, 10, 33.3, 50, 100]))
def test_precision_matches_scan(pg, T):
    pred, gt = pg
    assert precision_at_t(ev(pred, gt), T) == O.precision(pred, gt, T)


@given(evals)
def test_n_at_k_scan_monotone_and_best(pg):
    pred, gt = pg
    e = ev(pred, gt)
    vals = [n_at_k(e, k) for k in range(1, len(pred) + 1)]
    assert vals == [O.n_at(pred, gt, k) for k in range(1, len(pred) + 1)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    best = O.order_desc(gt)[0]
    for k, v in enumerate(vals, 1):
        assert (v == 1) == (best in O.order_desc(pred)[:k])


@given(evals)
def test_rank_metrics_invariant_to_increasing_transform(pg):
    pred, gt = pg
    p = np.asarray(pred, float)
    base = ev(p, gt)
    for f in (lambda v: 3 * v + 1, lambda v: v ** 3, np.exp, lambda v: np.arctan(v / 10)):
        moved = ev(f(p), gt)
        for T in (1, 5, 50):
            assert precision_at_t(moved, T) == precision_at_t(base, T)
        for K in sorted({1, min(3, len(pred)), len(pred)}):
            assert n_at_k(moved, K) == n_at_k(base, K)


def test_evaluate_oracle_stub(synth1000):
    rep = evaluate(lambda recs: [r.test_perf for r in recs], synth1000, Ts=(0.5, 1, 5), Ks=(1, 10))
    assert rep.tau == 1.0 and rep.n_eval == 1000
    assert all(v == 100.0 for v in rep.precision_at.values())
    assert rep.n_at == {1: 1, 10: 1}


def test_evaluate_matches_bruteforce(synth1000):
    rng = np.random.default_rng(0)
    noisy = synth1000.test + rng.normal(0, 0.02, size=1000)
    lookup = dict(zip(synth1000.keys, noisy))
    rep = evaluate(lambda recs: [lookup[r.key] for r in recs], synth1000, Ts=(1, 5), Ks=(10,))
    pred, gt = noisy.tolist(), synth1000.test.tolist()
    assert rep.tau == pytest.approx(O.tau_a(pred, gt), abs=1e-15)
    assert rep.precision_at == {1: O.precision(pred, gt, 1), 5: O.precision(pred, gt, 5)}
    assert rep.n_at[10] == O.n_at(pred, gt, 10)


def test_evaluate_constant_scorer(synth_small):
    rep = evaluate(lambda recs: np.zeros(len(recs)), synth_small, Ks=(10,))
    assert rep.tau == 0.0 and 1 <= rep.n_at[10] <= len(synth_small)


def _tiny_cfg():
    return TrainConfig(epochs=3, hidden_dims=(8,), backbone="mlp")


def test_sweep_single_cell_and_determinism(synth_small):
    args = (synth_small, [10], 1, [LossSpec("mse")], _tiny_cfg())
    a = run_sweep(*args, base_seed=4)
    b = run_sweep(*args, base_seed=4)
    assert len(a.rows) == 1 and len(a.aggregates) == 1
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != run_sweep(*args, base_seed=5).to_csv()


def test_sweep_aggregates_match_raw_rows(synth_small):
    res = run_sweep(synth_small, [10, 30], 3, [LossSpec("hinge_rank"), LossSpec("listmle")],
                    _tiny_cfg(), Ts=(5,), Ks=(10,), base_seed=1)
    table = list(csv.DictReader(io.StringIO(res.to_csv())))
    assert list(table[0]) == ["space", "portion", "loss", "run", "tau", "precision_5", "n_at_10",
                              "seed", "agg", "tau_std", "precision_5_std", "n_at_10_std", "status"]
    raw = [r for r in table if r["agg"] == "0"]
    agg = [r for r in table if r["agg"] == "1"]
    assert len(raw) == 12 and len(agg) == 4
    for a in agg:
        group = [r for r in raw if r["portion"] == a["portion"] and r["loss"] == a["loss"]]
        for m in ("tau", "precision_5", "n_at_10"):
            vals = [float(r[m]) for r in group]
            mean = sum(vals) / len(vals)
            std = (sum((v - mean) ** 2 for v in vals) / len(vals)) ** 0.5
            assert float(a[m]) == pytest.approx(mean, rel=1e-12, abs=1e-15)
            assert float(a[f"{m}_std"]) == pytest.approx(std, rel=1e-9, abs=1e-12)
    # runs re-randomize the split and the initialization
    assert len({r["seed"] for r in raw}) == 12


def test_sweep_records_failed_cells(synth_small):
    res = run_sweep(synth_small, [10], 2, [LossSpec("mse")], _tiny_cfg(),
                    scorer_factory=lambda *a: (lambda recs: 1 / 0))
    assert len(res.failed) == 2 and "ZeroDivisionError" in res.failed[0]["status"]
    assert res.aggregates[0]["status"] == "partial"


def test_sweep_parallel_equals_serial(synth_small):
    args = (synth_small, [10], 2, [LossSpec("mse")], _tiny_cfg())
    assert run_sweep(*args, jobs=2).to_csv() == run_sweep(*args, jobs=1).to_csv()
