"""
Ranking metrics on a synthetic table
====================================

Build a small synthetic benchmark, corrupt its ground truth with noise of
growing size and watch Kendall's tau, Precision@T and N@K degrade.
"""

import numpy as np

from pwlnas import SynthSpec, evaluate, nb201_space, synth_generate

table = synth_generate(SynthSpec(nb201_space(), size=1000, seed=7, ruggedness=0.3))
print(len(table), "architectures, best test_perf", table.test.max().round(4))

# a "predictor" here is any callable mapping records to scores
rng = np.random.default_rng(0)
for sigma in (0.0, 0.01, 0.03, 0.1):
    noisy = dict(zip(table.keys, table.test + rng.normal(0, sigma, len(table))))
    rep = evaluate(lambda recs: [noisy[r.key] for r in recs], table, Ts=(1, 5), Ks=(10,))
    print(f"sigma={sigma:<5} tau={rep.tau:.3f}  P@1%={rep.precision_at[1]:5.1f}  "
          f"P@5%={rep.precision_at[5]:5.1f}  N@10={rep.n_at[10]}")
