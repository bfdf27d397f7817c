"""
Predictor-guided search against random search
=============================================

Run the evolutionary search with a piecewise schedule (hinge ranking loss
while the sample is small, MAPE afterwards) and compare the best architecture
found with random search at the same query budget.
"""

import numpy as np

from pwlnas import (SearchConfig, SynthSpec, TrainConfig, nb201_space, preset, pwlnas_search,
                    random_search, synth_generate)

table = synth_generate(SynthSpec(nb201_space(), size=1000, seed=7, ruggedness=0.3))
optimum = table.test.max()

schedule = preset("nb201-like", warm_iters=5)
guided, baseline = [], []
for seed in range(3):
    cfg = SearchConfig(budget=100, schedule=schedule, train_cfg=TrainConfig(epochs=50), seed=seed)
    trace = pwlnas_search(table, cfg)
    guided.append(trace.best_test)
    baseline.append(random_search(table, cfg.budget, seed).best_test)
    print(f"seed {seed}: pwlnas {trace.best_test:.4f}  random {baseline[-1]:.4f}  "
          f"losses used {sorted({r.loss_label for r in trace.records[1:]})}")

print(f"regret  pwlnas {optimum - np.mean(guided):.4f}  random {optimum - np.mean(baseline):.4f}")
