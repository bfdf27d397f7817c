"""
Comparing predictor losses
==========================

Train the GCN predictor on a 5% split with a few different losses and report
how well each ranks the whole table. Every run draws its own split and
initialisation, so the spread across runs is part of the result.
"""

from pwlnas import LossSpec, SynthSpec, TrainConfig, nb201_space, run_sweep, synth_generate

table = synth_generate(SynthSpec(nb201_space(), size=1000, seed=7, ruggedness=0.3))

losses = [LossSpec("mse"), LossSpec("hinge_rank"), LossSpec("listmle"), LossSpec("mape"),
          LossSpec("warp")]
res = run_sweep(table, portions=[5], repeats=3, losses=losses,
                cfg=TrainConfig(backbone="gcn", epochs=100), Ts=[5], Ks=[10])

for row in res.aggregates:
    print(f"{row['loss']:>12}  tau={row['tau']:.3f} +- {row['tau_std']:.3f}  "
          f"P@5%={row['precision_5']:5.1f}  N@10={row['n_at_10']:.1f}")

# the full per-run table, ready for a spreadsheet
with open("loss_sweep.csv", "w") as fh:
    fh.write(res.to_csv())
