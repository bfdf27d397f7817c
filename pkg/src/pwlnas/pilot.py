"""Pilot calibration of the end-to-end learnability threshold.

The learnability check trains a GCN with hinge_rank on a 5% split of a
seeded synthetic table and averages Kendall tau on the full table over ten
runs. Its threshold ``tau0`` is not a guess: a pilot repeats the same
protocol on a disjoint block of seeds and pins

    tau0 = pilot_mean - z * pilot_std / sqrt(runs)

i.e. a z-standard-error lower bound for a fresh ten-run mean. The pinned
file is committed; the check itself always uses different seeds.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .arch import nb201_space
from .bench import SynthSpec, synth_generate
from .losses import LossSpec
from .metrics import run_sweep
from .nn import TrainConfig

SETUP = {"space": "nb201-like", "size": 1000, "ruggedness": 0.3, "table_seed": 7,
         "loss": "hinge_rank", "backbone": "gcn", "portion": 5, "runs": 10}
PILOT_BASE_SEED = 1_000_003
CHECK_BASE_SEED = 0
Z = 3.0


def learnability_taus(runs: int = SETUP["runs"], base_seed: int = CHECK_BASE_SEED,
                      table=None, cfg: TrainConfig = None) -> list:
    """Full-table tau of ``runs`` independently seeded split+fit runs."""
    if table is None:
        table = synth_generate(SynthSpec(nb201_space(), SETUP["size"], SETUP["table_seed"],
                                         SETUP["ruggedness"]))
    cfg = cfg or TrainConfig(backbone=SETUP["backbone"])
    res = run_sweep(table, [SETUP["portion"]], runs, [LossSpec(SETUP["loss"])], cfg,
                    Ts=[5], Ks=[10], base_seed=base_seed)
    if res.failed:
        raise RuntimeError(f"pilot run failed: {res.failed[0]['status']}")
    return [float(r["tau"]) for r in res.rows]


def pin_threshold(taus, z: float = Z) -> dict:
    t = np.asarray(taus, dtype=float)
    mean, std = float(t.mean()), float(t.std(ddof=1))
    slack = z * std / math.sqrt(len(t))
    return {"mean": mean, "std": std, "z": z, "slack": slack, "tau0": mean - slack}


def run_pilot(path=None, runs: int = SETUP["runs"], base_seed: int = PILOT_BASE_SEED) -> dict:
    """Run the pilot and (optionally) write the pinned record to ``path``."""
    taus = learnability_taus(runs, base_seed)
    record = {"setup": SETUP, "base_seed": base_seed, "taus": taus, **pin_threshold(taus)}
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(record, indent=1) + "\n")
    return record


def load_pinned(path) -> dict:
    return json.loads(Path(path).read_text())
