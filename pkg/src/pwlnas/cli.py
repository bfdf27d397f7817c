"""Batch experiment driver.

Five commands share one YAML config layout (see ``DEFAULT_CONFIG``); values
come from the defaults, then ``--config``, then command flags, then
``--set dotted.key=value`` overrides. The whole config is validated before
any table is built or model trained, and every problem is reported at once.

Exit codes: 0 success, 1 invalid arguments/config or a failed check,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from . import losses as L
from .arch import SPACE_PRESETS, space_preset, space_size
from .bench import BenchTable, SynthSpec, load, save, synth_generate
from .errors import ConfigError, PwlnasError
from .metrics import fmt_num, run_sweep
from .nn import BACKBONES, TrainConfig, grad_check_suite
from .search import (PRESETS, SearchConfig, build_mutation_testset, oracle_factory,
                     pwlnas_search, random_search)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "out",
    "jobs": 1,
    "table": None,          # path to a .jsonl/.csv table; mutually exclusive with synth
    "format": "jsonl",      # gen-synth output format
    "space": "nb201-like",  # preset used for synth tables and sidecar-less loads
    "synth": {"size": None, "seed": None, "ruggedness": None},  # None -> SYNTH_DEFAULTS
    "predictor": "model",   # model | oracle (scores := stored val_perf)
    "losses": ["hinge_rank"],
    "schedule": None,       # preset name or {warm, main, warm_iters}
    "train": {},
    "sweep": {"portions": [5], "repeats": 10, "Ts": [0.5, 1, 5], "Ks": [10]},
    "search": {"preset": "nb201-like", "budget": None, "init_size": 20, "iters": 1000,
               "candidates_per_iter": 100, "parents_per_iter": 10, "queries_per_iter": 5,
               "warm_start": False, "runs": 1, "compare_random": False},
    "mutation": {"init_n": 50, "seeds_top": 10, "out_n": 200, "Ts": [5], "Ks": [10]},
    "gradcheck": {"losses": list(L.KINDS), "backbones": list(BACKBONES), "restarts": 20,
                  "batch": 12, "eps": 1e-4, "n_params": 50, "tol": 1e-4},
}
SYNTH_DEFAULTS = {"size": 1000, "seed": 7, "ruggedness": 0.3}
OUTPUTS = {"sweep": "sweep.csv", "search": "search.csv", "mutation-eval": "mutation_eval.csv",
           "gradcheck": "gradcheck.csv"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad usage is a validation failure here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- config ---------------------------------------------------------------

def _merge(base: dict, extra: dict, where: str, problems: list) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{where}{key}"
        if key not in base:
            problems.append(f"{path}: unknown key; allowed: {', '.join(sorted(base))}")
        elif isinstance(base[key], dict) and isinstance(value, dict):
            if base[key]:
                out[key] = _merge(base[key], value, path + ".", problems)
            else:  # free-form section, keys are checked in resolve()
                out[key] = {**base[key], **copy.deepcopy(value)}
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_dotted(raw: dict, dotted: str, value):
    node = raw
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError([f"{dotted}: {part} is not a section"])
    node[parts[-1]] = value


def parse_loss(entry, where: str) -> L.LossSpec:
    """``"warp"``, ``"warp:weight_type=gt,margin=0.2"`` or a mapping of fields."""
    if isinstance(entry, L.LossSpec):
        return entry
    if isinstance(entry, str):
        kind, _, rest = entry.partition(":")
        kw = {}
        for item in filter(None, rest.split(",")):
            k, eq, v = item.partition("=")
            if not eq:
                raise ValueError(f"{where}: expected key=value, got {item!r}")
            kw[k.strip()] = yaml.safe_load(v)
        entry = {"kind": kind.strip(), **kw}
    if not isinstance(entry, dict):
        raise ValueError(f"{where}: expected a loss name or mapping, got {entry!r}")
    allowed = {f.name for f in fields(L.LossSpec)}
    unknown = set(entry) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown loss field(s) {sorted(unknown)}; "
                         f"allowed: {', '.join(sorted(allowed))}")
    try:
        return L.LossSpec(**entry)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def parse_schedule(entry, where: str = "schedule"):
    if isinstance(entry, str) and entry in PRESETS:
        return PRESETS[entry][0]
    if isinstance(entry, dict) and ("warm" in entry or "main" in entry):
        extra = set(entry) - {"warm", "main", "warm_iters"}
        if extra:
            raise ValueError(f"{where}: unknown field(s) {sorted(extra)}; "
                             "allowed: main, warm, warm_iters")
        if "warm" not in entry or "main" not in entry:
            raise ValueError(f"{where}: needs both warm and main")
        try:
            return L.PwSchedule(parse_loss(entry["warm"], f"{where}.warm"),
                                parse_loss(entry["main"], f"{where}.main"),
                                int(entry.get("warm_iters", 5)))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{where}: {exc}") from None
    return parse_loss(entry, where)


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    out: Path
    jobs: int
    table_path: Optional[Path]
    synth: Optional[SynthSpec]
    fmt: str
    oracle: bool
    losses: list
    train: TrainConfig
    sweep: dict
    search: Optional[SearchConfig]
    search_runs: int
    compare_random: bool
    mutation: dict
    gradcheck: dict
    raw: dict

    def build_table(self) -> BenchTable:
        if self.table_path is not None:
            spec = None if Path(str(self.table_path) + ".space.json").exists() \
                else space_preset(self.raw["space"])
            return load(self.table_path, spec)
        return synth_generate(self.synth)


def _positive_int(v, where, problems, minimum=1):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        problems.append(f"{where}: expected an integer >= {minimum}, got {v!r}")
        return False
    return True


def _number_list(v, where, problems, lo, hi, integer=False):
    if not isinstance(v, list) or not v:
        problems.append(f"{where}: expected a non-empty list")
        return
    for x in v:
        ok = (isinstance(x, int) if integer else isinstance(x, (int, float))) \
            and not isinstance(x, bool)
        if not ok or not lo < x <= hi:
            kind = "integers" if integer else "numbers"
            problems.append(f"{where}: expected {kind} in ({lo}, {hi}], got {x!r}")


def resolve(command: str, raw: dict) -> ExperimentConfig:
    """Validate ``raw`` exhaustively; raise :class:`ConfigError` listing every problem."""
    problems = []
    _positive_int(raw["seed"], "seed", problems, minimum=0)
    _positive_int(raw["jobs"], "jobs", problems)
    if raw["space"] not in SPACE_PRESETS:
        problems.append(f"space: unknown preset {raw['space']!r}; "
                        f"allowed: {', '.join(sorted(SPACE_PRESETS))}")
    if raw["format"] not in ("jsonl", "csv"):
        problems.append(f"format: expected jsonl or csv, got {raw['format']!r}")
    if raw["predictor"] not in ("model", "oracle"):
        problems.append(f"predictor: expected model or oracle, got {raw['predictor']!r}")

    # space source: exactly one of table / synth
    table_path, synth = None, None
    given = {k: v for k, v in raw["synth"].items() if v is not None}
    if raw["table"] is not None and given and command != "gen-synth":
        problems.append("table, synth: give exactly one space source, not both")
    elif raw["table"] is not None and command not in ("gen-synth", "gradcheck"):
        table_path = Path(raw["table"])
        if not table_path.is_file():
            problems.append(f"table: file not found: {table_path}")
    elif command != "gradcheck":
        s = dict(SYNTH_DEFAULTS)
        if command == "mutation-eval" and raw["space"] in SPACE_PRESETS:
            # the neighbourhood protocol needs a dense table: use the whole space
            s["size"] = space_size(space_preset(raw["space"]))
        s.update(given)
        ok = _positive_int(s["size"], "synth.size", problems, minimum=2)
        ok &= _positive_int(s["seed"], "synth.seed", problems, minimum=0)
        r = s["ruggedness"]
        if isinstance(r, bool) or not isinstance(r, (int, float)) or not 0 <= r <= 1:
            problems.append(f"synth.ruggedness: expected a number in [0, 1], got {r!r}")
            ok = False
        if ok and raw["space"] in SPACE_PRESETS:
            spec = space_preset(raw["space"])
            total = space_size(spec)
            if total is not None and s["size"] > total:
                problems.append(f"synth.size: {s['size']} exceeds the {total} cells of "
                                f"{raw['space']}")
            else:
                synth = SynthSpec(spec, s["size"], s["seed"], float(r))

    losses = []
    if not isinstance(raw["losses"], list) or not raw["losses"]:
        problems.append("losses: expected a non-empty list")
    else:
        for i, entry in enumerate(raw["losses"]):
            try:
                losses.append(parse_loss(entry, f"losses[{i}]"))
            except ValueError as exc:
                problems.append(str(exc))

    train = TrainConfig()
    if not isinstance(raw["train"], dict):
        problems.append("train: expected a mapping")
    else:
        allowed = {f.name for f in fields(TrainConfig)} - {"seed"}
        bad = set(raw["train"]) - allowed
        for k in sorted(bad):
            problems.append(f"train.{k}: unknown key; allowed: {', '.join(sorted(allowed))}")
        try:
            kw = {k: v for k, v in raw["train"].items() if k not in bad}
            if kw.get("hidden_dims") is not None:
                kw["hidden_dims"] = tuple(kw["hidden_dims"])
            train = TrainConfig(**kw)
        except (TypeError, ValueError) as exc:
            problems.append(f"train: {exc}")

    sw = raw["sweep"]
    _number_list(sw["portions"], "sweep.portions", problems, 0, 100)
    _positive_int(sw["repeats"], "sweep.repeats", problems)
    _number_list(sw["Ts"], "sweep.Ts", problems, 0, 100)
    _number_list(sw["Ks"], "sweep.Ks", problems, 0, float("inf"), integer=True)

    sr = raw["search"]
    search = None
    schedule = None
    if sr["preset"] not in PRESETS:
        problems.append(f"search.preset: unknown preset {sr['preset']!r}; "
                        f"allowed: {', '.join(sorted(PRESETS))}")
    else:
        schedule, preset_budget = PRESETS[sr["preset"]]
    if raw["schedule"] is not None:
        try:
            schedule = parse_schedule(raw["schedule"])
        except ValueError as exc:
            problems.append(str(exc))
    _positive_int(sr["runs"], "search.runs", problems)
    if schedule is not None:
        budget = sr["budget"] if sr["budget"] is not None else preset_budget
        kw = {k: sr[k] for k in ("init_size", "iters", "candidates_per_iter",
                                 "parents_per_iter", "queries_per_iter", "warm_start")}
        names = ("budget",) + tuple(k for k in kw if k != "warm_start")
        if all(_positive_int(v, f"search.{k}", problems)
               for k, v in zip(names, (budget,) + tuple(kw[k] for k in names[1:]))):
            try:
                search = SearchConfig(budget=budget, schedule=schedule, train_cfg=train,
                                      seed=raw["seed"] if isinstance(raw["seed"], int) else 0,
                                      **kw)
            except ValueError as exc:
                problems.append(f"search: {exc}")

    mu = raw["mutation"]
    for k in ("init_n", "seeds_top", "out_n"):
        _positive_int(mu[k], f"mutation.{k}", problems)
    _number_list(mu["Ts"], "mutation.Ts", problems, 0, 100)
    _number_list(mu["Ks"], "mutation.Ks", problems, 0, float("inf"), integer=True)

    gc = raw["gradcheck"]
    for k in gc["losses"] if isinstance(gc["losses"], list) else [gc["losses"]]:
        if k not in L.KINDS:
            problems.append(f"gradcheck.losses: unknown loss {k!r}; allowed: {', '.join(L.KINDS)}")
    for b in gc["backbones"] if isinstance(gc["backbones"], list) else [gc["backbones"]]:
        if b not in BACKBONES:
            problems.append(f"gradcheck.backbones: unknown backbone {b!r}; "
                            f"allowed: {', '.join(BACKBONES)}")
    for k in ("restarts", "batch", "n_params"):
        _positive_int(gc[k], f"gradcheck.{k}", problems, minimum=2 if k == "batch" else 1)

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        command=command, seed=raw["seed"], out=Path(raw["out"]), jobs=raw["jobs"],
        table_path=table_path, synth=synth, fmt=raw["format"],
        oracle=raw["predictor"] == "oracle", losses=losses, train=train, sweep=sw,
        search=search, search_runs=sr["runs"], compare_random=bool(sr["compare_random"]),
        mutation=mu, gradcheck=gc, raw=raw)


def build_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    problems = []
    raw = copy.deepcopy(DEFAULT_CONFIG)
    if args.config is not None:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except OSError as exc:
            raise ConfigError([f"--config: cannot read {args.config}: {exc.strerror}"]) from None
        except yaml.YAMLError as exc:
            raise ConfigError([f"--config: {args.config} is not valid YAML: {exc}"]) from None
        if not isinstance(loaded, dict):
            raise ConfigError([f"--config: {args.config} must hold a mapping"])
        raw = _merge(raw, loaded, "", problems)
    overrides = {}
    for dotted, value in _flag_overrides(command, args):
        _set_dotted(overrides, dotted, value)
    for item in args.set or []:
        key, eq, value = item.partition("=")
        if not eq:
            problems.append(f"--set: expected key=value, got {item!r}")
            continue
        try:
            _set_dotted(overrides, key.strip(), yaml.safe_load(value))
        except yaml.YAMLError:
            problems.append(f"--set {key}: value is not valid YAML")
    merged = _merge(raw, overrides, "", problems)
    if problems:
        raise ConfigError(problems)
    return resolve(command, merged)


def _flag_overrides(command, args):
    """Explicit command-line flags as (dotted key, value) pairs."""
    out = []
    simple = {"seed": "seed", "out": "out", "jobs": "jobs", "table": "table",
              "space": "space", "format": "format", "repeats": "sweep.repeats",
              "budget": "search.budget", "init": "search.init_size",
              "preset": "search.preset", "runs": "search.runs", "epochs": "train.epochs",
              "restarts": "gradcheck.restarts"}
    if command == "gen-synth":
        simple.update(seed="synth.seed", size="synth.size", ruggedness="synth.ruggedness")
    for attr, key in simple.items():
        v = getattr(args, attr, None)
        if v is not None:
            out.append((key, v))
    if getattr(args, "loss", None):
        out.append(("gradcheck.losses" if command == "gradcheck" else "losses", list(args.loss)))
    if getattr(args, "backbone", None):
        if command == "gradcheck":
            out.append(("gradcheck.backbones", list(args.backbone)))
        else:
            out.append(("train.backbone", args.backbone[-1]))
    if getattr(args, "portion", None):
        out.append(("sweep.portions", list(args.portion)))
    if getattr(args, "oracle", False):
        out.append(("predictor", "oracle"))
    if getattr(args, "compare_random", False):
        out.append(("search.compare_random", True))
    if getattr(args, "warm_start", False):
        out.append(("search.warm_start", True))
    return out


# --- commands ---------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _oracle_sweep_factory(table, recs, loss, seed):
    return lambda rs: [r.val_perf for r in rs]


def cmd_gen_synth(cfg: ExperimentConfig) -> int:
    table = synth_generate(cfg.synth)
    path = cfg.out / f"table.{cfg.fmt}"
    save(table, path, cfg.fmt)
    print(f"N={len(table)} sha256={sha256_file(path)} path={path}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    table = cfg.build_table()
    sw = cfg.sweep
    res = run_sweep(table, sw["portions"], sw["repeats"], cfg.losses, cfg.train,
                    sw["Ts"], sw["Ks"], base_seed=cfg.seed, space_name=cfg.raw["space"]
                    if cfg.table_path is None else cfg.table_path.stem, jobs=cfg.jobs,
                    scorer_factory=_oracle_sweep_factory if cfg.oracle else None)
    path = _write(cfg.out / OUTPUTS["sweep"], res.to_csv())
    for row in res.failed:
        print(f"failed cell portion={row['portion']} loss={row['loss']} run={row['run']}: "
              f"{row['status']}", file=sys.stderr)
    print(f"{len(res.rows)} runs, {len(res.failed)} failed -> {path}")
    return EXIT_OK if not res.failed else EXIT_RUNTIME


def _search_job(job):
    table, scfg, oracle, compare = job
    trace = pwlnas_search(table, scfg, oracle_factory() if oracle else None)
    text = trace.to_csv()
    if compare:
        text += random_search(table, scfg.budget, scfg.seed).to_csv().split("\n", 1)[1]
    return text, trace


def cmd_search(cfg: ExperimentConfig) -> int:
    from dataclasses import replace

    table = cfg.build_table()
    jobs = [(table, replace(cfg.search, seed=cfg.seed + r), cfg.oracle, cfg.compare_random)
            for r in range(cfg.search_runs)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_search_job, jobs))
    else:
        results = [_search_job(j) for j in jobs]
    header, _, _ = results[0][0].partition("\n")
    body = "".join(text.split("\n", 1)[1] for text, _ in results)
    path = _write(cfg.out / OUTPUTS["search"], header + "\n" + body)
    for _, trace in results:
        print(f"seed={trace.seed} best_test={fmt_num(trace.best_test)} spent={trace.spent}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_mutation_eval(cfg: ExperimentConfig) -> int:
    import numpy as np

    table = cfg.build_table()
    mu = cfg.mutation
    ts = build_mutation_testset(table, mu["init_n"], mu["seeds_top"], mu["out_n"],
                                np.random.default_rng([cfg.seed, 0x4D7]))
    held = set(ts.keys)
    pool = BenchTable(table.spec, [r for r in table.records if r.key not in held])
    sw = cfg.sweep
    res = run_sweep(table, sw["portions"], sw["repeats"], cfg.losses, cfg.train,
                    mu["Ts"], mu["Ks"], base_seed=cfg.seed,
                    space_name=cfg.raw["space"] if cfg.table_path is None
                    else cfg.table_path.stem,
                    eval_keys=ts.keys, jobs=cfg.jobs, train_table=pool,
                    scorer_factory=_oracle_sweep_factory if cfg.oracle else None)
    header = (f"# n_eval={len(ts.keys)} init_n={mu['init_n']} seeds_top={mu['seeds_top']} "
              f"seed={cfg.seed} predictor={'oracle' if cfg.oracle else cfg.train.backbone}\n")
    path = _write(cfg.out / OUTPUTS["mutation-eval"], header + res.to_csv())
    _write(cfg.out / "mutation_testset.json",
           json.dumps({"keys": ts.keys, "seed_keys": ts.seed_keys, "init_keys": ts.init_keys,
                       "parent": ts.parent}, indent=1) + "\n")
    print(f"n_eval={len(ts.keys)} runs={len(res.rows)} failed={len(res.failed)} -> {path}")
    return EXIT_OK if not res.failed else EXIT_RUNTIME


def cmd_gradcheck(cfg: ExperimentConfig) -> int:
    gc = cfg.gradcheck
    kinds = gc["losses"] if isinstance(gc["losses"], list) else [gc["losses"]]
    bbs = gc["backbones"] if isinstance(gc["backbones"], list) else [gc["backbones"]]
    cells = grad_check_suite(kinds, bbs, gc["restarts"], gc["batch"], eps=gc["eps"],
                             n_params=gc["n_params"], seed=cfg.seed)
    lines = ["loss,backbone,restarts,max_rel_error,checked,skipped,kinks,status"]
    for c in cells:
        status = "pass" if c.passed(gc["tol"]) else "FAIL"
        lines.append(f"{c.loss},{c.backbone},{c.restarts},{fmt_num(c.max_rel_error)},"
                     f"{c.checked},{c.skipped},{c.kinks},{status}")
        print(f"{c.loss:>14} {c.backbone:>4}  max_rel_error={c.max_rel_error:.3e}  {status}")
    path = _write(cfg.out / OUTPUTS["gradcheck"], "\n".join(lines) + "\n")
    bad = sum(not c.passed(gc["tol"]) for c in cells)
    print(f"{len(cells)} cells, {bad} failed -> {path}")
    return EXIT_OK if bad == 0 else EXIT_INVALID


COMMANDS = {"gen-synth": cmd_gen_synth, "sweep": cmd_sweep, "search": cmd_search,
            "mutation-eval": cmd_mutation_eval, "gradcheck": cmd_gradcheck}


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=_nonneg, help="base seed (gen-synth: table seed)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=_positive, help="worker processes")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config field, e.g. train.epochs=50")

    parser = _Parser(prog="pwlnas", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synth", parents=[common], help="write a synthetic table")
    g.add_argument("--space", choices=sorted(SPACE_PRESETS))
    g.add_argument("--size", type=_positive)
    g.add_argument("--ruggedness", type=float)
    g.add_argument("--format", choices=("jsonl", "csv"))

    def model_flags(p):
        p.add_argument("--table", help="table file (.jsonl or .csv)")
        p.add_argument("--space", choices=sorted(SPACE_PRESETS))
        p.add_argument("--backbone", action="append", choices=BACKBONES)
        p.add_argument("--epochs", type=_nonneg)
        p.add_argument("--oracle", action="store_true",
                       help="score with stored val_perf instead of training")

    for name, text in (("sweep", "portion sweep of predictor losses"),
                       ("mutation-eval", "evaluate on a mutation-based test set")):
        p = sub.add_parser(name, parents=[common], help=text)
        model_flags(p)
        p.add_argument("--loss", action="append", help="loss kind[:field=value,...]")
        p.add_argument("--portion", action="append", type=float)
        p.add_argument("--repeats", type=_positive)

    s = sub.add_parser("search", parents=[common], help="predictor-guided search")
    model_flags(s)
    s.add_argument("--budget", type=_positive)
    s.add_argument("--init", type=_positive)
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--runs", type=_positive, help="seeds seed .. seed+runs-1")
    s.add_argument("--compare-random", action="store_true")
    s.add_argument("--warm-start", action="store_true")

    c = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    c.add_argument("--loss", action="append", choices=L.KINDS)
    c.add_argument("--backbone", action="append", choices=BACKBONES)
    c.add_argument("--restarts", type=_positive)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        cfg = build_config(args.command, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](cfg)
    except (PwlnasError, OSError, ValueError) as exc:
        print(f"{args.command}: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
