"""``loadcast`` command line: fleet, generate, train, predict, eval, bench, experiment, replay.

Settings resolve as: command-line flag, then ``LOADCAST_<NAME>`` environment
variable, then the JSON config file (top level or a section named after the
command), then the built-in default.  Every command that writes files also
writes a ``<output>.manifest.json`` sidecar.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 data error, 5 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .evaluation import (
    NetworkPredictor,
    Predictor,
    benchmark_prediction,
    evaluate_suite,
    format_suite,
    heuristic_predictors,
    solve_time_percentiles,
    write_suite_csv,
    write_timing_csv,
)
from .fleet import Fleet, FleetConfigError, default_fleet, default_fleet_path, load_fleet, validate_fleet_document
from .neural import (
    CLASSIFICATION,
    REGRESSION,
    NetworkConfig,
    SearchSpace,
    UnsupportedInputError,
    class_support,
    load_checkpoint,
    random_search,
    save_checkpoint,
    train,
)
from .pipeline import GenerationJob, generate_dataset
from .sampling import Protocol, SamplingPlan, WeightModel, data_class, instance_1s, InstanceSketch
from .storage import DataFormatError, read_dataset, read_dataset_csv, write_dataset, write_dataset_csv
from .summarize import AGGREGATIONS, OBEFML, Dataset

log = logging.getLogger("loadcast")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_RUNTIME = 5

ENV_PREFIX = "LOADCAST_"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# --- manifest -------------------------------------------------------------------


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hardware_string() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} x{os.cpu_count()}; {platform.platform()}; python {platform.python_version()}; numpy {np.__version__}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: list[str]
    fleet_hash: str
    seeds: dict[str, int]
    config: dict[str, Any]
    hardware: str = field(default_factory=hardware_string)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started: str = field(default_factory=_now)
    finished: str = ""
    version: str = __version__

    def add_input(self, path: Path | str) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path: Path | str) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path: Path | str) -> Path:
        self.finished = _now()
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path: Path | str) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def manifest_path(output: Path | str) -> Path:
    return Path(str(output) + ".manifest.json")


# --- settings -------------------------------------------------------------------

# per-command defaults; None means "required unless supplied somewhere"
DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {
        "data_class": "A'",
        "protocol": "2s",
        "n": 1000,
        "k": 25,
        "agg": OBEFML,
        "seed": 0,
        "workers": 1,
        "out": None,
        "csv": False,
        "split_seed": None,
    },
    "train": {
        "model": "regmlp",
        "data": None,
        "out": None,
        "seed": 0,
        "hidden_layers": 2,
        "hidden_width": 64,
        "l1": 0.0,
        "l2": 0.0,
        "trials": 0,
        "search_layers": [2, 4],
        "search_width": [64, 128],
        "search_l1": [0.0, 1e-4],
        "search_l2": [0.0, 1e-4],
        "epochs": 200,
        "patience": 10,
        "lr": 1e-3,
        "batch_size": 128,
        "support": None,
    },
    "eval": {"data": None, "checkpoint": [], "heuristics": True, "out": None, "split": "test"},
    "bench": {
        "data": None,
        "checkpoint": [],
        "heuristics": True,
        "out": None,
        "samples": 500,
        "solve_samples": 0,
        "data_class": "A'",
        "seed": 0,
    },
    "experiment": {"workdir": "artifacts/experiment", "quick": False, "workers": 1},
}

_INT_KEYS = {"n", "k", "seed", "workers", "hidden_layers", "hidden_width", "trials", "epochs", "patience", "batch_size", "samples", "solve_samples", "split_seed"}
_FLOAT_KEYS = {"l1", "l2", "lr"}
_BOOL_KEYS = {"csv", "heuristics", "quick"}


def _coerce(key: str, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if key in _BOOL_KEYS:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if key.startswith("search_") or key == "checkpoint":
        return [p for p in value.replace(",", " ").split() if p]
    return value


def load_config_file(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def resolve(command: str, ns: argparse.Namespace, env: Optional[dict[str, str]] = None) -> dict[str, Any]:
    """Merge flags > environment > config file > defaults for one command."""
    env = os.environ if env is None else env
    file_cfg = load_config_file(getattr(ns, "config", None) or env.get(ENV_PREFIX + "CONFIG"))
    section = file_cfg.get(command, {})
    out = {}
    for key, default in DEFAULTS[command].items():
        flag = getattr(ns, key, None)
        env_key = ENV_PREFIX + key.upper()
        if flag is not None and flag != []:
            value = flag
        elif env_key in env:
            value = env[env_key]
        elif key in section:
            value = section[key]
        elif key in file_cfg:
            value = file_cfg[key]
        else:
            value = default
        out[key] = _coerce(key, value)
    return out


def _fleet(ns: argparse.Namespace, env: Optional[dict[str, str]] = None) -> tuple[Fleet, Optional[Path]]:
    env = os.environ if env is None else env
    file_cfg = load_config_file(getattr(ns, "config", None) or env.get(ENV_PREFIX + "CONFIG"))
    path = ns.fleet or env.get(ENV_PREFIX + "FLEET") or file_cfg.get("fleet")
    if path is None:
        return default_fleet(), None
    return load_fleet(path), Path(path)


def _require(cfg: dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, [], "")]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _read_any_dataset(path: str) -> Dataset:
    if not Path(path).exists():
        raise DataError(f"dataset not found: {path}")
    return read_dataset_csv(path) if str(path).endswith(".csv") else read_dataset(path)


# --- commands -------------------------------------------------------------------


def cmd_fleet(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    if ns.action == "validate":
        path = ns.path or ns.fleet or default_fleet_path()
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"fleet file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        problems = validate_fleet_document(doc)
        if problems:
            for p in problems:
                print(f"{path}: {p}", file=sys.stderr)
            return EXIT_CONFIG
        load_fleet(path)  # semantic checks beyond the schema
        print(f"{path}: ok (hash {load_fleet(path).hash})")
        return EXIT_OK
    fleet, _ = _fleet(ns) if ns.path is None else (load_fleet(ns.path), None)
    doc = fleet.to_dict()
    doc["hash"] = fleet.hash
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_generate(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = resolve("generate", ns)
    _require(cfg, "out")
    fleet, fleet_path = _fleet(ns)
    try:
        dc = data_class(cfg["data_class"])
        protocol = Protocol(cfg["protocol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["agg"] not in AGGREGATIONS:
        raise ConfigError(f"--agg must be one of {', '.join(AGGREGATIONS)}")
    if cfg["n"] < 0 or cfg["k"] < 1:
        raise ConfigError("--n must be >= 0 and --k >= 1")
    k = cfg["k"] if protocol == Protocol.TWO_STAGE else 1
    plan = SamplingPlan(protocol, dc, cfg["seed"], k)
    job = GenerationJob(plan, cfg["n"], cfg["agg"], fleet, WeightModel(), split_seed=cfg["split_seed"])
    man = RunManifest(list(argv), fleet.hash, {"seed": cfg["seed"], "split_seed": job.seed_for_split}, cfg)
    if fleet_path:
        man.add_input(fleet_path)
    ds = generate_dataset(job, workers=cfg["workers"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out)
    man.add_output(out)
    if cfg["csv"]:
        csv_path = out.with_suffix(".csv")
        write_dataset_csv(ds, csv_path)
        man.add_output(csv_path)
    man.write(manifest_path(out))
    counts = ds.counts()
    print(f"wrote {len(ds)} examples to {out} (train {counts[0]}, validation {counts[1]}, test {counts[2]})")
    return EXIT_OK


def _support_from(ds: Dataset, explicit: Optional[str], fleet: Fleet) -> tuple[int, ...]:
    if explicit:
        tags = [t for t in explicit.replace(",", " ").split() if t]
    else:
        tag = (ds.provenance or {}).get("plan", {}).get("data_class")
        if tag is None:
            # no provenance (e.g. CSV input): cover what is observed
            x = ds.inputs()
            return tuple(int(v) for v in x.max(axis=0))
        tags = [tag]
    try:
        return class_support([data_class(t) for t in tags], fleet)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_MODELS = {
    "classmlp": (CLASSIFICATION, False),
    "regmlp": (REGRESSION, False),
    "logreg": (CLASSIFICATION, True),
    "linreg": (REGRESSION, True),
}


def cmd_train(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = resolve("train", ns)
    _require(cfg, "data", "out")
    if cfg["model"] not in _MODELS:
        raise ConfigError(f"--model must be one of {', '.join(_MODELS)}")
    fleet, fleet_path = _fleet(ns)
    ds = _read_any_dataset(cfg["data"])
    head, linear = _MODELS[cfg["model"]]
    try:
        base = NetworkConfig(
            hidden_layers=0 if linear else cfg["hidden_layers"],
            hidden_width=cfg["hidden_width"],
            l1=cfg["l1"],
            l2=cfg["l2"],
            head=head,
            max_counts=_support_from(ds, cfg["support"], fleet) if head == CLASSIFICATION else None,
            learning_rate=cfg["lr"],
            batch_size=cfg["batch_size"],
            patience=cfg["patience"],
            max_epochs=cfg["epochs"],
            init_seed=cfg["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    man = RunManifest(list(argv), fleet.hash, {"seed": cfg["seed"]}, cfg)
    man.add_input(cfg["data"])
    if fleet_path:
        man.add_input(fleet_path)
    if cfg["trials"] > 0:
        lo_l, hi_l = (0, 0) if linear else map(int, cfg["search_layers"])
        space = SearchSpace(
            (lo_l, hi_l),
            tuple(int(v) for v in cfg["search_width"]),
            tuple(float(v) for v in cfg["search_l1"]),
            tuple(float(v) for v in cfg["search_l2"]),
        )
        res = random_search(space, cfg["trials"], ds, cfg["seed"], fleet, base)
        net, report = res.best_network, res.best_report
        extra = {
            "trials": [
                {"config": t.config.to_dict(), "validation_mae": t.validation_mae, "test_mae": t.test_mae}
                for t in res.trials
            ],
            "best_index": res.best_index,
            "test_mae_range": list(res.test_range()),
        }
    else:
        net, report = train(base, ds, fleet)
        extra = {}
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, net, fleet.hash, report)
    rep_path = Path(str(out) + ".report.json")
    rep = {
        "model": cfg["model"],
        "validation_mae": report.validation_mae,
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
        "config": net.config.to_dict(),
        "wall_clock_s": report.wall_clock,
        **extra,
    }
    rep_path.write_text(json.dumps(rep, indent=1) + "\n")
    man.add_output(out)
    man.add_output(rep_path)
    man.write(manifest_path(out))
    print(f"{cfg['model']}: validation MAE {report.validation_mae:.4f} after {report.epochs_run} epochs -> {out}")
    return EXIT_OK


def _named_checkpoints(specs: Sequence[str], fleet: Fleet) -> dict[str, Predictor]:
    out = {}
    for spec in specs:
        name, _, path = spec.rpartition("=")
        name = name or Path(path).stem
        if not Path(path).exists():
            raise DataError(f"checkpoint not found: {path}")
        try:
            net, header = load_checkpoint(path)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        if header.get("fleet_hash") and header["fleet_hash"] != fleet.hash:
            raise ConfigError(f"{path} was trained for fleet {header['fleet_hash']}, not {fleet.hash}")
        out[name] = NetworkPredictor(net, name)
    return out


_HEURISTICS = {"heurv": "HeurV", "heurs": "HeurS"}


def _parse_sketches(values: Sequence[str], path: Optional[str]) -> np.ndarray:
    rows = []
    if path:
        p = Path(path)
        if not p.exists():
            raise DataError(f"input not found: {path}")
        if p.suffix in (".lcds", ".bin"):
            return read_dataset(p).inputs()
        for lineno, line in enumerate(p.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            try:
                rows.append([int(v) for v in line.replace(",", " ").split()][:12])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != 12:
                raise DataError(f"{path}:{lineno}: expected 12 integers")
    else:
        try:
            rows.append([int(v) for v in values])
        except ValueError as exc:
            raise DataError(str(exc)) from None
        if len(rows[0]) != 12:
            raise DataError(f"expected 12 integers (10 railcar counts, 40 ft and 53 ft containers), got {len(rows[0])}")
    x = np.array(rows, dtype=np.int64).reshape(-1, 12)
    if np.any(x < 0):
        raise DataError("counts must be nonnegative")
    return x


def cmd_predict(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    fleet, _ = _fleet(ns)
    if (ns.checkpoint is None) == (ns.heuristic is None):
        raise ConfigError("give exactly one of --checkpoint or --heuristic")
    if ns.heuristic:
        predictor = heuristic_predictors(fleet)[_HEURISTICS[ns.heuristic]]
    else:
        predictor = next(iter(_named_checkpoints([ns.checkpoint], fleet).values()))
    x = _parse_sketches(ns.sketch, ns.file)
    try:
        y = predictor.predict_batch(x)
    except UnsupportedInputError as exc:
        raise DataError(str(exc)) from None
    for row in y:
        print(" ".join(str(int(v)) for v in row))
    return EXIT_OK


def _predictors(cfg: dict[str, Any], fleet: Fleet) -> dict[str, Predictor]:
    models = _named_checkpoints(cfg["checkpoint"], fleet)
    if cfg["heuristics"]:
        models.update(heuristic_predictors(fleet))
    if not models:
        raise ConfigError("nothing to evaluate: give --checkpoint NAME=PATH and/or keep heuristics enabled")
    return models


_SPLITS = {"train": 0, "validation": 1, "test": 2, "all": None}


def cmd_eval(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = resolve("eval", ns)
    _require(cfg, "data", "out")
    if cfg["split"] not in _SPLITS:
        raise ConfigError(f"--split must be one of {', '.join(_SPLITS)}")
    fleet, _ = _fleet(ns)
    models = _predictors(cfg, fleet)
    paths = cfg["data"] if isinstance(cfg["data"], list) else [cfg["data"]]
    datasets = {}
    man = RunManifest(list(argv), fleet.hash, {}, cfg)
    for p in paths:
        ds = _read_any_dataset(p)
        part = _SPLITS[cfg["split"]]
        datasets[Path(p).stem] = (ds.inputs(part), ds.targets(part))
        man.add_input(p)
    table = evaluate_suite(models, datasets, fleet)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_suite_csv(table, out)
    text = format_suite(table)
    txt = out.with_suffix(".txt")
    txt.write_text(text + "\n")
    man.add_output(out)
    man.add_output(txt)
    man.write(manifest_path(out))
    print(text)
    return EXIT_OK


def cmd_bench(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = resolve("bench", ns)
    _require(cfg, "out")
    fleet, _ = _fleet(ns)
    models = _predictors(cfg, fleet)
    try:
        dc = data_class(cfg["data_class"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    man = RunManifest(list(argv), fleet.hash, {"seed": cfg["seed"]}, cfg)
    if cfg["data"]:
        sketches = [InstanceSketch.from_vector(r) for r in _read_any_dataset(cfg["data"]).inputs()[: cfg["samples"]]]
        man.add_input(cfg["data"])
    else:
        sketches = [instance_1s(i, dc, cfg["seed"], fleet, WeightModel()).sketch for i in range(cfg["samples"])]
    reports = {}
    for name, p in models.items():
        try:
            reports[name] = benchmark_prediction(p, sketches)
        except UnsupportedInputError as exc:
            log.warning("skipping %s: %s", name, exc)
    if cfg["solve_samples"] > 0:
        insts = [instance_1s(i, dc, cfg["seed"], fleet, WeightModel()) for i in range(cfg["solve_samples"])]
        reports["solve_lpp"] = solve_time_percentiles(insts, fleet)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_timing_csv(reports, out)
    man.add_output(out)
    man.write(manifest_path(out))
    for name, r in reports.items():
        print(f"{name:<12} p5 {r.p5:9.4f} ms  p50 {r.p50:9.4f} ms  p95 {r.p95:9.4f} ms")
    return EXIT_OK


def cmd_experiment(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    from dataclasses import replace

    from .experiment import QUICK, Experiment, ExperimentConfig

    cfg = resolve("experiment", ns)
    fleet, _ = _fleet(ns)
    base = QUICK if cfg["quick"] else ExperimentConfig()
    exp = Experiment(cfg["workdir"], replace(base, workers=cfg["workers"]), fleet, echo=print)
    res = exp.run()
    for agg, row in res.comparison.items():
        print(agg + ": " + ", ".join(f"{m} {v:.3f}" for m, v in row.items()))
    print("extraneous: " + ", ".join(f"{m} {v:.3f}" for m, v in res.extraneous["mae"].items()))
    print(f"results in {exp.dir}")
    return EXIT_OK


def cmd_replay(ns: argparse.Namespace, argv: Sequence[str]) -> int:
    """Re-run the command recorded in a manifest and compare output hashes."""
    try:
        man = RunManifest.read(ns.manifest)
    except (FileNotFoundError, json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"cannot read manifest {ns.manifest}: {exc}") from None
    before = dict(man.outputs)
    code = main(man.command)
    if code != EXIT_OK:
        return code
    changed = [p for p, h in before.items() if not Path(p).exists() or sha256_file(p) != h]
    for p in changed:
        print(f"differs: {p}", file=sys.stderr)
    if not changed:
        print(f"reproduced {len(before)} file(s) byte for byte")
    return EXIT_OK if not changed else EXIT_RUNTIME


COMMANDS: dict[str, Callable[[argparse.Namespace, Sequence[str]], int]] = {
    "fleet": cmd_fleet,
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "experiment": cmd_experiment,
    "replay": cmd_replay,
}


def _bool_flag(p: argparse.ArgumentParser, name: str, help: str) -> None:
    dest = name.replace("-", "_")
    p.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=None, help=help)
    p.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (LOADCAST_CONFIG)")
    common.add_argument("--fleet", help="fleet JSON (LOADCAST_FLEET); defaults to the bundled fleet")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="loadcast", description="Predict railcar load-plan summaries.", parents=[common])
    parser.add_argument("--version", action="version", version=f"loadcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fleet", parents=[common], help="show or validate a fleet config")
    p.add_argument("action", choices=["show", "validate"])
    p.add_argument("path", nargs="?")

    p = sub.add_parser("generate", parents=[common], help="sample, solve and label a dataset")
    p.add_argument("--class", dest="data_class", help="data class: A-D or desk variants A'-D' (also Ap-Dp)")
    p.add_argument("--protocol", choices=["1s", "2s"])
    p.add_argument("--n", type=int, help="number of examples (cohorts for 2s)")
    p.add_argument("--k", type=int, help="weight draws per cohort (2s)")
    p.add_argument("--agg", choices=list(AGGREGATIONS))
    p.add_argument("--seed", type=int)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    _bool_flag(p, "csv", "also write a CSV copy")

    p = sub.add_parser("train", parents=[common], help="train a network (optionally with random search)")
    p.add_argument("--model", choices=list(_MODELS))
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden-layers", type=int)
    p.add_argument("--hidden-width", type=int)
    p.add_argument("--l1", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--trials", type=int, help="random-search trials (0 trains the given config)")
    p.add_argument("--search-layers", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--search-width", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--search-l1", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--search-l2", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--support", help="data classes the classification head must cover, e.g. \"A',B'\"")

    p = sub.add_parser("predict", parents=[common], help="predict summaries for sketches")
    p.add_argument("--checkpoint")
    p.add_argument("--heuristic", choices=list(_HEURISTICS))
    p.add_argument("--file", help="text/CSV file with 12 integers per line, or a dataset file")
    p.add_argument("sketch", nargs="*", help="12 integers: railcar counts for types 1-10, then 40 ft and 53 ft containers")

    for name, helptext in (("eval", "MAE tables"), ("bench", "latency percentiles")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--data", nargs="+" if name == "eval" else None)
        p.add_argument("--checkpoint", nargs="+", metavar="NAME=PATH")
        _bool_flag(p, "heuristics", "include HeurV and HeurS")
        p.add_argument("--out")
        if name == "eval":
            p.add_argument("--split", choices=list(_SPLITS))
        else:
            p.add_argument("--samples", type=int)
            p.add_argument("--solve-samples", type=int)
            p.add_argument("--class", dest="data_class")
            p.add_argument("--seed", type=int)

    p = sub.add_parser("experiment", parents=[common], help="run the desk-scale experiment end to end")
    p.add_argument("--workdir")
    p.add_argument("--workers", type=int)
    _bool_flag(p, "quick", "tiny smoke-test sizes")

    p = sub.add_parser("replay", parents=[common], help="re-run a manifest and check outputs are identical")
    p.add_argument("manifest")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[ns.command](ns, argv)
    except (ConfigError, FleetConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DataFormatError, UnsupportedInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
