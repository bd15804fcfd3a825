"""Desk-scale end-to-end experiment: datasets, model training, comparison tables, extraneous test.

Each stage caches its artifact under a work directory keyed by the settings,
so a re-run only recomputes what is missing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .evaluation import (
    NA,
    NetworkPredictor,
    benchmark_prediction,
    error_grid,
    evaluate_suite,
    format_suite,
    heuristic_predictors,
    solve_time_percentiles,
    write_suite_csv,
    write_timing_csv,
)
from .fleet import Fleet, default_fleet
from .neural import (
    CLASSIFICATION,
    REGRESSION,
    NetworkConfig,
    SearchSpace,
    UnsupportedInputError,
    class_support,
    load_checkpoint,
    predict_counts,
    random_search,
    save_checkpoint,
)
from .pipeline import GenerationJob, generate_dataset
from .sampling import Protocol, SamplingPlan, WeightModel, data_class, instance_1s
from .storage import read_dataset, write_dataset
from .summarize import OBEFML, OTHRML, TEST, Dataset

log = logging.getLogger(__name__)

MODELS = ("ClassMLP", "RegMLP", "LogReg", "LinReg")
BASELINES = ("LogReg", "LinReg", "HeurV", "HeurS")


@dataclass(frozen=True)
class ExperimentConfig:
    n_main: int = 20000
    k_main: int = 25
    n_extra: int = 5000  # cohorts per additional training class (B', C')
    n_extraneous: int = 2000  # D' evaluation cohorts
    k_extra: int = 25
    trials_mlp: int = 5
    trials_linear: int = 3
    mlp_layers: tuple[int, int] = (2, 4)
    mlp_width: tuple[int, int] = (64, 128)
    l1: tuple[float, float] = (0.0, 1e-4)
    l2: tuple[float, float] = (0.0, 1e-4)
    max_epochs: int = 300
    patience: int = 10
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 20240601
    timing_samples: int = 500
    solve_timing_samples: int = 300
    grid_bin: int = 2
    grid_min_count: int = 20
    workers: int = 1

    def key(self) -> str:
        d = asdict(self)
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


QUICK = ExperimentConfig(
    n_main=300,
    k_main=3,
    n_extra=100,
    n_extraneous=60,
    k_extra=3,
    trials_mlp=2,
    trials_linear=1,
    max_epochs=30,
    timing_samples=40,
    solve_timing_samples=20,
    grid_min_count=1,
)


@dataclass
class SearchOutcome:
    best: NetworkPredictor
    trials: list[NetworkPredictor]
    meta: dict[str, Any]


@dataclass
class ExperimentResult:
    comparison: dict[str, dict[str, float]]  # aggregation -> model -> test MAE
    comparison_se: dict[str, dict[str, float]]
    extraneous: dict[str, Any]
    latency_ms: dict[str, dict[str, float]]
    grids: dict[str, dict[str, Any]]
    config: dict[str, Any] = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentResult":
        return cls(**d)


def _timing_dict(r) -> dict[str, float]:
    return {"p5": r.p5, "p50": r.p50, "p95": r.p95}


class Experiment:
    def __init__(
        self,
        workdir: Path | str,
        config: ExperimentConfig = ExperimentConfig(),
        fleet: Optional[Fleet] = None,
        echo: Optional[Callable[[str], None]] = None,
    ):
        self.config = config
        self.fleet = fleet or default_fleet()
        self.dir = Path(workdir) / f"run-{config.key()}-{self.fleet.hash}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.echo = echo or log.info
        self.seconds: dict[str, float] = {}

    # -- datasets --

    def dataset(self, tag: str, aggregation: str, n: int, k: int, seed_offset: int) -> Dataset:
        protocol = Protocol.TWO_STAGE if aggregation == OBEFML else Protocol.ONE_STAGE
        name = f"data_{tag.replace(chr(39), 'p')}_{aggregation}_{n}x{k}"
        path = self.dir / f"{name}.lcds"
        if not path.exists():
            plan = SamplingPlan(protocol, data_class(tag), self.config.seed + seed_offset, k)
            t0 = time.perf_counter()
            ds = generate_dataset(GenerationJob(plan, n, aggregation, self.fleet), workers=self.config.workers)
            self.seconds[name] = time.perf_counter() - t0
            self.echo(f"generated {name} in {self.seconds[name]:.0f} s")
            write_dataset(ds, path)
        return read_dataset(path)

    def main_dataset(self, aggregation: str) -> Dataset:
        c = self.config
        if aggregation == OBEFML:
            return self.dataset("A'", OBEFML, c.n_main, c.k_main, 1)
        return self.dataset("A'", OTHRML, c.n_main, 1, 2)

    def extra_dataset(self, tag: str) -> Dataset:
        c = self.config
        offset = {"B'": 3, "C'": 4, "D'": 5}[tag]
        n = c.n_extraneous if tag == "D'" else c.n_extra
        return self.dataset(tag, OBEFML, n, c.k_extra, offset)

    # -- models --

    def _search_setup(self, model: str, support_tags) -> tuple[SearchSpace, int, NetworkConfig]:
        c = self.config
        head = CLASSIFICATION if model in ("ClassMLP", "LogReg") else REGRESSION
        support = class_support([data_class(t) for t in support_tags], self.fleet) if head == CLASSIFICATION else None
        base = NetworkConfig(
            head=head,
            max_counts=support,
            learning_rate=c.learning_rate,
            batch_size=c.batch_size,
            patience=c.patience,
            max_epochs=c.max_epochs,
        )
        if model in ("ClassMLP", "RegMLP"):
            return SearchSpace(c.mlp_layers, c.mlp_width, c.l1, c.l2), c.trials_mlp, base
        return SearchSpace((0, 0), (1, 1), c.l1, c.l2), c.trials_linear, base

    def search(self, model: str, ds: Dataset, tag: str, support_tags=("A'",)) -> SearchOutcome:
        """Random search for one model family on ``ds``; networks cached per trial."""
        stem = f"model_{model}_{tag}"
        meta_path = self.dir / f"{stem}.json"
        if not meta_path.exists():
            space, trials, base = self._search_setup(model, support_tags)
            t0 = time.perf_counter()
            res = random_search(space, trials, ds, self.config.seed + 100, self.fleet, base)
            seconds = time.perf_counter() - t0
            for i, tr in enumerate(res.trials):
                save_checkpoint(self.dir / f"{stem}_t{i}.lcnn", tr.network, self.fleet.hash, tr.report)
            meta = {
                "trials": len(res.trials),
                "best": res.best_index,
                "validation_mae": [t.validation_mae for t in res.trials],
                "test_mae": [t.test_mae for t in res.trials],
                "epochs": [t.report.epochs_run for t in res.trials],
                "configs": [t.config.to_dict() for t in res.trials],
                "seconds": seconds,
            }
            meta_path.write_text(json.dumps(meta, indent=1))
            self.echo(f"trained {model} on {tag} in {seconds:.0f} s, validation MAE {min(meta['validation_mae']):.3f}")
        meta = json.loads(meta_path.read_text())
        preds = [
            NetworkPredictor(load_checkpoint(self.dir / f"{stem}_t{i}.lcnn")[0], model) for i in range(meta["trials"])
        ]
        return SearchOutcome(preds[meta["best"]], preds, meta)

    # -- stages --

    def comparison(self, aggregation: str) -> tuple[dict[str, float], dict[str, float], dict[str, SearchOutcome]]:
        ds = self.main_dataset(aggregation)
        outcomes = {m: self.search(m, ds, f"A_{aggregation}") for m in MODELS}
        models = {m: o.best for m, o in outcomes.items()}
        models.update(heuristic_predictors(self.fleet))
        test = {"test": (ds.inputs(TEST), ds.targets(TEST))}
        table = evaluate_suite(models, test, self.fleet, {m: o.trials for m, o in outcomes.items()})
        write_suite_csv(table, self.dir / f"table_inside_{aggregation}.csv")
        (self.dir / f"table_inside_{aggregation}.txt").write_text(format_suite(table) + "\n")
        mae = {m: table.mae(m, "test") for m in table.models}
        se = {m: table.cells[(m, "test")].se_mae for m in table.models}
        return mae, se, outcomes

    def extraneous(self, a_outcomes: dict[str, SearchOutcome]) -> dict[str, Any]:
        """A'-trained models on D'; RegMLP retrained on A' + B' + C' for comparison."""
        d = self.extra_dataset("D'")
        x, y = d.inputs(), d.targets()
        union = self.main_dataset(OBEFML).merged(self.extra_dataset("B'")).merged(self.extra_dataset("C'"))
        reg_union = self.search("RegMLP", union, "ABC_obefml", support_tags=("A'", "B'", "C'"))
        models = {
            "RegMLP_A": a_outcomes["RegMLP"].best,
            "ClassMLP_A": a_outcomes["ClassMLP"].best,
            "LinReg_A": a_outcomes["LinReg"].best,
            "RegMLP_ABC": reg_union.best,
        }
        models.update(heuristic_predictors(self.fleet))
        alternates = {"RegMLP_A": a_outcomes["RegMLP"].trials, "RegMLP_ABC": reg_union.trials}
        table = evaluate_suite(models, {"D'": (x, y)}, self.fleet, alternates)
        write_suite_csv(table, self.dir / "table_extraneous_obefml.csv")
        (self.dir / "table_extraneous_obefml.txt").write_text(format_suite(table) + "\n")

        support = a_outcomes["ClassMLP"].best.net.config.max_counts
        beyond = np.any(x > np.array(support), axis=1)
        refused = 0
        for row in x[beyond]:
            try:
                predict_counts(a_outcomes["ClassMLP"].best.net, row)
            except UnsupportedInputError:
                refused += 1
        reg_pred = a_outcomes["RegMLP"].best.predict_batch(x)
        return {
            "mae": {m: table.mae(m, "D'") for m in table.models},
            "na": [m for m in table.models if table.cells[(m, "D'")] == NA],
            "ranges": {m: list(r) for (m, _), r in table.ranges.items()},
            "n": int(len(x)),
            "beyond_class_support": int(beyond.sum()),
            "class_refusals": refused,
            "regmlp_feasible": bool(np.all((reg_pred >= 0) & (reg_pred <= x))),
        }

    def latency(self, reg: NetworkPredictor) -> dict[str, dict[str, float]]:
        c = self.config
        sketches = self.main_dataset(OBEFML).sketches(TEST)[: c.timing_samples]
        reports = {"RegMLP": benchmark_prediction(reg, sketches)}
        for name, h in heuristic_predictors(self.fleet).items():
            reports[name] = benchmark_prediction(h, sketches)
        insts = [instance_1s(i, data_class("A'"), c.seed + 9, self.fleet, WeightModel()) for i in range(c.solve_timing_samples)]
        reports["solve_lpp"] = solve_time_percentiles(insts, self.fleet)
        write_timing_csv(reports, self.dir / "table_latency.csv")
        return {k: _timing_dict(v) for k, v in reports.items()}

    def grid(self, aggregation: str, reg: NetworkPredictor) -> dict[str, Any]:
        c = self.config
        ds = self.main_dataset(aggregation)
        x, y = ds.inputs(TEST), ds.targets(TEST)
        g = error_grid(reg.predict_batch(x), y, x, self.fleet, c.grid_bin, c.grid_bin)
        g.write_csv(self.dir / f"grid_regmlp_{aggregation}.csv")
        bx, by = g.argmax(c.grid_min_count)
        return {
            "argmax": [bx, by],
            "argmax_mae": g.cells[(bx, by)][0],
            "overall": g.overall(),
            "cells": {f"{k[0]},{k[1]}": list(v) for k, v in sorted(g.cells.items())},
        }

    def run(self) -> ExperimentResult:
        path = self.dir / "results.json"
        if path.exists():
            return ExperimentResult.from_dict(json.loads(path.read_text()))
        t0 = time.perf_counter()
        comparison, comparison_se, outcomes = {}, {}, {}
        for agg in (OBEFML, OTHRML):
            comparison[agg], comparison_se[agg], outcomes[agg] = self.comparison(agg)
        extraneous = self.extraneous(outcomes[OBEFML])
        latency = self.latency(outcomes[OBEFML]["RegMLP"].best)
        grids = {agg: self.grid(agg, outcomes[agg]["RegMLP"].best) for agg in (OBEFML, OTHRML)}
        self.seconds["total"] = time.perf_counter() - t0
        result = ExperimentResult(
            comparison, comparison_se, extraneous, latency, grids, asdict(self.config), dict(self.seconds)
        )
        path.write_text(json.dumps(result.to_dict(), indent=1))
        return result
