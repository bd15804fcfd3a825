"""Slot-weighted error metrics, latency benchmarks, result tables and error grids."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .fleet import Fleet, slots_of
from .heuristics import heur_s, heur_v
from .neural import Network, UnsupportedInputError, predict_counts
from .sampling import FullInstance, InstanceSketch
from .solver import SolverConfig, solve_lpp
from .summarize import Summary


@dataclass(frozen=True)
class MetricReport:
    mae: float
    mae_slots: float
    mae_conts: float
    se_mae: float
    se_slots: float
    se_conts: float
    n: int

    def row(self) -> list[float]:
        return [self.mae, self.se_mae, self.mae_slots, self.se_slots, self.mae_conts, self.se_conts, self.n]


def _as_matrix(items) -> np.ndarray:
    rows = [s.vector() if isinstance(s, (Summary, InstanceSketch)) else np.asarray(s) for s in items]
    return np.array(rows, dtype=np.float64).reshape(-1, 12)


def _sem(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def mae_metrics(predictions, targets, fleet: Fleet) -> MetricReport:
    """Slot-weighted MAE split into railcar and container parts, with standard errors of the means.

    Railcar type j carries weight 2 * platforms_j (its slot count); each
    container coordinate carries weight 1.
    """
    p, t = _as_matrix(predictions), _as_matrix(targets)
    if len(p) != len(t):
        raise ValueError(f"{len(p)} predictions for {len(t)} targets")
    if len(p) == 0:
        raise ValueError("need at least one prediction")
    err = np.abs(p - t)
    slots = err[:, :10] @ slots_of(fleet).astype(np.float64)
    conts = err[:, 10:].sum(axis=1)
    ms, mc = float(slots.mean()), float(conts.mean())
    return MetricReport(ms + mc, ms, mc, _sem(slots + conts), _sem(slots), _sem(conts), len(p))


# --- predictors ---------------------------------------------------------------


class Predictor:
    """Maps sketches to summaries; ``predict_batch`` works on (n, 12) count arrays."""

    name = "predictor"

    def predict(self, sketch: InstanceSketch) -> Summary:
        return Summary.from_vector(self.predict_batch(sketch.vector()[None, :])[0])

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class NetworkPredictor(Predictor):
    def __init__(self, net: Network, name: str = "network"):
        self.net = net
        self.name = name

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        return predict_counts(self.net, x)


class HeuristicPredictor(Predictor):
    def __init__(self, fn: Callable[[InstanceSketch, Fleet], Summary], fleet: Fleet, name: str):
        self.fn = fn
        self.fleet = fleet
        self.name = name

    def predict(self, sketch: InstanceSketch) -> Summary:
        return self.fn(sketch, self.fleet)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64).reshape(-1, 12)
        return np.array([self.fn(InstanceSketch.from_vector(r), self.fleet).vector() for r in x]).reshape(-1, 12)


def heuristic_predictors(fleet: Fleet) -> dict[str, HeuristicPredictor]:
    return {"HeurV": HeuristicPredictor(heur_v, fleet, "HeurV"), "HeurS": HeuristicPredictor(heur_s, fleet, "HeurS")}


# --- timing -------------------------------------------------------------------


@dataclass(frozen=True)
class TimingReport:
    times_ms: np.ndarray = field(repr=False)
    p5: float
    p50: float
    p95: float

    @classmethod
    def from_times(cls, times_ms: Sequence[float]) -> "TimingReport":
        t = np.asarray(times_ms, dtype=np.float64)
        p5, p50, p95 = np.percentile(t, [5, 50, 95])
        return cls(t, float(p5), float(p50), float(p95))


def benchmark_prediction(
    predictor: Union[Predictor, Callable[[InstanceSketch], Summary]],
    sketches: Sequence[InstanceSketch],
    repetitions: int = 1,
    warmup: int = 10,
) -> TimingReport:
    """Wall-clock per single-sketch prediction, excluding ``warmup`` initial calls."""
    fn = predictor.predict if isinstance(predictor, Predictor) else predictor
    for s in list(sketches)[:warmup]:
        fn(s)
    times = []
    for _ in range(repetitions):
        for s in sketches:
            t0 = time.perf_counter()
            fn(s)
            times.append((time.perf_counter() - t0) * 1e3)
    return TimingReport.from_times(times)


def solve_time_percentiles(
    instances: Iterable[FullInstance], fleet: Fleet, config: SolverConfig = SolverConfig()
) -> TimingReport:
    times = []
    for inst in instances:
        t0 = time.perf_counter()
        solve_lpp(inst, fleet, config)
        times.append((time.perf_counter() - t0) * 1e3)
    return TimingReport.from_times(times)


# --- suites -------------------------------------------------------------------

NA = "NA"


@dataclass
class SuiteTable:
    """MetricReport (or ``NA``) per (model, dataset); optional test-MAE ranges over search trials."""

    cells: dict[tuple[str, str], Union[MetricReport, str]]
    ranges: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    @property
    def models(self) -> list[str]:
        return list(dict.fromkeys(m for m, _ in self.cells))

    @property
    def datasets(self) -> list[str]:
        return list(dict.fromkeys(d for _, d in self.cells))

    def mae(self, model: str, dataset: str) -> float:
        c = self.cells[(model, dataset)]
        return float("nan") if c == NA else c.mae


def _evaluate(predictor: Predictor, sketches, targets, fleet) -> Union[MetricReport, str]:
    x = _as_matrix(sketches)
    try:
        pred = predictor.predict_batch(x)
    except UnsupportedInputError:
        return NA
    if np.any(pred > x) or np.any(pred < 0):
        raise AssertionError(f"{predictor.name} produced an infeasible prediction")
    return mae_metrics(pred, targets, fleet)


def evaluate_suite(
    models: Mapping[str, Predictor],
    datasets: Mapping[str, tuple[Sequence, Sequence]],
    fleet: Fleet,
    alternates: Optional[Mapping[str, Sequence[Predictor]]] = None,
) -> SuiteTable:
    """Evaluate every model on every (sketches, targets) dataset.

    ``alternates`` maps a model name to the predictors of all its search
    trials; their test-MAE range is reported next to the selected model.
    """
    table = SuiteTable({})
    for name, model in models.items():
        for dname, (sketches, targets) in datasets.items():
            table.cells[(name, dname)] = _evaluate(model, sketches, targets, fleet)
            if alternates and name in alternates:
                vals = [_evaluate(p, sketches, targets, fleet) for p in alternates[name]]
                vals = [v.mae for v in vals if v != NA]
                if vals:
                    table.ranges[(name, dname)] = (min(vals), max(vals))
    return table


_HEADER = ["model", "dataset", "mae", "mae_sd", "mae_slots", "mae_slots_sd", "mae_conts", "mae_conts_sd", "n", "range_min", "range_max"]


def write_suite_csv(table: SuiteTable, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_HEADER)
        for (m, d), c in table.cells.items():
            rng = table.ranges.get((m, d), ("", ""))
            vals = [NA] * 7 if c == NA else [f"{v:.6f}" if isinstance(v, float) else v for v in c.row()]
            w.writerow([m, d, *vals, *[f"{r:.6f}" if r != "" else "" for r in rng]])


def format_suite(table: SuiteTable) -> str:
    """Aligned text: MAE with its standard deviation in parentheses, one column per dataset."""
    ds = table.datasets
    lines = [f"{'model':<10}" + "".join(f"{d:>28}" for d in ds)]
    for m in table.models:
        row, row2 = f"{m:<10}", f"{'':<10}"
        for d in ds:
            c = table.cells[(m, d)]
            if c == NA:
                row += f"{NA:>28}"
                row2 += " " * 28
                continue
            row += f"{c.mae:>20.3f} ({c.se_mae:.3f})"
            row2 += f"{'slots ' + format(c.mae_slots, '.3f') + ' conts ' + format(c.mae_conts, '.3f'):>28}"
        lines += [row, row2]
    return "\n".join(lines)


def write_timing_csv(reports: Mapping[str, TimingReport], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["predictor", "p5_ms", "p50_ms", "p95_ms", "n"])
        for name, r in reports.items():
            w.writerow([name, f"{r.p5:.4f}", f"{r.p50:.4f}", f"{r.p95:.4f}", len(r.times_ms)])


# --- error grid ---------------------------------------------------------------


@dataclass
class ErrorGrid:
    bin_slots: int
    bin_conts: int
    cells: dict[tuple[int, int], tuple[float, int]]  # (slots bin, containers bin) -> (mae, count)

    def overall(self) -> float:
        n = sum(c for _, c in self.cells.values())
        return sum(m * c for m, c in self.cells.values()) / n

    def argmax(self, min_count: int = 1) -> tuple[int, int]:
        eligible = {k: v for k, v in self.cells.items() if v[1] >= min_count}
        return max(sorted(eligible), key=lambda k: eligible[k][0])

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_x", "bin_y", "mae", "count"])
            for (bx, by), (m, c) in sorted(self.cells.items()):
                w.writerow([bx * self.bin_slots, by * self.bin_conts, f"{m:.6f}", c])


def available_slots(sketches, fleet: Fleet) -> np.ndarray:
    x = _as_matrix(sketches)
    return (x[:, :10] @ slots_of(fleet)).astype(np.int64)


def error_grid(predictions, targets, sketches, fleet: Fleet, bin_slots: int = 1, bin_conts: int = 1) -> ErrorGrid:
    """MAE per (available slots, available containers) bin."""
    p, t, x = _as_matrix(predictions), _as_matrix(targets), _as_matrix(sketches)
    s = np.concatenate([slots_of(fleet), [1, 1]]).astype(np.float64)
    err = np.abs(p - t) @ s
    bx = available_slots(x, fleet) // bin_slots
    by = x[:, 10:].sum(axis=1).astype(np.int64) // bin_conts
    cells = {}
    for key in sorted(set(zip(bx.tolist(), by.tolist()))):
        sel = (bx == key[0]) & (by == key[1])
        cells[key] = (float(err[sel].mean()), int(sel.sum()))
    return ErrorGrid(bin_slots, bin_conts, cells)
