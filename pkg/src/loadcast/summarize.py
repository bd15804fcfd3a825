"""Summaries of solutions, labeled datasets and the train/validation/test split."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from .fleet import N_RAILCAR_TYPES, Fleet
from .sampling import STREAM_SELECT, STREAM_SPLIT, FullInstance, InstanceSketch, substream
from .solver import DetailedSolution, scalarization_constant

TRAIN, VALIDATION, TEST = 0, 1, 2
SPLIT_NAMES = ("train", "validation", "test")
SPLIT_FRACTIONS = (0.64, 0.16, 0.20)


@dataclass(frozen=True)
class Summary:
    railcars_used: tuple[int, ...]
    containers_loaded: tuple[int, int]

    def __post_init__(self) -> None:
        if len(self.railcars_used) != N_RAILCAR_TYPES or len(self.containers_loaded) != 2:
            raise ValueError("summary needs 10 railcar counts and 2 container counts")
        if min(self.railcars_used) < 0 or min(self.containers_loaded) < 0:
            raise ValueError("summary counts must be nonnegative")

    @classmethod
    def from_vector(cls, v: Sequence[int]) -> "Summary":
        v = [int(x) for x in v]
        if len(v) != 12:
            raise ValueError(f"expected 12 counts, got {len(v)}")
        return cls(tuple(v[:10]), (v[10], v[11]))

    @classmethod
    def zeros(cls) -> "Summary":
        return cls((0,) * N_RAILCAR_TYPES, (0, 0))

    def vector(self) -> np.ndarray:
        return np.array(self.railcars_used + self.containers_loaded, dtype=np.int64)

    def within(self, sketch: InstanceSketch) -> bool:
        return bool(np.all(self.vector() <= sketch.vector()))


def summarize(solution: DetailedSolution) -> Summary:
    used = [0] * N_RAILCAR_TYPES
    for rc, flag in zip(solution.railcars, solution.used):
        used[rc.type_id - 1] += flag
    return Summary(tuple(used), solution.loaded_per_length)


@dataclass(frozen=True)
class LabeledExample:
    sketch: InstanceSketch
    target: Summary
    weights: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SolvedCohort:
    """All weight draws of one sketch with their solutions; 1S instances are cohorts of one."""

    index: int
    members: tuple[tuple[FullInstance, DetailedSolution], ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("cohort needs at least one member")
        sk = self.members[0][0].sketch
        if any(inst.sketch != sk for inst, _ in self.members):
            raise ValueError("cohort members must share the sketch")

    @property
    def sketch(self) -> InstanceSketch:
        return self.members[0][0].sketch


def split_examples(n: int, seed: int) -> np.ndarray:
    """Split code per example: seeded permutation, then contiguous 64/16/20 cut."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    n_val = min(n_val, n - n_train)
    perm = substream(seed, STREAM_SPLIT).permutation(n)
    codes = np.empty(n, dtype=np.int8)
    codes[perm[:n_train]] = TRAIN
    codes[perm[n_train : n_train + n_val]] = VALIDATION
    codes[perm[n_train + n_val :]] = TEST
    return codes


@dataclass
class Dataset:
    examples: list[LabeledExample]
    split: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.split = np.asarray(self.split, dtype=np.int8)
        if len(self.split) != len(self.examples):
            raise ValueError("split assignment length mismatch")

    def __len__(self) -> int:
        return len(self.examples)

    def inputs(self, part: Optional[int] = None) -> np.ndarray:
        return self._matrix(lambda e: e.sketch.vector(), part)

    def targets(self, part: Optional[int] = None) -> np.ndarray:
        return self._matrix(lambda e: e.target.vector(), part)

    def _matrix(self, fn, part):
        rows = [fn(e) for e, s in zip(self.examples, self.split) if part is None or s == part]
        return np.array(rows, dtype=np.int64).reshape(-1, 12)

    def sketches(self, part: Optional[int] = None) -> list[InstanceSketch]:
        return [e.sketch for e, s in zip(self.examples, self.split) if part is None or s == part]

    def counts(self) -> tuple[int, int, int]:
        return tuple(int(np.sum(self.split == c)) for c in (TRAIN, VALIDATION, TEST))

    def merged(self, other: "Dataset") -> "Dataset":
        prov = {"merged": [self.provenance, other.provenance]}
        return Dataset(self.examples + other.examples, np.concatenate([self.split, other.split]), prov)


def _as_cohort(item: Union[SolvedCohort, tuple], index: int) -> SolvedCohort:
    if isinstance(item, SolvedCohort):
        return item
    inst, sol = item
    return SolvedCohort(index, ((inst, sol),))


def _example(inst: FullInstance, sol: DetailedSolution) -> LabeledExample:
    target = summarize(sol)
    assert target.within(inst.sketch)
    return LabeledExample(inst.sketch, target, inst.weights)


OTHRML = "othrml"
OBEFML = "obefml"
AGGREGATIONS = (OTHRML, OBEFML)


def uniform_member(cohort: SolvedCohort, select_seed: int) -> int:
    if len(cohort.members) == 1:
        return 0
    return int(substream(select_seed, STREAM_SELECT, cohort.index).integers(len(cohort.members)))


def select_example(cohort: SolvedCohort, aggregation: str, fleet: Fleet, select_seed: int) -> LabeledExample:
    """The single example a cohort contributes under the given aggregation method."""
    if aggregation == OTHRML:
        m = uniform_member(cohort, select_seed)
    elif aggregation == OBEFML:
        m = median_member(cohort, fleet)
    else:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    return _example(*cohort.members[m])


def build_dataset_OThrML(
    solved: Iterable[Union[SolvedCohort, tuple[FullInstance, DetailedSolution]]],
    split_seed: int,
    select_seed: Optional[int] = None,
    provenance: Optional[dict] = None,
) -> Dataset:
    """Raw (sketch, summary) pairs; a cohort contributes one member drawn uniformly."""
    select_seed = split_seed if select_seed is None else select_seed
    examples = []
    for i, item in enumerate(solved):
        c = _as_cohort(item, i)
        examples.append(_example(*c.members[uniform_member(c, select_seed)]))
    prov = dict(provenance or {}, aggregation=OTHRML, split_seed=split_seed, select_seed=select_seed)
    return Dataset(examples, split_examples(len(examples), split_seed), prov)


def median_member(cohort: SolvedCohort, fleet: Fleet) -> int:
    """Index of the member at the lower median of the scalarized objective; lowest index on ties."""
    m = scalarization_constant(cohort.sketch, fleet)
    values = [sol.objective.scalarize(m) for _, sol in cohort.members]
    target = sorted(values)[(len(values) - 1) // 2]
    return values.index(target)


def build_dataset_OBefML(
    cohorts: Iterable[SolvedCohort], split_seed: int, fleet: Fleet, provenance: Optional[dict] = None
) -> Dataset:
    """One example per cohort, labeled with its median-objective member's summary."""
    examples = []
    for c in cohorts:
        examples.append(_example(*c.members[median_member(c, fleet)]))
    prov = dict(provenance or {}, aggregation=OBEFML, split_seed=split_seed)
    return Dataset(examples, split_examples(len(examples), split_seed), prov)
