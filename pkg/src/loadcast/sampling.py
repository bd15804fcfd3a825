"""Instance generation: sketches (available inputs), container weights and the 1S/2S protocols."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .fleet import (
    LENGTHS,
    N_RAILCAR_TYPES,
    Container,
    ContainerLength,
    Fleet,
    FleetConfigError,
    fleet_from_dict,
)


@dataclass(frozen=True)
class InstanceSketch:
    """Counts known at prediction time: railcars per type and containers per length."""

    railcar_counts: tuple[int, ...]
    container_counts: tuple[int, int]

    def __post_init__(self) -> None:
        if len(self.railcar_counts) != N_RAILCAR_TYPES or len(self.container_counts) != 2:
            raise ValueError("sketch needs 10 railcar counts and 2 container counts")
        if min(self.railcar_counts) < 0 or min(self.container_counts) < 0:
            raise ValueError("sketch counts must be non-negative")

    @classmethod
    def from_vector(cls, v: Sequence[int]) -> "InstanceSketch":
        v = [int(x) for x in v]
        if len(v) != 12:
            raise ValueError(f"sketch vector must have 12 entries, got {len(v)}")
        return cls(tuple(v[:10]), (v[10], v[11]))

    def vector(self) -> np.ndarray:
        return np.array(self.railcar_counts + self.container_counts, dtype=np.int64)

    @property
    def n_containers(self) -> int:
        return sum(self.container_counts)

    def n_platforms(self, fleet: Fleet) -> int:
        return int(np.dot(self.railcar_counts, fleet.platforms_per_type))

    def n_slots(self, fleet: Fleet) -> int:
        return 2 * self.n_platforms(fleet)


@dataclass(frozen=True)
class FullInstance:
    """A sketch completed with per-container gross weights (kg), grouped by length.

    Container ids run over the 40 ft group first, then the 53 ft group.
    """

    sketch: InstanceSketch
    weights: tuple[np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        for n, w in zip(self.sketch.container_counts, self.weights):
            if len(w) != n:
                raise ValueError("weights do not match the sketch container counts")

    def containers(self) -> list[Container]:
        out = []
        for ln, w in zip(LENGTHS, self.weights):
            for x in w:
                out.append(Container(len(out), ln, float(x)))
        return out

    def check(self, fleet: Fleet) -> None:
        for ln, w in zip(LENGTHS, self.weights):
            if len(w) and float(np.min(w)) < fleet.container_specs[ln].tare:
                raise ValueError(f"{ln.key} gross weight below container tare")


@dataclass(frozen=True)
class DataClass:
    tag: str
    container_range: tuple[int, int]
    platform_range: tuple[int, int]

    def __post_init__(self) -> None:
        for lo, hi in (self.container_range, self.platform_range):
            if not 0 <= lo <= hi:
                raise ValueError(f"class {self.tag}: bad range [{lo}, {hi}]")

    def contains(self, sketch: InstanceSketch, fleet: Fleet) -> bool:
        c = sketch.n_containers
        p = sketch.n_platforms(fleet)
        return (
            self.container_range[0] <= c <= self.container_range[1]
            and self.platform_range[0] <= p <= self.platform_range[1]
        )


CLASS_A = DataClass("A", (1, 150), (1, 50))
CLASS_B = DataClass("B", (151, 300), (1, 50))
CLASS_C = DataClass("C", (1, 150), (51, 100))
CLASS_D = DataClass("D", (151, 300), (51, 100))

# Desk-scale counterparts used by the scaled experiments.
CLASS_A_DESK = DataClass("A'", (1, 30), (1, 10))
CLASS_B_DESK = DataClass("B'", (31, 60), (1, 10))
CLASS_C_DESK = DataClass("C'", (1, 30), (11, 20))
CLASS_D_DESK = DataClass("D'", (31, 60), (11, 20))

DATA_CLASSES = {
    c.tag: c
    for c in (CLASS_A, CLASS_B, CLASS_C, CLASS_D, CLASS_A_DESK, CLASS_B_DESK, CLASS_C_DESK, CLASS_D_DESK)
}


def data_class(tag: str) -> DataClass:
    key = tag.replace("p", "'") if tag.endswith("p") else tag
    try:
        return DATA_CLASSES[key]
    except KeyError:
        raise ValueError(f"unknown data class {tag!r}; choose from {sorted(DATA_CLASSES)}") from None


@dataclass(frozen=True)
class WeightModel:
    load_ratio_low: float = 0.10
    load_ratio_high: float = 0.90
    empty_probability_bounds: tuple[float, float] = (0.05, 0.25)

    def __post_init__(self) -> None:
        if not 0.0 <= self.load_ratio_low < self.load_ratio_high <= 1.0:
            raise ValueError("need 0 <= load_ratio_low < load_ratio_high <= 1")
        lo, hi = self.empty_probability_bounds
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("empty_probability_bounds must be an interval in [0, 1]")


class Protocol(str, enum.Enum):
    ONE_STAGE = "1s"
    TWO_STAGE = "2s"


@dataclass(frozen=True)
class SamplingPlan:
    protocol: Protocol
    data_class: DataClass
    seed: int
    second_stage_draws: int = 100

    def __post_init__(self) -> None:
        if self.protocol == Protocol.TWO_STAGE and self.second_stage_draws < 1:
            raise ValueError("two-stage sampling needs at least one second-stage draw")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol.value,
            "class": self.data_class.tag,
            "container_range": list(self.data_class.container_range),
            "platform_range": list(self.data_class.platform_range),
            "seed": self.seed,
            "k": self.second_stage_draws if self.protocol == Protocol.TWO_STAGE else 1,
        }


# --- random streams ---------------------------------------------------------

STREAM_1S = 1
STREAM_2S = 2
STREAM_SPLIT = 3
STREAM_SELECT = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``; used so that instance ``i``
    does not depend on how many instances precede it or which worker draws it."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


# --- sketch sampling --------------------------------------------------------


@lru_cache(maxsize=32)
def _composition_table(platforms_per_type: tuple[int, ...], max_total: int) -> list[list[int]]:
    """ways[j][t]: number of count vectors over types j.. whose platforms sum to t."""
    n = len(platforms_per_type)
    ways = [[0] * (max_total + 1) for _ in range(n + 1)]
    ways[n][0] = 1
    for j in range(n - 1, -1, -1):
        p = platforms_per_type[j]
        row, nxt = ways[j], ways[j + 1]
        for t in range(max_total + 1):
            row[t] = nxt[t] + (row[t - p] if t >= p else 0)
    return ways


def _uniform_below(rng: np.random.Generator, n: int) -> int:
    if n < 2**63:
        return int(rng.integers(0, n))
    # exact for arbitrarily large counts: assemble 62-bit chunks, reject overflow
    nbits = n.bit_length()
    while True:
        x = 0
        for _ in range(0, nbits, 62):
            x = (x << 62) | int(rng.integers(0, 2**62))
        x >>= (-nbits) % 62
        if x < n:
            return x


def attainable_platform_totals(data_class: DataClass, fleet: Fleet) -> list[int]:
    lo, hi = data_class.platform_range
    ways = _composition_table(tuple(int(p) for p in fleet.platforms_per_type), hi)
    return [t for t in range(lo, hi + 1) if ways[0][t] > 0]


def sample_sketch(data_class: DataClass, rng: np.random.Generator, fleet: Fleet) -> InstanceSketch:
    """Total containers and total platforms uniform over the class ranges; the
    split by length, and the railcar-type composition achieving the platform
    total, uniform among all possibilities."""
    totals = attainable_platform_totals(data_class, fleet)
    if not totals:
        raise FleetConfigError(f"class {data_class.tag}: no platform total in range is attainable")
    lo, hi = data_class.container_range
    n_cont = int(rng.integers(lo, hi + 1))
    n40 = int(rng.integers(0, n_cont + 1))

    ppt = tuple(int(p) for p in fleet.platforms_per_type)
    ways = _composition_table(ppt, data_class.platform_range[1])
    t = totals[int(rng.integers(0, len(totals)))]
    r = _uniform_below(rng, ways[0][t])
    counts = []
    for j, p in enumerate(ppt):
        c = 0
        while True:
            w = ways[j + 1][t - c * p]
            if r < w:
                break
            r -= w
            c += 1
        counts.append(c)
        t -= c * p
    assert t == 0
    return InstanceSketch(tuple(counts), (n40, n_cont - n40))


# --- weights ----------------------------------------------------------------


def sample_weights(
    sketch: InstanceSketch, model: WeightModel, rng: np.random.Generator, fleet: Fleet
) -> FullInstance:
    weights = []
    lo_e, hi_e = model.empty_probability_bounds
    for ln, n in zip(LENGTHS, sketch.container_counts):
        spec = fleet.container_specs[ln]
        share = float(rng.uniform(lo_e, hi_e)) if hi_e > lo_e else lo_e
        n_empty = min(n, int(np.floor(share * n + 0.5)))
        load = rng.uniform(model.load_ratio_low * spec.net_capacity, model.load_ratio_high * spec.net_capacity, size=n)
        if n_empty:
            load[rng.choice(n, size=n_empty, replace=False)] = 0.0
        weights.append(spec.tare + load)
    return FullInstance(sketch, (weights[0], weights[1]))


# --- protocols --------------------------------------------------------------


@dataclass(frozen=True)
class Cohort:
    index: int
    sketch: InstanceSketch
    members: tuple[FullInstance, ...] = field(repr=False)


def instance_1s(index: int, data_class: DataClass, seed: int, fleet: Fleet, model: WeightModel) -> FullInstance:
    rng = substream(seed, STREAM_1S, index)
    sketch = sample_sketch(data_class, rng, fleet)
    return sample_weights(sketch, model, rng, fleet)


def cohort_2s(
    index: int, k: int, data_class: DataClass, seed: int, fleet: Fleet, model: WeightModel
) -> Cohort:
    if k < 1:
        raise ValueError("k must be >= 1")
    sketch = sample_sketch(data_class, substream(seed, STREAM_2S, index), fleet)
    members = tuple(
        sample_weights(sketch, model, substream(seed, STREAM_2S, index, m + 1), fleet) for m in range(k)
    )
    return Cohort(index, sketch, members)


def generate_1S(
    n: int, data_class: DataClass, seed: int, fleet: Fleet, model: WeightModel = WeightModel()
) -> Iterator[FullInstance]:
    for i in range(n):
        yield instance_1s(i, data_class, seed, fleet, model)


def generate_2S(
    n_first: int, k: int, data_class: DataClass, seed: int, fleet: Fleet, model: WeightModel = WeightModel()
) -> Iterator[Cohort]:
    if k < 1:
        raise ValueError("k must be >= 1")
    for i in range(n_first):
        yield cohort_2s(i, k, data_class, seed, fleet, model)


# --- input aggregation of railcar characteristics ---------------------------


def lower_median(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("median of an empty set")
    s = sorted(values)
    return float(s[(len(s) - 1) // 2])


def aggregate_railcar_inputs(raw: Mapping[str, Any]) -> Fleet:
    """Collapse per-car observations of platform capacity and tare into the
    per-type (lower) median, giving one representative fleet.

    ``raw`` follows the fleet schema except that each platform carries
    ``capacity_kg_obs`` and ``tare_kg_obs`` lists instead of scalar values.
    """
    doc = {k: v for k, v in raw.items() if k != "railcar_types"}
    types = []
    for t in raw["railcar_types"]:
        platforms = []
        for k, p in enumerate(t["platforms"]):
            q = {key: v for key, v in p.items() if not key.endswith("_obs")}
            for key in ("capacity_kg", "tare_kg"):
                obs = p.get(key + "_obs")
                if obs is None and key in p:
                    obs = [p[key]]
                if not obs:
                    raise FleetConfigError(f"railcar type {t.get('id')} platform {k}: no {key} observations")
                q[key] = lower_median(obs)
            platforms.append(q)
        types.append({**{k: v for k, v in t.items() if k != "platforms"}, "platforms": platforms})
    doc["railcar_types"] = types
    return fleet_from_dict(doc)
