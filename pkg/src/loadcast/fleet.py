"""Railcar and container domain objects, loading patterns and per-platform feasibility.

A fleet is loaded from a JSON document (see ``FLEET_SCHEMA``). The default
fleet shipped in ``loadcast/data/default_fleet.json`` is synthetic.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema
import numpy as np

N_RAILCAR_TYPES = 10
N_LENGTHS = 2


class FleetConfigError(ValueError):
    """Raised when a fleet document is malformed or violates a fleet invariant."""


class ContainerLength(enum.IntEnum):
    L40 = 40
    L53 = 53

    @property
    def key(self) -> str:
        return self.name


LENGTHS = (ContainerLength.L40, ContainerLength.L53)


@dataclass(frozen=True)
class ContainerSpec:
    length: ContainerLength
    tare: float
    net_capacity: float
    empty_probability: float

    def __post_init__(self) -> None:
        if self.tare <= 0 or self.net_capacity <= 0:
            raise FleetConfigError(f"{self.length.key}: tare and net capacity must be positive")
        if not 0.0 <= self.empty_probability <= 1.0:
            raise FleetConfigError(f"{self.length.key}: empty_probability must lie in [0, 1]")


@dataclass(frozen=True)
class Container:
    id: int
    length: ContainerLength
    gross_weight: Optional[float] = None


@dataclass(frozen=True)
class PlatformType:
    """One well of a double-stack railcar: a bottom slot and a top slot.

    Heights are measured from the top of rail. ``h_tare`` is the height of the
    empty platform's centre of mass; ``h_bottom`` and ``h_top`` are the centre
    heights of containers in the two slots.
    """

    length: int
    weight_capacity: float
    tare: float
    top_53_capable: bool
    com_threshold: float
    h_bottom: float
    h_top: float
    h_tare: float

    def __post_init__(self) -> None:
        if self.length not in (40, 53):
            raise FleetConfigError(f"platform length must be 40 or 53 ft, got {self.length}")
        if self.weight_capacity <= 0 or self.tare <= 0:
            raise FleetConfigError("platform capacity and tare must be positive")
        if self.h_top <= self.h_bottom:
            raise FleetConfigError("slot heights: top centre must be above bottom centre")
        # An empty platform and a bottom-only load must satisfy the COM limit;
        # the solver relies on both weight constraints being upper bounds.
        if self.h_tare > self.com_threshold:
            raise FleetConfigError("h_tare_m must not exceed com_threshold_m")
        if self.h_bottom > self.com_threshold:
            raise FleetConfigError("h_bottom_m must not exceed com_threshold_m")

    @property
    def slot_heights(self) -> tuple[float, float]:
        return (self.h_bottom, self.h_top)


@dataclass(frozen=True)
class RailcarType:
    id: int
    platforms: tuple[PlatformType, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not 1 <= len(self.platforms) <= 5:
            raise FleetConfigError(f"railcar type {self.id}: needs 1 to 5 platforms")

    @property
    def slots(self) -> int:
        return 2 * len(self.platforms)

    @property
    def total_length(self) -> int:
        return sum(p.length for p in self.platforms)


@dataclass(frozen=True)
class Fleet:
    railcar_types: tuple[RailcarType, ...]
    container_specs: Mapping[ContainerLength, ContainerSpec]
    source: Optional[Mapping[str, Any]] = None

    def __post_init__(self) -> None:
        if len(self.railcar_types) != N_RAILCAR_TYPES:
            raise FleetConfigError(
                f"railcar_types: exactly {N_RAILCAR_TYPES} types required, got {len(self.railcar_types)}"
            )
        ids = [t.id for t in self.railcar_types]
        if ids != list(range(1, N_RAILCAR_TYPES + 1)):
            raise FleetConfigError(f"railcar_types: ids must be 1..{N_RAILCAR_TYPES} in order, got {ids}")
        if set(self.container_specs) != set(LENGTHS):
            raise FleetConfigError("container_specs: need exactly L40 and L53")

    def type(self, type_id: int) -> RailcarType:
        return self.railcar_types[type_id - 1]

    @property
    def platforms_per_type(self) -> np.ndarray:
        return np.array([len(t.platforms) for t in self.railcar_types], dtype=np.int64)

    @property
    def lengths_per_type(self) -> np.ndarray:
        return np.array([t.total_length for t in self.railcar_types], dtype=np.int64)

    def to_dict(self) -> dict[str, Any]:
        if self.source is not None:
            return json.loads(json.dumps(self.source))
        return {
            "railcar_types": [
                {
                    "id": t.id,
                    "name": t.name,
                    "platforms": [
                        {
                            "length_ft": p.length,
                            "capacity_kg": p.weight_capacity,
                            "tare_kg": p.tare,
                            "top_53_capable": p.top_53_capable,
                            "com_threshold_m": p.com_threshold,
                            "h_bottom_m": p.h_bottom,
                            "h_top_m": p.h_top,
                            "h_tare_m": p.h_tare,
                        }
                        for p in t.platforms
                    ],
                }
                for t in self.railcar_types
            ],
            "container_specs": {
                ln.key: {
                    "tare_kg": s.tare,
                    "net_capacity_kg": s.net_capacity,
                    "empty_probability": s.empty_probability,
                }
                for ln, s in self.container_specs.items()
            },
        }

    @cached_property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, order=True)
class LoadingPattern:
    bottom: Optional[ContainerLength] = None
    top: Optional[ContainerLength] = None

    def __post_init__(self) -> None:
        if self.top is not None and self.bottom is None:
            raise ValueError("a top container needs an occupied bottom slot")

    @property
    def size(self) -> int:
        return (self.bottom is not None) + (self.top is not None)

    @property
    def n53(self) -> int:
        return (self.bottom == ContainerLength.L53) + (self.top == ContainerLength.L53)

    def __str__(self) -> str:
        if self.bottom is None:
            return "empty"
        s = f"B{int(self.bottom)}"
        if self.top is not None:
            s += f"+T{int(self.top)}"
        return s


EMPTY = LoadingPattern()


def _pattern_key(p: LoadingPattern) -> tuple:
    return (p.size, 0 if p.bottom is None else int(p.bottom), 0 if p.top is None else int(p.top))


def enumerate_patterns(platform: PlatformType) -> list[LoadingPattern]:
    """All loading patterns a platform admits, empty first then by (bottom, top).

    Rules: the bottom container fits within the platform length; a 53 ft
    container only occupies a 53-capable slot (bottom of a 53 ft platform;
    top if ``top_53_capable``, which on a 40 ft platform also needs a 40 ft
    bottom); a top needs an occupied bottom.
    """
    out = [EMPTY]
    for bottom in LENGTHS:
        if bottom > platform.length:
            continue
        out.append(LoadingPattern(bottom, None))
        for top in LENGTHS:
            if top == ContainerLength.L53:
                if not platform.top_53_capable:
                    continue
                if platform.length == 40 and bottom != ContainerLength.L40:
                    continue
            out.append(LoadingPattern(bottom, top))
    return sorted(out, key=_pattern_key)


def com_margin(platform: PlatformType, bottom_weight: float, top_weight: float) -> float:
    """Moment of the loaded platform about the COM threshold height (<= 0 is feasible)."""
    th = platform.com_threshold
    return (
        platform.tare * (platform.h_tare - th)
        + bottom_weight * (platform.h_bottom - th)
        + top_weight * (platform.h_top - th)
    )


def pattern_weight_feasible(
    pattern: LoadingPattern,
    bottom_weight: float,
    top_weight: float,
    platform: PlatformType,
) -> bool:
    """Weight-capacity and centre-of-mass check for one platform.

    The COM height ``(T*h_t + b*h_b + u*h_u) / (T + b + u)`` is compared to the
    threshold in its multiplied-out form so no division is needed.
    """
    if bottom_weight < 0 or top_weight < 0:
        raise ValueError("weights must be non-negative")
    if pattern.bottom is None:
        bottom_weight = 0.0
    if pattern.top is None:
        top_weight = 0.0
    if bottom_weight + top_weight > platform.weight_capacity:
        return False
    return com_margin(platform, bottom_weight, top_weight) <= 0.0


def slots_of(fleet: Fleet) -> np.ndarray:
    return 2 * fleet.platforms_per_type


# --- config loading ---------------------------------------------------------

_PLATFORM_SCHEMA = {
    "type": "object",
    "required": [
        "length_ft",
        "capacity_kg",
        "tare_kg",
        "top_53_capable",
        "com_threshold_m",
        "h_bottom_m",
        "h_top_m",
        "h_tare_m",
    ],
    "properties": {
        "length_ft": {"enum": [40, 53]},
        "capacity_kg": {"type": "number", "exclusiveMinimum": 0},
        "tare_kg": {"type": "number", "exclusiveMinimum": 0},
        "top_53_capable": {"type": "boolean"},
        "com_threshold_m": {"type": "number"},
        "h_bottom_m": {"type": "number"},
        "h_top_m": {"type": "number"},
        "h_tare_m": {"type": "number"},
    },
}

_SPEC_SCHEMA = {
    "type": "object",
    "required": ["tare_kg", "net_capacity_kg", "empty_probability"],
    "properties": {
        "tare_kg": {"type": "number", "exclusiveMinimum": 0},
        "net_capacity_kg": {"type": "number", "exclusiveMinimum": 0},
        "empty_probability": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

FLEET_SCHEMA = {
    "type": "object",
    "required": ["railcar_types", "container_specs"],
    "properties": {
        "railcar_types": {
            "type": "array",
            "minItems": N_RAILCAR_TYPES,
            "maxItems": N_RAILCAR_TYPES,
            "items": {
                "type": "object",
                "required": ["id", "platforms"],
                "properties": {
                    "id": {"type": "integer"},
                    "name": {"type": "string"},
                    "platforms": {"type": "array", "minItems": 1, "maxItems": 5, "items": _PLATFORM_SCHEMA},
                },
            },
        },
        "container_specs": {
            "type": "object",
            "required": ["L40", "L53"],
            "properties": {"L40": _SPEC_SCHEMA, "L53": _SPEC_SCHEMA},
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_fleet_document(doc: Any) -> list[str]:
    """Return a list of human-readable problems; empty when the document is valid."""
    validator = jsonschema.Draft202012Validator(FLEET_SCHEMA)
    errors = [
        f"{_path(e.absolute_path)}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if errors:
        return errors
    ids = [t["id"] for t in doc["railcar_types"]]
    if sorted(ids) != list(range(1, N_RAILCAR_TYPES + 1)):
        errors.append(f"railcar_types: ids must be unique and dense 1..{N_RAILCAR_TYPES}, got {ids}")
    for i, t in enumerate(doc["railcar_types"]):
        for k, p in enumerate(t["platforms"]):
            where = f"railcar_types[{i}].platforms[{k}]"
            if p["h_top_m"] <= p["h_bottom_m"]:
                errors.append(f"{where}.h_top_m: top slot centre must be above bottom slot centre")
            if p["h_tare_m"] > p["com_threshold_m"]:
                errors.append(f"{where}.h_tare_m: must not exceed com_threshold_m")
            if p["h_bottom_m"] > p["com_threshold_m"]:
                errors.append(f"{where}.h_bottom_m: must not exceed com_threshold_m")
    return errors


def fleet_from_dict(doc: Mapping[str, Any]) -> Fleet:
    errors = validate_fleet_document(doc)
    if errors:
        raise FleetConfigError("invalid fleet config:\n  " + "\n  ".join(errors))
    types = []
    for t in sorted(doc["railcar_types"], key=lambda t: t["id"]):
        platforms = tuple(
            PlatformType(
                length=int(p["length_ft"]),
                weight_capacity=float(p["capacity_kg"]),
                tare=float(p["tare_kg"]),
                top_53_capable=bool(p["top_53_capable"]),
                com_threshold=float(p["com_threshold_m"]),
                h_bottom=float(p["h_bottom_m"]),
                h_top=float(p["h_top_m"]),
                h_tare=float(p["h_tare_m"]),
            )
            for p in t["platforms"]
        )
        types.append(RailcarType(id=int(t["id"]), platforms=platforms, name=t.get("name", "")))
    specs = {
        ln: ContainerSpec(
            length=ln,
            tare=float(doc["container_specs"][ln.key]["tare_kg"]),
            net_capacity=float(doc["container_specs"][ln.key]["net_capacity_kg"]),
            empty_probability=float(doc["container_specs"][ln.key]["empty_probability"]),
        )
        for ln in LENGTHS
    }
    return Fleet(tuple(types), specs, source=json.loads(json.dumps(doc)))


def load_fleet(path: str | Path) -> Fleet:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FleetConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return fleet_from_dict(doc)


def default_fleet_path() -> Path:
    return Path(str(resources.files("loadcast") / "data" / "default_fleet.json"))


_DEFAULT: Optional[Fleet] = None


def default_fleet() -> Fleet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_fleet(default_fleet_path())
    return _DEFAULT
