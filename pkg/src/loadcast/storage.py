"""File formats: labeled datasets (binary and CSV), instances and solutions (JSON).

Binary dataset layout, all integers little-endian:

    magic      4 bytes  b"LCDS"
    version    u16
    hlen       u32      length of the header
    header     hlen bytes of UTF-8 JSON (sorted keys): provenance and record count
    records    one per example:
                 12 x u16  input counts (10 railcar types, 40 ft, 53 ft)
                 12 x u16  summary counts
                 u8        split code (0 train, 1 validation, 2 test)
                 u8        1 if weights follow, else 0
                 f64 x (n40 + n53)  gross weights, 40 ft first (only if flagged)
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np

from .sampling import FullInstance, InstanceSketch
from .solver import DetailedSolution
from .summarize import Dataset, LabeledExample, Summary

PathLike = Union[str, Path]

_MAGIC = b"LCDS"
_VERSION = 1
_COUNTS = struct.Struct("<24HBB")


class DataFormatError(ValueError):
    pass


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dataset_bytes(ds: Dataset) -> bytes:
    header = json.dumps(
        {"provenance": _jsonable(ds.provenance), "n_examples": len(ds)}, sort_keys=True, separators=(",", ":")
    ).encode()
    parts = [_MAGIC, struct.pack("<HI", _VERSION, len(header)), header]
    for ex, split in zip(ds.examples, ds.split):
        counts = [int(v) for v in ex.sketch.vector()] + [int(v) for v in ex.target.vector()]
        if max(counts) > 0xFFFF:
            raise DataFormatError("count does not fit in 16 bits")
        parts.append(_COUNTS.pack(*counts, int(split), ex.weights is not None))
        if ex.weights is not None:
            parts.append(np.concatenate([np.asarray(w, dtype="<f8") for w in ex.weights]).tobytes())
    return b"".join(parts)


def write_dataset(ds: Dataset, path: PathLike) -> None:
    Path(path).write_bytes(dataset_bytes(ds))


def read_dataset(path: PathLike) -> Dataset:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise DataFormatError(f"{path}: not a dataset file")
    if len(data) < 10:
        raise DataFormatError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported dataset version {version}")
    try:
        header = json.loads(data[10 : 10 + hlen])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: corrupt header ({exc})") from exc
    off = 10 + hlen
    examples, split = [], []
    for _ in range(header["n_examples"]):
        if off + _COUNTS.size > len(data):
            raise DataFormatError(f"{path}: truncated record")
        *counts, code, has_w = _COUNTS.unpack_from(data, off)
        off += _COUNTS.size
        sketch = InstanceSketch.from_vector(counts[:12])
        weights = None
        if has_w:
            n40, n53 = sketch.container_counts
            end = off + 8 * (n40 + n53)
            if end > len(data):
                raise DataFormatError(f"{path}: truncated weights")
            w = np.frombuffer(data[off:end], dtype="<f8").astype(np.float64)
            weights = (w[:n40].copy(), w[n40:].copy())
            off = end
        examples.append(LabeledExample(sketch, Summary.from_vector(counts[12:]), weights))
        split.append(code)
    if off != len(data):
        raise DataFormatError(f"{path}: trailing bytes")
    return Dataset(examples, np.array(split, dtype=np.int8), header["provenance"])


CSV_COLUMNS = (
    [f"rc{j}" for j in range(1, 11)]
    + ["c40", "c53"]
    + [f"used{j}" for j in range(1, 11)]
    + ["loaded40", "loaded53", "split"]
)


def write_dataset_csv(ds: Dataset, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for ex, s in zip(ds.examples, ds.split):
            w.writerow([*ex.sketch.vector().tolist(), *ex.target.vector().tolist(), int(s)])


def read_dataset_csv(path: PathLike) -> Dataset:
    examples, split = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != CSV_COLUMNS:
            raise DataFormatError(f"{path}: unexpected CSV header")
        for lineno, row in enumerate(reader, start=2):
            try:
                vals = [int(v) for v in row]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if len(vals) != 25:
                raise DataFormatError(f"{path}:{lineno}: expected 25 fields, got {len(vals)}")
            examples.append(LabeledExample(InstanceSketch.from_vector(vals[:12]), Summary.from_vector(vals[12:24])))
            split.append(vals[24])
    return Dataset(examples, np.array(split, dtype=np.int8), {"source": str(path)})


# --- instances and solutions ------------------------------------------------------


def instance_to_dict(inst: FullInstance) -> dict[str, Any]:
    return {
        "sketch": {"railcars": list(inst.sketch.railcar_counts), "containers": list(inst.sketch.container_counts)},
        "weights": {"L40": [float(w) for w in inst.weights[0]], "L53": [float(w) for w in inst.weights[1]]},
    }


def instance_from_dict(doc: dict[str, Any]) -> FullInstance:
    try:
        sk = InstanceSketch(tuple(int(v) for v in doc["sketch"]["railcars"]), tuple(int(v) for v in doc["sketch"]["containers"]))
        w = (np.array(doc["weights"]["L40"], dtype=np.float64), np.array(doc["weights"]["L53"], dtype=np.float64))
        return FullInstance(sk, w)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid instance document: {exc}") from exc


def load_instance(path: PathLike) -> FullInstance:
    try:
        return instance_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def save_instance(inst: FullInstance, path: PathLike) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def save_solution(sol: DetailedSolution, path: PathLike) -> None:
    Path(path).write_text(json.dumps(sol.to_dict(), indent=1) + "\n")
