"""Feedforward networks in plain numpy: classification and regression heads, Adam, early stopping.

Zero hidden layers gives multinomial logistic regression (classification
head) or linear regression (regression head) through the same code path.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .fleet import Fleet, slots_of
from .sampling import DataClass, InstanceSketch, substream
from .summarize import TEST, TRAIN, VALIDATION, Dataset, Summary

N_IN = 12
CLASSIFICATION = "classification"
REGRESSION = "regression"

STREAM_INIT = 5
STREAM_SHUFFLE = 6
STREAM_SEARCH = 7


class UnsupportedInputError(ValueError):
    """Sketch counts exceed what a classification head can represent."""


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    hidden_layers: int = 2
    hidden_width: int = 64
    l1: float = 0.0
    l2: float = 0.0
    head: str = REGRESSION
    max_counts: Optional[tuple[int, ...]] = None
    learning_rate: float = 1e-3
    batch_size: int = 128
    adam: tuple[float, float, float] = (0.9, 0.999, 1e-8)
    patience: int = 10
    max_epochs: int = 200
    init_seed: int = 0

    def __post_init__(self) -> None:
        if self.head not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown head {self.head!r}")
        if self.hidden_layers < 0 or (self.hidden_layers > 0 and self.hidden_width < 1):
            raise ValueError("invalid architecture")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("regularization coefficients must be nonnegative")
        if self.head == CLASSIFICATION:
            if self.max_counts is None or len(self.max_counts) != N_IN or min(self.max_counts) < 0:
                raise ValueError("classification head needs 12 nonnegative max counts")
        if self.batch_size < 1 or self.patience < 0 or self.max_epochs < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training settings")

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(m + 1 for m in self.max_counts)

    @property
    def output_size(self) -> int:
        return sum(self.block_sizes) if self.head == CLASSIFICATION else N_IN

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["adam"] = list(self.adam)
        d["max_counts"] = None if self.max_counts is None else list(self.max_counts)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkConfig":
        d = dict(d)
        d["adam"] = tuple(d["adam"])
        if d.get("max_counts") is not None:
            d["max_counts"] = tuple(d["max_counts"])
        return cls(**d)


def head_size(max_counts: Sequence[int]) -> int:
    return sum(m + 1 for m in max_counts)


def class_support(classes: Sequence[DataClass], fleet: Fleet) -> tuple[int, ...]:
    """Largest count each of the 12 coordinates can take over the given data classes."""
    p_max = max(c.platform_range[1] for c in classes)
    c_max = max(c.container_range[1] for c in classes)
    return tuple(int(p_max // p) for p in fleet.platforms_per_type) + (c_max, c_max)


@dataclass
class Network:
    config: NetworkConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scale: np.ndarray  # per-coordinate input scale; also the regression output scale

    @property
    def params(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    def copy(self) -> "Network":
        return Network(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.scale.copy())


def init_network(config: NetworkConfig, scale: Optional[np.ndarray] = None) -> Network:
    """Uniform fan-in initialisation: limit sqrt(6/fan_in) before ReLU, sqrt(3/fan_in) at the head."""
    rng = substream(config.init_seed, STREAM_INIT)
    dims = [N_IN] + [config.hidden_width] * config.hidden_layers + [config.output_size]
    weights, biases = [], []
    for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        gain = 3.0 if k == len(dims) - 2 else 6.0
        lim = np.sqrt(gain / a)
        weights.append(rng.uniform(-lim, lim, size=(a, b)))
        biases.append(np.zeros(b))
    if scale is None:
        scale = np.ones(N_IN)
    return Network(config, weights, biases, np.asarray(scale, dtype=np.float64))


def _check_inputs(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != N_IN:
        raise ValueError(f"expected inputs of shape (n, {N_IN}), got {x.shape}")
    if np.any(x < 0):
        raise ValueError("inputs must be nonnegative")
    return x


def _layers(net: Network, x: np.ndarray):
    """Pre-activation and activation caches; returns (activations, final affine output)."""
    acts = [x / net.scale]
    h = acts[0]
    n_hidden = len(net.weights) - 1
    for k in range(n_hidden):
        h = np.maximum(h @ net.weights[k] + net.biases[k], 0.0)
        acts.append(h)
    return acts, h @ net.weights[-1] + net.biases[-1]


def _block_softmax(net: Network, logits: np.ndarray, mask: Optional[np.ndarray]) -> list[np.ndarray]:
    probs, off = [], 0
    for j, size in enumerate(net.config.block_sizes):
        z = logits[:, off : off + size]
        if mask is not None:
            allowed = np.arange(size)[None, :] <= mask[:, j : j + 1]
            z = np.where(allowed, z, -np.inf)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs.append(e / e.sum(axis=1, keepdims=True))
        off += size
    return probs


def forward(net: Network, x, mask=None):
    """Classification: list of 12 probability blocks (masked by ``mask`` counts if given).
    Regression: (n, 12) real outputs."""
    x = _check_inputs(x)
    _, out = _layers(net, x)
    if net.config.head == REGRESSION:
        return out * net.scale
    m = None if mask is None else _check_inputs(mask)
    return _block_softmax(net, out, m)


def _penalty(net: Network) -> float:
    c = net.config
    if c.l1 == 0 and c.l2 == 0:
        return 0.0
    return float(sum(c.l1 * np.abs(p).sum() + c.l2 * (p * p).sum() for p in net.params))


def _data_loss_and_grad(net: Network, x: np.ndarray, y: np.ndarray, want_grad: bool = True):
    """Mean data loss over the batch and its gradient w.r.t. the final affine output."""
    acts, out = _layers(net, x)
    n = x.shape[0]
    if net.config.head == REGRESSION:
        diff = out * net.scale - y
        loss = float(np.abs(diff).sum() / n)
        dout = np.sign(diff) * net.scale / n if want_grad else None
        return loss, acts, dout
    if np.any(y > x) or np.any(y > np.array(net.config.max_counts)):
        raise ValueError("target count outside the masked block support")
    probs = _block_softmax(net, out, x)
    yi = y.astype(np.int64)
    loss, grads, rows = 0.0, [], np.arange(n)
    for j, p in enumerate(probs):
        loss -= float(np.log(p[rows, yi[:, j]]).sum())
        if want_grad:
            g = p.copy()
            g[rows, yi[:, j]] -= 1.0
            grads.append(g / n)
    return loss / n, acts, (np.concatenate(grads, axis=1) if want_grad else None)


def loss(net: Network, x, y) -> float:
    """Mean data loss plus l1*sum|theta| + l2*sum theta^2 over all parameters."""
    x = _check_inputs(x)
    y = np.asarray(y, dtype=np.float64).reshape(x.shape)
    return _data_loss_and_grad(net, x, y, want_grad=False)[0] + _penalty(net)


def loss_classification(net: Network, x, y) -> float:
    if net.config.head != CLASSIFICATION:
        raise ValueError("network has a regression head")
    return loss(net, x, y)


def loss_regression(net: Network, x, y) -> float:
    if net.config.head != REGRESSION:
        raise ValueError("network has a classification head")
    return loss(net, x, y)


def loss_and_gradients(net: Network, x, y) -> tuple[float, list[np.ndarray]]:
    """Loss as in ``loss`` and its gradient for each array of ``net.params``."""
    x = _check_inputs(x)
    y = np.asarray(y, dtype=np.float64).reshape(x.shape)
    data, acts, delta = _data_loss_and_grad(net, x, y)
    c = net.config
    gw: list[np.ndarray] = [None] * len(net.weights)
    gb: list[np.ndarray] = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (acts[k] > 0)
    grads = []
    for g, p in zip([a for wb in zip(gw, gb) for a in wb], net.params):
        if c.l1:
            g = g + c.l1 * np.sign(p)
        if c.l2:
            g = g + 2.0 * c.l2 * p
        grads.append(g)
    return data + _penalty(net), grads


# --- optimisation -------------------------------------------------------------


@dataclass
class AdamState:
    params: list[np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in self.params]
            self.v = [np.zeros_like(p) for p in self.params]


def adam_step(state: AdamState, grads: Sequence[np.ndarray], lr: float) -> AdamState:
    """One bias-corrected Adam update, applied to ``state.params`` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(state.params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


# --- prediction -----------------------------------------------------------------


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def predict_counts(net: Network, x) -> np.ndarray:
    """Integer predictions for a batch of sketches, always within [0, input]."""
    x = _check_inputs(x)
    if net.config.head == CLASSIFICATION:
        over = x > np.array(net.config.max_counts)
        if np.any(over):
            row, col = map(int, np.argwhere(over)[0])
            raise UnsupportedInputError(
                f"input count {int(x[row, col])} at position {col} exceeds the head support "
                f"{net.config.max_counts[col]}"
            )
        probs = forward(net, x, mask=x)
        return np.stack([p.argmax(axis=1) for p in probs], axis=1).astype(np.int64)
    raw = forward(net, x)
    return np.clip(round_half_away(raw), 0, x).astype(np.int64)


def predict(net: Network, sketch: InstanceSketch) -> Summary:
    return Summary.from_vector(predict_counts(net, sketch.vector())[0])


def weighted_mae(pred: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    if len(pred) == 0:
        return float("nan")
    return float(np.mean(np.abs(np.asarray(pred) - np.asarray(target)) @ weights))


def mae_weights(fleet: Fleet) -> np.ndarray:
    return np.concatenate([slots_of(fleet), [1, 1]]).astype(np.float64)


# --- training -------------------------------------------------------------------


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_validation_loss: float
    validation_mae: float
    train_losses: list[float]
    validation_losses: list[float]
    hyperparameters: dict[str, Any]
    wall_clock: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def input_scale(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64).max(axis=0, initial=0.0), 1.0)


def train_arrays(
    config: NetworkConfig,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    mae_w: np.ndarray,
) -> tuple[Network, TrainReport]:
    """Mini-batch Adam with early stopping on validation loss; returns the best checkpoint."""
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("training needs nonempty train and validation splits")
    start = time.perf_counter()
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    net = init_network(config, input_scale(x_train))
    state = AdamState(net.params, *config.adam)
    rng = substream(config.init_seed, STREAM_SHUFFLE)

    best_loss, best_epoch, best_net = np.inf, 0, net.copy()
    train_curve, val_curve = [], []
    stale = 0
    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s : s + config.batch_size]
            value, grads = loss_and_gradients(net, x_train[idx], y_train[idx])
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError(
                    f"non-finite loss or gradient at epoch {epoch}, batch {s // config.batch_size} "
                    f"(lr={config.learning_rate}, loss={value})"
                )
            adam_step(state, grads, config.learning_rate)
            total += value * len(idx)
        train_curve.append(total / n)
        val = loss(net, x_val, y_val) - _penalty(net)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        val_curve.append(val)
        if val < best_loss:
            best_loss, best_epoch, best_net = val, epoch, net.copy()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    val_mae = weighted_mae(predict_counts(best_net, x_val), y_val, mae_w)
    report = TrainReport(
        epochs_run=len(val_curve),
        best_epoch=best_epoch,
        best_validation_loss=float(best_loss),
        validation_mae=val_mae,
        train_losses=train_curve,
        validation_losses=val_curve,
        hyperparameters=config.to_dict(),
        wall_clock=time.perf_counter() - start,
    )
    return best_net, report


def train(config: NetworkConfig, dataset: Dataset, fleet: Fleet) -> tuple[Network, TrainReport]:
    return train_arrays(
        config,
        dataset.inputs(TRAIN),
        dataset.targets(TRAIN),
        dataset.inputs(VALIDATION),
        dataset.targets(VALIDATION),
        mae_weights(fleet),
    )


# --- hyperparameter search ------------------------------------------------------


@dataclass(frozen=True)
class SearchSpace:
    hidden_layers: tuple[int, int] = (3, 13)
    hidden_width: tuple[int, int] = (300, 1000)
    l1: tuple[float, float] = (0.0, 1e-3)
    l2: tuple[float, float] = (0.0, 1e-3)

    def sample(self, base: NetworkConfig, rng: np.random.Generator, init_seed: int) -> NetworkConfig:
        return replace(
            base,
            hidden_layers=int(rng.integers(self.hidden_layers[0], self.hidden_layers[1] + 1)),
            hidden_width=int(rng.integers(self.hidden_width[0], self.hidden_width[1] + 1)),
            l1=float(rng.uniform(*self.l1)),
            l2=float(rng.uniform(*self.l2)),
            init_seed=init_seed,
        )


@dataclass
class Trial:
    config: NetworkConfig
    validation_mae: float
    test_mae: float
    report: TrainReport
    network: Network = field(repr=False)


@dataclass
class SearchResult:
    best_config: NetworkConfig
    best_network: Network
    best_report: TrainReport
    trials: list[Trial]

    @property
    def best_index(self) -> int:
        return next(i for i, t in enumerate(self.trials) if t.network is self.best_network)

    def test_range(self) -> tuple[float, float]:
        v = [t.test_mae for t in self.trials]
        return (min(v), max(v))

    def validation_range(self) -> tuple[float, float]:
        v = [t.validation_mae for t in self.trials]
        return (min(v), max(v))


def random_search(
    space: SearchSpace,
    n_trials: int,
    dataset: Dataset,
    seed: int,
    fleet: Fleet,
    base: NetworkConfig = NetworkConfig(),
) -> SearchResult:
    """Train ``n_trials`` seeded random configurations and keep the lowest validation MAE."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    w = mae_weights(fleet)
    xt, yt = dataset.inputs(TRAIN), dataset.targets(TRAIN)
    xv, yv = dataset.inputs(VALIDATION), dataset.targets(VALIDATION)
    xs, ys = dataset.inputs(TEST), dataset.targets(TEST)
    trials, best = [], None
    for t in range(n_trials):
        rng = substream(seed, STREAM_SEARCH, t)
        cfg = space.sample(base, rng, init_seed=int(rng.integers(2**31)))
        net, rep = train_arrays(cfg, xt, yt, xv, yv, w)
        test_mae = weighted_mae(predict_counts(net, xs), ys, w) if len(xs) else float("nan")
        trials.append(Trial(cfg, rep.validation_mae, test_mae, rep, net))
        if best is None or rep.validation_mae < best[2].validation_mae:
            best = (cfg, net, rep)
    return SearchResult(best[0], best[1], best[2], trials)


# --- checkpoint -----------------------------------------------------------------

_MAGIC = b"LCNN"
_VERSION = 1


def _stable_report(report: TrainReport) -> dict[str, Any]:
    # timings vary run to run; keep checkpoints byte-reproducible
    d = report.to_dict()
    d.pop("wall_clock", None)
    return d


def save_checkpoint(
    path: str | Path, net: Network, fleet_hash: str = "", report: Optional[TrainReport] = None
) -> None:
    """Binary layout: magic, u16 version, u32 header length, UTF-8 JSON header,
    then each array (scale, W0, b0, W1, b1, ...) as little-endian float64 in C order."""
    arrays = [net.scale] + net.params
    header = {
        "config": net.config.to_dict(),
        "fleet_hash": fleet_hash,
        "shapes": [list(a.shape) for a in arrays],
        "report": None if report is None else _stable_report(report),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<HI", _VERSION, len(blob)) + blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[Network, dict[str, Any]]:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    version, hlen = struct.unpack("<HI", data[4:10])
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[10 : 10 + hlen])
    off = 10 + hlen
    arrays = []
    for shape in header["shapes"]:
        size = int(np.prod(shape)) * 8
        arrays.append(np.frombuffer(data[off : off + size], dtype="<f8").reshape(shape).astype(np.float64))
        off += size
    if off != len(data):
        raise ValueError(f"{path}: trailing or missing bytes")
    config = NetworkConfig.from_dict(header["config"])
    params = arrays[1:]
    net = Network(config, params[0::2], params[1::2], arrays[0])
    return net, header
