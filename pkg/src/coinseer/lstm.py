"""Stacked LSTM regressor built directly on numpy.

Layer l maps its input sequence to a hidden sequence through the usual
four gates (input, forget, cell candidate, output; sigmoid, sigmoid,
tanh, sigmoid) with zero initial hidden and cell states; the last
layer's final hidden state feeds a single linear output unit. Gate
weights are packed along one axis in i|f|g|o order. Gradients come from
full backpropagation through time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date
from typing import BinaryIO, NamedTuple, Sequence

import numpy as np

from .dataset import NormParams, WindowedDataset, invert_minmax
from .signals import PRICE_COLUMN

ParamDict = dict[str, np.ndarray]

_MODEL_MAGIC = b"COINSEER-MODEL-1\n"


@dataclass
class Network:
    """Parameter container for one stacked-LSTM regressor."""

    input_dim: int
    sizes: tuple[int, ...]
    params: ParamDict

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not self.sizes or any(h < 1 for h in self.sizes):
            raise ValueError("layer sizes must be positive")
        expected = param_shapes(self.input_dim, self.sizes)
        for key, shape in expected.items():
            arr = self.params.get(key)
            if arr is None or arr.shape != shape:
                raise ValueError(f"parameter {key} missing or misshaped")


class LayerCache(NamedTuple):
    inputs: np.ndarray
    gates: np.ndarray
    cells: np.ndarray
    cell_tanh: np.ndarray
    hidden: np.ndarray


class ForwardCache(NamedTuple):
    layers: tuple[LayerCache, ...]


def param_shapes(input_dim: int, sizes: Sequence[int]) -> dict[str, tuple[int, ...]]:
    """Expected shape of every parameter array, in canonical order."""
    shapes: dict[str, tuple[int, ...]] = {}
    prev = input_dim
    for li, h in enumerate(sizes, start=1):
        shapes[f"w{li}"] = (prev, 4 * h)
        shapes[f"u{li}"] = (h, 4 * h)
        shapes[f"b{li}"] = (4 * h,)
        prev = h
    shapes["wd"] = (prev,)
    shapes["bd"] = (1,)
    return shapes


def init_network(
    input_dim: int, sizes: Sequence[int] = (400, 800), seed: int = 0
) -> Network:
    """Glorot-uniform weights, zero biases except forget-gate biases at 1."""
    rng = np.random.default_rng(seed)
    params: ParamDict = {}
    prev = input_dim
    for li, h in enumerate(sizes, start=1):
        lim_w = math.sqrt(6.0 / (prev + 4 * h))
        lim_u = math.sqrt(6.0 / (h + 4 * h))
        params[f"w{li}"] = rng.uniform(-lim_w, lim_w, (prev, 4 * h))
        params[f"u{li}"] = rng.uniform(-lim_u, lim_u, (h, 4 * h))
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        params[f"b{li}"] = bias
        prev = h
    lim_d = math.sqrt(6.0 / (prev + 1))
    params["wd"] = rng.uniform(-lim_d, lim_d, prev)
    params["bd"] = np.zeros(1)
    return Network(input_dim=input_dim, sizes=tuple(sizes), params=params)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(net: Network, windows: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Predictions for a batch of windows shaped (batch, k, input_dim)."""
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != net.input_dim:
        raise ValueError(
            f"windows must be (batch, k, {net.input_dim}), got {x.shape}"
        )
    batch, k, _ = x.shape
    if k < 1:
        raise ValueError("empty window")
    layers: list[LayerCache] = []
    seq = x
    for li, h in enumerate(net.sizes, start=1):
        w = net.params[f"w{li}"]
        u = net.params[f"u{li}"]
        b = net.params[f"b{li}"]
        gates = np.empty((batch, k, 4 * h))
        cells = np.empty((batch, k, h))
        cell_tanh = np.empty((batch, k, h))
        hidden = np.empty((batch, k, h))
        h_prev = np.zeros((batch, h))
        c_prev = np.zeros((batch, h))
        for t in range(k):
            z = seq[:, t] @ w + b
            if t > 0:
                z += h_prev @ u
            gi = _sigmoid(z[:, :h])
            gf = _sigmoid(z[:, h : 2 * h])
            gg = np.tanh(z[:, 2 * h : 3 * h])
            go = _sigmoid(z[:, 3 * h :])
            c = gf * c_prev + gi * gg
            ct = np.tanh(c)
            h_out = go * ct
            gates[:, t, :h] = gi
            gates[:, t, h : 2 * h] = gf
            gates[:, t, 2 * h : 3 * h] = gg
            gates[:, t, 3 * h :] = go
            cells[:, t] = c
            cell_tanh[:, t] = ct
            hidden[:, t] = h_out
            h_prev = h_out
            c_prev = c
        layers.append(LayerCache(seq, gates, cells, cell_tanh, hidden))
        seq = hidden
    preds = seq[:, -1] @ net.params["wd"] + net.params["bd"][0]
    return preds, ForwardCache(tuple(layers))


def forward(net: Network, window: np.ndarray) -> tuple[float, ForwardCache]:
    """Prediction for a single (k, input_dim) window."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"window must be 2-d, got shape {w.shape}")
    preds, cache = forward_batch(net, w[None])
    return float(preds[0]), cache


def backward(net: Network, cache: ForwardCache, d_preds: np.ndarray) -> ParamDict:
    """Parameter gradients for upstream prediction gradients d_preds.

    Exact backpropagation through time over every layer and step. The
    t=0 recurrent terms are skipped because the initial states are zero,
    which makes those contributions identically zero.
    """
    d = np.atleast_1d(np.asarray(d_preds, dtype=np.float64))
    layers = cache.layers
    batch, k, _ = layers[0].inputs.shape
    if d.shape != (batch,):
        raise ValueError(f"d_preds must have shape ({batch},), got {d.shape}")
    grads: ParamDict = {}
    last_hidden = layers[-1].hidden
    grads["wd"] = last_hidden[:, -1].T @ d
    grads["bd"] = np.array([d.sum()])
    d_seq = np.zeros_like(last_hidden)
    d_seq[:, -1] = d[:, None] * net.params["wd"][None, :]
    for li in range(len(net.sizes), 0, -1):
        lc = layers[li - 1]
        h = net.sizes[li - 1]
        w = net.params[f"w{li}"]
        u = net.params[f"u{li}"]
        dw = np.zeros_like(w)
        du = np.zeros_like(u)
        db = np.zeros(4 * h)
        d_in = np.zeros_like(lc.inputs)
        dh = np.zeros((batch, h))
        dc = np.zeros((batch, h))
        dz = np.empty((batch, 4 * h))
        for t in range(k - 1, -1, -1):
            dh_t = dh + d_seq[:, t]
            gi = lc.gates[:, t, :h]
            gf = lc.gates[:, t, h : 2 * h]
            gg = lc.gates[:, t, 2 * h : 3 * h]
            go = lc.gates[:, t, 3 * h :]
            ct = lc.cell_tanh[:, t]
            do = dh_t * ct
            dc = dc + dh_t * go * (1.0 - ct * ct)
            dz[:, :h] = dc * gg * gi * (1.0 - gi)
            dz[:, 2 * h : 3 * h] = dc * gi * (1.0 - gg * gg)
            dz[:, 3 * h :] = do * go * (1.0 - go)
            if t > 0:
                c_prev = lc.cells[:, t - 1]
                dz[:, h : 2 * h] = dc * c_prev * gf * (1.0 - gf)
            else:
                dz[:, h : 2 * h] = 0.0
            dw += lc.inputs[:, t].T @ dz
            db += dz.sum(axis=0)
            d_in[:, t] = dz @ w.T
            if t > 0:
                du += lc.hidden[:, t - 1].T @ dz
                dh = dz @ u.T
                dc = dc * gf
        grads[f"w{li}"] = dw
        grads[f"u{li}"] = du
        grads[f"b{li}"] = db
        d_seq = d_in
    return grads


def loss_and_grads(
    net: Network, windows: np.ndarray, targets: np.ndarray
) -> tuple[float, ParamDict]:
    """Mean squared error over the batch and its parameter gradients."""
    y = np.asarray(targets, dtype=np.float64)
    preds, cache = forward_batch(net, windows)
    if preds.shape != y.shape:
        raise ValueError(f"targets shape {y.shape}, expected {preds.shape}")
    resid = preds - y
    mse = float(resid @ resid) / resid.size
    grads = backward(net, cache, (2.0 / resid.size) * resid)
    return mse, grads


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    batch_size: int = 16
    learning_rate: float = 0.001
    max_epochs: int = 20
    patience: int | None = 2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive or None")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")


@dataclass
class AdamState:
    m: ParamDict
    v: ParamDict


def init_adam(params: ParamDict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: ParamDict,
    grads: ParamDict,
    state: AdamState,
    t: int,
    config: TrainConfig,
) -> tuple[ParamDict, AdamState]:
    """One bias-corrected update, in place on params and state.

    Arrays whose gradient and accumulated second moment are both all
    zero are skipped: their update is exactly zero either way.
    """
    if t < 1:
        raise ValueError("step index starts at 1")
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    for key, p in params.items():
        g = grads[key]
        v = state.v[key]
        if not g.any() and not v.any():
            continue
        if not np.all(np.isfinite(g)):
            raise ArithmeticError(f"non-finite gradient for parameter {key}")
        m = state.m[key]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return params, state


class EarlyStopper:
    """Tracks best validation loss; stops after ``patience`` flat epochs."""

    def __init__(self, patience: int | None) -> None:
        if patience is not None and patience < 1:
            raise ValueError("patience must be positive or None")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.epoch = 0
        self.streak = 0

    def update(self, value: float) -> bool:
        """Record one epoch's validation loss; True if it improved."""
        self.epoch += 1
        if value < self.best:
            self.best = value
            self.best_epoch = self.epoch
            self.streak = 0
            return True
        self.streak += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.patience is not None and self.streak >= self.patience


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float


@dataclass
class TrainedModel:
    network: Network
    norm: NormParams
    history: tuple[EpochStats, ...]
    best_epoch: int
    k: int = 0
    j: int = 0
    train_end: date | None = None


def train(
    net: Network,
    fit_set: WindowedDataset,
    val_set: WindowedDataset,
    config: TrainConfig,
    *,
    norm: NormParams,
) -> TrainedModel:
    """Mini-batch ADAM with early stopping on validation MSE.

    Shuffles sample order each epoch from config.seed, averages gradients
    within each batch, and restores the parameters of the best validation
    epoch before returning. The passed network is trained in place.
    """
    if fit_set.feature_names != val_set.feature_names:
        raise ValueError("fit and validation feature names differ")
    if len(fit_set.feature_names) != net.input_dim:
        raise ValueError(
            f"network expects {net.input_dim} features, "
            f"data has {len(fit_set.feature_names)}"
        )
    if len(fit_set) < 1 or len(val_set) < 1:
        raise ValueError("fit and validation sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    state = init_adam(net.params)
    stopper = EarlyStopper(config.patience)
    best_params = {k: p.copy() for k, p in net.params.items()}
    history: list[EpochStats] = []
    n = len(fit_set)
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        sse = 0.0
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            preds, cache = forward_batch(net, fit_set.inputs[idx])
            resid = preds - fit_set.targets[idx]
            sse += float(resid @ resid)
            grads = backward(net, cache, (2.0 / idx.size) * resid)
            if config.clip_norm is not None:
                _clip_global_norm(grads, config.clip_norm)
            step += 1
            adam_step(net.params, grads, state, step, config)
        val_preds, _ = forward_batch(net, val_set.inputs)
        val_resid = val_preds - val_set.targets
        val_mse = float(val_resid @ val_resid) / val_resid.size
        if not math.isfinite(val_mse):
            raise ArithmeticError(f"training diverged at epoch {epoch}")
        history.append(EpochStats(epoch, sse / n, val_mse))
        if stopper.update(val_mse):
            best_params = {k: p.copy() for k, p in net.params.items()}
        if stopper.should_stop:
            break
    for key, p in best_params.items():
        net.params[key] = p
    return TrainedModel(
        network=net,
        norm=norm,
        history=tuple(history),
        best_epoch=stopper.best_epoch,
        k=fit_set.k,
        j=fit_set.j,
        train_end=fit_set.anchor_dates[-1],
    )


def _clip_global_norm(grads: ParamDict, max_norm: float) -> None:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def predict(model: TrainedModel, windows: np.ndarray) -> np.ndarray:
    """Forecasts in original price units for a batch of windows."""
    preds, _ = forward_batch(model.network, windows)
    return invert_minmax(preds, PRICE_COLUMN, model.norm)


def save_model(path: str, model: TrainedModel) -> None:
    """Serialize to a deterministic container: magic line, json meta line,
    then consecutive binary arrays (norm mins/maxs, parameters in key order)."""
    keys = sorted(model.network.params)
    meta = {
        "input_dim": model.network.input_dim,
        "sizes": list(model.network.sizes),
        "best_epoch": model.best_epoch,
        "history": [[s.epoch, s.train_mse, s.val_mse] for s in model.history],
        "norm_columns": list(model.norm.columns),
        "param_keys": keys,
        "k": model.k,
        "j": model.j,
        "train_end": None if model.train_end is None else model.train_end.isoformat(),
    }
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        np.save(fh, model.norm.mins, allow_pickle=False)
        np.save(fh, model.norm.maxs, allow_pickle=False)
        for key in keys:
            np.save(fh, model.network.params[key], allow_pickle=False)


def _read_array(fh: BinaryIO) -> np.ndarray:
    return np.load(fh, allow_pickle=False)


def load_model(path: str) -> TrainedModel:
    """Inverse of save_model."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        meta = json.loads(fh.readline().decode("utf-8"))
        mins = _read_array(fh)
        maxs = _read_array(fh)
        params = {key: _read_array(fh) for key in meta["param_keys"]}
    norm = NormParams(columns=tuple(meta["norm_columns"]), mins=mins, maxs=maxs)
    net = Network(
        input_dim=int(meta["input_dim"]),
        sizes=tuple(int(s) for s in meta["sizes"]),
        params=params,
    )
    history = tuple(
        EpochStats(int(e), float(tr), float(va)) for e, tr, va in meta["history"]
    )
    raw_end = meta.get("train_end")
    return TrainedModel(
        network=net,
        norm=norm,
        history=history,
        best_epoch=int(meta["best_epoch"]),
        k=int(meta.get("k", 0)),
        j=int(meta.get("j", 0)),
        train_end=None if raw_end is None else date.fromisoformat(raw_end),
    )
