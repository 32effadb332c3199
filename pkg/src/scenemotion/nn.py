"""Minimal forward-only network ops: cyclic/zero-padded 1D convolutions over
the angular grid, small 2D conv stacks, linear layers, pooling, and an LSTM
cell. Weights live in JSON-serializable layer specs; there is no training.

Feature dimensions realized here: point feature f_p (128), angular pattern
f_a (256), elevation feature f_b (128), scene feature f_s = f_p + f_a + f_b
concatenated (512), moving feature f_g (256), start pose f_sp (56), route
feature f_r (64).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .perception import BevMaps, SphericalDepthMap

F_P_DIM = 128
F_A_DIM = 256
F_B_DIM = 128
F_S_DIM = F_P_DIM + F_A_DIM + F_B_DIM
F_G_DIM = 256
F_SP_DIM = 56
F_R_DIM = 64


class NetworkConfigError(ValueError):
    """Shape-incompatible or malformed network specification."""


@dataclass
class Layer:
    kind: str
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    hyper: dict = field(default_factory=dict)


@dataclass
class NetworkSpec:
    """Ordered layer chain; `validate` rejects incompatible shapes up front."""

    layers: list[Layer]
    name: str = ""

    def to_json(self) -> dict:
        out = []
        for layer in self.layers:
            rec = {"kind": layer.kind, "hyper": layer.hyper}
            for attr in ("weight", "bias"):
                arr = getattr(layer, attr)
                if arr is not None:
                    rec[attr] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            out.append(rec)
        return {"name": self.name, "layers": out}

    @classmethod
    def from_json(cls, doc: dict) -> "NetworkSpec":
        layers = []
        for i, rec in enumerate(doc.get("layers", [])):
            kw = {"kind": rec.get("kind", "?"), "hyper": rec.get("hyper", {})}
            for attr in ("weight", "bias"):
                if attr in rec:
                    shape = rec[attr]["shape"]
                    data = np.asarray(rec[attr]["data"], dtype=np.float64)
                    if data.size != int(np.prod(shape)):
                        raise NetworkConfigError(f"layer {i}: {attr} data does not fill shape {shape}")
                    kw[attr] = data.reshape(shape)
            layers.append(Layer(**kw))
        return cls(layers=layers, name=doc.get("name", ""))

    def validate(self, input_shape: tuple) -> tuple:
        """Propagate shapes through the chain; raises NetworkConfigError."""
        shape = tuple(input_shape)
        for i, layer in enumerate(self.layers):
            try:
                shape = _out_shape(layer, shape)
            except NetworkConfigError as exc:
                raise NetworkConfigError(f"layer {i} ({layer.kind}): {exc}") from None
        return shape


def _out_shape(layer: Layer, shape: tuple) -> tuple:
    kind = layer.kind
    if kind == "relu":
        return shape
    if kind == "linear":
        w = layer.weight
        if w is None or w.ndim != 2:
            raise NetworkConfigError("linear needs a 2D weight")
        if shape[-1] != w.shape[1]:
            raise NetworkConfigError(f"input dim {shape[-1]} != weight in-dim {w.shape[1]}")
        return shape[:-1] + (w.shape[0],)
    if kind in ("cyclic_conv1d", "conv1d"):
        w = layer.weight
        if w is None or w.ndim != 3:
            raise NetworkConfigError("conv1d needs a (C_out, C_in, w) kernel")
        if w.shape[2] % 2 != 1:
            raise NetworkConfigError("kernel width must be odd")
        if len(shape) < 2 or shape[0] != w.shape[1]:
            raise NetworkConfigError(f"input channels {shape[:1]} != kernel in-channels {w.shape[1]}")
        return (w.shape[0],) + shape[1:]
    if kind == "conv2d":
        w = layer.weight
        if w is None or w.ndim != 4:
            raise NetworkConfigError("conv2d needs a (C_out, C_in, kh, kw) kernel")
        if w.shape[2] % 2 != 1 or w.shape[3] % 2 != 1:
            raise NetworkConfigError("kernel sides must be odd")
        if len(shape) != 3 or shape[0] != w.shape[1]:
            raise NetworkConfigError(f"input shape {shape} incompatible with kernel {w.shape}")
        return (w.shape[0],) + shape[1:]
    if kind in ("maxpool", "avgpool"):
        size = layer.hyper.get("size", "global")
        if size == "global":
            return shape[:1]
        size = int(size)
        if len(shape) == 3:
            return (shape[0], shape[1] // size, shape[2] // size)
        if len(shape) == 2:
            return (shape[0], shape[1] // size)
        raise NetworkConfigError(f"cannot pool shape {shape}")
    if kind == "lstm":
        raise NetworkConfigError("lstm layers run through lstm_forward, not forward()")
    raise NetworkConfigError(f"unknown layer kind {kind!r}")


# ---------------------------------------------------------------------------
# Ops


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    y = x @ weight.T
    return y if bias is None else y + bias


def conv1d_cyclic(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    """1D convolution along axis 1 with circular padding (ring longitude).

    out[o, l, ...] = sum_{i, j} w[o, i, j] * x[i, (l + j - w//2) mod L, ...]
    """
    c_out, c_in, width = weight.shape
    half = width // 2
    out = np.zeros((c_out,) + x.shape[1:])
    for j in range(width):
        shifted = np.roll(x, half - j, axis=1)
        out += np.einsum("oi,i...->o...", weight[:, :, j], shifted)
    if bias is not None:
        out += bias.reshape((c_out,) + (1,) * (out.ndim - 1))
    return out


def conv1d_zero(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    """1D convolution along the LAST axis with zero padding (latitude)."""
    c_out, c_in, width = weight.shape
    half = width // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    xp = np.pad(x, pad)
    length = x.shape[-1]
    out = np.zeros((c_out,) + x.shape[1:])
    for j in range(width):
        seg = xp[..., j : j + length]
        out += np.einsum("oi,i...->o...", weight[:, :, j], seg)
    if bias is not None:
        out += bias.reshape((c_out,) + (1,) * (out.ndim - 1))
    return out


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    """Same-size 2D convolution with zero padding."""
    c_out, c_in, kh, kw = weight.shape
    hh, hw = kh // 2, kw // 2
    xp = np.pad(x, [(0, 0), (hh, hh), (hw, hw)])
    h, w = x.shape[1], x.shape[2]
    out = np.zeros((c_out, h, w))
    for a in range(kh):
        for b in range(kw):
            seg = xp[:, a : a + h, b : b + w]
            out += np.einsum("oi,ihw->ohw", weight[:, :, a, b], seg)
    if bias is not None:
        out += bias.reshape(c_out, 1, 1)
    return out


def pool(x: np.ndarray, size, reducer) -> np.ndarray:
    if size == "global":
        return reducer(x.reshape(x.shape[0], -1), axis=1)
    size = int(size)
    if x.ndim == 3:
        h = (x.shape[1] // size) * size
        w = (x.shape[2] // size) * size
        trim = x[:, :h, :w].reshape(x.shape[0], h // size, size, w // size, size)
        return reducer(reducer(trim, axis=4), axis=2)
    if x.ndim == 2:
        l = (x.shape[1] // size) * size
        trim = x[:, :l].reshape(x.shape[0], l // size, size)
        return reducer(trim, axis=2)
    raise NetworkConfigError(f"cannot pool shape {x.shape}")


def forward(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Run the layer chain; validates shapes before executing."""
    spec.validate(tuple(x.shape))
    for layer in spec.layers:
        kind = layer.kind
        if kind == "relu":
            x = relu(x)
        elif kind == "linear":
            x = linear(x, layer.weight, layer.bias)
        elif kind == "cyclic_conv1d":
            x = conv1d_cyclic(x, layer.weight, layer.bias)
        elif kind == "conv1d":
            x = conv1d_zero(x, layer.weight, layer.bias)
        elif kind == "conv2d":
            x = conv2d(x, layer.weight, layer.bias)
        elif kind == "maxpool":
            x = pool(x, layer.hyper.get("size", "global"), np.max)
        elif kind == "avgpool":
            x = pool(x, layer.hyper.get("size", "global"), np.mean)
        else:
            raise NetworkConfigError(f"unknown layer kind {kind!r}")
    return x


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LstmSpec:
    """Single-layer LSTM: gates ordered (input, forget, cell, output)."""

    w_ih: np.ndarray  # (4H, D)
    w_hh: np.ndarray  # (4H, H)
    b_ih: np.ndarray  # (4H,)
    b_hh: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    def to_json(self) -> dict:
        return {k: {"shape": list(getattr(self, k).shape), "data": getattr(self, k).ravel().tolist()}
                for k in ("w_ih", "w_hh", "b_ih", "b_hh")}

    @classmethod
    def from_json(cls, doc: dict) -> "LstmSpec":
        kw = {}
        for k in ("w_ih", "w_hh", "b_ih", "b_hh"):
            kw[k] = np.asarray(doc[k]["data"], dtype=np.float64).reshape(doc[k]["shape"])
        return cls(**kw)


def lstm_forward(spec: LstmSpec, inputs: np.ndarray,
                 state: tuple[np.ndarray, np.ndarray] | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Run the cell over (n, D) inputs; returns (final hidden, (n, H) hiddens)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    hdim = spec.hidden
    if spec.w_ih.shape[0] != 4 * hdim or spec.w_ih.shape[1] != inputs.shape[1]:
        raise NetworkConfigError(
            f"lstm expects input dim {spec.w_ih.shape[1]}, got {inputs.shape[1]}")
    h = np.zeros(hdim) if state is None else state[0]
    c = np.zeros(hdim) if state is None else state[1]
    hs = np.empty((inputs.shape[0], hdim))
    for idx, x in enumerate(inputs):
        gates = spec.w_ih @ x + spec.b_ih + spec.w_hh @ h + spec.b_hh
        i_g = _sigmoid(gates[:hdim])
        f_g = _sigmoid(gates[hdim : 2 * hdim])
        g_g = np.tanh(gates[2 * hdim : 3 * hdim])
        o_g = _sigmoid(gates[3 * hdim :])
        c = f_g * c + i_g * g_g
        h = o_g * np.tanh(c)
        hs[idx] = h
    return h, hs


# ---------------------------------------------------------------------------
# Encoders


def encode_spherical(depth_map: SphericalDepthMap, net: NetworkSpec) -> np.ndarray:
    """Angular-pattern feature f_a from a depth map (clamped, unit-scaled)."""
    x = np.minimum(depth_map.depth, depth_map.d_max)[None, :, :] / depth_map.d_max
    f_a = forward(net, x)
    if f_a.shape != (F_A_DIM,):
        raise NetworkConfigError(f"spherical encoder must emit ({F_A_DIM},), got {f_a.shape}")
    return f_a


def encode_bev(maps: BevMaps, net: NetworkSpec) -> np.ndarray:
    """Elevation feature f_b; input normalized by a fixed 3 m scale."""
    x = np.clip(maps.elevation, -3.0, 3.0)[None, :, :] / 3.0
    f_b = forward(net, x)
    if f_b.shape != (F_B_DIM,):
        raise NetworkConfigError(f"BEV encoder must emit ({F_B_DIM},), got {f_b.shape}")
    return f_b


def encode_points(points: np.ndarray, net: NetworkSpec) -> np.ndarray:
    """Point feature f_p: shared per-point MLP followed by a max pool."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        pts = np.zeros((1, 3))
    per_point = forward(net, pts)
    f_p = per_point.max(axis=0)
    if f_p.shape != (F_P_DIM,):
        raise NetworkConfigError(f"point encoder must emit ({F_P_DIM},), got {f_p.shape}")
    return f_p


def assemble_scene_feature(f_p: np.ndarray, f_a: np.ndarray, f_b: np.ndarray) -> np.ndarray:
    """f_s = f_p (+) f_a (+) f_b, in that order."""
    return np.concatenate([f_p, f_a, f_b])


def farthest_point_sample(points: np.ndarray, count: int, start: int = 0) -> np.ndarray:
    """Deterministic FPS subset (start index fixed); returns (count, 3)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = pts.shape[0]
    if n == 0:
        return np.zeros((0, 3))
    count = min(count, n)
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = start % n
    d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    for i in range(1, count):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        cand = ((pts - pts[nxt]) ** 2).sum(axis=1)
        np.minimum(d2, cand, out=d2)
    return pts[chosen]


# ---------------------------------------------------------------------------
# Default seeded architectures


def _rng_linear(rng, n_out, n_in) -> Layer:
    scale = 1.0 / math.sqrt(n_in)
    return Layer("linear", weight=rng.standard_normal((n_out, n_in)) * scale,
                 bias=rng.standard_normal(n_out) * 0.01)


def _rng_conv1d(rng, kind, c_out, c_in, width=3) -> Layer:
    scale = 1.0 / math.sqrt(c_in * width)
    return Layer(kind, weight=rng.standard_normal((c_out, c_in, width)) * scale,
                 bias=rng.standard_normal(c_out) * 0.01)


def _rng_conv2d(rng, c_out, c_in, k=3) -> Layer:
    scale = 1.0 / math.sqrt(c_in * k * k)
    return Layer("conv2d", weight=rng.standard_normal((c_out, c_in, k, k)) * scale,
                 bias=rng.standard_normal(c_out) * 0.01)


def default_spherical_net(seed: int = 101) -> NetworkSpec:
    """Two spherical layers (cyclic longitude + zero-padded latitude convs),
    channels 1 -> 16 -> 32, global angular average pool, linear to f_a."""
    rng = np.random.default_rng(seed)
    return NetworkSpec(name="spherical_encoder", layers=[
        _rng_conv1d(rng, "cyclic_conv1d", 16, 1),
        _rng_conv1d(rng, "conv1d", 16, 16),
        Layer("relu"),
        _rng_conv1d(rng, "cyclic_conv1d", 32, 16),
        _rng_conv1d(rng, "conv1d", 32, 32),
        Layer("relu"),
        Layer("avgpool", hyper={"size": "global"}),
        _rng_linear(rng, F_A_DIM, 32),
    ])


def default_bev_net(seed: int = 102) -> NetworkSpec:
    rng = np.random.default_rng(seed)
    return NetworkSpec(name="bev_encoder", layers=[
        _rng_conv2d(rng, 8, 1),
        Layer("relu"),
        Layer("maxpool", hyper={"size": 2}),
        _rng_conv2d(rng, 16, 8),
        Layer("relu"),
        Layer("maxpool", hyper={"size": 2}),
        Layer("avgpool", hyper={"size": "global"}),
        _rng_linear(rng, F_B_DIM, 16),
    ])


def default_point_net(seed: int = 103) -> NetworkSpec:
    rng = np.random.default_rng(seed)
    return NetworkSpec(name="point_encoder", layers=[
        _rng_linear(rng, 64, 3),
        Layer("relu"),
        _rng_linear(rng, F_P_DIM, 64),
    ])


def default_lstm(seed: int, input_dim: int, hidden: int) -> LstmSpec:
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(max(input_dim, hidden))
    return LstmSpec(
        w_ih=rng.standard_normal((4 * hidden, input_dim)) * scale,
        w_hh=rng.standard_normal((4 * hidden, hidden)) * scale,
        b_ih=rng.standard_normal(4 * hidden) * 0.01,
        b_hh=rng.standard_normal(4 * hidden) * 0.01,
    )


def save_spec(spec: NetworkSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_json(), fh)


def load_spec(path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return NetworkSpec.from_json(json.load(fh))
