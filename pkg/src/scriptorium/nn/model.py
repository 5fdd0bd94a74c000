"""Model descriptions and the runtime that executes them.

A :class:`ModelSpec` is a declarative list of layer descriptors (hashable,
serializable); :class:`Model` instantiates it into layer objects with
freshly initialized parameters.  The recognizer follows a fixed recipe:
four convolution blocks (conv, ReLU, batch norm, and a 2x2 max pool on all
but the last), a collapse of channels x height into per-column features,
stacked bidirectional LSTMs with dropout in between, and a linear +
log-softmax head over the character classes plus the CTC blank.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import layers as L
from .layers import ShapeError

RECOGNIZER_KERNELS = ((4, 16), (4, 16), (3, 8), (3, 8))
RECOGNIZER_PADDINGS = ((1, 7), (1, 7), (1, 3), (1, 3))
FIDUCIAL_CHANNELS = (32, 32, 64, 64)
FIDUCIAL_LSTM_HIDDEN = 512
FIDUCIAL_LSTM_LAYERS = 3
FIDUCIAL_INPUT_HEIGHT = 128
LSTM_DROPOUT = 0.3


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    config: tuple  # sorted (key, value) pairs, hashable

    @classmethod
    def of(cls, kind: str, **config) -> "LayerSpec":
        return cls(kind, tuple(sorted(config.items())))

    @property
    def cfg(self) -> dict:
        return dict(self.config)


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "recognizer" | "segmenter"
    input_height: int
    input_channels: int
    layer_specs: tuple[LayerSpec, ...]
    n_char: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "input_height": self.input_height,
                "input_channels": self.input_channels,
                "n_char": self.n_char,
                "layers": [[ls.kind, ls.cfg] for ls in self.layer_specs],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        raw = json.loads(text)
        return cls(
            kind=raw["kind"],
            input_height=raw["input_height"],
            input_channels=raw["input_channels"],
            n_char=raw["n_char"],
            layer_specs=tuple(LayerSpec.of(kind, **cfg) for kind, cfg in raw["layers"]),
        )

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]


def build_recognizer(
    n_char: int,
    conv_channels: tuple[int, int, int, int] = FIDUCIAL_CHANNELS,
    lstm_hidden: int = FIDUCIAL_LSTM_HIDDEN,
    lstm_layers: int = FIDUCIAL_LSTM_LAYERS,
    dropout: float = LSTM_DROPOUT,
    input_height: int = FIDUCIAL_INPUT_HEIGHT,
) -> ModelSpec:
    """Recognizer spec; defaults give the full-size reference model.

    Narrower channels/hidden sizes (and a lower input height) produce a
    width-reduced variant with the same topology, for desk-scale training.
    """
    if n_char < 1:
        raise ValueError("n_char must be >= 1")
    specs: list[LayerSpec] = []
    in_ch = 1
    h = input_height
    for i, out_ch in enumerate(conv_channels, start=1):
        kh, kw = RECOGNIZER_KERNELS[i - 1]
        ph, pw = RECOGNIZER_PADDINGS[i - 1]
        specs.append(LayerSpec.of(
            "conv", name=f"conv{i}", in_ch=in_ch, out_ch=out_ch, kh=kh, kw=kw, ph=ph, pw=pw
        ))
        specs.append(LayerSpec.of("relu", name=f"relu{i}"))
        specs.append(LayerSpec.of("batchnorm", name=f"bn{i}", channels=out_ch))
        h = h + 2 * ph - kh + 1
        if i < len(conv_channels):
            specs.append(LayerSpec.of("maxpool", name=f"pool{i}"))
            h //= 2
        in_ch = out_ch
    specs.append(LayerSpec.of("collapse", name="collapse"))
    feat = in_ch * h
    for j in range(1, lstm_layers + 1):
        specs.append(LayerSpec.of("bilstm", name=f"lstm{j}", input_size=feat, hidden=lstm_hidden))
        feat = 2 * lstm_hidden
        if j < lstm_layers:
            specs.append(LayerSpec.of("dropout", name=f"drop{j}", p=dropout))
    specs.append(LayerSpec.of("linear", name="fc", in_features=feat, out_features=n_char + 1))
    specs.append(LayerSpec.of("logsoftmax", name="logits"))
    return ModelSpec(
        kind="recognizer",
        input_height=input_height,
        input_channels=1,
        layer_specs=tuple(specs),
        n_char=n_char,
    )


def build_fiducial_model(n_char: int) -> ModelSpec:
    """The full-size reference recognizer (about 19M parameters)."""
    return build_recognizer(n_char)


def build_segmentation_model(
    channels: tuple[int, ...] = (16, 32, 64, 64, 64),
    lstm_hidden: int = 32,
) -> ModelSpec:
    """Baseline-detection topology: five 3x3 conv blocks (two pooled), an
    x-axis and a y-axis bidirectional LSTM, a 1x1 bottleneck, two more axis
    LSTMs, and a 1x1 head emitting start/baseline/end maps through a
    sigmoid.  Runs forward with supplied weights; training it is out of
    scope here.
    """
    specs: list[LayerSpec] = []
    in_ch = 3
    for i, out_ch in enumerate(channels, start=1):
        specs.append(LayerSpec.of(
            "conv", name=f"conv{i}", in_ch=in_ch, out_ch=out_ch, kh=3, kw=3, ph=1, pw=1
        ))
        specs.append(LayerSpec.of("relu", name=f"relu{i}"))
        specs.append(LayerSpec.of("batchnorm", name=f"bn{i}", channels=out_ch))
        if i <= 2:
            specs.append(LayerSpec.of("maxpool", name=f"pool{i}"))
        in_ch = out_ch
    specs.append(LayerSpec.of("axislstm", name="lstm_x1", axis="x", input_size=in_ch, hidden=lstm_hidden))
    specs.append(LayerSpec.of("axislstm", name="lstm_y1", axis="y", input_size=2 * lstm_hidden, hidden=lstm_hidden))
    specs.append(LayerSpec.of(
        "conv", name="bottleneck", in_ch=2 * lstm_hidden, out_ch=lstm_hidden, kh=1, kw=1, ph=0, pw=0
    ))
    specs.append(LayerSpec.of("relu", name="relu_b"))
    specs.append(LayerSpec.of("axislstm", name="lstm_y2", axis="y", input_size=lstm_hidden, hidden=lstm_hidden))
    specs.append(LayerSpec.of("axislstm", name="lstm_x2", axis="x", input_size=2 * lstm_hidden, hidden=lstm_hidden))
    specs.append(LayerSpec.of("conv", name="head", in_ch=2 * lstm_hidden, out_ch=3, kh=1, kw=1, ph=0, pw=0))
    specs.append(LayerSpec.of("sigmoid", name="maps"))
    return ModelSpec(kind="segmenter", input_height=0, input_channels=3, layer_specs=tuple(specs), n_char=0)


def _instantiate(spec: LayerSpec, rng: np.random.Generator) -> L.Layer:
    cfg = spec.cfg
    name = cfg["name"]
    if spec.kind == "conv":
        return L.Conv2d(name, cfg["in_ch"], cfg["out_ch"], (cfg["kh"], cfg["kw"]), (cfg["ph"], cfg["pw"]), rng)
    if spec.kind == "relu":
        return L.ReLU(name)
    if spec.kind == "batchnorm":
        return L.BatchNorm2d(name, cfg["channels"])
    if spec.kind == "maxpool":
        return L.MaxPool2x2(name)
    if spec.kind == "dropout":
        return L.Dropout(name, cfg["p"])
    if spec.kind == "collapse":
        return L.Collapse(name)
    if spec.kind == "bilstm":
        return L.BiLSTM(name, cfg["input_size"], cfg["hidden"], rng)
    if spec.kind == "axislstm":
        return L.AxisBiLSTM(name, cfg["input_size"], cfg["hidden"], cfg["axis"], rng)
    if spec.kind == "linear":
        return L.Linear(name, cfg["in_features"], cfg["out_features"], rng)
    if spec.kind == "logsoftmax":
        return L.LogSoftmax(name)
    if spec.kind == "sigmoid":
        return L.Sigmoid(name)
    raise ValueError(f"unknown layer kind {spec.kind!r}")


class Model:
    """Executable stack of layers built from a spec."""

    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        init_rng = np.random.default_rng(seed)
        self.layers = [_instantiate(ls, init_rng) for ls in spec.layer_specs]
        self.rng = np.random.default_rng(seed + 1)  # dropout noise

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        out = x
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=self.rng)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        grad = dout
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.grads())
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            out.update(layer.buffers())
        return out

    def state(self) -> dict[str, np.ndarray]:
        return {**self.params(), **self.buffers()}

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        state = self.state()
        missing = sorted(set(state) - set(tensors))
        if missing:
            raise ShapeError(f"missing tensors: {missing[:4]}")
        for name, target in state.items():
            value = tensors[name]
            if tuple(value.shape) != tuple(target.shape):
                raise ShapeError(
                    f"{name}: shape {tuple(value.shape)} does not match spec {tuple(target.shape)}"
                )
            target[...] = value.astype(np.float32)

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def parameter_count(self) -> int:
        return sum(int(np.prod(p.shape)) for p in self.params().values())


def conv_output_length(spec: ModelSpec, size: int, axis: str) -> int:
    """Spatial extent after the conv stack along 'h' or 'w'."""
    n = size
    for ls in spec.layer_specs:
        cfg = ls.cfg
        if ls.kind == "conv" and cfg["name"].startswith("conv"):
            k = cfg["kh"] if axis == "h" else cfg["kw"]
            p = cfg["ph"] if axis == "h" else cfg["pw"]
            n = n + 2 * p - k + 1
        elif ls.kind == "maxpool":
            n //= 2
    return n


def frames_for_width(spec: ModelSpec, width: int) -> int:
    """Number of output frames the recognizer produces for an input width."""
    return conv_output_length(spec, width, "w")


def min_width_for_frames(spec: ModelSpec, frames: int = 1) -> int:
    width = 1
    while frames_for_width(spec, width) < frames:
        width += 1
    return width


def forward(spec: ModelSpec, weights, line, train: bool = False) -> np.ndarray:
    """Run the recognizer over one normalized line; returns (N, n_char+1)
    log-probabilities.

    ``weights`` is a ModelWeights (or a plain name->tensor dict).  The line
    is resized to the spec's input height if needed.
    """
    from ..lineproc import NormalizedLine, resize_to_height

    if isinstance(line, NormalizedLine):
        line = resize_to_height(line, spec.input_height)
        pixels = line.pixels
    else:
        pixels = np.asarray(line, dtype=np.float32)
    if pixels.shape[0] != spec.input_height:
        raise ShapeError(f"input height {pixels.shape[0]} != spec {spec.input_height}")
    model = Model(spec, seed=0)
    tensors = weights.tensors if hasattr(weights, "tensors") else weights
    model.load_state(tensors)
    x = pixels[None, None, :, :].astype(np.float32)
    return model.forward(x, train=train)[0]
