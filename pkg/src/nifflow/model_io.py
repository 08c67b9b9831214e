"""Model and dataset file formats, deterministic forward passes, activation capture.

Models are JSON documents::

    {"input_shape": [4], "class_count": 3,
     "layers": [{"kind": "dense", "activation": "relu",
                 "weights": [[...], ...], "bias": [...]},
                ...]}

Dense weights are nested row-major ``out x in`` arrays; conv2d weights are
``out_ch x in_ch x kh x kw`` with 'valid' padding and an integer stride.
Datasets are CSV files with a header row, one ``label`` column of integer
class indices, and numeric feature columns. Image datasets store each image
flattened row-major over ``(height, width, channels)`` and declare the shape
in a ``<path>.meta.json`` sidecar.

All arithmetic runs in float64; files may carry float32 values, which are
widened on load.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ModelFormatError",
    "DatasetFormatError",
    "Layer",
    "ModelGraph",
    "Dataset",
    "LayerActivations",
    "ActivationRecord",
    "load_model",
    "save_model",
    "model_fingerprint",
    "load_dataset",
    "save_dataset",
    "forward",
    "predict_accuracy",
]

LAYER_KINDS = ("dense", "conv2d", "flatten")
ACTIVATIONS = ("relu", "softmax", "identity")


class ModelFormatError(ValueError):
    """Model file failed to parse or violates a shape invariant."""


class DatasetFormatError(ValueError):
    """Dataset file failed to parse or contains invalid values."""


@dataclass
class Layer:
    """One layer of a feedforward classifier.

    ``weights``/``bias`` are None for flatten layers. Conv layers use 'valid'
    padding only; ``stride`` is ignored for other kinds.
    """

    kind: str
    activation: str = "identity"
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1


@dataclass
class ModelGraph:
    """A validated stack of layers mapping ``input_shape`` to ``class_count`` logits."""

    layers: list[Layer]
    input_shape: tuple[int, ...]
    class_count: int
    output_shapes: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.output_shapes = _validate_model(self)

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))


def _validate_model(model: ModelGraph) -> list[tuple[int, ...]]:
    if not model.layers:
        raise ModelFormatError("model has no layers")
    if model.class_count < 1:
        raise ModelFormatError(f"class_count must be positive, got {model.class_count}")
    if len(model.input_shape) not in (1, 3):
        raise ModelFormatError(
            f"input_shape must be [n] or [h, w, ch], got {list(model.input_shape)}"
        )
    if any(d < 1 for d in model.input_shape):
        raise ModelFormatError(f"input_shape entries must be positive, got {list(model.input_shape)}")

    shapes = []
    shape = model.input_shape
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        if layer.kind not in LAYER_KINDS:
            raise ModelFormatError(f"layer {i}: unknown kind {layer.kind!r}")
        if layer.activation not in ACTIVATIONS:
            raise ModelFormatError(f"layer {i}: unknown activation {layer.activation!r}")
        if layer.activation == "softmax" and i != last:
            raise ModelFormatError(f"layer {i}: softmax is permitted only on the final layer")

        if layer.kind == "dense":
            if len(shape) != 1:
                raise ModelFormatError(
                    f"layer {i}: dense layer needs a flat input but gets shape "
                    f"{shape}; insert a flatten layer first"
                )
            w, b = layer.weights, layer.bias
            if w is None or w.ndim != 2:
                raise ModelFormatError(f"layer {i}: dense weights must be a 2-d out x in array")
            out_dim, in_dim = w.shape
            if in_dim != shape[0]:
                raise ModelFormatError(
                    f"layer {i}: shape mismatch, weights expect in-dim {in_dim} "
                    f"but the previous layer provides {shape[0]}"
                )
            if b is None or b.shape != (out_dim,):
                raise ModelFormatError(
                    f"layer {i}: bias must have shape ({out_dim},), got "
                    f"{None if b is None else b.shape}"
                )
            shape = (out_dim,)
        elif layer.kind == "conv2d":
            if len(shape) != 3:
                raise ModelFormatError(
                    f"layer {i}: conv2d needs an image-shaped input but gets shape {shape}"
                )
            if layer.activation == "softmax":
                raise ModelFormatError(f"layer {i}: softmax is not supported on conv layers")
            w, b = layer.weights, layer.bias
            if w is None or w.ndim != 4:
                raise ModelFormatError(
                    f"layer {i}: conv2d weights must be a 4-d out_ch x in_ch x kh x kw array"
                )
            out_ch, in_ch, kh, kw = w.shape
            h, wd, ch = shape
            if in_ch != ch:
                raise ModelFormatError(
                    f"layer {i}: shape mismatch, kernel expects {in_ch} input channels "
                    f"but the previous layer provides {ch}"
                )
            s = int(layer.stride)
            if s < 1:
                raise ModelFormatError(f"layer {i}: stride must be a positive integer, got {layer.stride}")
            if kh > h or kw > wd:
                raise ModelFormatError(
                    f"layer {i}: kernel {kh}x{kw} does not fit input {h}x{wd} with valid padding"
                )
            if b is None or b.shape != (out_ch,):
                raise ModelFormatError(
                    f"layer {i}: bias must have shape ({out_ch},), got "
                    f"{None if b is None else b.shape}"
                )
            shape = ((h - kh) // s + 1, (wd - kw) // s + 1, out_ch)
        else:  # flatten
            if layer.weights is not None or layer.bias is not None:
                raise ModelFormatError(f"layer {i}: flatten layers carry no weights or bias")
            if len(shape) != 3:
                raise ModelFormatError(
                    f"layer {i}: flatten expects an image-shaped input but gets shape {shape}"
                )
            shape = (int(np.prod(shape)),)
        shapes.append(shape)

    if model.layers[-1].kind != "dense":
        raise ModelFormatError("the final layer must be dense")
    if shape != (model.class_count,):
        raise ModelFormatError(
            f"final layer produces {shape[0]} outputs but class_count is {model.class_count}"
        )
    return shapes


@dataclass
class Dataset:
    """Feature matrix plus integer class labels.

    ``image_shape`` is ``(height, width, channels)`` for image data whose rows
    are the row-major flattening of each image.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None
    image_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetFormatError("features must be a 2-d N x n matrix")
        n_samples = self.features.shape[0]
        if n_samples < 1:
            raise DatasetFormatError("dataset must contain at least one sample")
        if self.labels.shape != (n_samples,):
            raise DatasetFormatError(
                f"labels must be a length-{n_samples} vector, got shape {self.labels.shape}"
            )
        if not np.isfinite(self.features).all():
            raise DatasetFormatError("features contain non-finite values")
        if (self.labels < 0).any():
            raise DatasetFormatError("labels must be nonnegative class indices")
        if self.feature_names is not None and len(self.feature_names) != self.features.shape[1]:
            raise DatasetFormatError("feature_names length does not match the feature count")
        if self.image_shape is not None:
            self.image_shape = tuple(int(d) for d in self.image_shape)
            if len(self.image_shape) != 3:
                raise DatasetFormatError("image_shape must be (height, width, channels)")
            if int(np.prod(self.image_shape)) != self.features.shape[1]:
                raise DatasetFormatError(
                    f"image_shape {self.image_shape} does not flatten to "
                    f"{self.features.shape[1]} features"
                )

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]


@dataclass
class LayerActivations:
    """Recorded activations of one layer over every sample.

    ``matrix`` is N x units; conv layers report channel means there and keep
    the raw N x ch x h x w tensor alongside.
    """

    kind: str
    matrix: np.ndarray
    raw: np.ndarray | None = None


@dataclass
class ActivationRecord:
    """Per-layer activations for a full dataset pass; index 0 is the model input."""

    layers: list[LayerActivations]

    @property
    def sample_count(self) -> int:
        return self.layers[0].matrix.shape[0]

    def unit_layers(self) -> list[LayerActivations]:
        """Layers that carry graph units: the input plus every non-flatten layer."""
        return [la for la in self.layers if la.kind != "flatten"]

    @property
    def logits(self) -> np.ndarray:
        return self.layers[-1].matrix


# ---------------------------------------------------------------------------
# serialization


def _layer_to_jsonable(layer: Layer) -> dict:
    doc: dict = {"kind": layer.kind, "activation": layer.activation}
    if layer.kind == "conv2d":
        doc["stride"] = int(layer.stride)
    if layer.weights is not None:
        doc["weights"] = layer.weights.tolist()
        doc["bias"] = layer.bias.tolist()
    return doc


def model_to_jsonable(model: ModelGraph) -> dict:
    return {
        "input_shape": list(model.input_shape),
        "class_count": int(model.class_count),
        "layers": [_layer_to_jsonable(l) for l in model.layers],
    }


def model_fingerprint(model: ModelGraph) -> str:
    """Stable hex digest of the model's canonical JSON form."""
    blob = json.dumps(model_to_jsonable(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def save_model(model: ModelGraph, path) -> None:
    text = json.dumps(model_to_jsonable(model), sort_keys=True, indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def _layer_from_jsonable(doc, index: int) -> Layer:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"layer {index}: expected an object, got {type(doc).__name__}")
    kind = doc.get("kind")
    if kind not in LAYER_KINDS:
        raise ModelFormatError(f"layer {index}: unknown kind {kind!r}")
    if doc.get("padding", "valid") != "valid":
        raise ModelFormatError(
            f"layer {index}: only 'valid' padding is supported, got {doc['padding']!r}"
        )
    activation = doc.get("activation", "identity")
    weights = bias = None
    if kind != "flatten":
        try:
            weights = np.asarray(doc["weights"], dtype=np.float64)
            bias = np.asarray(doc["bias"], dtype=np.float64)
        except KeyError as exc:
            raise ModelFormatError(f"layer {index}: missing {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"layer {index}: ragged or non-numeric arrays ({exc})") from exc
        if not np.isfinite(weights).all() or not np.isfinite(bias).all():
            raise ModelFormatError(f"layer {index}: weights contain non-finite values")
    else:
        if "weights" in doc or "bias" in doc:
            raise ModelFormatError(f"layer {index}: flatten layers carry no weights or bias")
    return Layer(
        kind=kind,
        activation=activation,
        weights=weights,
        bias=bias,
        stride=int(doc.get("stride", 1)),
    )


def load_model(path) -> ModelGraph:
    """Parse and validate a model file; raises ModelFormatError with the offending layer."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    for key in ("input_shape", "class_count", "layers"):
        if key not in doc:
            raise ModelFormatError(f"{path}: missing top-level key {key!r}")
    layers = [_layer_from_jsonable(l, i) for i, l in enumerate(doc["layers"])]
    return ModelGraph(
        layers=layers,
        input_shape=tuple(doc["input_shape"]),
        class_count=int(doc["class_count"]),
    )


def _meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def load_dataset(path) -> Dataset:
    """Load a CSV dataset; the ``label`` column holds integer class indices."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetFormatError(f"{path}: empty file") from None
    if "label" not in header:
        raise DatasetFormatError(f"{path}: no 'label' column in header {header}")
    label_col = header.index("label")
    feature_names = [h for i, h in enumerate(header) if i != label_col]

    features, labels = [], []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetFormatError(
                f"{path}: line {row_no} has {len(row)} fields, expected {len(header)}"
            )
        try:
            values = [float(v) for v in row]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {row_no}: {exc}") from exc
        raw_label = values.pop(label_col)
        if not math.isfinite(raw_label) or raw_label != int(raw_label):
            raise DatasetFormatError(
                f"{path}: line {row_no}: label {raw_label!r} is not an integer class index"
            )
        labels.append(int(raw_label))
        features.append(values)
    if not features:
        raise DatasetFormatError(f"{path}: no data rows")

    image_shape = None
    meta = _meta_path(path)
    if meta.exists():
        try:
            meta_doc = json.loads(meta.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{meta}: not valid JSON ({exc})") from exc
        if "image_shape" in meta_doc:
            image_shape = tuple(meta_doc["image_shape"])

    return Dataset(
        features=np.asarray(features, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        feature_names=feature_names,
        image_shape=image_shape,
    )


def save_dataset(dataset: Dataset, path) -> None:
    names = dataset.feature_names or [f"f{i}" for i in range(dataset.features.shape[1])]
    lines = [",".join(names + ["label"])]
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(label)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    if dataset.image_shape is not None:
        meta = {"image_shape": list(dataset.image_shape)}
        _meta_path(path).write_text(
            json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
        )


# ---------------------------------------------------------------------------
# evaluation


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    # x: (N, C_in, H, W); w: (C_out, C_in, kh, kw); valid padding
    _, _, h, wd = x.shape
    _, _, kh, kw = w.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    out = np.zeros((x.shape[0], w.shape[0], oh, ow))
    for di in range(kh):
        for dj in range(kw):
            patch = x[:, :, di : di + stride * oh : stride, dj : dj + stride * ow : stride]
            out += np.einsum("nchw,oc->nohw", patch, w[:, :, di, dj])
    return out + b[None, :, None, None]


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        return _softmax(z)
    return z


def forward(model: ModelGraph, dataset: Dataset) -> ActivationRecord:
    """Run the model over every sample and record activations at each layer.

    Deterministic: identical inputs give bit-identical records.
    """
    feats = np.asarray(dataset.features, dtype=np.float64)
    expected = model.input_size
    if feats.shape[1] != expected:
        raise ValueError(
            f"dataset has {feats.shape[1]} features but the model expects {expected}"
        )
    record = [LayerActivations(kind="input", matrix=feats.copy())]

    if len(model.input_shape) == 3:
        h, wd, ch = model.input_shape
        current = feats.reshape(-1, h, wd, ch).transpose(0, 3, 1, 2)
    else:
        current = feats

    for layer in model.layers:
        if layer.kind == "dense":
            z = current @ layer.weights.T + layer.bias
            act = _apply_activation(z, layer.activation)
            record.append(LayerActivations(kind="dense", matrix=act))
            current = act
        elif layer.kind == "conv2d":
            z = _conv2d(current, layer.weights, layer.bias, int(layer.stride))
            act = _apply_activation(z, layer.activation)
            record.append(
                LayerActivations(kind="conv2d", matrix=act.mean(axis=(2, 3)), raw=act)
            )
            current = act
        else:  # flatten
            flat = current.reshape(current.shape[0], -1)
            record.append(LayerActivations(kind="flatten", matrix=flat))
            current = flat
    return ActivationRecord(layers=record)


def predict_accuracy(model: ModelGraph, dataset: Dataset) -> float:
    """Fraction of samples whose argmax output matches the label (ties go to the lowest class)."""
    if int(dataset.labels.max()) >= model.class_count:
        raise ValueError(
            f"label {int(dataset.labels.max())} out of range for class_count {model.class_count}"
        )
    record = forward(model, dataset)
    preds = np.argmax(record.logits, axis=1)
    return float(np.mean(preds == dataset.labels))
