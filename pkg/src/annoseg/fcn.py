"""FCN-8s-style segmentation network with analytic gradients.

Five conv/ReLU stacks, each closed by a 2x2 max pool, take the input
down to 1/32 resolution.  1x1 score layers after stacks 3, 4 and 5
produce per-class maps; the deeper scores are upsampled x2 and fused by
addition with the shallower ones, and the final fused map is upsampled
x8, so logits match the input size exactly.  Channel widths are
configurable; upsampling weights are fixed bilinear, not learned.
"""

import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import ops

INPUT_MULTIPLE = 32
N_STACKS = 5
# stacks whose pooled output feeds a score layer, shallow to deep
SCORE_STACKS = (2, 3, 4)

DEFAULT_WIDTHS = (16, 32, 64, 128, 128)
DEFAULT_CONVS_PER_STACK = 2

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    widths: tuple = DEFAULT_WIDTHS
    convs_per_stack: int = DEFAULT_CONVS_PER_STACK
    num_classes: int = 2
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) != N_STACKS:
            raise ValueError(f"exactly {N_STACKS} stack widths required, got {len(self.widths)}")
        if any(w < 1 for w in self.widths):
            raise ValueError("stack widths must be >= 1")
        if self.convs_per_stack < 1:
            raise ValueError("need at least one conv per stack")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.in_channels < 1:
            raise ValueError("need at least 1 input channel")

    def to_dict(self):
        return {
            "widths": list(self.widths),
            "convs_per_stack": self.convs_per_stack,
            "num_classes": self.num_classes,
            "in_channels": self.in_channels,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            widths=tuple(d["widths"]),
            convs_per_stack=int(d["convs_per_stack"]),
            num_classes=int(d["num_classes"]),
            in_channels=int(d["in_channels"]),
        )


@dataclass
class Fcn8sParams:
    """All learnable arrays, addressable by name for the optimizer/checkpoint.

    conv_w[s][l] is the l-th 3x3 kernel of stack s; score_w[i] are the
    1x1 class-score kernels for SCORE_STACKS[i].
    """

    config: NetworkConfig
    conv_w: list = field(default_factory=list)
    conv_b: list = field(default_factory=list)
    score_w: list = field(default_factory=list)
    score_b: list = field(default_factory=list)

    def named_arrays(self):
        for s in range(N_STACKS):
            for l in range(len(self.conv_w[s])):
                yield f"stack{s}.conv{l}.w", self.conv_w[s][l]
                yield f"stack{s}.conv{l}.b", self.conv_b[s][l]
        for i, s in enumerate(SCORE_STACKS):
            yield f"score{s}.w", self.score_w[i]
            yield f"score{s}.b", self.score_b[i]

    def as_dict(self):
        return dict(self.named_arrays())

    def set_array(self, name, value):
        d = self.as_dict()
        d[name][...] = value

    def copy(self):
        p = Fcn8sParams(config=self.config)
        p.conv_w = [[w.copy() for w in stack] for stack in self.conv_w]
        p.conv_b = [[b.copy() for b in stack] for stack in self.conv_b]
        p.score_w = [w.copy() for w in self.score_w]
        p.score_b = [b.copy() for b in self.score_b]
        return p

    def astype(self, dtype):
        p = Fcn8sParams(config=self.config)
        p.conv_w = [[w.astype(dtype) for w in stack] for stack in self.conv_w]
        p.conv_b = [[b.astype(dtype) for b in stack] for stack in self.conv_b]
        p.score_w = [w.astype(dtype) for w in self.score_w]
        p.score_b = [b.astype(dtype) for b in self.score_b]
        return p


def init_params(config: NetworkConfig, rng, dtype=np.float32) -> Fcn8sParams:
    """Kaiming fan-in init for conv kernels, zeros for biases and score layers.

    Zero score layers make the initial logits identically zero, which
    the shape tests rely on as a sanity anchor.
    """
    params = Fcn8sParams(config=config)
    c_in = config.in_channels
    for s in range(N_STACKS):
        ws, bs = [], []
        for _ in range(config.convs_per_stack):
            c_out = config.widths[s]
            fan_in = c_in * 9
            w = rng.standard_normal((c_out, c_in, 3, 3)) * np.sqrt(2.0 / fan_in)
            ws.append(w.astype(dtype))
            bs.append(np.zeros(c_out, dtype=dtype))
            c_in = c_out
        params.conv_w.append(ws)
        params.conv_b.append(bs)
    for s in SCORE_STACKS:
        params.score_w.append(
            np.zeros((config.num_classes, config.widths[s], 1, 1), dtype=dtype)
        )
        params.score_b.append(np.zeros(config.num_classes, dtype=dtype))
    return params


def fcn8s_forward(params: Fcn8sParams, x, want_cache: bool = False):
    """Run the network; returns logits (N, num_classes, H, W).

    H and W must be multiples of 32 so the five pools divide evenly;
    with ``want_cache`` the intermediate activations needed by
    :func:`fcn8s_backward` are returned as well.
    """
    ops._validate_tensor(x, "network input")
    n, c, h, w = x.shape
    cfg = params.config
    if c != cfg.in_channels:
        raise ValueError(f"input has {c} channels, network expects {cfg.in_channels}")
    if h % INPUT_MULTIPLE or w % INPUT_MULTIPLE:
        raise ValueError(
            f"input spatial dims must be multiples of {INPUT_MULTIPLE}, got {h}x{w}"
        )

    cache = {"x": x, "stacks": []} if want_cache else None
    feats = x
    pooled = []
    for s in range(N_STACKS):
        layers = []
        for l in range(len(params.conv_w[s])):
            z = ops.conv2d_forward(feats, params.conv_w[s][l], params.conv_b[s][l])
            a = ops.relu_forward(z)
            if want_cache:
                layers.append({"x": feats, "z": z})
            feats = a
        out, idx = ops.maxpool2d_forward(feats)
        if want_cache:
            cache["stacks"].append(
                {"layers": layers, "pre_pool": feats.shape, "idx": idx, "out": out}
            )
        pooled.append(out)
        feats = out

    scores = []
    for i, s in enumerate(SCORE_STACKS):
        scores.append(
            ops.conv2d_forward(pooled[s], params.score_w[i], params.score_b[i])
        )
    s3, s4, s5 = scores

    up5 = ops.bilinear_upsample_forward(s5, 2)
    fused4 = up5 + s4
    up4 = ops.bilinear_upsample_forward(fused4, 2)
    fused3 = up4 + s3
    logits = ops.bilinear_upsample_forward(fused3, 8)

    if want_cache:
        cache["pooled"] = pooled
        return logits, cache
    return logits


def fcn8s_backward(params: Fcn8sParams, cache, dlogits):
    """Analytic gradients for every parameter; returns a name->array dict."""
    grads = {}
    pooled = cache["pooled"]

    dfused3 = ops.bilinear_upsample_backward(dlogits, 8)
    ds3 = dfused3
    dfused4 = ops.bilinear_upsample_backward(dfused3, 2)
    ds4 = dfused4
    ds5 = ops.bilinear_upsample_backward(dfused4, 2)

    dpooled = [None] * N_STACKS
    for i, (s, dscore) in enumerate(zip(SCORE_STACKS, (ds3, ds4, ds5))):
        dx, dw, db = ops.conv2d_backward(pooled[s], params.score_w[i], dscore)
        grads[f"score{s}.w"] = dw
        grads[f"score{s}.b"] = db
        dpooled[s] = dx

    dnext = None
    for s in reversed(range(N_STACKS)):
        d = dnext
        if dpooled[s] is not None:
            d = dpooled[s] if d is None else d + dpooled[s]
        stack = cache["stacks"][s]
        dfeats = ops.maxpool2d_backward(d, stack["idx"], stack["pre_pool"])
        for l in reversed(range(len(stack["layers"]))):
            layer = stack["layers"][l]
            dz = ops.relu_backward(dfeats, layer["z"])
            dfeats, dw, db = ops.conv2d_backward(
                layer["x"], params.conv_w[s][l], dz
            )
            grads[f"stack{s}.conv{l}.w"] = dw
            grads[f"stack{s}.conv{l}.b"] = db
        dnext = dfeats
    return grads


def predict_probabilities(params: Fcn8sParams, x):
    """Forward pass plus channel softmax."""
    return ops.softmax(fcn8s_forward(params, x))


def save_checkpoint(path, params: Fcn8sParams, meta: dict | None = None) -> None:
    """Write a versioned npz checkpoint.

    Layout: ``__meta__`` holds a JSON document (format version, network
    config, caller metadata); every parameter array is stored under its
    ``named_arrays`` name as little-endian float32/float64.  See the
    README for the full format description.
    """
    first = next(iter(params.named_arrays()))[1]
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "network": params.config.to_dict(),
        "dtype": "float64" if first.dtype == np.float64 else "float32",
        "meta": meta or {},
    }
    arrays = {}
    for name, arr in params.named_arrays():
        le = "<f4" if arr.dtype == np.float32 else "<f8"
        arrays[name] = arr.astype(le)
    arrays["__meta__"] = np.frombuffer(
        json.dumps(doc, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Load a checkpoint; returns (params, meta dict)."""
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path} is not a network checkpoint (no __meta__)")
        doc = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if doc.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {doc.get('format_version')!r},"
                f" expected {CHECKPOINT_VERSION}"
            )
        config = NetworkConfig.from_dict(doc["network"])
        dtype = np.dtype(doc.get("dtype", "float32"))
        params = init_params(config, np.random.default_rng(0), dtype=dtype)
        for name, arr in params.named_arrays():
            if name not in data:
                raise ValueError(f"checkpoint is missing array {name!r}")
            stored = data[name]
            if stored.shape != arr.shape:
                raise ValueError(
                    f"checkpoint array {name!r} has shape {stored.shape},"
                    f" expected {arr.shape}"
                )
            arr[...] = stored
    return params, doc.get("meta", {})


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite; carries the last good state."""

    def __init__(self, step, loss, last_good: Fcn8sParams):
        super().__init__(
            f"non-finite loss {loss!r} at step {step}; last good parameters retained"
        )
        self.step = step
        self.loss = loss
        self.last_good = last_good


def train(params: Fcn8sParams, next_batch, steps: int, lr: float,
          momentum: float = 0.9, log_every: int = 0, on_log=None):
    """SGD training loop.

    ``next_batch(step)`` must return (x, labels): a float tensor in the
    network's input layout and an (N, H, W) uint8 label map where
    ambiguous pixels are masked out of the loss.  Returns the loss
    history; ``params`` is updated in place.  A non-finite loss raises
    :class:`TrainingDiverged` with a copy of the parameters from before
    the offending step.
    """
    arrays = params.as_dict()
    velocity = {k: np.zeros_like(v) for k, v in arrays.items()}
    history = []
    last_good = params.copy()
    for step in range(steps):
        x, labels = next_batch(step)
        logits, cache = fcn8s_forward(params, x, want_cache=True)
        loss, dlogits = ops.softmax_ce_masked(logits, labels)
        if not np.isfinite(loss):
            raise TrainingDiverged(step, loss, last_good)
        last_good = params.copy()
        grads = fcn8s_backward(params, cache, dlogits.astype(logits.dtype))
        ops.sgd_momentum_step(arrays, grads, velocity, lr, momentum)
        history.append(loss)
        if log_every and on_log and (step + 1) % log_every == 0:
            on_log(step + 1, loss)
    return history
