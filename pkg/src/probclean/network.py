"""The data-cleaning autoencoder.

Five parallel channels, each a three-layer stack with one fixed activation
(sin, cos, linear, relu, swish), read the flattened record; their outputs
are merged by an affine layer feeding a per-attribute softmax head, so each
output attribute slice is a valid pmf.  The code layer of every channel is
as wide as the table has attributes, which pushes the encoder toward one
best guess per attribute.

Training adds Gaussian noise to the input (denoising), measures
reconstruction with the per-attribute Jensen-Shannon divergence, and
penalizes squared code activations (L2 activity regularization).  Gradients
are analytic; see ``backward`` and the finite-difference tests that pin it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .data import Dataset, Schema
from .losses import batch_jsd

__all__ = [
    "CHANNEL_ACTIVATIONS",
    "DcaeArchitecture",
    "DcaeParams",
    "ForwardTrace",
    "init_params",
    "forward",
    "backward",
    "adam_step",
    "batch_objective",
    "clean",
    "save_checkpoint",
    "load_checkpoint",
]

CHANNEL_ACTIVATIONS = ("sin", "cos", "linear", "relu", "swish")

DEFAULT_NOISE_COEFF = 0.01
DEFAULT_L2_ACTIVITY = 1e-4

ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1

_INFERENCE_CHUNK = 1024


@dataclass(frozen=True)
class DcaeArchitecture:
    """Shape of the network, derived from the table schema.

    ``noise_coeff`` scales the train-time input noise: attribute j's slice
    receives N(0, sigma_j) with sigma_j = noise_coeff * (100 / K_j), keeping
    the noise level comparable across sampling densities.
    """

    schema: Schema
    noise_coeff: float = DEFAULT_NOISE_COEFF
    l2_activity: float = DEFAULT_L2_ACTIVITY
    _noise_sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.noise_coeff < 0:
            raise ValueError("noise_coeff must be >= 0")
        if self.l2_activity < 0:
            raise ValueError("l2_activity must be >= 0")
        sigma = np.empty(self.schema.total_width)
        for spec, (lo, hi) in zip(self.schema.attributes, self.schema.slices):
            sigma[lo:hi] = self.noise_coeff * (100.0 / spec.cardinality)
        sigma.flags.writeable = False
        object.__setattr__(self, "_noise_sigma", sigma)

    @property
    def width(self) -> int:
        """Input/output width D (sum of attribute cardinalities)."""
        return self.schema.total_width

    @property
    def code_width(self) -> int:
        """Code-layer width: one unit per attribute."""
        return self.schema.n_attributes

    @property
    def noise_sigma(self) -> np.ndarray:
        """Per-entry train-time noise std, one value per input node."""
        return self._noise_sigma

    def tensor_shapes(self) -> list[tuple[int, ...]]:
        d, n = self.width, self.code_width
        shapes: list[tuple[int, ...]] = []
        for _ in CHANNEL_ACTIVATIONS:
            shapes += [(d, d), (d,), (d, n), (n,), (n, d), (d,)]
        shapes += [(len(CHANNEL_ACTIVATIONS) * d, d), (d,)]
        return shapes


def _flat_views(flat: np.ndarray, shapes: list[tuple[int, ...]]) -> list[np.ndarray]:
    views = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        views.append(flat[offset : offset + size].reshape(shape))
        offset += size
    return views


class Gradients:
    """Per-tensor gradient views backed by one contiguous buffer."""

    __slots__ = ("flat", "views")

    def __init__(self, flat: np.ndarray, views: list[np.ndarray]):
        self.flat = flat
        self.views = views

    def __len__(self) -> int:
        return len(self.views)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.views[i]

    def __iter__(self):
        return iter(self.views)


class DcaeParams:
    """All weights and biases plus Adam moment state.

    ``tensors`` is the layout the backends operate on: six tensors per
    channel (w_in, b_in, w_code, b_code, w_out, b_out), then the merge
    weight and bias.  Parameters and both Adam moments each live in a single
    contiguous float64 buffer; the tensors are views into it, so the fused
    Adam update touches one vector.
    """

    __slots__ = ("arch", "flat", "tensors", "adam_m", "adam_v", "adam_t", "_scratch")

    def __init__(self, arch: DcaeArchitecture, tensors, adam_m=None, adam_v=None, adam_t=0):
        shapes = arch.tensor_shapes()
        if [tuple(np.shape(t)) for t in tensors] != shapes:
            raise ValueError("parameter tensor shapes do not match the architecture")
        size = sum(int(np.prod(s)) for s in shapes)
        self.arch = arch
        self.flat = np.empty(size)
        self.tensors = _flat_views(self.flat, shapes)
        for view, t in zip(self.tensors, tensors):
            view[...] = t
        if not np.all(np.isfinite(self.flat)):
            raise ValueError("parameter tensors must be finite")
        self.adam_m = np.zeros(size)
        self.adam_v = np.zeros(size)
        if adam_m is not None:
            for view, t in zip(_flat_views(self.adam_m, shapes), adam_m):
                view[...] = t
        if adam_v is not None:
            for view, t in zip(_flat_views(self.adam_v, shapes), adam_v):
                view[...] = t
        self.adam_t = int(adam_t)
        self._scratch = np.empty(size)

    @property
    def size(self) -> int:
        return self.flat.size

    def new_gradients(self) -> Gradients:
        flat = np.empty(self.size)
        return Gradients(flat, _flat_views(flat, self.arch.tensor_shapes()))

    def adam_moment_views(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        shapes = self.arch.tensor_shapes()
        return _flat_views(self.adam_m, shapes), _flat_views(self.adam_v, shapes)

    def copy(self) -> "DcaeParams":
        shapes = self.arch.tensor_shapes()
        return DcaeParams(
            self.arch,
            self.tensors,
            _flat_views(self.adam_m, shapes),
            _flat_views(self.adam_v, shapes),
            self.adam_t,
        )

    # Named views, handy in tests.
    def w_in(self, c: int) -> np.ndarray:
        return self.tensors[6 * c]

    def w_code(self, c: int) -> np.ndarray:
        return self.tensors[6 * c + 2]

    def w_out(self, c: int) -> np.ndarray:
        return self.tensors[6 * c + 4]

    @property
    def w_merge(self) -> np.ndarray:
        return self.tensors[30]


@dataclass
class ForwardTrace:
    """Cached intermediates of one batch forward, consumed by backward."""

    arrays: dict


def init_params(arch: DcaeArchitecture, seed: int) -> DcaeParams:
    """Glorot-uniform weights, zero biases, fresh Adam state.

    Weight matrices are drawn channel by channel (input, code, output
    layer, then the merge layer) from U(-s, s) with
    s = sqrt(6 / (fan_in + fan_out)); the draw order is part of the
    determinism contract.
    """
    rng = np.random.default_rng(seed)
    tensors = []
    for shape in arch.tensor_shapes():
        if len(shape) == 2:
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors.append(rng.uniform(-limit, limit, size=shape))
        else:
            tensors.append(np.zeros(shape))
    return DcaeParams(arch, tensors)


def _check_finite_output(params: DcaeParams, q: np.ndarray, x: np.ndarray) -> None:
    if np.all(np.isfinite(q)):
        return
    # Locate the first bad layer with the reference backend for the report.
    from . import _backend_numpy

    slices = params.arch.schema.slices
    with np.errstate(all="ignore"):
        _, trace = _backend_numpy.forward(params.tensors, slices, x, want_trace=True)
    for key in ("z1", "a1", "z2", "a2", "z3"):
        for c, arr in enumerate(trace[key]):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(
                    f"non-finite values in layer {key!r} of channel "
                    f"{CHANNEL_ACTIVATIONS[c]!r}"
                )
    for key in ("h", "q"):
        if not np.all(np.isfinite(trace[key])):
            raise FloatingPointError(f"non-finite values in {key!r}")
    raise FloatingPointError("non-finite values in network output")


def forward(
    params: DcaeParams,
    batch: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    want_trace: bool = True,
) -> tuple[np.ndarray, ForwardTrace | None]:
    """Map a (B, D) batch of flattened records to cleaned outputs.

    With ``training`` true, Gaussian noise scaled per attribute is added to
    the input first (and only then): the noised vector may leave the
    probability simplex, which is intended.  Inference is deterministic.
    """
    x = np.ascontiguousarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.arch.width:
        raise ValueError(f"batch must be (B, {params.arch.width}), got {x.shape}")
    if not x.flags.writeable:  # dataset views are frozen; kernels want buffers
        x = x.copy()
    if training:
        if rng is None:
            raise ValueError("training-mode forward needs an rng for the noise layer")
        x = x + rng.standard_normal(x.shape) * params.arch.noise_sigma
    backend = backends.active_backend()
    q, raw = backend.forward(params.tensors, params.arch.schema.slices, x, want_trace)
    _check_finite_output(params, q, x)
    return q, (ForwardTrace(raw) if want_trace else None)


def backward(
    params: DcaeParams,
    trace: ForwardTrace,
    targets: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[list[np.ndarray], float]:
    """Analytic gradients of the batch objective w.r.t. every parameter.

    Objective: sum over the batch of per-attribute JSD(target, output),
    skipping masked cells, plus l2_activity * sum of squared code
    activations over all channels.  Returns (grads, data_loss) where
    data_loss excludes the penalty term (it is what the loss log records).
    """
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    q = trace.arrays["q"]
    if targets.shape != q.shape:
        raise ValueError(f"targets shape {targets.shape} does not match batch {q.shape}")
    if mask is not None:
        mask = np.ascontiguousarray(mask, dtype=bool)
        if mask.shape != (q.shape[0], params.arch.code_width):
            raise ValueError("mask must be (B, n_attributes)")
    backend = backends.active_backend()
    grads = params.new_gradients()
    data_loss, _ = backend.backward(
        params.tensors, params.arch.schema.slices, trace.arrays, targets, mask,
        params.arch.l2_activity, grads.views,
    )
    return grads, data_loss


def adam_step(
    params: DcaeParams,
    grads,
    lr: float = ADAM_LR,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> DcaeParams:
    """Standard Adam update with bias correction (in place on the tensors).

    ``grads`` is normally the ``Gradients`` object from ``backward``; a
    plain list of per-tensor arrays is packed into one on the way in.
    """
    if len(grads) != len(params.tensors):
        raise ValueError("gradient list does not match parameter list")
    for g, t in zip(grads, params.tensors):
        if np.shape(g) != t.shape:
            raise ValueError("gradient shapes do not match parameter shapes")
    if not isinstance(grads, Gradients):
        packed = params.new_gradients()
        for view, g in zip(packed.views, grads):
            view[...] = g
        grads = packed
    backend = backends.active_backend()
    params.adam_t = backend.adam_step(
        params.flat, grads.flat, params.adam_m, params.adam_v, params.adam_t,
        lr, beta1, beta2, eps, params._scratch,
    )
    return params


def batch_objective(
    params: DcaeParams,
    batch: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray | None = None,
) -> float:
    """Scalar training objective for a fixed (un-noised) batch.

    This is the quantity whose analytic gradient ``backward`` computes; the
    finite-difference tests difference it directly.
    """
    from . import _backend_numpy

    slices = params.arch.schema.slices
    x = np.ascontiguousarray(batch, dtype=np.float64)
    q, trace = _backend_numpy.forward(params.tensors, slices, x, want_trace=True)
    data = batch_jsd(np.ascontiguousarray(targets, dtype=np.float64), q, slices, mask)
    penalty = params.arch.l2_activity * sum(float(np.sum(a * a)) for a in trace["a2"])
    return data + penalty


def clean(params: DcaeParams, ds: Dataset) -> Dataset:
    """Run every record through the trained network (inference mode)."""
    if ds.schema != params.arch.schema:
        raise ValueError("dataset schema does not match the model's schema")
    m = ds.n_records
    out = np.empty_like(ds.matrix)
    for lo in range(0, m, _INFERENCE_CHUNK):
        hi = min(lo + _INFERENCE_CHUNK, m)
        q, _ = forward(params, ds.matrix[lo:hi], training=False, want_trace=False)
        out[lo:hi] = q
    return Dataset.from_matrix(ds.schema, out, validate=False)


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(params: DcaeParams, path, seed_lineage: list[int] | None = None) -> None:
    """Write a model checkpoint that round-trips bit-exactly (.npz)."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "schema": params.arch.schema.to_dict(),
        "noise_coeff": params.arch.noise_coeff,
        "l2_activity": params.arch.l2_activity,
        "adam_t": params.adam_t,
        "seed_lineage": list(seed_lineage) if seed_lineage is not None else [],
        "backend": backends.backend_name(),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    m_views, v_views = params.adam_moment_views()
    for i, t in enumerate(params.tensors):
        arrays[f"t{i}"] = t
        arrays[f"m{i}"] = m_views[i]
        arrays[f"v{i}"] = v_views[i]
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[DcaeParams, dict]:
    """Load a checkpoint; returns (params, metadata)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')!r}")
        arch = DcaeArchitecture(
            schema=Schema.from_dict(meta["schema"]),
            noise_coeff=float(meta["noise_coeff"]),
            l2_activity=float(meta["l2_activity"]),
        )
        count = len(arch.tensor_shapes())
        tensors = [data[f"t{i}"] for i in range(count)]
        adam_m = [data[f"m{i}"] for i in range(count)]
        adam_v = [data[f"v{i}"] for i in range(count)]
    params = DcaeParams(arch, tensors, adam_m, adam_v, int(meta["adam_t"]))
    return params, meta
