"""Explicit feedforward ReLU networks.

A network is a list of affine maps with an elementwise ReLU between
consecutive maps and none after the last one::

    f = T_L o relu o T_{L-1} o ... o relu o T_1

The architecture is ``(d_0, ..., d_L)``, the depth is the number of affine
maps and the width is the largest hidden dimension ``max(d_1..d_{L-1})``
(zero for a single affine map).

Besides the layers a network carries an ``input_shift`` vector that is
subtracted from the input before the first map. Constructions that pass raw
coordinates through hidden ReLU layers use it to keep those coordinates
nonnegative on the domain they are verified on. ``fold_shift`` moves the
shift into the first bias and returns the plain layered form.

The helpers ``affine_net``, ``identity_net``, ``parallel`` and ``chain`` are
the small algebra every construction in :mod:`robustmem.gadgets` and
:mod:`robustmem.memorizer` is written in. ``chain`` fuses the last affine map
of one network with the first map of the next, so composing never adds a
layer of its own.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import InvalidWidthError, ParseError, ShapeError

__all__ = [
    "AffineLayer",
    "ReluNetwork",
    "evaluate",
    "compose",
    "chain",
    "parallel",
    "affine_net",
    "identity_net",
    "extend_depth",
    "pad_width",
    "annotate",
    "fold_shift",
    "check_meta",
    "serialize",
    "deserialize",
    "jsonable",
]


def _frozen_array(a, ndim):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AffineLayer:
    """Affine map ``x -> W x + b`` with ``W`` of shape (d_out, d_in)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        W = _frozen_array(self.weights, 2)
        b = _frozen_array(self.bias, 1)
        if W.shape[0] != b.shape[0]:
            raise ShapeError(
                f"weights have {W.shape[0]} rows but bias has length {b.shape[0]}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("affine layer entries must be finite")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)
        # Transposed copy so batched evaluation is a plain row-major matmul.
        object.__setattr__(self, "_wt", np.ascontiguousarray(W.T))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) @ self._wt + self.bias


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Feedforward ReLU network with an input shift and a construction record.

    Parameters
    ----------
    layers : sequence of AffineLayer
        Affine maps, applied in order with ReLU in between.
    input_shift : array_like, optional
        Vector subtracted from the input before the first map.
    meta : mapping, optional
        Free-form construction record (gadget parameters, width formulas,
        depth constants). Should be JSON serializable.
    """

    layers: tuple
    input_shift: np.ndarray | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("a network needs at least one layer")
        for l, (a, b) in enumerate(zip(layers[:-1], layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer {l} outputs {a.out_dim} values but layer {l + 1} expects {b.in_dim}")
        object.__setattr__(self, "layers", layers)
        d0 = layers[0].in_dim
        shift = np.zeros(d0) if self.input_shift is None else self.input_shift
        shift = _frozen_array(shift, 1)
        if shift.shape[0] != d0:
            raise ShapeError(f"input_shift has length {shift.shape[0]}, expected {d0}")
        object.__setattr__(self, "input_shift", shift)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def architecture(self) -> tuple:
        return (self.in_dim,) + tuple(layer.out_dim for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        hidden = self.architecture[1:-1]
        return max(hidden) if hidden else 0

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(net: ReluNetwork, x):
    """Evaluate ``net`` at one point or a batch of points.

    A 1-d ``x`` of length ``d_0`` gives a float when the output is scalar and
    a vector otherwise. A 2-d array of shape (n, d_0) gives an array of shape
    (n,) or (n, d_L).
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ShapeError(f"network expects inputs of length {net.in_dim}, got shape {np.shape(x)}")
    H = X - net.input_shift
    for layer in net.layers[:-1]:
        H = H @ layer._wt
        H += layer.bias
        np.maximum(H, 0.0, out=H)
    last = net.layers[-1]
    H = H @ last._wt + last.bias
    if net.out_dim == 1:
        H = H[:, 0]
        return float(H[0]) if single else H
    return H[0] if single else H


# ----------------------------------------------------------------------------
# construction algebra

def affine_net(W, b=None) -> ReluNetwork:
    """Single affine map as a depth-1 network."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    b = np.zeros(W.shape[0]) if b is None else np.asarray(b, dtype=np.float64).ravel()
    return ReluNetwork((AffineLayer(W, b),))


def identity_net(n: int, depth: int = 2) -> ReluNetwork:
    """Carry ``n`` values through ``depth - 1`` ReLU layers.

    Exact only for nonnegative inputs when ``depth > 1``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    eye = np.eye(n)
    return ReluNetwork(tuple(AffineLayer(eye, np.zeros(n)) for _ in range(depth)))


def extend_depth(net: ReluNetwork, depth: int) -> ReluNetwork:
    """Append identity maps until the network has the requested depth.

    The old output passes through a ReLU, so this is exact only where the
    output of ``net`` is nonnegative.
    """
    extra = depth - net.depth
    if extra < 0:
        raise ValueError(f"cannot shorten a depth-{net.depth} network to {depth}")
    if extra == 0:
        return net
    n = net.out_dim
    eye = AffineLayer(np.eye(n), np.zeros(n))
    return ReluNetwork(net.layers + (eye,) * extra, net.input_shift, net.meta)


def parallel(*nets: ReluNetwork) -> ReluNetwork:
    """Run networks side by side on concatenated inputs.

    Shorter networks are lengthened with :func:`extend_depth`, which requires
    their outputs to be nonnegative on the domain of interest.
    """
    if not nets:
        raise ValueError("parallel needs at least one network")
    depth = max(n.depth for n in nets)
    nets = [extend_depth(n, depth) for n in nets]
    layers = []
    for l in range(depth):
        blocks = [n.layers[l] for n in nets]
        W = np.zeros((sum(b.out_dim for b in blocks), sum(b.in_dim for b in blocks)))
        r = c = 0
        for b in blocks:
            W[r:r + b.out_dim, c:c + b.in_dim] = b.weights
            r += b.out_dim
            c += b.in_dim
        layers.append(AffineLayer(W, np.concatenate([b.bias for b in blocks])))
    shift = np.concatenate([n.input_shift for n in nets])
    return ReluNetwork(tuple(layers), shift)


def _fuse(a: AffineLayer, b: AffineLayer, shift) -> AffineLayer:
    # b(a(x) - shift)
    return AffineLayer(b.weights @ a.weights, b.weights @ (a.bias - shift) + b.bias)


def chain(*nets: ReluNetwork) -> ReluNetwork:
    """Compose networks left to right, fusing each junction into one affine map.

    ``chain(f, g, h)(x) == h(g(f(x)))``. The depth is the sum of depths minus
    the number of junctions. Input shifts of later networks are folded into the
    fused biases; the result keeps the first network's shift.
    """
    if not nets:
        raise ValueError("chain needs at least one network")
    layers = list(nets[0].layers)
    for net in nets[1:]:
        if layers[-1].out_dim != net.in_dim:
            raise ShapeError(
                f"cannot feed {layers[-1].out_dim} outputs into a network with {net.in_dim} inputs")
        layers[-1] = _fuse(layers[-1], net.layers[0], net.input_shift)
        layers.extend(net.layers[1:])
    return ReluNetwork(tuple(layers), nets[0].input_shift)


def compose(first: ReluNetwork, second: ReluNetwork) -> ReluNetwork:
    """Network computing ``second(first(x))``; the junction is fused (no new ReLU)."""
    out = chain(first, second)
    meta = {"op": "compose"}
    for key, net in (("first", first), ("second", second)):
        if "name" in net.meta:
            meta[key] = net.meta["name"]
    return annotate(out, **meta)


def pad_width(net: ReluNetwork, k: int) -> ReluNetwork:
    """Pad every hidden layer with zero-weight neurons up to width ``k``.

    The computed function and the depth are unchanged.
    """
    if k < net.width:
        raise InvalidWidthError(f"cannot pad a width-{net.width} network to width {k}")
    layers = list(net.layers)
    for l in range(len(layers) - 1):
        extra = k - layers[l].out_dim
        if extra <= 0:
            continue
        cur, nxt = layers[l], layers[l + 1]
        layers[l] = AffineLayer(
            np.vstack([cur.weights, np.zeros((extra, cur.in_dim))]),
            np.concatenate([cur.bias, np.zeros(extra)]))
        layers[l + 1] = AffineLayer(
            np.hstack([nxt.weights, np.zeros((nxt.out_dim, extra))]), nxt.bias)
    out = ReluNetwork(tuple(layers), net.input_shift, net.meta)
    return annotate(out, padded_to=int(k))


def fold_shift(net: ReluNetwork) -> ReluNetwork:
    """Equivalent network with the input shift moved into the first bias."""
    first = net.layers[0]
    layer = AffineLayer(first.weights, first.bias - first.weights @ net.input_shift)
    return ReluNetwork((layer,) + net.layers[1:], None, net.meta)


def annotate(net: ReluNetwork, **fields) -> ReluNetwork:
    """Copy of ``net`` with ``fields`` merged into meta and arch/width/depth refreshed."""
    meta = dict(net.meta)
    meta.update(jsonable(fields))
    meta["arch"] = [int(v) for v in net.architecture]
    meta["width"] = int(net.width)
    meta["depth"] = int(net.depth)
    return ReluNetwork(net.layers, net.input_shift, meta)


def check_meta(net: ReluNetwork) -> None:
    """Raise ValueError if recorded arch/width/depth disagree with the layers."""
    for key, actual in (("arch", list(net.architecture)),
                        ("width", net.width), ("depth", net.depth)):
        if key in net.meta and net.meta[key] != actual:
            raise ValueError(f"meta {key}={net.meta[key]!r} but network has {actual!r}")


# ----------------------------------------------------------------------------
# serialization

def jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _hex(values):
    return [float(v).hex() for v in values]


def serialize(net: ReluNetwork) -> bytes:
    """Encode a network as JSON bytes.

    Weights are stored as hexadecimal float strings, so a round trip is
    bit-exact. Each array has a ``*_decimal`` mirror for reading by eye; it is
    ignored when loading.
    """
    doc = {
        "arch": [int(v) for v in net.architecture],
        "input_shift": _hex(net.input_shift),
        "input_shift_decimal": [float(v) for v in net.input_shift],
        "layers": [
            {
                "W": [_hex(row) for row in layer.weights],
                "b": _hex(layer.bias),
                "W_decimal": layer.weights.tolist(),
                "b_decimal": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
        "meta": jsonable(net.meta),
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _parse_vector(raw, where):
    if not isinstance(raw, list):
        raise ParseError("expected a list of hex floats", where)
    out = np.empty(len(raw))
    for i, v in enumerate(raw):
        if not isinstance(v, str):
            raise ParseError("expected a hex float string", f"{where}[{i}]")
        try:
            out[i] = float.fromhex(v)
        except ValueError:
            raise ParseError(f"bad hex float {v!r}", f"{where}[{i}]") from None
    return out


def deserialize(data) -> ReluNetwork:
    """Inverse of :func:`serialize`. Raises ParseError with a location on bad input."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("not UTF-8", f"byte {exc.start}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno} (char {exc.pos})") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    for key in ("arch", "input_shift", "layers"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}", "$")
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise ParseError("layers must be a non-empty list", "$.layers")
    layers = []
    for l, raw in enumerate(doc["layers"]):
        where = f"$.layers[{l}]"
        if not isinstance(raw, dict) or "W" not in raw or "b" not in raw:
            raise ParseError("layer needs 'W' and 'b'", where)
        if not isinstance(raw["W"], list) or not raw["W"]:
            raise ParseError("W must be a non-empty list of rows", where + ".W")
        rows = [_parse_vector(row, f"{where}.W[{i}]") for i, row in enumerate(raw["W"])]
        if len({len(r) for r in rows}) != 1:
            raise ParseError("ragged weight matrix", where + ".W")
        try:
            layers.append(AffineLayer(np.vstack(rows), _parse_vector(raw["b"], where + ".b")))
        except (ShapeError, ValueError) as exc:
            raise ParseError(str(exc), where) from None
    try:
        net = ReluNetwork(tuple(layers), _parse_vector(doc["input_shift"], "$.input_shift"),
                          doc.get("meta", {}))
    except ShapeError as exc:
        raise ParseError(str(exc), "$.layers") from None
    if list(net.architecture) != doc["arch"]:
        raise ParseError(f"arch {doc['arch']} does not match layers {list(net.architecture)}", "$.arch")
    try:
        check_meta(net)
    except ValueError as exc:
        raise ParseError(str(exc), "$.meta") from None
    return net
