"""Scorable models behind one interface, plus binary checkpoints.

Three kinds share the forward contract (graph in, one logit per node):
the grouped-completion model, an attribute-only MLP, and a mean-aggregator
SAGE baseline. Every trainable value is registered exactly once, in a
fixed order, which the checkpoint format relies on.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from . import fgc_layer, ndops
from .graph import EVAL, Graph, Split, partition_neighbors
from .ndops import Parameter, Var

KINDS = ("fgc", "mlp", "sage")

_CKPT_MAGIC = b"FGCC"
_CKPT_VERSION = 1


class CheckpointError(ValueError):
    pass


class _Head:
    """Two dense layers with a ReLU between, ending in one logit."""

    def __init__(self, rng, in_dim, hidden):
        self.w1 = Parameter(ndops.glorot(rng, (hidden, in_dim)), "head.w1")
        self.b1 = Parameter(np.zeros((1, hidden)), "head.b1")
        self.w2 = Parameter(ndops.glorot(rng, (1, hidden)), "head.w2")
        self.b2 = Parameter(np.zeros((1, 1)), "head.b2")

    def forward(self, tape, x: Var) -> Var:
        h = ndops.relu(tape, ndops.add_bias(tape, ndops.linear(tape, x, self.w1), self.b1))
        return ndops.add_bias(tape, ndops.linear(tape, h, self.w2), self.b2)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]


class FgcCompModel:
    kind = "fgc"

    def __init__(self, input_dim, hidden, depth, rng):
        self.input_dim = input_dim
        self.hidden = hidden
        self.depth = depth
        self.layers = []
        in_dim = input_dim
        for i in range(depth):
            self.layers.append(fgc_layer.init_layer_params(rng, in_dim, hidden, f"layer{i}"))
            in_dim = hidden
        self.head = _Head(rng, hidden, hidden)

    def forward(self, tape, g: Graph, split: Split, mode: str) -> Var:
        part = partition_neighbors(g, split, mode)
        h = Var(g.features)
        for layer in self.layers:
            h = fgc_layer.layer_forward(tape, g, part, h, layer)
        return self.head.forward(tape, h)

    def parameters(self):
        ps = []
        for layer in self.layers:
            ps.extend(layer.parameters())
        ps.extend(self.head.parameters())
        return ps


class MlpModel:
    """Attribute-only baseline; the graph is ignored entirely."""

    kind = "mlp"

    def __init__(self, input_dim, hidden, depth, rng):
        self.input_dim = input_dim
        self.hidden = hidden
        self.depth = depth
        self.head = _Head(rng, input_dim, hidden)

    def forward(self, tape, g: Graph, split: Split, mode: str) -> Var:
        return self.head.forward(tape, Var(g.features))

    def parameters(self):
        return self.head.parameters()


class SageMeanModel:
    """Mean-aggregator SAGE: concat(self, neighbor mean), linear, ReLU."""

    kind = "sage"

    def __init__(self, input_dim, hidden, depth, rng):
        self.input_dim = input_dim
        self.hidden = hidden
        self.depth = depth
        self.layers = []
        in_dim = input_dim
        for i in range(depth):
            w = Parameter(ndops.glorot(rng, (hidden, 2 * in_dim)), f"sage{i}.w")
            b = Parameter(np.zeros((1, hidden)), f"sage{i}.b")
            self.layers.append((w, b))
            in_dim = hidden
        self.head = _Head(rng, hidden, hidden)

    def forward(self, tape, g: Graph, split: Split, mode: str) -> Var:
        h = Var(g.features)
        for w, b in self.layers:
            nbr_mean = ndops.group_mean(tape, h, g.csr_neighbors, g.csr_offsets)
            both = ndops.concat_cols(tape, h, nbr_mean)
            h = ndops.relu(tape, ndops.add_bias(tape, ndops.linear(tape, both, w), b))
        return self.head.forward(tape, h)

    def parameters(self):
        ps = []
        for w, b in self.layers:
            ps.extend([w, b])
        ps.extend(self.head.parameters())
        return ps


def build_model(kind: str, input_dim: int, hidden: int = 64, depth: int = 1,
                seed: int = 0):
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    cls = {"fgc": FgcCompModel, "mlp": MlpModel, "sage": SageMeanModel}[kind]
    return cls(input_dim, hidden, depth, rng)


def model_forward(model, g: Graph, split: Split, mode: str, tape=None) -> Var:
    return model.forward(tape, g, split, mode)


def predict_proba(model, g: Graph, split: Split) -> np.ndarray:
    """Sigmoid of the evaluation-mode logits, one probability per node."""
    logits = model_forward(model, g, split, EVAL).value[:, 0]
    return ndops._sigmoid(logits)


def save_checkpoint(model, path):
    """Write the versioned binary checkpoint (layout in docs/formats.md)."""
    params = model.parameters()
    header = bytearray()
    header += _CKPT_MAGIC
    header += struct.pack("<HH", _CKPT_VERSION, 64)
    header += struct.pack("<BHII", KINDS.index(model.kind) + 1, model.depth,
                          model.hidden, model.input_dim)
    header += struct.pack("<I", len(params))
    payload = bytearray()
    for p in params:
        name = p.name.encode()
        header += struct.pack("<H", len(name)) + name
        header += struct.pack("<II", p.value.shape[0], p.value.shape[1])
        payload += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(bytes(payload))
        fh.write(struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF))


def load_checkpoint(model, path):
    """Load parameter values into a built model, validating every shape."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 17 or blob[:4] != _CKPT_MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    version, width = struct.unpack_from("<HH", blob, 4)
    if version != _CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if width != 64:
        raise CheckpointError(f"unsupported float width {width}")
    kind_code, depth, hidden, input_dim = struct.unpack_from("<BHII", blob, 8)
    pos = 19
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if kind_code != KINDS.index(model.kind) + 1:
        raise CheckpointError(
            f"checkpoint holds a {KINDS[kind_code - 1]!r} model, not {model.kind!r}")
    if (depth, hidden, input_dim) != (model.depth, model.hidden, model.input_dim):
        raise CheckpointError(
            f"checkpoint shape (depth={depth}, hidden={hidden}, input_dim={input_dim}) "
            f"does not match model (depth={model.depth}, hidden={model.hidden}, "
            f"input_dim={model.input_dim})")
    params = model.parameters()
    if count != len(params):
        raise CheckpointError(f"checkpoint has {count} tensors, model has {len(params)}")
    table = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + name_len].decode()
        pos += name_len
        rows, cols = struct.unpack_from("<II", blob, pos)
        pos += 8
        table.append((name, rows, cols))
    payload_len = sum(r * c for _, r, c in table) * 8
    payload = blob[pos:pos + payload_len]
    if len(payload) != payload_len or len(blob) < pos + payload_len + 4:
        raise CheckpointError("checkpoint truncated")
    (crc,) = struct.unpack_from("<I", blob, pos + payload_len)
    if crc != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise CheckpointError("checkpoint payload CRC mismatch")
    offset = 0
    for p, (name, rows, cols) in zip(params, table):
        if p.name != name or p.value.shape != (rows, cols):
            raise CheckpointError(
                f"tensor {name!r} of shape ({rows}, {cols}) does not match "
                f"model tensor {p.name!r} of shape {p.value.shape}")
        nbytes = rows * cols * 8
        p.value = np.frombuffer(payload[offset:offset + nbytes],
                                dtype="<f8").reshape(rows, cols).copy()
        offset += nbytes
