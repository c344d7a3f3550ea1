"""Native binary graph container (FGCG v1) and a planted-anomaly generator.

The on-disk layout is little-endian throughout: a 4-byte magic, a u16
version, three counts, the CSR payload, then a CRC32 of the payload.
Features are stored as f32 and promoted to f64 in memory. The byte-exact
layout, with a hex-annotated example, lives in docs/formats.md.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .graph import Graph, Split, build_graph, make_split, validate_graph

MAGIC = b"FGCG"
VERSION = 1
_HEADER = struct.Struct("<4sHQQI")  # magic, version, nodes, edge slots, feature dim


class GraphFileError(ValueError):
    pass


class BadMagicError(GraphFileError):
    pass


class BadVersionError(GraphFileError):
    pass


class TruncatedFileError(GraphFileError):
    pass


class ChecksumError(GraphFileError):
    pass


def _payload_bytes(g: Graph) -> bytes:
    parts = [
        np.ascontiguousarray(g.csr_offsets, dtype="<u8").tobytes(),
        np.ascontiguousarray(g.csr_neighbors, dtype="<u4").tobytes(),
        np.ascontiguousarray(g.features, dtype="<f4").tobytes(),
        np.ascontiguousarray(g.labels, dtype="u1").tobytes(),
    ]
    return b"".join(parts)


def save_graph(g: Graph, path) -> None:
    payload = _payload_bytes(g)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, g.num_nodes, g.num_edge_slots,
                              g.feature_dim))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_graph(path) -> Graph:
    """Read and fully validate an FGCG file.

    Raises a distinct error for bad magic, unsupported version, truncated
    payload, CRC mismatch, and graph-invariant violations, in that order.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise TruncatedFileError("file shorter than the fixed header")
    magic, version, n_nodes, n_slots, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported format version {version}")
    payload_len = 8 * (n_nodes + 1) + 4 * n_slots + 4 * n_nodes * dim + n_nodes
    if len(blob) != _HEADER.size + payload_len + 4:
        raise TruncatedFileError(
            f"expected {_HEADER.size + payload_len + 4} bytes, found {len(blob)}")
    payload = blob[_HEADER.size:_HEADER.size + payload_len]
    (crc,) = struct.unpack_from("<I", blob, _HEADER.size + payload_len)
    if crc != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise ChecksumError("payload CRC32 mismatch")

    pos = 0
    offsets = np.frombuffer(payload, dtype="<u8", count=n_nodes + 1, offset=pos)
    pos += 8 * (n_nodes + 1)
    neighbors = np.frombuffer(payload, dtype="<u4", count=n_slots, offset=pos)
    pos += 4 * n_slots
    features = np.frombuffer(payload, dtype="<f4", count=n_nodes * dim, offset=pos)
    pos += 4 * n_nodes * dim
    labels = np.frombuffer(payload, dtype="u1", count=n_nodes, offset=pos)

    def frozen(arr, dtype):
        out = np.ascontiguousarray(arr, dtype=dtype)
        out.setflags(write=False)
        return out

    g = Graph(
        num_nodes=int(n_nodes),
        csr_offsets=frozen(offsets, np.int64),
        csr_neighbors=frozen(neighbors, np.int64),
        features=frozen(features.reshape(n_nodes, dim), np.float64),
        labels=frozen(labels, np.uint8),
    )
    validate_graph(g)
    return g


def synth_planted_anomaly(n: int, d: int, anomaly_frac: float, homophily: float,
                          seed: int) -> tuple[Graph, Split]:
    """Generate a two-cluster graph with planted anomalies.

    Anomalous features are shifted by 2.0 in every dimension over unit
    Gaussian noise. Edge endpoints are drawn so a fraction ``homophily``
    of draws connect same-class pairs, targeting mean degree 10; the
    exact anomaly count is planted by construction. Returns the graph and
    a stratified 0.4/0.2/0.4 split, both fully determined by the seed.
    """
    if not 0.0 < anomaly_frac < 0.5:
        raise ValueError("anomaly_frac must lie in (0, 0.5)")
    if not 0.0 <= homophily <= 1.0:
        raise ValueError("homophily must lie in [0, 1]")
    if n < 10:
        raise ValueError("need at least 10 nodes")
    rng = np.random.default_rng(seed)
    n_anom = int(round(n * anomaly_frac))
    # each class needs enough members for edge sampling and a 0.4/0.2/0.4 split
    if n_anom < 5 or n - n_anom < 5:
        raise ValueError("anomaly_frac infeasible: each class needs >= 5 nodes")
    labels = np.zeros(n, dtype=np.uint8)
    labels[rng.permutation(n)[:n_anom]] = 1
    features = rng.standard_normal((n, d))
    features[labels == 1] += 2.0

    members = (np.flatnonzero(labels == 0), np.flatnonzero(labels == 1))
    m = int(round(n * 10 / 2))
    anchors = rng.integers(0, n, size=m)
    same_class = rng.random(m) < homophily
    partners = np.empty(m, dtype=np.int64)
    for k in range(m):
        cls = labels[anchors[k]] if same_class[k] else 1 - labels[anchors[k]]
        pool = members[cls]
        partner = pool[rng.integers(0, pool.size)]
        while partner == anchors[k]:  # only possible for same-class draws
            partner = pool[rng.integers(0, pool.size)]
        partners[k] = partner

    g = build_graph(np.stack([anchors, partners], axis=1), features, labels)
    split = make_split(g, (0.4, 0.2, 0.4), seed)
    return g, split
