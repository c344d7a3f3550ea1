"""Convert the public YelpChi / Amazon MAT releases to FGCG v1 files.

The MAT files carry one sparse adjacency matrix per relation plus a
feature matrix and a label vector under de facto community key names.
The converter unions the selected relations' edge sets, symmetrizes,
drops self-loops and duplicates, and writes the little-endian FGCG
container (magic "FGCG", version u16, counts, CSR payload, CRC32 trailer;
byte-exact layout in the main package's docs/formats.md).

The input file's SHA-256 is recorded in the summary because the public
releases differ across mirrors in self-loop and symmetry conventions.
"""

from __future__ import annotations

import argparse
import hashlib
import struct
import sys
import zlib
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

DATASET_RELATIONS = {
    "yelpchi": {"rur": "net_rur", "rtr": "net_rtr", "rsr": "net_rsr"},
    "amazon": {"upu": "net_upu", "usu": "net_usu", "uvu": "net_uvu"},
}

FGCG_MAGIC = b"FGCG"
FGCG_VERSION = 1
_HEADER = struct.Struct("<4sHQQI")


class ConvertError(ValueError):
    pass


@dataclass
class Summary:
    dataset: str
    relations: list
    num_nodes: int
    num_undirected_edges: int
    feature_dim: int
    anomaly_rate: float
    input_sha256: str

    def lines(self):
        return [
            f"dataset            {self.dataset}",
            f"relations          {','.join(self.relations)}",
            f"nodes              {self.num_nodes}",
            f"undirected edges   {self.num_undirected_edges}",
            f"feature dim        {self.feature_dim}",
            f"anomaly rate       {self.anomaly_rate:.4f}",
            f"input sha256       {self.input_sha256}",
        ]


def _dense(mat) -> np.ndarray:
    if sp.issparse(mat):
        return np.asarray(mat.todense())
    return np.asarray(mat)


def union_relations(mat: dict, keys: list) -> sp.csr_matrix:
    """Boolean union of the relation adjacencies, symmetrized, no diagonal."""
    acc = None
    for key in keys:
        if key not in mat:
            raise ConvertError(f"MAT file is missing relation key {key!r}")
        adj = sp.csr_matrix(mat[key])
        if adj.shape[0] != adj.shape[1]:
            raise ConvertError(f"relation {key!r} adjacency is not square: {adj.shape}")
        acc = adj if acc is None else acc + adj
    acc = acc + acc.T
    acc.setdiag(0)
    acc.eliminate_zeros()
    acc.data[:] = 1
    acc.sort_indices()
    return acc


def load_mat(path, dataset: str, relations) -> tuple:
    key_map = DATASET_RELATIONS[dataset]
    if relations in (None, "all"):
        selected = list(key_map)
    else:
        selected = [r.strip().lower() for r in relations.split(",") if r.strip()]
        unknown = [r for r in selected if r not in key_map]
        if unknown:
            raise ConvertError(
                f"unknown relations {unknown} for {dataset}; "
                f"expected a subset of {list(key_map)}")
    mat = scipy.io.loadmat(path)
    for key in ("features", "label"):
        if key not in mat:
            raise ConvertError(f"MAT file is missing key {key!r}")
    features = _dense(mat["features"]).astype(np.float64)
    labels = np.asarray(mat["label"]).squeeze().astype(np.int64)
    if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
        raise ConvertError(
            f"label length {labels.shape} does not match features {features.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise ConvertError("labels must be binary")
    adj = union_relations(mat, [key_map[r] for r in selected])
    if adj.shape[0] != features.shape[0]:
        raise ConvertError(
            f"adjacency size {adj.shape[0]} does not match features "
            f"{features.shape[0]}")
    if not np.isfinite(features).all():
        raise ConvertError("features contain NaN or Inf")
    return adj, features, labels, selected


def write_fgcg(path, adj: sp.csr_matrix, features: np.ndarray,
               labels: np.ndarray) -> None:
    n = adj.shape[0]
    offsets = adj.indptr.astype("<u8")
    neighbors = adj.indices.astype("<u4")
    payload = b"".join([
        offsets.tobytes(),
        neighbors.tobytes(),
        np.ascontiguousarray(features, dtype="<f4").tobytes(),
        np.ascontiguousarray(labels, dtype="u1").tobytes(),
    ])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FGCG_MAGIC, FGCG_VERSION, n, neighbors.size,
                              features.shape[1]))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def convert(mat_path, dataset: str, relations, out_path) -> Summary:
    if dataset not in DATASET_RELATIONS:
        raise ConvertError(f"dataset must be one of {list(DATASET_RELATIONS)}")
    adj, features, labels, selected = load_mat(mat_path, dataset, relations)
    write_fgcg(out_path, adj, features, labels)
    digest = hashlib.sha256(open(mat_path, "rb").read()).hexdigest()
    return Summary(
        dataset=dataset,
        relations=selected,
        num_nodes=adj.shape[0],
        num_undirected_edges=adj.nnz // 2,
        feature_dim=features.shape[1],
        anomaly_rate=float(labels.mean()),
        input_sha256=digest,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fgcg-convert",
        description="Convert a YelpChi/Amazon MAT release to an FGCG graph file")
    parser.add_argument("--input", required=True, help="path to the .mat file")
    parser.add_argument("--dataset", required=True, choices=("yelpchi", "amazon"))
    parser.add_argument("--relations", default="all",
                        help="'all' or a comma list, e.g. rur,rsr (YelpChi) "
                             "or upu,uvu (Amazon)")
    parser.add_argument("--output", required=True, help="path to the .fgcg file")
    args = parser.parse_args(argv)
    try:
        summary = convert(args.input, args.dataset, args.relations, args.output)
    except (ConvertError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for line in summary.lines():
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
