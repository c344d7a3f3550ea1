import numpy as np
import pytest

from fgccomp.data_io import (
    BadMagicError,
    BadVersionError,
    ChecksumError,
    GraphFileError,
    TruncatedFileError,
    load_graph,
    save_graph,
    synth_planted_anomaly,
)
from fgccomp.graph import GraphError, build_graph, edge_list


def graphs_equal(a, b):
    return (a.num_nodes == b.num_nodes
            and np.array_equal(a.csr_offsets, b.csr_offsets)
            and np.array_equal(a.csr_neighbors, b.csr_neighbors)
            and np.array_equal(a.features, b.features)
            and np.array_equal(a.labels, b.labels))


def test_round_trip_random_graph(tmp_path):
    rng = np.random.default_rng(0)
    feats = (rng.normal(size=(30, 6)) * 100).round() / 16  # f32-exact values
    g = build_graph(rng.integers(0, 30, size=(60, 2)), feats,
                    (rng.random(30) < 0.3).astype(int))
    path = tmp_path / "g.fgcg"
    save_graph(g, path)
    assert graphs_equal(g, load_graph(path))


def test_round_trip_zero_edge_graph(tmp_path):
    g = build_graph([], np.zeros((3, 2)), [1, 0, 0])
    path = tmp_path / "empty.fgcg"
    save_graph(g, path)
    loaded = load_graph(path)
    assert graphs_equal(g, loaded)
    assert loaded.num_edge_slots == 0


def test_truncated_file_is_reported(tmp_path):
    g = build_graph([(0, 1)], np.ones((2, 2)), [0, 1])
    path = tmp_path / "g.fgcg"
    save_graph(g, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 7])
    with pytest.raises(TruncatedFileError):
        load_graph(path)
    path.write_bytes(blob[:10])
    with pytest.raises(TruncatedFileError):
        load_graph(path)


def test_bad_magic_and_version(tmp_path):
    g = build_graph([(0, 1)], np.ones((2, 2)), [0, 1])
    path = tmp_path / "g.fgcg"
    save_graph(g, path)
    blob = bytearray(path.read_bytes())
    wrong = bytearray(blob)
    wrong[:4] = b"NOPE"
    path.write_bytes(bytes(wrong))
    with pytest.raises(BadMagicError):
        load_graph(path)
    wrong = bytearray(blob)
    wrong[4] = 99
    path.write_bytes(bytes(wrong))
    with pytest.raises(BadVersionError):
        load_graph(path)


def test_crc_mismatch_detected(tmp_path):
    g = build_graph([(0, 1), (1, 2)], np.ones((3, 2)), [0, 1, 0])
    path = tmp_path / "g.fgcg"
    save_graph(g, path)
    blob = bytearray(path.read_bytes())
    blob[-12] ^= 0x01  # flip one payload bit
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        load_graph(path)


def test_error_types_are_distinct_graph_file_errors():
    for err in (BadMagicError, BadVersionError, TruncatedFileError, ChecksumError):
        assert issubclass(err, GraphFileError)
    assert len({BadMagicError, BadVersionError, TruncatedFileError,
                ChecksumError}) == 4


def test_loaded_graph_passes_invariants(tmp_path):
    g, _ = synth_planted_anomaly(200, 4, 0.2, 0.7, seed=1)
    path = tmp_path / "synth.fgcg"
    save_graph(g, path)
    loaded = load_graph(path)  # load_graph validates internally
    assert loaded.num_nodes == 200


def test_synth_full_homophily_has_no_cross_edges():
    g, _ = synth_planted_anomaly(300, 4, 0.2, 1.0, seed=2)
    pairs = edge_list(g)
    assert np.all(g.labels[pairs[:, 0]] == g.labels[pairs[:, 1]])


def test_synth_exact_anomaly_count():
    g, _ = synth_planted_anomaly(1000, 4, 0.1, 0.8, seed=3)
    assert int(g.labels.sum()) == 100


def test_synth_homophily_fraction_matches_target():
    g, _ = synth_planted_anomaly(2000, 4, 0.2, 0.8, seed=4)
    pairs = edge_list(g)
    same = (g.labels[pairs[:, 0]] == g.labels[pairs[:, 1]]).mean()
    assert abs(same - 0.8) / 0.8 < 0.05


def test_synth_mean_degree_near_target():
    g, _ = synth_planted_anomaly(2000, 4, 0.1, 0.8, seed=5)
    assert abs(g.degrees().mean() - 10.0) < 1.0


def test_synth_feature_shift():
    g, _ = synth_planted_anomaly(2000, 8, 0.2, 0.5, seed=6)
    gap = g.features[g.labels == 1].mean(axis=0) - g.features[g.labels == 0].mean(axis=0)
    assert np.all(np.abs(gap - 2.0) < 0.3)


def test_synth_deterministic_bytes(tmp_path):
    a, sa = synth_planted_anomaly(400, 5, 0.15, 0.8, seed=7)
    b, sb = synth_planted_anomaly(400, 5, 0.15, 0.8, seed=7)
    pa, pb = tmp_path / "a.fgcg", tmp_path / "b.fgcg"
    save_graph(a, pa)
    save_graph(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert np.array_equal(sa.train_mask, sb.train_mask)


def test_synth_rejects_infeasible_parameters():
    with pytest.raises(ValueError):
        synth_planted_anomaly(100, 4, 0.6, 0.5, seed=0)
    with pytest.raises(ValueError):
        synth_planted_anomaly(100, 4, 0.2, 1.5, seed=0)
    with pytest.raises(ValueError):
        synth_planted_anomaly(100, 4, 0.01, 0.5, seed=0)  # one anomaly only
