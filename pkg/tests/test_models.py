import numpy as np
import pytest

from fgccomp.graph import (
    EVAL,
    TRAIN,
    Split,
    build_graph,
    make_split,
    with_labels,
)
from fgccomp.models import (
    CheckpointError,
    build_model,
    load_checkpoint,
    model_forward,
    predict_proba,
    save_checkpoint,
)
from fgccomp.ndops import Tape, bce_with_logits, take_rows


def fixture_graph(rng, n=16, d=5, seed=0):
    edges = rng.integers(0, n, size=(n * 2, 2))
    feats = rng.normal(size=(n, d))
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[:max(5, n // 3)]] = 1
    g = build_graph(edges, feats, labels)
    return g, make_split(g, (0.4, 0.2, 0.4), seed)


def test_mlp_identical_features_identical_logits():
    feats = np.zeros((4, 3))
    feats[:2] = [1.0, 2.0, -0.5]
    feats[2:] = [0.3, 0.3, 0.3]
    g = build_graph([(0, 2), (1, 3)], feats, [1, 1, 0, 0])
    split = Split(np.array([True, False, True, False]),
                  np.array([False, True, False, False]),
                  np.array([False, False, False, True]))
    model = build_model("mlp", 3, hidden=8, seed=1)
    logits = model_forward(model, g, split, EVAL).value[:, 0]
    assert logits[0] == logits[1]
    assert logits[2] == logits[3]


def test_fgc_eval_scores_blind_to_nontrain_labels():
    rng = np.random.default_rng(2)
    g, split = fixture_graph(rng)
    model = build_model("fgc", g.feature_dim, hidden=8, seed=3)
    base = model_forward(model, g, split, EVAL).value
    scrambled = np.array(g.labels)
    non_train = ~split.train_mask
    scrambled[non_train] = np.random.default_rng(9).permutation(scrambled[non_train])
    other = model_forward(model, with_labels(g, scrambled), split, EVAL).value
    assert base.tobytes() == other.tobytes()


def test_sage_equals_mlp_with_duplicated_input_oracle():
    # pairs of clones: each node's only neighbor carries identical features,
    # so the neighbor mean equals the node's own feature vector
    rng = np.random.default_rng(4)
    half = rng.normal(size=(5, 4))
    feats = np.repeat(half, 2, axis=0)
    edges = [(2 * i, 2 * i + 1) for i in range(5)]
    labels = [1, 1, 0, 0, 1, 1, 0, 0, 1, 1]
    g = build_graph(edges, feats, labels)
    split = Split(np.zeros(10, dtype=bool), np.zeros(10, dtype=bool),
                  np.zeros(10, dtype=bool))
    model = build_model("sage", 4, hidden=6, depth=1, seed=5)
    logits = model_forward(model, g, split, EVAL).value[:, 0]

    w, b = model.layers[0]
    h = np.maximum(np.concatenate([feats, feats], axis=1) @ w.value.T + b.value, 0.0)
    h = np.maximum(h @ model.head.w1.value.T + model.head.b1.value, 0.0)
    want = (h @ model.head.w2.value.T + model.head.b2.value)[:, 0]
    assert np.abs(logits - want).max() < 1e-12


@pytest.mark.parametrize("kind", ["fgc", "mlp", "sage"])
def test_node_permutation_equivariance(kind):
    rng = np.random.default_rng(6)
    g, split = fixture_graph(rng, n=14, d=4, seed=2)
    model = build_model(kind, 4, hidden=8, seed=7)
    logits = model_forward(model, g, split, TRAIN).value[:, 0]

    perm = np.random.default_rng(8).permutation(14)  # new_id = perm[old_id]
    rows = np.repeat(np.arange(14), np.diff(g.csr_offsets))
    edges = np.stack([perm[rows], perm[g.csr_neighbors]], axis=1)
    feats = np.empty_like(g.features)
    feats[perm] = g.features
    labels = np.empty_like(g.labels)
    labels[perm] = g.labels
    g2 = build_graph(edges, feats, labels)
    masks = []
    for mask in (split.train_mask, split.val_mask, split.test_mask):
        m2 = np.zeros_like(mask)
        m2[perm] = mask
        masks.append(m2)
    logits2 = model_forward(model, g2, Split(*masks), TRAIN).value[:, 0]
    assert np.abs(logits2[perm] - logits).max() < 1e-10


def test_predict_proba_zero_head_gives_half():
    rng = np.random.default_rng(10)
    g, split = fixture_graph(rng)
    model = build_model("mlp", g.feature_dim, hidden=8, seed=11)
    model.head.w2.value = np.zeros_like(model.head.w2.value)
    model.head.b2.value = np.zeros_like(model.head.b2.value)
    probs = predict_proba(model, g, split)
    assert np.all(probs == 0.5)


def test_predict_proba_matches_scalar_sigmoid_oracle():
    import math

    rng = np.random.default_rng(12)
    g, split = fixture_graph(rng)
    model = build_model("fgc", g.feature_dim, hidden=8, seed=13)
    logits = model_forward(model, g, split, EVAL).value[:, 0]
    probs = predict_proba(model, g, split)
    for z, p in zip(logits, probs):
        assert abs(p - 1.0 / (1.0 + math.exp(-z))) < 1e-12
    order = np.argsort(logits)
    assert np.all(np.diff(probs[order]) >= 0.0)


@pytest.mark.parametrize("kind", ["fgc", "mlp", "sage"])
def test_parameter_registry_complete(kind):
    rng = np.random.default_rng(14)
    g, split = fixture_graph(rng, n=18, d=4, seed=3)
    model = build_model(kind, 4, hidden=6, seed=15)
    params = model.parameters()
    assert len({id(p) for p in params}) == len(params)
    train_idx = np.flatnonzero(split.train_mask)
    y = g.labels[train_idx].astype(float)

    def loss_value():
        tape = Tape()
        logits = model_forward(model, g, split, TRAIN, tape=tape)
        return float(bce_with_logits(tape, take_rows(tape, logits, train_idx), y).value[0, 0])

    base = loss_value()
    noise_rng = np.random.default_rng(0)
    for p in params:
        orig = p.value.copy()
        # non-uniform bump: a constant shift can cancel against zero-mean
        # layer-norm rows, a random one cannot
        p.value = orig + 0.3 * noise_rng.normal(size=orig.shape)
        assert loss_value() != base, f"{p.name} does not influence the loss"
        p.value = orig


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(16)
    g, split = fixture_graph(rng)
    model = build_model("fgc", g.feature_dim, hidden=8, seed=17)
    logits = model_forward(model, g, split, EVAL).value
    path = tmp_path / "model.fgcc"
    save_checkpoint(model, path)

    fresh = build_model("fgc", g.feature_dim, hidden=8, seed=99)
    load_checkpoint(fresh, path)
    again = model_forward(fresh, g, split, EVAL).value
    assert logits.tobytes() == again.tobytes()


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    model = build_model("fgc", 5, hidden=8, seed=18)
    path = tmp_path / "model.fgcc"
    save_checkpoint(model, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(build_model("fgc", 5, hidden=4, seed=18), path)
    with pytest.raises(CheckpointError):
        load_checkpoint(build_model("mlp", 5, hidden=8, seed=18), path)


def test_checkpoint_crc_guard(tmp_path):
    model = build_model("mlp", 3, hidden=4, seed=19)
    path = tmp_path / "model.fgcc"
    save_checkpoint(model, path)
    blob = bytearray(path.read_bytes())
    blob[-10] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_checkpoint(build_model("mlp", 3, hidden=4, seed=19), path)
