import time

import numpy as np
import pytest

from jpsh.data_io import FeatureSet
from jpsh.datasets import gaussian_mixture
from jpsh.encoder import (
    CodeSet,
    encode,
    encode_batch,
    load_codes,
    pack_bits,
    save_codes,
    unpack_bits,
)
from jpsh.errors import FormatError, ShapeError
from jpsh.optimizer import Hyperparams, train


@pytest.fixture(scope="module")
def tiny_model():
    fs = gaussian_mixture(80, 4, n_classes=2, seed=0)
    hyper = Hyperparams(l=4, m=2, k=1, psi=1, T=4, seed=1)
    model, _ = train(fs, hyper)
    return model


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------


def test_pack_bits_golden_word():
    # bits 0, 2, 4 set -> 0b10101 = 21 in the low word
    bits = np.zeros((1, 5), dtype=bool)
    bits[0, [0, 2, 4]] = True
    words = pack_bits(bits)
    assert words.shape == (1, 1)
    assert words[0, 0] == np.uint64(0b10101)


def test_pack_bits_crosses_word_boundary():
    bits = np.zeros((1, 70), dtype=bool)
    bits[0, 0] = True
    bits[0, 63] = True
    bits[0, 64] = True
    bits[0, 69] = True
    words = pack_bits(bits)
    assert words.shape == (1, 2)
    assert words[0, 0] == np.uint64(1) | np.uint64(1) << np.uint64(63)
    assert words[0, 1] == np.uint64(1) | np.uint64(1) << np.uint64(5)


def test_pack_unpack_roundtrip_and_padding():
    rng = np.random.default_rng(0)
    for l in (1, 5, 63, 64, 65, 128, 130):
        bits = rng.integers(0, 2, size=(7, l)).astype(bool)
        words = pack_bits(bits)
        assert words.shape == (7, (l + 63) // 64)
        assert np.array_equal(unpack_bits(words, l), bits)
        # bits beyond l in the last word stay zero
        tail = l % 64
        if tail:
            mask = ~np.uint64((1 << tail) - 1)
            assert (words[:, -1] & mask == 0).all()


# ---------------------------------------------------------------------------
# encoding semantics
# ---------------------------------------------------------------------------


def test_encode_all_ones_when_projections_zero(tiny_model):
    model = tiny_model
    zeroed = type(model)(
        np.zeros_like(model.P),
        np.zeros_like(model.W),
        model.R,
        model.V,
        model.B,
        model.anchors,
        model.center_mean,
        model.hyper,
    )
    code = encode(zeroed, np.random.default_rng(0).standard_normal(4))
    assert np.array_equal(unpack_bits(code[None, :], 4)[0], np.ones(4, dtype=bool))


def test_encode_depends_only_on_anchor_when_w_zero(tiny_model):
    model = tiny_model
    no_w = type(model)(
        model.P,
        np.zeros_like(model.W),
        model.R,
        model.V,
        model.B,
        model.anchors,
        model.center_mean,
        model.hyper,
    )
    centers = model.anchors.centers
    rng = np.random.default_rng(1)
    # two distinct queries landing on the same nearest anchor get equal codes
    base = centers[0] + model.center_mean
    q1 = base + 0.01 * rng.standard_normal(4)
    q2 = base + 0.01 * rng.standard_normal(4)
    assert np.array_equal(encode(no_w, q1), encode(no_w, q2))


def test_encode_matches_unpacked_oracle(tiny_model):
    model = tiny_model
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal(4) * 3
        code = encode(model, x)
        bits = unpack_bits(code[None, :], model.hyper.l)[0]
        # floating-point recomputation straight from the encoding rule
        xc = x - model.center_mean
        d2 = ((model.anchors.centers - xc) ** 2).sum(axis=1)
        j = int(np.argmin(d2))
        u = model.R @ (model.P[j].T @ model.anchors.centers[j]) + model.V @ (
            model.W.T @ xc
        )
        assert np.array_equal(bits, u >= 0)


def test_encode_shape_error(tiny_model):
    with pytest.raises(ShapeError):
        encode(tiny_model, np.zeros(7))
    with pytest.raises(ShapeError):
        encode_batch(tiny_model, FeatureSet(np.zeros((2, 7))))


def test_encode_batch_matches_single(tiny_model):
    rng = np.random.default_rng(3)
    fs = FeatureSet(rng.standard_normal((50, 4)))
    batch = encode_batch(tiny_model, fs)
    assert len(batch) == 50 and batch.l == 4
    for i in range(50):
        assert np.array_equal(batch.codes[i], encode(tiny_model, fs.features[i]))


def test_encode_batch_permutation_equivariant(tiny_model):
    rng = np.random.default_rng(4)
    fs = FeatureSet(rng.standard_normal((30, 4)))
    perm = rng.permutation(30)
    direct = encode_batch(tiny_model, fs)
    shuffled = encode_batch(tiny_model, fs.subset(perm))
    assert np.array_equal(direct.codes[perm], shuffled.codes)
    assert np.array_equal(direct.ids[perm], shuffled.ids)


def test_encode_batch_singleton(tiny_model):
    fs = FeatureSet(np.random.default_rng(5).standard_normal((1, 4)))
    cs = encode_batch(tiny_model, fs)
    assert np.array_equal(cs.codes[0], encode(tiny_model, fs.features[0]))


def test_encode_batch_speed_at_image_scale():
    # 10k queries at 784 dimensions against 64 anchors and 16 bits
    rng = np.random.default_rng(6)
    from jpsh.anchors import AnchorSet
    from jpsh.optimizer import Hyperparams, JpshModel

    d, m, l = 784, 64, 16
    q1, _ = np.linalg.qr(rng.standard_normal((l, l)))
    q2, _ = np.linalg.qr(rng.standard_normal((l, l)))
    model = JpshModel(
        P=rng.standard_normal((m, d, l)),
        W=rng.standard_normal((d, l)),
        R=q1,
        V=q2,
        B=np.ones((l, m)),
        anchors=AnchorSet(rng.standard_normal((m, d)), None, m),
        center_mean=rng.standard_normal(d),
        hyper=Hyperparams(l=l, m=m),
    )
    fs = FeatureSet(rng.standard_normal((10_000, d)))
    start = time.perf_counter()
    codes = encode_batch(model, fs)
    assert time.perf_counter() - start < 5.0
    assert len(codes) == 10_000


# ---------------------------------------------------------------------------
# code files
# ---------------------------------------------------------------------------


def test_codes_roundtrip(tmp_path, tiny_model):
    fs = FeatureSet(np.random.default_rng(8).standard_normal((12, 4)))
    cs = encode_batch(tiny_model, fs)
    path = tmp_path / "db.jpshc"
    save_codes(cs, path)
    back = load_codes(path)
    assert back.l == cs.l
    assert np.array_equal(back.codes, cs.codes)
    assert np.array_equal(back.ids, cs.ids)
    assert (tmp_path / "db.jpshc.ids").exists()


def test_codes_bad_magic(tmp_path):
    p = tmp_path / "x.jpshc"
    p.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(FormatError):
        load_codes(p)


def test_codes_truncated(tmp_path):
    cs = CodeSet(np.zeros((3, 1), dtype=np.uint64), np.arange(3), 8)
    p = tmp_path / "x.jpshc"
    save_codes(cs, p)
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(FormatError):
        load_codes(p)


def test_codeset_validation():
    with pytest.raises(ShapeError):
        CodeSet(np.zeros((3, 2), dtype=np.uint64), np.arange(3), 8)
    with pytest.raises(ShapeError):
        CodeSet(np.zeros((3, 1), dtype=np.uint64), np.arange(2), 8)
