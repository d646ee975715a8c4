import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from comfeat.embeddings import (
    HEADER,
    MAGIC,
    BadMagic,
    BadVersion,
    DimensionMismatch,
    Truncated,
    load_embedding,
    peek_source,
    store_embedding,
)
from comfeat.synthetic import synthetic_embedding


def raw_file(magic=b"CFEM", version=1, source_code=255, n_frames=1, dim=3, payload=None):
    if payload is None:
        payload = np.zeros((n_frames, dim), dtype="<f4").tobytes()
    return struct.pack("<4sHHII", magic, version, source_code, n_frames, dim) + payload


class TestLoad:
    def test_zero_xvector(self):
        data = store_embedding(np.zeros(512), "xvector")
        vec = load_embedding(data, "xvector")
        assert vec.source == "xvector" and vec.dim == 512
        np.testing.assert_array_equal(vec.values, 0.0)

    def test_multi_frame_mean(self):
        data = store_embedding(np.array([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0]]), "other")
        vec = load_embedding(data, "other")
        np.testing.assert_array_equal(vec.values, [2.0, 3.0, 4.0])

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            load_embedding(raw_file(magic=b"XXXX"), "other")

    def test_bad_version(self):
        with pytest.raises(BadVersion):
            load_embedding(raw_file(version=2), "other")

    def test_trillsson_wrong_dim(self):
        data = raw_file(source_code=1, n_frames=1, dim=512)
        with pytest.raises(DimensionMismatch):
            load_embedding(data, "trillsson")

    def test_source_mismatch(self):
        data = store_embedding(np.zeros(512), "xvector")
        with pytest.raises(DimensionMismatch):
            load_embedding(data, "trillsson")

    def test_unknown_source_code(self):
        with pytest.raises(DimensionMismatch):
            load_embedding(raw_file(source_code=7), "other")

    def test_truncated_payload(self):
        data = store_embedding(np.zeros(512), "xvector")
        with pytest.raises(Truncated):
            load_embedding(data[:-4], "xvector")

    def test_shorter_than_header(self):
        with pytest.raises(Truncated):
            load_embedding(b"CFEM\x01\x00", "other")

    def test_zero_frames_rejected(self):
        with pytest.raises(DimensionMismatch):
            load_embedding(raw_file(n_frames=0, payload=b""), "other")


class TestStore:
    def test_round_trip_trillsson(self):
        values = synthetic_embedding("u1", "trillsson", seed=3)[0]
        vec = load_embedding(store_embedding(values, "trillsson"), "trillsson")
        np.testing.assert_array_equal(vec.values, values)  # bit-for-bit

    def test_wrong_dim_for_source(self):
        with pytest.raises(DimensionMismatch):
            store_embedding(np.zeros(7), "xvector")

    def test_matrix_header_mirrors_shape(self):
        data = store_embedding(np.arange(6, dtype=float).reshape(2, 3), "other")
        _, _, code, n_frames, dim = HEADER.unpack_from(data)
        assert (code, n_frames, dim) == (255, 2, 3)
        assert data[:4] == MAGIC

    def test_unknown_source_rejected(self):
        with pytest.raises(DimensionMismatch):
            store_embedding(np.zeros(4), "mfcc")

    @given(st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=16),
           st.integers(min_value=0, max_value=2**32 - 1))
    def test_store_load_round_trip(self, n_frames, dim, seed):
        rng = np.random.default_rng(seed)
        rows = rng.standard_normal((n_frames, dim)).astype(np.float32).astype(np.float64)
        vec = load_embedding(store_embedding(rows, "other"), "other")
        np.testing.assert_array_equal(vec.values, rows.mean(axis=0))


class TestPeekSource:
    def test_reads_tag_without_payload_checks(self):
        assert peek_source(store_embedding(np.zeros(512), "xvector")) == "xvector"

    def test_truncated_header(self):
        with pytest.raises(Truncated):
            peek_source(b"CF")


class TestSyntheticEmbedding:
    def test_deterministic(self):
        a = synthetic_embedding("utt1", "trillsson", seed=1)
        b = synthetic_embedding("utt1", "trillsson", seed=1)
        np.testing.assert_array_equal(a, b)

    def test_varies_by_id_and_seed(self):
        a = synthetic_embedding("utt1", "trillsson", seed=1)
        assert not np.array_equal(a, synthetic_embedding("utt2", "trillsson", seed=1))
        assert not np.array_equal(a, synthetic_embedding("utt1", "trillsson", seed=2))

    def test_contract_dims(self):
        assert synthetic_embedding("u", "trillsson").shape == (1, 1024)
        assert synthetic_embedding("u", "xvector").shape == (1, 512)
