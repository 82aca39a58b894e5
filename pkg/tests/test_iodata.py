import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brainalign.iodata import (
    FULL,
    BenchmarkScores,
    ElectrodeMeta,
    EmbeddingTensor,
    FormatError,
    aggregate_benchmarks,
    align_words,
    read_electrodes,
    read_responses,
    read_tensor,
    read_tensor_header,
    write_electrodes,
    write_responses,
    write_tensor,
)
from conftest import make_responses, make_tensor


def test_single_float_payload_bytes(tmp_path):
    t = make_tensor(np.array([[[0.5]]], dtype=np.float32))
    path = tmp_path / "t.nmt1"
    write_tensor(t, path)
    raw = path.read_bytes()
    header, payload = raw.split(b"\n", 1)
    assert header.startswith(b"{")
    assert payload == bytes([0x00, 0x00, 0x00, 0x3F])


def test_round_trip_distinct_values(tmp_path):
    data = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7.0
    t = make_tensor(data, model_id="alpha", context_window=5, word_ids=[2, 5, 9])
    path = tmp_path / "t.nmt1"
    write_tensor(t, path)
    back = read_tensor(path)
    assert back.model_id == "alpha"
    assert back.context_window == 5
    assert np.array_equal(back.word_ids, [2, 5, 9])
    assert back.data.tobytes() == t.data.tobytes()


def test_nan_rejected():
    data = np.zeros((1, 2, 2), dtype=np.float32)
    data[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        make_tensor(data)


def test_truncated_payload(tmp_path):
    t = make_tensor(np.zeros((2, 2, 2), dtype=np.float32))
    path = tmp_path / "t.nmt1"
    write_tensor(t, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(FormatError, match="payload length mismatch"):
        read_tensor(path)


def test_payload_length_accepted(tmp_path):
    # (2,2,2) -> 8 floats -> 32 bytes
    t = make_tensor(np.zeros((2, 2, 2), dtype=np.float32))
    path = tmp_path / "t.nmt1"
    write_tensor(t, path)
    header = path.read_bytes().split(b"\n", 1)
    assert len(header[1]) == 32
    read_tensor(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.nmt1"
    path.write_bytes(b'{"magic": "XXXX"}\n')
    with pytest.raises(FormatError, match="bad magic"):
        read_tensor_header(path)


def test_word_ids_must_increase():
    with pytest.raises(ValueError, match="strictly increasing"):
        make_tensor(np.zeros((1, 3, 1), dtype=np.float32), word_ids=[3, 2, 1])
    with pytest.raises(ValueError, match="strictly increasing"):
        make_tensor(np.zeros((1, 3, 1), dtype=np.float32), word_ids=[1, 1, 2])


@settings(max_examples=25, deadline=None)
@given(
    shape=st.tuples(st.integers(1, 3), st.integers(1, 5), st.integers(1, 4)),
    seed=st.integers(0, 2**16),
)
def test_round_trip_property(tmp_path_factory, shape, seed):
    data = np.random.default_rng(seed).standard_normal(shape).astype(np.float32)
    t = make_tensor(data, context_window=FULL)
    path = tmp_path_factory.mktemp("rt") / "t.nmt1"
    write_tensor(t, path)
    back = read_tensor(path)
    assert back.data.shape == t.data.shape
    assert back.data.tobytes() == t.data.tobytes()
    assert back.context_window == t.context_window
    assert np.array_equal(back.word_ids, t.word_ids)


# ---------------------------------------------------------------------------
# benchmarks
# ---------------------------------------------------------------------------

def test_aggregate_examples():
    assert aggregate_benchmarks(0.669, 0.703) == pytest.approx(0.686, abs=1e-12)
    assert aggregate_benchmarks(0.486, 0.535) == pytest.approx(0.5105, abs=1e-12)
    assert aggregate_benchmarks(0.0, 0.0) == 0.0


def test_aggregate_out_of_range():
    with pytest.raises(ValueError):
        aggregate_benchmarks(1.2, 0.5)


def test_benchmark_scores_mean_invariant():
    s = BenchmarkScores("m", 0.6, 0.7)
    assert s.llm_performance == pytest.approx(0.65, abs=1e-12)
    with pytest.raises(ValueError):
        BenchmarkScores("m", 0.6, 0.7, llm_performance=0.7)


# ---------------------------------------------------------------------------
# word alignment
# ---------------------------------------------------------------------------

def test_align_words_identity():
    t = make_tensor(np.ones((1, 3, 2), dtype=np.float32), word_ids=[1, 2, 3])
    r = make_responses(np.ones((2, 3)), word_ids=[1, 2, 3])
    t2, r2 = align_words(t, r)
    assert t2 is t and r2 is r


def test_align_words_intersection():
    t = make_tensor(np.arange(6, dtype=np.float32).reshape(1, 3, 2), word_ids=[1, 2, 3])
    r = make_responses([[10.0, 20.0, 30.0]], word_ids=[2, 3, 4])
    t2, r2 = align_words(t, r)
    assert np.array_equal(t2.word_ids, [2, 3])
    assert np.array_equal(r2.word_ids, [2, 3])
    assert np.array_equal(t2.data[0], t.data[0, 1:])
    assert np.array_equal(r2.values, [[10.0, 20.0]])


def test_align_words_disjoint():
    t = make_tensor(np.ones((1, 2, 1), dtype=np.float32), word_ids=[1, 2])
    r = make_responses([[1.0, 2.0]], word_ids=[5, 6])
    with pytest.raises(ValueError, match="no common"):
        align_words(t, r)


def test_align_words_idempotent(rng):
    t = make_tensor(rng.standard_normal((2, 5, 3)).astype(np.float32), word_ids=[1, 3, 5, 7, 9])
    r = make_responses(rng.standard_normal((2, 4)), word_ids=[3, 5, 7, 11])
    t1, r1 = align_words(t, r)
    t2, r2 = align_words(t1, r1)
    assert np.array_equal(t1.word_ids, t2.word_ids)
    assert np.array_equal(t1.data, t2.data)
    assert np.array_equal(r1.values, r2.values)


# ---------------------------------------------------------------------------
# tables and response files
# ---------------------------------------------------------------------------

def test_electrode_csv_round_trip(tmp_path):
    metas = [
        ElectrodeMeta("E1", "S1", 12.5, "HG", 40.0, True, 3.2),
        ElectrodeMeta("E2", "S2", 80.0, "IFG", None, False, -0.5),
    ]
    path = tmp_path / "el.csv"
    write_electrodes(metas, path)
    back = read_electrodes(path)
    assert back == metas


def test_electrode_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "el.csv"
    path.write_text("electrode_id,subject\nE1,S1\n")
    with pytest.raises(FormatError, match="expected header"):
        read_electrodes(path)


def test_responses_round_trip(tmp_path, rng):
    r = make_responses(rng.standard_normal((3, 5)).astype(np.float32))
    path = tmp_path / "resp.nmt1"
    write_responses(r, path)
    back = read_responses(path)
    assert back.electrode_ids == r.electrode_ids
    assert np.array_equal(back.word_ids, r.word_ids)
    assert np.array_equal(back.values, np.asarray(r.values, dtype=np.float32).astype(np.float64))
