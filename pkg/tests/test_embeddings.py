import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aacap.embeddings import (
    load_embedding_file,
    mock_extract,
    plan_segments,
    save_embedding_file,
)
from aacap.errors import CorruptionError, DataError, FormatError
from aacap.features import Spectrogram


def test_plan_segments_enumeration():
    plan = plan_segments(2.4, 0.96)
    assert plan.count == 4
    assert plan.starts == pytest.approx([0.0, 0.48, 0.96, 1.44])


def test_plan_segments_single_window():
    plan = plan_segments(0.96, 0.96)
    assert plan.starts == [0.0]


def test_plan_segments_one_and_a_half_windows():
    plan = plan_segments(1.5 * 0.96, 0.96)
    assert plan.count == 2
    assert plan.starts == pytest.approx([0.0, 0.48])


def test_plan_segments_too_short_audio():
    with pytest.raises(DataError) as exc:
        plan_segments(0.5, 0.96)
    assert "pad" in str(exc.value)


@given(st.floats(0.2, 2.0), st.floats(1.0, 20.0))
@settings(max_examples=100)
def test_plan_segments_spacing_and_fit(window, extra):
    duration = window + extra
    plan = plan_segments(duration, window)
    starts = np.array(plan.starts)
    assert starts[0] == 0.0
    if len(starts) > 1:
        assert np.allclose(np.diff(starts), window / 2.0)
    assert starts[-1] + window <= duration + 1e-6
    # one more segment would overflow
    assert starts[-1] + window / 2.0 + window > duration - 1e-6


def test_embedding_file_round_trip(tmp_path):
    path = tmp_path / "clip.aace"
    matrix = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    save_embedding_file(path, matrix)
    loaded = load_embedding_file(path)
    assert loaded.shape == (2, 3)
    assert np.array_equal(loaded, matrix)


def test_embedding_file_round_trip_is_bit_exact_for_f32_values(tmp_path):
    rng = np.random.default_rng(1)
    matrix = rng.standard_normal((7, 11)).astype(np.float32).astype(np.float64)
    path = tmp_path / "m.aace"
    save_embedding_file(path, matrix)
    assert np.array_equal(load_embedding_file(path), matrix)


def test_embedding_file_bad_magic(tmp_path):
    path = tmp_path / "bad.aace"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(FormatError):
        load_embedding_file(path)


def test_embedding_file_bad_version(tmp_path):
    import struct

    path = tmp_path / "v9.aace"
    path.write_bytes(b"AACE" + struct.pack("<III", 9, 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError):
        load_embedding_file(path)


def test_embedding_file_truncated_payload(tmp_path):
    import struct

    path = tmp_path / "short.aace"
    # header says 2x3 floats but only 5 are present
    path.write_bytes(b"AACE" + struct.pack("<III", 1, 2, 3) + b"\x00" * 20)
    with pytest.raises(CorruptionError) as exc:
        load_embedding_file(path)
    assert "40" in str(exc.value) and "36" in str(exc.value)


def _repeating_spectrogram(repeats=4, frames_per_segment=10, bins=8):
    block = np.random.default_rng(5).normal(size=(frames_per_segment, bins))
    return Spectrogram(np.tile(block, (repeats, 1)), 0.01)


def test_mock_extract_identical_segments_identical_rows():
    # non-overlapping plan over a periodic spectrogram: every window sees the
    # same content, so every embedding row must match
    spec = _repeating_spectrogram(repeats=4)
    plan = plan_segments(0.2, 0.1)
    plan.starts = [0.0, 0.1, 0.2, 0.3]
    rows = mock_extract(spec, plan, dim=6, seed=3)
    assert rows.shape == (4, 6)
    for row in rows[1:]:
        assert np.allclose(row, rows[0])


def test_mock_extract_seed_changes_rows():
    spec = _repeating_spectrogram()
    plan = plan_segments(0.35, 0.1)
    a = mock_extract(spec, plan, dim=6, seed=1)
    b = mock_extract(spec, plan, dim=6, seed=2)
    assert a.shape == b.shape
    assert not np.allclose(a, b)


def test_mock_extract_row_count_matches_plan():
    spec = _repeating_spectrogram(repeats=6)
    plan = plan_segments(0.6, 0.2)
    rows = mock_extract(spec, plan, dim=5, seed=0)
    assert rows.shape[0] == plan.count


def test_mock_extract_deterministic():
    spec = _repeating_spectrogram()
    plan = plan_segments(0.3, 0.1)
    a = mock_extract(spec, plan, dim=4, seed=7)
    b = mock_extract(spec, plan, dim=4, seed=7)
    assert np.array_equal(a, b)


def test_mock_extract_rejects_overlong_plan():
    spec = Spectrogram(np.zeros((10, 4)), 0.01)  # 0.1 s of frames
    plan = plan_segments(1.0, 0.2)
    with pytest.raises(DataError):
        mock_extract(spec, plan, dim=3, seed=0)
