import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zakotfs.exceptions import IQFormatError
from zakotfs.iq import IQCapture, read_iq, sidecar_path, write_iq


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    s = (rng.standard_normal(1000) + 1j * rng.standard_normal(1000)).astype(np.complex64)
    cap = IQCapture(s, 960e3, "140 GHz bench", {"noise_var": 0.01, "gain_db": 3})
    write_iq(tmp_path / "a.iq", cap)
    back = read_iq(tmp_path / "a.iq")
    np.testing.assert_array_equal(back.samples, s)
    assert back.sample_rate == 960e3
    assert back.description == "140 GHz bench"
    assert back.notes == {"noise_var": 0.01, "gain_db": 3}


def test_file_layout(tmp_path):
    write_iq(tmp_path / "b.iq", IQCapture(np.array([1 + 2j, -3 - 4j]), 1.0))
    raw = (tmp_path / "b.iq").read_bytes()
    np.testing.assert_array_equal(np.frombuffer(raw, "<f4"), [1, 2, -3, -4])
    meta = json.loads(sidecar_path(tmp_path / "b.iq").read_text())
    assert meta["sample_rate"] == 1.0 and meta["description"] == ""


def test_empty_capture(tmp_path):
    write_iq(tmp_path / "e.iq", IQCapture(np.zeros(0), 5.0))
    back = read_iq(tmp_path / "e.iq")
    assert back.samples.size == 0 and back.sample_rate == 5.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.complex64, st.integers(0, 64), elements=st.complex_numbers(width=64, allow_nan=False)))
def test_bit_exact_property(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("iq") / "p.iq"
    write_iq(path, IQCapture(samples, 2.0))
    back = read_iq(path)
    assert back.samples.tobytes() == samples.tobytes()


def test_odd_float_count(tmp_path):
    path = tmp_path / "odd.iq"
    path.write_bytes(np.arange(3, dtype="<f4").tobytes())
    sidecar_path(path).write_text(json.dumps({"sample_rate": 1.0, "description": ""}))
    with pytest.raises(IQFormatError, match="odd"):
        read_iq(path)


def test_partial_float(tmp_path):
    path = tmp_path / "t.iq"
    path.write_bytes(b"\x00" * 10)
    sidecar_path(path).write_text(json.dumps({"sample_rate": 1.0}))
    with pytest.raises(IQFormatError):
        read_iq(path)


def test_missing_sidecar(tmp_path):
    path = tmp_path / "m.iq"
    path.write_bytes(b"")
    with pytest.raises(IQFormatError, match="sidecar"):
        read_iq(path)


@pytest.mark.parametrize("meta", ["not json", "[1, 2]", '{"description": "x"}', '{"sample_rate": -1}', '{"sample_rate": 1, "description": 5}'])
def test_invalid_sidecar(tmp_path, meta):
    path = tmp_path / "i.iq"
    path.write_bytes(b"")
    sidecar_path(path).write_text(meta)
    with pytest.raises(IQFormatError):
        read_iq(path)


def test_write_rejects_bad_rate(tmp_path):
    with pytest.raises(IQFormatError):
        write_iq(tmp_path / "x.iq", IQCapture(np.zeros(2), 0.0))
