import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from truncsr.formats import (HEADER, MAGIC, FormatError, fmt, load_checkpoint, read_csv, read_pnm,
                             read_tensor, save_checkpoint, write_csv, write_pgm, write_tensor)
from truncsr.nn import MLP


@given(a=hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=2, max_side=9),
                    elements=st.floats(-1e6, 1e6, width=32)))
def test_tensor_round_trip(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("t") / "x.f32"
    write_tensor(path, a)
    back = read_tensor(path)
    assert back.shape == a.shape
    np.testing.assert_array_equal(back.astype(np.float32), a)


def test_tensor_header_layout(tmp_path):
    write_tensor(tmp_path / "v.f32", np.array([1.0, 2.0, 3.0]))
    raw = (tmp_path / "v.f32").read_bytes()
    assert HEADER.unpack_from(raw) == (MAGIC, 1, 3, 1)
    assert len(raw) == 16 + 12
    assert np.frombuffer(raw[16:], "<f4").tolist() == [1.0, 2.0, 3.0]


def test_tensor_errors(tmp_path):
    with pytest.raises(FormatError):
        write_tensor(tmp_path / "c.f32", np.zeros((2, 2, 2)))
    (tmp_path / "bad.f32").write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(FormatError):
        read_tensor(tmp_path / "bad.f32")
    write_tensor(tmp_path / "short.f32", np.zeros((4, 4)))
    raw = (tmp_path / "short.f32").read_bytes()
    (tmp_path / "short.f32").write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        read_tensor(tmp_path / "short.f32")


def test_checkpoint_round_trip(tmp_path):
    net = MLP.init([5, 7, 3], ["silu", "identity"], np.random.default_rng(0))
    save_checkpoint(tmp_path, {"net": net}, {"note": "x"})
    nets, meta = load_checkpoint(tmp_path)
    assert meta == {"note": "x"}
    back = nets["net"]
    assert back.activations == net.activations
    for a, b in zip(back.params(), net.params()):
        np.testing.assert_array_equal(a, b.astype(np.float32))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path)


@pytest.mark.parametrize("maxval", [255, 65535])
def test_pgm_round_trip(tmp_path, maxval):
    img = np.random.default_rng(1).random((5, 7))
    write_pgm(tmp_path / "a.pgm", img, maxval)
    back = read_pnm(tmp_path / "a.pgm")
    assert back.shape == (5, 7)
    assert np.abs(back - img).max() <= 0.5 / maxval + 1e-12


def test_ppm_with_comment_to_luma(tmp_path):
    rgb = np.array([[[255, 0, 0], [0, 255, 0]]], dtype=np.uint8)
    (tmp_path / "c.ppm").write_bytes(b"P6\n# made by hand\n2 1\n255\n" + rgb.tobytes())
    np.testing.assert_allclose(read_pnm(tmp_path / "c.ppm"), [[0.299, 0.587]])


def test_pnm_errors(tmp_path):
    (tmp_path / "a.pbm").write_bytes(b"P4\n1 1\n1\n\x00")
    with pytest.raises(FormatError):
        read_pnm(tmp_path / "a.pbm")
    with pytest.raises(FormatError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)), maxval=1000)


def test_csv_format(tmp_path):
    write_csv(tmp_path / "r.csv", ["a", "b", "c"],
              [{"a": 1, "b": 1 / 3, "c": None}, [2, float("nan"), 1e-12]])
    raw = (tmp_path / "r.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.decode() == "a,b,c\n1,0.333333333,NA\n2,NA,1e-12\n"
    assert read_csv(tmp_path / "r.csv")[0]["b"] == "0.333333333"
    assert fmt(np.float32(0.5)) == "0.5"
