import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geonet.pgm import PGMError, decode_pgm, encode_pgm, read_image, read_pgm, write_pgm


@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
@settings(max_examples=50, deadline=None)
def test_encode_decode_round_trip(levels):
    assert np.array_equal(decode_pgm(encode_pgm(levels)), levels)


def test_header_layout():
    data = encode_pgm(np.array([[0, 255, 7]], dtype=np.uint8))
    assert data == b"P5\n3 1\n255\n\x00\xff\x07"


def test_comments_and_small_maxval():
    img = decode_pgm(b"P5 # comment\n2 # w\n1\n15\n\x00\x0f")
    assert img.tolist() == [[0, 255]]


@pytest.mark.parametrize("data", [
    b"P2\n1 1\n255\n0",
    b"P5\n2 2\n255\n\x00",
    b"P5\n2\n",
    b"P5\n1 1\n65535\n\x00\x00",
    b"",
])
def test_malformed(data):
    with pytest.raises(PGMError):
        decode_pgm(data)


def test_file_round_trip_is_exact(tmp_path):
    levels = np.random.default_rng(0).integers(0, 256, (9, 13)).astype(np.uint8)
    p = tmp_path / "x.pgm"
    write_pgm(p, levels)
    img = read_pgm(p)
    assert img.dtype == np.float64 and img.max() <= 1
    write_pgm(tmp_path / "y.pgm", img)
    assert (tmp_path / "y.pgm").read_bytes() == p.read_bytes()
    assert not [f for f in tmp_path.iterdir() if f.name.startswith(".")]


def test_errors_name_the_file(tmp_path):
    with pytest.raises(PGMError, match="missing.pgm"):
        read_pgm(tmp_path / "missing.pgm")
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"junk")
    with pytest.raises(PGMError, match="bad.pgm"):
        read_image(bad)


def test_png_via_pillow(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    levels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    Image.fromarray(levels).save(tmp_path / "a.png")
    np.testing.assert_array_equal(read_image(tmp_path / "a.png") * 255, levels)
