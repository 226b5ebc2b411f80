import numpy as np
import pytest

from eqrestore import ImageBuffer, read_netpbm, write_netpbm
from eqrestore.errors import ParseError
from eqrestore.netpbm import parse_netpbm
from eqrestore.rng import Rng


def test_p5_example_scaling():
    blob = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64])
    img = parse_netpbm(blob)
    assert img.shape == (2, 2, 1)
    assert np.array_equal(img.flat(), [0, 128 / 255, 1.0, 64 / 255])


def test_p6_single_pixel():
    blob = b"P6\n1 1\n255\n" + bytes([255, 0, 0])
    img = parse_netpbm(blob)
    assert img.shape == (1, 1, 3)
    assert np.array_equal(img.flat(), [1.0, 0.0, 0.0])


def test_header_comments():
    blob = b"P5 # magic\n# size next\n2 1\n255\n" + bytes([10, 20])
    img = parse_netpbm(blob)
    assert img.shape == (1, 2, 1)


@pytest.mark.parametrize("maxval", [255, 65535])
@pytest.mark.parametrize("channels", [1, 3])
def test_roundtrip_lossless_on_grid(tmp_path, maxval, channels):
    rng = Rng(5)
    img = ImageBuffer(rng.uniform((7, 5, channels)))
    quantized = ImageBuffer(np.rint(img.data * maxval) / maxval)
    path = tmp_path / "img.pnm"
    write_netpbm(img, path, maxval=maxval)
    back = read_netpbm(path)
    assert np.array_equal(back.data, quantized.data)
    # a second trip is exactly stable
    write_netpbm(back, path, maxval=maxval)
    assert np.array_equal(read_netpbm(path).data, back.data)


def test_bad_magic_offset():
    with pytest.raises(ParseError) as exc:
        parse_netpbm(b"P3\n1 1\n255\n abc")
    assert exc.value.offset == 0


def test_truncated_payload_reports_offset():
    blob = b"P5\n2 2\n255\n" + bytes([1, 2])
    with pytest.raises(ParseError) as exc:
        parse_netpbm(blob)
    assert "truncated" in str(exc.value)
    assert exc.value.offset is not None


def test_bad_dimension_token():
    with pytest.raises(ParseError):
        parse_netpbm(b"P5\nxx 2\n255\n\x00\x00")


def test_unsupported_maxval():
    with pytest.raises(ParseError):
        parse_netpbm(b"P5\n1 1\n100\n\x00")


def test_16bit_big_endian():
    blob = b"P5\n1 1\n65535\n" + (40000).to_bytes(2, "big")
    img = parse_netpbm(blob)
    assert abs(img.flat()[0] - 40000 / 65535) < 1e-15
