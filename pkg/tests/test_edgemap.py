import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poelsd.edgemap import (
    binarize,
    fallback_edges,
    load_edge_map,
    nms_thin,
    read_pgm,
    save_edge_map,
    write_pgm,
)
from poelsd.errors import ImageFormatError
from poelsd.orientation import build_window_bank, estimate_orientation

BANK = build_window_bank(7, 16)


def _pgm(tmp_path, img, name="m.pgm", ascii=False, maxval=None):
    path = tmp_path / name
    write_pgm(path, np.asarray(img), maxval, ascii=ascii)
    return path


@pytest.mark.parametrize("ascii", [False, True])
def test_load_all_255_is_one(tmp_path, ascii):
    path = _pgm(tmp_path, np.full((4, 5), 255, np.uint8), ascii=ascii)
    assert np.array_equal(load_edge_map(path), np.ones((4, 5)))


def test_load_zero_map(tmp_path):
    path = _pgm(tmp_path, np.zeros((3, 3), np.uint8))
    assert np.array_equal(load_edge_map(path), np.zeros((3, 3)))


def test_load_128(tmp_path):
    path = _pgm(tmp_path, np.full((2, 2), 128, np.uint8))
    assert load_edge_map(path)[0, 0] == pytest.approx(128 / 255)
    assert load_edge_map(path)[0, 0] == pytest.approx(0.50196, abs=1e-5)


def test_pgm_comments_and_ascii(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# a comment\n3 2\n# another\n255\n0 128 255\n1 2 3\n")
    img, maxval = read_pgm(path)
    assert maxval == 255
    assert img.tolist() == [[0, 128, 255], [1, 2, 3]]


def test_sixteen_bit_pgm_and_png(tmp_path):
    raw = np.array([[0, 65535], [32768, 1]], dtype=np.uint16)
    path = _pgm(tmp_path, raw, maxval=65535)
    assert np.allclose(load_edge_map(path), raw / 65535)
    from PIL import Image

    png = tmp_path / "m.png"
    Image.fromarray(raw).save(png)
    assert np.allclose(load_edge_map(png), raw / 65535)


def test_png_8bit(tmp_path):
    from PIL import Image

    raw = np.array([[0, 255], [128, 7]], dtype=np.uint8)
    png = tmp_path / "m.png"
    Image.fromarray(raw).save(png)
    assert np.allclose(load_edge_map(png), raw / 255)


def test_normalize_modes(tmp_path):
    path = _pgm(tmp_path, np.array([[0, 1], [1, 0]], np.uint8))
    assert np.array_equal(load_edge_map(path, "none"), [[0, 1], [1, 0]])
    path = _pgm(tmp_path, np.array([[0, 2]], np.uint8), "b.pgm")
    with pytest.raises(ImageFormatError):
        load_edge_map(path, "none")
    assert np.allclose(load_edge_map(path, "fixed-255"), [[0, 2 / 255]])


def test_errors(tmp_path):
    with pytest.raises(ImageFormatError):
        load_edge_map(tmp_path / "missing.pgm")
    rgb = tmp_path / "rgb.ppm"
    rgb.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ImageFormatError):
        load_edge_map(rgb)
    from PIL import Image

    png = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(png)
    with pytest.raises(ImageFormatError):
        load_edge_map(png)
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"hello")
    with pytest.raises(ImageFormatError):
        load_edge_map(junk)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_roundtrip_bit_exact(tmp_path_factory, raw):
    path = tmp_path_factory.mktemp("rt") / "x.pgm"
    write_pgm(path, raw, 255)
    before = path.read_bytes()
    values = load_edge_map(path)
    save_edge_map(path, values)
    assert path.read_bytes() == before


def test_fallback_constant():
    assert not fallback_edges(np.full((6, 6), 77.0)).any()


def test_fallback_vertical_step():
    img = np.zeros((8, 10))
    img[:, 5:] = 255
    e = fallback_edges(img)
    assert np.all(e[:, 4] == 1.0) and np.all(e[:, 5] == 1.0)
    assert not e[:, :4].any() and not e[:, 6:].any()


def test_fallback_single_pixel_is_local():
    img = np.zeros((11, 11))
    img[5, 5] = 255
    e = fallback_edges(img)
    assert e[5, 4] > 0 and e[5, 6] > 0 and e[4, 5] > 0 and e[6, 5] > 0
    assert e[5, 5] == 0  # central differences skip the centre
    far = np.ones_like(e, bool)
    far[4:7, 4:7] = False
    assert not e[far].any()


def test_nms_thin_line_unchanged():
    m = np.zeros((15, 30))
    m[7, 3:27] = 1.0
    assert np.array_equal(nms_thin(m, estimate_orientation(m, BANK)), m)


def test_nms_plateau_survives():
    m = np.zeros((15, 30))
    m[6:9, 3:27] = 1.0
    thinned = nms_thin(m, estimate_orientation(m, BANK))
    assert np.array_equal(thinned[6:9, 10:20], m[6:9, 10:20])


def test_nms_zero_map():
    m = np.zeros((5, 5))
    assert not nms_thin(m, estimate_orientation(m, BANK)).any()


def test_nms_suppresses_ridge_flanks():
    m = np.zeros((15, 30))
    m[6, 3:27] = 0.4
    m[7, 3:27] = 0.9
    m[8, 3:27] = 0.4
    thinned = nms_thin(m, estimate_orientation(m, BANK))
    assert thinned[7, 10:20].tolist() == [0.9] * 10
    assert not thinned[6, 10:20].any() and not thinned[8, 10:20].any()


def test_nms_dimension_mismatch():
    m = np.zeros((5, 5))
    with pytest.raises(ValueError):
        nms_thin(np.zeros((4, 5)), estimate_orientation(m, BANK))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (12, 12), elements=st.floats(0, 1)))
def test_nms_never_increases(m):
    thinned = nms_thin(m, estimate_orientation(m, BANK))
    assert np.all(thinned <= m)


def test_binarize_rules():
    assert binarize(np.array([[0.3]]), 0.3)[0, 0] == 0.0
    assert binarize(np.array([[0.001]]), 0.0)[0, 0] == 1.0
    assert not binarize(np.ones((3, 3)), 1.0).any()
    with pytest.raises(ValueError):
        binarize(np.ones((2, 2)), 1.5)
    with pytest.raises(ValueError):
        binarize(np.ones((2, 2)), -0.1)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(0, 1)),
       st.floats(0, 1), st.floats(0, 1, exclude_max=True))
def test_binarize_idempotent(m, lam, lam2):
    once = binarize(m, lam)
    assert set(np.unique(once)) <= {0.0, 1.0}
    assert np.array_equal(binarize(once, lam2), once)
