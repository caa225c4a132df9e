import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from rvefatigue.md.system import bcc_sites
from rvefatigue.vision import (
    ContourRaster,
    ExtractionSettings,
    binarize_median,
    close_faces,
    coordination_filter,
    coordination_numbers,
    crack_front,
    crack_length,
    default_cutoff,
    extract_crack,
    overlay,
    otsu_threshold,
    rasterize,
    read_image,
    skeletonize,
    write_pgm,
    write_png,
    zhang_suen,
)
from rvefatigue.vision.extract import mouth_component


def strip(length=100, width=5, pad=10):
    img = np.zeros((width + 2 * pad, length + 2 * pad), dtype=bool)
    img[pad : pad + width, pad : pad + length] = True
    return img


def l_shape(horizontal=60, vertical=40, pad=5):
    """One-pixel L: a horizontal run then a vertical run sharing the corner pixel."""
    img = np.zeros((vertical + 2 * pad, horizontal + 2 * pad), dtype=bool)
    img[pad, pad : pad + horizontal] = True
    img[pad : pad + vertical, pad + horizontal - 1] = True
    return img


def test_straight_strip_length():
    sk = skeletonize(strip())
    assert sk.length == pytest.approx(100.0, abs=2.0)


def test_l_shaped_skeleton_length():
    sk = skeletonize(l_shape())
    # outer extent along the centre line: 60 + 40 - 1 pixels
    assert sk.length == pytest.approx(99.0, abs=3.0)


def test_length_scales_with_pixel_size():
    sk = skeletonize(strip(), scale=0.5)
    assert sk.length == pytest.approx(50.0, abs=1.0)


def test_zhang_suen_gives_one_pixel_line():
    thin = zhang_suen(strip(width=7))
    cols = thin[:, 20:90]
    assert np.all(cols.sum(axis=0) == 1)


@settings(max_examples=25, deadline=None)
@given(
    length=st.integers(20, 80),
    width=st.integers(1, 9),
    seed=st.integers(0, 1000),
)
def test_skeletonization_idempotent(length, width, seed):
    rng = np.random.default_rng(seed)
    img = strip(length, width)
    # a ragged band, still a single component
    img[9, 10 : 10 + length] |= rng.random(length) < 0.5
    once = zhang_suen(img)
    assert np.array_equal(zhang_suen(once), once)
    sk = skeletonize(once)
    sk2 = skeletonize(sk.grid)
    assert np.array_equal(sk.path, sk2.path)


def test_salt_noise_removed_by_median():
    rng = np.random.default_rng(4)
    grid = np.zeros((80, 120), dtype=np.uint8)
    grid[35:45, 10:110] = 255
    noisy = grid.copy()
    salt = rng.random(grid.shape) < 0.01
    noisy[salt] = 255
    clean = binarize_median(noisy, 128, 3)
    band = grid > 0
    near_band = ndimage.binary_dilation(band, iterations=1)
    assert salt[~near_band].sum() > 50
    assert not clean[~near_band].any()
    assert clean[36:44, 11:109].all()


def test_binarize_threshold_and_window_checks():
    grid = np.zeros((9, 9), dtype=np.uint8)
    grid[:, :3] = 127
    grid[:, 3:6] = 128
    grid[:, 6:] = 255
    out = binarize_median(grid, 128, 3)
    assert not out[:, :3].any() and out[:, 3:].all()
    for bad in (1, 4):
        with pytest.raises(ValueError):
            binarize_median(grid, 128, bad)


def test_otsu_separates_two_levels():
    grid = np.zeros((10, 10), dtype=np.uint8)
    grid[:, 5:] = 200
    t = otsu_threshold(grid)
    assert 0 < t <= 200
    assert np.array_equal(binarize_median(grid, "otsu", 3), grid > 0)


def test_skeletonize_rejects_empty():
    with pytest.raises(ValueError):
        skeletonize(np.zeros((5, 5), dtype=bool))


def test_skeletonize_keeps_largest_component():
    img = strip()
    img[0:2, 0:3] = True
    with pytest.warns(RuntimeWarning):
        sk = skeletonize(img)
    assert sk.length == pytest.approx(100.0, abs=2.0)


def test_spur_is_pruned():
    img = np.zeros((40, 120), dtype=bool)
    img[20, 10:110] = True
    img[17:20, 60] = True  # three-pixel side branch
    sk = skeletonize(img)
    assert np.all(sk.path[:, 0] == 20)


def test_crack_length_from_mouth_edge():
    img = np.zeros((30, 100), dtype=bool)
    img[13:17, 0:40] = True
    sk = skeletonize(img)
    length, tip = crack_length(sk, "left")
    assert length == pytest.approx(40.0, abs=2.0)
    assert tip[0] == pytest.approx(39.0, abs=3.0)
    front = crack_front(sk)
    assert front[0] == pytest.approx(39.5, abs=1.5)


def test_crack_length_right_mouth_reorients():
    img = np.zeros((30, 100), dtype=bool)
    img[13:17, 70:100] = True
    sk = skeletonize(img)
    length, tip = crack_length(sk, "right")
    assert length == pytest.approx(30.0, abs=2.0)
    assert tip[0] < 80
    assert sk.path[0][1] > sk.path[-1][1]


def test_crack_length_requires_mouth_contact():
    img = np.zeros((30, 100), dtype=bool)
    img[13:17, 50:90] = True
    with pytest.raises(ValueError, match="does not reach"):
        crack_length(skeletonize(img), "left", mouth_tolerance=5)


def test_mouth_anchor_keeps_path_along_wide_crack():
    # short, tall region whose unanchored longest path could cut across it
    img = np.zeros((40, 60), dtype=bool)
    img[10:30, 0:35] = True
    img[18:22, 35:45] = True
    sk = skeletonize(img, mouth="left")
    length, tip = crack_length(sk, "left")
    assert tip[0] >= 40
    assert length == pytest.approx(45.0, abs=3.0)


@settings(max_examples=25, deadline=None)
@given(short=st.integers(10, 60), extra=st.integers(0, 30), width=st.integers(2, 6))
def test_nested_foregrounds_monotone(short, extra, width):
    a = np.zeros((20, 120), dtype=bool)
    b = np.zeros((20, 120), dtype=bool)
    a[8 : 8 + width, 0:short] = True
    b[8 : 8 + width, 0 : short + extra] = True
    la, _ = crack_length(skeletonize(a), "left")
    lb, _ = crack_length(skeletonize(b), "left")
    assert la <= lb + 2.0


def test_close_faces_merges_two_face_lines():
    img = np.zeros((40, 80), dtype=bool)
    img[14:16, 0:50] = True
    img[24:26, 0:50] = True
    merged = close_faces(img, 15)
    assert merged[14:26, 5:45].all()
    sk = skeletonize(merged)
    assert crack_length(sk, "left")[0] == pytest.approx(50.0, abs=2.0)


def test_mouth_component_prefers_edge_contact():
    img = np.zeros((20, 60), dtype=bool)
    img[5:8, 0:10] = True
    img[12:16, 30:59] = True
    keep = mouth_component(img, "left", reach=5)
    assert keep[6, 2] and not keep[14, 40]


def test_rasterize_geometry():
    r = rasterize(np.array([[5.0, 3.0, 0.0]]), resolution=1.0, radius=1.0, extent=(0, 0, 10, 6))
    assert (r.height, r.width) == (7, 11)
    assert r.grid[3, 5] == 255 and r.grid[3, 7] == 0
    assert r.grid.sum() == 5 * 255
    np.testing.assert_allclose(r.to_physical(3, 5), [5.0, 3.0])


def test_rasterize_rejects_degenerate_box():
    with pytest.raises(ValueError):
        rasterize(np.zeros((1, 3)), extent=(0, 0, 0, 5))


def test_pgm_round_trip(tmp_path):
    grid = np.zeros((6, 9), dtype=np.uint8)
    grid[1, 2] = 255
    grid[4, 7] = 100
    write_pgm(ContourRaster(grid, 0.5, (1.0, 2.0)), tmp_path / "a.pgm")
    back = read_image(tmp_path / "a.pgm", 0.5, (1.0, 2.0))
    np.testing.assert_array_equal(back.grid, grid)


def test_png_round_trip(tmp_path):
    grid = np.zeros((6, 9), dtype=np.uint8)
    grid[2, 3] = 255
    write_png(grid, tmp_path / "a.png")
    back = read_image(tmp_path / "a.png")
    np.testing.assert_array_equal(back.grid, grid)


def test_overlay_colours():
    sk = skeletonize(strip())
    img = overlay(strip(), sk)
    assert img.shape == strip().shape + (3,)
    r, c = sk.path[-1]
    assert tuple(img[r, c]) == (30, 220, 30)


def test_bcc_bulk_coordination_is_eight():
    a = 2.85
    pos = bcc_sites((5 * a, 5 * a, 5 * a), a)
    counts = coordination_numbers(pos, default_cutoff(a), np.full(3, 5 * a), (True, True, True))
    assert np.all(counts == 8)


def test_default_cutoff_between_shells():
    a = 2.85
    assert math.sqrt(3) / 2 * a < default_cutoff(a) < a


def test_free_surface_atoms_flagged():
    a = 2.85
    box = np.array([6 * a, 6 * a, 3 * a])
    pos = bcc_sites(box, a)
    mask = coordination_filter(pos, default_cutoff(a), 6, box, (False, False, True))
    y = pos[:, 1]
    assert mask[y == y.min()].all() and mask[y == y.max()].all()
    inner = (y > y.min() + a) & (y < y.max() - a) & (pos[:, 0] > a) & (pos[:, 0] < box[0] - 2 * a)
    assert not mask[inner].any()


def test_extract_crack_on_cut_lattice():
    a = 2.85
    box = np.array([40 * a, 30 * a, 3 * a])
    pos = bcc_sites(box, a)
    ys = 15 * a + 0.25 * a
    # open a 4-plane slot from the left face to x = 45
    slot = (pos[:, 0] < 45.0) & (np.abs(pos[:, 1] - ys) < a)
    pos = pos[~slot]
    x = pos[:, 0]
    exclude = (x < 2 * a) | (x > box[0] - 2 * a) | (pos[:, 1] < 3 * a) | (pos[:, 1] > box[1] - 3 * a)
    ex = extract_crack(pos, box, (False, False, True), exclude, ExtractionSettings())
    assert ex.length == pytest.approx(45.0, abs=5.0)
    assert ex.front[1] == pytest.approx(ys, abs=3.0)
