import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import brute_dilate, brute_erode
from unimatte.imageio import decode_rep, encode_rep, read_rep, write_rep
from unimatte.semantics import (ImageType, classes_to_rep, classify_type, rep_to_classes,
                                semantic_iou_accuracy, trimap_from_alpha, unify)

VALUES = (0.0, 0.5, 1.0)


def closed_form(t, itype):
    if itype is ImageType.SO:
        return t
    if itype is ImageType.STM:
        return 1.5 * t - t ** 2
    return 0.5


def test_unify_exhaustive():
    t0 = time.perf_counter()
    for itype in ImageType:
        for t in VALUES:
            got = unify(np.array([[t]]), itype)[0, 0]
            assert got == closed_form(t, itype), (t, itype)
    grid = np.array(VALUES * 3).reshape(3, 3)
    assert 1.0 not in unify(grid, "STM")
    assert np.all(unify(grid, "NS") == 0.5)
    assert time.perf_counter() - t0 < 1.0


def test_unify_examples():
    assert unify(np.array([[0.5]]), "SO")[0, 0] == 0.5
    assert unify(np.array([[1.0]]), "STM")[0, 0] == 0.5
    assert unify(np.array([[0.0]]), "STM")[0, 0] == 0.0
    assert unify(np.array([[1.0]]), "NS")[0, 0] == 0.5
    with pytest.raises(ValueError):
        unify(np.array([[0.3]]), "SO")
    with pytest.raises(ValueError):
        unify(np.array([[0.5]]), "XX")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(VALUES), min_size=1, max_size=30), st.sampled_from(list(ImageType)))
def test_unify_idempotent(vals, itype):
    t = np.array(vals, np.float32)[None]
    u = unify(t, itype)
    if itype is not ImageType.STM:
        np.testing.assert_array_equal(unify(u, itype), u)
    else:
        assert 1.0 not in u


# --- trimap -----------------------------------------------------------------------


def square_alpha(n=20, lo=6, hi=14):
    a = np.zeros((n, n), np.float32)
    a[lo:hi, lo:hi] = 1.0
    return a


def test_trimap_radius_zero_has_no_band():
    a = square_alpha()
    t = trimap_from_alpha(a, 0, 0)
    assert not np.any(t == 0.5)
    np.testing.assert_array_equal(t, a)


def test_trimap_matches_brute_force_morphology():
    rng = np.random.default_rng(0)
    for trial in range(6):
        a = (rng.random((14, 15)) > 0.4).astype(np.float32)
        if trial % 2:
            a = np.pad(square_alpha(14, 3, 11), ((0, 0), (0, 1)))
        r_e, r_d = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        t = trimap_from_alpha(a, r_e, r_d)
        fg = brute_erode(a >= 0.95, r_e)
        support = brute_dilate(a > 0.05, r_d)
        expect = np.full(a.shape, 0.5, np.float32)
        expect[~support] = 0
        expect[fg] = 1
        np.testing.assert_array_equal(t, expect)


def test_trimap_square_radius_three_shell():
    a = square_alpha()
    t = trimap_from_alpha(a, 3, 3)
    assert np.all(a[t == 1] == 1)
    assert np.all(a[t == 0] == 0)
    band = t == 0.5
    # 3-px shell on each side of the square edge, along the middle row
    row = band[10]
    assert row[3:9].all() and row[11:17].all()
    assert not row[:3].any() and not row[9:11].any() and not row[17:].any()


def test_trimap_all_zero():
    assert not trimap_from_alpha(np.zeros((8, 8)), 3, 3).any()


def test_trimap_monotone_in_radius():
    a = square_alpha(32, 8, 24)
    a[12:20, 20:26] = 0.5  # soft lobe
    prev = None
    for r in range(0, 7):
        band = trimap_from_alpha(a, r, r) == 0.5
        if prev is not None:
            assert np.all(band[prev])
            assert band.sum() >= prev.sum()
        prev = band


def test_trimap_rejects_bad_input():
    with pytest.raises(ValueError):
        trimap_from_alpha(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        trimap_from_alpha(np.zeros((4, 4)), -1, 0)


# --- type classification -----------------------------------------------------------

def test_classify_type():
    a = np.zeros(100, np.float32)
    a[:40] = 1
    assert classify_type(a.reshape(10, 10)) is ImageType.SO
    assert classify_type(np.full((10, 10), 0.5)) is ImageType.NS
    b = np.zeros((10, 10), np.float32)
    b[2:8, 2:8] = np.linspace(0.1, 0.9, 36).reshape(6, 6)
    f1 = np.mean(b >= 0.95)
    f0 = np.mean(b <= 0.05)
    assert f0 >= 0.05 and f1 < 0.05
    assert classify_type(b) is ImageType.STM


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_classify_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    a = np.clip(rng.random((12, 12)) * 1.4 - 0.2, 0, 1).astype(np.float32)
    perm = rng.permutation(a.ravel()).reshape(a.shape)
    assert classify_type(a) is classify_type(perm)


# --- class encoding and IoU ------------------------------------------------------------

def test_class_bijection():
    u = np.array([0.0, 0.5, 1.0])
    np.testing.assert_array_equal(rep_to_classes(u), [0, 1, 2])
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = rng.choice(VALUES, size=(5, 7)).astype(np.float32)
        np.testing.assert_array_equal(classes_to_rep(rep_to_classes(r)), r)
    with pytest.raises(ValueError):
        rep_to_classes(np.array([0.2]))
    with pytest.raises(ValueError):
        classes_to_rep(np.array([3]))


def test_iou_accuracy():
    m = np.array([[0, 1, 2], [2, 1, 0]])
    assert semantic_iou_accuracy(m, m) == (1.0, 1.0)
    assert semantic_iou_accuracy(np.zeros((2, 2), int), np.full((2, 2), 2)) == (0.0, 0.0)
    iou, acc = semantic_iou_accuracy(np.array([0, 0, 2, 2]), np.array([0, 2, 2, 0]))
    assert iou == pytest.approx(1 / 3) and acc == 0.5
    with pytest.raises(ValueError):
        semantic_iou_accuracy(np.zeros(3), np.zeros(4))


def test_rep_png_round_trip(tmp_path):
    u = np.array([[0, 0.5, 1], [1, 0.5, 0]], np.float32)
    np.testing.assert_array_equal(encode_rep(u), [[0, 128, 255], [255, 128, 0]])
    np.testing.assert_array_equal(decode_rep(encode_rep(u)), u)
    write_rep(tmp_path / "u.png", u)
    np.testing.assert_array_equal(read_rep(tmp_path / "u.png"), u)
    with pytest.raises(ValueError, match="pixel code 7"):
        decode_rep(np.array([[7]]))
