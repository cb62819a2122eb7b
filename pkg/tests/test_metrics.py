import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import loop_sad_mse_mad, ref_connectivity, ref_gradient
from unimatte import metrics as M
from unimatte.report import to_csv, to_json, to_markdown


# --- independent references ----------------------------------------------------------


def _smooth_pair(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.clip(1.2 - np.hypot(yy - h / 2, xx - w / 2) / (0.35 * max(h, w)), 0, 1)
    pred = np.clip(base + 0.2 * (rng.random((h, w)) - 0.5), 0, 1)
    return pred, base


# --- oracle equivalence ----------------------------------------------------------------

def test_sad_mse_mad_match_loops():
    rng = np.random.default_rng(0)
    for _ in range(50):
        h, w = rng.integers(1, 33, 2)
        p, g = rng.random((h, w)), rng.random((h, w))
        s, q, a = loop_sad_mse_mad(p, g)
        assert abs(M.sad(p, g) - s) <= 1e-6
        assert abs(M.mse(p, g) - q) <= 1e-6
        assert abs(M.mad(p, g) - a) <= 1e-6


def test_gradient_matches_reference():
    rng = np.random.default_rng(1)
    cases = [_smooth_pair(rng, 16, 16), (rng.random((12, 9)), rng.random((12, 9)))]
    step = np.zeros((10, 14))
    step[:, 7:] = 1.0
    cases.append((step, np.roll(step, 2, axis=1)))
    for p, g in cases:
        assert abs(M.gradient_error(p, g) - ref_gradient(p, g)) <= 1e-5


def test_connectivity_matches_reference():
    rng = np.random.default_rng(2)
    cases = [_smooth_pair(rng, 16, 16), _smooth_pair(rng, 11, 7),
             (rng.random((10, 10)), rng.random((10, 10)))]
    g = np.zeros((16, 16))
    g[3:8, 3:8] = 1.0
    blob = g.copy()
    blob[12:15, 12:15] = 1.0  # isolated blob absent from gt
    cases.append((blob, g))
    for p, gt in cases:
        assert abs(M.connectivity_error(p, gt) - ref_connectivity(p, gt)) <= 1e-5
    assert M.connectivity_error(blob, g) > 0
    assert M.connectivity_error(blob, g) == pytest.approx(9 / 1000)


def test_filter_is_normalized():
    hx, hy = M.gaussian_derivative_filters()
    assert np.sum(hx * hx) == pytest.approx(1.0)
    np.testing.assert_array_equal(hx, hy.T)


def test_largest_component_tie_goes_to_first():
    m = np.zeros((5, 5), bool)
    m[0, 0:2] = True
    m[4, 3:5] = True
    out = M._largest_component(m)
    assert out[0, 0] and not out[4, 4]


# --- worked examples / invariants ----------------------------------------------------------

def test_identical_inputs_zero():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.random((16, 16))
        tri = np.full(a.shape, 0.5)
        r = M.evaluate_image(a, a, tri, "SO", "animal", "x")
        assert (r.sad, r.mse, r.mad, r.conn, r.grad, r.sad_transition) == (0, 0, 0, 0, 0, 0)
    z = np.zeros((8, 8))
    assert M.connectivity_error(z, z) == 0


def test_closed_form_values():
    p, g = np.zeros((100, 100)), np.ones((100, 100))
    assert (M.sad(p, g), M.mse(p, g), M.mad(p, g)) == (10.0, 1.0, 1.0)
    one_k = np.zeros((40, 25))
    assert M.sad(one_k, np.ones_like(one_k)) == 1.0
    assert M.gradient_error(np.full((9, 9), 0.2), np.full((9, 9), 0.7)) == pytest.approx(0, abs=1e-20)


def test_transition_sad():
    rng = np.random.default_rng(4)
    p, g = rng.random((12, 12)), rng.random((12, 12))
    assert M.transition_sad(p, g, np.zeros((12, 12))) == 0
    assert M.transition_sad(p, g, np.full((12, 12), 0.5)) == pytest.approx(M.sad(p, g))
    tri = np.zeros((12, 12))
    tri[4:8] = 0.5
    s = sum(abs(p[y, x] - g[y, x]) for y in range(4, 8) for x in range(12)) / 1000
    assert M.transition_sad(p, g, tri) == pytest.approx(s, abs=1e-12)
    with pytest.raises(ValueError):
        M.transition_sad(p, g, tri[:5])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    p, g = rng.random((8, 9)), rng.random((8, 9))
    tri = rng.choice([0.0, 0.5, 1.0], (8, 9))
    r = M.evaluate_image(p, g, tri, "NS", "plant")
    for v in (r.sad, r.mse, r.mad, r.conn, r.grad, r.sad_transition):
        assert v >= 0
    assert r.sad_transition <= r.sad + 1e-9
    assert M.sad(p, g) == M.sad(g, p) and M.mse(p, g) == M.mse(g, p) and M.mad(p, g) == M.mad(g, p)


def test_evaluate_image_composes_metrics():
    p, g = _smooth_pair(np.random.default_rng(5), 16, 16)
    tri = np.where(g > 0.9, 1.0, np.where(g < 0.1, 0.0, 0.5))
    r = M.evaluate_image(p, g, tri, "STM", "portrait", "id7")
    assert r.category == "human" and r.type == "STM" and (r.height, r.width) == (16, 16)
    assert r.sad == M.sad(p, g) and r.conn == M.connectivity_error(p, g)
    assert r.grad == M.gradient_error(p, g) and r.sad_transition == M.transition_sad(p, g, tri)
    with pytest.raises(ValueError):
        M.evaluate_image(p, g[:4], tri, "SO", "toy")
    with pytest.raises(ValueError):
        M.normalize_category("vehicle")


# --- aggregation -------------------------------------------------------------------------

def _rec(i, sad, typ, cat):
    return M.MetricRecord(f"im{i}", sad, sad / 10, sad / 20, sad * 2, sad * 3, sad / 2, typ, cat)


def test_aggregate_single_and_two_types():
    rep = M.aggregate([_rec(0, 1.0, "SO", "toy")])
    assert rep.whole["SAD"] == 1.0 and rep.type_sad["SO"] == 1.0 and rep.type_sad["Avg."] == 1.0
    assert math.isnan(rep.type_sad["STM"]) and rep.category_sad["Toy"] == 1.0
    rep = M.aggregate([_rec(0, 1.0, "SO", "toy"), _rec(1, 3.0, "NS", "fruit"), _rec(2, 2.0, "SO", "toy")])
    assert rep.type_sad["SO"] == 1.5 and rep.type_sad["NS"] == 3.0
    assert rep.type_sad["Avg."] == pytest.approx(2.25)
    assert rep.category_sad["Avg."] == pytest.approx(2.25)
    with pytest.raises(ValueError):
        M.aggregate([])


def test_aggregate_hand_computed_six():
    recs = [_rec(0, 1.0, "SO", "animal"), _rec(1, 2.0, "SO", "human"), _rec(2, 4.0, "SO", "furniture"),
            _rec(3, 3.0, "STM", "transparent"), _rec(4, 5.0, "STM", "toy"), _rec(5, 6.0, "NS", "plant")]
    rep = M.aggregate(recs[::-1])
    assert rep.whole["SAD"] == pytest.approx(21 / 6)
    assert rep.whole["MSE"] == pytest.approx(0.35)
    assert rep.transition_sad == pytest.approx(21 / 12)
    assert rep.type_sad == pytest.approx({"SO": 7 / 3, "STM": 4.0, "NS": 6.0, "Avg.": (7 / 3 + 4 + 6) / 3},
                                         nan_ok=True)
    assert rep.category_sad["Avg."] == pytest.approx(21 / 6)
    assert math.isnan(rep.category_sad["Fruit"])
    assert [r.image_id for r in rep.records] == [f"im{i}" for i in range(6)]


def test_report_serializers_are_order_independent():
    recs = [_rec(i, float(i + 1), t, c) for i, (t, c) in enumerate(
        [("SO", "animal"), ("STM", "toy"), ("NS", "plant")])]
    a, b = M.aggregate(recs), M.aggregate(recs[::-1])
    assert to_markdown(a) == to_markdown(b) and to_csv(a) == to_csv(b) and to_json(a) == to_json(b)
    md = to_markdown(a, label="X").splitlines()
    assert [c.strip() for c in md[2].split("|")[1:-1]] == [""] + list((
        "SAD", "MSE", "MAD", "Conn.", "Grad.", "SAD", "SO", "STM", "NS", "Avg.",
        "Animal", "Human", "Transp.", "Plant", "Furni.", "Toy", "Fruit", "Avg."))
    assert md[3].startswith("| X | 2.0000 |") and " - |" in md[3]
    assert '"Human": null' in to_json(a)
