import numpy as np
import pytest

from segworker.metrics import compute_miou


def sq(y0, x0, size, shape=(10, 10), value=1):
    m = np.zeros(shape, dtype=np.int32)
    m[y0:y0 + size, x0:x0 + size] = value
    return m


def test_identical_masks():
    assert compute_miou([sq(2, 2, 4)], [sq(2, 2, 4)], 2) == 1.0


def test_disjoint_equal_area():
    assert compute_miou([sq(0, 0, 3)], [sq(6, 6, 3)], 2) == 0.0


def test_half_overlapping_equal_squares():
    # 4x4 squares offset by half: intersection 8, union 24
    assert compute_miou([sq(0, 0, 4)], [sq(0, 2, 4)], 2) == pytest.approx(1 / 3)


def test_both_empty_is_one():
    empty = np.zeros((6, 6), dtype=np.int32)
    assert compute_miou([empty], [empty], 2) == 1.0


def test_one_empty_is_zero():
    empty = np.zeros((10, 10), dtype=np.int32)
    assert compute_miou([empty], [sq(2, 2, 3)], 2) == 0.0
    assert compute_miou([sq(2, 2, 3)], [empty], 2) == 0.0


def test_mean_over_images():
    preds = [sq(2, 2, 4), sq(0, 0, 3)]
    gts = [sq(2, 2, 4), sq(6, 6, 3)]
    assert compute_miou(preds, gts, 2) == pytest.approx(0.5)


def test_multiclass_present_classes_only():
    gt = np.zeros((10, 10), dtype=np.int32)
    gt[0:2, 0:2] = 1
    gt[5:7, 5:7] = 2
    pred = gt.copy()  # class 3 of n_classes=4 absent everywhere: excluded
    assert compute_miou([pred], [gt], 4) == 1.0
    pred2 = gt.copy()
    pred2[5:7, 5:7] = 0  # class 2 missed entirely
    assert compute_miou([pred2], [gt], 4) == pytest.approx(0.5)


def test_label_out_of_range_rejected():
    with pytest.raises(ValueError, match="n_classes"):
        compute_miou([sq(0, 0, 2, value=5)], [sq(0, 0, 2)], 2)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="mismatch"):
        compute_miou([np.zeros((4, 4))], [np.zeros((5, 5))], 2)


def test_reported_range():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred = (rng.random((8, 8)) > 0.5).astype(np.int32)
        gt = (rng.random((8, 8)) > 0.5).astype(np.int32)
        assert 0.0 <= compute_miou([pred], [gt], 2) <= 1.0
