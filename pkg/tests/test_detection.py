import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobilecharger.harness.detection import (DetectionEval, GroundTruth, Prediction,
                                             average_precision, detection_metrics, iou, match)

TOY_GT = [(0, 0, 10, 10), (20, 20, 30, 30), (40, 40, 50, 50)]
TOY_PRED = [
    ((0, 0, 10, 10), 0.9),       # hits GT 0
    ((100, 100, 110, 110), 0.8),  # stray
    ((20, 20, 30, 31), 0.7),     # hits GT 1, IoU 100/110
    ((200, 0, 210, 10), 0.6),    # stray
]


def test_toy_case_hand_computed():
    # ranked TP flags 1,0,1,0 -> precision 1, 1/2, 2/3, 1/2; recall 1/3, 1/3, 2/3, 2/3
    # interpolated envelope: 1 on (0, 1/3], 2/3 on (1/3, 2/3], nothing beyond
    # AP = 1/3 * 1 + 1/3 * 2/3 = 5/9
    ap, p, r = detection_metrics(DetectionEval(TOY_PRED, TOY_GT))
    assert abs(ap - 5 / 9) < 1e-12
    assert p == 0.5
    assert abs(r - 2 / 3) < 1e-12


def test_perfect_detector():
    e = DetectionEval([(g, 1.0) for g in TOY_GT], TOY_GT)
    assert detection_metrics(e) == (1.0, 1.0, 1.0)


def test_no_predictions():
    assert detection_metrics(DetectionEval([], TOY_GT)) == (0.0, 0.0, 0.0)


def test_no_ground_truth():
    assert detection_metrics(DetectionEval(TOY_PRED, [])) == (0.0, 0.0, 0.0)


def test_duplicate_detection_is_false_positive():
    e = DetectionEval([((0, 0, 10, 10), 0.9), ((0, 0, 10, 10), 0.8)], [(0, 0, 10, 10)])
    assert match(e) == [True, False]


def test_images_do_not_mix():
    e = DetectionEval([Prediction((0, 0, 10, 10), 0.9, image=1)],
                      [GroundTruth((0, 0, 10, 10), image=2)])
    assert match(e) == [False]


def test_iou():
    assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7)
    assert iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
    assert iou((0, 0, 1, 1), (0, 0, 1, 1)) == 1.0


def test_confidence_range():
    with pytest.raises(ValueError):
        Prediction((0, 0, 1, 1), 1.5)


def test_from_json():
    e = DetectionEval.from_json({
        "predictions": [{"bbox": p, "confidence": c} for p, c in TOY_PRED],
        "ground_truth": TOY_GT, "iou_threshold": 0.5})
    assert detection_metrics(e)[0] == pytest.approx(5 / 9)


def test_average_precision_monotone_envelope():
    # a later precision rise lifts earlier recall levels
    assert average_precision(np.array([0.5, 1.0]), np.array([0.5, 1.0])) == 1.0


box = st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 15), st.integers(1, 15)) \
    .map(lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))


@given(st.lists(box, min_size=1, max_size=6),
       st.lists(st.tuples(box, st.floats(0, 1)), max_size=8),
       st.floats(0.05, 0.95), st.floats(0.0, 0.5))
def test_ap_non_increasing_in_threshold(gts, preds, t, dt):
    lo = detection_metrics(DetectionEval(preds, gts, t))[0]
    hi = detection_metrics(DetectionEval(preds, gts, min(1.0, t + dt)))[0]
    assert hi <= lo + 1e-12
