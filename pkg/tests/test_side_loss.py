import math

import numpy as np
import pytest

from cfskit.geometry import BBox, expand, iou, shrink
from cfskit.side_loss import (
    LossHyperparams,
    LossWeights,
    finite_difference_subgradient,
    loss_weights,
    mean_side_loss,
    reference_report,
    side_loss,
    side_loss_subgradient,
    side_penalties,
    total_loss,
)

GT = BBox(20, 20, 40, 40)


def random_pair(rng):
    def box():
        x1 = float(rng.uniform(-50, 50))
        y1 = float(rng.uniform(-50, 50))
        return BBox(x1, y1, x1 + float(rng.uniform(1, 80)), y1 + float(rng.uniform(1, 80)))

    return box(), box()


class TestPenalties:
    def test_symmetric_overshoot(self):
        assert side_penalties(BBox(10, 10, 50, 50), GT).as_tuple() == (10, 10, 10, 10)

    def test_contained_prediction_is_free(self):
        assert side_penalties(BBox(25, 25, 35, 35), GT).as_tuple() == (0, 0, 0, 0)

    def test_x_only_overshoot(self):
        assert side_penalties(BBox(15, 20, 45, 40), GT).as_tuple() == (5, 0, 5, 0)

    def test_zero_iff_contained(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            pred, gt = random_pair(rng)
            pen = side_penalties(pred, gt)
            assert min(pen.as_tuple()) >= 0.0
            assert (pen.total() == 0.0) == gt.contains(pred)


class TestLoss:
    def test_worked_example(self):
        assert side_loss(BBox(10, 10, 50, 50), GT) == 40.0

    def test_identity_is_zero(self):
        assert side_loss(GT, GT) == 0.0

    def test_expand_family(self):
        # dyadic margins keep the four-term float sum exact
        for d in (0.0, 0.25, 1.0, 3.5, 7.0):
            assert side_loss(expand(GT, d), GT) == 4.0 * d

    def test_translation_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            pred, gt = random_pair(rng)
            tx, ty = float(rng.uniform(-40, 40)), float(rng.uniform(-40, 40))
            assert side_loss(pred.translate(tx, ty), gt.translate(tx, ty)) == pytest.approx(
                side_loss(pred, gt), abs=1e-9
            )

    def test_monotone_in_outward_perturbation(self):
        pred = BBox(18, 22, 41, 39)
        base = side_loss(pred, GT)
        assert side_loss(BBox(17, 22, 41, 39), GT) >= base
        assert side_loss(BBox(18, 21, 41, 39), GT) >= base
        assert side_loss(BBox(18, 22, 43, 39), GT) >= base
        assert side_loss(BBox(18, 22, 41, 45), GT) >= base

    def test_breaks_iou_preference_on_symmetric_margins(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            g = random_pair(rng)[0]
            d = float(rng.uniform(0.01, min(g.width, g.height) / 2 * 0.95))
            assert iou(expand(g, d), g) > iou(shrink(g, d), g)
            assert side_loss(expand(g, d), g) > 0.0 == side_loss(shrink(g, d), g)

    def test_mean_side_loss(self):
        pairs = [(BBox(10, 10, 50, 50), GT), (GT, GT)]
        assert mean_side_loss(pairs) == 20.0
        assert mean_side_loss([]) == 0.0


class TestSubgradient:
    def test_all_sides_active(self):
        assert side_loss_subgradient(BBox(10, 10, 50, 50), GT) == (-1, -1, 1, 1)

    def test_inactive_inside(self):
        assert side_loss_subgradient(BBox(25, 25, 35, 35), GT) == (0, 0, 0, 0)

    def test_x_sides_only(self):
        assert side_loss_subgradient(BBox(15, 20, 45, 40), GT) == (-1, 0, 1, 0)

    def test_zero_at_kinks(self):
        assert side_loss_subgradient(GT, GT) == (0, 0, 0, 0)

    def test_matches_central_differences_off_kinks(self):
        rng = np.random.default_rng(14)
        checked = 0
        while checked < 2000:
            pred, gt = random_pair(rng)
            args = (gt.x1 - pred.x1, gt.y1 - pred.y1, pred.x2 - gt.x2, pred.y2 - gt.y2)
            if min(abs(a) for a in args) <= 1e-2:
                continue
            fd = finite_difference_subgradient(pred, gt, step=1e-3)
            an = side_loss_subgradient(pred, gt)
            assert max(abs(a - b) for a, b in zip(fd, an)) < 1e-6
            checked += 1


class TestWeights:
    def test_default_table(self):
        w = loss_weights(LossHyperparams(num_cls=4))
        assert w.lambda1 == pytest.approx(0.5, abs=1e-12)
        assert w.lambda2 == pytest.approx(1.0, abs=1e-12)
        assert w.lambda3 == pytest.approx(0.025, abs=1e-12)
        assert w.lambda4 == pytest.approx(0.5 / 30, abs=1e-12)

    def test_six_layers_eighty_classes(self):
        w = loss_weights(LossHyperparams(nl=6, num_cls=80))
        assert w.as_tuple() == pytest.approx((0.25, 0.5, 0.25, 0.25 / 30), abs=1e-12)

    def test_double_image_size_quadruples_lambda2(self):
        w = loss_weights(LossHyperparams(imgsize=1280.0, num_cls=4))
        assert w.lambda2 == pytest.approx(4.0, abs=1e-12)

    def test_lambda4_tied_to_lambda1(self):
        rng = np.random.default_rng(15)
        for _ in range(300):
            h = LossHyperparams(
                box=float(rng.uniform(0.05, 4)),
                obj=float(rng.uniform(0.05, 4)),
                cls=float(rng.uniform(0.05, 4)),
                nl=int(rng.integers(1, 9)),
                imgsize=float(rng.integers(64, 2049)),
                num_cls=int(rng.integers(1, 200)),
            )
            w = loss_weights(h)
            assert w.lambda4 == w.lambda1 / 30.0

    def test_weights_invariant_enforced(self):
        with pytest.raises(ValueError):
            LossWeights(0.5, 1.0, 0.025, 0.5)

    def test_invalid_hyperparams(self):
        with pytest.raises(ValueError):
            LossHyperparams(num_cls=0)
        with pytest.raises(ValueError):
            LossHyperparams(nl=0, num_cls=4)
        with pytest.raises(ValueError):
            LossHyperparams(box=-1, num_cls=4)


class TestTotalLoss:
    def test_zero(self):
        w = loss_weights(LossHyperparams(num_cls=4))
        assert total_loss(0, 0, 0, 0, w) == 0.0

    def test_unit_components(self):
        w = loss_weights(LossHyperparams(num_cls=4))
        assert total_loss(1, 1, 1, 1, w) == pytest.approx(1.5416667, abs=1e-6)

    def test_side_term_alone(self):
        w = LossWeights(0.5, 1.0, 0.025, 1 / 60)
        assert total_loss(0, 0, 0, 30, w) == pytest.approx(0.5, abs=1e-12)

    def test_rejects_non_finite(self):
        w = loss_weights(LossHyperparams(num_cls=4))
        with pytest.raises(ValueError):
            total_loss(math.nan, 0, 0, 0, w)
        with pytest.raises(ValueError):
            total_loss(0, math.inf, 0, 0, w)


class TestReferenceReport:
    def test_deterministic(self):
        assert reference_report() == reference_report()

    def test_contains_weight_row_and_examples(self):
        report = reference_report(num_cls=4)
        assert "0.5 1.0 0.025 0.0166667" in report
        assert "loss=40.0" in report
        assert "tolerance 1e-6" in report
