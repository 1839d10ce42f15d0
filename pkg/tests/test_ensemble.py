import time
from itertools import combinations

import numpy as np
import pytest

from thermeval.detector import FileDetector, MockDetector, MockNoise, StubDetector
from thermeval.ensemble import (
    EnsembleConfig,
    EnsembleMemberError,
    ensemble_detect,
    select_best_subset,
)
from thermeval.formats import ClassMap, DatasetManifest, DetectionRecord, ImageEntry
from thermeval.geometry import BBox, Detection, GroundTruthBox
from thermeval.metrics import EvalConfig, evaluate
from thermeval.protocols import TTME
from thermeval.tta import NmsMerge, WeightedMerge

CM = ClassMap()
CANVAS = (640.0, 480.0)


def gt(x0, y0, x1, y1, class_id=3):
    return GroundTruthBox(BBox(x0, y0, x1, y1), class_id)


def rec(image_id, x0, y0, x1, y1, score, class_id=3):
    return DetectionRecord(image_id, class_id, score, BBox(x0, y0, x1, y1))


def _manifest(n):
    return DatasetManifest(CM, tuple(ImageEntry(f"img{i}", 640, 480) for i in range(n)))


class TestEnsembleDetect:
    def test_single_member_passthrough(self):
        ground = {"img0": [gt(10, 10, 60, 60), gt(100, 100, 200, 200, 5)]}
        member = MockDetector(ground, MockNoise.noiseless(), name="m0")
        cfg = EnsembleConfig(members=(member,))
        out = ensemble_detect(cfg, "img0", CANVAS)
        assert [d.bbox for d in out] == [g.bbox for g in ground["img0"]]

    def test_duplicate_noiseless_members_fuse_to_one(self):
        ground = {"img0": [gt(10, 10, 60, 60), gt(100, 100, 200, 200, 5)]}
        a = MockDetector(ground, MockNoise.noiseless(), name="a")
        b = MockDetector(ground, MockNoise.noiseless(), name="b")
        single = ensemble_detect(EnsembleConfig(members=(a,)), "img0", CANVAS)
        double = ensemble_detect(EnsembleConfig(members=(a, b)), "img0", CANVAS)
        assert single == double

    def test_complementary_misses_union(self):
        full = [gt(10, 10, 60, 60), gt(300, 300, 400, 400)]
        ids = ["img0"]
        a = FileDetector([rec("img0", 10, 10, 60, 60, 0.9)], ids, name="a")
        b = FileDetector([rec("img0", 300, 300, 400, 400, 0.8)], ids, name="b")
        out = ensemble_detect(EnsembleConfig(members=(a, b)), "img0", CANVAS)
        assert len(out) == 2
        boxes = {d.bbox.as_tuple() for d in out}
        assert (10.0, 10.0, 60.0, 60.0) in boxes
        assert (300.0, 300.0, 400.0, 400.0) in boxes

    def test_member_failure_named(self):
        bad = MockDetector({}, MockNoise.noiseless(), name="broken")
        with pytest.raises(EnsembleMemberError, match="broken"):
            ensemble_detect(EnsembleConfig(members=(bad,)), "img0", CANVAS)

    def test_weights_scale_and_clamp(self):
        ids = ["img0"]
        a = FileDetector([rec("img0", 0, 0, 10, 10, 0.6)], ids, name="a")
        out = ensemble_detect(
            EnsembleConfig(members=(a,), weights=(1.5,)), "img0", CANVAS
        )
        assert out[0].score == pytest.approx(0.9)
        out = ensemble_detect(
            EnsembleConfig(members=(a,), weights=(2.0,)), "img0", CANVAS
        )
        assert out[0].score == 1.0  # clamped

    def test_order_invariance_with_distinct_scores(self):
        ids = ["img0"]
        a = FileDetector([rec("img0", 0, 0, 10, 10, 0.9)], ids, name="a")
        b = FileDetector([rec("img0", 1, 0, 11, 10, 0.7)], ids, name="b")
        ab = ensemble_detect(EnsembleConfig(members=(a, b)), "img0", CANVAS)
        ba = ensemble_detect(EnsembleConfig(members=(b, a)), "img0", CANVAS)
        assert {d.bbox.as_tuple() for d in ab} == {d.bbox.as_tuple() for d in ba}

    def test_latency_additivity(self):
        members = tuple(StubDetector(5.0, name=f"s{i}") for i in range(2))
        single = EnsembleConfig(members=members[:1])
        double = EnsembleConfig(members=members)
        start = time.perf_counter()
        for _ in range(10):
            ensemble_detect(single, "img", CANVAS)
        t1 = time.perf_counter() - start
        start = time.perf_counter()
        for _ in range(10):
            ensemble_detect(double, "img", CANVAS)
        t2 = time.perf_counter() - start
        assert 0.8 * 2 <= t2 / t1 <= 1.3 * 2

    def test_members_can_wrap_tta(self):
        from thermeval.tta import TtaConfig

        ground = {"img0": [gt(100, 100, 220, 220), gt(400, 250, 500, 350, 5)]}
        member = MockDetector(ground, MockNoise.noiseless(), name="m")
        plain = ensemble_detect(EnsembleConfig(members=(member,)), "img0", CANVAS)
        wrapped = ensemble_detect(
            EnsembleConfig(members=(member,), tta=TtaConfig()), "img0", CANVAS
        )
        assert len(wrapped) == len(plain)
        for a, b in zip(sorted(wrapped, key=lambda d: d.bbox.x_min),
                        sorted(plain, key=lambda d: d.bbox.x_min)):
            from thermeval.geometry import iou as _iou

            assert _iou(a.bbox, b.bbox) >= 0.99

    def test_validation(self):
        with pytest.raises(ValueError):
            EnsembleConfig(members=())
        a = StubDetector(0.0)
        with pytest.raises(ValueError):
            EnsembleConfig(members=(a,), weights=(0.0,))
        with pytest.raises(ValueError):
            EnsembleConfig(members=(a,), weights=(1.0, 1.0))


class TestSelectBestSubset:
    def _world(self, rng, n_images=4, boxes_per_image=3):
        ground = {}
        for i in range(n_images):
            boxes = []
            for _ in range(boxes_per_image):
                x = rng.uniform(40, 440)
                y = rng.uniform(40, 300)
                w, h = rng.uniform(30, 80, 2)
                boxes.append(gt(x, y, x + w, y + h, class_id=int(rng.integers(0, 7))))
            ground[f"img{i}"] = boxes
        return ground

    def test_single_candidate(self):
        rng = np.random.default_rng(31)
        ground = self._world(rng)
        manifest = _manifest(4)
        candidate = MockDetector(ground, MockNoise.noiseless(), name="only")
        result = select_best_subset([candidate], manifest, ground_truth=ground)
        assert result.best.members == (candidate,)
        assert result.best.mean_ap == 1.0

    def test_perfect_beats_blind(self):
        rng = np.random.default_rng(32)
        ground = self._world(rng)
        manifest = _manifest(4)
        perfect = MockDetector(ground, MockNoise.noiseless(), name="perfect")
        blind = MockDetector(ground, MockNoise(p_miss=0.9, global_seed=1), name="blind")
        result = select_best_subset(
            [perfect, blind], manifest, max_size=2, ground_truth=ground
        )
        assert 0 in result.best.indices  # the perfect mock is in the winner

    def test_matches_exhaustive_reevaluation(self):
        rng = np.random.default_rng(33)
        ground = self._world(rng, n_images=3)
        manifest = _manifest(3)
        candidates = [
            MockDetector(ground, MockNoise(p_miss=p, global_seed=s), name=f"m{s}")
            for p, s in ((0.5, 1), (0.4, 2), (0.6, 3))
        ]
        result = select_best_subset(candidates, manifest, max_size=3, ground_truth=ground)

        # independent exhaustive sweep over all 7 subsets
        best_ap, best_idx = -1.0, None
        for size in (1, 2, 3):
            for idx in combinations(range(3), size):
                cfg = EnsembleConfig(members=tuple(candidates[i] for i in idx))
                report = evaluate(manifest, None, TTME(cfg), EvalConfig(), ground_truth=ground)
                if report.mean_ap > best_ap:
                    best_ap, best_idx = report.mean_ap, idx
        assert result.best.indices == best_idx
        assert result.best.mean_ap == pytest.approx(best_ap, abs=1e-12)
        assert len(result.ranking) == 7

    def test_best_at_least_best_singleton(self):
        rng = np.random.default_rng(34)
        ground = self._world(rng)
        manifest = _manifest(4)
        candidates = [
            MockDetector(ground, MockNoise(p_miss=p, global_seed=s), name=f"m{s}")
            for p, s in ((0.3, 4), (0.2, 5))
        ]
        result = select_best_subset(candidates, manifest, max_size=2, ground_truth=ground)
        for i, c in enumerate(candidates):
            solo = evaluate(
                manifest, None, TTME(EnsembleConfig(members=(c,))), EvalConfig(),
                ground_truth=ground,
            )
            assert result.best.mean_ap >= solo.mean_ap - 1e-12

    def test_complementary_pair_beats_members_on_recall(self):
        ids = ["img0", "img1"]
        manifest = _manifest(2)
        ground = {
            "img0": [gt(10, 10, 60, 60), gt(300, 300, 400, 400)],
            "img1": [gt(100, 100, 160, 160), gt(500, 100, 600, 200)],
        }
        # A misses the second box everywhere, B misses the first
        a = FileDetector(
            [rec("img0", 10, 10, 60, 60, 0.9), rec("img1", 100, 100, 160, 160, 0.9)],
            ids, name="a",
        )
        b = FileDetector(
            [rec("img0", 300, 300, 400, 400, 0.9), rec("img1", 500, 100, 600, 200, 0.9)],
            ids, name="b",
        )
        solo_a = evaluate(manifest, None, TTME(EnsembleConfig(members=(a,))), ground_truth=ground)
        solo_b = evaluate(manifest, None, TTME(EnsembleConfig(members=(b,))), ground_truth=ground)
        pair = evaluate(manifest, None, TTME(EnsembleConfig(members=(a, b))), ground_truth=ground)
        assert pair.recall > solo_a.recall
        assert pair.recall > solo_b.recall

    def test_candidate_cap(self):
        a = StubDetector(0.0)
        with pytest.raises(ValueError):
            select_best_subset([a] * 9, _manifest(1))
        with pytest.raises(ValueError):
            select_best_subset([], _manifest(1))
