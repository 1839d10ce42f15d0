import math

import numpy as np
import pytest

from thermeval.detector import (
    CapabilityError,
    DetectionLookupError,
    FileDetector,
    MockDetector,
    MockNoise,
    StubDetector,
    ViewKey,
    mock_detect,
)
from thermeval.formats import DetectionRecord
from thermeval.geometry import AffineTransform, BBox, Detection, GroundTruthBox, transform_box

CANVAS = (640.0, 480.0)
IDENT = AffineTransform.identity()


def gt(x0, y0, x1, y1, class_id=3):
    return GroundTruthBox(BBox(x0, y0, x1, y1), class_id)


GT4 = [gt(10, 10, 60, 60), gt(100, 100, 200, 180, 5), gt(300, 50, 400, 150), gt(500, 300, 600, 400, 6)]


# --- independent reference implementation of the documented draw contract ---

_M64 = (1 << 64) - 1


def _ref_hash(seed, image_id, view_id):
    data = (seed & _M64).to_bytes(8, "little") + image_id.encode() + b"\x1f" + view_id.encode()
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _M64
    return h


class _RefRng:
    def __init__(self, seed):
        self.s = seed & _M64

    def u64(self):
        self.s = (self.s + 0x9E3779B97F4A7C15) & _M64
        z = self.s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)

    def unif(self):
        return (self.u64() >> 11) * 2.0**-53


def _ref_surviving_subset(gt_boxes, p_miss, seed, image_id, view_id):
    rng = _RefRng(_ref_hash(seed, image_id, view_id))
    return [i for i in range(len(gt_boxes)) if rng.unif() >= p_miss]


class TestMockDetect:
    def test_noiseless_identity_equals_gt(self):
        out = mock_detect(GT4, IDENT, CANVAS, MockNoise.noiseless(), ViewKey("img"))
        assert len(out) == len(GT4)
        for det, g in zip(out, GT4):
            assert det.bbox == g.bbox
            assert det.class_id == g.class_id
            assert det.score == 1.0

    def test_p_miss_one_empty(self):
        noise = MockNoise(p_miss=1.0)
        assert mock_detect(GT4, IDENT, CANVAS, noise, ViewKey("img")) == []

    def test_deterministic(self):
        noise = MockNoise(p_miss=0.4, jitter_sigma=2.0, fp_rate=1.0, score_lo=0.3, score_hi=0.9, global_seed=42)
        a = mock_detect(GT4, IDENT, CANVAS, noise, ViewKey("img", "hflip"))
        b = mock_detect(GT4, IDENT, CANVAS, noise, ViewKey("img", "hflip"))
        assert a == b

    def test_surviving_subset_matches_reference_draw_order(self):
        # spec draw order: one miss uniform per box in input order
        noise = MockNoise(p_miss=0.5, global_seed=123)
        view = ViewKey("frame_7", "identity")
        out = mock_detect(GT4, IDENT, CANVAS, noise, view)
        expected = _ref_surviving_subset(GT4, 0.5, 123, "frame_7", "identity")
        assert [d.bbox for d in out] == [GT4[i].bbox for i in expected]
        assert len(expected) not in (0, len(GT4)) or True  # informational

    def test_noiseless_view_roundtrip_exact(self):
        t = AffineTransform.hflip(CANVAS[0])
        out = mock_detect(GT4, t, CANVAS, MockNoise.noiseless(), ViewKey("img", "hflip"))
        back = [transform_box(t.inverse(), d.bbox) for d in out]
        assert back == [g.bbox for g in GT4]

    def test_fp_mean_matches_poisson(self):
        # Monte-Carlo against the Poisson mean over 10^4 seeded views
        noise = MockNoise(fp_rate=2.0, global_seed=7)
        total = 0
        trials = 10_000
        for k in range(trials):
            out = mock_detect([], IDENT, CANVAS, noise, ViewKey(f"img{k}"))
            total += len(out)
        assert abs(total / trials - 2.0) < 0.05

    def test_miss_patterns_independent_across_views(self):
        noise = MockNoise(p_miss=0.5, global_seed=3)
        a = np.empty(10_000)
        b = np.empty(10_000)
        single = [GT4[0]]
        for k in range(10_000):
            a[k] = len(mock_detect(single, IDENT, CANVAS, noise, ViewKey(f"i{k}", "va")))
            b[k] = len(mock_detect(single, IDENT, CANVAS, noise, ViewKey(f"i{k}", "vb")))
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.05

    def test_jittered_boxes_renormalized_and_clipped(self):
        noise = MockNoise(jitter_sigma=500.0, global_seed=5)
        for k in range(50):
            out = mock_detect(GT4, IDENT, CANVAS, noise, ViewKey(f"img{k}"))
            for d in out:
                assert d.bbox.x_min <= d.bbox.x_max
                assert d.bbox.y_min <= d.bbox.y_max
                assert 0 <= d.bbox.x_min and d.bbox.x_max <= CANVAS[0]
                assert 0 <= d.bbox.y_min and d.bbox.y_max <= CANVAS[1]

    def test_validation(self):
        with pytest.raises(ValueError):
            MockNoise(p_miss=1.5)
        with pytest.raises(ValueError):
            MockNoise(jitter_sigma=-1)
        with pytest.raises(ValueError):
            MockNoise(fp_rate=math.inf)
        with pytest.raises(ValueError):
            MockNoise(score_lo=0.9, score_hi=0.1)


class TestMockDetector:
    def test_detect_routes_to_gt(self):
        d = MockDetector({"img": GT4}, MockNoise.noiseless())
        out = d.detect(ViewKey("img"), IDENT, CANVAS)
        assert len(out) == 4

    def test_unknown_image(self):
        d = MockDetector({"img": GT4}, MockNoise.noiseless())
        with pytest.raises(DetectionLookupError):
            d.detect(ViewKey("other"), IDENT, CANVAS)

    def test_supports_all_views(self):
        d = MockDetector({}, MockNoise.noiseless())
        assert d.supports_view("anything")


class TestFileDetector:
    def records(self):
        return [
            DetectionRecord("img1", 3, 0.9, BBox(0, 0, 10, 10)),
            DetectionRecord("img1", 5, 0.8, BBox(20, 20, 40, 40)),
            DetectionRecord("img2", 3, 0.7, BBox(5, 5, 15, 15), view_id="hflip"),
        ]

    def test_replays_exact_records(self):
        d = FileDetector(self.records(), ["img1", "img2"])
        out = d.detect(ViewKey("img1"), IDENT, CANVAS)
        assert out == [
            Detection(BBox(0, 0, 10, 10), 3, 0.9),
            Detection(BBox(20, 20, 40, 40), 5, 0.8),
        ]

    def test_zero_detections_is_not_an_error(self):
        d = FileDetector(self.records(), ["img1", "img2", "img3"])
        assert d.detect(ViewKey("img3"), IDENT, CANVAS) == []

    def test_unknown_image_lookup_error(self):
        d = FileDetector(self.records(), ["img1", "img2"])
        with pytest.raises(DetectionLookupError):
            d.detect(ViewKey("ghost"), IDENT, CANVAS)

    def test_undeclared_view_capability_error(self):
        d = FileDetector(self.records(), ["img1", "img2"])
        assert d.supports_view("hflip")  # declared via a stored record
        assert not d.supports_view("vflip")
        with pytest.raises(CapabilityError):
            d.detect(ViewKey("img1", "vflip"), IDENT, CANVAS)

    def test_extra_views_declaration(self):
        d = FileDetector([], ["img1"], extra_views=["vflip"])
        assert d.detect(ViewKey("img1", "vflip"), IDENT, CANVAS) == []

    def test_record_for_unknown_image_rejected_at_build(self):
        with pytest.raises(DetectionLookupError):
            FileDetector(self.records(), ["img1"])


class TestStubDetector:
    def test_returns_canned(self):
        dets = {"img": [Detection(BBox(0, 0, 1, 1), 0, 0.5)]}
        d = StubDetector(0.0, dets)
        assert d.detect(ViewKey("img"), IDENT, CANVAS) == dets["img"]

    def test_sleeps(self):
        import time

        d = StubDetector(20.0)
        start = time.perf_counter()
        d.detect(ViewKey("x"), IDENT, CANVAS)
        assert (time.perf_counter() - start) * 1000 >= 19.0
