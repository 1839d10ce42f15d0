import pytest

from thermeval.bench import BenchAborted, LatencyStats, bench_detector, compare_modes
from thermeval.detector import MockDetector, MockNoise, StubDetector, ViewKey
from thermeval.formats import ClassMap, DatasetManifest, ImageEntry
from thermeval.geometry import BBox, GroundTruthBox
from thermeval.metrics import EvalConfig
from thermeval.protocols import TTA, TTNA

CM = ClassMap()
IMAGES = [(f"img{i}", (640.0, 480.0)) for i in range(4)]


class TestLatencyStats:
    def test_fps_definition(self):
        stats = LatencyStats(n=10, mean_ms=11.0, median_ms=11.0, p95_ms=12.0)
        assert stats.fps == 1000.0 / stats.mean_ms

    def test_ordering_invariant(self):
        with pytest.raises(ValueError):
            LatencyStats(n=1, mean_ms=5.0, median_ms=6.0, p95_ms=5.5)

    def test_needs_runs(self):
        with pytest.raises(ValueError):
            LatencyStats(n=0, mean_ms=1.0, median_ms=1.0, p95_ms=1.0)


class TestBenchDetector:
    def test_fake_clock_measures_exactly(self):
        ticks = iter(range(0, 10_000))

        def clock():
            return next(ticks) * 0.010  # 10 ms per tick

        stats = bench_detector(StubDetector(0.0), IMAGES, warmup=3, iters=10, clock=clock)
        assert stats.n == 10
        assert stats.mean_ms == pytest.approx(10.0)
        assert stats.median_ms <= stats.p95_ms

    def test_zero_work_stub_positive(self):
        stats = bench_detector(StubDetector(0.0), IMAGES, warmup=2, iters=20)
        assert stats.mean_ms > 0
        assert stats.median_ms <= stats.p95_ms

    def test_sleeping_stub_close_to_sleep(self):
        stats = bench_detector(StubDetector(8.0), IMAGES, warmup=2, iters=15)
        assert 8.0 <= stats.mean_ms <= 10.0

    def test_failure_aborts_with_partial_stats(self):
        class Flaky:
            name = "flaky"

            def __init__(self):
                self.calls = 0

            def supports_view(self, view_id):
                return True

            def detect(self, view, view_transform, canvas):
                self.calls += 1
                if self.calls > 7:  # fails after warmup + 5 measured
                    raise RuntimeError("boom")
                return []

        with pytest.raises(BenchAborted) as excinfo:
            bench_detector(Flaky(), IMAGES, warmup=2, iters=20)
        assert excinfo.value.partial is not None
        assert excinfo.value.partial.n == 5
        assert "5/20" in str(excinfo.value)

    def test_validation(self):
        with pytest.raises(ValueError):
            bench_detector(StubDetector(0.0), IMAGES, iters=0)
        with pytest.raises(ValueError):
            bench_detector(StubDetector(0.0), [], iters=5)


class TestCompareModes:
    def test_noiseless_all_modes_tie(self):
        manifest = DatasetManifest(
            CM, tuple(ImageEntry(f"img{i}", 640, 480) for i in range(3))
        )
        ground = {
            e.id: [GroundTruthBox(BBox(100, 100, 220, 220), 3)] for e in manifest.images
        }
        detector = MockDetector(ground, MockNoise.noiseless(), name="mock")
        comparison = compare_modes(
            [("ttna", detector, TTNA()), ("tta", detector, TTA())],
            manifest,
            EvalConfig(),
            ground_truth=ground,
        )
        assert [r.mean_ap for r in comparison.rows] == [100.0, 100.0]
        assert comparison.best["map"] == (0, 1)  # ties all flagged
        assert comparison.best["precision"] == (0, 1)
        assert len(comparison.best["mean_latency_ms"]) >= 1
