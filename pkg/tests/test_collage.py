"""Evidence integration across collage images."""

import numpy as np
import pytest

from gazepool.collage import (
    AttributeCollageResult,
    ImageEvidence,
    IntegrationConfig,
    integrate,
    run_collage,
    run_collage_attributes,
)
from gazepool.encoding import EncodingConfig, uniform_density_map
from gazepool.errors import PipelineError
from gazepool.pooling import predict_image
from gazepool.types import (
    ClassifierHead,
    CollageEntry,
    CollageLayout,
    FeatureMap,
    Fixation,
    FixationLog,
    SearchTask,
)

LABELS = ("a", "b")


def _ev(image_id, posterior, duration_ms, count=1):
    return ImageEvidence(
        image_id=image_id,
        posterior=np.asarray(posterior, dtype=np.float64),
        duration_ms=duration_ms,
        fixation_count=count,
    )


class TestIntegrate:
    def test_single_image_passthrough(self):
        cfg = IntegrationConfig(duration_weighting=True)
        res = integrate([_ev("i", (0.3, 0.7), 120.0)], cfg, LABELS)
        np.testing.assert_array_equal(res.posteriors, [0.3, 0.7])
        assert res.scope == "collage"
        assert res.contributing_images == (("i", 1.0),)

    def test_equal_durations_give_arithmetic_mean(self):
        cfg = IntegrationConfig(duration_weighting=True)
        res = integrate(
            [_ev("i", (0.2, 0.8), 100.0), _ev("j", (0.6, 0.4), 100.0)], cfg, LABELS
        )
        np.testing.assert_allclose(res.posteriors, [0.4, 0.6], atol=1e-12)

    def test_duration_weighted_hand_case(self):
        # posteriors (1,0) and (0,1) at durations 1 ms and 3 ms
        cfg = IntegrationConfig(duration_weighting=True)
        res = integrate(
            [_ev("i", (1.0, 0.0), 1.0), _ev("j", (0.0, 1.0), 3.0)], cfg, LABELS
        )
        assert abs(res.posteriors[0] - 0.25) <= 1e-9
        assert abs(res.posteriors[1] - 0.75) <= 1e-9

    def test_plain_averaging_without_duration(self):
        cfg = IntegrationConfig(duration_weighting=False)
        res = integrate(
            [_ev("i", (1.0, 0.0), 999.0), _ev("j", (0.0, 1.0), 1.0)], cfg, LABELS
        )
        np.testing.assert_allclose(res.posteriors, [0.5, 0.5], atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(PipelineError, match="no fixated images"):
            integrate([], IntegrationConfig(), LABELS)

    def test_zero_durations_with_weighting_rejected(self):
        with pytest.raises(PipelineError, match="positive fixation duration"):
            integrate(
                [_ev("i", (0.5, 0.5), 0.0)],
                IntegrationConfig(duration_weighting=True),
                LABELS,
            )

    def test_posterior_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            integrate(
                [_ev("i", (0.5, 0.5), 1.0), _ev("j", (1.0, 0.0, 0.0), 1.0)],
                IntegrationConfig(),
                LABELS,
            )

    def test_convex_combination_bounds(self, rng):
        cfg = IntegrationConfig(duration_weighting=True)
        for _ in range(30):
            n, k = int(rng.integers(1, 6)), int(rng.integers(2, 5))
            posts = rng.dirichlet(np.ones(k), size=n)
            durs = rng.uniform(1, 500, size=n)
            evidence = [_ev(f"i{j}", posts[j], durs[j]) for j in range(n)]
            res = integrate(evidence, cfg, tuple(f"c{c}" for c in range(k)))
            assert (res.posteriors >= posts.min(axis=0) - 1e-12).all()
            assert (res.posteriors <= posts.max(axis=0) + 1e-12).all()

    def test_permutation_invariance(self, rng):
        cfg = IntegrationConfig(duration_weighting=True)
        posts = rng.dirichlet(np.ones(3), size=4)
        durs = rng.uniform(1, 500, size=4)
        evidence = [_ev(f"i{j}", posts[j], durs[j]) for j in range(4)]
        base = integrate(evidence, cfg, ("x", "y", "z"))
        perm = [evidence[i] for i in (2, 0, 3, 1)]
        shuffled = integrate(perm, cfg, ("x", "y", "z"))
        np.testing.assert_allclose(shuffled.posteriors, base.posteriors, atol=1e-12)

    def test_duration_scale_invariance(self, rng):
        cfg = IntegrationConfig(duration_weighting=True)
        posts = rng.dirichlet(np.ones(3), size=4)
        durs = rng.uniform(1, 500, size=4)
        a = integrate(
            [_ev(f"i{j}", posts[j], durs[j]) for j in range(4)], cfg, ("x", "y", "z")
        )
        b = integrate(
            [_ev(f"i{j}", posts[j], durs[j] * 977.0) for j in range(4)],
            cfg,
            ("x", "y", "z"),
        )
        np.testing.assert_allclose(a.posteriors, b.posteriors, atol=1e-7)


def _two_image_setup():
    layout = CollageLayout(
        collage_id="c1",
        screen_width_px=400,
        screen_height_px=100,
        entries=(
            CollageEntry("left", (0, 0, 200, 100)),
            CollageEntry("right", (200, 0, 400, 100)),
        ),
    )
    rng = np.random.default_rng(5)
    features = {
        "left": FeatureMap("left", rng.random((3, 6, 6), dtype=np.float32)),
        "right": FeatureMap("right", rng.random((3, 6, 6), dtype=np.float32)),
    }
    head = ClassifierHead(
        "category",
        ("a", "b", "c"),
        rng.normal(size=(3, 3)).astype(np.float32),
        np.zeros(3, dtype=np.float32),
    )
    return layout, features, head


def _log(fixations):
    return FixationLog(
        participant_id="p1",
        task=SearchTask(label="a"),
        collage_id="c1",
        fixations=tuple(fixations),
    )


class TestRunCollage:
    def test_single_fixated_image_equals_predict_image(self):
        layout, features, head = _two_image_setup()
        enc = EncodingConfig()
        log = _log(
            [
                Fixation(x=50, y=50, duration_ms=100, onset_ms=0),
                Fixation(x=150, y=20, duration_ms=200, onset_ms=200),
            ]
        )
        res = run_collage(log, layout, features, head, enc, IntegrationConfig())
        from gazepool.encoding import assign_fixations, build_density_map

        assignment = assign_fixations(log, layout, {"left": (6, 6), "right": (6, 6)})
        fdm = build_density_map(assignment.per_image["left"].points(), (6, 6), enc)
        direct = predict_image(features["left"], fdm, head)
        np.testing.assert_array_equal(res.prediction.posteriors, direct.posteriors)
        assert res.prediction.ranked_labels == direct.ranked_labels

    def test_global_without_duration_is_plain_average(self):
        layout, features, head = _two_image_setup()
        cfg = IntegrationConfig(density_mode="global", duration_weighting=False)
        log = _log(
            [
                Fixation(x=50, y=50, duration_ms=700, onset_ms=0),
                Fixation(x=300, y=50, duration_ms=100, onset_ms=800),
            ]
        )
        res = run_collage(log, layout, features, head, EncodingConfig(), cfg)
        uniform = uniform_density_map((6, 6))
        expected = 0.5 * (
            predict_image(features["left"], uniform, head).posteriors
            + predict_image(features["right"], uniform, head).posteriors
        )
        np.testing.assert_allclose(res.prediction.posteriors, expected, atol=1e-12)
        assert dict(res.prediction.contributing_images) == {"left": 0.5, "right": 0.5}

    def test_local_beats_global_on_planted_collage(self):
        # every image is dominated by a majority-class signal, with the
        # target signal in a small sub-region; fixations sit on the target
        # regions, so local finds the target while global votes majority
        h = w = 8
        entries = []
        features = {}
        boxes = [(i * 100, 0, i * 100 + 100, 100) for i in range(4)]
        for i in range(4):
            data = np.zeros((2, h, w), dtype=np.float32)
            data[0] = 1.0  # majority class everywhere
            data[1, :2, :2] = 4.0  # target evidence in the top-left corner
            image_id = f"img{i}"
            features[image_id] = FeatureMap(image_id, data)
            entries.append(CollageEntry(image_id, boxes[i]))
        layout = CollageLayout("c1", 400, 100, tuple(entries))
        head = ClassifierHead(
            "category", ("majority", "target"), np.eye(2, dtype=np.float32),
            np.zeros(2, dtype=np.float32),
        )
        # fixations in the target corner of the first two images
        log = _log(
            [
                Fixation(x=10, y=10, duration_ms=300, onset_ms=0),
                Fixation(x=110, y=10, duration_ms=300, onset_ms=400),
            ]
        )
        local = run_collage(
            log, layout, features, head, EncodingConfig(sigma_fix=1.0),
            IntegrationConfig(density_mode="local"),
        )
        glob = run_collage(
            log, layout, features, head, EncodingConfig(sigma_fix=1.0),
            IntegrationConfig(density_mode="global"),
        )
        assert local.prediction.top_label == "target"
        assert glob.prediction.top_label == "majority"

    def test_no_fixated_images(self):
        layout, features, head = _two_image_setup()
        with pytest.raises(PipelineError, match="no fixated images"):
            run_collage(_log([]), layout, features, head)

    def test_missing_feature_map(self):
        layout, features, head = _two_image_setup()
        del features["left"]
        log = _log([Fixation(x=50, y=50, duration_ms=100)])
        with pytest.raises(PipelineError, match="no grid dimensions"):
            run_collage(log, layout, features, head)

    def test_diagnostics(self):
        layout, features, head = _two_image_setup()
        log = _log(
            [
                Fixation(x=50, y=50, duration_ms=100, onset_ms=0),
                Fixation(x=300, y=50, duration_ms=80, onset_ms=200),
            ]
        )
        res = run_collage(log, layout, features, head)
        assert res.discarded_fixations == 0
        assert set(res.per_image) == {"left", "right"}
        assert [e.image_id for e in res.evidence] == ["left", "right"]
        for ev in res.evidence:
            assert ev.fixation_count == 1
        for pred in res.per_image.values():
            assert len(pred.ranked_labels) == 3

    def test_zero_fixation_images_contribute_nothing(self):
        layout, features, head = _two_image_setup()
        log = _log([Fixation(x=50, y=50, duration_ms=100)])
        res = run_collage(log, layout, features, head)
        assert [i for i, _ in res.prediction.contributing_images] == ["left"]


class TestRunCollageAttributes:
    def test_attribute_ranking_across_images(self):
        layout, features, head = _two_image_setup()
        rng = np.random.default_rng(9)
        heads = {
            name: ClassifierHead(
                "attribute-binary",
                ("absent", "present"),
                rng.normal(size=(2, 3)).astype(np.float32),
                np.zeros(2, dtype=np.float32),
            )
            for name in ("floral", "striped")
        }
        log = _log(
            [
                Fixation(x=50, y=50, duration_ms=100, onset_ms=0),
                Fixation(x=300, y=50, duration_ms=300, onset_ms=200),
            ]
        )
        res = run_collage_attributes(log, layout, features, heads)
        assert isinstance(res, AttributeCollageResult)
        assert sorted(res.ranked_attributes) == ["floral", "striped"]
        probs = res.present_probabilities
        assert probs[res.ranked_attributes[0]] >= probs[res.ranked_attributes[1]]
        for label, combined in res.per_attribute.items():
            assert combined.posteriors.sum() == pytest.approx(1.0, abs=1e-9)
            assert probs[label] == pytest.approx(float(combined.posteriors[1]))

    def test_requires_heads(self):
        layout, features, _ = _two_image_setup()
        log = _log([Fixation(x=50, y=50, duration_ms=100)])
        with pytest.raises(ValueError, match="no attribute heads"):
            run_collage_attributes(log, layout, features, {})
