"""Fixation assignment, Gaussian rendering, and density-map pooling."""

import math

import numpy as np
import pytest

from oracle import oracle_density, oracle_stamp

from gazepool import kernels
from gazepool.encoding import (
    SIGMA_SWEEP,
    EncodingConfig,
    assign_fixations,
    build_density_map,
    render_fixation,
    uniform_density_map,
)
from gazepool.errors import PipelineError
from gazepool.types import (
    CollageEntry,
    CollageLayout,
    Fixation,
    FixationLog,
    SearchTask,
    validate,
)


def _layout():
    # two 200x140 boxes with a 40px gutter between them
    return CollageLayout(
        collage_id="c1",
        screen_width_px=500,
        screen_height_px=200,
        entries=(
            CollageEntry(image_id="left", box=(10, 20, 210, 160)),
            CollageEntry(image_id="right", box=(250, 20, 450, 160)),
        ),
    )


def _log(fixations, collage_id="c1"):
    return FixationLog(
        participant_id="p1",
        task=SearchTask(label="dress"),
        collage_id=collage_id,
        fixations=tuple(fixations),
    )


class TestEncodingConfig:
    def test_default_truncation_is_three_sigma(self):
        cfg = EncodingConfig(sigma_fix=1.6)
        assert cfg.truncation_radius == pytest.approx(4.8)

    def test_bad_sigma(self):
        with pytest.raises(ValueError, match="sigma_fix"):
            EncodingConfig(sigma_fix=0.0)

    def test_truncation_below_sigma(self):
        with pytest.raises(ValueError, match="truncation_radius"):
            EncodingConfig(sigma_fix=2.0, truncation_radius=1.0)

    def test_bad_pooling(self):
        with pytest.raises(ValueError, match="pooling"):
            EncodingConfig(pooling="median")


class TestAssignFixations:
    def test_box_center_maps_to_grid_center(self):
        fix = Fixation(x=110, y=90, duration_ms=250)  # center of the left box
        res = assign_fixations(_log([fix]), _layout(), (14, 14))
        gf = res.per_image["left"]
        assert gf.u[0] == pytest.approx(7.0)
        assert gf.v[0] == pytest.approx(7.0)
        assert gf.total_duration_ms == 250

    def test_box_corner_maps_to_origin(self):
        fix = Fixation(x=10, y=20, duration_ms=100)
        res = assign_fixations(_log([fix]), _layout(), (14, 14))
        gf = res.per_image["left"]
        assert gf.u[0] == 0.0
        assert gf.v[0] == 0.0

    def test_gutter_fixation_discarded(self):
        inside = Fixation(x=110, y=90, duration_ms=100, onset_ms=0)
        gutter = Fixation(x=230, y=90, duration_ms=50, onset_ms=200)
        res = assign_fixations(_log([inside, gutter]), _layout())
        assert res.discarded_count == 1
        assert res.discarded[0] is gutter
        assert set(res.per_image) == {"left"}

    def test_durations_sum_per_image(self):
        fixes = [
            Fixation(x=110, y=90, duration_ms=100, onset_ms=0),
            Fixation(x=120, y=95, duration_ms=150, onset_ms=200),
            Fixation(x=300, y=90, duration_ms=75, onset_ms=400),
        ]
        res = assign_fixations(_log(fixes), _layout())
        assert res.per_image["left"].total_duration_ms == 250
        assert res.per_image["right"].total_duration_ms == 75
        assert res.per_image["left"].count == 2

    def test_collage_mismatch(self):
        with pytest.raises(PipelineError, match="layout/log mismatch"):
            assign_fixations(_log([], collage_id="other"), _layout())

    def test_per_image_grid_dims(self):
        fix = Fixation(x=110, y=90, duration_ms=100)
        res = assign_fixations(_log([fix]), _layout(), {"left": (7, 7), "right": (14, 14)})
        assert res.per_image["left"].u[0] == pytest.approx(3.5)

    def test_missing_grid_dims_entry(self):
        fix = Fixation(x=110, y=90, duration_ms=100)
        with pytest.raises(PipelineError, match="no grid dimensions"):
            assign_fixations(_log([fix]), _layout(), {"right": (14, 14)})


class TestRenderFixation:
    def test_peak_value_one_at_cell_center(self):
        cfg = EncodingConfig(sigma_fix=1.6)
        raw = render_fixation((3.5, 3.5), (14, 14), cfg)
        assert raw[3, 3] == pytest.approx(1.0)
        assert raw.max() == raw[3, 3]

    def test_value_at_exactly_sigma_distance(self):
        # Fixation placed so the center of cell (3, 3) sits exactly 1.6
        # cells away horizontally: the Gaussian there must be exp(-1/2).
        sigma = 1.6
        cfg = EncodingConfig(sigma_fix=sigma)
        u = 3.5 - sigma
        raw = render_fixation((u, 3.5), (14, 14), cfg)
        assert raw[3, 3] == pytest.approx(math.exp(-0.5), rel=1e-6)
        # scalar brute-force cross-check of the whole stamp
        ref = oracle_stamp(u, 3.5, 14, 14, sigma, cfg.truncation_radius)
        np.testing.assert_allclose(raw, ref, rtol=1e-6, atol=1e-9)

    def test_out_of_range_rejected(self):
        cfg = EncodingConfig()
        with pytest.raises(ValueError, match="outside"):
            render_fixation((-0.1, 3.0), (14, 14), cfg)
        with pytest.raises(ValueError, match="outside"):
            render_fixation((3.0, 14.5), (14, 14), cfg)

    def test_supported_sigma_sweep_values(self):
        assert SIGMA_SWEEP == (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
        for sigma in SIGMA_SWEEP:
            raw = render_fixation((7.0, 7.0), (14, 14), EncodingConfig(sigma_fix=sigma))
            assert raw.max() > 0


class TestBuildDensityMap:
    def test_duplicate_fixations_average_equals_single(self):
        cfg = EncodingConfig()
        single = build_density_map([(4.2, 9.1)], (14, 14), cfg)
        double = build_density_map([(4.2, 9.1), (4.2, 9.1)], (14, 14), cfg)
        np.testing.assert_allclose(double.data, single.data, atol=1e-6)

    def test_far_apart_max_pooling_equal_peaks(self):
        cfg = EncodingConfig(sigma_fix=1.0, pooling="max")
        pts = [(3.5, 3.5), (24.5, 24.5)]  # farther apart than 2 * truncation
        fdm = build_density_map(pts, (28, 28), cfg)
        ref = oracle_density(pts, 28, 28, 1.0, cfg.truncation_radius, "max")
        np.testing.assert_allclose(fdm.data, ref, rtol=1e-5, atol=1e-7)
        assert fdm.data[3, 3] == pytest.approx(fdm.data[24, 24], rel=1e-6)

    def test_mean_is_one(self, rng):
        cfg = EncodingConfig()
        for _ in range(20):
            n = int(rng.integers(1, 6))
            pts = rng.uniform(0, 14, size=(n, 2))
            fdm = build_density_map(pts, (14, 14), cfg)
            assert abs(float(fdm.data.mean(dtype=np.float64)) - 1.0) <= 1e-6
            assert validate(fdm) is None

    def test_average_matches_oracle(self, rng):
        for _ in range(10):
            sigma = float(rng.uniform(1.0, 2.0))
            cfg = EncodingConfig(sigma_fix=sigma)
            pts = rng.uniform(0, 10, size=(int(rng.integers(1, 5)), 2))
            fdm = build_density_map(pts, (10, 10), cfg)
            ref = oracle_density(pts, 10, 10, sigma, cfg.truncation_radius, "average")
            np.testing.assert_allclose(fdm.data, ref, rtol=1e-5, atol=1e-7)

    def test_empty_rejected(self):
        with pytest.raises(PipelineError, match="no fixations"):
            build_density_map(np.empty((0, 2)), (14, 14), EncodingConfig())

    def test_reflection_symmetry(self, rng):
        # mirroring fixations about the vertical center axis mirrors the map
        for pooling in ("average", "max"):
            cfg = EncodingConfig(pooling=pooling)
            pts = rng.uniform(0, 14, size=(4, 2))
            mirrored = np.column_stack((14.0 - pts[:, 0], pts[:, 1]))
            a = build_density_map(pts, (14, 14), cfg)
            b = build_density_map(mirrored, (14, 14), cfg)
            np.testing.assert_allclose(a.data, b.data[:, ::-1], atol=1e-6)

    def test_monotone_in_fixations_prenorm(self, rng):
        # average pooling: adding a fixation never decreases any raw cell
        pts = rng.uniform(0, 14, size=(5, 2))
        cfg = EncodingConfig()
        before = kernels.accumulate_density(
            pts[:4, 0], pts[:4, 1], 14, 14, cfg.sigma_fix, cfg.truncation_radius, False
        )
        after = kernels.accumulate_density(
            pts[:, 0], pts[:, 1], 14, 14, cfg.sigma_fix, cfg.truncation_radius, False
        )
        assert (after >= before - 1e-15).all()

    def test_locality_exact_zero_outside_truncation(self):
        cfg = EncodingConfig(sigma_fix=1.0)  # truncation at 3 cells
        raw = kernels.accumulate_density(
            np.array([7.0]), np.array([7.0]), 14, 14, 1.0, 3.0, False
        )
        rows = np.arange(14) + 0.5 - 7.0
        cols = np.arange(14) + 0.5 - 7.0
        dist = np.hypot(rows[:, None], cols[None, :])
        assert (raw[dist > 3.0] == 0.0).all()
        assert (raw[dist <= 3.0] > 0.0).all()


class TestUniformDensityMap:
    def test_all_ones(self):
        fdm = uniform_density_map((14, 14))
        assert fdm.data.shape == (14, 14)
        assert (fdm.data == 1.0).all()
        assert float(fdm.data.mean()) == 1.0
        assert validate(fdm) is None
