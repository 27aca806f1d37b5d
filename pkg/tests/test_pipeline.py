import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ifgi import metrics, scene
from ifgi.images import CountImage, SignedImage
from ifgi.jones import InterferometerSpec
from ifgi.pipeline import CompositionError, compose, run_cgi, run_ifgi
from ifgi.scene import Rect, RoiPair, SceneGrid
from ifgi.transport import DetectorSpec, SourceSpec

G = SceneGrid(4, 3, 0.1)


def img(value, grid=G):
    return CountImage(grid, np.full(grid.shape, value, dtype=np.int64))


class TestCompose:
    def test_self_difference(self):
        a = CountImage(G, np.arange(12).reshape(3, 4))
        assert not compose({"a": a}, [(1, "a"), (-1, "a")]).values.any()

    def test_minus_zero(self):
        a = CountImage(G, np.arange(12).reshape(3, 4))
        out = compose({"a": a, "z": CountImage.zeros(G)}, {"a": 1, "z": -1})
        np.testing.assert_array_equal(out.values, a.values)

    def test_five_two_one(self):
        out = compose({"c": img(5), "d": img(2), "b": img(1)}, {"c": 1, "d": -1, "b": -1})
        np.testing.assert_array_equal(out.values, np.full(G.shape, 2))

    def test_negative_values_kept(self):
        out = compose({"c": img(1), "d": img(4)}, {"c": 1, "d": -1})
        assert np.all(out.values == -3)

    def test_grid_mismatch(self):
        with pytest.raises(CompositionError):
            compose({"a": img(1), "b": img(1, SceneGrid(3, 4))}, {"a": 1, "b": -1})

    def test_unknown_channel_and_empty(self):
        with pytest.raises(CompositionError):
            compose({"a": img(1)}, {"x": 1})
        with pytest.raises(CompositionError):
            compose({"a": img(1)}, {})
        with pytest.raises(CompositionError):
            compose({"a": img(1)}, {"a": 0.5})

    def test_overflow(self):
        big = CountImage(G, np.full(G.shape, 2**62, dtype=np.uint64))
        with pytest.raises(OverflowError):
            compose({"a": big, "b": big}, {"a": 1, "b": 1})
        huge = CountImage(G, np.full(G.shape, 2**63 + 5, dtype=np.uint64))
        with pytest.raises(OverflowError):
            compose({"a": huge}, {"a": 1})

    @given(st.lists(hnp.arrays(np.int64, G.shape, elements=st.integers(0, 10**6)), min_size=3, max_size=3),
           st.lists(st.integers(-3, 3), min_size=3, max_size=3), st.permutations(range(3)))
    @settings(max_examples=50)
    def test_linear_and_order_free(self, arrays, coefs, order):
        images = {f"x{i}": CountImage(G, a) for i, a in enumerate(arrays)}
        terms = [(c, f"x{i}") for i, c in enumerate(coefs)]
        full = compose(images, terms)
        shuffled = compose(images, [terms[k] for k in order])
        assert full == shuffled
        np.testing.assert_array_equal(full.values, sum(c * a for c, a in zip(coefs, arrays)))
        # (x0 + x1) + x2 grouped through an intermediate image
        partial = compose(images, terms[:2]).values + coefs[2] * arrays[2]
        np.testing.assert_array_equal(full.values, partial)


class TestImages:
    def test_count_image_rejects_negative_and_shape(self):
        with pytest.raises(ValueError):
            CountImage(G, -np.ones(G.shape, dtype=np.int64))
        with pytest.raises(ValueError):
            CountImage(G, np.zeros((2, 2)))
        with pytest.raises(TypeError):
            SignedImage(G, np.zeros(G.shape, dtype=float))


GRID = SceneGrid(32, 32, 0.05)
ROIS = RoiPair(Rect(12, 8, 8, 6), Rect(12, 18, 8, 6), Rect(0, 0, 4, 32))
SRC = SourceSpec(pump_sigma=10.0, corr_sigma=0.0, pair_rate=2000)
IDEAL = DetectorSpec(1.0, 1.0)


def stencil():
    bitmap = np.zeros(GRID.shape, bool)
    bitmap[8:24, 6:16] = True
    return scene.make_stencil(GRID, bitmap, "block")


class TestRunCgi:
    def test_identity_scene(self):
        rep = run_cgi(scene.identity_scene(GRID), SRC, IDEAL, 40, seed=1)
        assert rep.composed.values.min() > 0
        dn = metrics.delta_n(rep.composed, ROIS)
        assert abs(dn) <= 3 * metrics.delta_n_stderr(rep.composed, ROIS)
        assert rep.tallies["cgi"].interacted == rep.tallies["cgi"].pairs
        assert set(rep.raw_channels) == set(rep.config_echo["channels"]) == {"cgi", "acc"}

    def test_stencil_dark_inside(self):
        rep = run_cgi(stencil(), SRC, IDEAL, 40, seed=2)
        assert not rep.composed.values[ROIS.inside.slices].any()
        assert metrics.delta_n(rep.composed, ROIS) > 0

    def test_phase_invisible(self):
        shard = scene.make_phase_shard(GRID, Rect(8, 6, 16, 10), np.pi / 2)
        rep = run_cgi(shard, SRC, IDEAL, 40, seed=3)
        assert abs(metrics.delta_n(rep.composed, ROIS)) <= 3 * metrics.delta_n_stderr(rep.composed, ROIS)

    def test_accidental_subtraction(self):
        det = DetectorSpec(1.0, 1.0, 0.0, 0.05)
        with_acc = run_cgi(stencil(), SRC, det, 40, seed=4)
        raw = run_cgi(stencil(), SRC, det, 40, seed=4, accidental_correction=False)
        np.testing.assert_array_equal(
            with_acc.composed.values, raw.raw_channels["cgi"].values - raw.raw_channels["acc"].values)
        # the shifted image mean follows the accidental model
        tl = with_acc.tallies["acc"]
        mean = with_acc.raw_channels["acc"].values.mean()
        expected = det.accidental_rate_camera * tl.gated_c
        assert abs(mean - expected) <= 3 * np.sqrt(expected / GRID.size)


class TestRunIfgi:
    def test_identity_reduces_to_c(self):
        rep = run_ifgi(scene.identity_scene(GRID), InterferometerSpec(0.5, 0.5), SRC, IDEAL, 30, seed=5)
        assert not rep.raw_channels["d"].values.any()
        assert not rep.raw_channels["b"].values.any()
        np.testing.assert_array_equal(rep.composed.values, rep.raw_channels["c"].values)
        assert set(rep.raw_channels) == set(rep.config_echo["channels"])

    def test_b_zero_when_coherent(self):
        rep = run_ifgi(stencil(), InterferometerSpec(0.25, 0.75), SRC, IDEAL, 30, seed=6)
        assert not rep.raw_channels["b"].values.any()
        c, d = rep.raw_channels["c"].values, rep.raw_channels["d"].values
        np.testing.assert_array_equal(rep.composed.values, c - d)

    def test_partial_coherence_background(self):
        rep = run_ifgi(scene.identity_scene(GRID), InterferometerSpec(0.5, 0.5, gamma=0.8), SRC, IDEAL, 30, seed=7)
        assert rep.raw_channels["b"].values.sum() > 0

    def test_dual_port_mode(self):
        rep = run_ifgi(stencil(), InterferometerSpec(0.5, 0.5), SRC, IDEAL, 30, seed=8, port_mode="dual")
        assert rep.tallies["c"] is rep.tallies["d"]
        assert metrics.delta_n(rep.composed, ROIS) > 0
        with pytest.raises(ValueError):
            run_ifgi(stencil(), InterferometerSpec(0.5, 0.5), SRC, IDEAL, 3, seed=8, port_mode="triple")

    def test_interaction_reduced(self):
        for t in (0.5, 0.75):
            tl = run_ifgi(stencil(), InterferometerSpec(1 - t, t), SRC, IDEAL, 30, seed=9).probe_tallies
            sigma = np.sqrt(tl.pairs * t * (1 - t))
            assert abs(tl.interacted - t * tl.pairs) <= 3 * sigma

    def test_accidentals_cancel_in_expectation(self):
        det = DetectorSpec(1.0, 1.0, 50.0, 0.5)
        rep = run_ifgi(scene.identity_scene(GRID), InterferometerSpec(0.5, 0.5), SRC, det, 30, seed=10)
        # every frame is gated on every channel, so each coincidence channel
        # carries the same accidental load as its shifted-gate partner
        for ch in ("c", "d", "b"):
            assert rep.tallies[ch].gated_c + rep.tallies[ch].gated_d == 30
        raw = {k: v.values for k, v in rep.raw_channels.items()}
        resid = rep.composed.values - (raw["c"] - raw["acc_c"])
        # identity scene: d and b hold accidentals only
        np.testing.assert_array_equal(resid, (raw["acc_d"] - raw["d"]) + (raw["acc_b"] - raw["b"]))
        sigma = np.sqrt(4 * det.accidental_rate_camera * 30)
        assert abs(resid.mean()) <= 3 * sigma / np.sqrt(GRID.size)

    def test_deterministic(self):
        args = (stencil(), InterferometerSpec(0.5, 0.5), SRC, DetectorSpec(0.5, 0.5, 0.1, 0.01), 70)
        a, b = run_ifgi(*args, seed=11), run_ifgi(*args, seed=11, workers=2)
        assert a.composed == b.composed
        assert all(a.raw_channels[k] == b.raw_channels[k] for k in a.raw_channels)
        assert a.config_echo == b.config_echo
