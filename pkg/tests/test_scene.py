import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ifgi import jones, scene
from ifgi.jones import InterferometerSpec, port_probabilities
from ifgi.pgm import write_pgm
from ifgi.scene import Rect, RoiPair, SceneError, SceneGrid

I2 = np.eye(2, dtype=complex)
SMALL = SceneGrid(8, 6, 0.1)


def all_equal(elements, J):
    return np.allclose(elements, np.broadcast_to(J, elements.shape), atol=1e-15)


class TestGrid:
    def test_defaults(self):
        g = SceneGrid()
        assert (g.width, g.height, g.pitch) == (128, 128, 0.05)
        assert g.size == 128 * 128

    @pytest.mark.parametrize("args", [(0, 5, 0.1), (5, 0, 0.1), (5, 5, 0.0), (5, 5, -1.0)])
    def test_invalid(self, args):
        with pytest.raises(SceneError):
            SceneGrid(*args)


class TestRois:
    def test_valid(self):
        rois = RoiPair(Rect(0, 0, 2, 2), Rect(0, 3, 2, 2), Rect(4, 0, 2, 8))
        assert rois.validate(SMALL) is rois

    @pytest.mark.parametrize("rois", [
        RoiPair(Rect(0, 0, 2, 2), Rect(0, 1, 2, 2), Rect(4, 0, 2, 8)),   # overlap
        RoiPair(Rect(0, 0, 0, 2), Rect(0, 3, 2, 2), Rect(4, 0, 2, 8)),   # empty
        RoiPair(Rect(0, 0, 2, 2), Rect(0, 7, 2, 2), Rect(4, 0, 2, 8)),   # off grid
        RoiPair(Rect(0, 0, 2, 2), Rect(0, 3, 2, 2), Rect(5, 0, 2, 8)),
    ])
    def test_invalid(self, rois):
        with pytest.raises(SceneError):
            rois.validate(SMALL)

    def test_text_round_trip(self):
        r = Rect(3, 4, 5, 6)
        assert Rect.parse(r.to_text()) == r
        with pytest.raises(SceneError):
            Rect.parse("1,2,3")


class TestStencil:
    def test_all_clear(self):
        obj = scene.make_stencil(SMALL, np.zeros(SMALL.shape))
        assert all_equal(obj.elements, I2)

    def test_all_set(self):
        obj = scene.make_stencil(SMALL, np.ones(SMALL.shape))
        assert all_equal(obj.elements, np.zeros((2, 2)))

    def test_uo_fraction_matches_bitmap(self):
        p = scene.preset("uo_stencil")
        # set-pixel count of the bundled asset, counted from the file
        from ifgi.pgm import read_pgm
        from importlib import resources
        with resources.as_file(resources.files("ifgi") / "assets" / "uo.pgm") as path:
            gray, _ = read_pgm(path)
        set_count = int(np.count_nonzero(gray))
        assert set_count == 2496
        opaque = np.all(p.scene.elements == 0, axis=(-2, -1))
        assert opaque.mean() == pytest.approx(set_count / gray.size, abs=0)
        assert opaque.mean() == 0.15234375

    def test_uo_letter_size(self):
        # letters roughly 2 mm tall at the default pitch
        bitmap = scene.preset("uo_stencil").bitmap
        rows = np.flatnonzero(bitmap.any(axis=1))
        assert (rows[-1] - rows[0] + 1) * 0.05 == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(SceneError):
            scene.make_stencil(SMALL, np.zeros((3, 3)))


class TestPhaseShard:
    def test_zero_phase_is_identity(self):
        obj = scene.make_phase_shard(SMALL, Rect(1, 1, 3, 3), 0.0)
        assert all_equal(obj.elements, I2)

    def test_pi_is_fully_dark(self):
        obj = scene.make_phase_shard(SMALL, Rect(1, 1, 3, 3), math.pi)
        _, p_d, _ = port_probabilities(obj.element_at(2, 2), InterferometerSpec(0.5, 0.5))
        assert p_d == pytest.approx(1.0, abs=1e-12)

    def test_half_pi(self):
        obj = scene.make_phase_shard(SMALL, Rect(1, 1, 3, 3), math.pi / 2)
        _, p_d, _ = port_probabilities(obj.element_at(2, 2), InterferometerSpec(0.5, 0.5))
        # R T |e^{i phi} - 1|^2 evaluated by hand: 0.25 * 2
        assert p_d == pytest.approx(0.25 * abs(1j - 1) ** 2, abs=1e-12)
        assert p_d == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(np.abs(np.linalg.det(obj.elements)), 1.0)

    def test_region_out_of_bounds(self):
        with pytest.raises(SceneError):
            scene.make_phase_shard(SMALL, Rect(4, 4, 4, 4), 1.0)

    def test_preset_shard(self):
        p = scene.preset("glass_shard", phi=0.7)
        inside = p.rois.inside
        assert p.bitmap[inside.slices].all()
        assert not p.bitmap[p.rois.outside.slices].any()
        assert not p.bitmap[p.rois.background.slices].any()
        np.testing.assert_allclose(p.scene.element_at(inside.top, inside.left), np.exp(0.7j) * I2)


class TestBomb:
    def test_empty_is_identity(self):
        obj = scene.make_bomb_pattern(SMALL, np.zeros(SMALL.shape))
        assert all_equal(obj.elements, I2)

    def test_full_bitmap_invisible_to_intensity(self):
        obj = scene.make_bomb_pattern(SMALL, np.ones(SMALL.shape))
        s = jones.transmission(obj.elements, jones.H)
        np.testing.assert_allclose(s, 1.0, atol=1e-12)

    def test_full_bitmap_ifgi_dark_port(self):
        obj = scene.make_bomb_pattern(SMALL, np.ones(SMALL.shape))
        _, p_d, _ = port_probabilities(obj.elements, InterferometerSpec(0.5, 0.5))
        np.testing.assert_allclose(p_d, 0.5, atol=1e-12)

    def test_preset_rois(self):
        p = scene.preset("bomb_lc")
        assert p.bitmap[p.rois.inside.slices].all()
        assert not p.bitmap[p.rois.outside.slices].any()


def write_scene(tmp_path, gray, maxval, text, binary=True):
    img = tmp_path / "obj.pgm"
    write_pgm(img, gray, maxval=maxval, binary=binary)
    (tmp_path / "obj.scene").write_text(text)
    return img


class TestLoadScene:
    def test_zero_stencil(self, tmp_path):
        obj = scene.load_scene(write_scene(tmp_path, np.zeros((4, 5), int), 255, "kind = stencil\n"))
        assert obj.grid.shape == (4, 5)
        assert all_equal(obj.elements, I2)

    def test_max_phase_pi(self, tmp_path):
        path = write_scene(tmp_path, np.full((3, 3), 65535), 65535, "kind = phase\nmax = 3.141592653589793\n")
        obj = scene.load_scene(path)
        assert all_equal(obj.elements, -I2)

    def test_half_gray_rotator_ascii(self, tmp_path):
        path = write_scene(tmp_path, np.full((2, 2), 128), 256, "kind = rotator\nmax = 1.5707963267948966\n",
                           binary=False)
        obj = scene.load_scene(path)
        assert all_equal(obj.elements, jones.standard_element("rotator", math.pi / 4))

    def test_sixteen_bit_binary_gray_stencil(self, tmp_path):
        path = write_scene(tmp_path, np.array([[0, 1000, 1000]]), 1000, "kind = stencil\npitch = 0.02\n")
        obj = scene.load_scene(path)
        assert obj.grid.pitch == 0.02
        np.testing.assert_allclose(obj.elements[0, 1], np.zeros((2, 2)))

    def test_explicit_descriptor_and_label(self, tmp_path):
        img = tmp_path / "a.pgm"
        write_pgm(img, np.zeros((2, 2), int))
        desc = tmp_path / "other.txt"
        desc.write_text("# comment\nkind = stencil\nlabel = thing\n")
        assert scene.load_scene(img, descriptor=desc).label == "thing"

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nothing.pgm"):
            scene.load_scene(tmp_path / "nothing.pgm")
        img = tmp_path / "a.pgm"
        write_pgm(img, np.zeros((2, 2), int))
        with pytest.raises(FileNotFoundError, match="a.scene"):
            scene.load_scene(img)

    @pytest.mark.parametrize("text", ["kind = hologram\n", "kind = phase\n", "kind phase\n", "kind = phase\nmax = x\n"])
    def test_bad_descriptor(self, tmp_path, text):
        with pytest.raises(SceneError):
            scene.load_scene(write_scene(tmp_path, np.zeros((2, 2), int), 255, text))

    def test_malformed_image(self, tmp_path):
        img = tmp_path / "obj.pgm"
        img.write_bytes(b"P5\n4 4\n255\n\x00")
        (tmp_path / "obj.scene").write_text("kind = stencil\n")
        with pytest.raises(ValueError):
            scene.load_scene(img)


def test_gain_element_rejected():
    el = np.broadcast_to(2 * I2, SMALL.shape + (2, 2))
    with pytest.raises(SceneError):
        scene.SceneObject(SMALL, el)


def test_scene_is_immutable():
    obj = scene.identity_scene(SMALL)
    with pytest.raises(ValueError):
        obj.elements[0, 0, 0, 0] = 0


def test_unknown_preset():
    with pytest.raises(SceneError):
        scene.preset("teapot")


bitmaps = hnp.arrays(bool, (6, 8))
spec_st = st.builds(lambda r, g: InterferometerSpec(r, 1 - r, gamma=g), st.floats(0, 1), st.floats(0, 1))


class TestProperties:
    @given(bitmaps, st.floats(-10, 10))
    @settings(max_examples=50, deadline=None)
    def test_constructors_are_passive(self, bitmap, angle):
        for obj in (scene.make_stencil(SMALL, bitmap), scene.make_phase_shard(SMALL, bitmap, angle),
                    scene.make_bomb_pattern(SMALL, bitmap)):
            assert np.all(jones.is_passive(obj.elements))

    @given(bitmaps, st.floats(-10, 10), spec_st)
    @settings(max_examples=50, deadline=None)
    def test_phase_and_rotator_lossless(self, bitmap, phi, spec):
        for obj in (scene.make_phase_shard(SMALL, bitmap, phi), scene.make_bomb_pattern(SMALL, bitmap)):
            _, _, p_a = port_probabilities(obj.elements, spec)
            np.testing.assert_allclose(p_a, 0.0, atol=1e-12)

    @given(hnp.arrays(np.int64, (6, 8), elements=st.integers(0, 255)), st.sampled_from(scene.SCENE_KINDS),
           st.floats(-7, 7))
    @settings(max_examples=50, deadline=None)
    def test_gray_scenes_passive(self, gray, kind, param):
        obj = scene.scene_from_gray(gray, 255, kind, param, SMALL)
        assert np.all(jones.is_passive(obj.elements))

    @given(bitmaps, st.floats(-10, 10))
    @settings(max_examples=30, deadline=None)
    def test_deterministic(self, bitmap, phi):
        a = scene.make_phase_shard(SMALL, bitmap, phi)
        b = scene.make_phase_shard(SMALL, bitmap.copy(), phi)
        assert a == b
        assert a.elements.tobytes() == b.elements.tobytes()

    def test_presets_deterministic(self):
        for name in scene.PRESETS:
            assert scene.preset(name).scene == scene.preset(name).scene
