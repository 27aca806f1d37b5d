"""Rastered objects on a pixel grid and the regions used to measure them.

A :class:`SceneObject` stores one 2x2 Jones matrix per pixel, indexed
``elements[row, col]``.  Constructors here build the three object families
used by the presets: amplitude stencils, lossless phase regions and
lossless polarisation rotators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ifgi import jones
from ifgi.pgm import read_pgm

DEFAULT_SIZE = 128
DEFAULT_PITCH = 0.05  # mm


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneGrid:
    width: int = DEFAULT_SIZE
    height: int = DEFAULT_SIZE
    pitch: float = DEFAULT_PITCH

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise SceneError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.pitch > 0:
            raise SceneError(f"pitch must be positive, got {self.pitch!r}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle; rows ``top:top+height``, cols ``left:left+width``."""

    top: int
    left: int
    height: int
    width: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.top, self.top + self.height), slice(self.left, self.left + self.width))

    @property
    def area(self) -> int:
        return max(self.height, 0) * max(self.width, 0)

    def within(self, grid: SceneGrid) -> bool:
        return (
            self.top >= 0
            and self.left >= 0
            and self.top + self.height <= grid.height
            and self.left + self.width <= grid.width
        )

    def overlaps(self, other: Rect) -> bool:
        return not (
            self.top + self.height <= other.top
            or other.top + other.height <= self.top
            or self.left + self.width <= other.left
            or other.left + other.width <= self.left
        )

    def to_text(self) -> str:
        return f"{self.top},{self.left},{self.height},{self.width}"

    @classmethod
    def parse(cls, text: str) -> Rect:
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise SceneError(f"rectangle needs top,left,height,width: {text!r}")
        return cls(*(int(p) for p in parts))

    def mask(self, grid: SceneGrid) -> np.ndarray:
        m = np.zeros(grid.shape, dtype=bool)
        m[self.slices] = True
        return m


@dataclass(frozen=True)
class RoiPair:
    """Inside/outside regions for ΔN plus a background region for σ."""

    inside: Rect
    outside: Rect
    background: Rect

    def validate(self, grid: SceneGrid) -> RoiPair:
        for name in ("inside", "outside", "background"):
            rect = getattr(self, name)
            if not rect.within(grid):
                raise SceneError(f"{name} ROI {rect.to_text()} lies outside the {grid.width}x{grid.height} grid")
        for name in ("inside", "outside"):
            if getattr(self, name).area == 0:
                raise SceneError(f"{name} ROI is empty")
        if self.inside.overlaps(self.outside):
            raise SceneError("inside and outside ROIs overlap")
        return self


@dataclass(frozen=True, eq=False)
class SceneObject:
    grid: SceneGrid
    elements: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        el = np.array(self.elements, dtype=complex)
        if el.shape != (self.grid.height, self.grid.width, 2, 2):
            raise SceneError(f"elements shape {el.shape} does not match grid {self.grid.shape}")
        if not np.all(jones.is_passive(el)):
            raise SceneError("scene contains an element with gain")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    def __eq__(self, other):
        if not isinstance(other, SceneObject):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.label == other.label
            and self.elements.tobytes() == other.elements.tobytes()
        )

    __hash__ = None

    def element_at(self, row: int, col: int) -> np.ndarray:
        return self.elements[row, col]


def _check_bitmap(grid: SceneGrid, bitmap) -> np.ndarray:
    bitmap = np.asarray(bitmap)
    if bitmap.shape != grid.shape:
        raise SceneError(f"bitmap shape {bitmap.shape} does not match grid {grid.shape}")
    return bitmap.astype(bool)


def _fill(grid: SceneGrid, mask: np.ndarray, element: np.ndarray) -> np.ndarray:
    el = np.broadcast_to(np.eye(2, dtype=complex), grid.shape + (2, 2)).copy()
    el[mask] = element
    return el


def identity_scene(grid: SceneGrid, label: str = "empty") -> SceneObject:
    return SceneObject(grid, _fill(grid, np.zeros(grid.shape, bool), np.eye(2)), label)


def make_stencil(grid: SceneGrid, bitmap, label: str = "stencil") -> SceneObject:
    """Opaque where ``bitmap`` is set, clear elsewhere."""
    mask = _check_bitmap(grid, bitmap)
    return SceneObject(grid, _fill(grid, mask, jones.standard_element("opaque")), label)


def _region_mask(grid: SceneGrid, region) -> np.ndarray:
    if isinstance(region, Rect):
        if not region.within(grid):
            raise SceneError(f"region {region.to_text()} lies outside the grid")
        return region.mask(grid)
    return _check_bitmap(grid, region)


def make_phase_shard(grid: SceneGrid, region, phi: float, label: str = "phase") -> SceneObject:
    """Uniform phase ``exp(i phi)`` inside ``region`` (a :class:`Rect` or mask)."""
    mask = _region_mask(grid, region)
    return SceneObject(grid, _fill(grid, mask, jones.standard_element("phase", phi)), label)


def make_bomb_pattern(grid: SceneGrid, bitmap, label: str = "rotator") -> SceneObject:
    """90 degree polarisation rotator where ``bitmap`` is set."""
    mask = _check_bitmap(grid, bitmap)
    return SceneObject(grid, _fill(grid, mask, jones.standard_element("rotator", math.pi / 2)), label)


def polygon_mask(grid: SceneGrid, vertices) -> np.ndarray:
    """Pixels whose centres fall inside a convex polygon of (row, col) vertices."""
    rows, cols = np.mgrid[0 : grid.height, 0 : grid.width].astype(float)
    v = np.asarray(vertices, dtype=float)
    inside = np.ones(grid.shape, dtype=bool)
    area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    sign = 1.0 if area > 0 else -1.0
    for (r0, c0), (r1, c1) in zip(v, np.roll(v, -1, axis=0)):
        cross = (r1 - r0) * (cols - c0) - (c1 - c0) * (rows - r0)
        inside &= sign * cross >= 0
    return inside


# --- graymap scenes -------------------------------------------------------

SCENE_KINDS = ("stencil", "phase", "rotator")


def read_descriptor(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SceneError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def descriptor_path(image_path) -> Path:
    return Path(image_path).with_suffix(".scene")


def scene_from_gray(gray, maxval: int, kind: str, max_param: float, grid: SceneGrid, label: str = "") -> SceneObject:
    """Map gray levels linearly onto the parameter of ``kind``.

    ``stencil`` maps gray onto absorbed intensity fraction (0 clear, maxval
    opaque); ``phase`` and ``rotator`` map gray onto ``[0, max_param]``
    radians.
    """
    level = np.asarray(gray, dtype=float) / float(maxval)
    if level.shape != grid.shape:
        raise SceneError(f"graymap {level.shape} does not match grid {grid.shape}")
    eye = np.eye(2, dtype=complex)
    if kind == "stencil":
        el = np.sqrt(np.clip(1.0 - level, 0.0, 1.0))[..., None, None] * eye
    elif kind == "phase":
        el = np.exp(1j * max_param * level)[..., None, None] * eye
    elif kind == "rotator":
        theta = max_param * level
        c, s = np.cos(theta), np.sin(theta)
        el = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)
    else:
        raise SceneError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    return SceneObject(grid, el, label or kind)


def load_scene(path, descriptor=None, pitch: float | None = None) -> SceneObject:
    """Load a graymap scene plus its key-value descriptor.

    The descriptor defaults to the image path with a ``.scene`` suffix and
    holds ``kind`` (stencil | phase | rotator), ``max`` (radians, for phase
    and rotator), and optionally ``label`` and ``pitch`` (mm).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scene image not found: {path}")
    descriptor = Path(descriptor) if descriptor is not None else descriptor_path(path)
    if not descriptor.is_file():
        raise FileNotFoundError(f"scene descriptor not found: {descriptor}")
    desc = read_descriptor(descriptor)
    kind = desc.get("kind")
    if kind not in SCENE_KINDS:
        raise SceneError(f"{descriptor}: unknown scene kind {kind!r}")
    try:
        max_param = 1.0 if kind == "stencil" else float(desc["max"])
        pitch = float(pitch) if pitch is not None else float(desc.get("pitch", DEFAULT_PITCH))
    except KeyError:
        raise SceneError(f"{descriptor}: kind {kind} needs a 'max' entry") from None
    except ValueError as exc:
        raise SceneError(f"{descriptor}: {exc}") from None
    gray, maxval = read_pgm(path)
    grid = SceneGrid(width=gray.shape[1], height=gray.shape[0], pitch=pitch)
    return scene_from_gray(gray, maxval, kind, max_param, grid, desc.get("label", path.stem))


# --- presets --------------------------------------------------------------


def asset_bitmap(name: str) -> np.ndarray:
    with resources.as_file(resources.files("ifgi") / "assets" / f"{name}.pgm") as p:
        gray, _ = read_pgm(p)
    return gray > 0


SHARD_VERTICES = [(40, 22), (34, 60), (70, 64), (94, 40), (80, 16)]


@dataclass(frozen=True)
class Preset:
    name: str
    scene: SceneObject
    rois: RoiPair
    bitmap: np.ndarray = field(repr=False)
    kind: str = "stencil"
    max_param: float = 1.0


PRESETS = ("uo_stencil", "glass_shard", "bomb_lc")

# inside/outside pairs for the shard and bomb sit mirror-symmetric about the
# vertical centre line so the pump flux is equal in both
_ROIS = {
    "uo_stencil": RoiPair(Rect(50, 48, 16, 8), Rect(50, 60, 16, 8), Rect(100, 40, 24, 48)),
    "glass_shard": RoiPair(Rect(56, 34, 16, 16), Rect(56, 78, 16, 16), Rect(100, 72, 24, 48)),
    "bomb_lc": RoiPair(Rect(60, 36, 16, 16), Rect(60, 76, 16, 16), Rect(100, 72, 24, 48)),
}


def preset(name: str, phi: float = math.pi / 2, pitch: float = DEFAULT_PITCH) -> Preset:
    """Bundled scene plus its default ROIs.

    ``uo_stencil`` is an opaque "UO" sign, ``glass_shard`` a lossless phase
    region of phase ``phi`` and ``bomb_lc`` a 90 degree rotator pattern.
    """
    grid = SceneGrid(DEFAULT_SIZE, DEFAULT_SIZE, pitch)
    if name == "uo_stencil":
        bitmap = asset_bitmap("uo")
        return Preset(name, make_stencil(grid, bitmap, name), _ROIS[name].validate(grid), bitmap)
    if name == "glass_shard":
        bitmap = polygon_mask(grid, SHARD_VERTICES)
        scene = make_phase_shard(grid, bitmap, phi, name)
        return Preset(name, scene, _ROIS[name].validate(grid), bitmap, "phase", float(phi))
    if name == "bomb_lc":
        bitmap = asset_bitmap("bomb")
        scene = make_bomb_pattern(grid, bitmap, name)
        return Preset(name, scene, _ROIS[name].validate(grid), bitmap, "rotator", math.pi / 2)
    raise SceneError(f"unknown preset {name!r}; expected one of {PRESETS}")
