"""Scenario configuration: a flat ``section.key = value`` text file.

Example::

    scene.preset = uo_stencil
    interferometer.r = 0.25
    source.pair_rate = 4000
    detector.accidental_rate_camera = 0.01
    run.n_frames = 500
    run.seed = 7

Unknown keys are rejected.  ``to_text`` writes every resolved key, and
``parse_config(to_text(cfg)) == cfg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from ifgi import jones
from ifgi.scene import PRESETS, Preset, Rect, RoiPair, SceneError, SceneObject, load_scene, preset
from ifgi.transport import DetectorSpec, SourceSpec

MODES = ("cgi", "ifgi")
PORT_MODES = ("sequential", "dual")
CORRECTIONS = ("per_channel", "none")

_S = 1 / math.sqrt(2)
NAMED_POLARIZATIONS = {
    "H": (1 + 0j, 0j),
    "V": (0j, 1 + 0j),
    "D": (_S + 0j, _S + 0j),
    "A": (_S + 0j, -_S + 0j),
    "R": (_S + 0j, -1j * _S),
    "L": (_S + 0j, 1j * _S),
}


class ConfigError(ValueError):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = None if path is None else str(path)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    scene_preset: str | None = "uo_stencil"
    scene_file: str | None = None
    scene_descriptor: str | None = None
    phi: float = math.pi / 2
    pitch: float = 0.05
    interferometer: jones.InterferometerSpec = field(default_factory=jones.InterferometerSpec)
    source: SourceSpec = field(default_factory=SourceSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    n_frames: int = 500
    mode: str = "ifgi"
    port_mode: str = "sequential"
    accidental_correction: str = "per_channel"
    rois: RoiPair | None = None
    out_dir: str = "out"

    def load(self) -> tuple[SceneObject, RoiPair, Preset | None]:
        """Build the scene and the ROIs it is measured with."""
        if self.scene_preset is not None:
            pre = preset(self.scene_preset, phi=self.phi, pitch=self.pitch)
            obj, rois = pre.scene, self.rois or pre.rois
        else:
            pre = None
            obj = load_scene(self.scene_file, self.scene_descriptor, pitch=self.pitch)
            rois = self.rois
            if rois is None:
                raise ConfigError("scene files need roi.inside, roi.outside and roi.background")
        try:
            rois.validate(obj.grid)
        except SceneError as exc:
            raise ConfigError(str(exc)) from None
        return obj, rois, pre

    def resolved(self) -> ScenarioConfig:
        """Copy with the ROIs filled in from the scene."""
        _, rois, _ = self.load()
        return replace(self, rois=rois)

    def with_param(self, name: str, value: float) -> ScenarioConfig:
        if name == "r_ratio":
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"r_ratio {value!r} outside [0, 1]")
            spec = self.interferometer
            return replace(self, interferometer=jones.InterferometerSpec(value, 1.0 - value, spec.gamma, spec.input_pol))
        if name == "gamma":
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"gamma {value!r} outside [0, 1]")
            return replace(self, interferometer=replace(self.interferometer, gamma=value))
        if name == "phi":
            if not math.isfinite(value):
                raise ConfigError(f"phi {value!r} is not finite")
            return replace(self, phi=value)
        raise ConfigError(f"unknown sweep parameter {name!r}; expected r_ratio, gamma or phi")


SWEEP_PARAMS = ("r_ratio", "gamma", "phi")


def _parse_pol(text):
    text = text.strip()
    if text.upper() in NAMED_POLARIZATIONS:
        return NAMED_POLARIZATIONS[text.upper()]
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"polarisation must be a name {sorted(NAMED_POLARIZATIONS)} or 'h, v' complex pair")
    h, v = (complex(p.replace(" ", "")) for p in parts)
    norm = math.sqrt(abs(h) ** 2 + abs(v) ** 2)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"polarisation {text!r} is not normalised")
    return (h / norm, v / norm) if abs(norm - 1.0) > 1e-12 else (h, v)


def read_keyvalues(text: str, origin="<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'", origin)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"{origin}:{lineno}: key {key!r} must be section.name", origin)
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}", origin)
        out[key] = value
    return out


KEYS = (
    "scene.preset", "scene.file", "scene.descriptor", "scene.phi", "scene.pitch",
    "interferometer.r", "interferometer.t", "interferometer.gamma", "interferometer.input_pol",
    "source.pump_sigma", "source.corr_sigma", "source.pair_rate",
    "detector.eta_bucket", "detector.eta_camera", "detector.dark_rate_bucket", "detector.accidental_rate_camera",
    "run.n_frames", "run.seed", "run.mode", "run.port_mode", "run.accidental_correction",
    "roi.inside", "roi.outside", "roi.background",
    "output.dir",
)


def parse_config(text: str, origin="<config>", base_dir=None, seed: int | None = None) -> ScenarioConfig:
    """Parse and validate configuration text.

    Relative scene paths resolve against ``base_dir``.  ``seed`` overrides
    ``run.seed``; one of the two is required.
    """
    kv = read_keyvalues(text, origin)
    unknown = sorted(set(kv) - set(KEYS))
    if unknown:
        raise ConfigError(f"{origin}: unknown keys {', '.join(unknown)}", origin)
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def get(key, conv, default):
        if key not in kv:
            return default
        try:
            return conv(kv[key])
        except (ValueError, TypeError, SceneError) as exc:
            raise ConfigError(f"{origin}: bad value for {key}: {exc}", origin) from None

    def path_or_none(key):
        if key not in kv:
            return None
        p = Path(kv[key])
        p = p if p.is_absolute() else base / p
        if not p.is_file():
            raise ConfigError(f"file not found: {p}", p)
        return str(p.resolve())

    if seed is None:
        if "run.seed" not in kv:
            raise ConfigError(f"{origin}: run.seed is required", origin)
        seed = get("run.seed", int, None)
    if not 0 <= int(seed) < 2**64:
        raise ConfigError(f"seed {seed} outside the unsigned 64-bit range", origin)

    scene_file = path_or_none("scene.file")
    scene_descriptor = path_or_none("scene.descriptor")
    if scene_file is not None and "scene.preset" in kv:
        raise ConfigError(f"{origin}: give scene.preset or scene.file, not both", origin)
    scene_preset = None if scene_file is not None else kv.get("scene.preset", "uo_stencil")
    if scene_preset is not None and scene_preset not in PRESETS:
        raise ConfigError(f"{origin}: unknown preset {scene_preset!r}; expected one of {PRESETS}", origin)
    if scene_file is not None and scene_descriptor is None:
        desc = Path(scene_file).with_suffix(".scene")
        if not desc.is_file():
            raise ConfigError(f"file not found: {desc}", desc)

    try:
        r = get("interferometer.r", float, None)
        t = get("interferometer.t", float, None)
        if r is None and t is None:
            r = t = 0.5
        elif r is None:
            r = 1.0 - t
        elif t is None:
            t = 1.0 - r
        spec = jones.InterferometerSpec(
            r=r, t=t,
            gamma=get("interferometer.gamma", float, 1.0),
            input_pol=get("interferometer.input_pol", _parse_pol, (1 + 0j, 0j)),
        )
        source = SourceSpec(
            pump_sigma=get("source.pump_sigma", float, 3.0),
            corr_sigma=get("source.corr_sigma", float, 0.02),
            pair_rate=get("source.pair_rate", float, 4000.0),
        )
        detector = DetectorSpec(
            eta_bucket=get("detector.eta_bucket", float, 0.5),
            eta_camera=get("detector.eta_camera", float, 0.5),
            dark_rate_bucket=get("detector.dark_rate_bucket", float, 0.0),
            accidental_rate_camera=get("detector.accidental_rate_camera", float, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}", origin) from None

    n_frames = get("run.n_frames", int, 500)
    if n_frames < 0:
        raise ConfigError(f"{origin}: run.n_frames must be non-negative", origin)
    choices = {"run.mode": MODES, "run.port_mode": PORT_MODES, "run.accidental_correction": CORRECTIONS}
    defaults = {"run.mode": "ifgi", "run.port_mode": "sequential", "run.accidental_correction": "per_channel"}
    picked = {}
    for key, allowed in choices.items():
        picked[key] = kv.get(key, defaults[key])
        if picked[key] not in allowed:
            raise ConfigError(f"{origin}: {key} must be one of {allowed}, got {picked[key]!r}", origin)

    roi_keys = ("roi.inside", "roi.outside", "roi.background")
    given = [k for k in roi_keys if k in kv]
    if given and len(given) != 3:
        raise ConfigError(f"{origin}: roi.inside, roi.outside and roi.background go together", origin)
    rois = RoiPair(*(get(k, Rect.parse, None) for k in roi_keys)) if given else None

    pitch = get("scene.pitch", float, 0.05)
    if not pitch > 0:
        raise ConfigError(f"{origin}: scene.pitch must be positive", origin)

    cfg = ScenarioConfig(
        seed=int(seed),
        scene_preset=scene_preset,
        scene_file=scene_file,
        scene_descriptor=scene_descriptor,
        phi=get("scene.phi", float, math.pi / 2),
        pitch=pitch,
        interferometer=spec,
        source=source,
        detector=detector,
        n_frames=n_frames,
        mode=picked["run.mode"],
        port_mode=picked["run.port_mode"],
        accidental_correction=picked["run.accidental_correction"],
        rois=rois,
        out_dir=kv.get("output.dir", "out"),
    )
    try:
        cfg.load()
    except (SceneError, OSError) as exc:
        raise ConfigError(f"{origin}: {exc}", getattr(exc, "filename", None) or origin) from None
    return cfg


def load_config(path, seed: int | None = None) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config(text, origin=str(path), base_dir=path.parent, seed=seed)


def _c(z: complex) -> str:
    return repr(complex(z)).strip("()")


def to_text(cfg: ScenarioConfig) -> str:
    """Every key of a configuration, one per line, in a fixed order."""
    spec, src, det = cfg.interferometer, cfg.source, cfg.detector
    lines = []
    if cfg.scene_preset is not None:
        lines.append(f"scene.preset = {cfg.scene_preset}")
    else:
        lines.append(f"scene.file = {cfg.scene_file}")
        if cfg.scene_descriptor is not None:
            lines.append(f"scene.descriptor = {cfg.scene_descriptor}")
    lines += [
        f"scene.phi = {cfg.phi!r}",
        f"scene.pitch = {cfg.pitch!r}",
        f"interferometer.r = {spec.r!r}",
        f"interferometer.t = {spec.t!r}",
        f"interferometer.gamma = {spec.gamma!r}",
        f"interferometer.input_pol = {_c(spec.input_pol[0])}, {_c(spec.input_pol[1])}",
        f"source.pump_sigma = {src.pump_sigma!r}",
        f"source.corr_sigma = {src.corr_sigma!r}",
        f"source.pair_rate = {src.pair_rate!r}",
        f"detector.eta_bucket = {det.eta_bucket!r}",
        f"detector.eta_camera = {det.eta_camera!r}",
        f"detector.dark_rate_bucket = {det.dark_rate_bucket!r}",
        f"detector.accidental_rate_camera = {det.accidental_rate_camera!r}",
        f"run.n_frames = {cfg.n_frames}",
        f"run.seed = {cfg.seed}",
        f"run.mode = {cfg.mode}",
        f"run.port_mode = {cfg.port_mode}",
        f"run.accidental_correction = {cfg.accidental_correction}",
    ]
    if cfg.rois is not None:
        lines += [
            f"roi.inside = {cfg.rois.inside.to_text()}",
            f"roi.outside = {cfg.rois.outside.to_text()}",
            f"roi.background = {cfg.rois.background.to_text()}",
        ]
    lines.append(f"output.dir = {cfg.out_dir}")
    return "\n".join(lines) + "\n"
