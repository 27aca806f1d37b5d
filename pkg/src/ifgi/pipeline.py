"""Full CGI and IFGI acquisitions with background subtraction.

CGI
    one coincidence image with the object straight in the probe beam, minus
    a shifted-gate image that registers only accidentals.
IFGI
    constructive-port (C) and destructive-port (D) images with the object,
    and a destructive-port image without the object (B) that captures the
    leakage of an imperfect interferometer.  Each channel gets its own
    shifted-gate accidental image, and the composed image is
    ``(C - acc_C) - (D - acc_D) - (B - acc_B)``.

All channels of one acquisition share the master seed and are separated by
fixed RNG stream numbers, so a report is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ifgi import jones
from ifgi.images import CountImage, SignedImage
from ifgi.scene import SceneObject, identity_scene
from ifgi.transport import DetectorSpec, SourceSpec, Tallies, run_frames

INT64_MAX = np.iinfo(np.int64).max

STREAMS = {"cgi": 0, "acc": 1, "c": 2, "d": 3, "b": 4, "acc_c": 5, "acc_d": 6, "acc_b": 7}

CGI_RECIPE = {"cgi": 1, "acc": -1}
IFGI_RECIPE = {"c": 1, "d": -1, "b": -1, "acc_c": -1, "acc_d": 1, "acc_b": 1}
PORT_MODES = ("sequential", "dual")


class CompositionError(ValueError):
    pass


def compose(images: dict[str, CountImage], recipe) -> SignedImage:
    """Exact signed sum ``sum(coef * images[name])``.

    ``recipe`` maps channel name to an integer coefficient, or is a sequence
    of ``(coef, name)`` terms.  Nothing is clamped; a sum that could exceed
    the int64 range raises :class:`OverflowError`.
    """
    terms = list(recipe.items()) if isinstance(recipe, dict) else [(n, c) for c, n in recipe]
    if not terms:
        raise CompositionError("empty recipe")
    grid = None
    bound = 0
    for name, coef in terms:
        if name not in images:
            raise CompositionError(f"recipe names unknown channel {name!r}")
        if int(coef) != coef:
            raise CompositionError(f"coefficient for {name!r} is not an integer")
        img = images[name]
        if grid is None:
            grid = img.grid
        elif img.grid != grid:
            raise CompositionError(f"channel {name!r} is on a different grid")
        top = int(img.counts.max()) if img.counts.size else 0
        bound += abs(int(coef)) * top
    if bound > INT64_MAX:
        raise OverflowError("composition could overflow int64")
    out = np.zeros(grid.shape, dtype=np.int64)
    for name, coef in terms:
        out += int(coef) * images[name].counts.astype(np.int64)
    return SignedImage(grid, out)


@dataclass(frozen=True, eq=False)
class RunReport:
    mode: str
    composed: SignedImage
    raw_channels: dict[str, CountImage]
    tallies: dict[str, Tallies]
    recipe: dict[str, int]
    config_echo: dict = field(default_factory=dict)

    @property
    def probe_tallies(self) -> Tallies:
        """Tallies of the channel in which the object was probed first."""
        return self.tallies["cgi" if self.mode == "cgi" else "c"]


def cgi_spec(input_pol=(1.0 + 0j, 0j)) -> jones.InterferometerSpec:
    """Fully transmissive splitter: the object sits alone in the probe path."""
    return jones.InterferometerSpec(r=0.0, t=1.0, gamma=1.0, input_pol=input_pol)


def _echo(mode, scene, spec, source, det, n_frames, seed, **extra):
    echo = {
        "mode": mode,
        "scene": scene.label,
        "grid": asdict(scene.grid),
        "source": asdict(source),
        "detector": asdict(det),
        "n_frames": int(n_frames),
        "seed": int(seed),
    }
    if spec is not None:
        echo["interferometer"] = {"r": spec.r, "t": spec.t, "gamma": spec.gamma, "input_pol": spec.input_pol}
    echo.update(extra)
    return echo


def run_cgi(
    scene: SceneObject,
    source: SourceSpec,
    det: DetectorSpec,
    n_frames: int,
    seed: int,
    *,
    input_pol=(1.0 + 0j, 0j),
    accidental_correction: bool = True,
    workers: int = 1,
) -> RunReport:
    spec = cgi_spec(input_pol)
    coinc = run_frames(scene, spec, source, det.with_gate("coincidence"), n_frames, "C", seed,
                       stream=STREAMS["cgi"], workers=workers)
    acc = run_frames(scene, spec, source, det.with_gate("shifted"), n_frames, "C", seed,
                     stream=STREAMS["acc"], workers=workers)
    raw = {"cgi": coinc.image_c, "acc": acc.image_c}
    recipe = dict(CGI_RECIPE) if accidental_correction else {"cgi": 1}
    echo = _echo("cgi", scene, None, source, det, n_frames, seed,
                 accidental_correction=accidental_correction, channels=sorted(raw))
    return RunReport("cgi", compose(raw, recipe), raw, {"cgi": coinc.tallies, "acc": acc.tallies}, recipe, echo)


def run_ifgi(
    scene: SceneObject,
    spec: jones.InterferometerSpec,
    source: SourceSpec,
    det: DetectorSpec,
    n_frames: int,
    seed: int,
    *,
    accidental_correction: bool = True,
    port_mode: str = "sequential",
    workers: int = 1,
) -> RunReport:
    """IFGI acquisition; ``port_mode="dual"`` reads C and D in the same run."""
    if port_mode not in PORT_MODES:
        raise ValueError(f"port_mode must be one of {PORT_MODES}, got {port_mode!r}")
    empty = identity_scene(scene.grid)
    coinc = det.with_gate("coincidence")
    shifted = det.with_gate("shifted")

    def run(obj, d, ports, channel):
        return run_frames(obj, spec, source, d, n_frames, ports, seed, stream=STREAMS[channel], workers=workers)

    if port_mode == "sequential":
        c, d = run(scene, coinc, "C", "c"), run(scene, coinc, "D", "d")
        acc_c, acc_d = run(scene, shifted, "C", "acc_c"), run(scene, shifted, "D", "acc_d")
        images = {"c": c.image_c, "d": d.image_d, "acc_c": acc_c.image_c, "acc_d": acc_d.image_d}
        tallies = {"c": c.tallies, "d": d.tallies, "acc_c": acc_c.tallies, "acc_d": acc_d.tallies}
    else:
        cd = run(scene, coinc, "both", "c")
        acc_cd = run(scene, shifted, "both", "acc_c")
        images = {"c": cd.image_c, "d": cd.image_d, "acc_c": acc_cd.image_c, "acc_d": acc_cd.image_d}
        tallies = {"c": cd.tallies, "d": cd.tallies, "acc_c": acc_cd.tallies, "acc_d": acc_cd.tallies}
    b, acc_b = run(empty, coinc, "D", "b"), run(empty, shifted, "D", "acc_b")
    images.update(b=b.image_d, acc_b=acc_b.image_d)
    tallies.update(b=b.tallies, acc_b=acc_b.tallies)

    recipe = dict(IFGI_RECIPE) if accidental_correction else {"c": 1, "d": -1, "b": -1}
    echo = _echo("ifgi", scene, spec, source, det, n_frames, seed, accidental_correction=accidental_correction,
                 port_mode=port_mode, channels=sorted(images))
    return RunReport("ifgi", compose(images, recipe), images, tallies, recipe, echo)
