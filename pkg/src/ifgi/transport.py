"""Monte Carlo transport of photon pairs through the imaging setup.

Each frame draws a Poisson number of pairs.  A pair is born at a position
drawn from the Gaussian pump profile truncated to the grid; the signal
photon (object arm) and the idler photon (camera arm) each land at that
position plus an independent Gaussian blur.  The signal photon is routed
through the interferometer by sampling the arm first (so interaction is
tallied exactly) and then its fate: absorbed by the object, or exiting the
constructive port C or the destructive port D.

The camera is triggered by the bucket detector.  In ``coincidence`` gate mode
the idler of each pair whose partner fired the selected bucket is recorded.
In ``shifted`` mode the camera still opens on every trigger but outside the
coincidence window, so only accidental counts reach it.  A frame in which
the bucket triggered at least once is a *gated frame*; every gated frame
adds Poisson accidentals at ``accidental_rate_camera`` per pixel.

Every frame owns an RNG stream derived from ``(seed, stream, frame)``, so a
run is bit-identical whether frames are processed serially or by a pool of
workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import ndtr, ndtri

from ifgi import jones
from ifgi.images import CountImage
from ifgi.scene import SceneGrid, SceneObject

MAX_RETRIES = 16
BLOCK_FRAMES = 64

NONE, PORT_C, PORT_D = 0, 1, 2
PORT_NAMES = {NONE: "none", PORT_C: "C", PORT_D: "D"}
GATE_MODES = ("coincidence", "shifted")
PORT_SELECT = ("C", "D", "both")


@dataclass(frozen=True)
class SourceSpec:
    """SPDC pair source.

    pump_sigma : Gaussian pump intensity radius in the image plane, mm.
    corr_sigma : per-photon blur of the pair position correlation, mm.
    pair_rate : expected pairs per frame.
    """

    pump_sigma: float = 3.0
    corr_sigma: float = 0.02
    pair_rate: float = 4000.0

    def __post_init__(self):
        if not self.pump_sigma > 0:
            raise ValueError(f"pump_sigma must be positive, got {self.pump_sigma!r}")
        if self.corr_sigma < 0:
            raise ValueError(f"corr_sigma must be non-negative, got {self.corr_sigma!r}")
        if self.pair_rate < 0:
            raise ValueError(f"pair_rate must be non-negative, got {self.pair_rate!r}")
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))


@dataclass(frozen=True)
class DetectorSpec:
    eta_bucket: float = 0.5
    eta_camera: float = 0.5
    dark_rate_bucket: float = 0.0  # counts per frame
    accidental_rate_camera: float = 0.0  # counts per pixel per gated frame
    gate_mode: str = "coincidence"

    def __post_init__(self):
        for name in ("eta_bucket", "eta_camera"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("dark_rate_bucket", "accidental_rate_camera"):
            value = float(getattr(self, name))
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")
            object.__setattr__(self, name, value)
        if self.gate_mode not in GATE_MODES:
            raise ValueError(f"gate_mode must be one of {GATE_MODES}, got {self.gate_mode!r}")

    def with_gate(self, gate_mode: str) -> DetectorSpec:
        return DetectorSpec(**{**asdict(self), "gate_mode": gate_mode})


@dataclass(frozen=True)
class PairEvent:
    birth_pixel: tuple[int, int]
    bucket_port: str  # "C", "D" or "none"
    camera_pixel: tuple[int, int] | None
    interacted: bool
    absorbed: bool


@dataclass
class Tallies:
    """Per-run counters.  ``pairs`` counts transported (on-grid) pairs."""

    frames: int = 0
    pairs: int = 0
    discarded: int = 0
    interacted: int = 0
    absorbed: int = 0
    exit_c: int = 0
    exit_d: int = 0
    clicks_c: int = 0
    clicks_d: int = 0
    dark_c: int = 0
    dark_d: int = 0
    gated_c: int = 0
    gated_d: int = 0
    coincidences_c: int = 0
    coincidences_d: int = 0
    accidentals_c: int = 0
    accidentals_d: int = 0

    def __add__(self, other: Tallies) -> Tallies:
        return Tallies(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    @property
    def interacted_unabsorbed(self) -> int:
        return self.interacted - self.absorbed

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class FrameResult:
    image_c: CountImage
    image_d: CountImage
    singles: CountImage  # every idler the camera detected, no coincidence selection
    tallies: Tallies


def frame_rng(seed: int, stream: int, frame: int) -> np.random.Generator:
    """Counter-based generator for one frame of one channel."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(frame)))
    return np.random.Generator(np.random.Philox(ss))


# --- pair sampling ----------------------------------------------------------


def _truncated_normal(rng, n, mu, sigma, lo, hi):
    a, b = ndtr((lo - mu) / sigma), ndtr((hi - mu) / sigma)
    x = mu + sigma * ndtri(a + rng.random(n) * (b - a))
    return np.clip(x, lo, np.nextafter(hi, lo))


def sample_pairs(source: SourceSpec, grid: SceneGrid, rng: np.random.Generator, n: int):
    """Draw ``n`` pairs.

    Returns ``(signal, idler, birth, discarded)`` where the first three are
    flat pixel indices (``row * width + col``) of the surviving pairs.  Pairs
    whose blurred photons leave the grid get fresh blur offsets up to
    ``MAX_RETRIES`` times, then are discarded.
    """
    w, h = grid.width, grid.height
    sig = source.pump_sigma / grid.pitch
    bx = _truncated_normal(rng, n, (w - 1) / 2, sig, -0.5, w - 0.5)
    by = _truncated_normal(rng, n, (h - 1) / 2, sig, -0.5, h - 0.5)
    birth = np.floor(by + 0.5).astype(np.int64) * w + np.floor(bx + 0.5).astype(np.int64)
    blur = source.corr_sigma / grid.pitch
    if blur == 0.0:
        return birth, birth.copy(), birth, 0

    sx = np.empty(n, np.int64)
    sy = np.empty(n, np.int64)
    ix = np.empty(n, np.int64)
    iy = np.empty(n, np.int64)
    todo = np.arange(n)
    for _ in range(MAX_RETRIES + 1):
        if todo.size == 0:
            break
        off = rng.standard_normal((4, todo.size)) * blur
        cand = (
            np.floor(bx[todo] + off[0] + 0.5).astype(np.int64),
            np.floor(by[todo] + off[1] + 0.5).astype(np.int64),
            np.floor(bx[todo] + off[2] + 0.5).astype(np.int64),
            np.floor(by[todo] + off[3] + 0.5).astype(np.int64),
        )
        ok = (
            (cand[0] >= 0) & (cand[0] < w) & (cand[2] >= 0) & (cand[2] < w)
            & (cand[1] >= 0) & (cand[1] < h) & (cand[3] >= 0) & (cand[3] < h)
        )
        done = todo[ok]
        sx[done], sy[done], ix[done], iy[done] = (c[ok] for c in cand)
        todo = todo[~ok]
    keep = np.ones(n, dtype=bool)
    keep[todo] = False
    signal = (sy * w + sx)[keep]
    idler = (iy * w + ix)[keep]
    return signal, idler, birth[keep], int(todo.size)


def sample_pair(source: SourceSpec, grid: SceneGrid, rng: np.random.Generator):
    """One pair as ``((row, col) signal, (row, col) idler)``, or ``None`` if discarded."""
    signal, idler, _, discarded = sample_pairs(source, grid, rng, 1)
    if discarded:
        return None
    return divmod(int(signal[0]), grid.width), divmod(int(idler[0]), grid.width)


# --- routing ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PixelTable:
    """Per-pixel routing probabilities of one scene under one interferometer."""

    p_c: np.ndarray
    p_d: np.ndarray
    p_abs: np.ndarray
    t: float

    @classmethod
    def build(cls, scene: SceneObject, spec: jones.InterferometerSpec) -> PixelTable:
        p_c, p_d, p_abs = jones.port_probabilities(scene.elements, spec)
        return cls(p_c.ravel(), p_d.ravel(), p_abs.ravel(), spec.t)


def route(signal, table: PixelTable, det: DetectorSpec, rng: np.random.Generator):
    """Sample arm, fate and detector clicks for signal photons at flat pixels ``signal``.

    Returns ``(interacted, absorbed, port, bucket, camera)``; ``port`` uses
    the ``NONE``/``PORT_C``/``PORT_D`` codes and ``bucket`` is the port code
    if the bucket detector on that port clicked, else ``NONE``.
    """
    u = rng.random((5, signal.size))
    p_c, p_d, p_abs = table.p_c[signal], table.p_d[signal], table.p_abs[signal]
    interacted = u[0] < table.t
    if table.t > 0:
        absorbed = interacted & (u[1] * table.t < p_abs)
    else:
        absorbed = np.zeros(signal.size, dtype=bool)
    alive = p_c + p_d
    with np.errstate(invalid="ignore", divide="ignore"):
        to_c = u[2] * alive < p_c
    port = np.where(absorbed, NONE, np.where(to_c, PORT_C, PORT_D))
    bucket = np.where(u[3] < det.eta_bucket, port, NONE)
    camera = u[4] < det.eta_camera
    return interacted, absorbed, port, bucket, camera


def transport_pair(pair, scene: SceneObject, spec: jones.InterferometerSpec, det: DetectorSpec, rng):
    """Route one ``(signal_pixel, idler_pixel)`` pair; see :func:`route`."""
    (sr, sc), (ir, ic) = pair
    w = scene.grid.width
    table = PixelTable.build(scene, spec)
    interacted, absorbed, _, bucket, camera = route(np.array([sr * w + sc]), table, det, rng)
    return PairEvent(
        birth_pixel=(sr, sc),
        bucket_port=PORT_NAMES[int(bucket[0])],
        camera_pixel=(ir, ic) if camera[0] else None,
        interacted=bool(interacted[0]),
        absorbed=bool(absorbed[0]),
    )


# --- frame loop ---------------------------------------------------------------


def _simulate_block(args):
    frames, grid, table, source, det, ports, seed, stream = args
    npix = grid.size
    hits = {PORT_C: [], PORT_D: []}
    singles = []
    tl = Tallies()
    coincidence = det.gate_mode == "coincidence"
    for frame in frames:
        rng = frame_rng(seed, stream, frame)
        n = int(rng.poisson(source.pair_rate))
        signal, idler, _, discarded = sample_pairs(source, grid, rng, n)
        interacted, absorbed, port, bucket, camera = route(signal, table, det, rng)
        dark = rng.poisson(det.dark_rate_bucket, size=2)
        tl.frames += 1
        tl.pairs += signal.size
        tl.discarded += discarded
        tl.interacted += int(interacted.sum())
        tl.absorbed += int(absorbed.sum())
        tl.exit_c += int(np.count_nonzero(port == PORT_C))
        tl.exit_d += int(np.count_nonzero(port == PORT_D))
        singles.append(idler[camera])
        for code, suffix, k in ((PORT_C, "c", 0), (PORT_D, "d", 1)):
            if code not in ports:
                continue
            fired = bucket == code
            clicks = int(fired.sum())
            setattr(tl, f"clicks_{suffix}", getattr(tl, f"clicks_{suffix}") + clicks)
            setattr(tl, f"dark_{suffix}", getattr(tl, f"dark_{suffix}") + int(dark[k]))
            if clicks + dark[k] == 0:
                continue
            setattr(tl, f"gated_{suffix}", getattr(tl, f"gated_{suffix}") + 1)
            if coincidence:
                recorded = idler[fired & camera]
                hits[code].append(recorded)
                setattr(tl, f"coincidences_{suffix}", getattr(tl, f"coincidences_{suffix}") + recorded.size)
            if det.accidental_rate_camera > 0:
                n_acc = int(rng.poisson(det.accidental_rate_camera * npix))
                hits[code].append(rng.integers(npix, size=n_acc))
                setattr(tl, f"accidentals_{suffix}", getattr(tl, f"accidentals_{suffix}") + n_acc)

    def accumulate(chunks):
        if not chunks:
            return np.zeros(npix, dtype=np.int64)
        return np.bincount(np.concatenate(chunks), minlength=npix)

    return accumulate(hits[PORT_C]), accumulate(hits[PORT_D]), accumulate(singles), tl


def run_frames(
    scene: SceneObject,
    spec: jones.InterferometerSpec,
    source: SourceSpec,
    det: DetectorSpec,
    n_frames: int,
    port_select: str = "both",
    seed: int = 0,
    *,
    stream: int = 0,
    workers: int = 1,
) -> FrameResult:
    """Simulate ``n_frames`` frames and accumulate per-port camera images.

    ``port_select`` picks which bucket detectors exist: ``"C"`` or ``"D"`` for
    the single-bucket hardware, ``"both"`` for the ideal dual-port setup.
    The image of an absent port stays zero.  ``stream`` separates channels
    that share a master seed.  Results do not depend on ``workers``.
    """
    if n_frames < 0:
        raise ValueError(f"n_frames must be non-negative, got {n_frames}")
    if port_select not in PORT_SELECT:
        raise ValueError(f"port_select must be one of {PORT_SELECT}, got {port_select!r}")
    ports = {"C": (PORT_C,), "D": (PORT_D,), "both": (PORT_C, PORT_D)}[port_select]
    grid = scene.grid
    table = PixelTable.build(scene, spec)
    blocks = [range(i, min(i + BLOCK_FRAMES, n_frames)) for i in range(0, n_frames, BLOCK_FRAMES)]
    tasks = [(b, grid, table, source, det, ports, seed, stream) for b in blocks]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_block, tasks))
    else:
        parts = [_simulate_block(t) for t in tasks]

    img_c = np.zeros(grid.size, dtype=np.int64)
    img_d = np.zeros(grid.size, dtype=np.int64)
    singles = np.zeros(grid.size, dtype=np.int64)
    tallies = Tallies()
    for c, d, s, tl in parts:
        img_c += c
        img_d += d
        singles += s
        tallies = tallies + tl
    shape = grid.shape
    return FrameResult(
        CountImage(grid, img_c.reshape(shape)),
        CountImage(grid, img_d.reshape(shape)),
        CountImage(grid, singles.reshape(shape)),
        tallies,
    )


def pump_pixel_weights(source: SourceSpec, grid: SceneGrid) -> np.ndarray:
    """Probability that a pair is born in each pixel (truncated Gaussian, exact)."""
    sig = source.pump_sigma / grid.pitch

    def axis(size):
        edges = np.arange(size + 1) - 0.5
        cdf = ndtr((edges - (size - 1) / 2) / sig)
        p = np.diff(cdf)
        return p / p.sum()

    return np.outer(axis(grid.height), axis(grid.width))


def expected_gated_fraction(scene, spec, source, det, port: str) -> float:
    """Probability that a frame contains at least one trigger on ``port``.

    Clicks are a thinned Poisson process, so the trigger count per frame is
    Poisson with mean ``pair_rate * eta_bucket * <p_port> + dark_rate``;
    edge discards are neglected.
    """
    weights = pump_pixel_weights(source, scene.grid)
    p_c, p_d, _ = jones.port_probabilities(scene.elements, spec)
    p = p_c if port == "C" else p_d
    mean = source.pair_rate * det.eta_bucket * float(np.sum(weights * p)) + det.dark_rate_bucket
    return float(-np.expm1(-mean))
