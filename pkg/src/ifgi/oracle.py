"""Closed-form expectations used to validate the Monte Carlo.

Count changes follow the convention of the theory: they are taken relative
to the same interferometer with no object.  For an opaque object and
``r + t = 1`` the constructive port loses ``n (1 - r^2)`` photons, the
destructive port gains ``n r t`` and the subtracted image changes by
``n (r^2 - r t - 1)``; conventional ghost imaging loses all ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.ndimage import gaussian_filter

from ifgi import jones
from ifgi.metrics import delta_n
from ifgi.scene import RoiPair, SceneObject
from ifgi.transport import DetectorSpec, SourceSpec, pump_pixel_weights

RATIO_TOL = 1e-12


@dataclass(frozen=True)
class ExpectationRecord:
    n: float
    r: float
    t: float
    gamma: float
    expected_c: float
    expected_d: float
    expected_absorbed: float
    delta_c: float
    delta_d: float
    delta_n_ifgi: float
    delta_n_cgi: float


def _check_ratio(r, t):
    if abs(r + t - 1.0) > RATIO_TOL:
        raise ValueError(f"splitting ratios must satisfy r + t = 1, got r={r!r}, t={t!r}")


def expected_counts(n: float, spec: jones.InterferometerSpec, obj) -> ExpectationRecord:
    p_c, p_d, p_a = jones.port_probabilities(obj, spec)
    b_c, b_d, _ = jones.port_probabilities(np.eye(2, dtype=complex), spec)
    s = jones.transmission(obj, spec.e_in)
    delta_c = n * (p_c - b_c)
    delta_d = n * (p_d - b_d)
    return ExpectationRecord(
        n=n,
        r=spec.r,
        t=spec.t,
        gamma=spec.gamma,
        expected_c=n * p_c,
        expected_d=n * p_d,
        expected_absorbed=n * p_a,
        delta_c=delta_c,
        delta_d=delta_d,
        delta_n_ifgi=delta_c - delta_d,
        delta_n_cgi=n * (s - 1.0),
    )


def delta_n_ifgi(n: float, r: float, t: float) -> float:
    _check_ratio(r, t)
    return n * (r * r - r * t - 1.0)


def gain(r: float) -> float:
    """ΔN_IFGI / ΔN_CGI for an opaque object at input reflectivity ``r``."""
    return delta_n_ifgi(1.0, r, 1.0 - r) / -1.0


def _objective(r: Fraction) -> Fraction:
    return abs(r * r - r * (1 - r) - 1)


def grid_search_splitting(step=Fraction(1, 10**4), lo=Fraction(0), hi=Fraction(1)) -> Fraction:
    """Brute-force argmax of ``|r^2 - r(1 - r) - 1|`` on a grid, in exact arithmetic."""
    step, lo, hi = Fraction(step), Fraction(lo), Fraction(hi)
    n = int((hi - lo) / step)
    best = max(range(n + 1), key=lambda k: (_objective(lo + k * step), -k))
    return lo + best * step


def optimal_splitting(tol: float = 1e-9) -> tuple[float, float]:
    """Input reflectivity maximising the IFGI gain, and that gain.

    ``|r^2 - r(1 - r) - 1| = |2 r^2 - r - 1|`` has its stationary point at
    ``r = 1/4``.  The closed form is cross-checked by a brute-force scan
    refined until its step is below ``tol``.
    """
    r_closed = 0.25
    g_closed = abs(2 * r_closed**2 - r_closed - 1.0)

    # odd denominators keep r = 1/4 off every grid node
    step = Fraction(1, 3001)
    lo, hi = Fraction(0), Fraction(1)
    r_scan = grid_search_splitting(step, lo, hi)
    while step > Fraction(tol) / 10:
        lo, hi = max(Fraction(0), r_scan - step), min(Fraction(1), r_scan + step)
        step /= 97
        r_scan = grid_search_splitting(step, lo, hi)
    if abs(float(r_scan) - r_closed) > tol or abs(float(_objective(r_scan)) - g_closed) > tol:
        raise ArithmeticError(f"scan optimum {float(r_scan)!r} disagrees with closed form {r_closed!r}")
    return r_closed, g_closed


def phase_signal(n: float, r: float, t: float, phi: float) -> float:
    """Expected destructive-port counts for a lossless phase ``phi``."""
    _check_ratio(r, t)
    return 2.0 * n * r * t * (1.0 - np.cos(phi))


# --- expected images ----------------------------------------------------------


def pair_flux(source: SourceSpec, det: DetectorSpec, grid, n_pairs: float) -> np.ndarray:
    """Expected bucket-and-camera-detected pairs per pixel, ignoring the object."""
    return n_pairs * det.eta_bucket * det.eta_camera * pump_pixel_weights(source, grid)


def expected_port_image(scene: SceneObject, spec, source: SourceSpec, det: DetectorSpec,
                        n_pairs: float, port: str) -> np.ndarray:
    """Expected coincidence image on ``port`` ("C" or "D"), accidentals excluded.

    The per-pixel port probability is blurred by the idler-signal offset
    (``sqrt(2) * corr_sigma``) before weighting with the pump flux.
    """
    p_c, p_d, _ = jones.port_probabilities(scene.elements, spec)
    p = p_c if port == "C" else p_d
    blur = np.sqrt(2.0) * source.corr_sigma / scene.grid.pitch
    if blur > 0:
        p = gaussian_filter(p, blur, mode="nearest")
    return pair_flux(source, det, scene.grid, n_pairs) * p


def expected_composed(mode: str, scene: SceneObject, spec, source, det, n_pairs: float) -> np.ndarray:
    """Expected accidental-corrected composed image for ``mode`` cgi or ifgi."""
    from ifgi.pipeline import cgi_spec
    from ifgi.scene import identity_scene

    if mode == "cgi":
        return expected_port_image(scene, cgi_spec(spec.input_pol if spec else jones.H), source, det, n_pairs, "C")
    c = expected_port_image(scene, spec, source, det, n_pairs, "C")
    d = expected_port_image(scene, spec, source, det, n_pairs, "D")
    b = expected_port_image(identity_scene(scene.grid), spec, source, det, n_pairs, "D")
    return c - d - b


def predicted_delta_n(mode, scene, spec, source, det, n_pairs, rois: RoiPair) -> float:
    return delta_n(expected_composed(mode, scene, spec, source, det, n_pairs), rois)


def expected_exit_counts(scene: SceneObject, spec, source: SourceSpec, n_pairs: float) -> ExpectationRecord:
    """Port and absorption totals summed over the pump profile (what transport tallies)."""
    w = pump_pixel_weights(source, scene.grid)
    p_c, p_d, p_a = jones.port_probabilities(scene.elements, spec)
    s = jones.transmission(scene.elements, spec.e_in)
    b_c, b_d, _ = jones.port_probabilities(np.eye(2, dtype=complex), spec)
    ec, ed, ea = (n_pairs * float(np.sum(w * p)) for p in (p_c, p_d, p_a))
    return ExpectationRecord(
        n=n_pairs, r=spec.r, t=spec.t, gamma=spec.gamma,
        expected_c=ec, expected_d=ed, expected_absorbed=ea,
        delta_c=ec - n_pairs * b_c, delta_d=ed - n_pairs * b_d,
        delta_n_ifgi=(ec - n_pairs * b_c) - (ed - n_pairs * b_d),
        delta_n_cgi=n_pairs * (float(np.sum(w * s)) - 1.0),
    )
