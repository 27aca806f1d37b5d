"""Jones-calculus kernel for one photon crossing a two-path interferometer.

Conventions
-----------
Splitters are lossless (``r + t = 1``) and put a factor ``i`` on reflection,
nothing on transmission.  The input splitter reflects with probability ``r``;
the exit splitter has the ratios swapped (reflectivity ``t``, transmissivity
``r``).  The object sits in the transmission arm.  With those conventions the
two output ports are::

    c = i (r I + t J) e_in          constructive port
    d = sqrt(r t) (J - I) e_in      destructive port

Element matrices are plain ``complex`` numpy arrays of shape ``(..., 2, 2)``
and polarisation states are arrays of shape ``(2,)`` in the (H, V) basis.
Every probability function broadcasts over leading axes, so a whole rastered
scene can be evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-12

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)


class ContractViolation(ValueError):
    """Raised when a probability or state leaves its physical range."""


def normalized(state, tol: float = TOL) -> np.ndarray:
    """Return ``state`` as a complex Jones vector, checking unit norm."""
    e = np.asarray(state, dtype=complex).reshape(2)
    norm2 = float(np.vdot(e, e).real)
    if abs(norm2 - 1.0) > tol:
        raise ContractViolation(f"input polarisation not normalised: |e|^2 = {norm2!r}")
    return e


def is_passive(m, tol: float = TOL) -> np.ndarray:
    """True where every singular value of ``m`` is at most ``1 + tol``."""
    sv = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    return np.all(sv <= 1.0 + tol, axis=-1)


@dataclass(frozen=True)
class InterferometerSpec:
    """Splitter ratios, interference quality and input polarisation.

    ``gamma`` scales the coherent cross term between the two arms; 1 is a
    perfectly aligned interferometer, 0 a fully incoherent one.
    """

    r: float = 0.5
    t: float = 0.5
    gamma: float = 1.0
    input_pol: tuple[complex, complex] = (1.0 + 0j, 0j)

    def __post_init__(self):
        for name in ("r", "t", "gamma"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ContractViolation(f"{name} must lie in [0, 1], got {value!r}")
            object.__setattr__(self, name, value)
        if abs(self.r + self.t - 1.0) > TOL:
            raise ContractViolation(f"splitters must be lossless: r + t = {self.r + self.t!r}")
        e = normalized(self.input_pol)
        object.__setattr__(self, "input_pol", (complex(e[0]), complex(e[1])))

    @classmethod
    def from_ratio(cls, r: float, gamma: float = 1.0, input_pol=(1.0 + 0j, 0j)):
        return cls(r=r, t=1.0 - r, gamma=gamma, input_pol=input_pol)

    @property
    def e_in(self) -> np.ndarray:
        return np.array(self.input_pol, dtype=complex)

    @property
    def exit_reflectivity(self) -> float:
        return self.t

    @property
    def exit_transmissivity(self) -> float:
        return self.r


def _apply(obj, e):
    return np.einsum("...ij,j->...i", np.asarray(obj, dtype=complex), e)


def port_amplitudes(obj, spec: InterferometerSpec):
    """Unnormalised Jones vectors leaving the constructive and destructive ports.

    Parameters
    ----------
    obj : array_like, shape (..., 2, 2)
        Element matrix (or stack of them) of the object in the transmission arm.
    spec : InterferometerSpec

    Returns
    -------
    c, d : ndarray, shape (..., 2)
    """
    e = spec.e_in
    je = _apply(obj, e)
    c = 1j * (spec.r * e + spec.t * je)
    d = np.sqrt(spec.r * spec.t) * (je - e)
    return c, d


def _checked(p, name):
    p = np.asarray(p, dtype=float)
    if np.any(p < -TOL) or np.any(p > 1.0 + TOL):
        bad = p[(p < -TOL) | (p > 1.0 + TOL)].ravel()[0]
        raise ContractViolation(f"{name} = {bad!r} outside [0, 1]")
    return np.clip(p, 0.0, 1.0)


def port_probabilities(obj, spec: InterferometerSpec):
    """Detection probabilities at each port and absorption probability.

    With ``s = |J e|^2`` and ``x = Re(e^H J e)``::

        p_c = r^2 + t^2 s + 2 r t gamma x
        p_d = r t (1 + s) - 2 r t gamma x
        p_absorbed = t (1 - s)

    Returns ``(p_c, p_d, p_absorbed)``; arrays with the leading shape of
    ``obj``, or floats when ``obj`` is a single 2x2 matrix.

    Raises
    ------
    ContractViolation
        If any probability falls outside ``[-1e-12, 1 + 1e-12]`` (for example
        an element with gain).
    """
    e = spec.e_in
    je = _apply(obj, e)
    s = np.sum(np.abs(je) ** 2, axis=-1)
    x = np.real(np.sum(np.conj(e) * je, axis=-1))
    r, t, g = spec.r, spec.t, spec.gamma
    cross = 2.0 * r * t * g * x
    p_c = _checked(r * r + t * t * s + cross, "p_c")
    p_d = _checked(r * t * (1.0 + s) - cross, "p_d")
    p_a = _checked(t * (1.0 - s), "p_absorbed")
    if p_c.ndim == 0:
        return float(p_c), float(p_d), float(p_a)
    return p_c, p_d, p_a


def transmission(obj, input_pol=H) -> np.ndarray | float:
    """Intensity transmission ``|J e|^2`` of a single-path probe."""
    je = _apply(obj, normalized(input_pol))
    s = np.sum(np.abs(je) ** 2, axis=-1)
    return float(s) if np.ndim(s) == 0 else s


def interaction_probability(spec: InterferometerSpec) -> float:
    """Probability that the photon enters the object arm."""
    return spec.t


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def standard_element(kind: str, angle: float = 0.0) -> np.ndarray:
    """Textbook Jones matrix for a named element.

    ``angle`` is in radians: the phase for ``phase``, the rotation angle for
    ``rotator`` and the axis angle for ``half_wave`` and ``linear_polarizer``.
    Global phases are dropped.
    """
    if kind == "identity":
        return np.eye(2, dtype=complex)
    if kind == "opaque":
        return np.zeros((2, 2), dtype=complex)
    if kind == "phase":
        return np.exp(1j * angle) * np.eye(2, dtype=complex)
    if kind == "rotator":
        return _rotation(angle)
    if kind == "half_wave":
        c, s = np.cos(2 * angle), np.sin(2 * angle)
        return np.array([[c, s], [s, -c]], dtype=complex)
    if kind == "linear_polarizer":
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c * c, c * s], [c * s, s * s]], dtype=complex)
    raise ValueError(f"unknown element kind: {kind!r}")
