"""Monte Carlo simulator of interaction-free ghost imaging (IFGI) versus
conventional ghost imaging (CGI).
"""

from ifgi.jones import (
    H,
    V,
    ContractViolation,
    InterferometerSpec,
    interaction_probability,
    port_amplitudes,
    port_probabilities,
    standard_element,
)
from ifgi.scene import RoiPair, Rect, SceneGrid, SceneObject, load_scene, preset
from ifgi.transport import DetectorSpec, SourceSpec, run_frames
from ifgi.pipeline import compose, run_cgi, run_ifgi

__version__ = "0.1.0"

__all__ = [
    "H",
    "V",
    "ContractViolation",
    "InterferometerSpec",
    "interaction_probability",
    "port_amplitudes",
    "port_probabilities",
    "standard_element",
    "RoiPair",
    "Rect",
    "SceneGrid",
    "SceneObject",
    "load_scene",
    "preset",
    "DetectorSpec",
    "SourceSpec",
    "run_frames",
    "compose",
    "run_cgi",
    "run_ifgi",
]
