"""Figures of merit computed from images.

ΔN is the mean count per pixel outside the object minus the mean inside;
it scales with the photon number, which is what makes it usable to compare
methods at a matched photon budget.  The visibility normalises that
difference away and is reported for completeness only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ifgi.images import pixels
from ifgi.scene import Rect, RoiPair


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsRecord:
    delta_n: float
    visibility: float | None
    sigma_bg: float
    n_out_mean: float
    n_in_mean: float
    delta_n_err: float


def _region(image, rect: Rect) -> np.ndarray:
    data = pixels(image)
    if rect.area == 0:
        raise MetricsError("empty ROI")
    if not (0 <= rect.top and 0 <= rect.left and rect.top + rect.height <= data.shape[0]
            and rect.left + rect.width <= data.shape[1]):
        raise MetricsError(f"ROI {rect.to_text()} lies outside the image")
    return data[rect.slices]


def roi_mean(image, rect: Rect) -> float:
    return float(_region(image, rect).mean())


def delta_n(image, rois: RoiPair) -> float:
    return roi_mean(image, rois.outside) - roi_mean(image, rois.inside)


def delta_n_stderr(image, rois: RoiPair) -> float:
    """Standard error of :func:`delta_n` from the pixel scatter in each ROI."""
    total = 0.0
    for rect in (rois.outside, rois.inside):
        region = _region(image, rect)
        if region.size > 1:
            total += float(region.var(ddof=1)) / region.size
    return math.sqrt(total)


def visibility(image, rois: RoiPair) -> float:
    n_out, n_in = roi_mean(image, rois.outside), roi_mean(image, rois.inside)
    if n_out + n_in == 0:
        raise MetricsError("visibility undefined: N_out + N_in = 0")
    return (n_out - n_in) / (n_out + n_in)


def background_sigma(image, bg_roi) -> float:
    """Sample standard deviation (n - 1 normalisation) over the background ROI."""
    rect = bg_roi.background if isinstance(bg_roi, RoiPair) else bg_roi
    region = _region(image, rect)
    if region.size < 2:
        raise MetricsError("background ROI needs at least 2 pixels")
    return float(region.std(ddof=1))


def noise_prediction(sigma_single: float, n_channels: int) -> float:
    """Noise of a sum of ``n_channels`` independent images of equal noise."""
    if sigma_single < 0 or n_channels < 1:
        raise MetricsError("need sigma_single >= 0 and n_channels >= 1")
    return sigma_single * math.sqrt(n_channels)


def measure(image, rois: RoiPair) -> MetricsRecord:
    n_out, n_in = roi_mean(image, rois.outside), roi_mean(image, rois.inside)
    v = (n_out - n_in) / (n_out + n_in) if n_out + n_in != 0 else None
    return MetricsRecord(
        delta_n=n_out - n_in,
        visibility=v,
        sigma_bg=background_sigma(image, rois.background),
        n_out_mean=n_out,
        n_in_mean=n_in,
        delta_n_err=delta_n_stderr(image, rois),
    )
