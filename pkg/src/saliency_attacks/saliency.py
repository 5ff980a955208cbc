"""Salient-region masks: external map loading, spectral-residual saliency
and threshold binarization.

A saliency map scores every location in ``[0, 1]``; binarizing at a
threshold ``phi`` (boundary inclusive) yields the mask of locations an
attack may perturb.  Maps can come from any external salient-object
detector written as 8-bit grayscale PNG, or from the built-in
spectral-residual method, which needs nothing but the image itself.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as _PILImage
from scipy.ndimage import gaussian_filter, uniform_filter

from saliency_attacks.image import resize_bilinear, to_luma

#: working resolution of the spectral-residual pipeline
_SR_SIDE = 64
#: smoothing applied to the squared reconstruction magnitude
_SR_SIGMA = 2.5


def binarize(scores: np.ndarray, phi: float) -> np.ndarray:
    """Binary mask with bit 1 exactly where ``score >= phi``."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValueError(f"saliency map must be 2-D, got shape {scores.shape}")
    return scores >= phi


def complement(mask: np.ndarray) -> np.ndarray:
    """Bitwise negation of a mask."""
    return ~np.asarray(mask, dtype=bool)


def load_saliency(path, shape: tuple | None = None) -> np.ndarray:
    """Load an 8-bit grayscale saliency map as scores in [0, 1].

    If `shape` (H, W) is given and differs from the raster geometry, the
    map is bilinearly resized (square targets only) and clipped.
    """
    with _PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    scores = arr.astype(np.float64) / 255.0
    if shape is not None and scores.shape != tuple(shape):
        if shape[0] != shape[1]:
            raise ValueError(f"can only resize maps to square geometry, got {shape}")
        scores = resize_bilinear(scores, shape[0]).astype(np.float64)
    return np.clip(scores, 0.0, 1.0)


def save_mask(mask: np.ndarray, path) -> None:
    """Write a mask as 8-bit PNG with 0/255 semantics."""
    mask = np.asarray(mask, dtype=bool)
    _PILImage.fromarray((mask * np.uint8(255)), mode="L").save(path, format="PNG")


def spectral_residual(x: np.ndarray) -> np.ndarray:
    """Model-free saliency from the spectral residual of the luma plane.

    Pipeline: luma -> bilinear resize to 64x64 -> 2-D FFT -> log amplitude
    minus its 3x3 box-filtered mean -> inverse FFT of (residual, phase) ->
    squared magnitude -> Gaussian smoothing (sigma 2.5) -> bilinear upscale
    to the source side -> normalize to [0, 1] by the maximum.  A spectrally
    empty input (e.g. a constant image, whose mean-removed spectrum
    vanishes) yields the all-zero map.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) image, got shape {x.shape}")
    if x.shape[0] != x.shape[1]:
        raise ValueError("spectral residual expects square images")
    side = x.shape[0]

    luma = to_luma(x)
    small = resize_bilinear(luma, _SR_SIDE).astype(np.float64)
    small = small - small.mean()

    freq = np.fft.fft2(small)
    amplitude = np.abs(freq)
    peak = float(amplitude.max())
    if peak == 0.0:
        return np.zeros((side, side), dtype=np.float32)

    # Relative floor keeps the log defined and the residual invariant
    # under global intensity scaling; it is set high enough that exact
    # spectral zeros (e.g. sinc nulls of axis-aligned rectangles) do not
    # ring through the box-filter subtraction.
    log_amp = np.log(np.maximum(amplitude, peak * 1e-3))
    residual = log_amp - uniform_filter(log_amp, size=3, mode="nearest")
    phase = np.angle(freq)

    recon = np.fft.ifft2(np.exp(residual) * np.exp(1j * phase))
    energy = np.abs(recon) ** 2
    energy = gaussian_filter(energy, sigma=_SR_SIGMA, mode="reflect")

    scores = resize_bilinear(np.clip(energy, 0.0, None) / max(energy.max(), 1e-300), side)
    top = float(scores.max())
    if top == 0.0:
        return np.zeros((side, side), dtype=np.float32)
    return (scores / top).astype(np.float32)
