"""Image representation and raster / tensor I/O.

Images are ``float32`` arrays of shape ``(H, W, C)`` with ``C`` in ``{1, 3}``
and every intensity in ``[0, 1]``.  Saliency maps and masks are 2-D arrays of
shape ``(H, W)``.

Two on-disk formats are supported:

* 8-bit PNG (grayscale or RGB) for images, saliency maps and masks;
* a raw little-endian float32 container for lossless tensors:
  magic ``SRT1``, then ``u32`` height, width, channels, then
  ``H*W*C`` float32 values in row-major (H, W, C) order.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image as _PILImage
from scipy.ndimage import map_coordinates

TENSOR_MAGIC = b"SRT1"


def check_image(x: np.ndarray) -> np.ndarray:
    """Validate an image array and return it unchanged.

    Raises ``ValueError`` if `x` is not an ``(H, W, C)`` float array with
    ``C`` in ``{1, 3}`` and all values in ``[0, 1]``.
    """
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) image with C in {{1, 3}}, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"image spatial dims must be >= 1, got {x.shape[:2]}")
    if not np.issubdtype(x.dtype, np.floating):
        raise ValueError(f"image dtype must be floating, got {x.dtype}")
    if x.size and (float(x.min()) < 0.0 or float(x.max()) > 1.0):
        raise ValueError("image intensities must lie in [0, 1]")
    return x


def to_luma(x: np.ndarray) -> np.ndarray:
    """Collapse an ``(H, W, C)`` image to a 2-D luma plane.

    RGB uses the Rec. 601 weights ``0.299 R + 0.587 G + 0.114 B``;
    single-channel images pass through.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x
    if x.shape[2] == 1:
        return x[:, :, 0]
    return 0.299 * x[:, :, 0] + 0.587 * x[:, :, 1] + 0.114 * x[:, :, 2]


def _bilinear_coords(n_src: int, n_dst: int) -> np.ndarray:
    # Align-corners sampling: identity whenever n_dst == n_src.
    if n_dst == 1:
        return np.array([(n_src - 1) / 2.0])
    return np.arange(n_dst, dtype=np.float64) * (n_src - 1) / (n_dst - 1)


def resize_bilinear(x: np.ndarray, side: int) -> np.ndarray:
    """Resize an image or 2-D map to ``side x side`` with bilinear sampling.

    Uses align-corners coordinates, so resizing to the source side is an
    exact identity.  Output values are clipped to ``[0, 1]`` and returned
    as ``float32`` with the input's channel layout.

    Parameters
    ----------
    x : ndarray
        ``(H, W, C)`` image or ``(H, W)`` map.
    side : int
        Target side length, ``>= 1``.
    """
    if side < 1:
        raise ValueError(f"target side must be >= 1, got {side}")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, :, None]
    h, w = x.shape[:2]
    rr = _bilinear_coords(h, side)
    cc = _bilinear_coords(w, side)
    grid_r, grid_c = np.meshgrid(rr, cc, indexing="ij")
    out = np.empty((side, side, x.shape[2]), dtype=np.float64)
    for ch in range(x.shape[2]):
        out[:, :, ch] = map_coordinates(x[:, :, ch], [grid_r, grid_c], order=1, mode="nearest")
    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return out[:, :, 0] if squeeze else out


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB raster as a float image in [0, 1].

    Returns an ``(H, W, 1)`` or ``(H, W, 3)`` float32 array with
    intensities ``byte / 255``.  Unsupported bit depths are rejected.
    """
    with _PILImage.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise ValueError(f"unsupported bit depth for {path!r} (mode {im.mode})")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)[:, :, None]
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8)
        else:
            # Palette / alpha variants collapse onto the two supported layouts.
            conv = im.convert("L") if im.mode in ("1", "LA") else im.convert("RGB")
            arr = np.asarray(conv, dtype=np.uint8)
            if arr.ndim == 2:
                arr = arr[:, :, None]
    return (arr.astype(np.float32)) / 255.0


def save_image(x: np.ndarray, path) -> None:
    """Write an image to 8-bit PNG, quantizing with round-half-away."""
    x = check_image(x)
    arr = np.clip(np.rint(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        _PILImage.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        _PILImage.fromarray(arr, mode="RGB").save(path, format="PNG")


def save_tensor(x: np.ndarray, path) -> None:
    """Write a float tensor to the raw ``SRT1`` container."""
    x = np.ascontiguousarray(np.asarray(x, dtype="<f4"))
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) tensor, got shape {x.shape}")
    h, w, c = x.shape
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(x.tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    """Read a float tensor from the raw ``SRT1`` container."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"not an SRT1 tensor file: {path!r}")
        h, w, c = struct.unpack("<III", fh.read(12))
        payload = fh.read(h * w * c * 4)
    if len(payload) != h * w * c * 4:
        raise ValueError(f"truncated SRT1 tensor file: {path!r}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, c).copy()
