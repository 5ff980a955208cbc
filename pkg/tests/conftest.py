"""Shared test helpers: closed-form linear backends, scripted backends and
brute-force oracles over the discrete perturbation space."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

from saliency_attacks.backend import ClassifierBackend, LinearBackend, cw_loss

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def two_class_linear(weight_diff: np.ndarray, clean_margin: float, x_clean: np.ndarray):
    """Linear 2-class backend with a chosen clean-image margin.

    Class 0 carries `weight_diff` (flattened over the image), class 1 is
    zero; the bias is solved so that the clean margin (z0 - z1) equals
    `clean_margin`.
    """
    w = np.asarray(weight_diff, dtype=np.float64).ravel()
    bias0 = clean_margin - float(w @ np.asarray(x_clean, dtype=np.float64).ravel())
    weights = np.stack([w, np.zeros_like(w)])
    return LinearBackend(weights, np.array([bias0, 0.0]), tuple(x_clean.shape))


class ScriptedBackend(ClassifierBackend):
    """Returns pre-scripted margins by call order; label 0 is ground truth.

    Margin m produces logits [m, 0], so cw_loss = -max(m, 0) and the call
    is adversarial exactly when m < 0 (and on m == 0 argmax ties to 0).
    """

    def __init__(self, margins, input_shape=None):
        self.margins = list(margins)
        self.calls = 0
        self.input_shape = tuple(input_shape) if input_shape else None
        self.n_classes = 2

    def raw_logits(self, x):
        m = self.margins[self.calls]
        self.calls += 1
        return np.array([m, 0.0])


class LoggingBackend(ClassifierBackend):
    """Wraps a backend, recording logits (and images) per evaluation."""

    def __init__(self, inner, keep_images=False):
        self.inner = inner
        self.log = []
        self.images = [] if keep_images else None

    @property
    def input_shape(self):
        return self.inner.input_shape

    @property
    def n_classes(self):
        return self.inner.n_classes

    def raw_logits(self, x):
        z = self.inner.raw_logits(x)
        self.log.append(np.asarray(z, dtype=np.float64))
        if self.images is not None:
            self.images.append(np.asarray(x).copy())
        return z


def _quantized_deltas(x: np.ndarray, idx: np.ndarray, epsilon: float) -> np.ndarray:
    """Exact per-location intensity deltas for signs -1/0/+1.

    Attacked images are built in float32, so the oracle enumerates over the
    same quantized pixel values the engine produces (exact in float64
    afterwards).  Returns an array of shape (3, n): rows are sign -1, 0, +1.
    """
    eps32 = np.float32(epsilon)
    vals = np.asarray(x[idx[:, 0], idx[:, 1], 0], dtype=np.float32)
    minus = np.clip(vals - eps32, np.float32(0), np.float32(1))
    plus = np.clip(vals + eps32, np.float32(0), np.float32(1))
    return np.stack(
        [
            minus.astype(np.float64) - vals.astype(np.float64),
            np.zeros(len(idx)),
            plus.astype(np.float64) - vals.astype(np.float64),
        ]
    )


def enumerate_best(backend: LinearBackend, x: np.ndarray, mask: np.ndarray, epsilon: float):
    """Exhaustive optimum of the margin loss over {-eps,0,+eps}^|S|.

    Exact for linear backends on single-channel images; float32 pixel
    quantization and clipping are reproduced exactly.  Returns
    ``(f_star, best_signs)``.
    """
    assert x.shape[2] == 1, "enumeration oracle covers single-channel images"
    h, w = mask.shape
    idx = np.argwhere(np.asarray(mask, dtype=bool))
    n = len(idx)
    assert n <= 12, "enumeration capped at 3**12 states"
    combos = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)

    wc = backend.weights.reshape(backend.n_classes, h, w)
    w_sel = wc[:, idx[:, 0], idx[:, 1]]  # (K, n)
    x64 = np.asarray(x, dtype=np.float64).ravel()
    base = backend.weights @ x64 + backend.bias  # (K,)

    deltas = _quantized_deltas(x, idx, epsilon)  # (3, n)
    dv = deltas[combos + 1, np.arange(n)[None, :]]  # (m, n)
    logits = base[None, :] + dv @ w_sel.T  # (m, K)

    y = 0
    others = np.max(np.delete(logits, y, axis=1), axis=1)
    f = -np.maximum(logits[:, y] - others, 0.0)
    best = int(np.argmax(f))
    signs = np.zeros((h, w), dtype=np.int8)
    signs[idx[:, 0], idx[:, 1]] = combos[best]
    return float(f[best]), signs


def single_block_best(backend, x, mask, epsilon, block_side):
    """Best one-block wholly-signed assignment, by direct evaluation.

    Images are built with the same float32 arithmetic the engines use.
    """
    side = x.shape[0]
    x32 = np.asarray(x, dtype=np.float32)
    best_f, best_signs = -np.inf, None
    for r0 in range(0, side, block_side):
        for c0 in range(0, side, block_side):
            sub = mask[r0 : r0 + block_side, c0 : c0 + block_side]
            if not sub.any():
                continue
            for sgn in (1, -1):
                signs = np.zeros((side, side), dtype=np.int8)
                signs[r0 : r0 + block_side, c0 : c0 + block_side][sub] = sgn
                delta = np.float32(epsilon) * signs.astype(np.float32)
                img = np.clip(x32 + delta[:, :, None], 0, 1).astype(np.float32)
                f = cw_loss(backend.raw_logits(img), 0)
                if f > best_f:
                    best_f, best_signs = f, signs
    return best_f, best_signs


@pytest.fixture(scope="session")
def fixture_dir():
    if not FIXTURES.exists():
        pytest.skip("committed fixture bundle not present")
    return FIXTURES
