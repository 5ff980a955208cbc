"""Discrete sign-grid perturbations.

A perturbation assigns each spatial location one of ``{-1, 0, +1}``; the
attacked image is ``clip(x + epsilon * sign, 0, 1)`` with the same sign
applied to every channel of a location.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PerturbationState:
    """Per-location signs over the ``(H, W)`` grid plus the magnitude epsilon.

    When `mask` is supplied at construction, the support (non-zero signs)
    must be contained in it.
    """

    signs: np.ndarray
    epsilon: float
    mask: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=np.int8)
        if signs.ndim != 2:
            raise ValueError(f"signs must be a 2-D grid, got shape {signs.shape}")
        if signs.size and not np.isin(signs, (-1, 0, 1)).all():
            raise ValueError("signs must take values in {-1, 0, +1}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != signs.shape:
                raise ValueError("mask geometry must match the sign grid")
            if np.any((signs != 0) & ~mask):
                raise ValueError("perturbation support escapes the supplied mask")
        signs = signs.copy()
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def zeros(cls, height: int, width: int, epsilon: float) -> "PerturbationState":
        return cls(np.zeros((height, width), dtype=np.int8), epsilon)

    @property
    def support(self) -> np.ndarray:
        """Boolean grid of perturbed locations."""
        return self.signs != 0

    def replace_signs(self, signs: np.ndarray) -> "PerturbationState":
        return PerturbationState(signs, self.epsilon, self.mask)


def apply_perturbation(x: np.ndarray, state: PerturbationState) -> np.ndarray:
    """Apply a sign-grid perturbation to an image.

    ``out(r, c, ch) = clip(x(r, c, ch) + sign(r, c) * epsilon, 0, 1)``.
    The input image is left unmodified.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) image, got shape {x.shape}")
    if state.signs.shape != x.shape[:2]:
        raise ValueError(
            f"sign grid {state.signs.shape} does not match image spatial dims {x.shape[:2]}"
        )
    delta = state.epsilon * state.signs.astype(np.float32)
    return np.clip(x + delta[:, :, None], 0.0, 1.0).astype(np.float32)
