"""Imperceptibility measurement and batch aggregation.

Distances compare an original and a perturbed image of identical geometry:

* ``l0_fraction`` — fraction of spatial locations where any channel
  differs (a location count, matching the per-location perturbation
  model, not a per-channel entry count);
* ``l2`` — Euclidean norm over all ``H*W*C`` entries;
* ``linf`` — maximum absolute entry difference;
* ``mad`` — the perceptual MAD score (see :mod:`saliency_attacks.mad_metric`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from saliency_attacks.mad_metric import mad as _mad_score

DEFAULT_MAD_THRESHOLD = 30.0


def _check_pair(x: np.ndarray, x_adv: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise ValueError(f"geometry mismatch: {x.shape} vs {x_adv.shape}")
    return x, x_adv


def l0_fraction(x: np.ndarray, x_adv: np.ndarray) -> float:
    """Fraction of spatial locations changed in any channel."""
    x, x_adv = _check_pair(x, x_adv)
    changed = np.any(x != x_adv, axis=-1) if x.ndim == 3 else (x != x_adv)
    return float(changed.mean())


def l2(x: np.ndarray, x_adv: np.ndarray) -> float:
    """Euclidean distance over all entries."""
    x, x_adv = _check_pair(x, x_adv)
    return float(np.linalg.norm((x_adv - x).ravel()))


def linf(x: np.ndarray, x_adv: np.ndarray) -> float:
    """Maximum absolute entry difference."""
    x, x_adv = _check_pair(x, x_adv)
    return float(np.abs(x_adv - x).max()) if x.size else 0.0


@dataclass(frozen=True)
class ImperceptibilityReport:
    """Per-pair distance summary."""

    l0_fraction: float
    l2: float
    linf: float
    mad: float


def measure(x: np.ndarray, x_adv: np.ndarray) -> ImperceptibilityReport:
    """All four distances for one (original, perturbed) pair."""
    return ImperceptibilityReport(
        l0_fraction=l0_fraction(x, x_adv),
        l2=l2(x, x_adv),
        linf=linf(x, x_adv),
        mad=_mad_score(x, x_adv),
    )


@dataclass(frozen=True)
class AggregateStats:
    """Batch summary: success rates and moments over successful attacks.

    ``sr_true`` counts successes whose MAD does not exceed the threshold
    (boundary inclusive), so ``sr_true <= sr`` always.  Means and standard
    deviations are over successful attacks only; ``nan`` when there are
    none.
    """

    n: int
    sr: float
    sr_true: float
    mad_threshold: float
    l2_mean: float
    l2_sd: float
    l0_mean: float
    l0_sd: float
    mad_mean: float
    mad_sd: float


def aggregate(
    batch: Sequence[Tuple[bool, ImperceptibilityReport]],
    mad_threshold: float = DEFAULT_MAD_THRESHOLD,
) -> AggregateStats:
    """Fold a batch of (success, report) pairs into summary statistics.

    Order-independent; raises ``ValueError`` on an empty batch.
    """
    batch = list(batch)
    if not batch:
        raise ValueError("cannot aggregate an empty batch")
    n = len(batch)
    wins = [rep for ok, rep in batch if ok]
    sr = len(wins) / n
    sr_true = sum(1 for rep in wins if rep.mad <= mad_threshold) / n

    def moments(values: Iterable[float]):
        # Sorted before reduction: float summation order must not leak the
        # batch order into the result (aggregation is a pure fold).
        arr = np.sort(np.asarray(list(values), dtype=np.float64))
        if arr.size == 0:
            return float("nan"), float("nan")
        return float(arr.mean()), float(arr.std())

    l2_mean, l2_sd = moments(rep.l2 for rep in wins)
    l0_mean, l0_sd = moments(rep.l0_fraction for rep in wins)
    mad_mean, mad_sd = moments(rep.mad for rep in wins)
    return AggregateStats(
        n=n,
        sr=sr,
        sr_true=sr_true,
        mad_threshold=mad_threshold,
        l2_mean=l2_mean,
        l2_sd=l2_sd,
        l0_mean=l0_mean,
        l0_sd=l0_sd,
        mad_mean=mad_mean,
        mad_sd=mad_sd,
    )
