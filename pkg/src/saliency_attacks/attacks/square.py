"""Random-search square-patch baseline (L-infinity), optionally restricted
to a salient mask.

The perturbation starts as random per-column vertical stripes of
``+/- eps`` and evolves by proposing one square patch per iteration with a
fresh random sign, accepting a proposal only when the margin loss
improves.  Patch side follows the standard halving schedule of the
perturbed-area fraction, starting at 5% of the image, with halvings at
fixed iteration milestones.  When a mask is given, stripes and patches are
intersected with it, so the support never leaves the mask.
"""

from __future__ import annotations

import math

import numpy as np

from saliency_attacks.attacks.base import AttackConfig, AttackOutcome, _Success, start_run
from saliency_attacks.backend import BudgetExhausted, QueryLedger

_P_INIT = 0.05
# Iteration milestones of the halving schedule for the area fraction.
_P_MILESTONES = (10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000)


def _area_fraction(it: int) -> float:
    p = _P_INIT
    for milestone in _P_MILESTONES:
        if it > milestone:
            p /= 2.0
    return p


def square_attack(
    x: np.ndarray,
    y_gt: int,
    backend,
    config: AttackConfig,
    mask: np.ndarray | None = None,
) -> AttackOutcome:
    """Run the random-search baseline against one image.

    All randomness flows from ``config.seed``, so the run is bit-reproducible.
    Follows the same conventions as the refinement attack: the clean image
    is probed first, prior misclassification or an empty mask returns at
    ``queries == 1``, and budget exhaustion stops the search gracefully.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) image, got shape {x.shape}")
    h, w = x.shape[:2]
    if min(h, w) < 2:
        raise ValueError("square attack needs images at least 2 pixels per side")
    effective = np.ones((h, w), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)

    ledger = QueryLedger(config.budget)
    rng = np.random.default_rng(config.seed)
    run, degenerate = start_run(x, y_gt, backend, ledger, config.epsilon, effective)
    if degenerate is not None:
        return degenerate

    signs = np.broadcast_to(
        rng.integers(0, 2, size=w, dtype=np.int8) * 2 - 1, (h, w)
    ).copy()
    signs[~effective] = 0

    try:
        f_best = run.eval_signs(signs)
        it = 0
        while True:
            s = int(round(math.sqrt(_area_fraction(it) * h * w)))
            s = min(max(s, 1), min(h, w) - 1)
            r0 = int(rng.integers(0, h - s))
            c0 = int(rng.integers(0, w - s))
            patch_sign = np.int8(rng.integers(0, 2) * 2 - 1)
            cand = signs.copy()
            cand[r0 : r0 + s, c0 : c0 + s] = patch_sign
            cand[~effective] = 0
            f = run.eval_signs(cand)
            if f > f_best:
                f_best, signs = f, cand
            it += 1
    except _Success as hit:
        return run.outcome(hit.signs)
    except BudgetExhausted:
        pass
    return run.outcome()
