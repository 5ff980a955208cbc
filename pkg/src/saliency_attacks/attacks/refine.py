"""Recursive block-refinement attack.

The search keeps two disjoint location sets carrying ``+eps`` and ``-eps``
(encoded as one sign grid) and a running best objective ``f_hat``.  An
outer loop runs the refinement over the whole image with the initial block
side, halving it between passes while budget remains; the sign sets and
``f_hat`` persist across passes.

One refinement pass over a block splits it into children of side ``k``
intersected with the search mask (children with empty intersection are
skipped without queries).  At split level 1 each child is tried wholly
positive and wholly negative, keeping the better (ties prefer positive);
at deeper levels each child's current assignment is sign-flipped and the
flipped grid is evaluated.  Candidates are sorted by objective (stable,
ties in row-major child order) and visited in that order: a candidate is
accepted only while its recorded objective still beats ``f_hat`` — which
recursion on earlier siblings may have raised in the meantime, so later
siblings whose recorded value is no longer ahead are pruned.  Each
accepted child of side ``> 1`` is refined recursively at side ``k / 2``.

Every query runs the success check, so the attack stops at the first
adversarial image it ever evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from saliency_attacks.attacks.base import (
    AttackConfig,
    AttackOutcome,
    _Run,
    _Success,
    start_run,
)
from saliency_attacks.backend import BudgetExhausted, QueryLedger
from saliency_attacks.blocks import Block, split_block


@dataclass
class RefineContext:
    """Search state threaded through the recursion."""

    run: _Run
    mask: np.ndarray
    signs: np.ndarray
    f_hat: float = -np.inf


def refine(ctx: RefineContext, block: Block, k: int, level: int) -> None:
    """One refinement pass over `block` with child side `k`.

    Mutates ``ctx.signs`` / ``ctx.f_hat`` on accepted candidates; raises
    the internal success/budget signals which the attack entry point
    absorbs.
    """
    children = split_block(block, k)
    n = len(children)
    cand_f = np.full(n, -np.inf)
    cand_signs: list = [None] * n

    for j, child in enumerate(children):
        sub = ctx.mask[child.rows, child.cols]
        if not sub.any():
            continue  # outside the salient region: never queried, never selected
        if level == 1:
            plus = ctx.signs.copy()
            plus[child.rows, child.cols][sub] = 1
            f_plus = ctx.run.eval_signs(plus)
            minus = ctx.signs.copy()
            minus[child.rows, child.cols][sub] = -1
            f_minus = ctx.run.eval_signs(minus)
            if f_plus >= f_minus:
                cand_f[j], cand_signs[j] = f_plus, plus
            else:
                cand_f[j], cand_signs[j] = f_minus, minus
        else:
            flipped = ctx.signs.copy()
            region = flipped[child.rows, child.cols]
            region[sub] = -region[sub]
            cand_f[j] = ctx.run.eval_signs(flipped)
            cand_signs[j] = flipped

    order = sorted(range(n), key=lambda j: (-cand_f[j], j))
    for j in order:
        # Recorded objectives are compared as written, even though deeper
        # recursion below may already have raised f_hat past them.
        if cand_f[j] > ctx.f_hat:
            ctx.signs = cand_signs[j]
            ctx.f_hat = float(cand_f[j])
            if k > 1:
                refine(ctx, children[j], k // 2, level + 1)


def saliency_attack(
    x: np.ndarray,
    y_gt: int,
    mask: np.ndarray,
    backend,
    config: AttackConfig,
) -> AttackOutcome:
    """Refine {-eps, 0, +eps} perturbations inside `mask` until the model flips.

    The image must be square with a power-of-two side at least `k_int`.
    The first query always classifies the clean image: an input the model
    already misclassifies returns success with zero perturbation, and an
    empty mask returns failure, both at ``queries == 1``.  Budget
    exhaustion at any point stops the search gracefully; the outcome
    carries the best state found.
    """
    x = np.asarray(x, dtype=np.float32)
    side = x.shape[0]
    if x.ndim != 3 or x.shape[1] != side:
        raise ValueError(f"expected a square (S, S, C) image, got shape {x.shape}")
    if side & (side - 1):
        raise ValueError(f"image side must be a power of two, got {side}")
    if config.k_int > side:
        raise ValueError(f"k_int {config.k_int} exceeds image side {side}")

    ledger = QueryLedger(config.budget)
    run, degenerate = start_run(x, y_gt, backend, ledger, config.epsilon, mask)
    if degenerate is not None:
        return degenerate

    ctx = RefineContext(run=run, mask=run.mask, signs=np.zeros((side, side), dtype=np.int8))
    ground = Block(0, 0, side, level=0)
    k = config.k_int
    try:
        while k > 1 and (ledger.remaining is None or ledger.remaining > 0):
            refine(ctx, ground, k, 1)
            k //= 2
    except _Success as hit:
        return run.outcome(hit.signs)
    except BudgetExhausted:
        pass
    return run.outcome()
