"""Single-resolution greedy block baseline.

Tiles the image with fixed-side blocks intersected with the mask, then
repeatedly evaluates ``+/- eps`` on every still-unassigned block against
the current state and accepts the best strictly improving assignment,
removing that block from the pool.  Stops when no block improves, on
success, or when the budget runs out.
"""

from __future__ import annotations

import numpy as np

from saliency_attacks.attacks.base import AttackOutcome, _Success, start_run
from saliency_attacks.backend import BudgetExhausted, QueryLedger


def greedy_block_search(
    x: np.ndarray,
    y_gt: int,
    mask: np.ndarray,
    backend,
    block_side: int,
    budget: int,
    epsilon: float = 0.05,
) -> AttackOutcome:
    """Greedy best-block search at one block resolution.

    Same run conventions as the other engines: clean-image probe first,
    degenerate cases return at ``queries == 1``, graceful stop on budget.
    """
    x = np.asarray(x, dtype=np.float32)
    side = x.shape[0]
    if x.ndim != 3 or x.shape[1] != side:
        raise ValueError(f"expected a square (S, S, C) image, got shape {x.shape}")
    if block_side < 1 or side % block_side != 0:
        raise ValueError(f"block side {block_side} does not divide image side {side}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")

    ledger = QueryLedger(budget)
    run, degenerate = start_run(x, y_gt, backend, ledger, epsilon, mask)
    if degenerate is not None:
        return degenerate

    per_axis = side // block_side
    pool = []
    for br in range(per_axis):
        for bc in range(per_axis):
            rows = slice(br * block_side, (br + 1) * block_side)
            cols = slice(bc * block_side, (bc + 1) * block_side)
            sub = run.mask[rows, cols]
            if sub.any():
                pool.append((rows, cols, sub))

    signs = np.zeros((side, side), dtype=np.int8)
    f_hat = run.best_f  # objective of the unperturbed state
    try:
        while pool:
            best_f, best_idx, best_signs = -np.inf, None, None
            for idx, (rows, cols, sub) in enumerate(pool):
                for sgn in (1, -1):
                    cand = signs.copy()
                    cand[rows, cols][sub] = sgn
                    f = run.eval_signs(cand)
                    if f > best_f:
                        best_f, best_idx, best_signs = f, idx, cand
            if best_idx is None or best_f <= f_hat:
                break
            f_hat, signs = best_f, best_signs
            pool.pop(best_idx)
    except _Success as hit:
        return run.outcome(hit.signs)
    except BudgetExhausted:
        pass
    return run.outcome()
