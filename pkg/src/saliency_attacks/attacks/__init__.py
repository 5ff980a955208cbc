"""Attack engines: recursive saliency-guided refinement, the Square Attack
baseline (optionally mask-restricted) and a greedy block baseline."""

from saliency_attacks.attacks.base import (
    AttackConfig,
    AttackOutcome,
    resolve_mode_mask,
)
from saliency_attacks.attacks.greedy import greedy_block_search
from saliency_attacks.attacks.refine import RefineContext, refine, saliency_attack
from saliency_attacks.attacks.square import square_attack

__all__ = [
    "AttackConfig",
    "AttackOutcome",
    "RefineContext",
    "greedy_block_search",
    "refine",
    "resolve_mode_mask",
    "saliency_attack",
    "square_attack",
]
