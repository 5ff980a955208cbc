"""Black-box adversarial attacks restricted to salient image regions.

The package provides:

* an image core with exact block geometry and {-eps, 0, +eps} sign-grid
  perturbations (:mod:`saliency_attacks.image`, :mod:`saliency_attacks.blocks`,
  :mod:`saliency_attacks.perturb`),
* query-counted classifier backends, embedded or remote
  (:mod:`saliency_attacks.backend`, :mod:`saliency_attacks.weights`,
  :mod:`saliency_attacks.remote`),
* saliency-map loading, spectral-residual saliency and mask binarization
  (:mod:`saliency_attacks.saliency`),
* the recursive refine attack, a Square Attack baseline (optionally
  saliency-restricted) and a greedy block baseline
  (:mod:`saliency_attacks.attacks`),
* imperceptibility metrics including MAD (:mod:`saliency_attacks.metrics`,
  :mod:`saliency_attacks.mad_metric`), and
* a batch experiment harness with a CLI (:mod:`saliency_attacks.harness`,
  :mod:`saliency_attacks.cli`).
"""

from saliency_attacks.backend import (
    BudgetExhausted,
    LinearBackend,
    QueryLedger,
    cw_loss,
    is_adversarial,
    objective,
    predict,
)
from saliency_attacks.blocks import Block, block_locations, split_block
from saliency_attacks.image import (
    load_image,
    load_tensor,
    resize_bilinear,
    save_image,
    save_tensor,
    to_luma,
)
from saliency_attacks.perturb import PerturbationState, apply_perturbation
from saliency_attacks.saliency import (
    binarize,
    complement,
    load_saliency,
    save_mask,
    spectral_residual,
)
from saliency_attacks.attacks import (
    AttackConfig,
    AttackOutcome,
    greedy_block_search,
    resolve_mode_mask,
    saliency_attack,
    square_attack,
)
from saliency_attacks.mad_metric import mad
from saliency_attacks.metrics import (
    AggregateStats,
    ImperceptibilityReport,
    aggregate,
    l0_fraction,
    l2,
    linf,
    measure,
)
from saliency_attacks.weights import EmbeddedBackend, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "AttackConfig",
    "AttackOutcome",
    "Block",
    "BudgetExhausted",
    "EmbeddedBackend",
    "ImperceptibilityReport",
    "LinearBackend",
    "PerturbationState",
    "QueryLedger",
    "aggregate",
    "apply_perturbation",
    "binarize",
    "block_locations",
    "complement",
    "cw_loss",
    "greedy_block_search",
    "is_adversarial",
    "l0_fraction",
    "l2",
    "linf",
    "load_image",
    "load_saliency",
    "load_tensor",
    "load_weights",
    "mad",
    "measure",
    "objective",
    "predict",
    "resize_bilinear",
    "resolve_mode_mask",
    "saliency_attack",
    "save_image",
    "save_mask",
    "save_tensor",
    "save_weights",
    "spectral_residual",
    "split_block",
    "square_attack",
    "to_luma",
]
