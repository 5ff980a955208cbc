"""Shared attack configuration, outcome record and query bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from saliency_attacks.backend import (
    BudgetExhausted,
    QueryLedger,
    cw_loss,
    is_adversarial,
    predict,
)
from saliency_attacks.perturb import PerturbationState, apply_perturbation

MODES = ("salient", "non-salient", "no-saliency")


@dataclass(frozen=True)
class AttackConfig:
    """Knobs shared by every attack engine.

    `seed` feeds the single generator used by stochastic baselines;
    the refinement and greedy engines are fully deterministic.
    """

    epsilon: float = 0.05
    k_int: int = 16
    budget: int = 3000
    phi: float = 0.1
    mode: str = "salient"
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.k_int <= 1 or (self.k_int & (self.k_int - 1)) != 0:
            raise ValueError(f"k_int must be a power of two > 1, got {self.k_int}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class AttackOutcome:
    """Result of one attack run.

    `trace` records, per query, the running best objective and whether
    success had been observed; `best_f` is that running best at
    termination.  When `success` is set, `adversarial` is exactly the
    queried image that fooled the model.
    """

    adversarial: np.ndarray
    state: PerturbationState
    success: bool
    queries: int
    best_f: float
    trace: list = field(default_factory=list)
    prior_misclassified: bool = False


def resolve_mode_mask(mask: np.ndarray | None, mode: str, shape: tuple) -> np.ndarray:
    """Ablation-arm wiring: the mask an attack actually searches in.

    ``salient`` uses the mask as-is, ``non-salient`` its complement and
    ``no-saliency`` the full image.
    """
    if mode == "no-saliency":
        return np.ones(shape, dtype=bool)
    if mask is None:
        raise ValueError(f"mode {mode!r} requires a saliency mask")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != tuple(shape):
        raise ValueError(f"mask geometry {mask.shape} does not match image {tuple(shape)}")
    if mode == "salient":
        return mask
    if mode == "non-salient":
        return ~mask
    raise ValueError(f"unknown mode {mode!r}")


class _Success(Exception):
    """Internal unwind: some queried image already fools the model."""

    def __init__(self, signs: np.ndarray):
        self.signs = signs


class _Run:
    """Per-attack query funnel: tracing, best tracking, success unwinding.

    Every model evaluation in every engine goes through :meth:`eval_signs`
    (or :meth:`eval_clean`), so the trace, the running best state and the
    success check are applied uniformly after each single query.
    """

    def __init__(self, x, y_gt, backend, ledger, epsilon, mask):
        self.x = x
        self.y_gt = y_gt
        self.backend = backend
        self.ledger = ledger
        self.epsilon = epsilon
        self.mask = mask
        self.trace: list = []
        self.best_f = -np.inf
        self.best_signs = np.zeros(x.shape[:2], dtype=np.int8)
        self.success = False

    def _record(self, f: float, signs: np.ndarray, adversarial: bool):
        if f > self.best_f:
            self.best_f = f
            self.best_signs = signs.copy()
        self.trace.append((self.ledger.used, self.best_f, adversarial))
        if adversarial:
            self.success = True
            raise _Success(signs.copy())

    def eval_clean(self) -> float:
        """Query the unperturbed image (prior-misclassification probe)."""
        zero = np.zeros(self.x.shape[:2], dtype=np.int8)
        z = predict(self.backend, self.ledger, self.x)
        f = cw_loss(z, self.y_gt)
        self._record(f, zero, is_adversarial(z, self.y_gt))
        return f

    def eval_signs(self, signs: np.ndarray) -> float:
        """Query the image perturbed by `signs`; one ledger increment."""
        state = PerturbationState(signs, self.epsilon, self.mask)
        z = predict(self.backend, self.ledger, apply_perturbation(self.x, state))
        f = cw_loss(z, self.y_gt)
        self._record(f, signs, is_adversarial(z, self.y_gt))
        return f

    def outcome(self, final_signs: np.ndarray | None = None) -> AttackOutcome:
        signs = self.best_signs if final_signs is None else final_signs
        state = PerturbationState(signs, self.epsilon, self.mask)
        prior = self.success and self.ledger.used == 1
        return AttackOutcome(
            adversarial=apply_perturbation(self.x, state),
            state=state,
            success=self.success,
            queries=self.ledger.used,
            best_f=float(self.best_f),
            trace=self.trace,
            prior_misclassified=prior,
        )


def start_run(x, y_gt, backend, ledger, epsilon, mask) -> tuple:
    """Common attack preamble: validate geometry, probe the clean image.

    Returns ``(run, degenerate_outcome_or_None)``.  The probe costs the
    mandatory first query; an already-misclassified input or an empty
    search mask short-circuits to an immediate outcome.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) image, got shape {x.shape}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:2]:
        raise ValueError(f"mask geometry {mask.shape} does not match image {x.shape[:2]}")
    run = _Run(x, y_gt, backend, ledger, epsilon, mask)
    try:
        run.eval_clean()
    except _Success:
        return run, run.outcome(np.zeros(x.shape[:2], dtype=np.int8))
    except BudgetExhausted:
        return run, run.outcome()
    if not mask.any():
        return run, run.outcome()
    return run, None
