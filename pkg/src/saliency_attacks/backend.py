"""Query-counted classifier backends and the attack objective.

A backend exposes raw class logits for an image; every evaluation is charged
against a :class:`QueryLedger`.  The objective maximized by all attacks is
the margin loss ``-max(z[y] - max_{i != y} z[i], 0)``: it is zero exactly
when the model no longer strictly prefers the ground-truth class.
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class BudgetExhausted(Exception):
    """Raised when a model evaluation is requested past the query budget."""


class QueryLedger:
    """Exact count of model evaluations against an optional hard budget.

    A ledger belongs to exactly one attack run; `used` increases by exactly
    one per answered model evaluation and never exceeds `budget`.
    """

    def __init__(self, budget: Optional[int] = None):
        if budget is not None and budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        self.budget = budget
        self.used = 0

    @property
    def remaining(self) -> Optional[int]:
        return None if self.budget is None else self.budget - self.used

    def check(self) -> None:
        """Raise :class:`BudgetExhausted` if no budget remains."""
        if self.budget is not None and self.used >= self.budget:
            raise BudgetExhausted(f"query budget of {self.budget} exhausted")

    def charge(self) -> None:
        self.check()
        self.used += 1

    def __repr__(self):
        return f"QueryLedger(used={self.used}, budget={self.budget})"


class ClassifierBackend:
    """Adapter contract for a deterministic black-box classifier.

    Subclasses implement :meth:`raw_logits`; callers go through
    :func:`predict` so that every evaluation is charged to a ledger.
    """

    #: expected (H, W, C) of inputs, or None when spatially flexible
    input_shape: Optional[tuple] = None
    n_classes: int = 0

    def raw_logits(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_input(self, x: np.ndarray) -> None:
        if self.input_shape is not None and tuple(x.shape) != tuple(self.input_shape):
            raise ValueError(
                f"image shape {x.shape} does not match backend input {self.input_shape}"
            )


class LinearBackend(ClassifierBackend):
    """Affine logits ``z = W @ flatten(x) + b``; handy as a closed-form oracle."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, input_shape: tuple):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        n_in = int(np.prod(input_shape))
        if weights.shape != (bias.shape[0], n_in):
            raise ValueError(f"weights {weights.shape} incompatible with input {input_shape}")
        if bias.shape[0] < 2:
            raise ValueError("need at least two classes")
        self.weights = weights
        self.bias = bias
        self.input_shape = tuple(input_shape)
        self.n_classes = int(bias.shape[0])

    def raw_logits(self, x: np.ndarray) -> np.ndarray:
        self.check_input(x)
        return self.weights @ np.asarray(x, dtype=np.float64).ravel() + self.bias


class CountingBackend(ClassifierBackend):
    """Instrumented wrapper that counts evaluations of an inner backend."""

    def __init__(self, inner: ClassifierBackend):
        self.inner = inner
        self.calls = 0

    @property
    def input_shape(self):
        return self.inner.input_shape

    @property
    def n_classes(self):
        return self.inner.n_classes

    def raw_logits(self, x: np.ndarray) -> np.ndarray:
        self.calls += 1
        return self.inner.raw_logits(x)


def predict(backend: ClassifierBackend, ledger: QueryLedger, x: np.ndarray) -> np.ndarray:
    """Query the backend once, charging exactly one ledger increment.

    The budget is checked before the model is evaluated, so an exhausted
    ledger never triggers an evaluation and is left unchanged.  Transport
    or validation failures likewise leave the ledger unchanged; only an
    answered query is charged.
    """
    ledger.check()
    z = np.asarray(backend.raw_logits(x), dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2 or not np.all(np.isfinite(z)):
        raise ValueError(f"backend returned invalid logits of shape {z.shape}")
    ledger.charge()
    return z


def cw_loss(z: np.ndarray, y_gt: int) -> float:
    """Margin loss ``-max(z[y_gt] - max_{i != y_gt} z[i], 0)``.

    Always ``<= 0``; equals 0 iff the ground-truth logit does not strictly
    exceed every other class.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise ValueError(f"logits must be a vector of >= 2 scores, got shape {z.shape}")
    if not 0 <= y_gt < z.shape[0]:
        raise ValueError(f"class index {y_gt} out of range for {z.shape[0]} classes")
    others = np.delete(z, y_gt)
    return -max(float(z[y_gt]) - float(others.max()), 0.0)


def is_adversarial(z: np.ndarray, y_gt: int) -> bool:
    """True iff the first maximal logit index differs from `y_gt`.

    Ties resolve to the smallest index, so a tie at `y_gt` with a later
    class is conservatively not adversarial.
    """
    z = np.asarray(z, dtype=np.float64)
    if not 0 <= y_gt < z.shape[0]:
        raise ValueError(f"class index {y_gt} out of range for {z.shape[0]} classes")
    return int(np.argmax(z)) != int(y_gt)


def objective(backend, ledger, x, state, y_gt) -> float:
    """Margin loss of the perturbed image; exactly one ledger increment."""
    from saliency_attacks.perturb import apply_perturbation

    z = predict(backend, ledger, apply_perturbation(x, state))
    return cw_loss(z, y_gt)
