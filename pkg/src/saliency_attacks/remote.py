"""HTTP classifier endpoint adapter.

Wire format: ``POST`` with JSON body ``{"shape": [H, W, C], "data":
[floats row-major]}``; the endpoint answers ``{"logits": [K floats]}``.
Any non-200 status or connection failure is retried with doubling backoff;
only an answered query is charged to the ledger (billing model: you pay
for answers, not attempts).
"""

from __future__ import annotations

import time

import numpy as np
import requests

from saliency_attacks.backend import ClassifierBackend


class TransportError(RuntimeError):
    """Endpoint unreachable or misbehaving after all retries."""


class RemoteBackend(ClassifierBackend):
    def __init__(
        self,
        url: str,
        input_shape: tuple | None = None,
        n_classes: int = 0,
        attempts: int = 3,
        backoff: float = 0.1,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.input_shape = tuple(input_shape) if input_shape else None
        self.n_classes = n_classes
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()

    def raw_logits(self, x: np.ndarray) -> np.ndarray:
        self.check_input(x)
        x = np.asarray(x, dtype=np.float64)
        body = {"shape": list(x.shape), "data": x.ravel().tolist()}
        delay = self.backoff
        last = "no attempt made"
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self.session.post(self.url, json=body, timeout=self.timeout)
                if resp.status_code == 200:
                    logits = np.asarray(resp.json()["logits"], dtype=np.float64)
                    if self.n_classes == 0:
                        self.n_classes = int(logits.shape[0])
                    return logits
                last = f"HTTP {resp.status_code}"
            except (requests.RequestException, ValueError, KeyError) as exc:
                last = f"{type(exc).__name__}: {exc}"
            if attempt < self.attempts:
                time.sleep(delay)
                delay *= 2
        raise TransportError(f"endpoint {self.url} failed after {self.attempts} attempts ({last})")
