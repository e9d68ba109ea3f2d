"""One-step learning dynamics: predicted vs. actual change in log-probabilities.

An update on ``(x_u, y_u)`` changes the log-belief on an observed input
``x_o`` by approximately ``-eta * A(x_o) @ K(x_o, x_u) @ G(x_u, y_u)`` where
``A = I - 1 pi^T`` and ``G = softmax(z_u) - e_y``. The remainder is second
order in the parameter step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError
from .linalg import as_matrix, as_vector, spectral_norm
from .model import MlpConfig, forward_logits, log_softmax


def belief_update_matrix(pi) -> np.ndarray:
    pi = as_vector(pi, "pi")
    V = pi.shape[0]
    return np.eye(V) - np.outer(np.ones(V), pi)


@dataclass(frozen=True, eq=False)
class DynamicsDecomposition:
    A: np.ndarray
    K: np.ndarray
    G: np.ndarray
    eta: float

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        K = as_matrix(np.asarray(self.K), "K")
        G = as_vector(self.G, "G")
        V = G.shape[0]
        if A.shape != (V, V) or K.shape != (V, V):
            raise RejectedInputError(f"A {A.shape}, K {K.shape} and G ({V},) are inconsistent")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "G", G)

    @property
    def a_norm(self) -> float:
        """||A||_2; logged, not assumed to be <= 1 (it is sqrt 2 for pi = e_1, V = 2)."""
        return spectral_norm(self.A)


def predict_dynamics(decomp: DynamicsDecomposition) -> np.ndarray:
    return -decomp.eta * (decomp.A @ (decomp.K @ decomp.G))


def actual_dynamics(theta_before, theta_after, cfg: MlpConfig, x_o) -> np.ndarray:
    """log softmax(z_after) - log softmax(z_before) on ``x_o``."""
    before = log_softmax(forward_logits(theta_before, cfg, x_o))
    after = log_softmax(forward_logits(theta_after, cfg, x_o))
    return after - before


def dynamics_residual(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise RejectedInputError(f"shapes differ: {predicted.shape} vs {actual.shape}")
    return float(np.max(np.abs(predicted - actual), initial=0.0))
