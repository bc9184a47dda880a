"""
Losses shared by the network code, the attacks and the trainers.

.. autofunction:: logistic_loss
.. autofunction:: logistic_derivative
.. autofunction:: softmax_cross_entropy
"""

from typing import Tuple

import numpy as np
from scipy import special


def logistic_loss(z):
    """
    ``ℓ(z) = log(1 + exp(-z))``, evaluated without overflow for any ``z`` (scalar or array).
    """
    return np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def logistic_derivative(z):
    """
    ``ℓ'(z) = -1 / (1 + exp(z))``.
    """
    return -special.expit(-np.asarray(z, dtype=np.float64))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy of a batch of logits ``(B, classes)`` against integer labels ``(B,)``.

    Returns:
        loss and its gradient with respect to the logits (already divided by ``B``)
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    rows = np.arange(len(labels))

    log_probs = special.log_softmax(logits, axis=1)
    loss = -log_probs[rows, labels].mean()

    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return float(loss), grad / len(labels)
