"""Warm-start fitting for the fidelity gate.

Training pairs are harvested from cold-adaptive rollouts: every update
interval each robot contributes its feature vector and the pseudo-label of
its windowed surrogate score (pairs inside the update margin are skipped,
matching the online rule). A batch logistic regression fitted on those pairs
is written out as the versioned gate parameter file.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .episode import run_episode
from .errors import ConfigurationError
from .gate import N_FEATURES
from .variants import Variant

logger = logging.getLogger(__name__)

MIN_PAIRS = 500


@dataclass
class FitResult:
    w: np.ndarray
    b: float
    iterations: int
    final_loss: float
    accuracy: float


def batch_loss(w: np.ndarray, b: float, features: np.ndarray, labels: np.ndarray, l2: float) -> float:
    """Mean regularised cross entropy over the batch."""
    logits = features @ w + b
    softplus = np.maximum(logits, 0.0) + np.log1p(np.exp(-np.abs(logits)))
    bce = softplus - labels * logits
    return float(bce.mean() + 0.5 * l2 * (w @ w))


def batch_gradient(
    w: np.ndarray, b: float, features: np.ndarray, labels: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    logits = features @ w + b
    probs = 1.0 / (1.0 + np.exp(-logits))
    err = probs - labels
    return features.T @ err / len(labels) + l2 * w, float(err.mean())


def warm_start_fit(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 1e-3,
    lr: float = 0.5,
    max_iterations: int = 10_000,
    tol: float = 1e-6,
) -> FitResult:
    """Gradient-descent logistic fit until the relative loss change drops
    below ``tol`` or the iteration cap is hit.

    Degenerate single-class labels fall back to a bias-only fit (with a
    warning); the bias is the clipped empirical log-odds.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != N_FEATURES:
        raise ConfigurationError(f"training features must be (n, {N_FEATURES})")
    if len(features) != len(labels) or len(labels) == 0:
        raise ConfigurationError("features and labels must align and be non-empty")

    positives = float(labels.sum())
    if positives == 0.0 or positives == len(labels):
        logger.warning(
            "degenerate labels (all %d); returning a bias-only fit", int(labels[0])
        )
        rate = (positives + 1.0) / (len(labels) + 2.0)
        b = math.log(rate / (1.0 - rate))
        w = np.zeros(N_FEATURES)
        return FitResult(w=w, b=b, iterations=0, final_loss=batch_loss(w, b, features, labels, l2), accuracy=max(rate, 1.0 - rate))

    w = np.zeros(N_FEATURES)
    b = 0.0
    prev = batch_loss(w, b, features, labels, l2)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        gw, gb = batch_gradient(w, b, features, labels, l2)
        w = w - lr * gw
        b = b - lr * gb
        cur = batch_loss(w, b, features, labels, l2)
        if abs(prev - cur) <= tol * max(1.0, abs(prev)):
            prev = cur
            break
        prev = cur
    preds = (features @ w + b) >= 0.0
    accuracy = float((preds == (labels >= 0.5)).mean())
    return FitResult(w=w, b=b, iterations=iterations, final_loss=prev, accuracy=accuracy)


def collect_training_pairs(
    config: RunConfig, seeds: list[int], min_pairs: int = MIN_PAIRS
) -> tuple[np.ndarray, np.ndarray]:
    """Run cold-adaptive rollouts until enough margin-passing pairs exist."""
    variant = Variant(family="full", gate_init="cold", gate_online=True)
    pairs: list = []
    for seed in seeds:
        config.scenario.seed = seed
        run_episode(config, variant, collect_gate_pairs=pairs)
        logger.info("seed %d: %d training pairs so far", seed, len(pairs))
        if len(pairs) >= min_pairs:
            break
    if len(pairs) < min_pairs:
        logger.warning("collected only %d/%d pairs from %d seeds", len(pairs), min_pairs, len(seeds))
    if not pairs:
        raise ConfigurationError("rollouts produced no training pairs")
    features = np.stack([z for z, _ in pairs])
    labels = np.array([y for _, y in pairs], dtype=np.float64)
    return features, labels
