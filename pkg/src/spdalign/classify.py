"""Linear SVM (hinge loss, L2 penalty) and F1 scoring.

The solver is a dual coordinate-descent method with a fixed, seeded
coordinate order, so training is deterministic given the data and seed. The
hinge term is averaged over samples (per-sample box constraint C/n), which
makes the decision function invariant under duplicating the training set.
The bias is folded in as a constant feature and therefore L2-penalised like
the weights. Convergence is declared on the primal-dual gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SvmModel", "train_svm", "f1_score", "f1_per_class",
           "standardize_fit", "standardize_apply"]


@dataclass(frozen=True)
class SvmModel:
    """Trained linear classifier.

    ``classes`` is the sorted label pair; the decision function is
    ``w . x + b``, negative for ``classes[0]``, positive for ``classes[1]``.
    """

    weights: np.ndarray
    bias: float
    c: float
    classes: tuple
    converged: bool
    dual_gap: float
    n_epochs: int

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision_function(X)
        out = np.where(scores > 0, self.classes[1], self.classes[0])
        return np.asarray(out)


def train_svm(X: np.ndarray, y, c: float = 1.0, seed: int = 0,
              tol: float = 1e-6, max_epochs: int = 2000) -> SvmModel:
    """Train a linear SVM by dual coordinate descent.

    Minimises ``0.5 ||w||^2 + (c / n) sum_i hinge(y_i, w . x_i + b)`` with
    the bias folded into an augmented constant feature. Coordinates are
    visited in one fixed permutation drawn from ``seed``; the duality gap is
    checked each epoch and training stops once
    ``gap <= tol * max(1, primal)``. A model that exhausts ``max_epochs`` is
    returned with ``converged=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be (n, d), got {X.shape}")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows vs {y.shape[0]} labels")
    classes = sorted(set(y.tolist()))
    if len(classes) != 2:
        raise ValueError(f"need exactly 2 classes, got {classes}")
    n, d = X.shape
    sign = np.where(y == classes[1], 1.0, -1.0)

    Xa = np.ascontiguousarray(np.hstack([X, np.ones((n, 1))]))
    box = c / n
    q_diag = np.einsum("ij,ij->i", Xa, Xa)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    order = np.random.default_rng(seed).permutation(n)

    gap = np.inf
    primal = np.inf
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        for i in order:
            if q_diag[i] <= 0.0:
                continue
            g = sign[i] * (Xa[i] @ w) - 1.0
            if alpha[i] <= 0.0 and g >= 0.0:
                continue
            if alpha[i] >= box and g <= 0.0:
                continue
            a_new = min(max(alpha[i] - g / q_diag[i], 0.0), box)
            delta = a_new - alpha[i]
            if delta != 0.0:
                w += delta * sign[i] * Xa[i]
                alpha[i] = a_new
        margins = 1.0 - sign * (Xa @ w)
        primal = 0.5 * (w @ w) + box * np.sum(np.maximum(margins, 0.0))
        dual = np.sum(alpha) - 0.5 * (w @ w)
        gap = primal - dual
        if gap <= tol * max(1.0, primal):
            break
    return SvmModel(
        weights=w[:d].copy(), bias=float(w[d]), c=c, classes=tuple(classes),
        converged=bool(gap <= tol * max(1.0, primal)),
        dual_gap=float(gap), n_epochs=epoch,
    )


def _confusion(y_true, y_pred, cls) -> tuple[int, int, int]:
    tp = int(np.sum((y_true == cls) & (y_pred == cls)))
    fp = int(np.sum((y_true != cls) & (y_pred == cls)))
    fn = int(np.sum((y_true == cls) & (y_pred != cls)))
    return tp, fp, fn


def f1_per_class(y_true, y_pred) -> dict:
    """Per-class F1 = 2PR / (P + R), as percentages; 0 for absent classes."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("cannot score an empty label set")
    out = {}
    for cls in sorted(set(y_true.tolist()) | set(y_pred.tolist())):
        tp, fp, fn = _confusion(y_true, y_pred, cls)
        denom = 2 * tp + fp + fn
        out[cls] = 100.0 * (2 * tp / denom) if denom else 0.0
    return out


def f1_score(y_true, y_pred, average: str = "macro") -> float:
    """F1 score as a percentage; macro averages the class-wise scores."""
    scores = f1_per_class(y_true, y_pred)
    if average == "macro":
        return float(np.mean(list(scores.values())))
    if average in scores:
        return scores[average]
    raise ValueError(f"unknown averaging {average!r}")


def standardize_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard deviations; zero spreads are floored to 1."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def standardize_apply(X: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - mean) / std
