"""
Classifiers - Two-class RBF-kernel SVM and feed-forward network over correlation features.

The SVM dual is solved with sequential minimal optimization, choosing the maximal
KKT-violating pair each step. The network has two hidden rectifier layers of 100
units and a logistic output, trained on mean binary cross-entropy.
"""

import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.features import FeatureTable, Standardizer
from core.metrics import confusion, ratios

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MLP_LAYER_SIZES: Tuple[int, ...] = (5, 100, 100, 1)
SVM_THRESHOLD = 0.0
MLP_THRESHOLD = 0.5
PREDICT_CHUNK = 65536
KERNEL_BLOCK = 4_000_000
QUAD_FLOOR = 1e-12

Rows = Union[FeatureTable, Tuple[np.ndarray, np.ndarray]]


class TrainConfig(BaseModel):
    """Hyperparameters for both classifiers."""

    model_config = ConfigDict(frozen=True)

    # SVM
    c_param: float = Field(default=1.0, gt=0)
    gamma: float = Field(default=0.2, gt=0)
    smo_tol: float = Field(default=1e-3, gt=0)
    max_passes: int = Field(default=100, ge=1)
    svm_subsample_cap: int = Field(default=20000, ge=2)
    kernel_cache_columns: int = Field(default=512, ge=2)

    # MLP
    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    # Adam by default; "sgd" gives plain mini-batch gradient descent
    optimizer: Literal["adam", "sgd"] = "adam"
    l2: float = Field(default=0.0, ge=0)
    mlp_subsample_cap: int = Field(default=50000, ge=2)

    seed: int = Field(default=42, ge=0, lt=2**64)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        return cls.model_validate(data)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


def _as_arrays(rows: Rows, labels: Optional[Sequence[bool]] = None,
               role: str = "Training") -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(rows, FeatureTable):
        X, y = rows.r, rows.label
    elif labels is not None:
        X, y = rows, labels
    else:
        X, y = rows
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"Expected an (n, d) feature matrix with n labels, got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{role} features must be finite")
    if y.all() or not y.any():
        raise ValueError(f"{role} rows must contain both classes")
    return X, y


def _subsample(X: np.ndarray, y: np.ndarray, cap: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if len(X) <= cap:
        return X, y
    keep = np.sort(rng.choice(len(X), size=cap, replace=False))
    logger.info(f"Subsampled {cap} of {len(X)} training rows")
    return X[keep], y[keep]


def _check_input(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"Expected {n_features} features, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("Input features must be finite")
    return X


# SVM

def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * |a - b|^2) for every row pair of A and B."""
    sq = (A * A).sum(axis=1)[:, np.newaxis] + (B * B).sum(axis=1)[np.newaxis, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvmModel:
    """
    Trained RBF SVM.

    decision(x) = sum_i alphas[i] * exp(-gamma * |x - sv_i|^2) + bias, where alphas
    hold the signed coefficients y_i * alpha_i.
    """

    support_vectors: np.ndarray
    alphas: np.ndarray
    bias: float
    c_param: float
    gamma: float
    standardizer: Optional[Standardizer] = None
    train_info: Dict[str, Any] = field(default_factory=dict)

    kind = "svm"
    threshold = SVM_THRESHOLD

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, Z: np.ndarray) -> np.ndarray:
        """Scores of already-standardized rows."""
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.alphas + self.bias


class SmoSolver:
    """SMO for the soft-margin RBF dual, with maximal-violating-pair working set selection."""

    def __init__(self, X: np.ndarray, y: np.ndarray, c_param: float, gamma: float,
                 tol: float, max_iter: int, cache_columns: int):
        self.X = X
        self.y = np.where(y, 1.0, -1.0)
        self.C = c_param
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.cache_columns = cache_columns
        self._sq = (X * X).sum(axis=1)
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def _q_column(self, i: int) -> np.ndarray:
        """Column i of Q, Q[t, i] = y_t * y_i * K(x_t, x_i)."""
        column = self._cache.get(i)
        if column is not None:
            self._cache.move_to_end(i)
            return column
        sq = self._sq + self._sq[i] - 2.0 * (self.X @ self.X[i])
        column = self.y * self.y[i] * np.exp(-self.gamma * np.maximum(sq, 0.0))
        self._cache[i] = column
        if len(self._cache) > self.cache_columns:
            self._cache.popitem(last=False)
        return column

    def _select(self, alpha: np.ndarray, grad: np.ndarray) -> Tuple[int, int, float]:
        y, C = self.y, self.C
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        return i, j, float(score[i] - score[j])

    def solve(self) -> Tuple[np.ndarray, float, int]:
        """
        Returns:
            (alpha, rho, iterations); the decision function is sum alpha_i y_i K(x_i, x) - rho
        """
        n, C, y = len(self.y), self.C, self.y
        alpha = np.zeros(n)
        grad = -np.ones(n)

        iterations = 0
        while iterations < self.max_iter:
            i, j, gap = self._select(alpha, grad)
            if gap < self.tol:
                break
            iterations += 1

            Q_i, Q_j = self._q_column(i), self._q_column(j)
            old_i, old_j = alpha[i], alpha[j]

            if y[i] != y[j]:
                quad = max(Q_i[i] + Q_j[j] + 2.0 * Q_i[j], QUAD_FLOOR)
                delta = (-grad[i] - grad[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = diff
                elif alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                elif alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
            else:
                quad = max(Q_i[i] + Q_j[j] - 2.0 * Q_i[j], QUAD_FLOOR)
                delta = (grad[i] - grad[j]) / quad
                total = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if total > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = total - C
                elif alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if total > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = total - C
                elif alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

            # One expression keeps the update symmetric in (i, j)
            grad += Q_i * (alpha[i] - old_i) + Q_j * (alpha[j] - old_j)
        else:
            logger.warning(f"SMO stopped at the iteration limit {self.max_iter} before reaching tolerance")

        return alpha, self._rho(alpha, grad), iterations

    def _rho(self, alpha: np.ndarray, grad: np.ndarray) -> float:
        y, C = self.y, self.C
        y_grad = y * grad
        free = (alpha > 0) & (alpha < C)
        if free.any():
            return float(np.sum(y_grad[free]) / np.count_nonzero(free))

        at_upper, at_lower = alpha >= C, alpha <= 0
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(y_grad[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(y_grad[lb_mask].max()) if lb_mask.any() else -np.inf
        return (ub + lb) / 2.0


def fit_svm_arrays(X: np.ndarray, y: np.ndarray, cfg: TrainConfig,
                   standardizer: Optional[Standardizer] = None) -> SvmModel:
    """Solve the SVM dual on standardized arrays, without subsampling."""
    solver = SmoSolver(X, y, cfg.c_param, cfg.gamma, cfg.smo_tol,
                       max_iter=cfg.max_passes * max(len(X), 1000), cache_columns=cfg.kernel_cache_columns)
    alpha, rho, iterations = solver.solve()

    support = alpha > 0
    model = SvmModel(
        support_vectors=X[support].copy(),
        alphas=(alpha * solver.y)[support],
        bias=-rho,
        c_param=cfg.c_param,
        gamma=cfg.gamma,
        standardizer=standardizer,
        train_info={"rows": int(len(X)), "iterations": iterations, "n_support": int(support.sum())},
    )
    logger.info(f"SVM trained: {model.train_info['n_support']} support vectors after {iterations} SMO steps")
    return model


def train_svm(rows: Rows, cfg: Optional[TrainConfig] = None, standardizer: Optional[Standardizer] = None,
              labels: Optional[Sequence[bool]] = None) -> SvmModel:
    """
    Train the RBF SVM on standardized feature rows.

    Rows beyond cfg.svm_subsample_cap are dropped by a seeded uniform draw.

    Args:
        rows: FeatureTable of standardized rows, or (X, y) arrays
        cfg: Hyperparameters (C, gamma, SMO tolerance, subsample cap, seed)
        standardizer: Transform to store with the model for raw-input prediction
        labels: Labels when rows is a bare matrix

    Returns:
        Trained SvmModel
    """
    cfg = cfg or TrainConfig()
    try:
        X, y = _as_arrays(rows, labels)
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        X, y = _subsample(X, y, cfg.svm_subsample_cap, rng)
        if y.all() or not y.any():
            raise ValueError("Training rows must contain both classes")
        return fit_svm_arrays(X, y, cfg, standardizer)

    except Exception as e:
        logger.error(f"Error training SVM: {e}")
        raise


# MLP

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Feed-forward network [5, 100, 100, 1] with rectifier hidden layers and logistic output."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    standardizer: Optional[Standardizer] = None
    history: Tuple[Dict[str, Any], ...] = ()
    train_info: Dict[str, Any] = field(default_factory=dict)

    kind = "mlp"
    threshold = MLP_THRESHOLD

    def __post_init__(self):
        sizes = tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]) if self.weights else ()
        if sizes != MLP_LAYER_SIZES:
            raise ValueError(f"MLP layer sizes must be {MLP_LAYER_SIZES}, got {sizes}")

    @property
    def n_features(self) -> int:
        return MLP_LAYER_SIZES[0]

    @classmethod
    def zeros(cls, standardizer: Optional[Standardizer] = None) -> 'MlpModel':
        shapes = list(zip(MLP_LAYER_SIZES[:-1], MLP_LAYER_SIZES[1:]))
        return cls(
            weights=tuple(np.zeros(shape) for shape in shapes),
            biases=tuple(np.zeros(shape[1]) for shape in shapes),
            standardizer=standardizer,
        )

    def logits(self, Z: np.ndarray) -> np.ndarray:
        a = Z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return (a @ self.weights[-1] + self.biases[-1])[:, 0]

    def decision_function(self, Z: np.ndarray) -> np.ndarray:
        """Spoofed probability of already-standardized rows."""
        return _sigmoid(self.logits(Z))


def glorot_init(rng: np.random.Generator) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(MLP_LAYER_SIZES[:-1], MLP_LAYER_SIZES[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def mlp_loss_and_gradients(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], Z: np.ndarray,
                           y: np.ndarray, l2: float = 0.0) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """
    Mean binary cross-entropy (plus 0.5 * l2 * sum of squared weights) and its gradients.

    Returns:
        (loss, weight gradients, bias gradients)
    """
    target = np.asarray(y, dtype=float)
    activations = [Z]
    pre = []
    a = Z
    for W, b in zip(weights[:-1], biases[:-1]):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    logit = (a @ weights[-1] + biases[-1])[:, 0]

    n = len(Z)
    loss = float(np.mean(np.logaddexp(0.0, logit) - target * logit))
    if l2:
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)

    delta = ((_sigmoid(logit) - target) / n)[:, np.newaxis]
    grad_w: List[np.ndarray] = [None] * len(weights)
    grad_b: List[np.ndarray] = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta + l2 * weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (pre[layer - 1] > 0)
    return loss, grad_w, grad_b


class _Adam:
    def __init__(self, params: List[np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


def train_mlp(rows: Rows, cfg: Optional[TrainConfig] = None, standardizer: Optional[Standardizer] = None,
              labels: Optional[Sequence[bool]] = None, validation: Optional[Rows] = None) -> MlpModel:
    """
    Train the [5, 100, 100, 1] network by mini-batch gradient descent.

    Args:
        rows: FeatureTable of standardized rows, or (X, y) arrays
        cfg: Hyperparameters (epochs, batch size, learning rate, optimizer, L2, seed)
        standardizer: Transform to store with the model
        labels: Labels when rows is a bare matrix
        validation: Optional standardized rows; their F1 is recorded after every epoch

    Returns:
        Trained MlpModel with per-epoch history
    """
    cfg = cfg or TrainConfig()
    try:
        X, y = _as_arrays(rows, labels)
        if X.shape[1] != MLP_LAYER_SIZES[0]:
            raise ValueError(f"MLP expects {MLP_LAYER_SIZES[0]} features, got {X.shape[1]}")
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        X, y = _subsample(X, y, cfg.mlp_subsample_cap, rng)
        val_X, val_y = (None, None) if validation is None else _as_arrays(validation, role="Validation")

        weights, biases = glorot_init(rng)
        params = weights + biases
        optimizer = _Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)
        target = y.astype(float)

        history = []
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(X))
            for start in range(0, len(X), cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                _, grad_w, grad_b = mlp_loss_and_gradients(weights, biases, X[batch], target[batch], cfg.l2)
                optimizer.step(params, grad_w + grad_b)

            loss, _, _ = mlp_loss_and_gradients(weights, biases, X, target, cfg.l2)
            entry = {"epoch": epoch, "loss": loss}
            if val_X is not None:
                snapshot = MlpModel(tuple(weights), tuple(biases))
                entry["val_f1"] = ratios(confusion(snapshot.decision_function(val_X) > MLP_THRESHOLD, val_y)).f1
            history.append(entry)
            logger.debug(f"MLP epoch {epoch}: loss {loss:.6f}")

        logger.info(f"MLP trained for {cfg.epochs} epochs on {len(X)} rows, final loss {history[-1]['loss']:.6f}")
        return MlpModel(
            weights=tuple(w.copy() for w in weights),
            biases=tuple(b.copy() for b in biases),
            standardizer=standardizer,
            history=tuple(history),
            train_info={"rows": int(len(X)), "epochs": cfg.epochs, "optimizer": cfg.optimizer},
        )

    except Exception as e:
        logger.error(f"Error training MLP: {e}")
        raise


# Prediction

Model = Union[SvmModel, MlpModel]


def predict_batch(model: Model, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scores and spoofed labels for raw feature rows.

    Applies the model's stored standardizer, then its decision function, in chunks.
    A score equal to the threshold is labeled normal.

    Args:
        model: Trained SvmModel or MlpModel
        X: (n, 5) raw correlation features

    Returns:
        (scores, labels)
    """
    X = _check_input(X, model.n_features)
    chunk_rows = PREDICT_CHUNK
    if isinstance(model, SvmModel):
        # Bound the kernel block to about KERNEL_BLOCK entries
        chunk_rows = max(1, min(PREDICT_CHUNK, KERNEL_BLOCK // max(1, len(model.alphas))))

    scores = np.empty(len(X))
    for start in range(0, len(X), chunk_rows):
        chunk = X[start:start + chunk_rows]
        if model.standardizer is not None:
            chunk = model.standardizer.transform(chunk)
        scores[start:start + chunk_rows] = model.decision_function(chunk)
    return scores, scores > model.threshold


def predict(model: Model, x: Sequence[float]) -> Tuple[float, bool]:
    """Score and spoofed label of one raw feature vector."""
    scores, labels = predict_batch(model, np.asarray(x, dtype=float)[np.newaxis, :])
    return float(scores[0]), bool(labels[0])


# Grid search

@dataclass
class GridSearchResult:
    c_param: float
    gamma: float
    f1_table: Dict[Tuple[float, float], float]

    @property
    def best_f1(self) -> float:
        return self.f1_table[(self.c_param, self.gamma)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c_param": self.c_param,
            "gamma": self.gamma,
            "best_f1": self.best_f1,
            "table": [{"c_param": c, "gamma": g, "f1": f1} for (c, g), f1 in sorted(self.f1_table.items())],
        }


def grid_search_svm(train: Rows, validate: Rows, c_grid: Sequence[float], gamma_grid: Sequence[float],
                    cfg: Optional[TrainConfig] = None) -> GridSearchResult:
    """
    Train on one set and score F1 on another for every (C, gamma) cell.

    Ties go to the smaller C, then the smaller gamma. Undefined F1 counts as 0.

    Args:
        train: Standardized training rows
        validate: Standardized validation rows
        c_grid: Candidate C values
        gamma_grid: Candidate gamma values
        cfg: Remaining hyperparameters

    Returns:
        GridSearchResult with the best cell and the full F1 table
    """
    if not c_grid or not gamma_grid:
        raise ValueError("grid_search_svm needs non-empty C and gamma grids")
    cfg = cfg or TrainConfig()
    val_X, val_y = _as_arrays(validate, role="Validation")

    table: Dict[Tuple[float, float], float] = {}
    best: Optional[Tuple[float, float]] = None
    for c in sorted(set(float(v) for v in c_grid)):
        for gamma in sorted(set(float(v) for v in gamma_grid)):
            model = train_svm(train, cfg.model_copy(update={"c_param": c, "gamma": gamma}))
            _, predicted = predict_batch(model, val_X)
            f1 = ratios(confusion(predicted, val_y)).f1 or 0.0
            table[(c, gamma)] = f1
            logger.info(f"Grid cell C={c}, gamma={gamma}: F1 {f1:.4f}")
            if best is None or f1 > table[best]:
                best = (c, gamma)

    return GridSearchResult(c_param=best[0], gamma=best[1], f1_table=table)


# Persistence

def model_to_dict(model: Model) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "standardizer": model.standardizer.to_dict() if model.standardizer is not None else None,
        "train_info": model.train_info,
    }
    if isinstance(model, SvmModel):
        document.update({
            "hyperparameters": {"c_param": model.c_param, "gamma": model.gamma, "n_features": model.n_features},
            "support_vectors": model.support_vectors.tolist(),
            "alphas": model.alphas.tolist(),
            "bias": model.bias,
        })
    else:
        document.update({
            "hyperparameters": {"layer_sizes": list(MLP_LAYER_SIZES)},
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "history": list(model.history),
        })
    return document


def model_from_dict(document: Dict[str, Any]) -> Model:
    version = document.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"Unsupported model format_version: {version}")
    standardizer = Standardizer.from_dict(document["standardizer"]) if document.get("standardizer") else None

    kind = document.get("kind")
    if kind == "svm":
        hyper = document["hyperparameters"]
        return SvmModel(
            support_vectors=np.asarray(document["support_vectors"], dtype=float).reshape(
                -1, int(hyper.get("n_features", MLP_LAYER_SIZES[0]))),
            alphas=np.asarray(document["alphas"], dtype=float),
            bias=float(document["bias"]),
            c_param=float(hyper["c_param"]),
            gamma=float(hyper["gamma"]),
            standardizer=standardizer,
            train_info=document.get("train_info", {}),
        )
    if kind == "mlp":
        return MlpModel(
            weights=tuple(np.asarray(w, dtype=float) for w in document["weights"]),
            biases=tuple(np.asarray(b, dtype=float) for b in document["biases"]),
            standardizer=standardizer,
            history=tuple(document.get("history", [])),
            train_info=document.get("train_info", {}),
        )
    raise ValueError(f"Unknown model kind: {kind}")


def save_model(model: Model, path: Union[str, Path]) -> None:
    """Write a model as JSON with full-precision parameters."""
    try:
        Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")
        logger.info(f"Saved {model.kind} model to {path}")
    except Exception as e:
        logger.error(f"Error saving model to {path}: {e}")
        raise


def load_model(path: Union[str, Path]) -> Model:
    """Read a model written by save_model."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        logger.error(f"Error parsing model file {path}: {e}")
        raise ValueError(f"Invalid model JSON in {path}: {e}") from e
    return model_from_dict(document)
