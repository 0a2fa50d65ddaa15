"""From-scratch binary classifiers: Gaussian-kernel SVM, KNN and a one-hidden-
layer neural net, behind a common train/predict interface.

All three work on standardized features by default; standardization stats are
fitted on training data only and stored on the model together with the
feature mask that was applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


# ------------------------------------------------------------ standardization

@dataclass(frozen=True)
class ScalerStats:
    """Per-feature mean/std fitted on training data.

    Zero-variance columns get std 1 (their transform is just centering) and
    are noted in `constant`.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def __post_init__(self):
        if not np.all(self.std > 0):
            raise ValueError("std entries must be positive")


def standardize_fit(X: np.ndarray) -> ScalerStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D training matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return ScalerStats(mean=mean, std=std, constant=constant)


def standardize_apply(stats: ScalerStats, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != stats.mean.shape[0]:
        raise ValueError("feature count does not match scaler stats")
    return (X - stats.mean) / stats.std


def stratified_split(y: np.ndarray, val_fraction: float, seed: int):
    """Indices (train_idx, val_idx) of a per-class holdout split.

    Each class contributes round(val_fraction * class_size) validation rows
    (at least 1 when the class is non-empty). Index arrays are sorted so
    downstream tie-breaking by row order is reproducible.
    """
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    val = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        n_val = max(1, int(round(val_fraction * len(idx))))
        val.append(idx[:n_val])
    val_idx = np.sort(np.concatenate(val))
    mask = np.ones(len(y), dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


# ------------------------------------------------------------------- configs

@dataclass(frozen=True)
class SvmConfig:
    """Soft-margin Gaussian-kernel SVM hyperparameters.

    max_passes is the number of consecutive full sweeps without a KKT
    violation fix required to declare convergence; max_sweeps is the hard cap.
    """

    C: float = 10.0
    gamma: float = 0.1
    tol: float = 1e-3
    max_passes: int = 3
    max_sweeps: int = 4000

    def __post_init__(self):
        if not (self.C > 0 and self.gamma > 0 and self.tol > 0):
            raise ValueError("C, gamma and tol must be positive")
        if self.max_passes < 1 or self.max_sweeps < 1:
            raise ValueError("max_passes and max_sweeps must be at least 1")


@dataclass(frozen=True)
class KnnConfig:
    k: int = 12

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class AnnConfig:
    alpha: float = 0.1
    epochs: int = 200
    batch: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be at least 1")


@dataclass(frozen=True)
class TrainedModel:
    """Fitted classifier state plus the preprocessing it was fitted with."""

    kind: str
    params: dict
    scaler: ScalerStats | None
    mask: np.ndarray
    converged: bool = True


# -------------------------------------------------------------------- kernel

def kernel_gaussian(x1, x2, gamma: float) -> float:
    """exp(-gamma * ||x1 - x2||^2) for two feature vectors."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError("length mismatch")
    d = x1 - x2
    return float(np.exp(-gamma * (d @ d)))


def _gram(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Gaussian kernel matrix between rows of A and rows of B."""
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


# ----------------------------------------------------------------------- SVM

def _smo(K: np.ndarray, y_pm: np.ndarray, cfg: SvmConfig):
    """Sequential minimal optimization on a precomputed kernel matrix.

    Deterministic: sweeps examples in index order; the partner j is the
    maximizer of |E_i - E_j| (lowest index on ties), falling back to an index
    scan when that pair cannot make progress. Returns (alpha, b, converged).
    """
    n = K.shape[0]
    C = float(cfg.C)
    alpha = np.zeros(n)
    b = 0.0
    E = -y_pm.astype(float)  # decision is 0 everywhere at the start

    def try_pair(i, j):
        nonlocal b, E
        if i == j:
            return False
        ai_old, aj_old = alpha[i], alpha[j]
        yi, yj = y_pm[i], y_pm[j]
        if yi != yj:
            lo = max(0.0, aj_old - ai_old)
            hi = min(C, C + aj_old - ai_old)
        else:
            lo = max(0.0, ai_old + aj_old - C)
            hi = min(C, ai_old + aj_old)
        if lo >= hi:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False
        aj = aj_old - yj * (E[i] - E[j]) / eta
        aj = min(hi, max(lo, aj))
        if abs(aj - aj_old) < 1e-12 * (aj + aj_old + 1e-12):
            return False
        ai = ai_old + yi * yj * (aj_old - aj)
        di, dj = ai - ai_old, aj - aj_old
        b1 = b - E[i] - yi * di * K[i, i] - yj * dj * K[i, j]
        b2 = b - E[j] - yi * di * K[i, j] - yj * dj * K[j, j]
        if 0 < ai < C:
            new_b = b1
        elif 0 < aj < C:
            new_b = b2
        else:
            new_b = (b1 + b2) / 2.0
        alpha[i], alpha[j] = ai, aj
        E += yi * di * K[:, i] + yj * dj * K[:, j] + (new_b - b)
        b = new_b
        return True

    passes = 0
    sweeps = 0
    converged = True
    while passes < cfg.max_passes:
        if sweeps >= cfg.max_sweeps:
            converged = False
            break
        sweeps += 1
        changed = 0
        for i in range(n):
            r = y_pm[i] * E[i]
            violating = (r < -cfg.tol and alpha[i] < C) or (r > cfg.tol and alpha[i] > 0)
            if not violating:
                continue
            j = int(np.argmax(np.abs(E - E[i])))
            if try_pair(i, j):
                changed += 1
                continue
            for j in range(n):
                if try_pair(i, j):
                    changed += 1
                    break
        passes = passes + 1 if changed == 0 else 0
    return alpha, b, converged


def _svm_fit(X: np.ndarray, y: np.ndarray, cfg: SvmConfig):
    y_pm = np.where(np.asarray(y) == 1, 1.0, -1.0)
    K = _gram(X, X, cfg.gamma)
    alpha, b, converged = _smo(K, y_pm, cfg)
    keep = alpha > 1e-12
    params = {
        "sv": X[keep].copy(),
        "sv_alpha": alpha[keep].copy(),
        "sv_y": y_pm[keep].copy(),
        "b": b,
        "C": cfg.C,
        "gamma": cfg.gamma,
        "tol": cfg.tol,
    }
    return params, converged


def svm_decision(model: TrainedModel, X) -> np.ndarray:
    """Raw decision values f(x) = sum_i alpha_i y_i K(x_i, x) + b."""
    if model.kind != "svm":
        raise ValueError("not an svm model")
    Xp = _prepare(model, X)
    p = model.params
    K = _gram(p["sv"], Xp, p["gamma"])
    return (p["sv_alpha"] * p["sv_y"]) @ K + p["b"]


def svm_train(X, y, cfg: SvmConfig, mask=None, standardize=True) -> TrainedModel:
    return train_model(X, y, "svm", cfg, mask=mask, standardize=standardize)


def svm_predict(model: TrainedModel, X) -> np.ndarray:
    """Class 1 iff the decision value is strictly positive (0 on ties)."""
    return (svm_decision(model, X) > 0).astype(np.int64)


def svm_dual_objective(model: TrainedModel) -> float:
    """Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    p = model.params
    coef = p["sv_alpha"] * p["sv_y"]
    K = _gram(p["sv"], p["sv"], p["gamma"])
    return float(p["sv_alpha"].sum() - 0.5 * coef @ K @ coef)


# ----------------------------------------------------------------------- KNN

def _squared_distances(A: np.ndarray, B: np.ndarray, chunk_bytes: int = 64 << 20):
    """Row-chunked exact pairwise squared Euclidean distances.

    Computed directly as sum((a-b)^2) so that equal-distance ties are exact,
    chunked over rows of A to bound memory.
    """
    n_a = A.shape[0]
    rows = max(1, chunk_bytes // max(1, B.shape[0] * B.shape[1] * 8))
    out = np.empty((n_a, B.shape[0]))
    for start in range(0, n_a, rows):
        blk = A[start:start + rows]
        diff = blk[:, None, :] - B[None, :, :]
        out[start:start + rows] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _knn_vote(train_X, train_y, k: int, X) -> np.ndarray:
    d2 = _squared_distances(np.atleast_2d(X), train_X)
    # stable argsort implements the lowest-training-index tie rule
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    ones = train_y[nearest].sum(axis=1)
    return (2 * ones > k).astype(np.int64)


def knn_predict(train_X, train_y, cfg: KnnConfig, X) -> np.ndarray:
    """Majority label of the k nearest training rows (Euclidean distance).

    Distance ties keep the lower training index; split votes go to class 0.
    Accepts a single feature vector or a batch of rows.
    """
    train_X = np.asarray(train_X, dtype=float)
    train_y = np.asarray(train_y)
    if train_X.shape[0] == 0:
        raise ValueError("empty training set")
    if cfg.k > train_X.shape[0]:
        raise ValueError(f"k={cfg.k} exceeds training size {train_X.shape[0]}")
    single = np.asarray(X).ndim == 1
    pred = _knn_vote(train_X, train_y, cfg.k, X)
    return pred[0] if single else pred


def knn_train(X, y, cfg: KnnConfig, mask=None, standardize=True) -> TrainedModel:
    return train_model(X, y, "knn", cfg, mask=mask, standardize=standardize)


# ----------------------------------------------------------------------- ANN

def ann_hidden_size(L: int, N: int = 2) -> int:
    """Hidden node count M = ceil((N + L) / 2)."""
    if L < 1 or N < 2:
        raise ValueError("need L >= 1 inputs and N >= 2 classes")
    return math.ceil((N + L) / 2)


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(S):
    e = np.exp(S - S.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def ann_init(L: int, N: int, seed: int) -> dict:
    """Weights U[-r, r] with r = sqrt(6 / (fan_in + fan_out)); zero biases.

    Every node computes f(sum_j w_ij x_j - theta_i), so the thresholds theta
    enter with a minus sign.
    """
    rng = np.random.default_rng(seed)
    M = ann_hidden_size(L, N)
    r1 = math.sqrt(6.0 / (L + M))
    r2 = math.sqrt(6.0 / (M + N))
    return {
        "W1": rng.uniform(-r1, r1, (M, L)),
        "th1": np.zeros(M),
        "W2": rng.uniform(-r2, r2, (N, M)),
        "th2": np.zeros(N),
    }


def _ann_scores(params: dict, X: np.ndarray) -> np.ndarray:
    A1 = _sigmoid(X @ params["W1"].T - params["th1"])
    S = _sigmoid(A1 @ params["W2"].T - params["th2"])
    return _softmax(S)


def ann_forward(model_or_params, X) -> np.ndarray:
    """Class scores: sigmoid hidden layer, sigmoid output nodes, softmax."""
    params = model_or_params.params if isinstance(model_or_params, TrainedModel) else model_or_params
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if isinstance(model_or_params, TrainedModel):
        Xp = _prepare(model_or_params, X)
    else:
        Xp = np.atleast_2d(X)
    if Xp.shape[1] != params["W1"].shape[1]:
        raise ValueError("feature count does not match the input layer")
    P = _ann_scores(params, Xp)
    return P[0] if single else P


def ann_loss_grads(params: dict, X: np.ndarray, Y: np.ndarray):
    """Mean cross-entropy loss and its gradients for a batch.

    Y is one-hot, shape (batch, N). Returns (loss, grads) with grads keyed
    like params.
    """
    B = X.shape[0]
    A1 = _sigmoid(X @ params["W1"].T - params["th1"])
    S = _sigmoid(A1 @ params["W2"].T - params["th2"])
    P = _softmax(S)
    loss = float(-(Y * np.log(P)).sum() / B)
    dS = (P - Y) / B                     # softmax + cross-entropy pair
    dZ2 = dS * S * (1.0 - S)             # through the output sigmoid
    dA1 = dZ2 @ params["W2"]
    dZ1 = dA1 * A1 * (1.0 - A1)
    grads = {
        "W2": dZ2.T @ A1,
        "th2": -dZ2.sum(axis=0),
        "W1": dZ1.T @ X,
        "th1": -dZ1.sum(axis=0),
    }
    return loss, grads


def _ann_fit(X: np.ndarray, y: np.ndarray, cfg: AnnConfig):
    n, L = X.shape
    N = 2
    params = ann_init(L, N, cfg.seed)
    Y = np.zeros((n, N))
    Y[np.arange(n), y] = 1.0
    rng = np.random.default_rng(cfg.seed + 1)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            sel = order[start:start + cfg.batch]
            loss, grads = ann_loss_grads(params, X[sel], Y[sel])
            if not math.isfinite(loss):
                raise ValueError(f"non-finite training loss at epoch {epoch}")
            for key in params:
                params[key] = params[key] - cfg.alpha * grads[key]
    return params, True


def ann_train(X, y, cfg: AnnConfig, mask=None, standardize=True) -> TrainedModel:
    return train_model(X, y, "ann", cfg, mask=mask, standardize=standardize)


# ------------------------------------------------------------ common surface

def accuracy(predictions, truth) -> float:
    """Fraction of matching labels."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape or predictions.size == 0:
        raise ValueError("prediction/truth vectors must be non-empty and equal length")
    return float((predictions == truth).mean())


def _full_mask(m: int) -> np.ndarray:
    return np.ones(m, dtype=bool)


def train_model(X, y, kind: str, cfg, mask=None, standardize: bool = True) -> TrainedModel:
    """Mask features, fit the scaler on the training rows, train a classifier."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be 2-D with one label per row")
    mask = _full_mask(X.shape[1]) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (X.shape[1],) or not mask.any():
        raise ValueError("mask must select at least one feature")
    Xm = X[:, mask]
    scaler = standardize_fit(Xm) if standardize else None
    Xs = standardize_apply(scaler, Xm) if standardize else Xm
    if kind in ("svm", "ann") and len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if kind == "svm":
        params, converged = _svm_fit(Xs, y, cfg)
    elif kind == "knn":
        if cfg.k > Xs.shape[0]:
            raise ValueError(f"k={cfg.k} exceeds training size {Xs.shape[0]}")
        params, converged = {"X": Xs.copy(), "y": y.copy(), "k": cfg.k}, True
    elif kind == "ann":
        params, converged = _ann_fit(Xs, y, cfg)
    else:
        raise ValueError(f"unknown classifier kind {kind!r}")
    return TrainedModel(kind=kind, params=params, scaler=scaler, mask=mask, converged=converged)


def _prepare(model: TrainedModel, X) -> np.ndarray:
    """Apply the model's feature mask and scaler to raw feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] == model.mask.shape[0]:
        X = X[:, model.mask]
    elif X.shape[1] != int(model.mask.sum()):
        raise ValueError("feature count matches neither the full nor the masked space")
    return standardize_apply(model.scaler, X) if model.scaler is not None else X


def predict(model: TrainedModel, X) -> np.ndarray:
    """Predict labels for raw (unmasked, unscaled) feature rows."""
    single = np.asarray(X).ndim == 1
    if model.kind == "svm":
        pred = (svm_decision(model, X) > 0).astype(np.int64)
    elif model.kind == "knn":
        p = model.params
        pred = _knn_vote(p["X"], p["y"], p["k"], _prepare(model, X))
    elif model.kind == "ann":
        P = _ann_scores(model.params, _prepare(model, X))
        pred = (P[:, 1] > P[:, 0]).astype(np.int64)
    else:
        raise ValueError(f"unknown classifier kind {model.kind!r}")
    return pred[0] if single else pred


# --------------------------------------------------------------- persistence

_FORMAT_VERSION = 1


def save_model(model: TrainedModel, path) -> Path:
    """Serialize a TrainedModel to .npz (appended to the name if missing)."""
    path = Path(path)
    payload = {
        "format_version": _FORMAT_VERSION,
        "kind": model.kind,
        "mask": model.mask,
        "converged": model.converged,
        "has_scaler": model.scaler is not None,
    }
    if model.scaler is not None:
        payload["scaler_mean"] = model.scaler.mean
        payload["scaler_std"] = model.scaler.std
        payload["scaler_constant"] = model.scaler.constant
    for key, val in model.params.items():
        payload[f"p_{key}"] = val
    np.savez(path, **payload)
    return path if path.suffix == ".npz" else Path(str(path) + ".npz")


def load_model(path) -> TrainedModel:
    with np.load(Path(path), allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        scaler = None
        if bool(data["has_scaler"]):
            scaler = ScalerStats(mean=data["scaler_mean"], std=data["scaler_std"],
                                 constant=data["scaler_constant"])
        params = {}
        for key in data.files:
            if key.startswith("p_"):
                arr = data[key]
                params[key[2:]] = arr.item() if arr.ndim == 0 else arr
        return TrainedModel(kind=str(data["kind"]), params=params, scaler=scaler,
                            mask=data["mask"], converged=bool(data["converged"]))
