"""Stealthy false-data injection: attack crafting and labeled dataset generation.

An attack a = H c shifts the estimated state by exactly c while leaving the
measurement residual unchanged, so the residual-based bad data test cannot
see it. Datasets mix clean and attacked samples for supervised detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .powergrid import (
    BusSystem,
    DcJacobian,
    NoiseModel,
    _weights,
    build_jacobian,
    measure,
    solve_dc_state,
)


@dataclass(frozen=True)
class AttackConfig:
    """How attack vectors c are drawn.

    A crafted attack perturbs t ~ uniform{1..max_targets} state variables,
    each by s*u with s ~ uniform{-1,+1} and u ~ U[magnitude_low, magnitude_high]
    (radians).
    """

    max_targets: int
    magnitude_low: float = 0.01
    magnitude_high: float = 0.1

    def __post_init__(self):
        if self.max_targets < 1:
            raise ValueError("max_targets must be at least 1")
        if not 0 < self.magnitude_low <= self.magnitude_high:
            raise ValueError("need 0 < magnitude_low <= magnitude_high")


def default_attack_config(n_states: int) -> AttackConfig:
    """Default: up to ceil(n_states / 3) targets, magnitudes U[0.01, 0.1] rad."""
    return AttackConfig(max_targets=math.ceil(n_states / 3))


@dataclass(frozen=True)
class AttackVector:
    """c over states (mostly zeros) and its measurement image a = H c."""

    c: np.ndarray
    a: np.ndarray


def craft_attack(H: DcJacobian, cfg: AttackConfig, rng: np.random.Generator) -> AttackVector:
    """Draw a sparse state perturbation c and return (c, a = H c)."""
    n = H.n_states
    if cfg.max_targets > n:
        raise ValueError(f"max_targets {cfg.max_targets} exceeds {n} states")
    t = int(rng.integers(1, cfg.max_targets + 1))
    targets = rng.choice(n, size=t, replace=False)
    mags = rng.uniform(cfg.magnitude_low, cfg.magnitude_high, size=t)
    signs = rng.integers(0, 2, size=t) * 2 - 1
    c = np.zeros(n)
    c[targets] = signs * mags
    return AttackVector(c=c, a=H.matrix @ c)


def inject(z: np.ndarray, atk: AttackVector) -> np.ndarray:
    """Z_bad = Z + a."""
    z = np.asarray(z, dtype=float)
    if z.shape != atk.a.shape:
        raise ValueError("measurement/attack dimension mismatch")
    return z + atk.a


@dataclass(frozen=True)
class Dataset:
    """Labeled measurement samples: X rows are feature vectors, y in {0, 1}.

    clean_X, when kept, holds the pre-attack measurements (equal to X on
    clean rows), which makes residual-invariance checks cheap.
    """

    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)
    clean_X: np.ndarray | None = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be 2-D with one label per row")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("non-finite features")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def generate_dataset(sys: BusSystem, n: int, attack_ratio: float, noise: NoiseModel,
                     load_var: float, cfg: AttackConfig | None, seed: int,
                     keep_clean: bool = False) -> Dataset:
    """Simulate n labeled samples on one system.

    Per sample: every base injection is scaled by an independent factor
    U[1 - load_var, 1 + load_var], the DC flow is solved for the state, and
    the measurement vector is drawn with Gaussian noise. Exactly
    floor(n * attack_ratio) samples (positions shuffled) then get a fresh
    stealthy attack added on top of the noisy measurement and label 1.

    Reproducible: each sample uses its own child stream of the master seed,
    so results do not depend on evaluation order.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not 0 <= attack_ratio <= 1:
        raise ValueError("attack_ratio must be in [0, 1]")
    if not 0 <= load_var < 1:
        raise ValueError("load_var must be in [0, 1)")
    jac = build_jacobian(sys)
    if cfg is None:
        cfg = default_attack_config(jac.n_states)
    base = sys.injections()
    m = jac.n_measurements

    ss = np.random.SeedSequence(seed)
    children = ss.spawn(n + 1)
    master = np.random.default_rng(children[0])
    n_attacked = int(math.floor(n * attack_ratio))
    order = master.permutation(n)
    attacked = np.zeros(n, dtype=bool)
    attacked[order[:n_attacked]] = True

    X = np.empty((n, m))
    clean = np.empty((n, m)) if keep_clean else None
    y = attacked.astype(np.int64)
    for i in range(n):
        rng = np.random.default_rng(children[i + 1])
        factors = rng.uniform(1.0 - load_var, 1.0 + load_var, size=sys.n_buses)
        x_true = solve_dc_state(sys, jac, base * factors)
        z = measure(jac, x_true, noise, rng)
        if attacked[i]:
            atk = craft_attack(jac, cfg, rng)
            if clean is not None:
                clean[i] = z
            z = z + atk.a
        elif clean is not None:
            clean[i] = z
        X[i] = z
    meta = {
        "system": sys.name,
        "n": n,
        "seed": seed,
        "noise_sigma": noise.sigma,
        "load_var": load_var,
        "attack_ratio": attack_ratio,
        "max_targets": cfg.max_targets,
        "magnitude_low": cfg.magnitude_low,
        "magnitude_high": cfg.magnitude_high,
    }
    return Dataset(X=X, y=y, meta=meta, clean_X=clean)


def stealthiness_report(ds: Dataset, H: DcJacobian, variance, threshold: float):
    """Fraction of each class flagged by the residual test.

    Returns (clean_flag_rate, attacked_flag_rate). With stealthy attacks the
    two rates coincide up to sampling noise: the detector cannot separate the
    classes.
    """
    if ds.n_features != H.n_measurements:
        raise ValueError("dataset does not match this Jacobian")
    res = batch_residuals(ds.X, H, variance)
    flags = res >= threshold
    clean = ds.y == 0
    attacked = ds.y == 1
    clean_rate = float(flags[clean].mean()) if clean.any() else 0.0
    attacked_rate = float(flags[attacked].mean()) if attacked.any() else 0.0
    return clean_rate, attacked_rate


def batch_residuals(Z: np.ndarray, H: DcJacobian, variance) -> np.ndarray:
    """Squared residual norm of the WLS fit for every row of Z."""
    Z = np.asarray(Z, dtype=float)
    m = H.n_measurements
    wi = _weights(variance, m)
    Hw = H.matrix * wi[:, None]
    G = H.matrix.T @ Hw
    Xhat = np.linalg.solve(G, Hw.T @ Z.T).T
    R = Z - Xhat @ H.matrix.T
    return np.einsum("ij,ij->i", R, R)


# ------------------------------------------------------------- dataset files

def save_dataset(ds: Dataset, path) -> None:
    """Write samples as CSV (header f1..fm,label) plus a key = value sidecar."""
    path = Path(path)
    m = ds.n_features
    with path.open("w") as fh:
        fh.write(",".join([f"f{j + 1}" for j in range(m)] + ["label"]) + "\n")
        for row, label in zip(ds.X, ds.y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    side = path.with_suffix(path.suffix + ".meta")
    with side.open("w") as fh:
        for key, val in ds.meta.items():
            fh.write(f"{key} = {val}\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if not header or header[-1] != "label":
            raise ValueError(f"{path}: expected header f1,...,fm,label")
        m = len(header) - 1
        rows, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != m + 1:
                raise ValueError(f"{path} line {lineno}: expected {m + 1} fields")
            rows.append([float(v) for v in parts[:m]])
            labels.append(int(parts[m]))
    meta = {}
    side = path.with_suffix(path.suffix + ".meta")
    if side.exists():
        for line in side.read_text().splitlines():
            if "=" in line:
                key, _, val = line.partition("=")
                meta[key.strip()] = _parse_meta_value(val.strip())
    return Dataset(X=np.array(rows), y=np.array(labels, dtype=np.int64), meta=meta)


def _parse_meta_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text
