"""Two-feature logistic regression fitted by IRLS.

The shared-covariance discriminant gives a closed-form weight vector, which is
used only as the starting point; the estimate itself is the (optionally
ridge-penalized) maximum-likelihood solution. Label 1 is the disease class.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import (
    Diverged,
    SchemaMismatch,
    SingleClassData,
    SingularCovariance,
    SingularInformation,
    UnreadableFile,
)

log = logging.getLogger(__name__)

MODEL_VERSION = 1
COEF_NAMES = ("intercept", "mu", "sigma")


def sigmoid(a):
    """Logistic function, overflow-free for any finite input."""
    a = np.asarray(a, dtype=np.float64)
    e = np.exp(-np.abs(a))
    out = np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FitConfig:
    ridge: float = 0.0
    tol: float = 1e-8
    max_iter: int = 100
    threshold: float = 0.5
    cond_cap: float = 1e10

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter >= 1 and tol > 0 required")


@dataclass(frozen=True)
class FitInfo:
    iterations: int = 0
    log_likelihood: float = float("nan")
    converged: bool = False
    ridge: float = 0.0
    # penalized objective after each accepted step; not persisted
    history: tuple = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    w_mu: float
    w_sigma: float
    threshold: float = 0.5
    fit_info: FitInfo = field(default_factory=FitInfo)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.intercept, self.w_mu, self.w_sigma)):
            raise Diverged("non-finite coefficients")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.intercept, self.w_mu, self.w_sigma])

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w_mu, self.w_sigma])

    def with_threshold(self, threshold: float) -> "LogisticModel":
        return LogisticModel(self.intercept, self.w_mu, self.w_sigma, threshold, self.fit_info)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, 2)
        return sigmoid(self.intercept + X @ self.weights)

    def decide(self, probs) -> np.ndarray:
        return (np.asarray(probs) >= self.threshold).astype(np.int64)


@dataclass(frozen=True)
class ClassStats:
    mu1: np.ndarray
    mu2: np.ndarray
    sigma_pooled: np.ndarray
    prior1: float
    prior2: float

    @classmethod
    def from_data(cls, X, y) -> "ClassStats":
        """Class means, pooled (n-2 divisor) covariance and empirical priors; class 1 is label 1."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        X1, X0 = X[y == 1], X[y == 0]
        n1, n0 = len(X1), len(X0)
        if n1 == 0 or n0 == 0:
            raise SingleClassData("both labels are required")
        scatter = np.zeros((X.shape[1], X.shape[1]))
        for Xc in (X1, X0):
            d = Xc - Xc.mean(axis=0)
            scatter += d.T @ d
        dof = max(n1 + n0 - 2, 1)
        return cls(X1.mean(axis=0), X0.mean(axis=0), scatter / dof, n1 / (n1 + n0), n0 / (n1 + n0))


@dataclass(frozen=True)
class CoefficientCI:
    names: tuple
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    z: float

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "z": self.z,
            "coefficients": {
                n: {"estimate": float(e), "se": float(s), "lower": float(lo), "upper": float(hi)}
                for n, e, s, lo, hi in zip(self.names, self.estimate, self.se, self.lower, self.upper)
            },
        }


def lda_init(stats: ClassStats, threshold: float = 0.5, cond_cap: float = 1e10) -> LogisticModel:
    """Closed-form shared-covariance weights: w = inv(S)(mu1 - mu2) with the matching intercept."""
    S = np.asarray(stats.sigma_pooled, dtype=np.float64)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > cond_cap:
        raise SingularCovariance(f"pooled covariance is singular or ill-conditioned (cond={np.linalg.cond(S):.3g})")
    m1, m2 = np.asarray(stats.mu1, float), np.asarray(stats.mu2, float)
    w = np.linalg.solve(S, m1 - m2)
    b = -0.5 * m1 @ np.linalg.solve(S, m1) + 0.5 * m2 @ np.linalg.solve(S, m2) + math.log(stats.prior1 / stats.prior2)
    return LogisticModel(float(b), float(w[0]), float(w[1]), threshold)


def design(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([np.ones(len(X)), X])


def _penalty_mask(p: int) -> np.ndarray:
    m = np.ones(p)
    m[0] = 0.0  # intercept is not penalized
    return m


def log_likelihood(beta, X, y, ridge: float = 0.0) -> float:
    """Bernoulli log-likelihood minus ridge * ||w||^2 (intercept excluded)."""
    A = design(X)
    a = A @ np.asarray(beta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ll = float(np.sum(y * a - np.logaddexp(0.0, a)))
    return ll - ridge * float(np.sum(_penalty_mask(A.shape[1]) * np.asarray(beta) ** 2))


def gradient(beta, X, y, ridge: float = 0.0) -> np.ndarray:
    A = design(X)
    beta = np.asarray(beta, dtype=np.float64)
    p = sigmoid(A @ beta)
    return A.T @ (np.asarray(y, dtype=np.float64) - p) - 2.0 * ridge * _penalty_mask(A.shape[1]) * beta


def information(beta, X, ridge: float = 0.0) -> np.ndarray:
    """Negative Hessian of the penalized log-likelihood: A^T W A + 2 ridge D."""
    A = design(X)
    p = sigmoid(A @ np.asarray(beta, dtype=np.float64))
    W = p * (1.0 - p)
    return A.T @ (W[:, None] * A) + 2.0 * ridge * np.diag(_penalty_mask(A.shape[1]))


def _initial_beta(X, y, config: FitConfig) -> np.ndarray:
    try:
        m = lda_init(ClassStats.from_data(X, y), cond_cap=config.cond_cap)
    except SingularCovariance:
        return np.zeros(3)
    beta = m.coef
    # a wildly scaled start (near-separable classes) only costs step halvings
    if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 1e3:
        return np.zeros(3)
    return beta


def fit(table, config: FitConfig = FitConfig(), y=None) -> LogisticModel:
    """Maximize the (penalized) likelihood by Newton/IRLS with step halving.

    `table` is a FeatureTable, or an (n, 2) feature array when `y` is given.
    """
    if y is None:
        X, y = table.X, table.y
    else:
        X = np.asarray(table, dtype=np.float64).reshape(-1, 2)
        y = np.asarray(y)
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("features and labels must be non-empty and the same length")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if not set(np.unique(y)) <= {0, 1} or len(np.unique(y)) < 2:
        raise SingleClassData("fit needs both labels 0 and 1")
    lam = config.ridge
    beta = _initial_beta(X, y, config)
    obj = log_likelihood(beta, X, y, lam)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        g = gradient(beta, X, y, lam)
        H = information(beta, X, lam)
        try:
            delta = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(H, g, rcond=None)[0]
        if not np.all(np.isfinite(delta)):
            raise Diverged("non-finite Newton step; data may be separable, set a ridge penalty")
        step = 1.0
        for _ in range(60):
            cand = beta + step * delta
            cand_obj = log_likelihood(cand, X, y, lam)
            if np.isfinite(cand_obj) and cand_obj >= obj:
                break
            step *= 0.5
        else:
            # no ascent possible at machine precision: we are at the optimum
            converged = True
            break
        change = np.max(np.abs(cand - beta))
        beta, obj = cand, cand_obj
        history.append(obj)
        if not np.all(np.isfinite(beta)):
            raise Diverged("non-finite coefficients; data may be separable, set a ridge penalty")
        if change < config.tol:
            converged = True
            break
    if lam == 0:
        # strict separation of every training point means no finite maximizer exists
        margin = (2 * y - 1) * (design(X) @ beta)
        if np.all(margin > 0):
            raise Diverged("training data are linearly separable and ridge is 0; set a ridge penalty")
    if not converged:
        log.warning("IRLS did not converge in %d iterations", config.max_iter)
    info = FitInfo(it, log_likelihood(beta, X, y, 0.0), converged, lam, tuple(history))
    return LogisticModel(float(beta[0]), float(beta[1]), float(beta[2]), config.threshold, info)


def wald_ci(model: LogisticModel, table, level: float = 0.95, y=None, ridge=None) -> CoefficientCI:
    """Normal-approximation intervals from the inverse observed information at the fit."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if y is None:
        X = table.X
    else:
        X = np.asarray(table, dtype=np.float64).reshape(-1, 2)
    lam = model.fit_info.ridge if ridge is None else ridge
    info = information(model.coef, X, lam)
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > 1e14:
        raise SingularInformation("observed information matrix is singular")
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    z = float(norm.ppf(0.5 + level / 2.0))
    est = model.coef
    return CoefficientCI(COEF_NAMES, est, se, est - z * se, est + z * se, level, z)


def predict(model: LogisticModel, phi) -> tuple:
    """(probability of label 1, decision); the tie at the threshold goes to label 1."""
    mu, sig = (phi.mu, phi.sigma) if hasattr(phi, "mu") else phi
    p = sigmoid(model.intercept + model.w_mu * mu + model.w_sigma * sig)
    return p, int(p >= model.threshold)


def save_model(model: LogisticModel, path) -> None:
    fi = model.fit_info
    doc = {
        "version": MODEL_VERSION,
        "intercept": model.intercept,
        "w_mu": model.w_mu,
        "w_sigma": model.w_sigma,
        "threshold": model.threshold,
        "fit_info": {
            "iterations": fi.iterations,
            "log_likelihood": fi.log_likelihood,
            "converged": fi.converged,
            "ridge": fi.ridge,
        },
    }
    # floats are written as shortest round-trip reprs, which reload bit-exactly
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def load_model(path) -> LogisticModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("version") != MODEL_VERSION:
        raise SchemaMismatch(f"{path}: expected model version {MODEL_VERSION}, got {doc.get('version') if isinstance(doc, dict) else None!r}")
    try:
        fi = doc.get("fit_info") or {}
        info = FitInfo(
            int(fi.get("iterations", 0)),
            float(fi.get("log_likelihood", float("nan"))),
            bool(fi.get("converged", False)),
            float(fi.get("ridge", 0.0)),
        )
        return LogisticModel(
            float(doc["intercept"]), float(doc["w_mu"]), float(doc["w_sigma"]), float(doc["threshold"]), info
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
