"""Penalized linear regression: ridge (closed form) and lasso (coordinate descent).

Features are standardized internally (population sd) so one alpha grid is
meaningful across columns of wildly different scales; the intercept is the
target mean and is never penalized. Conventions:

  ridge:  (Z'Z + alpha*I) beta = Z'(y - ybar)
  lasso:  minimize (1/2n)||y_c - Z beta||^2 + alpha*||beta||_1,
          KKT at the solution: |Z_j'r|/n <= alpha where beta_j = 0 and
          Z_j'r/n = alpha*sign(beta_j) elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SolverError, ValidationError

# Penalty grid shared by ridge and lasso tuning.
ALPHA_GRID = [0.001, 0.01, 0.1, 1, 10, 100, 1000, 2000, 3000, 4000, 5000, 10000]

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 10_000


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to mean 0, population sd 1.

    Returns (Z, means, sds, zero_variance_mask). Zero-variance columns are
    flagged, left as zeros in Z, and get sd 1 so downstream division is safe.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("standardize needs a 2-D matrix with at least 2 rows")
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    zero_var = sds == 0.0
    safe_sds = np.where(zero_var, 1.0, sds)
    Z = (X - means) / safe_sds
    Z[:, zero_var] = 0.0
    return Z, means, safe_sds, zero_var


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    return float(np.sign(z) * max(abs(z) - gamma, 0.0))


@dataclass(frozen=True)
class LinearModel:
    """Fitted penalized linear model in standardized feature space."""

    kind: str  # "ridge" | "lasso"
    alpha: float
    coefficients: np.ndarray  # per feature, standardized space
    intercept: float
    feature_means: np.ndarray
    feature_sds: np.ndarray
    zero_variance: np.ndarray
    converged: bool = True
    n_sweeps: int = 0
    feature_names: tuple[str, ...] | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.coefficients.shape[0]:
            raise ValidationError(
                f"feature count mismatch: model has {self.coefficients.shape[0]}, got {X.shape[1]}"
            )
        Z = (X - self.feature_means) / self.feature_sds
        return self.intercept + Z @ self.coefficients

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "n_features": int(self.coefficients.shape[0]),
            "n_nonzero": int(np.count_nonzero(self.coefficients)),
            "converged": self.converged,
        }

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "alpha": self.alpha,
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "feature_means": self.feature_means.tolist(),
            "feature_sds": self.feature_sds.tolist(),
            "zero_variance": self.zero_variance.astype(bool).tolist(),
            "converged": self.converged,
            "feature_names": list(self.feature_names) if self.feature_names else None,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        doc = json.loads(text)
        return cls(
            kind=doc["kind"],
            alpha=doc["alpha"],
            coefficients=np.array(doc["coefficients"], dtype=float),
            intercept=doc["intercept"],
            feature_means=np.array(doc["feature_means"], dtype=float),
            feature_sds=np.array(doc["feature_sds"], dtype=float),
            zero_variance=np.array(doc["zero_variance"], dtype=bool),
            converged=doc["converged"],
            feature_names=tuple(doc["feature_names"]) if doc["feature_names"] else None,
        )


def fit_ridge(X: np.ndarray, y: np.ndarray, alpha: float, feature_names=None) -> LinearModel:
    """Exact ridge solve of (Z'Z + alpha*I) beta = Z'y_c on standardized features."""
    if alpha < 0:
        raise ValidationError("alpha must be nonnegative")
    y = np.asarray(y, dtype=float)
    Z, means, sds, zero_var = standardize(X)
    ybar = float(y.mean())
    yc = y - ybar
    keep = ~zero_var
    beta = np.zeros(Z.shape[1])
    if keep.any():
        Zk = Z[:, keep]
        A = Zk.T @ Zk + alpha * np.eye(Zk.shape[1])
        b = Zk.T @ yc
        try:
            beta_k = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            raise SolverError("ridge system is singular; use alpha > 0")
        beta[keep] = beta_k
    return LinearModel(
        kind="ridge",
        alpha=float(alpha),
        coefficients=beta,
        intercept=ybar,
        feature_means=means,
        feature_sds=sds,
        zero_variance=zero_var,
        feature_names=tuple(feature_names) if feature_names else None,
    )


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float,
    tol: float = LASSO_TOL,
    max_sweeps: int = LASSO_MAX_SWEEPS,
    feature_names=None,
    record_objective: bool = False,
) -> LinearModel:
    """Cyclic coordinate descent with soft thresholding.

    Stops when the largest coefficient change in a sweep falls below
    ``tol``; hitting ``max_sweeps`` clears the converged flag instead of
    failing. Duplicate columns are resolved deterministically by cyclic
    (input column) order.
    """
    if alpha < 0:
        raise ValidationError("alpha must be nonnegative")
    y = np.asarray(y, dtype=float)
    Z, means, sds, zero_var = standardize(X)
    n, p = Z.shape
    ybar = float(y.mean())
    yc = y - ybar
    active = [j for j in range(p) if not zero_var[j]]
    beta = np.zeros(p)
    r = yc.copy()  # residual y_c - Z beta
    # With population-sd standardization, Z_j'Z_j / n == 1 exactly.
    converged = False
    sweeps = 0
    objective_sweeps: list[float] = []
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_delta = 0.0
        for j in active:
            zj = Z[:, j]
            rho = (zj @ r) / n + beta[j]
            new = soft_threshold(rho, alpha)
            if new != beta[j]:
                r += zj * (beta[j] - new)
                max_delta = max(max_delta, abs(new - beta[j]))
                beta[j] = new
        if record_objective:
            objective_sweeps.append(float(0.5 * (r @ r) / n + alpha * np.abs(beta).sum()))
        if max_delta < tol:
            converged = True
            break
    model = LinearModel(
        kind="lasso",
        alpha=float(alpha),
        coefficients=beta,
        intercept=ybar,
        feature_means=means,
        feature_sds=sds,
        zero_variance=zero_var,
        converged=converged,
        n_sweeps=sweeps,
        feature_names=tuple(feature_names) if feature_names else None,
    )
    if record_objective:
        object.__setattr__(model, "objective_sweeps", objective_sweeps)
    return model


def lasso_kkt_residual(model: LinearModel, X: np.ndarray, y: np.ndarray) -> float:
    """Worst-case KKT violation of a lasso fit on its training data."""
    y = np.asarray(y, dtype=float)
    Z = (np.asarray(X, dtype=float) - model.feature_means) / model.feature_sds
    Z[:, model.zero_variance] = 0.0
    n = Z.shape[0]
    r = (y - y.mean()) - Z @ model.coefficients
    corr = Z.T @ r / n
    worst = 0.0
    for j in range(Z.shape[1]):
        if model.zero_variance[j]:
            continue
        if model.coefficients[j] == 0.0:
            worst = max(worst, abs(corr[j]) - model.alpha)
        else:
            worst = max(worst, abs(corr[j] - model.alpha * np.sign(model.coefficients[j])))
    return float(worst)
