"""Informativeness measurement through an interpretable logistic model.

Categorical attributes are one-hot encoded with one indicator per observed
value (no reference level dropped) and numeric attributes are standardized,
so every attribute value gets its own coefficient.  A small L2 penalty keeps
the problem strictly convex despite the collinearity that full encoding
introduces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import ColumnType, Dataset, group_mask
from .errors import NoCompleteRows, NonConvergenceWarning, OutcomeNotBinary, SingleClassTarget

INTERCEPT = "intercept"


@dataclass
class FeatureMatrix:
    X: np.ndarray  # rows x (features + 1); intercept is the last column
    y: np.ndarray
    feature_names: list
    rows: np.ndarray  # source row indices kept
    excluded_rows: int
    blocks: list  # column indices of each categorical attribute's indicators
    encoding: list  # per attribute: ("categorical", attr, values) or ("numeric", attr, mean, sd)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def transform(self, ds: Dataset) -> np.ndarray:
        """Encode every row of ``ds`` with the stored levels and scaling (gaps -> 0)."""
        parts = []
        for spec in self.encoding:
            if spec[0] == "categorical":
                _, attr, values = spec
                cells = ds.values(attr)
                parts.append(np.array([[1.0 if c == v else 0.0 for v in values] for c in cells]).reshape(-1, len(values)))
            else:
                _, attr, mean, sd = spec
                raw = ds.column(attr).array
                z = np.zeros(len(raw)) if sd == 0 else (raw - mean) / sd
                parts.append(np.nan_to_num(z, nan=0.0).reshape(-1, 1))
        parts.append(np.ones((ds.n_rows, 1)))
        return np.hstack(parts)


def _level(value):
    return str(value)


def encode(ds: Dataset, outcome: str, features, favorable: int = 1) -> FeatureMatrix:
    """Design matrix and 0/1 target (1 = favorable) over fully observed rows."""
    out_col = ds.column(outcome)
    if out_col.kind is not ColumnType.BINARY_LABEL:
        raise OutcomeNotBinary(f"outcome {outcome!r} is {out_col.kind.value}")
    features = [f for f in features if f != outcome]
    keep = out_col.observed.copy()
    for f in features:
        keep &= ds.column(f).observed
    rows = np.flatnonzero(keep)
    if rows.size == 0:
        raise NoCompleteRows("no row is observed on the outcome and every feature")
    names, parts, blocks, encoding = [], [], [], []
    col_idx = 0
    for f in features:
        col = ds.column(f)
        if col.kind is ColumnType.NUMERIC:
            raw = col.array[rows]
            mean = float(raw.mean())
            sd = float(raw.std())
            parts.append(((raw - mean) / sd if sd > 0 else np.zeros_like(raw)).reshape(-1, 1))
            names.append(f)
            encoding.append(("numeric", f, mean, sd))
            col_idx += 1
        else:
            cells = [col.values[i] for i in rows]
            values = sorted({c for c in cells}, key=_level) if col.kind is ColumnType.CATEGORICAL else sorted(set(cells))
            parts.append(np.array([[1.0 if c == v else 0.0 for v in values] for c in cells]).reshape(-1, len(values)))
            names += [f"{f}={_level(v)}" for v in values]
            blocks.append(np.arange(col_idx, col_idx + len(values)))
            encoding.append(("categorical", f, values))
            col_idx += len(values)
    parts.append(np.ones((rows.size, 1)))
    X = np.hstack(parts)
    y = (out_col.array[rows] == favorable).astype(float)
    return FeatureMatrix(X, y, names, rows, int(ds.n_rows - rows.size), blocks, encoding)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, l2_lambda: float):
    """Mean negative log-likelihood plus ``l2_lambda * |w|^2 / 2`` and its gradient.

    ``theta`` holds the feature weights followed by the (unpenalized) intercept.
    """
    z = X @ theta
    w = theta[:-1]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (w @ w))
    grad = X.T @ (_sigmoid(z) - y) / len(y)
    grad[:-1] += l2_lambda * w
    return loss, grad


def loss_change(a: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2_lambda: float) -> float:
    """``objective(b) - objective(a)`` computed without cancellation.

    Subtracting two rounded losses loses every digit once steps get small;
    ``softplus(z + d) - softplus(z) = log1p(sigmoid(z) * expm1(d))`` does not.
    """
    za = X @ a
    d = X @ (b - a)
    nll = np.log1p(_sigmoid(za) * np.expm1(d)) - y * d
    wa, wb = a[:-1], b[:-1]
    return float(np.mean(nll) + 0.5 * l2_lambda * ((wb - wa) @ (wb + wa)))


def _center_blocks(theta, blocks):
    # Shifting a full indicator block into the intercept leaves every logit
    # unchanged and can only lower the penalty.
    for b in blocks:
        m = theta[b].mean()
        theta[b] -= m
        theta[-1] += m
    return theta


@dataclass
class LogisticModel:
    coefficients: np.ndarray
    intercept: float
    feature_names: list
    l2_lambda: float
    iterations: int
    gradient_norm: float
    seed: int
    converged: bool
    loss: float
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def theta(self) -> np.ndarray:
        return np.append(self.coefficients, self.intercept)

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.feature_names.index(name)])

    def predict_probability(self, X: np.ndarray) -> np.ndarray:
        """Probabilities for rows of a design matrix laid out like the training data."""
        X = np.atleast_2d(X)
        p = _sigmoid(X @ self.theta)
        return np.clip(p, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)


def train_logistic(
    fm: FeatureMatrix,
    l2_lambda: float = 1e-4,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    seed: int = 0,
    init_scale: float = 0.01,
) -> LogisticModel:
    """Fit by full-batch accelerated gradient descent with Armijo backtracking.

    Each iteration takes a backtracked gradient step from a Nesterov
    extrapolation of the last two iterates.  A step that would raise the loss
    restarts the momentum and is retaken from the current iterate, so the
    loss never increases.  Sufficient decrease is judged on
    :func:`loss_change`, which stays accurate down to tiny gradients.  Only the starting point depends on ``seed``.
    Stops once the gradient's infinity norm is at most ``tol``; after
    ``max_iter`` iterations the best iterate is returned with
    ``converged=False`` and a warning.
    """
    X, y = fm.X, fm.y
    if len(y) < 2:
        raise SingleClassTarget("need at least two rows")
    if y.min() == y.max():
        raise SingleClassTarget("target has a single class")
    if l2_lambda < 0:
        raise ValueError("l2_lambda must be non-negative")
    rng = np.random.default_rng(seed)
    theta = _center_blocks(rng.normal(0.0, init_scale, X.shape[1]), fm.blocks)
    loss, grad = objective(theta, X, y, l2_lambda)
    history = [loss]
    prev = theta
    momentum = 1.0
    step = 1.0
    it = 0
    gnorm = float(np.max(np.abs(grad)))

    def backtrack(point, p_grad, t):
        gg = float(p_grad @ p_grad)
        while True:
            cand = _center_blocks(point - t * p_grad, fm.blocks)
            drop = loss_change(point, cand, X, y, l2_lambda)
            if drop <= -0.5 * t * gg or t < 1e-20:
                return cand, t
            t *= 0.5

    while gnorm > tol and it < max_iter:
        it += 1
        nxt = (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
        beta = (momentum - 1.0) / nxt
        if beta > 0.0:
            point = theta + beta * (theta - prev)
            cand, t = backtrack(point, objective(point, X, y, l2_lambda)[1], step)
        else:
            cand, t = backtrack(theta, grad, step)
        drop = loss_change(theta, cand, X, y, l2_lambda)
        if drop > 0.0:
            # momentum overshot: restart from the current iterate
            momentum, nxt = 1.0, 1.0
            cand, t = backtrack(theta, grad, step)
            drop = loss_change(theta, cand, X, y, l2_lambda)
            if drop > 0.0:
                break
        prev, theta = theta, cand
        grad = objective(theta, X, y, l2_lambda)[1]
        momentum = nxt
        # exact decreases telescoped from the starting loss
        history.append(history[-1] + drop)
        gnorm = float(np.max(np.abs(grad)))
        step = min(t * 2.0, 1e6)
    loss = objective(theta, X, y, l2_lambda)[0]
    converged = gnorm <= tol
    if not converged:
        warnings.warn(
            f"logistic training stopped after {it} iterations with gradient norm {gnorm:.3g} > {tol:g}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return LogisticModel(
        coefficients=theta[:-1].copy(),
        intercept=float(theta[-1]),
        feature_names=list(fm.feature_names),
        l2_lambda=l2_lambda,
        iterations=it,
        gradient_norm=gnorm,
        seed=seed,
        converged=converged,
        loss=loss,
        loss_history=history,
    )


@dataclass(frozen=True)
class FeatureImportance:
    feature: str
    coefficient: float
    rank: int
    top_half: bool


@dataclass
class ImportanceReport:
    features: list
    per_protected: dict
    flags: list

    def as_dict(self) -> dict:
        return {
            "features": [
                {"feature": f.feature, "coefficient": f.coefficient, "rank": f.rank, "top_half": f.top_half}
                for f in self.features
            ],
            "per_protected": self.per_protected,
            "flags": self.flags,
        }


def rank_features(names, coefficients) -> list[FeatureImportance]:
    """Rank by |coefficient| descending; ties keep feature order."""
    order = sorted(range(len(names)), key=lambda i: (-abs(coefficients[i]), i))
    ranks = {i: r + 1 for r, i in enumerate(order)}
    half = math.ceil(len(names) / 2)
    return [FeatureImportance(names[i], float(coefficients[i]), ranks[i], ranks[i] <= half) for i in range(len(names))]


def importance_from_coefficients(coefficients: dict, protected, min_magnitude: float = 0.25) -> ImportanceReport:
    """Importance report from a ``{feature_name: coefficient}`` mapping.

    Indicator features are named ``attribute=value``.  A protected value is
    flagged when its coefficient for the favorable outcome is negative and at
    least ``min_magnitude`` in size.
    """
    names = list(coefficients)
    ranked = rank_features(names, [coefficients[n] for n in names])
    per_protected, flags = {}, []
    for attr in protected:
        entries = []
        for f in ranked:
            a, sep, value = f.feature.partition("=")
            if sep and a == attr:
                sign = "+" if f.coefficient > 0 else "-" if f.coefficient < 0 else "0"
                entries.append({"feature": f.feature, "value": value, "coefficient": f.coefficient, "sign": sign, "rank": f.rank})
                if f.coefficient < 0 and abs(f.coefficient) >= min_magnitude:
                    flags.append(
                        {
                            "attribute": attr,
                            "value": value,
                            "coefficient": f.coefficient,
                            "rank": f.rank,
                            "message": f"{attr}={value} will probably receive a negative outcome",
                        }
                    )
        per_protected[attr] = entries
    return ImportanceReport(ranked, per_protected, flags)


def importance(model: LogisticModel, profile) -> ImportanceReport:
    coefs = dict(zip(model.feature_names, (float(c) for c in model.coefficients)))
    return importance_from_coefficients(coefs, profile.protected_attributes, profile.thresholds.importance_min)


def group_refits(ds: Dataset, outcome: str, features, groups, favorable=1, **train_kwargs) -> dict:
    """Per-group models trained on the rows of each group (group attributes dropped).

    Groups that are too small or single-class map to ``None``.
    """
    out = {}
    for g in groups:
        mask = group_mask(ds, g)
        sub = ds.take(np.flatnonzero(mask))
        feats = [f for f in features if f not in g.attributes]
        try:
            out[g] = train_logistic(encode(sub, outcome, feats, favorable), **train_kwargs)
        except (SingleClassTarget, NoCompleteRows):
            out[g] = None
    return out
