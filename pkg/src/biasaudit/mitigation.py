"""Pre-processing mitigations: reweighing, coverage repair, imputation, resampling splits."""

from __future__ import annotations

import enum
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import MISSING, ColumnType, Dataset, GroupKey
from .errors import (
    AllMissingAttribute,
    DatasetTooSmall,
    EmptyCell,
    InsufficientDonors,
    InvalidImputation,
    InvalidK,
    StratumTooSmallWarning,
)
from .selection import SplitSpec

DEFAULT_WEIGHT_COLUMN = "sample_weight"


# -- reweighing ---------------------------------------------------------------


@dataclass
class WeightVector:
    weights: np.ndarray
    cell_weights: dict  # (group value, label) -> weight
    flagged_rows: list  # rows left at weight 1 because of a gap
    protected: str
    outcome: str

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def as_dict(self) -> dict:
        return {
            "protected": self.protected,
            "outcome": self.outcome,
            "cell_weights": [
                {"group": g, "label": y, "weight": w} for (g, y), w in sorted(self.cell_weights.items())
            ],
            "flagged_rows": list(self.flagged_rows),
            "total": self.total,
        }


def reweigh(ds: Dataset, protected: str, outcome: str) -> WeightVector:
    """Kamiran-Calders style weights making group and label independent.

    Each (group, label) cell gets ``n(g) * n(y) / (n * n(g, y))``, counted
    over rows observed on both attributes.  Rows with a gap keep weight 1 and
    are listed in ``flagged_rows``.
    """
    g_col, y_col = ds.column(protected), ds.column(outcome)
    ok = g_col.observed & y_col.observed
    rows = np.flatnonzero(ok)
    pairs = [(g_col.values[i], y_col.values[i]) for i in rows]
    n = len(pairs)
    if n == 0:
        raise EmptyCell(f"no rows observed on both {protected!r} and {outcome!r}")
    n_g = Counter(g for g, _ in pairs)
    n_y = Counter(y for _, y in pairs)
    n_gy = Counter(pairs)
    cell = {}
    for g in sorted(n_g, key=str):
        for y in sorted(n_y):
            if n_gy[(g, y)] == 0:
                raise EmptyCell(f"no rows with {protected}={g} and {outcome}={y}; weight undefined")
            cell[(g, y)] = (n_g[g] * n_y[y]) / (n * n_gy[(g, y)])
    weights = np.ones(ds.n_rows)
    for i, p in zip(rows, pairs):
        weights[i] = cell[p]
    flagged = [int(i) for i in np.flatnonzero(~ok)]
    return WeightVector(weights, cell, flagged, protected, outcome)


def apply_weights(ds: Dataset, wv: WeightVector, column: str = DEFAULT_WEIGHT_COLUMN) -> Dataset:
    return ds.with_column(column, ColumnType.NUMERIC, [float(w) for w in wv.weights])


# -- coverage repair -----------------------------------------------------------


@dataclass(frozen=True)
class RepairItem:
    group: GroupKey
    rows_to_add: int


@dataclass
class RepairOrder:
    items: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(i.rows_to_add for i in self.items)

    def as_dict(self) -> dict:
        return {
            "total_rows_to_add": self.total,
            "items": [{"group": i.group.as_dict(), "rows_to_add": i.rows_to_add} for i in self.items],
        }


def repair_order(findings) -> RepairOrder:
    """The minimal additions that lift every uncovered combination to ``tau`` rows."""
    items = [RepairItem(f.group, f.deficit) for f in findings if f.deficit > 0]
    return RepairOrder(items)


def materialize_repair(ds: Dataset, order: RepairOrder) -> Dataset:
    """Append placeholder rows for an order; non-group cells are Missing.

    For testing closure only: audited datasets are never padded implicitly.
    """
    rows = []
    for item in order.items:
        rows += [item.group.as_dict()] * item.rows_to_add
    return ds.append_rows(rows)


# -- imputation ------------------------------------------------------------------


class Strategy(enum.Enum):
    DELETION = "deletion"
    MEAN = "mean"
    MEDIAN = "median"
    MODE = "mode"
    MODEL_BASED = "model_based"


@dataclass(frozen=True)
class ImputationSpec:
    strategy: Strategy
    scope: tuple
    k: int = 5

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "scope", tuple(self.scope))
        if self.k < 1:
            raise InvalidImputation("k must be >= 1")


@dataclass(frozen=True)
class Change:
    row: int
    attribute: str | None
    action: str  # "filled" or "removed"
    value: object = None

    def as_dict(self) -> dict:
        value = self.value if self.value is None or isinstance(self.value, (int, float, str)) else str(self.value)
        return {"row": self.row, "attribute": self.attribute, "action": self.action, "value": value}


def _mode(values):
    counts = Counter(values)
    best = max(counts.values())
    # first value in row order among the most frequent
    return next(v for v in values if counts[v] == best)


def _fill_value(strategy, kind, observed, attr):
    if strategy in (Strategy.MEAN, Strategy.MEDIAN):
        if kind is not ColumnType.NUMERIC:
            raise InvalidImputation(f"{strategy.value} imputation needs a numeric attribute; {attr!r} is {kind.value}")
        arr = np.asarray(observed, dtype=float)
        return float(arr.mean() if strategy is Strategy.MEAN else np.median(arr))
    if kind is ColumnType.NUMERIC:
        raise InvalidImputation(f"mode imputation needs a categorical attribute; {attr!r} is numeric")
    return _mode(observed)


def _single(ds: Dataset, spec: ImputationSpec):
    changes = []
    out = ds
    for attr in spec.scope:
        col = ds.column(attr)
        observed = [v for v in col.values if v is not MISSING]
        if col.n_missing == 0:
            if observed:
                _fill_value(spec.strategy, col.kind, observed, attr)  # kind check only
            continue
        if not observed:
            raise AllMissingAttribute(f"attribute {attr!r} has no observed value to impute from")
        fill = _fill_value(spec.strategy, col.kind, observed, attr)
        values = list(col.values)
        for i, v in enumerate(values):
            if v is MISSING:
                values[i] = fill
                changes.append(Change(i, attr, "filled", fill))
        out = out.with_column(attr, col.kind, values)
    return out, changes


def _deletion(ds: Dataset, spec: ImputationSpec):
    keep = np.ones(ds.n_rows, dtype=bool)
    for attr in spec.scope:
        keep &= ds.column(attr).observed
    removed = [Change(int(i), None, "removed") for i in np.flatnonzero(~keep)]
    if not removed:
        return ds, []
    return ds.take(np.flatnonzero(keep)), removed


def _distance_parts(ds: Dataset, donors):
    # per attribute: (kind, values, scale) with numeric scale = donor range
    parts = []
    for col in ds.columns:
        if col.kind is ColumnType.NUMERIC:
            vals = col.array[donors]
            vals = vals[~np.isnan(vals)]
            rng = float(vals.max() - vals.min()) if vals.size else 0.0
            parts.append((col, rng if rng > 0 else 1.0))
        else:
            parts.append((col, None))
    return parts


def _model_based(ds: Dataset, spec: ImputationSpec):
    scope = list(spec.scope)
    complete = np.ones(ds.n_rows, dtype=bool)
    for attr in scope:
        complete &= ds.column(attr).observed
    donors = np.flatnonzero(complete)
    recipients = np.flatnonzero(~complete)
    if recipients.size == 0:
        return ds, []
    for attr in scope:
        if not ds.column(attr).observed.any():
            raise AllMissingAttribute(f"attribute {attr!r} has no observed value to impute from")
    if donors.size < spec.k:
        raise InsufficientDonors(f"{donors.size} complete rows, k={spec.k} donors required")
    parts = _distance_parts(ds, donors)
    filled = {attr: list(ds.values(attr)) for attr in scope}
    changes = []
    for r in recipients:
        dist = np.zeros(donors.size)
        compared = np.zeros(donors.size)
        for col, scale in parts:
            if not col.observed[r]:
                continue
            d_obs = col.observed[donors]
            if scale is None:
                diff = np.asarray(col.array[donors] != col.array[r], dtype=float)
            else:
                diff = np.abs(col.array[donors] - col.array[r]) / scale
            dist += np.where(d_obs, np.nan_to_num(diff), 0.0)
            compared += d_obs
        dist = np.where(compared > 0, dist / np.maximum(compared, 1), np.inf)
        nearest = donors[np.argsort(dist, kind="stable")[: spec.k]]
        for attr in scope:
            col = ds.column(attr)
            if col.observed[r]:
                continue
            neigh = [col.values[d] for d in nearest]
            if col.kind is ColumnType.NUMERIC:
                value = float(np.mean(neigh))
            else:
                value = _mode(neigh)
            filled[attr][r] = value
            changes.append(Change(int(r), attr, "filled", value))
    out = ds
    for attr in scope:
        out = out.with_column(attr, ds.kind(attr), filled[attr])
    changes.sort(key=lambda c: (scope.index(c.attribute), c.row))
    return out, changes


def impute(ds: Dataset, spec: ImputationSpec):
    """Fill or drop missing cells of ``spec.scope``; returns ``(dataset, changes)``.

    Model-based filling uses the ``k`` nearest rows complete on the scope
    (Hamming distance on categorical attributes, range-scaled absolute
    difference on numeric ones, averaged over attributes observed in both
    rows; ties go to the lower row index), taking their majority value or
    mean.
    """
    for attr in spec.scope:
        ds.column(attr)
    if spec.strategy is Strategy.DELETION:
        return _deletion(ds, spec)
    if spec.strategy is Strategy.MODEL_BASED:
        return _model_based(ds, spec)
    return _single(ds, spec)


# -- resampling ----------------------------------------------------------------


def _n_rows(ds_or_n) -> int:
    return ds_or_n if isinstance(ds_or_n, int) else ds_or_n.n_rows


def kfold(ds, K: int, repeats: int = 1, stratify_on: str | None = None, seed: int = 0) -> list[SplitSpec]:
    """K-fold (optionally stratified, optionally repeated) splits.

    Repeat ``r`` shuffles with seed ``seed + r``.  Rows are dealt to folds
    round-robin, stratum after stratum, so fold sizes differ by at most one
    and every stratum's per-fold counts differ by at most one.  ``K`` equal
    to the row count gives leave-one-out.
    """
    n = _n_rows(ds)
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or not 2 <= K <= n:
        raise InvalidK(f"K must satisfy 2 <= K <= {n}, got {K!r}")
    if repeats < 1:
        raise InvalidK("repeats must be >= 1")
    strata = None
    if stratify_on is not None:
        values = ds.values(stratify_on)
        strata = {}
        for i, v in enumerate(values):
            strata.setdefault(v, []).append(i)
        small = sorted(str(v) for v, rows in strata.items() if len(rows) < K)
        if small:
            warnings.warn(
                f"strata {small} of {stratify_on!r} have fewer than K={K} rows; they cannot reach every fold",
                StratumTooSmallWarning,
                stacklevel=2,
            )
    splits = []
    for r in range(repeats):
        rng = np.random.default_rng(seed + r)
        if strata is None:
            order = list(rng.permutation(n))
        else:
            order = []
            keys = sorted((v for v in strata if v is not MISSING), key=str)
            if MISSING in strata:
                keys.append(MISSING)
            for v in keys:
                rows = np.asarray(strata[v])
                order += list(rows[rng.permutation(rows.size)])
        folds = [[] for _ in range(K)]
        for pos, row in enumerate(order):
            folds[pos % K].append(int(row))
        for f in range(K):
            test = sorted(folds[f])
            test_set = set(test)
            train = [i for i in range(n) if i not in test_set]
            splits.append(SplitSpec(train, test))
    return splits


def holdout(ds, seed: int = 0) -> SplitSpec:
    """Shuffled two-thirds / one-third split (train gets the ceiling)."""
    n = _n_rows(ds)
    if n < 3:
        raise DatasetTooSmall(f"holdout needs at least 3 rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil(2 * n / 3)
    return SplitSpec(sorted(int(i) for i in perm[:n_train]), sorted(int(i) for i in perm[n_train:]))
