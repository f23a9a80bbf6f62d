"""Minority-bias measurements: value density, combination coverage, group fairness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import MISSING, ColumnType, Dataset, GroupKey, _value_space, group_counts, group_mask
from .errors import EmptyColumn, EmptyGroup, MissingPredictionColumn, SpaceTooLarge, UnknownAttribute

DEFAULT_SPACE_CAP = 10**6


@dataclass(frozen=True)
class DensityEntry:
    attribute: str
    value: str
    count: int
    fraction: float


def density(ds: Dataset, attribute: str) -> list[DensityEntry]:
    """Fraction of each observed value among the non-missing cells of ``attribute``."""
    col = ds.require_categorical(attribute)
    counts = {}
    for v in col.values:
        if v is not MISSING:
            counts[v] = counts.get(v, 0) + 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyColumn(f"attribute {attribute!r} has no observed values")
    return [DensityEntry(attribute, v, counts[v], counts[v] / total) for v in sorted(counts)]


@dataclass(frozen=True)
class CoverageFinding:
    group: GroupKey
    count: int
    deficit: int

    @property
    def covered(self) -> bool:
        return self.deficit == 0


def coverage(ds: Dataset, attributes, tau: int, value_extensions=None, full=False, cap=DEFAULT_SPACE_CAP):
    """Combinations of ``attributes`` values with fewer than ``tau`` rows.

    The space is the Cartesian product of observed values, optionally extended
    per attribute by ``value_extensions``.  Findings are ordered by deficit
    (largest first), then by group key.  With ``full=True`` covered
    combinations are listed too, with deficit 0.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    attributes = list(attributes)
    space = _value_space(ds, attributes, value_extensions)
    size = math.prod(len(s) for s in space)
    if size > cap:
        raise SpaceTooLarge(f"combination space of {size} exceeds the cap of {cap}")
    counts = group_counts(ds, attributes)
    findings = []
    for combo in itertools.product(*space):
        n = counts.get(combo, 0)
        deficit = max(0, tau - n)
        if deficit or full:
            findings.append(CoverageFinding(GroupKey(tuple(zip(attributes, combo))), n, deficit))
    findings.sort(key=lambda f: (-f.deficit, f.group))
    return findings


@dataclass(frozen=True)
class GroupRates:
    group: GroupKey
    n: int
    favorable_rate: float
    tpr: float | None
    fpr: float | None
    accuracy: float


@dataclass(frozen=True)
class FairnessEntry:
    group: GroupKey
    privileged: GroupKey
    statistical_parity_difference: float
    disparate_impact: float | None
    equal_opportunity_difference: float | None
    average_odds_difference: float | None
    accuracy_difference: float

    def as_dict(self) -> dict:
        return {
            "group": str(self.group),
            "privileged": str(self.privileged),
            "statistical_parity_difference": self.statistical_parity_difference,
            "disparate_impact": self.disparate_impact,
            "equal_opportunity_difference": self.equal_opportunity_difference,
            "average_odds_difference": self.average_odds_difference,
            "accuracy_difference": self.accuracy_difference,
        }


@dataclass
class FairnessReport:
    entries: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    excluded_rows: int = 0

    def entry(self, group: GroupKey) -> FairnessEntry:
        for e in self.entries:
            if e.group == group:
                return e
        raise KeyError(group)


def _ratio(num, den):
    return None if den == 0 else num / den


def _diff(a, b):
    return None if a is None or b is None else a - b


def group_rates(ds: Dataset, group: GroupKey, prediction: str, outcome: str, favorable: int = 1, usable=None):
    """Favorable-prediction rate, TPR, FPR and accuracy of ``group``.

    The favorable label is the positive class.  ``usable`` restricts rows
    (used to drop rows with gaps in prediction/outcome/group columns).
    """
    mask = group_mask(ds, group)
    if usable is not None:
        mask &= usable
    pred = ds.column(prediction).array[mask] == favorable
    true = ds.column(outcome).array[mask] == favorable
    n = int(mask.sum())
    if n == 0:
        raise EmptyGroup(f"group {group} has no usable rows")
    pos = int(true.sum())
    neg = n - pos
    tp = int((pred & true).sum())
    fp = int((pred & ~true).sum())
    correct = int((pred == true).sum())
    return GroupRates(group, n, int(pred.sum()) / n, _ratio(tp, pos), _ratio(fp, neg), correct / n)


def compare_rates(g: GroupRates, p: GroupRates) -> FairnessEntry:
    di = None if p.favorable_rate == 0 else g.favorable_rate / p.favorable_rate
    eod = _diff(g.tpr, p.tpr)
    fpr_d = _diff(g.fpr, p.fpr)
    aod = None if eod is None or fpr_d is None else 0.5 * (fpr_d + eod)
    return FairnessEntry(
        group=g.group,
        privileged=p.group,
        statistical_parity_difference=g.favorable_rate - p.favorable_rate,
        disparate_impact=di,
        equal_opportunity_difference=eod,
        average_odds_difference=aod,
        accuracy_difference=g.accuracy - p.accuracy,
    )


def fairness_between(ds: Dataset, privileged: GroupKey, unprivileged, prediction: str, outcome: str, favorable=1):
    """Five group-fairness metrics of each unprivileged group against ``privileged``.

    Rows with a gap in the prediction, the outcome, or any group attribute are
    excluded and counted in ``excluded_rows``.
    """
    for col in (prediction, outcome):
        if col not in ds:
            raise MissingPredictionColumn(f"column {col!r} not in dataset")
    unprivileged = list(unprivileged)
    attrs = sorted({a for g in [privileged, *unprivileged] for a in g.attributes})
    usable = ds.column(prediction).observed & ds.column(outcome).observed
    for a in attrs:
        usable = usable & ds.require_categorical(a).observed
    p = group_rates(ds, privileged, prediction, outcome, favorable, usable)
    report = FairnessReport(rates={str(privileged): p}, excluded_rows=int(ds.n_rows - usable.sum()))
    for g in unprivileged:
        r = group_rates(ds, g, prediction, outcome, favorable, usable)
        report.rates[str(g)] = r
        report.entries.append(compare_rates(r, p))
    return report


def fairness(ds: Dataset, profile) -> dict:
    """Prediction fairness per protected attribute declared in ``profile``.

    Returns ``{attribute: FairnessReport}``.
    """
    if not profile.prediction_column or not profile.outcome_column:
        raise MissingPredictionColumn("profile declares no prediction_column/outcome_column")
    out = {}
    for attr in profile.protected_attributes:
        out[attr] = fairness_between(
            ds,
            profile.privileged_key(ds, attr),
            profile.unprivileged_keys(ds, attr),
            profile.prediction_column,
            profile.outcome_column,
            profile.favorable_label,
        )
    return out


@dataclass(frozen=True)
class ParityEntry:
    group: GroupKey
    privileged: GroupKey
    rate: float
    privileged_rate: float
    statistical_parity_difference: float
    disparate_impact: float | None

    def as_dict(self) -> dict:
        return {
            "group": str(self.group),
            "privileged": str(self.privileged),
            "rate": self.rate,
            "privileged_rate": self.privileged_rate,
            "statistical_parity_difference": self.statistical_parity_difference,
            "disparate_impact": self.disparate_impact,
        }


def weighted_favorable_rate(ds: Dataset, group: GroupKey, outcome: str, favorable=1, weights=None) -> float:
    mask = group_mask(ds, group) & ds.column(outcome).observed
    if not mask.any():
        raise EmptyGroup(f"group {group} has no rows with an observed outcome")
    w = np.ones(ds.n_rows) if weights is None else np.asarray(weights, dtype=float)
    fav = ds.column(outcome).array == favorable
    total = w[mask].sum()
    if total == 0:
        raise EmptyGroup(f"group {group} has zero total weight")
    return float(w[mask & fav].sum() / total)


def outcome_parity(ds: Dataset, privileged: GroupKey, unprivileged, outcome: str, favorable=1, weights=None):
    """Statistical parity of the recorded outcome (not predictions), optionally weighted.

    This is the quantity reweighing equalizes; it needs no classifier.
    """
    if outcome not in ds:
        raise UnknownAttribute(f"outcome column {outcome!r} not in dataset")
    if ds.kind(outcome) is not ColumnType.BINARY_LABEL:
        raise ValueError(f"outcome column {outcome!r} must be binary_label")
    rp = weighted_favorable_rate(ds, privileged, outcome, favorable, weights)
    out = []
    for g in unprivileged:
        rg = weighted_favorable_rate(ds, g, outcome, favorable, weights)
        out.append(ParityEntry(g, privileged, rg, rp, rg - rp, None if rp == 0 else rg / rp))
    return out
