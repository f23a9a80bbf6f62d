"""Missing-data measurement: completeness at table, attribute, tuple and group level."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import Dataset, GroupKey, group_mask
from .errors import EmptyDataset, InsufficientGroups

DEFAULT_DISPARITY_THRESHOLD = 0.10


@dataclass
class CompletenessReport:
    table_completeness: float
    per_attribute: dict
    per_tuple: list
    per_group_attribute: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "table_completeness": self.table_completeness,
            "per_attribute": dict(self.per_attribute),
            "per_group_attribute": [
                {"group": str(g), "attribute": a, "ratio": r} for (g, a), r in sorted(self.per_group_attribute.items())
            ],
            "incomplete_tuples": sum(1 for r in self.per_tuple if r < 1.0),
        }


def completeness(ds: Dataset) -> CompletenessReport:
    """Ratio of non-missing cells over all cells per table, per column and per row."""
    if ds.n_rows == 0 or not ds.columns:
        raise EmptyDataset("completeness needs at least one row and one column")
    observed = np.column_stack([c.observed for c in ds.columns])
    n_rows, n_cols = observed.shape
    per_attribute = {c.name: int(observed[:, j].sum()) / n_rows for j, c in enumerate(ds.columns)}
    row_counts = observed.sum(axis=1)
    per_tuple = [int(k) / n_cols for k in row_counts]
    table = int(row_counts.sum()) / (n_rows * n_cols)
    return CompletenessReport(table, per_attribute, per_tuple)


def group_completeness(ds: Dataset, groups, attribute: str, exact: bool = False) -> dict:
    """Completeness of ``attribute`` over the rows of each group.

    Groups that match no rows map to ``None`` (undefined), not 0.  With
    ``exact=True`` ratios are returned as :class:`~fractions.Fraction`.
    """
    observed = ds.column(attribute).observed
    out = {}
    for g in groups:
        g.validate(ds)
        mask = group_mask(ds, g)
        n = int(mask.sum())
        if n == 0:
            out[g] = None
        else:
            k = int(observed[mask].sum())
            out[g] = Fraction(k, n) if exact else k / n
    return out


@dataclass(frozen=True)
class Disparity:
    gap: float
    flagged: bool
    lowest: object
    highest: object
    threshold: float


def missingness_disparity(ratios: dict, threshold: float = DEFAULT_DISPARITY_THRESHOLD) -> Disparity:
    """Spread between the best- and worst-observed groups; flagged above ``threshold``.

    Float ratios are read through their shortest decimal repr and Fractions
    are used as is, so the table value 1.00 - 0.70 gives exactly 0.3.
    """
    defined = {k: v if isinstance(v, Fraction) else Fraction(repr(float(v))) for k, v in ratios.items() if v is not None}
    if len(defined) < 2:
        raise InsufficientGroups("need at least two groups with defined completeness")
    lo = min(defined, key=lambda k: (defined[k], str(k)))
    hi = max(defined, key=lambda k: (defined[k], str(k)))
    gap = defined[hi] - defined[lo]
    return Disparity(float(gap), gap > threshold, lo, hi, threshold)


def protected_group_completeness(ds: Dataset, protected, attributes=None, exact: bool = False) -> dict:
    """``{(GroupKey, attribute): ratio}`` for every value of every protected attribute.

    A group's own attribute is skipped (trivially complete on matching rows).
    """
    groups = []
    for attr in protected:
        groups += [GroupKey(((attr, v),)) for v in ds.require_categorical(attr).observed_values()]
    attributes = ds.attributes if attributes is None else list(attributes)
    out = {}
    for attribute in attributes:
        ratios = group_completeness(ds, [g for g in groups if attribute not in g.attributes], attribute, exact)
        for g, r in ratios.items():
            out[(g, attribute)] = r
    return out
