"""Selection-bias measurement: split exploration and two-sample tests."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaincc

from .dataset import ColumnType, Dataset
from .errors import DegenerateSupport, InvalidSplit, NonFiniteValue, SampleTooSmall

KS_MIN_SAMPLE = 5
SERIES_EPS = 1e-12
OTHER = "__other__"


class StatTest(enum.Enum):
    KS2 = "KolmogorovSmirnov2Sample"
    CHI2 = "ChiSquareHomogeneity"


class Decision(enum.Enum):
    REJECT = "RejectH0"
    FAIL_TO_REJECT = "FailToRejectH0"


@dataclass(frozen=True)
class StatTestResult:
    test_name: StatTest
    statistic: float
    p_value: float
    alpha: float
    decision: Decision
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def decide(cls, test_name, statistic, p_value, alpha, **details):
        decision = Decision.REJECT if p_value <= alpha else Decision.FAIL_TO_REJECT
        return cls(test_name, float(statistic), float(p_value), float(alpha), decision, details)

    @property
    def rejected(self) -> bool:
        return self.decision is Decision.REJECT

    def as_dict(self) -> dict:
        return {
            "test": self.test_name.value,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "decision": self.decision.value,
            **self.details,
        }


# -- Kolmogorov-Smirnov -------------------------------------------------------


def kolmogorov_sf(lam: float) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # Jacobi-transformed series converges fast for small arguments.
        c = math.pi**2 / (8.0 * lam * lam)
        total, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * c)
            total += term
            if term < SERIES_EPS:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total, k, sign = 0.0, 1, 1.0
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < SERIES_EPS:
            break
        sign, k = -sign, k + 1
    return min(1.0, max(0.0, 2.0 * total))


def _numeric_sample(x, label):
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"sample {label} contains non-finite values")
    if arr.size < KS_MIN_SAMPLE:
        raise SampleTooSmall(f"sample {label} has {arr.size} values; at least {KS_MIN_SAMPLE} required")
    return np.sort(arr)


def ks_statistic(a, b) -> float:
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b, alpha: float = 0.05) -> StatTestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    Both ECDFs are evaluated at every pooled point, so ties are handled.
    """
    a = _numeric_sample(a, "a")
    b = _numeric_sample(b, "b")
    d = ks_statistic(a, b)
    ne = a.size * b.size / (a.size + b.size)
    p = kolmogorov_sf(math.sqrt(ne) * d)
    return StatTestResult.decide(StatTest.KS2, d, p, alpha, n_a=int(a.size), n_b=int(b.size))


def ecdf_table(a, b) -> list[tuple[float, float, float]]:
    """``(value, ecdf_a, ecdf_b)`` at each distinct pooled value."""
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    xs = np.unique(np.concatenate([a, b]))
    fa = np.searchsorted(a, xs, side="right") / max(a.size, 1)
    fb = np.searchsorted(b, xs, side="right") / max(b.size, 1)
    return [(float(x), float(p), float(q)) for x, p, q in zip(xs, fa, fb)]


# -- chi-square homogeneity --------------------------------------------------


def _chi2_statistic(ca: dict, cb: dict, cats) -> Fraction:
    na, nb = sum(ca.values()), sum(cb.values())
    n = na + nb
    stat = Fraction(0)
    for c in cats:
        col = ca.get(c, 0) + cb.get(c, 0)
        for row_n, obs in ((na, ca.get(c, 0)), (nb, cb.get(c, 0))):
            stat += Fraction((n * obs - row_n * col) ** 2, n * row_n * col)
    return stat


def chi_square_homogeneity(a, b, alpha: float = 0.05) -> StatTestResult:
    """Chi-square test that two categorical samples share one distribution.

    Categories whose smaller expected cell count is below 1 are pooled into
    ``"__other__"``; the merged categories are listed in the result details.
    """
    ca, cb = Counter(a), Counter(b)
    na, nb = sum(ca.values()), sum(cb.values())
    if na == 0 or nb == 0:
        raise DegenerateSupport("both samples must be non-empty")
    cats = sorted(set(ca) | set(cb), key=str)
    if len(cats) < 2:
        raise DegenerateSupport(f"pooled support {cats} has fewer than two categories")
    n = na + nb

    def min_expected(c):
        return min(na, nb) * (ca.get(c, 0) + cb.get(c, 0)) / n

    merged = [c for c in cats if min_expected(c) < 1.0]
    if merged:
        for c in merged:
            ca[OTHER] += ca.pop(c, 0)
            cb[OTHER] += cb.pop(c, 0)
        cats = [c for c in cats if c not in merged] + [OTHER]
        if min_expected(OTHER) < 1.0 and len(cats) > 1:
            target = min(cats[:-1], key=lambda c: (ca.get(c, 0) + cb.get(c, 0), str(c)))
            ca[target] += ca.pop(OTHER)
            cb[target] += cb.pop(OTHER)
            merged.append(target)
            cats = cats[:-1]
    if len(cats) < 2:
        raise DegenerateSupport("fewer than two categories remain after pooling sparse ones")
    stat = float(_chi2_statistic(ca, cb, cats))
    dof = len(cats) - 1
    p = float(gammaincc(dof / 2.0, stat / 2.0)) if stat > 0 else 1.0
    return StatTestResult.decide(
        StatTest.CHI2, stat, min(1.0, max(0.0, p)), alpha, dof=dof, merged=[str(c) for c in merged]
    )


# -- splits -----------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train: tuple
    test: tuple
    validation: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(int(i) for i in self.train))
        object.__setattr__(self, "test", tuple(int(i) for i in self.test))
        if self.validation is not None:
            object.__setattr__(self, "validation", tuple(int(i) for i in self.validation))

    def parts(self) -> dict:
        out = {"train": self.train, "test": self.test}
        if self.validation is not None:
            out["validation"] = self.validation
        return out

    def validate(self, ds: Dataset) -> None:
        if not self.train or not self.test:
            raise InvalidSplit("train and test must be non-empty")
        seen = set()
        for name, rows in self.parts().items():
            s = set(rows)
            if len(s) != len(rows):
                raise InvalidSplit(f"{name} lists a row twice")
            if any(i < 0 or i >= ds.n_rows for i in s):
                raise InvalidSplit(f"{name} has row indices outside 0..{ds.n_rows - 1}")
            if s & seen:
                raise InvalidSplit("split parts overlap")
            seen |= s

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.parts().items()}

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitSpec":
        extra = set(doc) - {"train", "test", "validation", "repeat", "fold"}
        if extra:
            raise InvalidSplit(f"unknown split fields {sorted(extra)}")
        try:
            return cls(doc["train"], doc["test"], doc.get("validation"))
        except KeyError as exc:
            raise InvalidSplit(f"split lacks {exc.args[0]!r}") from None


def _summary(ds: Dataset, attribute: str, rows) -> dict:
    col = ds.column(attribute)
    if col.kind is ColumnType.NUMERIC:
        x = col.array[list(rows)]
        x = x[~np.isnan(x)]
        if x.size == 0:
            return {"kind": "numeric", "count": 0}
        q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        return {
            "kind": "numeric",
            "count": int(x.size),
            "mean": float(x.mean()),
            "variance": float(x.var(ddof=1)) if x.size > 1 else None,
            "min": float(x.min()),
            "max": float(x.max()),
            "quartiles": [float(q1), float(q2), float(q3)],
        }
    counts = Counter(str(col.values[i]) for i in rows if col.observed[i])
    return {"kind": col.kind.value, "count": sum(counts.values()), "frequencies": dict(sorted(counts.items()))}


def pearson(x: np.ndarray, y: np.ndarray):
    """Pearson correlation over pairs where both are observed; None if undefined."""
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    if x.size < 2:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = float(dx @ dx), float(dy @ dy)
    if sx == 0 or sy == 0:
        return None
    return float(np.clip((dx @ dy) / math.sqrt(sx * sy), -1.0, 1.0))


@dataclass
class ExplorationSummary:
    attributes: dict  # split -> attribute -> summary
    correlations: dict  # split -> "a|b" -> r or None

    def as_dict(self) -> dict:
        return {"attributes": self.attributes, "correlations": self.correlations}


def explore(ds: Dataset, split: SplitSpec) -> ExplorationSummary:
    """Per-split summaries of every attribute plus numeric correlations."""
    split.validate(ds)
    numeric = ds.attributes_of_kind(ColumnType.NUMERIC)
    attrs, corrs = {}, {}
    for name, rows in split.parts().items():
        rows = list(rows)
        attrs[name] = {a: _summary(ds, a, rows) for a in ds.attributes}
        corrs[name] = {}
        for i, a in enumerate(numeric):
            for b in numeric[i + 1 :]:
                corrs[name][f"{a}|{b}"] = pearson(ds.column(a).array[rows], ds.column(b).array[rows])
    return ExplorationSummary(attrs, corrs)


def attribute_sample(ds: Dataset, attribute: str, rows):
    col = ds.column(attribute)
    obs = col.observed
    return [col.values[i] for i in rows if obs[i]]


def compare_attribute(ds: Dataset, attribute: str, rows_a, rows_b, alpha: float = 0.05) -> StatTestResult:
    a = attribute_sample(ds, attribute, rows_a)
    b = attribute_sample(ds, attribute, rows_b)
    if ds.kind(attribute) is ColumnType.NUMERIC:
        return ks_two_sample(a, b, alpha)
    return chi_square_homogeneity([str(v) for v in a], [str(v) for v in b], alpha)


@dataclass
class SplitComparison:
    results: list  # dicts: pair, attribute, protected, result
    flagged: bool
    family_size: int

    def as_dict(self) -> dict:
        return {
            "flagged": self.flagged,
            "family_size": self.family_size,
            "correction": "none",
            "tests": [
                {"pair": r["pair"], "attribute": r["attribute"], "protected": r["protected"], **r["result"].as_dict()}
                for r in self.results
            ],
        }


def compare_splits(ds: Dataset, split: SplitSpec, profile=None, attributes=None, alpha=None) -> SplitComparison:
    """Compare train against test (and validation) attribute by attribute.

    Numeric attributes use the KS test, others chi-square.  The comparison is
    flagged when a protected attribute rejects H0.  No multiple-testing
    correction is applied; ``family_size`` states how many tests were run.
    """
    split.validate(ds)
    if alpha is None:
        alpha = profile.alpha if profile is not None else 0.05
    protected = set(profile.protected_attributes) if profile is not None else set()
    if attributes is None:
        if profile is not None and profile.selection_attributes is not None:
            attributes = list(profile.selection_attributes)
        else:
            skip = set()
            if profile is not None:
                skip = {profile.prediction_column, profile.weight_column}
            attributes = [a for a in ds.attributes if a not in skip]
    pairs = [("train", "test")]
    if split.validation is not None:
        pairs.append(("train", "validation"))
    parts = split.parts()
    results = []
    for left, right in pairs:
        for attr in attributes:
            res = compare_attribute(ds, attr, parts[left], parts[right], alpha)
            results.append({"pair": f"{left}/{right}", "attribute": attr, "protected": attr in protected, "result": res})
    flagged = any(r["protected"] and r["result"].rejected for r in results)
    return SplitComparison(results, flagged, len(results))
