"""The researcher's declarative answers to the identification questions.

An :class:`AuditProfile` is loaded from a JSON document with a fixed set of
field names; unknown fields are rejected so typos never silently fall back
to defaults.  Example::

    {
      "schema": [{"name": "sex", "type": "categorical"},
                 {"name": "bp", "type": "numeric"},
                 {"name": "treated", "type": "binary_label"}],
      "protected_attributes": ["sex"],
      "privileged_group": {"sex": "M"},
      "outcome_column": "treated",
      "favorable_label": 1,
      "tau": 10,
      "alpha": 0.05,
      "relevance_flags": {"selection": false}
    }
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .dataset import DEFAULT_MISSING_TOKENS, ColumnType, Dataset, GroupKey
from .errors import ProfileError, ProfileMismatch

BIAS_TYPES = ("minority", "missing_data", "informativeness", "selection")


class Mechanism(enum.Enum):
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class MissingnessDeclaration:
    mechanism: Mechanism = Mechanism.UNKNOWN
    rationale: str = ""


@dataclass(frozen=True)
class Thresholds:
    density_warning: float = 0.10
    density_critical: float = 0.01
    spd: float = 0.1
    disparate_impact: float = 0.8
    missingness_disparity: float = 0.10
    # minimum |coefficient| (log-odds units) for a negative protected coefficient to be flagged
    importance_min: float = 0.25


@dataclass(frozen=True)
class AuditProfile:
    schema: tuple
    protected_attributes: tuple = ()
    privileged_group: dict = field(default_factory=dict)
    unprivileged_groups: dict = field(default_factory=dict)
    outcome_column: str | None = None
    favorable_label: int = 1
    prediction_column: str | None = None
    weight_column: str | None = None
    tau: int = 10
    alpha: float = 0.05
    relevance_flags: dict = field(default_factory=lambda: {b: True for b in BIAS_TYPES})
    thresholds: Thresholds = field(default_factory=Thresholds)
    value_extensions: dict = field(default_factory=dict)
    missingness: dict = field(default_factory=dict)
    features: tuple | None = None
    selection_attributes: tuple | None = None
    coverage_attributes: tuple | None = None
    l2_lambda: float = 1e-4
    missing_tokens: tuple = tuple(sorted(DEFAULT_MISSING_TOKENS))

    def __post_init__(self):
        schema = tuple((str(a), k if isinstance(k, ColumnType) else ColumnType.parse(k)) for a, k in self.schema)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "protected_attributes", tuple(self.protected_attributes))
        flags = {b: True for b in BIAS_TYPES}
        for key, value in dict(self.relevance_flags).items():
            if key not in flags:
                raise ProfileError(f"unknown relevance flag {key!r}; expected one of {BIAS_TYPES}")
            flags[key] = bool(value)
        object.__setattr__(self, "relevance_flags", flags)
        if isinstance(self.tau, bool) or int(self.tau) != self.tau or self.tau < 1:
            raise ProfileError(f"tau must be an integer >= 1, got {self.tau!r}")
        object.__setattr__(self, "tau", int(self.tau))
        if not 0.0 < float(self.alpha) < 1.0:
            raise ProfileError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.favorable_label not in (0, 1):
            raise ProfileError(f"favorable_label must be 0 or 1, got {self.favorable_label!r}")
        if self.l2_lambda < 0:
            raise ProfileError("l2_lambda must be non-negative")
        names = [a for a, _ in schema]
        if len(set(names)) != len(names):
            raise ProfileError("schema lists an attribute twice")
        kinds = dict(schema)
        refs = list(self.protected_attributes) + list(self.privileged_group) + list(self.unprivileged_groups)
        refs += [c for c in (self.outcome_column, self.prediction_column, self.weight_column) if c]
        refs += list(self.features or ()) + list(self.selection_attributes or ()) + list(self.coverage_attributes or ())
        refs += list(self.value_extensions) + list(self.missingness)
        for attr in refs:
            if attr not in kinds:
                raise ProfileError(f"profile refers to attribute {attr!r} absent from its schema")
        for attr in self.protected_attributes:
            if kinds[attr] is not ColumnType.CATEGORICAL:
                raise ProfileError(f"protected attribute {attr!r} must be categorical")
        for attr in self.privileged_group:
            if attr not in self.protected_attributes:
                raise ProfileError(f"privileged_group names non-protected attribute {attr!r}")
        for col in (self.outcome_column, self.prediction_column):
            if col and kinds[col] is not ColumnType.BINARY_LABEL:
                raise ProfileError(f"column {col!r} must be binary_label")
        if self.prediction_column and not self.outcome_column:
            raise ProfileError("fairness metrics need both prediction_column and outcome_column")
        if self.weight_column and kinds[self.weight_column] is not ColumnType.NUMERIC:
            raise ProfileError(f"weight column {self.weight_column!r} must be numeric")
        unpriv = {a: tuple(v) for a, v in self.unprivileged_groups.items()}
        object.__setattr__(self, "unprivileged_groups", unpriv)
        object.__setattr__(self, "value_extensions", {a: tuple(v) for a, v in self.value_extensions.items()})
        for name in ("features", "selection_attributes", "coverage_attributes"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))

    # -- JSON --------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "AuditProfile":
        if not isinstance(doc, dict):
            raise ProfileError("profile document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ProfileError(f"unknown profile fields: {unknown}")
        if "schema" not in doc:
            raise ProfileError("profile must declare a schema")
        kwargs = dict(doc)
        try:
            kwargs["schema"] = tuple((c["name"], c["type"]) for c in doc["schema"])
        except (TypeError, KeyError):
            raise ProfileError("schema must be a list of {name, type} objects") from None
        if "thresholds" in doc:
            tknown = {f.name for f in fields(Thresholds)}
            bad = sorted(set(doc["thresholds"]) - tknown)
            if bad:
                raise ProfileError(f"unknown threshold fields: {bad}")
            kwargs["thresholds"] = Thresholds(**doc["thresholds"])
        if "missingness" in doc:
            decl = {}
            for attr, entry in doc["missingness"].items():
                extra = set(entry) - {"mechanism", "rationale"}
                if extra:
                    raise ProfileError(f"unknown missingness fields for {attr!r}: {sorted(extra)}")
                try:
                    mech = Mechanism(entry.get("mechanism", "Unknown"))
                except ValueError:
                    raise ProfileError(f"unknown missingness mechanism {entry.get('mechanism')!r}") from None
                decl[attr] = MissingnessDeclaration(mech, entry.get("rationale", ""))
            kwargs["missingness"] = decl
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ProfileError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "AuditProfile":
        with Path(path).open(encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ProfileError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "schema": [{"name": a, "type": k.value} for a, k in self.schema],
            "protected_attributes": list(self.protected_attributes),
            "privileged_group": dict(self.privileged_group),
            "unprivileged_groups": {a: list(v) for a, v in self.unprivileged_groups.items()},
            "outcome_column": self.outcome_column,
            "favorable_label": self.favorable_label,
            "prediction_column": self.prediction_column,
            "weight_column": self.weight_column,
            "tau": self.tau,
            "alpha": self.alpha,
            "relevance_flags": dict(self.relevance_flags),
            "thresholds": {f.name: getattr(self.thresholds, f.name) for f in fields(Thresholds)},
            "value_extensions": {a: list(v) for a, v in self.value_extensions.items()},
            "missingness": {
                a: {"mechanism": d.mechanism.value, "rationale": d.rationale} for a, d in self.missingness.items()
            },
            "features": None if self.features is None else list(self.features),
            "selection_attributes": None if self.selection_attributes is None else list(self.selection_attributes),
            "coverage_attributes": None if self.coverage_attributes is None else list(self.coverage_attributes),
            "l2_lambda": self.l2_lambda,
            "missing_tokens": list(self.missing_tokens),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def with_changes(self, **changes) -> "AuditProfile":
        return replace(self, **changes)

    # -- dataset-facing helpers ---------------------------------------------

    def validate(self, ds: Dataset) -> None:
        """Raise :class:`ProfileMismatch` unless ``ds`` has the declared schema."""
        if [(a, k) for a, k in ds.schema if a in dict(self.schema)] != list(self.schema):
            raise ProfileMismatch(f"dataset schema {ds.schema} does not match profile schema {list(self.schema)}")

    def is_relevant(self, bias_type: str) -> bool:
        return self.relevance_flags[bias_type]

    def missingness_of(self, attribute: str) -> MissingnessDeclaration:
        return self.missingness.get(attribute, MissingnessDeclaration())

    def privileged_value(self, ds: Dataset, attribute: str) -> str:
        """Declared privileged value, else the most frequent observed value (ties: smallest)."""
        if attribute in self.privileged_group:
            return self.privileged_group[attribute]
        col = ds.require_categorical(attribute)
        counts = {}
        for v in col.values:
            if v is not None and isinstance(v, str):
                counts[v] = counts.get(v, 0) + 1
        if not counts:
            raise ProfileMismatch(f"protected attribute {attribute!r} has no observed values")
        return min(counts, key=lambda v: (-counts[v], v))

    def privileged_key(self, ds: Dataset, attribute: str) -> GroupKey:
        return GroupKey(((attribute, self.privileged_value(ds, attribute)),))

    def unprivileged_keys(self, ds: Dataset, attribute: str) -> list[GroupKey]:
        priv = self.privileged_value(ds, attribute)
        if attribute in self.unprivileged_groups:
            values = self.unprivileged_groups[attribute]
        else:
            values = [v for v in ds.require_categorical(attribute).observed_values() if v != priv]
        return [GroupKey(((attribute, v),)) for v in values]

    def model_features(self) -> list[str]:
        if self.features is not None:
            return list(self.features)
        skip = {self.outcome_column, self.prediction_column, self.weight_column}
        return [a for a, _ in self.schema if a not in skip]
