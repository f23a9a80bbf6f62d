"""Identification, measurement and mitigation over one dataset and profile.

The loop never runs by itself: every :func:`mitigate` call is explicit and
re-measures the transformed dataset so the caller can see what improved and
what got worse.
"""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .completeness import completeness, missingness_disparity, protected_group_completeness
from . import informativeness as info
from . import minority, mitigation, selection
from .dataset import ColumnType, Dataset, enumerate_groups
from .errors import BiasAuditError, InvalidPlan, NonConvergenceWarning
from .profile import AuditProfile
from .selection import SplitSpec


class BiasType(enum.Enum):
    MINORITY = "Minority"
    MISSING_DATA = "MissingData"
    INFORMATIVENESS = "Informativeness"
    SELECTION = "Selection"


PROFILE_KEY = {
    BiasType.MINORITY: "minority",
    BiasType.MISSING_DATA: "missing_data",
    BiasType.INFORMATIVENESS: "informativeness",
    BiasType.SELECTION: "selection",
}


class Severity(enum.Enum):
    NONE = "None"
    INFO = "Info"
    WARNING = "Warning"
    CRITICAL = "Critical"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {Severity.NONE: 0, Severity.INFO: 1, Severity.WARNING: 2, Severity.CRITICAL: 3}


def max_severity(severities) -> Severity:
    return max(severities, key=lambda s: s.rank, default=Severity.NONE)


class Action(enum.Enum):
    COVERAGE_REPAIR = "coverage_repair"
    REWEIGHING = "reweighing"
    OPTIMIZED_PREPROCESSING = "optimized_preprocessing"
    DELETION = "deletion"
    SINGLE_IMPUTATION = "single_imputation"
    MODEL_BASED_IMPUTATION = "model_based_imputation"
    ANTE_HOC = "ante_hoc"
    POST_HOC = "post_hoc"
    KFOLD = "kfold_cross_validation"


MITIGATIONS = {
    BiasType.MINORITY: (Action.COVERAGE_REPAIR, Action.REWEIGHING, Action.OPTIMIZED_PREPROCESSING),
    BiasType.MISSING_DATA: (Action.DELETION, Action.SINGLE_IMPUTATION, Action.MODEL_BASED_IMPUTATION),
    BiasType.INFORMATIVENESS: (Action.ANTE_HOC, Action.POST_HOC),
    BiasType.SELECTION: (Action.KFOLD,),
}
# recommended only; they need machinery (a learned transformation, an opaque model) not hosted here
EXTERNAL_ACTIONS = frozenset({Action.OPTIMIZED_PREPROCESSING, Action.POST_HOC})

METRIC_MITIGATIONS = {
    "density": (Action.COVERAGE_REPAIR,),
    "coverage": (Action.COVERAGE_REPAIR,),
    "outcome_parity": (Action.REWEIGHING, Action.OPTIMIZED_PREPROCESSING),
    "fairness": (Action.REWEIGHING, Action.OPTIMIZED_PREPROCESSING),
    "completeness": (Action.DELETION, Action.SINGLE_IMPUTATION, Action.MODEL_BASED_IMPUTATION),
    "feature_importance": (Action.ANTE_HOC, Action.POST_HOC),
    "split_comparison": (Action.KFOLD,),
}


@dataclass
class BiasFinding:
    id: str
    bias_type: BiasType
    metric_name: str
    metric_values: dict
    severity: Severity = Severity.NONE
    recommended_mitigations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "bias_type": self.bias_type.value,
            "metric_name": self.metric_name,
            "metric_values": self.metric_values,
            "severity": self.severity.value,
            "recommended_mitigations": [a.value for a in self.recommended_mitigations],
            "notes": list(self.notes),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BiasFinding":
        return cls(
            id=doc["id"],
            bias_type=BiasType(doc["bias_type"]),
            metric_name=doc["metric_name"],
            metric_values=doc["metric_values"],
            severity=Severity(doc["severity"]),
            recommended_mitigations=[Action(a) for a in doc["recommended_mitigations"]],
            notes=list(doc.get("notes", [])),
            error=doc.get("error"),
        )


def _finding(bias_type, metric, scope, values, severity, notes=()):
    fid = f"{PROFILE_KEY[bias_type]}/{metric}" + (f"/{scope}" if scope else "")
    recs = list(METRIC_MITIGATIONS[metric]) if severity.rank >= Severity.WARNING.rank else []
    assert all(a in MITIGATIONS[bias_type] for a in recs)
    return BiasFinding(fid, bias_type, metric, values, severity, recs, list(notes))


# -- identification ------------------------------------------------------------


@dataclass
class ChecklistSection:
    bias_type: BiasType
    questions: list  # [{"question": ..., "answer": ...}]
    relevant: bool = True
    skip_reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "bias_type": self.bias_type.value,
            "questions": self.questions,
            "relevant": self.relevant,
            "skipped": not self.relevant,
            "skip_reason": self.skip_reason,
        }


@dataclass
class Checklist:
    sections: dict  # BiasType -> ChecklistSection

    def relevant(self, bias_type: BiasType) -> bool:
        return self.sections[bias_type].relevant

    def skipped(self) -> list:
        return [s for s in self.sections.values() if not s.relevant]

    def as_dict(self) -> dict:
        return {b.value: s.as_dict() for b, s in self.sections.items()}


def _skip(section: ChecklistSection, reason: str):
    section.relevant = False
    section.skip_reason = reason


def identify(profile: AuditProfile, ds: Dataset, split: SplitSpec | None = None) -> Checklist:
    """Answer the identification questions from dataset facts and the profile.

    Bias types that the profile flags as irrelevant, or that cannot occur
    (no protected attributes, a single group, no missing cells, no outcome,
    no split), are marked skipped with the reason.
    """
    profile.validate(ds)
    inventory = ", ".join(f"{a} ({k.value})" for a, k in ds.schema)
    protected = list(profile.protected_attributes)
    sections = {}

    s = ChecklistSection(
        BiasType.MINORITY,
        [
            {"question": "Which attributes and features are present in the dataset?", "answer": inventory},
            {"question": "Which are more relevant for the study?", "answer": ", ".join(profile.model_features())},
            {
                "question": "Are there protected attributes for the study? Are gender or ethnicity present in the dataset?",
                "answer": ", ".join(protected) if protected else "no protected attributes declared",
            },
        ],
    )
    if not profile.is_relevant("minority"):
        _skip(s, "skipped by relevance flag")
    elif not protected:
        _skip(s, "no protected attributes declared")
    else:
        populated = [g for g, n in enumerate_groups(ds, protected) if n > 0]
        if len(populated) <= 1:
            _skip(s, "only one group")
    sections[BiasType.MINORITY] = s

    n_missing = ds.missing_count()
    if n_missing == 0:
        answer = "no missing values"
    else:
        per = [f"{c.name}: {c.n_missing}" for c in ds.columns if c.n_missing]
        why = [f"{a}: {profile.missingness_of(a).mechanism.value}" for a in (c.name for c in ds.columns if c.n_missing)]
        answer = f"{n_missing} missing cells ({'; '.join(per)}); declared mechanisms: {'; '.join(why)}"
    s = ChecklistSection(BiasType.MISSING_DATA, [{"question": "Are there any missing values? If so, why?", "answer": answer}])
    if not profile.is_relevant("missing_data"):
        _skip(s, "skipped by relevance flag")
    elif n_missing == 0:
        _skip(s, "no missing values")
    sections[BiasType.MISSING_DATA] = s

    s = ChecklistSection(
        BiasType.INFORMATIVENESS,
        [
            {
                "question": "Which features are more important for predicting the result?",
                "answer": (
                    f"measured by an interpretable logistic model of {profile.outcome_column!r}"
                    if profile.outcome_column
                    else "no outcome column declared"
                ),
            },
            {
                "question": "Are there features for which more information is needed?",
                "answer": "see the feature-importance finding",
            },
        ],
    )
    if not profile.is_relevant("informativeness"):
        _skip(s, "skipped by relevance flag")
    elif not profile.outcome_column:
        _skip(s, "no outcome column declared")
    sections[BiasType.INFORMATIVENESS] = s

    if split is None:
        phases = "no split supplied"
    else:
        phases = ", ".join(f"{k}: {len(v)} rows" for k, v in split.parts().items())
    s = ChecklistSection(
        BiasType.SELECTION,
        [
            {"question": "Are there training and testing phases for the study?", "answer": phases},
            {
                "question": "Has the model been evaluated? If yes, how?",
                "answer": (
                    f"predictions in {profile.prediction_column!r}" if profile.prediction_column else "no predictions supplied"
                ),
            },
        ],
    )
    if not profile.is_relevant("selection"):
        _skip(s, "skipped by relevance flag")
    elif split is None:
        _skip(s, "no split supplied")
    sections[BiasType.SELECTION] = s
    return Checklist(sections)


# -- measurement -----------------------------------------------------------------


def _weights(ds: Dataset, profile: AuditProfile):
    if profile.weight_column and profile.weight_column in ds:
        col = ds.column(profile.weight_column)
        return np.where(col.observed, np.nan_to_num(col.array, nan=1.0), 1.0)
    return None


def _parity_severity(entries, thresholds) -> Severity:
    for e in entries:
        if abs(e["statistical_parity_difference"]) > thresholds.spd:
            return Severity.WARNING
        di = e["disparate_impact"]
        if di is not None and di < thresholds.disparate_impact:
            return Severity.WARNING
    return Severity.NONE


def _measure_minority(ds: Dataset, profile: AuditProfile) -> list:
    t = profile.thresholds
    out = []
    for attr in profile.protected_attributes:
        entries = minority.density(ds, attr)
        low = min(entries, key=lambda e: (e.fraction, e.value))
        if low.fraction < t.density_critical:
            sev = Severity.CRITICAL
        elif low.fraction < t.density_warning:
            sev = Severity.WARNING
        else:
            sev = Severity.NONE
        values = {
            "attribute": attr,
            "values": [{"value": e.value, "count": e.count, "fraction": e.fraction} for e in entries],
            "min_fraction": low.fraction,
            "min_value": low.value,
            "thresholds": {"warning": t.density_warning, "critical": t.density_critical},
        }
        out.append(_finding(BiasType.MINORITY, "density", attr, values, sev))

    cov_attrs = list(profile.coverage_attributes or profile.protected_attributes)
    findings = minority.coverage(ds, cov_attrs, profile.tau, profile.value_extensions)
    order = mitigation.repair_order(findings)
    values = {
        "attributes": cov_attrs,
        "tau": profile.tau,
        "uncovered": [{"group": f.group.as_dict(), "count": f.count, "deficit": f.deficit} for f in findings],
        "total_deficit": order.total,
    }
    out.append(_finding(BiasType.MINORITY, "coverage", None, values, Severity.WARNING if findings else Severity.NONE))

    if profile.outcome_column:
        weights = _weights(ds, profile)
        for attr in profile.protected_attributes:
            entries = minority.outcome_parity(
                ds,
                profile.privileged_key(ds, attr),
                profile.unprivileged_keys(ds, attr),
                profile.outcome_column,
                profile.favorable_label,
                weights,
            )
            rows = [e.as_dict() for e in entries]
            values = {
                "attribute": attr,
                "weighted": weights is not None,
                "entries": rows,
                "max_abs_spd": max((abs(r["statistical_parity_difference"]) for r in rows), default=0.0),
            }
            out.append(_finding(BiasType.MINORITY, "outcome_parity", attr, values, _parity_severity(rows, t)))

    if profile.prediction_column:
        for attr, report in minority.fairness(ds, profile).items():
            rows = [e.as_dict() for e in report.entries]
            values = {
                "attribute": attr,
                "entries": rows,
                "excluded_rows": report.excluded_rows,
                "max_abs_spd": max((abs(r["statistical_parity_difference"]) for r in rows), default=0.0),
            }
            out.append(_finding(BiasType.MINORITY, "fairness", attr, values, _parity_severity(rows, t)))
    return out


UTILITY_NOTE = (
    "fixing every gap can be costly: rows may be prioritized by their utility for the research goal, "
    "and attributes contributing most to the prediction fixed first"
)


def _measure_missing(ds: Dataset, profile: AuditProfile) -> list:
    report = completeness(ds)
    exact = protected_group_completeness(ds, profile.protected_attributes, exact=True)
    pga = {k: None if r is None else float(r) for k, r in exact.items()}
    report.per_group_attribute = pga
    threshold = profile.thresholds.missingness_disparity
    disparities = []
    for attribute in ds.attributes:
        ratios = {g: r for (g, a), r in exact.items() if a == attribute}
        if len([r for r in ratios.values() if r is not None]) < 2:
            continue
        d = missingness_disparity(ratios, threshold)
        disparities.append(
            {
                "attribute": attribute,
                "gap": d.gap,
                "flagged": d.flagged,
                "lowest_group": str(d.lowest),
                "lowest_ratio": float(ratios[d.lowest]),
                "highest_group": str(d.highest),
                "highest_ratio": float(ratios[d.highest]),
            }
        )
    flagged = [d for d in disparities if d["flagged"]]
    declared = {
        c.name: {"mechanism": profile.missingness_of(c.name).mechanism.value, "rationale": profile.missingness_of(c.name).rationale}
        for c in ds.columns
        if c.n_missing
    }
    values = {
        **report.as_dict(),
        "missing_cells": ds.missing_count(),
        "declared_mechanisms": declared,
        "disparity_threshold": threshold,
        "disparities": disparities,
        "max_gap": max((d["gap"] for d in disparities), default=0.0),
        "flagged_attributes": [d["attribute"] for d in flagged],
    }
    if flagged:
        sev = Severity.WARNING
    elif ds.missing_count():
        sev = Severity.INFO
    else:
        sev = Severity.NONE
    notes = [UTILITY_NOTE]
    mnar = [a for a, d in declared.items() if d["mechanism"] == "MNAR"]
    if mnar:
        notes.append(f"declared missing-not-at-random: {', '.join(mnar)}; deletion may distort group densities")
    return [_finding(BiasType.MISSING_DATA, "completeness", None, values, sev, notes)]


def _measure_informativeness(ds: Dataset, profile: AuditProfile, seed: int) -> list:
    features = [f for f in profile.model_features() if f in ds and f != profile.outcome_column]
    fm = info.encode(ds, profile.outcome_column, features, profile.favorable_label)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        model = info.train_logistic(fm, l2_lambda=profile.l2_lambda, seed=seed)
    rep = info.importance(model, profile)
    values = {
        **rep.as_dict(),
        "intercept": model.intercept,
        "model": {
            "kind": "logistic_regression",
            "l2_lambda": model.l2_lambda,
            "iterations": model.iterations,
            "gradient_norm": model.gradient_norm,
            "converged": model.converged,
            "seed": seed,
            "rows_used": int(fm.y.size),
            "excluded_rows": fm.excluded_rows,
        },
        "min_magnitude": profile.thresholds.importance_min,
    }
    notes = ["post-hoc explanation systems need an external opaque model and are not run here"]
    notes += [str(w.message) for w in caught]
    sev = Severity.WARNING if rep.flags else Severity.NONE
    return [_finding(BiasType.INFORMATIVENESS, "feature_importance", None, values, sev, notes)]


def _measure_selection(ds: Dataset, profile: AuditProfile, split: SplitSpec) -> list:
    cmp = selection.compare_splits(ds, split, profile)
    summary = selection.explore(ds, split)
    rejected = [r for r in cmp.results if r["result"].rejected]
    if cmp.flagged:
        sev = Severity.CRITICAL
    elif rejected:
        sev = Severity.WARNING
    else:
        sev = Severity.NONE
    values = {
        **cmp.as_dict(),
        "rejections": len(rejected),
        "rejected_attributes": sorted({r["attribute"] for r in rejected}),
        "exploration": summary.as_dict(),
    }
    notes = ["K is usually chosen to be 5 or 10; K equal to the row count is leave-one-out"]
    return [_finding(BiasType.SELECTION, "split_comparison", None, values, sev, notes)]


def _error_finding(bias_type: BiasType, exc: Exception) -> BiasFinding:
    f = BiasFinding(f"{PROFILE_KEY[bias_type]}/error", bias_type, "error", {}, Severity.WARNING)
    f.error = f"{type(exc).__name__}: {exc}"
    return f


def measure(ds: Dataset, profile: AuditProfile, split: SplitSpec | None = None, checklist=None, seed: int = 0) -> list:
    """Run every relevant measurement family; errors become findings, never abort."""
    if checklist is None:
        checklist = identify(profile, ds, split)
    jobs = []
    if checklist.relevant(BiasType.MINORITY):
        jobs.append((BiasType.MINORITY, lambda: _measure_minority(ds, profile)))
    if checklist.relevant(BiasType.MISSING_DATA):
        jobs.append((BiasType.MISSING_DATA, lambda: _measure_missing(ds, profile)))
    if checklist.relevant(BiasType.INFORMATIVENESS):
        jobs.append((BiasType.INFORMATIVENESS, lambda: _measure_informativeness(ds, profile, seed)))
    if checklist.relevant(BiasType.SELECTION):
        jobs.append((BiasType.SELECTION, lambda: _measure_selection(ds, profile, split)))
    findings = []
    with ThreadPoolExecutor(max_workers=max(1, len(jobs))) as pool:
        futures = [(b, pool.submit(fn)) for b, fn in jobs]
        for bias_type, fut in futures:
            try:
                findings += fut.result()
            except (BiasAuditError, ValueError) as exc:
                findings.append(_error_finding(bias_type, exc))
    return findings


@dataclass
class AuditResult:
    checklist: Checklist
    findings: list

    @property
    def severity(self) -> Severity:
        return max_severity(f.severity for f in self.findings)

    @property
    def families(self) -> list:
        return sorted({f.bias_type.value for f in self.findings})


def audit(ds: Dataset, profile: AuditProfile, split: SplitSpec | None = None, seed: int = 0) -> AuditResult:
    checklist = identify(profile, ds, split)
    return AuditResult(checklist, measure(ds, profile, split, checklist, seed))


def exit_code(findings) -> int:
    sev = max_severity(f.severity for f in findings)
    return {Severity.CRITICAL: 3, Severity.WARNING: 2}.get(sev, 0)


# -- mitigation --------------------------------------------------------------------


@dataclass
class MitigationPlan:
    action: Action
    parameters: dict = field(default_factory=dict)
    target_finding: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "MitigationPlan":
        extra = set(doc) - {"action", "parameters", "target_finding", "profile", "split"}
        if extra:
            raise InvalidPlan(f"unknown plan fields {sorted(extra)}")
        try:
            action = Action(doc["action"])
        except (KeyError, ValueError):
            raise InvalidPlan(f"unknown or missing action {doc.get('action')!r}") from None
        return cls(action, dict(doc.get("parameters", {})), doc.get("target_finding"))

    def as_dict(self) -> dict:
        return {"action": self.action.value, "parameters": self.parameters, "target_finding": self.target_finding}


def _headline(f: BiasFinding) -> dict:
    """Scalar metrics per finding with the direction that counts as better."""
    v = f.metric_values
    if f.metric_name == "density":
        k = len(v["values"])
        return {f"fraction:{e['value']}": (e["fraction"], ("balance", 1.0 / k)) for e in v["values"]}
    if f.metric_name == "coverage":
        return {"total_deficit": (v["total_deficit"], "lower")}
    if f.metric_name in ("outcome_parity", "fairness"):
        return {"max_abs_spd": (v["max_abs_spd"], "lower")}
    if f.metric_name == "completeness":
        out = {"table_completeness": (v["table_completeness"], "higher"), "max_gap": (v["max_gap"], "lower")}
        out.update({f"completeness:{a}": (r, "higher") for a, r in v["per_attribute"].items()})
        return out
    if f.metric_name == "feature_importance":
        return {"flags": (len(v["flags"]), "lower")}
    if f.metric_name == "split_comparison":
        return {"rejections": (v["rejections"], "lower")}
    return {}


def _worse(before, after, direction) -> bool:
    eps = 1e-12
    if direction == "lower":
        return after > before + eps
    if direction == "higher":
        return after < before - eps
    _, target = direction
    return abs(after - target) > abs(before - target) + eps


def compare_findings(before: list, after: list) -> dict:
    b = {f.id: f for f in before}
    a = {f.id: f for f in after}
    deltas, worsened = [], []
    for fid in sorted(set(b) & set(a)):
        fb, fa = b[fid], a[fid]
        if fa.severity.rank > fb.severity.rank:
            worsened.append({"finding": fid, "metric": "severity", "before": fb.severity.value, "after": fa.severity.value})
        hb, ha = _headline(fb), _headline(fa)
        for name in sorted(set(hb) & set(ha)):
            vb, direction = hb[name]
            va, _ = ha[name]
            entry = {"finding": fid, "metric": name, "before": vb, "after": va, "worsened": _worse(vb, va, direction)}
            deltas.append(entry)
            if entry["worsened"]:
                worsened.append(entry)
    return {
        "deltas": deltas,
        "worsened": worsened,
        "resolved": sorted(set(b) - set(a)),
        "new": sorted(set(a) - set(b)),
        "severity_before": {fid: f.severity.value for fid, f in sorted(b.items())},
        "severity_after": {fid: f.severity.value for fid, f in sorted(a.items())},
    }


@dataclass
class MitigationResult:
    plan: MitigationPlan
    dataset: Dataset
    profile: AuditProfile
    split: SplitSpec | None
    before: list
    after: list
    comparison: dict
    target_metrics: dict
    artifacts: dict
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "plan": self.plan.as_dict(),
            "dataset": {"name": self.dataset.name, "n_rows": self.dataset.n_rows, "n_columns": len(self.dataset.columns)},
            "target_metrics": self.target_metrics,
            "comparison": self.comparison,
            "artifacts": self.artifacts,
            "notes": self.notes,
        }


def _validate_plan(plan: MitigationPlan, before: list):
    if plan.action in EXTERNAL_ACTIONS:
        raise InvalidPlan(f"{plan.action.value} is an external recommendation and is not implemented here")
    if plan.target_finding is None:
        return None
    target = next((f for f in before if f.id == plan.target_finding), None)
    if target is None:
        raise InvalidPlan(f"target finding {plan.target_finding!r} does not exist")
    if plan.action not in MITIGATIONS[target.bias_type]:
        raise InvalidPlan(f"{plan.action.value} does not mitigate {target.bias_type.value} bias")
    return target


def _scope_completeness(ds: Dataset, scope) -> dict:
    if ds.n_rows == 0:
        return {a: None for a in scope}
    return {a: int(ds.column(a).observed.sum()) / ds.n_rows for a in scope}


def _remap_split(split, kept_rows):
    if split is None:
        return None
    new_index = {old: new for new, old in enumerate(kept_rows)}
    parts = {k: [new_index[i] for i in v if i in new_index] for k, v in split.parts().items()}
    try:
        s = SplitSpec(parts["train"], parts["test"], parts.get("validation"))
    except KeyError:
        return None
    return s if s.train and s.test else None


def _outcome_spd(ds: Dataset, profile: AuditProfile, attr: str, weights) -> float:
    entries = minority.outcome_parity(
        ds,
        profile.privileged_key(ds, attr),
        profile.unprivileged_keys(ds, attr),
        profile.outcome_column,
        profile.favorable_label,
        weights,
    )
    return max(abs(e.statistical_parity_difference) for e in entries)


def mitigate(
    ds: Dataset,
    plan: MitigationPlan,
    profile: AuditProfile,
    split: SplitSpec | None = None,
    before: list | None = None,
    seed: int = 0,
) -> MitigationResult:
    """Apply one plan, then re-measure the result and report metric deltas."""
    if before is None:
        before = measure(ds, profile, split, seed=seed)
    target = _validate_plan(plan, before)
    p = plan.parameters
    new_ds, new_profile, new_split = ds, profile, split
    artifacts, target_metrics, notes = {}, {}, []
    action = plan.action

    if action is Action.REWEIGHING:
        if not profile.outcome_column:
            raise InvalidPlan("reweighing needs an outcome column")
        attr = p.get("protected") or (target.metric_values.get("attribute") if target else None)
        attr = attr or (profile.protected_attributes[0] if profile.protected_attributes else None)
        if attr is None:
            raise InvalidPlan("reweighing needs a protected attribute")
        column = p.get("weight_column", mitigation.DEFAULT_WEIGHT_COLUMN)
        wv = mitigation.reweigh(ds, attr, profile.outcome_column)
        new_ds = mitigation.apply_weights(ds, wv, column)
        schema = list(profile.schema)
        if column not in dict(schema):
            schema.append((column, ColumnType.NUMERIC))
        new_profile = profile.with_changes(schema=tuple(schema), weight_column=column)
        artifacts["weights"] = wv.as_dict()
        target_metrics["weighted_outcome_spd"] = {
            "attribute": attr,
            "before": _outcome_spd(ds, profile, attr, _weights(ds, profile)),
            "after": _outcome_spd(new_ds, new_profile, attr, wv.weights),
        }
    elif action is Action.COVERAGE_REPAIR:
        attrs = list(p.get("attributes") or profile.coverage_attributes or profile.protected_attributes)
        tau = int(p.get("tau", profile.tau))
        findings = minority.coverage(ds, attrs, tau, profile.value_extensions)
        order = mitigation.repair_order(findings)
        artifacts["repair_order"] = order.as_dict()
        after_deficit = order.total
        if p.get("materialize", False):
            new_ds = mitigation.materialize_repair(ds, order)
            after_deficit = sum(f.deficit for f in minority.coverage(new_ds, attrs, tau, profile.value_extensions))
            notes.append("placeholder rows were materialized for testing; they are not real records")
        else:
            notes.append("the repair order lists what to collect; the dataset is unchanged")
        target_metrics["total_deficit"] = {"before": order.total, "after": after_deficit}
    elif action in (Action.DELETION, Action.SINGLE_IMPUTATION, Action.MODEL_BASED_IMPUTATION):
        scope = list(p.get("scope") or [c.name for c in ds.columns if c.n_missing])
        changes = []
        if action is Action.DELETION:
            spec = mitigation.ImputationSpec(mitigation.Strategy.DELETION, scope)
            new_ds, changes = mitigation.impute(ds, spec)
            removed = {c.row for c in changes}
            kept = [i for i in range(ds.n_rows) if i not in removed]
            new_split = _remap_split(split, kept)
        elif action is Action.MODEL_BASED_IMPUTATION:
            spec = mitigation.ImputationSpec(mitigation.Strategy.MODEL_BASED, scope, int(p.get("k", 5)))
            new_ds, changes = mitigation.impute(ds, spec)
        else:
            strategy = p.get("strategy", "auto")
            for attr in scope:
                s = strategy
                if s == "auto":
                    s = "mean" if ds.kind(attr) is ColumnType.NUMERIC else "mode"
                new_ds, ch = mitigation.impute(new_ds, mitigation.ImputationSpec(s, [attr]))
                changes += ch
        artifacts["change_log"] = [c.as_dict() for c in changes]
        target_metrics["scope_completeness"] = {
            "before": _scope_completeness(ds, scope),
            "after": _scope_completeness(new_ds, scope),
        }
    elif action is Action.ANTE_HOC:
        notes.append(
            "the measurement model is already interpretable by design; its coefficients are the explanation"
        )
    elif action is Action.KFOLD:
        if "seed" not in p:
            raise InvalidPlan("kfold_cross_validation needs an explicit seed parameter")
        k = int(p.get("K", 5))
        stratify = p.get("stratify_on", profile.protected_attributes[0] if profile.protected_attributes else None)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            splits = mitigation.kfold(ds, k, int(p.get("repeats", 1)), stratify, int(p["seed"]))
        notes += [str(w.message) for w in caught]
        per_fold = []
        for i, s in enumerate(splits):
            cmp = selection.compare_splits(ds, s, profile)
            per_fold.append(
                {
                    "repeat": i // k,
                    "fold": i % k,
                    "rejections": sum(r["result"].rejected for r in cmp.results),
                    "protected_rejected": cmp.flagged,
                }
            )
        artifacts["splits"] = [{"repeat": i // k, "fold": i % k, **s.to_dict()} for i, s in enumerate(splits)]
        artifacts["per_fold"] = per_fold
        new_split = splits[0]
        target_metrics["protected_rejections"] = {
            "before": int(bool(target and target.metric_values.get("flagged"))),
            "after_folds_flagged": sum(f["protected_rejected"] for f in per_fold),
            "folds": len(per_fold),
        }
    else:  # pragma: no cover - every enum member is handled above
        raise InvalidPlan(f"unsupported action {action}")

    after = measure(new_ds, new_profile, new_split, seed=seed)
    comparison = compare_findings(before, after)
    return MitigationResult(
        plan, new_ds, new_profile, new_split, before, after, comparison, target_metrics, artifacts, notes
    )
