import pytest

from biasaudit.cli import synth_profile
from biasaudit.dataset import MISSING, ColumnType, Dataset
from biasaudit.errors import InvalidPlan, ProfileMismatch
from biasaudit.pipeline import (
    MITIGATIONS,
    Action,
    BiasFinding,
    BiasType,
    MitigationPlan,
    Severity,
    audit,
    compare_findings,
    exit_code,
    identify,
    measure,
    mitigate,
)
from biasaudit.profile import AuditProfile
from biasaudit.selection import SplitSpec
from biasaudit.synth import SynthSpec, generate, split_from_truth
from builders import completeness_dataset, completeness_profile, planted_profile_overrides, planted_spec

C, N, B = ColumnType.CATEGORICAL, ColumnType.NUMERIC, ColumnType.BINARY_LABEL


def planted(seed=7):
    spec = SynthSpec.from_dict(planted_spec(seed))
    ds, truth = generate(spec)
    return ds, synth_profile(spec, planted_profile_overrides()), split_from_truth(truth)


def by_id(findings):
    return {f.id: f for f in findings}


def balanced():
    """Complete, balanced table where the outcome ignores every attribute.

    Rows repeat a 12-row block that crosses sex x ethnicity x outcome, so any
    split taking whole blocks sees identical distributions.
    """
    rows = []
    for block in range(30):
        for sex in ("F", "M"):
            for eth in ("A", "B", "C"):
                for y in (0, 1):
                    rows.append((sex, eth, 10.0 + "ABC".index(eth) + 5.0 * (sex == "M"), y))
    ds = Dataset.from_rows("bal", [("sex", C), ("eth", C), ("x", N), ("y", B)], rows)
    profile = AuditProfile(
        schema=ds.schema, protected_attributes=("sex", "eth"), privileged_group={"sex": "M", "eth": "A"}, outcome_column="y"
    )
    train = [i for i in range(ds.n_rows) if (i // 12) % 3 != 2]
    test = [i for i in range(ds.n_rows) if (i // 12) % 3 == 2]
    return ds, profile, SplitSpec(train, test)


# -- identification ---------------------------------------------------------------


def test_identify_all_sections_present():
    ds, profile, split = planted()
    cl = identify(profile, ds, split)
    assert set(cl.sections) == set(BiasType)
    assert cl.skipped() == []
    questions = [q["question"] for s in cl.sections.values() for q in s.questions]
    assert "Are there any missing values? If so, why?" in questions
    assert "Are there training and testing phases for the study?" in questions
    missing = cl.sections[BiasType.MISSING_DATA].questions[0]["answer"]
    assert "bp" in missing and "MNAR" in missing


def test_identify_skip_reasons():
    ds, profile, split = balanced()
    cl = identify(profile, ds)
    assert cl.sections[BiasType.MISSING_DATA].questions[0]["answer"] == "no missing values"
    assert cl.sections[BiasType.MISSING_DATA].skip_reason == "no missing values"
    assert cl.sections[BiasType.SELECTION].skip_reason == "no split supplied"
    off = identify(profile.with_changes(relevance_flags={"informativeness": False}), ds, split)
    assert off.sections[BiasType.INFORMATIVENESS].as_dict()["skipped"]
    assert off.sections[BiasType.INFORMATIVENESS].skip_reason == "skipped by relevance flag"
    one = Dataset.from_rows("one", [("sex", C), ("y", B)], [("F", 1), ("F", 0), ("F", 1)])
    p1 = AuditProfile(schema=one.schema, protected_attributes=("sex",))
    cl = identify(p1, one)
    assert cl.sections[BiasType.MINORITY].skip_reason == "only one group"
    assert cl.sections[BiasType.INFORMATIVENESS].skip_reason == "no outcome column declared"
    none = AuditProfile(schema=one.schema)
    assert identify(none, one).sections[BiasType.MINORITY].skip_reason == "no protected attributes declared"


def test_identify_rejects_mismatched_profile():
    ds, profile, _ = balanced()
    other = AuditProfile(schema=(("sex", C), ("nope", N)))
    with pytest.raises(ProfileMismatch):
        identify(other, ds)


def test_skipped_families_are_not_measured():
    ds, profile, _ = balanced()
    found = audit(ds, profile).findings
    assert {f.bias_type for f in found} == {BiasType.MINORITY, BiasType.INFORMATIVENESS}


# -- measurement --------------------------------------------------------------------


def test_planted_minority_density_warning():
    ds, profile, split = planted()
    f = by_id(measure(ds, profile, split))
    d = f["minority/density/ethnicity"]
    assert d.severity is Severity.WARNING
    assert Action.COVERAGE_REPAIR in d.recommended_mitigations
    assert {e["value"] for e in d.metric_values["values"] if e["fraction"] < 0.10} == {"C"}


def test_balanced_dataset_all_none():
    ds, profile, split = balanced()
    found = audit(ds, profile, split).findings
    assert {f.bias_type for f in found} == {BiasType.MINORITY, BiasType.INFORMATIVENESS, BiasType.SELECTION}
    assert {f.id: f.severity for f in found} == {f.id: Severity.NONE for f in found}
    assert all(f.recommended_mitigations == [] for f in found)
    assert exit_code(found) == 0


def test_completeness_table_gap_warning():
    found = measure(completeness_dataset(), completeness_profile())
    f = by_id(found)["missing_data/completeness"]
    assert f.metric_values["max_gap"] == 0.30
    assert f.metric_values["flagged_attributes"] == ["bp"]
    assert f.severity is Severity.WARNING
    assert set(f.recommended_mitigations) == set(MITIGATIONS[BiasType.MISSING_DATA])


def test_recommendations_respect_mapping_and_determinism():
    ds, profile, split = planted()
    a = audit(ds, profile, split, seed=0).findings
    b = audit(ds, profile, split, seed=0).findings
    assert [f.as_dict() for f in a] == [f.as_dict() for f in b]
    for f in a:
        assert set(f.recommended_mitigations) <= set(MITIGATIONS[f.bias_type])
        assert BiasFinding.from_dict(f.as_dict()) == f
    assert exit_code(a) == 3
    sev = {}
    for f in a:
        sev[f.bias_type] = max(sev.get(f.bias_type, 0), f.severity.rank)
    assert sev == {
        BiasType.MINORITY: Severity.WARNING.rank,
        BiasType.MISSING_DATA: Severity.WARNING.rank,
        BiasType.INFORMATIVENESS: Severity.WARNING.rank,
        BiasType.SELECTION: Severity.CRITICAL.rank,
    }


def test_module_errors_become_findings():
    ds = Dataset.from_rows("e", [("sex", C), ("y", B)], [("F", 1), ("M", 1), ("F", 1), ("M", 1)])
    profile = AuditProfile(schema=ds.schema, protected_attributes=("sex",), outcome_column="y")
    found = by_id(measure(ds, profile))
    err = found["informativeness/error"]
    assert err.error.startswith("SingleClassTarget")
    assert err.severity is Severity.WARNING
    assert "minority/density/sex" in found


# -- mitigation -------------------------------------------------------------------


def test_reweighing_plan_zeroes_weighted_spd():
    ds, profile, split = planted()
    plan = MitigationPlan(Action.REWEIGHING, {"protected": "sex"}, "minority/outcome_parity/sex")
    res = mitigate(ds, plan, profile, split)
    spd = res.target_metrics["weighted_outcome_spd"]
    assert spd["before"] > 0.5
    assert spd["after"] <= 1e-12
    assert res.profile.weight_column == "sample_weight"
    assert by_id(res.after)["minority/outcome_parity/sex"].metric_values["max_abs_spd"] <= 1e-12
    assert res.dataset.n_rows == ds.n_rows


def test_mean_imputation_plan_completes_scope():
    ds, profile, split = planted()
    plan = MitigationPlan(Action.SINGLE_IMPUTATION, {"scope": ["bp"], "strategy": "mean"}, "missing_data/completeness")
    res = mitigate(ds, plan, profile, split)
    assert res.target_metrics["scope_completeness"]["before"]["bp"] < 1.0
    assert res.target_metrics["scope_completeness"]["after"] == {"bp": 1.0}
    assert len(res.artifacts["change_log"]) == ds.column("bp").n_missing


def female_fraction(findings):
    vals = by_id(findings)["minority/density/sex"].metric_values["values"]
    return next(e["fraction"] for e in vals if e["value"] == "F")


def test_deletion_on_mnar_lowers_female_density():
    ds, profile, split = planted()
    plan = MitigationPlan(Action.DELETION, {"scope": ["bp"]}, "missing_data/completeness")
    res = mitigate(ds, plan, profile, split)
    assert res.target_metrics["scope_completeness"]["after"] == {"bp": 1.0}
    assert female_fraction(res.after) < female_fraction(res.before)
    assert res.comparison["worsened"]
    assert res.split is not None and len(res.split.train) + len(res.split.test) == res.dataset.n_rows


def test_deletion_on_mnar_without_shift_flags_density_worsened():
    doc = planted_spec()
    doc.pop("shift")
    spec = SynthSpec.from_dict(doc)
    ds, _ = generate(spec)
    profile = synth_profile(spec, planted_profile_overrides())
    res = mitigate(ds, MitigationPlan(Action.DELETION, {"scope": ["bp"]}), profile)
    worsened = {(w["finding"], w["metric"]) for w in res.comparison["worsened"]}
    assert ("minority/density/sex", "fraction:F") in worsened
    assert female_fraction(res.after) < female_fraction(res.before)


def test_model_based_and_coverage_and_kfold_plans():
    ds, profile, split = planted()
    res = mitigate(ds, MitigationPlan(Action.MODEL_BASED_IMPUTATION, {"scope": ["bp"], "k": 3}), profile, split)
    assert res.target_metrics["scope_completeness"]["after"] == {"bp": 1.0}
    res = mitigate(ds, MitigationPlan(Action.COVERAGE_REPAIR, {"tau": 100, "materialize": True}), profile, split)
    assert res.target_metrics["total_deficit"]["after"] == 0
    assert res.target_metrics["total_deficit"]["before"] == res.artifacts["repair_order"]["total_rows_to_add"] > 0
    res = mitigate(ds, MitigationPlan(Action.KFOLD, {"K": 5, "seed": 2}, "selection/split_comparison"), profile, split)
    assert len(res.artifacts["splits"]) == 5
    assert res.target_metrics["protected_rejections"]["before"] == 1
    assert res.target_metrics["protected_rejections"]["after_folds_flagged"] <= 1


def test_invalid_plans():
    ds, profile, split = planted()
    before = measure(ds, profile, split)
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.POST_HOC), profile, split, before)
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.OPTIMIZED_PREPROCESSING), profile, split, before)
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.DELETION, {}, "minority/density/sex"), profile, split, before)
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.DELETION, {}, "missing_data/nope"), profile, split, before)
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.KFOLD, {"K": 5}), profile, split, before)
    with pytest.raises(InvalidPlan):
        MitigationPlan.from_dict({"action": "shuffle"})
    with pytest.raises(InvalidPlan):
        MitigationPlan.from_dict({"action": "deletion", "colour": 1})
    assert MitigationPlan.from_dict({"action": "deletion"}).action is Action.DELETION


def test_compare_findings_directions():
    def f(fid, metric, values, sev=Severity.NONE):
        return BiasFinding(fid, BiasType.MINORITY, metric, values, sev)

    before = [f("a", "coverage", {"total_deficit": 3}), f("b", "density", {"values": [{"value": "x", "fraction": 0.5}, {"value": "y", "fraction": 0.5}]})]
    after = [
        f("a", "coverage", {"total_deficit": 1}, Severity.WARNING),
        f("b", "density", {"values": [{"value": "x", "fraction": 0.6}, {"value": "y", "fraction": 0.4}]}),
        f("c", "coverage", {"total_deficit": 0}),
    ]
    cmp = compare_findings(before, after)
    worsened = {(w["finding"], w["metric"]) for w in cmp["worsened"]}
    assert worsened == {("a", "severity"), ("b", "fraction:x"), ("b", "fraction:y")}
    assert cmp["new"] == ["c"] and cmp["resolved"] == []


def test_missing_outcome_reweighing_invalid():
    ds = completeness_dataset()
    with pytest.raises(InvalidPlan):
        mitigate(ds, MitigationPlan(Action.REWEIGHING), completeness_profile())


def test_missing_cells_excluded_from_parity():
    rows = [("M", 1), ("M", 0), ("F", 1), ("F", 0), (MISSING, 1)]
    ds = Dataset.from_rows("p", [("sex", C), ("y", B)], rows)
    profile = AuditProfile(schema=ds.schema, protected_attributes=("sex",), privileged_group={"sex": "M"}, outcome_column="y")
    f = by_id(measure(ds, profile))["minority/outcome_parity/sex"]
    assert f.metric_values["max_abs_spd"] == 0.0
