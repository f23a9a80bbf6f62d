"""Report emission: canonical JSON, a text rendering and plot-data CSVs.

The JSON document is the canonical form.  It is serialized with sorted keys
and fixed indentation, so two runs on the same inputs differ only in the
``timestamp`` field.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from . import __version__
from .pipeline import EXTERNAL_ACTIONS, BiasFinding, BiasType, Severity, exit_code, max_severity
from .selection import SplitSpec, attribute_sample, ecdf_table

REPORT_VERSION = 1

_SEVERITIES = [s.value for s in Severity]
_FINDING_SCHEMA = {
    "type": "object",
    "required": [
        "id",
        "bias_type",
        "metric_name",
        "metric_values",
        "severity",
        "recommended_mitigations",
        "notes",
        "error",
    ],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string"},
        "bias_type": {"enum": [b.value for b in BiasType]},
        "metric_name": {"type": "string"},
        "metric_values": {"type": "object"},
        "severity": {"enum": _SEVERITIES},
        "recommended_mitigations": {"type": "array", "items": {"type": "string"}},
        "notes": {"type": "array", "items": {"type": "string"}},
        "error": {"type": ["string", "null"]},
    },
}

# JSON Schema (draft 2020-12) for report.json
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bias audit report",
    "type": "object",
    "required": [
        "report_version",
        "tool_version",
        "timestamp",
        "dataset",
        "profile_hash",
        "checklist",
        "findings",
        "no_bias_findings",
        "summary",
        "external_recommendations",
    ],
    "additionalProperties": False,
    "properties": {
        "report_version": {"const": REPORT_VERSION},
        "tool_version": {"type": "string"},
        "timestamp": {"type": "string"},
        "dataset": {
            "type": "object",
            "required": ["name", "sha256"],
            "properties": {
                "name": {"type": "string"},
                "sha256": {"type": ["string", "null"]},
                "n_rows": {"type": "integer", "minimum": 0},
            },
        },
        "profile_hash": {"type": ["string", "null"]},
        "checklist": {"type": ["object", "null"]},
        "findings": {"type": "array", "items": _FINDING_SCHEMA},
        "no_bias_findings": {"type": "boolean"},
        "summary": {
            "type": "object",
            "required": ["max_severity", "exit_code", "severity_counts", "families"],
            "properties": {
                "max_severity": {"enum": _SEVERITIES},
                "exit_code": {"enum": [0, 2, 3]},
                "severity_counts": {"type": "object", "additionalProperties": {"type": "integer"}},
                "families": {"type": "array", "items": {"enum": [b.value for b in BiasType]}},
            },
        },
        "external_recommendations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["action", "findings", "reason"],
                "properties": {
                    "action": {"type": "string"},
                    "findings": {"type": "array", "items": {"type": "string"}},
                    "reason": {"type": "string"},
                },
            },
        },
    },
}

_EXTERNAL_REASON = {
    "optimized_preprocessing": "learns a probabilistic transformation of the data; run it with a dedicated tool",
    "post_hoc": "explains an opaque predictive model that is not part of this audit",
}

_FAMILY_ORDER = {b: i for i, b in enumerate(BiasType)}


def _as_finding(f) -> BiasFinding:
    return f if isinstance(f, BiasFinding) else BiasFinding.from_dict(f)


def sorted_findings(findings) -> list:
    fs = [_as_finding(f) for f in findings]
    return sorted(fs, key=lambda f: (_FAMILY_ORDER[f.bias_type], f.id))


def build_report(findings, metadata=None, checklist=None) -> dict:
    """Assemble the report document.

    ``metadata`` is a :class:`BiasMetadata` (or ``None`` for a bare report).
    """
    fs = sorted_findings(findings)
    sev = max_severity(f.severity for f in fs)
    counts = {s.value: sum(f.severity is s for f in fs) for s in Severity}
    external = []
    for action in sorted(EXTERNAL_ACTIONS, key=lambda a: a.value):
        ids = [f.id for f in fs if action in f.recommended_mitigations]
        if ids:
            external.append({"action": action.value, "findings": ids, "reason": _EXTERNAL_REASON[action.value]})
    dataset = {"name": metadata.dataset_name if metadata else "", "sha256": metadata.content_hash if metadata else None}
    if checklist is not None and not isinstance(checklist, dict):
        checklist = checklist.as_dict()
    return {
        "report_version": REPORT_VERSION,
        "tool_version": metadata.tool_version if metadata else __version__,
        "timestamp": metadata.timestamp if metadata else "",
        "dataset": dataset,
        "profile_hash": metadata.profile_hash if metadata else None,
        "checklist": checklist,
        "findings": [f.as_dict() for f in fs],
        "no_bias_findings": sev.rank < Severity.WARNING.rank,
        "summary": {
            "max_severity": sev.value,
            "exit_code": exit_code(fs),
            "severity_counts": counts,
            "families": [b.value for b in BiasType if any(f.bias_type is b for f in fs)],
        },
        "external_recommendations": external,
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _summarize(f: dict) -> list[str]:
    v = f["metric_values"]
    name = f["metric_name"]
    if name == "density":
        return [", ".join(f"{e['value']}={_fmt(e['fraction'])}" for e in v["values"])]
    if name == "coverage":
        if not v["uncovered"]:
            return [f"every combination of {', '.join(v['attributes'])} has at least {v['tau']} rows"]
        return [
            f"{len(v['uncovered'])} combinations below {v['tau']} rows; {v['total_deficit']} rows to add",
            *(f"  {e['group']}: {e['count']} rows, deficit {e['deficit']}" for e in v["uncovered"][:10]),
        ]
    if name in ("fairness", "outcome_parity"):
        return [
            f"{e['group']} vs {e['privileged']}: SPD={_fmt(e['statistical_parity_difference'])}"
            f" DI={_fmt(e['disparate_impact'])}"
            for e in v["entries"]
        ]
    if name == "completeness":
        lines = [f"table completeness {_fmt(v['table_completeness'])}, {v['missing_cells']} missing cells"]
        lines += [
            f"  {d['attribute']}: gap {_fmt(d['gap'])} ({d['lowest_group']} {_fmt(d['lowest_ratio'])}"
            f" vs {d['highest_group']} {_fmt(d['highest_ratio'])}){' FLAGGED' if d['flagged'] else ''}"
            for d in v["disparities"]
        ]
        return lines
    if name == "feature_importance":
        top = sorted(v["features"], key=lambda e: e["rank"])[:10]
        lines = [f"  #{e['rank']} {e['feature']}: {_fmt(e['coefficient'])}" for e in top]
        return lines + [fl["message"] for fl in v["flags"]]
    if name == "split_comparison":
        return [
            f"  {t['pair']} {t['attribute']}: {t['test']} p={_fmt(t['p_value'])} {t['decision']}"
            for t in v["tests"]
        ] + [f"{v['family_size']} tests, no multiple-testing correction"]
    return []


def render_text(doc: dict) -> str:
    out = io.StringIO()
    w = out.write
    ds = doc["dataset"]
    w(f"Bias audit report: {ds['name']}\n")
    if ds.get("sha256"):
        w(f"dataset sha256: {ds['sha256']}\n")
    w(f"max severity: {doc['summary']['max_severity']}\n\n")
    checklist = doc.get("checklist") or {}
    if checklist:
        w("Identification\n")
        for section in checklist.values():
            status = f"skipped ({section['skip_reason']})" if section["skipped"] else "measured"
            w(f"  [{section['bias_type']}] {status}\n")
            for q in section["questions"]:
                w(f"    Q: {q['question']}\n    A: {q['answer']}\n")
        w("\n")
    if doc["no_bias_findings"]:
        w("No bias findings\n")
        w("  no finding reached Warning or Critical severity\n\n")
    w("Findings\n")
    if not doc["findings"]:
        w("  (none)\n")
    for f in doc["findings"]:
        w(f"- {f['id']} [{f['severity']}]\n")
        if f["error"]:
            w(f"  error: {f['error']}\n")
        for line in _summarize(f):
            w(f"  {line}\n")
        if f["recommended_mitigations"]:
            w(f"  recommended: {', '.join(f['recommended_mitigations'])}\n")
        for note in f["notes"]:
            w(f"  note: {note}\n")
    if doc["external_recommendations"]:
        w("\nExternal recommendations (not run by this tool)\n")
        for r in doc["external_recommendations"]:
            w(f"  {r['action']}: {r['reason']}\n")
    return out.getvalue()


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cell(v):
    return "undefined" if v is None else repr(v) if isinstance(v, float) else v


def density_rows(findings) -> list:
    rows = []
    for f in sorted_findings(findings):
        if f.metric_name == "density":
            attr = f.metric_values["attribute"]
            for e in f.metric_values["values"]:
                rows.append((f"{attr}={e['value']}", "density", _cell(e["fraction"])))
                rows.append((f"{attr}={e['value']}", "count", e["count"]))
        elif f.metric_name == "coverage":
            for e in f.metric_values["uncovered"]:
                key = ",".join(f"{a}={v}" for a, v in e["group"].items())
                rows.append((key, "coverage_deficit", e["deficit"]))
    return rows


_FAIRNESS_METRICS = (
    "statistical_parity_difference",
    "disparate_impact",
    "equal_opportunity_difference",
    "average_odds_difference",
    "accuracy_difference",
)


def fairness_rows(findings) -> list:
    rows = []
    for f in sorted_findings(findings):
        if f.metric_name not in ("fairness", "outcome_parity"):
            continue
        for e in f.metric_values["entries"]:
            for m in _FAIRNESS_METRICS:
                if m in e:
                    rows.append((f"{f.metric_name}:{e['group']}", m, _cell(e[m])))
    return rows


def importance_rows(findings) -> list:
    for f in sorted_findings(findings):
        if f.metric_name == "feature_importance":
            return [(e["feature"], _cell(e["coefficient"])) for e in f.metric_values["features"]]
    return []


def completeness_rows(findings) -> list:
    for f in sorted_findings(findings):
        if f.metric_name == "completeness":
            v = f.metric_values
            rows = [("table", _cell(v["table_completeness"]))]
            rows += [(a, _cell(r)) for a, r in v["per_attribute"].items()]
            rows += [(f"{e['group']}|{e['attribute']}", _cell(e["ratio"])) for e in v["per_group_attribute"]]
            return rows
    return []


def render_csv(doc: dict) -> str:
    """Flat (finding, severity, key, metric, value) table of a report's findings."""
    fs = doc["findings"]
    rows = [("density", *r) for r in density_rows(fs)]
    rows += [("fairness", *r) for r in fairness_rows(fs)]
    rows += [("importance", feat, "coefficient", c) for feat, c in importance_rows(fs)]
    rows += [("completeness", k, "ratio", r) for k, r in completeness_rows(fs)]
    sev = {f["id"]: f["severity"] for f in fs}
    rows = [("table", "key", "metric", "value")] + rows
    summary = [(f["id"], sev[f["id"]]) for f in fs]
    return _csv(rows[1:], rows[0]) + "\n" + _csv(summary, ("finding", "severity"))


def emit_report(findings, metadata, out_dir, checklist=None, dataset=None, split: SplitSpec | None = None) -> dict:
    """Write report.json, report.txt and the plot-data CSVs; returns the paths.

    ECDF tables need the dataset and split; they are written for every
    numeric attribute the selection comparison tested.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = build_report(findings, metadata, checklist)
    paths = {}

    def put(name, text):
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths[name] = p

    put("report.json", dumps(doc))
    put("report.txt", render_text(doc))
    put("density.csv", _csv(density_rows(findings), ("key", "metric", "value")))
    put("fairness.csv", _csv(fairness_rows(findings), ("key", "metric", "value")))
    put("importance.csv", _csv(importance_rows(findings), ("feature", "coefficient")))
    put("completeness.csv", _csv(completeness_rows(findings), ("key", "ratio")))
    if dataset is not None and split is not None:
        for f in sorted_findings(findings):
            if f.metric_name != "split_comparison":
                continue
            for t in f.metric_values["tests"]:
                if t["pair"] != "train/test" or t["test"] != "KolmogorovSmirnov2Sample":
                    continue
                a = attribute_sample(dataset, t["attribute"], split.train)
                b = attribute_sample(dataset, t["attribute"], split.test)
                table = [(repr(float(v)), repr(float(fa)), repr(float(fb))) for v, fa, fb in ecdf_table(a, b)]
                put(f"ecdf_{t['attribute']}.csv", _csv(table, ("value", "ecdf_train", "ecdf_test")))
    return paths
