"""Command-line entry point: ``biasaudit audit|mitigate|split|synth|report``.

Exit codes: 0 no Warning/Critical finding, 2 Warning present, 3 Critical
present, 1 execution error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import ColumnType, load_csv, write_csv
from .errors import BiasAuditError, InvalidPlan
from .metadata import BiasMetadata, HistoryEntry, file_sha256, read_sidecar, sidecar_path, utc_timestamp, write_sidecar
from .mitigation import kfold
from .pipeline import BiasFinding, MitigationPlan, audit, exit_code, mitigate
from .profile import AuditProfile
from .report import build_report, emit_report, render_csv, render_text
from .selection import SplitSpec
from .synth import SynthSpec, generate, split_from_truth


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(path, profile: AuditProfile):
    return load_csv(path, profile.schema, set(profile.missing_tokens), name=Path(path).stem)


def _history(dataset_path, profile_hash, content_hash):
    if not sidecar_path(dataset_path).exists():
        return []
    try:
        meta = read_sidecar(dataset_path, profile_hash)
    except (KeyError, BiasAuditError, json.JSONDecodeError):
        return []
    return [] if meta.stale or meta.content_hash != content_hash else meta.mitigation_history


def _metadata(ds_path, ds, profile, findings, history) -> BiasMetadata:
    return BiasMetadata(
        dataset_name=ds.name,
        content_hash=file_sha256(ds_path),
        profile_hash=profile.content_hash(),
        tool_version=__version__,
        timestamp=utc_timestamp(),
        findings=[f.as_dict() for f in findings],
        mitigation_history=history,
    )


def cmd_audit(args) -> int:
    profile = AuditProfile.load(args.profile)
    ds = _load(args.data, profile)
    split = SplitSpec.from_dict(_read_json(args.split)) if args.split else None
    result = audit(ds, profile, split, seed=args.seed)
    sha = file_sha256(args.data)
    meta = _metadata(args.data, ds, profile, result.findings, _history(args.data, profile.content_hash(), sha))
    emit_report(result.findings, meta, args.out, result.checklist, ds, split)
    if not args.no_sidecar:
        write_sidecar(args.data, meta)
    code = exit_code(result.findings)
    print(f"{len(result.findings)} findings, max severity {result.severity.value}; report in {args.out}")
    return code


def cmd_mitigate(args) -> int:
    plan_doc = _read_json(args.plan)
    base = Path(args.plan).parent
    profile_path = args.profile or (base / plan_doc["profile"] if "profile" in plan_doc else None)
    if profile_path is None:
        raise InvalidPlan("no profile: pass --profile or set 'profile' in the plan")
    split_path = args.split or (base / plan_doc["split"] if "split" in plan_doc else None)
    plan = MitigationPlan.from_dict(plan_doc)
    if args.seed is not None:
        plan.parameters.setdefault("seed", args.seed)
    profile = AuditProfile.load(profile_path)
    ds = _load(args.data, profile)
    split = SplitSpec.from_dict(_read_json(split_path)) if split_path else None
    result = mitigate(ds, plan, profile, split, seed=plan.parameters.get("seed", 0))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.data).stem
    new_csv = write_csv(result.dataset.renamed(f"{stem}_{plan.action.value}"), out / f"{stem}_{plan.action.value}.csv")
    _write_json(out / "profile.json", result.profile.to_dict())
    _write_json(out / "mitigation.json", result.as_dict())
    if result.split is not None:
        _write_json(out / "split.json", result.split.to_dict())
    history = _history(args.data, profile.content_hash(), file_sha256(args.data))
    history = history + [
        HistoryEntry(
            plan.as_dict(),
            result.comparison["deltas"],
            result.comparison["worsened"],
            file_sha256(args.data),
            [f.id for f in result.before],
        )
    ]
    meta = _metadata(new_csv, result.dataset, result.profile, result.after, history)
    emit_report(result.after, meta, out / "report", None, result.dataset, result.split)
    write_sidecar(new_csv, meta)
    worse = result.comparison["worsened"]
    print(f"{plan.action.value}: wrote {new_csv}; {len(worse)} metrics worsened")
    for w in worse:
        print(f"  worsened: {w['finding']} {w['metric']} {w['before']} -> {w['after']}")
    return exit_code(result.after)


def _header(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh))


def cmd_split(args) -> int:
    if args.profile:
        profile = AuditProfile.load(args.profile)
        ds = _load(args.data, profile)
    else:
        schema = [(a, ColumnType.CATEGORICAL) for a in _header(args.data)]
        ds = load_csv(args.data, schema, name=Path(args.data).stem)
    splits = kfold(ds, args.k, args.repeats, args.stratify, args.seed)
    doc = [{"repeat": i // args.k, "fold": i % args.k, **s.to_dict()} for i, s in enumerate(splits)]
    text = json.dumps(doc, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def synth_profile(spec: SynthSpec, overrides: dict) -> AuditProfile:
    """Default profile for a synth spec: categorical columns are protected."""
    doc = {
        "schema": [{"name": a, "type": k.value} for a, k in spec.schema()],
        "protected_attributes": [c["name"] for c in spec.categorical],
        "outcome_column": spec.outcome["name"] if spec.outcome else None,
        "prediction_column": spec.prediction["name"] if spec.prediction else None,
    }
    doc.update(overrides)
    return AuditProfile.from_dict(doc)


def cmd_synth(args) -> int:
    doc = _read_json(args.spec)
    overrides = doc.pop("profile", {})
    if args.seed is not None:
        doc["seed"] = args.seed
    if "seed" not in doc:
        raise BiasAuditError("synth needs an explicit seed (spec 'seed' field or --seed)")
    spec = SynthSpec.from_dict(doc)
    ds, truth = generate(spec)
    profile = synth_profile(spec, overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / f"{spec.name}.csv")
    _write_json(out / f"{spec.name}.truth.json", truth)
    _write_json(out / "profile.json", profile.to_dict())
    split = split_from_truth(truth)
    if split is not None:
        _write_json(out / "split.json", split.to_dict())
    print(f"wrote {ds.n_rows} rows to {out / (spec.name + '.csv')}")
    return 0


def cmd_report(args) -> int:
    doc = _read_json(args.findings)
    if isinstance(doc, list):
        doc = build_report(doc)
    elif "summary" not in doc:
        doc = build_report(doc["findings"])
    findings = [BiasFinding.from_dict(f) for f in doc["findings"]]
    sys.stdout.write(render_text(doc) if args.format == "text" else render_csv(doc))
    return exit_code(findings)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biasaudit", description="Audit tabular datasets for data bias.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="identify and measure bias, write a report and sidecar")
    a.add_argument("data")
    a.add_argument("--profile", required=True)
    a.add_argument("--split")
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=0, help="start point of the logistic fit (default 0)")
    a.add_argument("--no-sidecar", action="store_true", help="do not write <data>.biasmeta.json")
    a.set_defaults(func=cmd_audit)

    m = sub.add_parser("mitigate", help="apply one mitigation plan and re-measure")
    m.add_argument("data")
    m.add_argument("--plan", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--profile")
    m.add_argument("--split")
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_mitigate)

    s = sub.add_parser("split", help="repeated (stratified) K-fold split as JSON row indices")
    s.add_argument("data")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--stratify")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--profile")
    s.add_argument("--out")
    s.set_defaults(func=cmd_split)

    y = sub.add_parser("synth", help="generate a seeded dataset with planted bias")
    y.add_argument("--spec", required=True)
    y.add_argument("--out", required=True)
    y.add_argument("--seed", type=int)
    y.set_defaults(func=cmd_synth)

    r = sub.add_parser("report", help="render a findings or report JSON file")
    r.add_argument("findings")
    r.add_argument("--format", choices=("text", "csv"), default="text")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BiasAuditError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
