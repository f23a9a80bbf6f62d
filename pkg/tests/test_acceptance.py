"""Acceptance criteria 1-13, each at its stated tolerance and time bound.

Every criterion prints one ``PASS``/``FAIL`` line; the lines are repeated in
the pytest terminal summary.  Run standalone with
``python tests/test_acceptance.py``.
"""

import functools
import itertools
import json
import sys
import time
import warnings
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from biasaudit.cli import main as cli_main  # noqa: E402
from biasaudit.completeness import completeness, group_completeness  # noqa: E402
from biasaudit.dataset import MISSING, ColumnType, Dataset, GroupKey  # noqa: E402
from biasaudit.errors import StratumTooSmallWarning  # noqa: E402
from biasaudit.informativeness import FeatureMatrix, encode, importance, objective, train_logistic  # noqa: E402
from biasaudit.metadata import read_sidecar, verify  # noqa: E402
from biasaudit.minority import coverage, density, fairness, fairness_between, outcome_parity  # noqa: E402
from biasaudit.mitigation import ImputationSpec, holdout, impute, kfold, reweigh  # noqa: E402
from biasaudit.pipeline import BiasType, Severity, measure  # noqa: E402
from biasaudit.profile import AuditProfile  # noqa: E402
from biasaudit.selection import SplitSpec, compare_splits, ks_statistic, ks_two_sample  # noqa: E402
from biasaudit.synth import SynthSpec, generate  # noqa: E402
from builders import (  # noqa: E402
    completeness_dataset,
    completeness_profile,
    density_dataset,
    planted_profile_overrides,
    planted_spec,
)

C, N, B = ColumnType.CATEGORICAL, ColumnType.NUMERIC, ColumnType.BINARY_LABEL
RESULTS = {}


def criterion(number, title, limit=None):
    """Record and print PASS/FAIL for one criterion; ``limit`` is its time bound in seconds."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            status, detail = "FAIL", ""
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                if limit is not None and elapsed >= limit:
                    detail = f" (took {elapsed:.2f}s, bound {limit}s)"
                    raise AssertionError(f"criterion {number} exceeded its {limit}s bound: {elapsed:.2f}s")
                status = "PASS"
            except BaseException as exc:
                if not detail:
                    detail = f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
                raise
            finally:
                elapsed = time.perf_counter() - start
                line = f"criterion {number:2d} {status}  {title}  [{elapsed:.2f}s]{detail if status == 'FAIL' else ''}"
                RESULTS[number] = line
                print(line)

        return run

    return wrap


# -- oracles ------------------------------------------------------------------


def brute_coverage(rows, attrs, tau):
    domains = [sorted({r[i] for r in rows}) for i in range(len(attrs))]
    counts = Counter(tuple(r) for r in rows)
    out = []
    for combo in itertools.product(*domains):
        if counts[combo] < tau:
            out.append((tuple(sorted(zip(attrs, combo))), counts[combo], tau - counts[combo]))
    return sorted(out, key=lambda t: (-t[2], t[0]))


def brute_ks(a, b):
    best = Fraction(0)
    for x in list(a) + list(b):
        fa = Fraction(sum(1 for v in a if v <= x), len(a))
        fb = Fraction(sum(1 for v in b if v <= x), len(b))
        best = max(best, abs(fa - fb))
    return float(best)


def fd_relative_error(theta, X, y, lam, h=1e-6):
    _, g = objective(theta, X, y, lam)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (objective(theta + e, X, y, lam)[0] - objective(theta - e, X, y, lam)[0]) / (2 * h)
    return np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)


def logistic_instance(rng, n_rows=None, n_feat=None):
    n = n_rows or int(rng.integers(4, 21))
    d = n_feat or int(rng.integers(1, 7))
    X = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
    y = (rng.random(n) < 0.5).astype(float)
    y[0], y[1] = 0.0, 1.0
    return FeatureMatrix(X, y, [f"x{i}" for i in range(d)], np.arange(n), 0, [], [])


# -- criteria -------------------------------------------------------------------


@criterion(1, "density reproduction", limit=1)
def test_criterion_01_density():
    ds = density_dataset()
    got = {e.value: e.fraction for e in density(ds, "ethnicity")}
    got.update({e.value: e.fraction for e in density(ds, "sex")})
    assert got == {"Caucasian": 0.65, "Black": 0.10, "Asiatic": 0.25, "Male": 0.80, "Female": 0.20}


@criterion(2, "completeness reproduction", limit=1)
def test_criterion_02_completeness():
    ds = completeness_dataset()
    groups = [GroupKey.of(ethnicity=v) for v in ("Black", "Caucasian", "Asiatic")]
    groups += [GroupKey.of(sex=v) for v in ("Female", "Male")]
    got = [group_completeness(ds, groups, "bp")[g] for g in groups]
    assert got == [0.85, 0.95, 0.70, 0.75, 1.00]
    f = next(f for f in measure(ds, completeness_profile()) if f.bias_type is BiasType.MISSING_DATA)
    assert f.metric_values["max_gap"] == 0.30
    assert f.severity is Severity.WARNING


@criterion(3, "coverage oracle equivalence", limit=10)
def test_criterion_03_coverage_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = int(rng.integers(1, 5))
        sizes = rng.integers(1, 6, size=k)
        n = int(rng.integers(0, 201))
        rows = [tuple(f"v{int(rng.integers(0, s))}" for s in sizes) for _ in range(n)]
        tau = int(rng.integers(1, 4))
        attrs = [f"a{i}" for i in range(k)]
        ds = Dataset.from_rows("c", [(a, C) for a in attrs], rows)
        got = [(tuple(sorted(f.group.terms)), f.count, f.deficit) for f in coverage(ds, attrs, tau)]
        assert got == brute_coverage(rows, attrs, tau)


@criterion(4, "reweighing identity", limit=5)
def test_criterion_04_reweighing():
    rng = np.random.default_rng(4)
    cells = [("M", 1), ("M", 0), ("F", 1), ("F", 0)]
    for _ in range(200):
        rows = cells + [cells[i] for i in rng.integers(0, 4, size=int(rng.integers(0, 300)))]
        ds = Dataset.from_rows("r", [("sex", C), ("y", B)], rows)
        wv = reweigh(ds, "sex", "y")
        e = outcome_parity(ds, GroupKey.of(sex="M"), [GroupKey.of(sex="F")], "y", 1, weights=wv.weights)[0]
        assert abs(e.statistical_parity_difference) <= 1e-12
        assert abs(wv.weights.sum() - len(rows)) <= 1e-9


@criterion(5, "fairness hand oracle")
def test_criterion_05_fairness():
    ds = Dataset.from_rows(
        "eight",
        [("sex", C), ("pred", B), ("y", B)],
        [("M", 1, 1), ("M", 1, 1), ("M", 1, 0), ("M", 0, 0), ("F", 1, 1), ("F", 0, 1), ("F", 0, 0), ("F", 0, 0)],
    )
    profile = AuditProfile(
        schema=ds.schema, protected_attributes=("sex",), privileged_group={"sex": "M"}, outcome_column="y", prediction_column="pred"
    )
    e = fairness(ds, profile)["sex"].entries[0]
    assert (e.statistical_parity_difference, e.equal_opportunity_difference, e.average_odds_difference) == (-0.5, -0.5, -0.5)
    assert e.disparate_impact == 1 / 3
    m, f = GroupKey.of(sex="M"), GroupKey.of(sex="F")
    a = fairness_between(ds, m, [f], "pred", "y", 1).entries[0]
    b = fairness_between(ds, f, [m], "pred", "y", 1).entries[0]
    assert b.statistical_parity_difference == -a.statistical_parity_difference
    assert b.equal_opportunity_difference == -a.equal_opportunity_difference
    assert b.average_odds_difference == -a.average_odds_difference
    assert b.accuracy_difference == -a.accuracy_difference


# Strong convexity with modulus lambda bounds coefficient error by gradient
# norm over lambda, so 1e-6 agreement at lambda = 1e-4 needs a tight tolerance.
TIGHT = 1e-12


@criterion(6, "logistic training soundness", limit=30)
def test_criterion_06_logistic():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        fm = logistic_instance(rng)
        theta = rng.normal(size=fm.X.shape[1])
        assert fd_relative_error(theta, fm.X, fm.y, 1e-4) < 1e-4
    rng = np.random.default_rng(11)
    for _ in range(10):
        fm = logistic_instance(rng, n_rows=20, n_feat=3)
        a = train_logistic(fm, 1e-4, tol=TIGHT, max_iter=100_000, seed=0, init_scale=1.0)
        b = train_logistic(fm, 1e-4, tol=TIGHT, max_iter=100_000, seed=1, init_scale=1.0)
        assert a.converged and b.converged
        assert np.max(np.abs(a.theta - b.theta)) <= 1e-6
    rng = np.random.default_rng(12)
    for _ in range(10):
        fm = logistic_instance(rng, n_rows=15, n_feat=4)
        flipped = FeatureMatrix(fm.X, 1.0 - fm.y, fm.feature_names, fm.rows, 0, [], [])
        a = train_logistic(fm, 1e-4, tol=TIGHT, max_iter=100_000)
        b = train_logistic(flipped, 1e-4, tol=TIGHT, max_iter=100_000)
        assert np.max(np.abs(a.theta + b.theta)) <= 1e-6


@criterion(7, "informativeness sign recovery", limit=10)
def test_criterion_07_sign_recovery():
    for seed in range(10):
        spec = SynthSpec.from_dict(
            {
                "n_rows": 2000,
                "seed": seed,
                "categorical": [{"name": "sex", "probabilities": {"F": 0.5, "M": 0.5}}],
                "outcome": {"name": "y", "by": "sex", "favorable_probability": {"M": 0.8, "F": 0.2}},
            }
        )
        ds, _ = generate(spec)
        model = train_logistic(encode(ds, "y", ["sex"]), seed=seed)
        assert model.coefficient("sex=M") > 0 > model.coefficient("sex=F")
        profile = AuditProfile(schema=ds.schema, protected_attributes=("sex",), outcome_column="y")
        assert [f["value"] for f in importance(model, profile).flags] == ["F"]


@criterion(8, "KS reproduction and oracle", limit=1)
def test_criterion_08_ks():
    rng = np.random.default_rng(0)
    r = ks_two_sample(rng.normal(0, 0.5, 500), rng.normal(1, 0.75, 500), alpha=0.05)
    assert r.rejected and r.p_value < 1e-6
    x = rng.normal(size=50)
    same = ks_two_sample(x, x)
    assert (same.statistic, same.p_value) == (0.0, 1.0)
    rng = np.random.default_rng(8)
    for _ in range(100):
        na, nb = (int(v) for v in rng.integers(5, 30, size=2))
        a = rng.integers(0, 6, na).astype(float) if rng.random() < 0.5 else rng.normal(size=na)
        b = rng.integers(0, 6, nb).astype(float) if rng.random() < 0.5 else rng.normal(0.2, 1.1, size=nb)
        assert abs(ks_statistic(a, b) - brute_ks(a.tolist(), b.tolist())) <= 1e-12


def iid_spec(seed):
    return SynthSpec.from_dict(
        {
            "n_rows": 300,
            "seed": seed,
            "categorical": [
                {"name": "sex", "probabilities": {"F": 0.5, "M": 0.5}},
                {"name": "ethnicity", "probabilities": {"A": 0.5, "B": 0.3, "C": 0.2}},
            ],
            "numeric": [{"name": "bp", "mean": 120, "sd": 15}],
            "outcome": {"name": "y", "default": 0.4},
        }
    )


@criterion(9, "split diagnostics calibration", limit=20)
def test_criterion_09_calibration():
    rejections = Counter()
    planted_rejected = 0
    for run in range(100):
        ds, _ = generate(iid_spec(run))
        profile = AuditProfile(schema=ds.schema, protected_attributes=("sex", "ethnicity"), outcome_column="y")
        cmp = compare_splits(ds, holdout(ds, seed=run), profile)
        for r in cmp.results:
            rejections[r["attribute"]] += r["result"].rejected
        sex = ds.values("sex")
        females = [i for i, v in enumerate(sex) if v == "F"]
        test = females[: len(females) // 3]
        test_set = set(test)
        planted = compare_splits(ds, SplitSpec([i for i in range(ds.n_rows) if i not in test_set], test), profile)
        sex_result = next(r for r in planted.results if r["attribute"] == "sex")
        planted_rejected += sex_result["result"].rejected
    assert set(rejections) == {"sex", "ethnicity", "bp", "y"}
    assert all(c <= 10 for c in rejections.values()), dict(rejections)
    assert planted_rejected == 100


@criterion(10, "k-fold invariants", limit=1)
def test_criterion_10_kfold():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StratumTooSmallWarning)
        for n in (7, 10, 103):
            values = [("F", "M", "X")[i % 3] if i % 4 else "M" for i in range(n)]
            ds = Dataset.from_columns("k", [("g", C)], {"g": values})
            for K in (2, 5, 10, n):
                if K > n:
                    continue
                for strat in (None, "g"):
                    splits = kfold(ds, K, stratify_on=strat, seed=n + K)
                    tests = [set(s.test) for s in splits]
                    assert len(splits) == K
                    assert sum(len(t) for t in tests) == n and set().union(*tests) == set(range(n))
                    assert max(map(len, tests)) - min(map(len, tests)) <= 1
                    for s in splits:
                        assert not set(s.train) & set(s.test) and len(s.train) + len(s.test) == n
                    if strat:
                        for v in set(values):
                            counts = [sum(values[i] == v for i in t) for t in tests]
                            assert max(counts) - min(counts) <= 1
                    if K == n:
                        assert all(len(t) == 1 for t in tests)


@criterion(11, "imputation contracts", limit=5)
def test_criterion_11_imputation():
    rng = np.random.default_rng(11)
    scope = ["c", "x"]
    for _ in range(100):
        n = int(rng.integers(8, 40))
        rows = [[str(rng.choice(list("PQR"))), float(rng.normal()), float(rng.normal())] for _ in range(n)]
        planted = set()
        for i in range(5, n):
            for j in (0, 1):
                if rng.random() < 0.25:
                    rows[i][j] = MISSING
                    planted.add((i, j))
        ds = Dataset.from_rows("i", [("c", C), ("x", N), ("z", N)], [tuple(r) for r in rows])
        for name, spec in (
            ("single", None),
            ("model_based", ImputationSpec("model_based", scope, k=3)),
            ("deletion", ImputationSpec("deletion", scope)),
        ):
            if spec is None:
                out, log1 = impute(ds, ImputationSpec("mode", ["c"]))
                out, log2 = impute(out, ImputationSpec("mean", ["x"]))
                log = log1 + log2
            else:
                out, log = impute(ds, spec)
            per_attr = completeness(out).per_attribute
            assert [per_attr[a] for a in scope] == [1.0, 1.0]
            if name == "deletion":
                bad = {i for i, _ in planted}
                assert len(log) == len(bad)
                kept = [i for i in range(n) if i not in bad]
                assert [out.row(j) for j in range(out.n_rows)] == [ds.row(i) for i in kept]
            else:
                assert len(log) == len(planted)
                for attr in ("c", "x", "z"):
                    for i, v in enumerate(ds.values(attr)):
                        if v is not MISSING:
                            assert out.values(attr)[i] == v


def end_to_end(root: Path):
    """synth -> audit through the CLI; returns (exit code, report path, data path)."""
    doc = planted_spec()
    doc["profile"] = planted_profile_overrides()
    spec = root / "spec.json"
    spec.write_text(json.dumps(doc))
    syn = root / "syn"
    assert cli_main(["synth", "--spec", str(spec), "--out", str(syn)]) == 0
    data = syn / "planted.csv"
    code = cli_main(
        ["audit", str(data), "--profile", str(syn / "profile.json"), "--split", str(syn / "split.json"), "--out", str(root / "out")]
    )
    return code, root / "out" / "report.json", data


@criterion(12, "end-to-end audit", limit=10)
def test_criterion_12_end_to_end(tmp_path):
    code, report_path, data = end_to_end(tmp_path)
    assert code == 3
    report = json.loads(report_path.read_text())
    assert report["summary"]["families"] == ["Minority", "MissingData", "Informativeness", "Selection"]
    worst = {}
    rank = {s.value: s.rank for s in Severity}
    for f in report["findings"]:
        worst[f["bias_type"]] = max(worst.get(f["bias_type"], "None"), f["severity"], key=rank.get)
    assert worst == {"Minority": "Warning", "MissingData": "Warning", "Informativeness": "Warning", "Selection": "Critical"}
    ids = {f["id"]: f for f in report["findings"]}
    assert ids["minority/density/ethnicity"]["severity"] == "Warning"
    assert ids["missing_data/completeness"]["metric_values"]["flagged_attributes"] == ["bp"]
    assert [fl["value"] for fl in ids["informativeness/feature_importance"]["metric_values"]["flags"]] == ["F"]
    assert ids["selection/split_comparison"]["metric_values"]["flagged"]
    meta = read_sidecar(data)
    assert verify(data) and not meta.stale
    # the report orders by severity, the sidecar keeps pipeline order
    assert {f["id"]: f for f in meta.findings} == ids
    raw = bytearray(data.read_bytes())
    raw[-2] ^= 0x01
    data.write_bytes(bytes(raw))
    assert not verify(data) and read_sidecar(data).stale


@criterion(13, "determinism")
def test_criterion_13_determinism(tmp_path):
    docs = []
    for run in ("a", "b"):
        root = tmp_path / run
        root.mkdir()
        _, report_path, _ = end_to_end(root)
        doc = json.loads(report_path.read_text())
        doc.pop("timestamp")
        docs.append(json.dumps(doc, sort_keys=True, indent=2))
        assert report_path.read_text().count('"timestamp"') == 1
    assert docs[0] == docs[1]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
