"""Seeded synthetic datasets with planted bias, used as ground truth.

Randomness comes from NumPy's PCG64 generator (``numpy.random.default_rng``)
seeded with the generator document's integer seed; each column consumes one vector of
draws in declaration order, so a document and seed fully determine the output.

Generator document::

    {
      "name": "demo", "n_rows": 1000, "seed": 1,
      "categorical": [{"name": "sex", "probabilities": {"F": 0.5, "M": 0.5}}],
      "numeric": [{"name": "bp", "mean": 120, "sd": 15,
                   "by": "sex", "groups": {"F": {"mean": 110, "sd": 12}}}],
      "outcome": {"name": "y", "by": "sex",
                  "favorable_probability": {"M": 0.8, "F": 0.2}, "default": 0.5},
      "prediction": {"name": "pred", "by": "sex", "flip_probability": {"F": 0.3}, "default": 0.1},
      "missingness": [{"attribute": "bp", "group": {"sex": "F"}, "probability": 0.2}],
      "shift": {"fraction": 0.33,
                "numeric": {"bp": {"mean": 130, "sd": 20}},
                "categorical": {"sex": {"F": 0.8, "M": 0.2}}}
    }

The shift block is the last ``round(fraction * n_rows)`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import MISSING, Column, ColumnType, Dataset
from .errors import InvalidSpec

PROB_TOL = 1e-12


def _check_probs(probs: dict, where: str):
    if not probs:
        raise InvalidSpec(f"{where}: empty probability vector")
    if any((not isinstance(p, (int, float))) or p < 0 for p in probs.values()):
        raise InvalidSpec(f"{where}: probabilities must be non-negative numbers")
    if abs(sum(probs.values()) - 1.0) > PROB_TOL:
        raise InvalidSpec(f"{where}: probabilities sum to {sum(probs.values())!r}, not 1")


@dataclass
class SynthSpec:
    n_rows: int
    seed: int = 0
    name: str = "synth"
    categorical: list = field(default_factory=list)
    numeric: list = field(default_factory=list)
    outcome: dict | None = None
    prediction: dict | None = None
    missingness: list = field(default_factory=list)
    shift: dict | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        allowed = {"n_rows", "seed", "name", "categorical", "numeric", "outcome", "prediction", "missingness", "shift"}
        extra = set(doc) - allowed
        if extra:
            raise InvalidSpec(f"unknown synth spec fields {sorted(extra)}")
        if "n_rows" not in doc:
            raise InvalidSpec("synth spec needs n_rows")
        spec = cls(**doc)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_rows": self.n_rows,
            "seed": self.seed,
            "categorical": self.categorical,
            "numeric": self.numeric,
            "outcome": self.outcome,
            "prediction": self.prediction,
            "missingness": self.missingness,
            "shift": self.shift,
        }

    def validate(self) -> None:
        if isinstance(self.n_rows, bool) or not isinstance(self.n_rows, int) or self.n_rows < 1:
            raise InvalidSpec("n_rows must be a positive integer")
        if not isinstance(self.seed, int):
            raise InvalidSpec("seed must be an integer")
        names = [c["name"] for c in self.categorical] + [c["name"] for c in self.numeric]
        names += [d["name"] for d in (self.outcome, self.prediction) if d]
        if len(set(names)) != len(names) or not all(names):
            raise InvalidSpec(f"column names must be unique and non-empty: {names}")
        cats = {c["name"]: c for c in self.categorical}
        for c in self.categorical:
            _check_probs(c.get("probabilities", {}), f"categorical {c['name']!r}")
        for c in self.numeric:
            if c.get("sd", 0) <= 0:
                raise InvalidSpec(f"numeric {c['name']!r}: sd must be > 0")
            if "by" in c and c["by"] not in cats:
                raise InvalidSpec(f"numeric {c['name']!r}: 'by' must name a categorical column")
            for g, params in c.get("groups", {}).items():
                if params.get("sd", c["sd"]) <= 0:
                    raise InvalidSpec(f"numeric {c['name']!r} group {g!r}: sd must be > 0")
        for label, key in ((self.outcome, "favorable_probability"), (self.prediction, "flip_probability")):
            if not label:
                continue
            if "by" in label and label["by"] not in cats:
                raise InvalidSpec(f"{label['name']!r}: 'by' must name a categorical column")
            for p in list(label.get(key, {}).values()) + [label.get("default", 0.5)]:
                if not 0.0 <= p <= 1.0:
                    raise InvalidSpec(f"{label['name']!r}: probabilities must lie in [0, 1]")
        if self.prediction and not self.outcome:
            raise InvalidSpec("prediction needs an outcome")
        for rule in self.missingness:
            if rule.get("attribute") not in names:
                raise InvalidSpec(f"missingness rule names unknown attribute {rule.get('attribute')!r}")
            if not 0.0 <= rule.get("probability", -1) <= 1.0:
                raise InvalidSpec("missingness probability must lie in [0, 1]")
            for a in rule.get("group", {}):
                if a not in cats:
                    raise InvalidSpec(f"missingness group attribute {a!r} is not categorical")
        if self.shift:
            if not 0.0 < self.shift.get("fraction", 0) < 1.0:
                raise InvalidSpec("shift fraction must lie in (0, 1)")
            for a, probs in self.shift.get("categorical", {}).items():
                if a not in cats:
                    raise InvalidSpec(f"shift names unknown categorical {a!r}")
                _check_probs(probs, f"shift categorical {a!r}")
            num = {c["name"] for c in self.numeric}
            for a, params in self.shift.get("numeric", {}).items():
                if a not in num or params.get("sd", 1) <= 0:
                    raise InvalidSpec(f"shift numeric {a!r}: unknown column or sd <= 0")

    def schema(self) -> list:
        out = [(c["name"], ColumnType.CATEGORICAL) for c in self.categorical]
        out += [(c["name"], ColumnType.NUMERIC) for c in self.numeric]
        out += [(d["name"], ColumnType.BINARY_LABEL) for d in (self.outcome, self.prediction) if d]
        return out


def _draw_categorical(u, block, main_probs, shift_probs):
    # inverse-CDF lookup in declaration order of the values
    out = np.empty(u.size, dtype=object)
    for probs, rows in ((main_probs, ~block), (shift_probs or main_probs, block)):
        vals = list(probs)
        cdf = np.cumsum([probs[v] for v in vals])
        idx = np.minimum(np.searchsorted(cdf, u[rows], side="right"), len(vals) - 1)
        out[rows] = np.array(vals, dtype=object)[idx]
    return out


def _per_row(by_values, table: dict, default: float, n: int) -> np.ndarray:
    if by_values is None:
        return np.full(n, default, dtype=float)
    return np.array([table.get(v, default) for v in by_values], dtype=float)


def generate(spec: SynthSpec):
    """Build the dataset and a ground-truth record of what was planted."""
    spec.validate()
    n = spec.n_rows
    rng = np.random.default_rng(spec.seed)
    block = np.zeros(n, dtype=bool)
    shift = spec.shift or {}
    if shift:
        m = int(round(shift["fraction"] * n))
        block[n - m :] = True
    cols = {}
    truth = {"seed": spec.seed, "n_rows": n, "generator": "numpy.PCG64", "spec": spec.to_dict()}
    realized = {"categorical": {}, "missing": {}, "outcome_rates": {}}
    for c in spec.categorical:
        u = rng.random(n)
        vals = _draw_categorical(u, block, c["probabilities"], shift.get("categorical", {}).get(c["name"]))
        cols[c["name"]] = vals
        realized["categorical"][c["name"]] = {v: int(np.sum(vals == v)) for v in c["probabilities"]}
    for c in spec.numeric:
        z = rng.standard_normal(n)
        by = cols[c["by"]] if "by" in c else None
        groups = c.get("groups", {})
        mean = _per_row(by, {g: p.get("mean", c["mean"]) for g, p in groups.items()}, c["mean"], n)
        sd = _per_row(by, {g: p.get("sd", c["sd"]) for g, p in groups.items()}, c["sd"], n)
        if c["name"] in shift.get("numeric", {}):
            params = shift["numeric"][c["name"]]
            mean[block] = params.get("mean", c["mean"])
            sd[block] = params.get("sd", c["sd"])
        cols[c["name"]] = mean + sd * z
    if spec.outcome:
        o = spec.outcome
        u = rng.random(n)
        by = cols[o["by"]] if "by" in o else None
        p = _per_row(by, o.get("favorable_probability", {}), o.get("default", 0.5), n)
        y = (u < p).astype(int)
        cols[o["name"]] = y
        if by is not None:
            realized["outcome_rates"] = {
                str(v): float(y[by == v].mean()) for v in sorted(set(by)) if np.any(by == v)
            }
    if spec.prediction:
        pr = spec.prediction
        u = rng.random(n)
        by = cols[pr["by"]] if "by" in pr else None
        p = _per_row(by, pr.get("flip_probability", {}), pr.get("default", 0.1), n)
        y = cols[spec.outcome["name"]]
        cols[pr["name"]] = np.where(u < p, 1 - y, y)
    missing = {name: np.zeros(n, dtype=bool) for name in cols}
    for rule in spec.missingness:
        u = rng.random(n)
        mask = np.ones(n, dtype=bool)
        for a, v in rule.get("group", {}).items():
            mask &= cols[a] == v
        missing[rule["attribute"]] |= mask & (u < rule["probability"])
    columns = []
    for name, kind in spec.schema():
        raw = cols[name]
        gaps = missing[name]
        if kind is ColumnType.NUMERIC:
            cells = tuple(MISSING if g else float(x) for x, g in zip(raw, gaps))
        elif kind is ColumnType.BINARY_LABEL:
            cells = tuple(MISSING if g else int(x) for x, g in zip(raw, gaps))
        else:
            cells = tuple(MISSING if g else str(x) for x, g in zip(raw, gaps))
        columns.append(Column(name, kind, cells))
        realized["missing"][name] = int(gaps.sum())
    truth["realized"] = realized
    truth["missing_cells"] = {name: [int(i) for i in np.flatnonzero(m)] for name, m in missing.items() if m.any()}
    truth["shift_rows"] = [int(i) for i in np.flatnonzero(block)]
    ds = Dataset(spec.name, tuple(columns))
    return ds, truth


def split_from_truth(truth: dict):
    """Train = unshifted rows, test = shift block; ``None`` without a shift plan."""
    from .selection import SplitSpec

    test = truth.get("shift_rows") or []
    if not test:
        return None
    test_set = set(test)
    return SplitSpec([i for i in range(truth["n_rows"]) if i not in test_set], test)

