"""Hand-built datasets and specs shared by the test modules."""

import random

from biasaudit.dataset import MISSING, ColumnType, Dataset
from biasaudit.profile import AuditProfile

C, N, B = ColumnType.CATEGORICAL, ColumnType.NUMERIC, ColumnType.BINARY_LABEL


def density_dataset(seed=0):
    """100 rows: 65/10/25 Caucasian/Black/Asiatic, 80/20 Male/Female."""
    eth = ["Caucasian"] * 65 + ["Black"] * 10 + ["Asiatic"] * 25
    sex = ["Male"] * 80 + ["Female"] * 20
    random.Random(seed).shuffle(sex)
    return Dataset.from_columns("density", [("ethnicity", C), ("sex", C)], {"ethnicity": eth, "sex": sex})


# per ethnicity: (female rows, male rows, female rows missing bp)
COMPLETENESS_LAYOUT = {"Caucasian": (30, 70, 5), "Black": (7, 13, 3), "Asiatic": (7, 3, 3)}


def completeness_dataset():
    """130 rows whose ``bp`` completeness per group is 0.95/0.85/0.70 and 0.75/1.00.

    Caucasian 5/100, Black 3/20 and Asiatic 3/10 rows lack ``bp``; all 11 are
    female, so 11 of 44 female rows lack it and no male row does.
    """
    rows = []
    for eth, (n_f, n_m, miss) in COMPLETENESS_LAYOUT.items():
        for i in range(n_f):
            rows.append((eth, "Female", MISSING if i < miss else 120.0 + i))
        for i in range(n_m):
            rows.append((eth, "Male", 125.0 + i))
    return Dataset.from_rows("completeness", [("ethnicity", C), ("sex", C), ("bp", N)], rows)


def completeness_profile():
    return AuditProfile(schema=(("ethnicity", C), ("sex", C), ("bp", N)), protected_attributes=("ethnicity", "sex"))


def planted_spec(seed=7, n_rows=1500):
    """Generator document planting all four bias types.

    ethnicity C is a 5% minority; bp is missing for 20% of female rows only;
    the favorable outcome rate is 0.8 for M and 0.2 for F; the last third of
    rows is a shifted test block (older, mostly female).
    """
    return {
        "name": "planted",
        "n_rows": n_rows,
        "seed": seed,
        "categorical": [
            {"name": "ethnicity", "probabilities": {"A": 0.60, "B": 0.35, "C": 0.05}},
            {"name": "sex", "probabilities": {"F": 0.5, "M": 0.5}},
        ],
        "numeric": [{"name": "bp", "mean": 120, "sd": 15}, {"name": "age", "mean": 50, "sd": 10}],
        "outcome": {"name": "y", "by": "sex", "favorable_probability": {"M": 0.8, "F": 0.2}},
        "missingness": [{"attribute": "bp", "group": {"sex": "F"}, "probability": 0.2}],
        "shift": {
            "fraction": 0.33,
            "numeric": {"age": {"mean": 60, "sd": 10}},
            "categorical": {"sex": {"F": 0.8, "M": 0.2}},
        },
    }


def planted_profile_overrides():
    return {
        "privileged_group": {"sex": "M", "ethnicity": "A"},
        "missingness": {"bp": {"mechanism": "MNAR", "rationale": "planted for female rows only"}},
    }
