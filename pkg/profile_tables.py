"""
Profile Tables
Monomial counts per differential profile, side by side with the published counts
"""

import pandas as pd

from civita import partition_by_profile

# Casimir velocity and density velocity of the tetrahedral flow over R^3
EXPECTED_3D_ADOT = {
    "a:1113 rho:111": 54,
    "a:1123 rho:011": 102,
    "a:1223 rho:001": 72,
}

EXPECTED_3D_RHODOT = {
    "a:111 rho:1113": 54,
    "a:112 rho:1112": 102,
    "a:112 rho:0113": 102,
    "a:122 rho:0112": 96,
    "a:122 rho:0013": 72,
}

# Velocity of the first Casimir over R^4 with symbolic density
EXPECTED_4D_A1DOT = {
    "a1:1123 a2:122 rho:000": 4512,
    "a1:1223 a2:112 rho:000": 4512,
    "a1:1113 a2:122 rho:001": 3168,
    "a1:1123 a2:112 rho:001": 7872,
    "a1:1223 a2:111 rho:001": 3168,
    "a1:1113 a2:112 rho:011": 3984,
    "a1:1123 a2:111 rho:011": 3984,
    "a1:1113 a2:111 rho:111": 1848,
}

# rho = 1 keeps only the two rho:000 classes
EXPECTED_4D_UNIT_A1DOT = {
    "a1:1123 a2:122": 4512,
    "a1:1223 a2:112": 4512,
}


def profile_table(classes, expected=None):
    """
    One row per profile: monomial count, published count and whether they agree.
    classes maps profile labels to DiffPolys, or is a DiffPoly to be split.
    With expected counts given, a profile absent from them never matches.
    """
    if not isinstance(classes, dict):
        classes = partition_by_profile(classes)
    compare = expected is not None
    expected = expected or {}

    data = []
    for label in sorted(set(classes) | set(expected)):
        part = classes.get(label)
        count = len(part) if part is not None else 0
        want = expected.get(label)
        data.append({
            "profile": label,
            "monomials": count,
            "expected": want,
            "match": want == count if compare else True,
        })

    df = pd.DataFrame(data, columns=["profile", "monomials", "expected", "match"])
    df["expected"] = df["expected"].astype("Int64")
    return df


def table_matches(df):
    return bool(df["match"].all())


def table_total(df):
    return int(df["monomials"].sum())


def table_text(df):
    """Fixed-width text rendering for the text output format"""
    return df.to_string(index=False)


def swap_casimir_labels(expected):
    """Counts for the second Casimir velocity: the roles of a1 and a2 exchange"""
    swapped = {}
    for label, count in expected.items():
        parts = dict(part.split(":") for part in label.split())
        parts["a1"], parts["a2"] = parts["a2"], parts["a1"]
        swapped[" ".join(f"{name}:{parts[name]}" for name in ("a1", "a2", "rho") if name in parts)] = count
    return swapped
