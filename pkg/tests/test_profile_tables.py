import pandas as pd
import pytest

from civita import partition_by_profile
from jetcalc import parse
from profile_tables import (
    EXPECTED_3D_ADOT,
    EXPECTED_4D_A1DOT,
    EXPECTED_4D_UNIT_A1DOT,
    profile_table,
    swap_casimir_labels,
    table_matches,
    table_text,
    table_total,
)
from strategies import R3


@pytest.fixture
def sample():
    return parse("rho*a_x*a_yz+rho*a_y*a_xz+rho_x*a*a_yz", R3)


class TestProfileTable:
    def test_counts(self, sample):
        df = profile_table(sample)
        assert list(df.columns) == ["profile", "monomials", "expected", "match"]
        assert dict(zip(df["profile"], df["monomials"])) == {"a:02 rho:1": 1, "a:12 rho:0": 2}
        assert table_total(df) == 3
        assert table_matches(df)

    def test_accepts_partition(self, sample):
        assert profile_table(partition_by_profile(sample)).equals(profile_table(sample))

    def test_expected_counts(self, sample):
        df = profile_table(sample, {"a:12 rho:0": 2, "a:02 rho:1": 5, "a:111 rho:1": 1})
        assert len(df) == 3
        assert not table_matches(df)
        missing = df[df["profile"] == "a:111 rho:1"].iloc[0]
        assert missing["monomials"] == 0
        assert not missing["match"]
        assert str(df["expected"].dtype) == "Int64"

    def test_unexpected_profile_fails(self, sample):
        df = profile_table(sample, {"a:12 rho:0": 2})
        row = df[df["profile"] == "a:02 rho:1"].iloc[0]
        assert row["expected"] is pd.NA
        assert not row["match"]
        assert not table_matches(df)

    def test_only_unknown_labels_expected(self, sample):
        df = profile_table(sample, {"a:9 rho:9": 0})
        assert not df[df["profile"] != "a:9 rho:9"]["match"].any()
        assert not table_matches(df)

    def test_no_expectations_always_match(self, sample):
        assert profile_table(sample)["match"].all()

    def test_text(self, sample):
        text = table_text(profile_table(sample))
        assert text.splitlines()[0].split() == ["profile", "monomials", "expected", "match"]
        assert "a:12 rho:0" in text


class TestPublishedCounts:
    def test_totals(self):
        assert sum(EXPECTED_3D_ADOT.values()) == 228
        assert sum(EXPECTED_4D_UNIT_A1DOT.values()) == 9024
        assert sum(EXPECTED_4D_A1DOT.values()) == 33048

    def test_unit_density_keeps_rho_free_classes(self):
        stripped = {
            label.replace(" rho:000", ""): count
            for label, count in EXPECTED_4D_A1DOT.items()
            if label.endswith("rho:000")
        }
        assert stripped == EXPECTED_4D_UNIT_A1DOT

    def test_swap_labels(self):
        assert swap_casimir_labels({"a1:1123 a2:122 rho:001": 7}) == {"a1:122 a2:1123 rho:001": 7}
        assert swap_casimir_labels(EXPECTED_4D_UNIT_A1DOT) == {
            "a1:122 a2:1123": 4512,
            "a1:112 a2:1223": 4512,
        }
        assert swap_casimir_labels(swap_casimir_labels(EXPECTED_4D_A1DOT)) == EXPECTED_4D_A1DOT
