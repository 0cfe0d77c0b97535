import json
from fractions import Fraction

import pytest

from jetcalc import BaseSpace, DiffPoly, parse
from multivec import PolyVector
from nambu import NambuData, nambu_bivector
from report_store import (
    FORMAT_VERSION,
    ResultStore,
    diffpoly_from_json,
    diffpoly_to_json,
    polyvector_from_json,
    polyvector_to_json,
)
from strategies import R3, R4


@pytest.fixture
def store():
    return ResultStore()


class TestEncoding:
    def test_term_layout(self):
        p = parse("-3/2*rho^2*a_xy*x", R3)
        (term,) = diffpoly_to_json(p)
        assert term["coeff"] == [-3, 2]
        assert sorted(term["factors"]) == sorted([
            ["x", [0, 0, 0]],
            ["a", [1, 1, 0]],
            ["rho", [0, 0, 0]],
            ["rho", [0, 0, 0]],
        ])

    def test_diffpoly_roundtrip(self):
        p = parse("rho*a_xyz-1/3*rho_x*a_y*a_zz+y^2", R3)
        assert diffpoly_from_json(json.loads(json.dumps(diffpoly_to_json(p))), R3) == p

    def test_polyvector_roundtrip(self):
        P = nambu_bivector(NambuData.symbolic(R4))
        assert polyvector_from_json(polyvector_to_json(P), R4) == P

    def test_wrong_dimension(self):
        data = diffpoly_to_json(parse("a_x", R3))
        with pytest.raises(ValueError):
            diffpoly_from_json(data, R4)


class TestResultStore:
    def test_save_load_delete(self, store):
        p = parse("a_x", R3)
        assert store.save("run", {"adot": p}, R3)
        assert store.names() == ["run"]
        assert store.load("run")["results"]["adot"] == p
        assert store.load("run")["metadata"]["dimension"] == 3
        assert store.delete("run")
        assert not store.delete("run")
        assert store.load("run") is None

    def test_export_import(self, store):
        results = {
            "adot": parse("2*rho*a_x*a_yz", R3),
            "bivector": nambu_bivector(NambuData.symbolic(R3)),
            "coefficients": [Fraction(1, 3), 2],
            "counts": {"adot": 228},
        }
        text = store.export_json(results, ResultStore.metadata(R3, name="velocities"))
        success, message, payload = store.import_json(text)
        assert success, message
        assert message == "Successfully imported results: velocities"
        assert payload["results"] == results
        assert store.load("velocities")["results"]["counts"] == {"adot": 228}

    def test_export_is_deterministic(self, store):
        metadata = ResultStore.metadata(R3)
        results = {"b": parse("rho", R3), "a": parse("a_x+a_y", R3)}
        assert store.export_json(results, metadata) == store.export_json(dict(reversed(results.items())), metadata)

    def test_import_renames(self, store):
        text = store.export_json({"n": 1}, ResultStore.metadata(R3))
        success, message, _ = store.import_json(text, name="mine")
        assert success
        assert "mine" in message
        assert "mine" in store.names()

    @pytest.mark.parametrize("text, fragment", [
        ("{not json", "Invalid JSON"),
        ("[]", "missing metadata"),
        ('{"metadata": {"version": "1.0"}}', "lacks"),
        ('{"metadata": {"version": "2.0", "saved_at": "", "dimension": 3}, "results": {}}', "Unsupported"),
        ('{"metadata": {"version": "1.0", "saved_at": "", "dimension": 3}}', "missing results"),
        (
            '{"metadata": {"version": "1.0", "saved_at": "", "dimension": 3},'
            ' "results": {"p": {"type": "diffpoly", "terms": [{"coeff": [1, 1], "factors": [["a", [1]]]}]}}}',
            "Error importing",
        ),
    ])
    def test_malformed_documents(self, store, text, fragment):
        success, message, payload = store.import_json(text)
        assert not success
        assert fragment in message
        assert payload is None
        assert store.names() == []

    def test_metadata(self):
        metadata = ResultStore.metadata(BaseSpace(4), "unit", "profiles")
        assert metadata["version"] == FORMAT_VERSION
        assert metadata["names"] == "xyzw"
        assert metadata["rho"] == "unit"
        assert metadata["name"] == "profiles"

    def test_zero_polynomial(self, store):
        text = store.export_json({"rhodot": DiffPoly.zero(R3), "x": PolyVector(R3, 1)}, ResultStore.metadata(R3))
        success, _, payload = store.import_json(text)
        assert success
        assert not payload["results"]["rhodot"]
        assert payload["results"]["x"].is_zero()
