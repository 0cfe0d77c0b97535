from itertools import permutations

import pytest

from civita import (
    CivitaFormula,
    MarkerMonomial,
    alternating_sum,
    collapse_search,
    diagonal_sum,
    enumerate_partitions,
    expand_civita_formula,
    extra_symmetry_check,
    greedy_skew_decompose,
    is_zero_marker,
    load_civita_fixture,
    orbit_representatives,
    orbit_sum,
    parse_marker,
    partition_by_profile,
    profile_counts,
    profile_label,
    proportionality,
    reassemble_orbits,
    span_rank,
)
from cli import VELOCITY_FIXTURE
from errors import FixtureFormatError, InvalidPartitionError, SymmetryError
from graphflow import extract_density_velocity, reassemble_flow, tetra_flow
from jetcalc import BaseSpace, DiffPoly, load_expression_fixture, parse, permute_coordinates
from multivec import sort_sign
from nambu import NambuData, nambu_bivector
from profile_tables import (
    EXPECTED_3D_ADOT,
    EXPECTED_3D_RHODOT,
    EXPECTED_4D_A1DOT,
    EXPECTED_4D_UNIT_A1DOT,
    swap_casimir_labels,
)

R2 = BaseSpace(2)
FIXTURE_DIR = VELOCITY_FIXTURE.parent


def marker(text, tuples=2, space=R2):
    _, m = parse_marker(text, space, tuples)
    return m


@pytest.fixture(scope="module")
def published():
    return load_expression_fixture(VELOCITY_FIXTURE, BaseSpace(3))


@pytest.fixture(scope="module")
def collapsed_3d():
    return load_civita_fixture(FIXTURE_DIR / "collapsed_g3_3D.txt")[2]


class TestMarkers:
    def test_zero_marker(self):
        m1 = marker("rho_u1*rho_v1*rho_u2v2")
        assert is_zero_marker(m1)

    def test_nonzero_marker(self):
        m2 = marker("rho_u1*rho_v2*rho_u2v1")
        assert not is_zero_marker(m2)
        assert alternating_sum(m2) == parse("2*rho_x*rho_y*rho_xy-rho_y^2*rho_xx-rho_x^2*rho_yy", R2)

    def test_symmetric_collision_vanishes(self):
        assert is_zero_marker(marker("rho_u1v1*rho_u2v2"))

    def test_same_expression_from_four_markers(self):
        expected = parse("rho_x^2*rho_yy-2*rho_x*rho_y*rho_xy+rho_y^2*rho_xx", R2)
        assert alternating_sum(marker("rho_u1*rho_u2*rho_v1v2")) == expected
        assert alternating_sum(marker("rho_v1*rho_v2*rho_u1u2")) == expected
        assert alternating_sum(marker("rho_u1*rho_v2*rho_v1u2")) == -expected
        assert alternating_sum(marker("rho_v1*rho_u2*rho_u1v2")) == -expected

    def test_partition_choice_matters(self):
        m3 = marker("a_u1*rho_u2*a_v1v3*rho_u3v2", tuples=3)
        m4 = marker("a_u1*rho_u2*a_v2v3*rho_u3v1", tuples=3)
        s3, s4 = alternating_sum(m3), alternating_sum(m4)
        common = parse("a_x*rho_x*a_yy*rho_xy", R2)
        shared = next(iter(common.terms))
        assert shared in s3.terms and shared in s4.terms
        assert s3 != s4
        assert proportionality(s3, s4) is None
        assert span_rank([s3, s4]) == 2

    def test_same_base_monomial(self):
        m3 = marker("a_u1*rho_u2*a_v1v3*rho_u3v2", tuples=3)
        m4 = marker("a_u1*rho_u2*a_v2v3*rho_u3v1", tuples=3)
        assert m3.base_monomial() == m4.base_monomial()
        assert profile_label(m3.base_monomial()) == "a:12 rho:12"

    def test_diagonal_restriction(self):
        m = marker("rho_u1*rho_v2*rho_u2v1")
        expected = DiffPoly.zero(R2)
        base = DiffPoly(R2, {m.base_monomial(): 1})
        for perm in permutations(range(2)):
            sign, _ = sort_sign(perm)
            expected = expected + permute_coordinates(base, perm) * (sign ** 2)
        assert diagonal_sum(m) == expected

    def test_coefficient_scales(self):
        m = marker("rho_u1*rho_v2*rho_u2v1")
        assert alternating_sum(m.with_coefficient(3)) == alternating_sum(m) * 3

    def test_invalid_partition(self):
        with pytest.raises(InvalidPartitionError):
            MarkerMonomial(R2, 2, ((0, ((0, 0), (0, 0))),))
        with pytest.raises(InvalidPartitionError):
            MarkerMonomial(R2, 2, ((0, ((0, 0), (0, 1))),))

    def test_marker_text_roundtrip(self, collapsed_3d):
        formula = collapsed_3d["adot"]
        space = BaseSpace(3)
        reparsed = CivitaFormula(space, 3, [parse_marker(line, space, 3) for line in formula.to_text().splitlines()])
        assert len(reparsed) == len(formula)
        assert expand_civita_formula(reparsed) == expand_civita_formula(formula)


class TestPartitions:
    def test_count(self):
        mono = next(iter(parse("a_x*rho_x*a_yy*rho_xy", R2).terms))
        partitions = list(enumerate_partitions(mono, R2, 3))
        # x letters are pinned in order, y letters run over S_3
        assert len(partitions) == 6
        assert all(p.base_monomial() == mono for p in partitions)

    def test_uneven_letters(self):
        mono = next(iter(parse("a_xx*rho_y", R2).terms))
        with pytest.raises(InvalidPartitionError):
            list(enumerate_partitions(mono, R2, 2))

    def test_free_index(self):
        mono = next(iter(parse("a_x*rho_y", R2).terms))
        partitions = list(enumerate_partitions(mono, R2, 1, free=None))
        assert len(partitions) == 1
        with pytest.raises(InvalidPartitionError):
            list(enumerate_partitions(mono, R2, 1, free=0))


class TestProfiles:
    def test_published_term(self):
        mono = next(iter(parse("-12*rho^2*a_x*rho_y*a_xy*a_zz*a_xyz", BaseSpace(3)).terms))
        assert profile_label(mono) == "a:1223 rho:001"

    def test_same_profile_different_markers(self):
        assert profile_label(marker("rho_u1*rho_v1*rho_u2v2").base_monomial()) == "rho:112"

    def test_velocity_tables(self, published):
        assert profile_counts(published["adot"]) == EXPECTED_3D_ADOT
        assert profile_counts(published["rhodot"]) == EXPECTED_3D_RHODOT

    def test_partition_reassembles(self, published):
        parts = partition_by_profile(published["rhodot"])
        total = DiffPoly.zero(BaseSpace(3))
        for part in parts.values():
            total = total + part
        assert total == published["rhodot"]


class TestSkewDecomposition:
    @pytest.mark.parametrize("name, count", [("adot", 38), ("rhodot", 71)])
    def test_representatives(self, published, name, count):
        p = published[name]
        representatives = greedy_skew_decompose(p)
        assert len(representatives) == count
        assert reassemble_orbits(p.space, representatives, 3) == p

    @pytest.mark.parametrize("name", ["adot", "rhodot"])
    def test_diagonal_skew_symmetry(self, published, name):
        p = published[name]
        for perm in permutations(range(3)):
            sign, _ = sort_sign(perm)
            assert permute_coordinates(p, perm) == p * sign

    def test_single_orbit(self):
        space = BaseSpace(3)
        mono = next(iter(parse("rho^2*a_x*rho_y*a_xy*a_zz*a_xyz", space).terms))
        p = DiffPoly.from_terms(space, orbit_sum(mono, 3, 1))
        assert len(greedy_skew_decompose(p)) == 1

    def test_asymmetric_input(self):
        p = parse("rho_x*a_y*a_z", BaseSpace(3))
        with pytest.raises(SymmetryError):
            greedy_skew_decompose(p)


class TestFormulas:
    def test_collapsed_velocities_expand_to_published(self, published, collapsed_3d):
        assert len(collapsed_3d["adot"]) == 3
        assert len(collapsed_3d["rhodot"]) == 5
        assert expand_civita_formula(collapsed_3d["adot"]) == published["adot"]
        assert expand_civita_formula(collapsed_3d["rhodot"]) == published["rhodot"]

    def test_parallel_expansion_agrees(self, collapsed_3d):
        formula = collapsed_3d["adot"]
        assert expand_civita_formula(formula, jobs=2) == expand_civita_formula(formula)

    def test_mixed_formula_rejected(self):
        scalar = marker("rho_u1*rho_v2*rho_u2v1")
        other = marker("rho_u1*rho_v1v2*rho_u2", tuples=2)
        with pytest.raises(InvalidPartitionError):
            CivitaFormula(R2, 3, [(1, scalar), (1, other)])

    def test_free_index_gives_vector_field(self):
        space = BaseSpace(3)
        formula = CivitaFormula(space, 1, [parse_marker("rho_u1*a_v1*d_w1", space, 1)])
        field = expand_civita_formula(formula)
        assert field.degree == 1
        # eps^{ijk} rho_i a_j d_k
        assert field.component((2,)) == parse("rho_x*a_y-rho_y*a_x", space)

    def test_fixture_errors(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("dim = 3\ntuples = 3\n2*a_u1*a_u2\n")
        with pytest.raises(FixtureFormatError):
            load_civita_fixture(bad)
        bad.write_text("dim = 3\n[x]\n2*a_u1\n")
        with pytest.raises(FixtureFormatError):
            load_civita_fixture(bad)
        bad.write_text("dim = 3\ntuples = 1\n[x]\n2*a_u1*a_q2\n")
        with pytest.raises(FixtureFormatError):
            load_civita_fixture(bad)


class TestCollapseSearch:
    @pytest.mark.standard
    @pytest.mark.parametrize("name, markers", [("adot", 3), ("rhodot", 5)])
    def test_reproduces_velocity(self, published, name, markers):
        formula = collapse_search(published[name], 3)
        assert len(formula) == markers
        assert expand_civita_formula(formula) == published[name]

    def test_rejects_uneven_targets(self):
        with pytest.raises(InvalidPartitionError):
            collapse_search(parse("rho_x*a_yy", BaseSpace(3)), 1)

    @pytest.mark.standard
    @pytest.mark.parametrize("name", ["adot", "rhodot"])
    def test_extra_symmetry_sample(self, published, name):
        for label, part in partition_by_profile(published[name]).items():
            report = extra_symmetry_check(part, 3, monomial_limit=2)
            assert report.symmetry_holds, label
            assert report.minimal_rank == 1
            assert report.as_dict()["profile"] == label

    @pytest.mark.heavy
    @pytest.mark.parametrize("name", ["adot", "rhodot"])
    def test_extra_symmetry_exhaustive(self, published, name):
        for label, part in partition_by_profile(published[name]).items():
            report = extra_symmetry_check(part, 3, jobs=4)
            assert report.monomials_examined == len(orbit_representatives(part.terms, 3))
            assert report.symmetry_holds, label
            assert report.nonproportional_markers == 0
            assert report.minimal_rank == 1

    @pytest.mark.standard
    def test_four_dimensional_unit_density(self):
        _, _, formulas = load_civita_fixture(FIXTURE_DIR / "collapsed_g3_4D_unit.txt")
        target = expand_civita_formula(formulas["a1dot"])
        found = collapse_search(target, 3)
        assert len(found) == 2
        assert expand_civita_formula(found) == target

        parts = partition_by_profile(target)
        coefficients = []
        for coeff, m in formulas["a1dot"].terms:
            total = alternating_sum(m)
            label = profile_label(next(iter(total.terms)))
            assert proportionality(parts[label], total) == coeff
            coefficients.append(coeff)
        assert sorted(coefficients) == [3, 6]

    def test_extra_symmetry_needs_one_profile(self, published):
        with pytest.raises(InvalidPartitionError):
            extra_symmetry_check(published["adot"], 3)


class TestFourDimensions:
    @pytest.mark.standard
    def test_unit_density(self):
        _, tuples, formulas = load_civita_fixture(FIXTURE_DIR / "collapsed_g3_4D_unit.txt")
        assert tuples == 3
        a1dot = expand_civita_formula(formulas["a1dot"])
        a2dot = expand_civita_formula(formulas["a2dot"])
        assert profile_counts(a1dot) == EXPECTED_4D_UNIT_A1DOT
        assert profile_counts(a2dot) == swap_casimir_labels(EXPECTED_4D_UNIT_A1DOT)

    @pytest.mark.heavy
    def test_symbolic_density(self):
        _, _, formulas = load_civita_fixture(FIXTURE_DIR / "collapsed_g3_4D.txt")
        a1dot = expand_civita_formula(formulas["a1dot"], jobs=4)
        assert len(a1dot) == sum(EXPECTED_4D_A1DOT.values()) == 33048
        assert profile_counts(a1dot) == EXPECTED_4D_A1DOT
        for label, part in partition_by_profile(a1dot).items():
            report = extra_symmetry_check(part, 3, jobs=4)
            if label == "a1:1123 a2:112 rho:001":
                assert report.minimal_rank == 2
                assert not report.symmetry_holds
            else:
                assert report.minimal_rank == 1, label
                assert report.symmetry_holds, label

    @pytest.mark.heavy
    def test_symbolic_density_velocity(self):
        _, _, formulas = load_civita_fixture(FIXTURE_DIR / "collapsed_g3_4D.txt")
        adots = tuple(expand_civita_formula(formulas[name], jobs=4) for name in ("a1dot", "a2dot"))
        assert profile_counts(adots[1]) == swap_casimir_labels(EXPECTED_4D_A1DOT)
        data = NambuData.symbolic(BaseSpace(4))
        flow = tetra_flow(nambu_bivector(data))
        rhodot = extract_density_velocity(data, flow, adots)
        assert len(rhodot) == 90024
        assert reassemble_flow(data, adots, rhodot) == flow
