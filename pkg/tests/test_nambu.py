from fractions import Fraction
from itertools import permutations

import pytest
import sympy
from hypothesis import given, settings

from errors import ConfigurationError
from jetcalc import BaseSpace, DiffPoly, parse, permute_coordinates, to_text
from multivec import PolyVector, euler_field, homogeneous_power_field, schouten, sort_sign
from nambu import (
    NambuData,
    casimir_pde_residuals,
    casimir_search,
    coordinate_monomials,
    default_casimir_names,
    hamiltonian_field,
    jacobi_check,
    minors,
    nambu_bivector,
    nambu_via_schouten,
    power_wedge_euler,
    preset_bivector,
)
from strategies import R3, R4, polynomials


def poly(text, space=R3):
    return parse(text, space)


class TestExamples:
    def test_euler_top(self):
        P = preset_bivector("euler-top", R3)
        assert P[(0, 1)] == poly("z")
        assert P[(1, 2)] == poly("x")
        assert P[(2, 0)] == poly("y")

    def test_log_symplectic(self):
        P = preset_bivector("log-symplectic", R3)
        assert P[(0, 1)] == poly("1/2*x*y")
        assert P[(1, 2)] == poly("1/2*y*z")
        assert P[(2, 0)] == poly("1/2*z*x")

    def test_symbolic_components(self):
        P = nambu_bivector(NambuData.symbolic(R3))
        assert P[(0, 1)] == poly("rho*a_z")
        assert P[(1, 2)] == poly("rho*a_x")
        assert P[(2, 0)] == poly("rho*a_y")

    def test_unit_density(self):
        P = nambu_bivector(NambuData.symbolic(R3, density=False))
        assert P[(0, 1)] == poly("a_z")

    def test_hamiltonian_field(self):
        P = preset_bivector("euler-top", R3)
        Y = hamiltonian_field(P, poly("x"))
        assert Y == PolyVector.vector_field(R3, [DiffPoly.zero(R3), poly("z"), poly("-y")])

    @pytest.mark.parametrize("name", ["spinning-top", "power-wedge-", "power-wedge-two"])
    def test_unknown_preset(self, name):
        with pytest.raises(ConfigurationError):
            preset_bivector(name, R3)

    def test_casimir_count_checked(self):
        with pytest.raises(ValueError):
            NambuData(R4, None, (DiffPoly.jet(R4, "a1"),))

    def test_names(self):
        assert default_casimir_names(3) == ("a",)
        assert default_casimir_names(4) == ("a1", "a2")
        data = NambuData.symbolic(R4)
        assert data.casimir_symbols == ("a1", "a2")
        assert data.density_symbol == "rho"
        assert data.is_symbolic
        assert not NambuData.from_text(R3, ["x*y"]).is_symbolic


class TestPoisson:
    @pytest.mark.parametrize("space", [R3, R4])
    @pytest.mark.parametrize("density", [True, False])
    def test_jacobi_symbolic(self, space, density):
        P = nambu_bivector(NambuData.symbolic(space, density))
        assert jacobi_check(P).is_zero()

    @pytest.mark.parametrize("name", ["euler-top", "log-symplectic", "power-wedge-2", "power-wedge-3"])
    def test_jacobi_presets(self, name):
        assert jacobi_check(preset_bivector(name, R3)).is_zero()

    @pytest.mark.parametrize("space", [R3, R4])
    def test_casimirs_commute(self, space):
        data = NambuData.symbolic(space)
        P = nambu_bivector(data)
        for casimir in data.casimirs:
            assert hamiltonian_field(P, casimir).is_zero()

    def test_rank_at_most_two(self):
        P = nambu_bivector(NambuData.symbolic(R4))
        assert all(not value for _, value in minors(P, 3))
        assert any(value for _, value in minors(P, 2))

    @pytest.mark.parametrize("space", [R3, R4])
    def test_schouten_construction(self, space):
        data = NambuData.symbolic(space)
        assert nambu_via_schouten(data) == nambu_bivector(data)

    @pytest.mark.parametrize("perm", list(permutations(range(3))))
    def test_density_transformation(self, perm):
        data = NambuData.symbolic(R3)
        parity, _ = sort_sign(perm)
        moved = data.with_density(permute_coordinates(data.density, perm) * parity)
        assert nambu_bivector(data).permuted(perm) == nambu_bivector(moved)


class TestJacobiator:
    """1/2 [[P, P]] against the cyclic sum {x_i, {x_j, x_k}} + cycl. computed with sympy"""

    X = sympy.symbols("x y z")

    def to_sympy(self, p):
        return sympy.sympify(to_text(p).replace("^", "**"), locals=dict(zip("xyz", self.X)))

    def cyclic_sum(self, P):
        matrix = [[self.to_sympy(P[(i, j)]) if i != j else 0 for j in range(3)] for i in range(3)]

        def bracket(f, g):
            return sum(
                matrix[i][j] * sympy.diff(f, self.X[i]) * sympy.diff(g, self.X[j])
                for i in range(3)
                for j in range(3)
            )

        x, y, z = self.X
        return sympy.expand(bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y)))

    def to_diffpoly(self, expr):
        return parse(str(expr).replace("**", "^"), R3)

    def test_non_poisson_bivector(self):
        P = PolyVector(R3, 2, {(0, 1): poly("y"), (0, 2): poly("-x")})
        assert self.cyclic_sum(P) == -self.X[1]
        J = jacobi_check(P)
        assert not J.is_zero()
        assert J[(0, 1, 2)] == -self.to_diffpoly(self.cyclic_sum(P))

    @given(p01=polynomials(max_terms=2, max_degree=2), p02=polynomials(max_terms=2, max_degree=2),
           p12=polynomials(max_terms=2, max_degree=2))
    @settings(max_examples=200, deadline=None)
    def test_matches_cyclic_sum(self, p01, p02, p12):
        P = PolyVector(R3, 2, {(0, 1): p01, (0, 2): p02, (1, 2): p12})
        assert jacobi_check(P)[(0, 1, 2)] == -self.to_diffpoly(self.cyclic_sum(P))


class TestCasimirSearch:
    def test_euler_top(self):
        basis = casimir_search(preset_bivector("euler-top", R3), 2)
        assert basis == [DiffPoly.constant(R3, 1), poly("x^2+y^2+z^2")]

    def test_power_wedge_has_only_constants(self):
        basis = casimir_search(power_wedge_euler(R3, 2), 6)
        assert basis == [DiffPoly.constant(R3, 1)]

    def test_log_symplectic(self):
        basis = casimir_search(preset_bivector("log-symplectic", R3), 3)
        assert basis == [DiffPoly.constant(R3, 1), poly("x*y*z")]

    def test_matches_dense_oracle(self):
        P = preset_bivector("euler-top", R3)
        monomials = coordinate_monomials(R3, 2)
        rows = {}
        for col, mono in enumerate(monomials):
            image = hamiltonian_field(P, DiffPoly(R3, {mono: 1}))
            for (k,), value in image.components.items():
                for row_mono, coeff in value.terms.items():
                    rows.setdefault((k, row_mono), {})[col] = coeff
        matrix = sympy.Matrix([[row.get(c, 0) for c in range(len(monomials))] for row in rows.values()])
        assert len(matrix.nullspace()) == len(casimir_search(P, 2))

    def test_pde_residuals(self):
        V = homogeneous_power_field(R3, 2)
        assert all(not r for r in casimir_pde_residuals(V, DiffPoly.constant(R3, 1)))
        assert any(casimir_pde_residuals(V, poly("x")))
        # the PDE holds exactly for Casimirs of V ^ E
        P = power_wedge_euler(R3, 2)
        for c in (poly("x"), poly("x*y-z^2")):
            vanishes = all(not r for r in casimir_pde_residuals(V, c))
            assert vanishes == hamiltonian_field(P, c).is_zero()

    def test_exactness(self):
        P = power_wedge_euler(R4, 3)
        assert P == schouten(P, euler_field(R4)).times(Fraction(-1, 2))
