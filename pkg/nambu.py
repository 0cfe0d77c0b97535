"""
Nambu-Determinant Poisson Structures
Constructors for P(rho, [a]) and the checks run against them
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, permutations

from errors import ConfigurationError
from jetcalc import DiffPoly, JetVar, parse, symbol_name, total_derivative
from linalg import SparseSystem, echelon_basis, solve
from multivec import PolyVector, euler_field, homogeneous_power_field, schouten, sort_sign, wedge

logger = logging.getLogger(__name__)


def default_casimir_names(dimension):
    if dimension == 3:
        return ("a",)
    return tuple(f"a{i}" for i in range(1, dimension - 1))


@dataclass(frozen=True)
class NambuData:
    """
    Density and Casimirs of {f, g} = rho * det d(a1, ..., a_{d-2}, f, g) / d(x).

    density None stands for rho = 1; the factor is omitted, not substituted.
    """

    space: object
    density: object = None
    casimirs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.casimirs) != self.space.dimension - 2:
            raise ValueError(
                f"R^{self.space.dimension} needs {self.space.dimension - 2} Casimirs, got {len(self.casimirs)}"
            )

    @classmethod
    def symbolic(cls, space, density=True):
        """Jet symbols rho and a (d=3) or a1, ..., a_{d-2}"""
        casimirs = tuple(DiffPoly.jet(space, name) for name in default_casimir_names(space.dimension))
        return cls(space, DiffPoly.jet(space, "rho") if density else None, casimirs)

    @classmethod
    def from_text(cls, space, casimirs, density=None):
        """Polynomial data given as text, e.g. "1/2*(x^2+y^2+z^2)" """
        return cls(
            space,
            parse(density, space) if density else None,
            tuple(parse(text, space) for text in casimirs),
        )

    @staticmethod
    def _single_symbol(poly):
        if len(poly.terms) != 1:
            return None
        (mono, coeff), = poly.terms.items()
        if coeff != 1 or len(mono) != 1:
            return None
        var, exp = mono[0]
        if exp != 1 or var.order or var.is_coordinate:
            return None
        return symbol_name(var.rank)

    @property
    def casimir_symbols(self):
        """Symbol names when every Casimir is a bare jet symbol, else None"""
        names = tuple(self._single_symbol(c) for c in self.casimirs)
        return None if None in names else names

    @property
    def density_symbol(self):
        return None if self.density is None else self._single_symbol(self.density)

    @property
    def is_symbolic(self):
        return self.casimir_symbols is not None and (self.density is None or self.density_symbol is not None)

    def with_casimir(self, index, value):
        casimirs = list(self.casimirs)
        casimirs[index] = value
        return NambuData(self.space, self.density, tuple(casimirs))

    def with_density(self, value):
        return NambuData(self.space, value, self.casimirs)


def civita_sign(indices):
    sign, _ = sort_sign(indices)
    return sign


def nambu_bivector(data):
    """P^{ij} = rho * sum eps^{i1..i_{d-2} i j} D_{i1} a1 ... D_{i_{d-2}} a_{d-2}"""
    space = data.space
    d = space.dimension
    gradients = [[total_derivative(a, k) for k in range(d)] for a in data.casimirs]
    components = {}
    for i, j in combinations(range(d), 2):
        rest = [k for k in range(d) if k not in (i, j)]
        value = DiffPoly.zero(space)
        for order in permutations(rest):
            sign = civita_sign(order + (i, j))
            term = DiffPoly.constant(space, sign)
            for casimir, k in zip(gradients, order):
                term = term * casimir[k]
            value = value + term
        if data.density is not None:
            value = value * data.density
        components[(i, j)] = value
    return PolyVector(space, 2, components)


def nambu_via_schouten(data):
    """[[...[[rho d_1^...^d_d, a1]], ...]], a_{d-2}]], an independent construction"""
    space = data.space
    density = data.density if data.density is not None else DiffPoly.constant(space, 1)
    result = PolyVector.top(space, density)
    for casimir in data.casimirs:
        result = schouten(result, PolyVector.scalar(casimir))
    return result


def density_volume(data):
    density = data.density if data.density is not None else DiffPoly.constant(data.space, 1)
    return PolyVector.top(data.space, density)


def jacobi_check(P):
    """1/2 [[P, P]]; zero exactly when P is Poisson"""
    if P.degree != 2:
        raise ValueError("Jacobi check needs a bivector")
    return schouten(P, P).times(Fraction(1, 2))


def hamiltonian_field(P, H):
    """[[P, H]]"""
    if P.degree != 2:
        raise ValueError("Hamiltonian field needs a bivector")
    return schouten(P, PolyVector.scalar(H))


def minors(P, size=3):
    """All size x size minors of the antisymmetric coefficient matrix of P"""
    d = P.space.dimension
    out = []
    for rows in combinations(range(d), size):
        for cols in combinations(range(d), size):
            det = DiffPoly.zero(P.space)
            for perm in permutations(range(size)):
                sign, _ = sort_sign(perm)
                term = DiffPoly.constant(P.space, sign)
                for r, c in zip(rows, (cols[p] for p in perm)):
                    if r == c:
                        term = DiffPoly.zero(P.space)
                        break
                    term = term * P.component((r, c))
                det = det + term
            out.append(((rows, cols), det))
    return out


def coordinate_monomials(space, degree):
    """Monomials of degree <= degree in graded-lex order: 1, x, y, z, x^2, xy, ..."""
    out = []
    for n in range(degree + 1):
        for combo in combinations_with_replacement(space.coordinates, n):
            mono = {}
            for k in combo:
                var = JetVar(k, 0, ())
                mono[var] = mono.get(var, 0) + 1
            out.append(tuple(sorted(mono.items())))
    return out


def casimir_search(P, degree):
    """
    Basis of polynomial Casimirs of P of degree <= degree.

    Solves [[P, c]] = 0 over the coefficients of c; the basis is reduced row
    echelon along the graded-lex monomial order, so constants come first.
    """
    space = P.space
    monomials = coordinate_monomials(space, degree)
    system = SparseSystem()
    for mono in monomials:
        image = hamiltonian_field(P, DiffPoly(space, {mono: 1}))
        column = {}
        for (k,), value in image.components.items():
            for row_mono, coeff in value.terms.items():
                if any(not var.is_coordinate for var, _ in row_mono):
                    raise ValueError("Casimir search needs polynomial coefficients")
                column[(k, row_mono)] = coeff
        system.add_column_vector(mono, column)
    logger.info("Casimir search up to degree %d: %d candidate monomials", degree, len(monomials))
    result = solve(system)
    basis = echelon_basis(result.nullspace, monomials)
    return [DiffPoly.from_terms(space, vector) for vector in basis]


def power_wedge_euler(space, k):
    """P = V ^ E with V = sum (x^j)^k d_j"""
    return wedge(homogeneous_power_field(space, k), euler_field(space))


def casimir_pde_residuals(V, c):
    """V^i E(c) - x^i V(c); c is a Casimir of V ^ E iff every entry vanishes"""
    space = V.space
    E = euler_field(space)
    ec, vc = E.apply(c), V.apply(c)
    return [V.component((i,)) * ec - DiffPoly.coordinate(space, i) * vc for i in space.coordinates]


PRESETS = {
    "euler-top": ("1/2*(x^2+y^2+z^2)",),
    "log-symplectic": ("1/2*x*y*z",),
}


def preset_bivector(name, space):
    """Named Poisson bivectors for the command line"""
    if name in PRESETS:
        return nambu_bivector(NambuData.from_text(space, PRESETS[name]))
    suffix = name.removeprefix("power-wedge-")
    if suffix != name and suffix.isdigit():
        return power_wedge_euler(space, int(suffix))
    raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)} or power-wedge-<k>")
