from fractions import Fraction

from hypothesis import strategies as st

from jetcalc import BaseSpace, DiffPoly
from multivec import PolyVector, index_tuples

R3 = BaseSpace(3)
R4 = BaseSpace(4)

coefficients = st.one_of(
    st.integers(min_value=-6, max_value=6).filter(bool),
    st.fractions(min_value=-3, max_value=3, max_denominator=4).filter(bool),
)


@st.composite
def jet_factors(draw, space=R3, symbols=("rho", "a")):
    name = draw(st.sampled_from(symbols))
    letters = draw(st.lists(st.integers(min_value=0, max_value=space.dimension - 1), max_size=3))
    return DiffPoly.jet(space, name, letters)


@st.composite
def diffpolys(draw, space=R3, max_terms=4, max_factors=3, symbols=("rho", "a"), coordinates=False):
    """Random differential polynomials over a small pool of jet variables"""
    total = DiffPoly.zero(space)
    for _ in range(draw(st.integers(min_value=0, max_value=max_terms))):
        term = DiffPoly.constant(space, draw(coefficients))
        for _ in range(draw(st.integers(min_value=0, max_value=max_factors))):
            if coordinates and draw(st.booleans()):
                term = term * DiffPoly.coordinate(space, draw(st.integers(0, space.dimension - 1)))
            else:
                term = term * draw(jet_factors(space, symbols))
        total = total + term
    return total


@st.composite
def polynomials(draw, space=R3, max_terms=4, max_degree=3):
    """Polynomials in the coordinates only"""
    total = DiffPoly.zero(space)
    for _ in range(draw(st.integers(min_value=0, max_value=max_terms))):
        term = DiffPoly.constant(space, draw(st.integers(min_value=-4, max_value=4)))
        for _ in range(draw(st.integers(min_value=0, max_value=max_degree))):
            term = term * DiffPoly.coordinate(space, draw(st.integers(0, space.dimension - 1)))
        total = total + term
    return total


@st.composite
def polyvectors(draw, degree, space=R3, max_terms=2, coordinates=True):
    components = {}
    for key in index_tuples(space, degree):
        if draw(st.booleans()):
            components[key] = draw(diffpolys(space, max_terms=max_terms, max_factors=2, coordinates=coordinates))
    return PolyVector(space, degree, components)


def fraction(value):
    return Fraction(value)
