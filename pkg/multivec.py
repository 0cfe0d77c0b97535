"""
Multivector Calculus
Antisymmetric multivectors with differential-polynomial coefficients, the wedge
product, the Schouten bracket and the vector fields used by the V^E family
"""

import logging
from itertools import combinations

from errors import DegreeOverflowError
from jetcalc import DiffPoly, permute_coordinates, to_text, total_derivative

logger = logging.getLogger(__name__)


def sort_sign(indices):
    """Sign of the sorting permutation and the sorted tuple; (0, None) on a repeat"""
    indices = tuple(indices)
    if len(set(indices)) != len(indices):
        return 0, None
    inversions = sum(
        1 for a in range(len(indices)) for b in range(a + 1, len(indices)) if indices[a] > indices[b]
    )
    return (-1 if inversions % 2 else 1), tuple(sorted(indices))


class PolyVector:
    """
    Degree-p multivector stored by strictly increasing index tuples.

    Zero components are never stored. Lookups with unsorted or repeated
    indices apply the permutation sign or return zero.
    """

    __slots__ = ("space", "degree", "components")

    def __init__(self, space, degree, components=None):
        if degree < 0 or degree > space.dimension:
            raise DegreeOverflowError(f"degree {degree} outside 0..{space.dimension}")
        self.space = space
        self.degree = degree
        self.components = {key: value for key, value in (components or {}).items() if value}

    @classmethod
    def from_components(cls, space, degree, mapping):
        """Build from arbitrary index tuples, folding them onto sorted keys"""
        components = {}
        for indices, value in mapping.items():
            if len(indices) != degree:
                raise ValueError(f"index {indices} does not have length {degree}")
            sign, key = sort_sign(indices)
            if not sign or not value:
                continue
            value = value if sign > 0 else -value
            components[key] = components[key] + value if key in components else value
        return cls(space, degree, components)

    @classmethod
    def scalar(cls, value):
        return cls(value.space, 0, {(): value})

    @classmethod
    def vector_field(cls, space, coefficients):
        """1-vector from a sequence (or {index: DiffPoly}) of coefficients"""
        if not isinstance(coefficients, dict):
            coefficients = dict(enumerate(coefficients))
        return cls(space, 1, {(k,): value for k, value in coefficients.items()})

    @classmethod
    def top(cls, space, coefficient):
        """coefficient times the top multivector d_1 ^ ... ^ d_d"""
        return cls(space, space.dimension, {tuple(space.coordinates): coefficient})

    @classmethod
    def basis(cls, space, indices):
        """Wedge of the coordinate derivations with the given indices"""
        return cls.from_components(space, len(indices), {tuple(indices): DiffPoly.constant(space, 1)})

    def component(self, indices):
        sign, key = sort_sign(indices)
        if not sign or key not in self.components:
            return DiffPoly.zero(self.space)
        value = self.components[key]
        return value if sign > 0 else -value

    def __getitem__(self, indices):
        if isinstance(indices, int):
            indices = (indices,)
        return self.component(indices)

    def _check(self, other):
        if not isinstance(other, PolyVector):
            raise TypeError(f"expected PolyVector, got {type(other).__name__}")
        if other.space != self.space or other.degree != self.degree:
            raise ValueError(
                f"cannot combine degree {self.degree} over R^{self.space.dimension} "
                f"with degree {other.degree} over R^{other.space.dimension}"
            )

    def __add__(self, other):
        self._check(other)
        components = dict(self.components)
        for key, value in other.components.items():
            components[key] = components[key] + value if key in components else value
        return PolyVector(self.space, self.degree, components)

    def __neg__(self):
        return PolyVector(self.space, self.degree, {k: -v for k, v in self.components.items()})

    def __sub__(self, other):
        return self + (-other)

    def times(self, factor):
        """Multiply every component by a DiffPoly or a rational"""
        return PolyVector(self.space, self.degree, {k: v * factor for k, v in self.components.items()})

    def derivative(self, k):
        return PolyVector(
            self.space, self.degree, {key: total_derivative(v, k) for key, v in self.components.items()}
        )

    def apply(self, f):
        """Directional derivative Y(f) for a vector field Y"""
        if self.degree != 1:
            raise ValueError("only vector fields act on functions")
        result = DiffPoly.zero(self.space)
        for (k,), coefficient in self.components.items():
            result = result + coefficient * total_derivative(f, k)
        return result

    def permuted(self, perm):
        """Transport under the coordinate relabeling k -> perm[k]"""
        mapping = {}
        for key, value in self.components.items():
            mapping[tuple(perm[k] for k in key)] = permute_coordinates(value, perm)
        return PolyVector.from_components(self.space, self.degree, mapping)

    def __eq__(self, other):
        if not isinstance(other, PolyVector):
            return NotImplemented
        return (
            self.space == other.space
            and self.degree == other.degree
            and self.components == other.components
        )

    __hash__ = None

    def __bool__(self):
        return bool(self.components)

    def is_zero(self):
        return not self.components

    def term_count(self):
        return sum(len(value) for value in self.components.values())

    def to_text(self, name="P"):
        """One "P[x][y] = expr" line per nonzero component"""
        lines = []
        for key in sorted(self.components):
            legs = "".join(f"[{self.space.names[k]}]" for k in key)
            lines.append(f"{name}{legs} = {to_text(self.components[key])}")
        return "\n".join(lines)

    def __repr__(self):
        return f"PolyVector(degree={self.degree}, components={len(self.components)})"


def _wedge_into(out, left, right, sign=1):
    for key_a, value_a in left.items():
        for key_b, value_b in right.items():
            s, key = sort_sign(key_a + key_b)
            if not s:
                continue
            product = value_a * value_b
            if s * sign < 0:
                product = -product
            out[key] = out[key] + product if key in out else product


def wedge(A, B):
    """Graded-antisymmetric product A ^ B"""
    if A.space != B.space:
        raise ValueError("wedge of multivectors over different spaces")
    degree = A.degree + B.degree
    if degree > A.space.dimension:
        raise DegreeOverflowError(f"{A.degree} + {B.degree} exceeds dimension {A.space.dimension}")
    out = {}
    _wedge_into(out, A.components, B.components)
    return PolyVector(A.space, degree, out)


def _contract_left(A, i):
    """Odd derivative by xi_i acting from the left"""
    out = {}
    for key, value in A.components.items():
        if i in key:
            p = key.index(i)
            out[key[:p] + key[p + 1:]] = value if p % 2 == 0 else -value
    return out


def _contract_right(B, i):
    """Odd derivative by xi_i acting from the right"""
    out = {}
    for key, value in B.components.items():
        if i in key:
            p = key.index(i)
            out[key[:p] + key[p + 1:]] = value if (len(key) - 1 - p) % 2 == 0 else -value
    return out


def _derive_components(components, i):
    out = {}
    for key, value in components.items():
        derived = total_derivative(value, i)
        if derived:
            out[key] = derived
    return out


def schouten(A, B):
    """
    Schouten bracket [[A, B]] of degree |A| + |B| - 1.

    [[A, B]] = sum_i (D_i B) ^ (xi_i-> A) - (B <-xi_i) ^ (D_i A), so that
    [[Y, f]] = Y(f) for a vector field Y and [[rho d_x^d_y^d_z, a]] is the
    Jacobian bracket {x, y} = rho a_z.
    """
    if A.space != B.space:
        raise ValueError("Schouten bracket of multivectors over different spaces")
    degree = A.degree + B.degree - 1
    if degree < 0:
        raise ValueError("Schouten bracket of two scalars is undefined")
    if degree > A.space.dimension:
        raise DegreeOverflowError(f"bracket degree {degree} exceeds dimension {A.space.dimension}")

    out = {}
    for i in A.space.coordinates:
        left = _contract_left(A, i)
        if left:
            _wedge_into(out, _derive_components(B.components, i), left)
        right = _contract_right(B, i)
        if right:
            _wedge_into(out, right, _derive_components(A.components, i), sign=-1)
    return PolyVector(A.space, degree, out)


def lie_derive(T, Y):
    """Lie derivative L_Y T = [[Y, T]] along a vector field Y"""
    if Y.degree != 1:
        raise ValueError(f"Lie derivative needs a vector field, got degree {Y.degree}")
    return schouten(Y, T)


def euler_field(space):
    """E = sum x^i d_i"""
    return PolyVector.vector_field(space, [DiffPoly.coordinate(space, k) for k in space.coordinates])


def homogeneous_power_field(space, k):
    """V = sum (x^j)^k d_j"""
    if k < 2:
        raise ValueError("power field needs k >= 2")
    return PolyVector.vector_field(space, [DiffPoly.coordinate(space, j) ** k for j in space.coordinates])


def bivector_bracket(P, f, g):
    """{f, g} = sum_{i,j} P^{ij} D_i f D_j g"""
    result = DiffPoly.zero(P.space)
    for (i, j), value in P.components.items():
        result = result + value * (
            total_derivative(f, i) * total_derivative(g, j) - total_derivative(f, j) * total_derivative(g, i)
        )
    return result


def index_tuples(space, degree):
    return list(combinations(space.coordinates, degree))
