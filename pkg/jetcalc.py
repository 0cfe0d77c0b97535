"""
Differential Polynomials in Jet Variables
Exact sparse arithmetic, total derivatives, exact division and the text grammar
shared by every other module
"""

import heapq
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

from pyparsing import (
    Forward,
    Optional,
    ParseBaseException,
    ParseFatalException,
    Regex,
    Suppress,
    ZeroOrMore,
    one_of,
)

from errors import (
    BaseSpaceMismatchError,
    ExpressionSyntaxError,
    FixtureFormatError,
    NonHomogeneousError,
    NotDivisibleError,
)

logger = logging.getLogger(__name__)

DEFAULT_NAMES = {2: "xy", 3: "xyz", 4: "xyzw"}

# Ranks below this are base coordinates used as polynomial variables.
COORDINATE_LIMIT = 10

SYMBOL_RANKS = {"rho": 10, "a": 20}
SYMBOL_RANKS.update({f"a{i}": 20 + i for i in range(1, 10)})
SYMBOL_KINDS = {"rho": "density"}
SYMBOL_KINDS.update({name: "casimir" for name in SYMBOL_RANKS if name.startswith("a")})

_GENERIC = re.compile(r"P(\d)(\d)$")
_dynamic_symbols = {}


@dataclass(frozen=True)
class BaseSpace:
    """Affine base R^d with single-letter coordinate names"""

    dimension: int
    names: str = ""

    def __post_init__(self):
        if self.dimension < 2 or self.dimension >= COORDINATE_LIMIT:
            raise ValueError(f"dimension must lie in 2..{COORDINATE_LIMIT - 1}, got {self.dimension}")
        names = self.names or DEFAULT_NAMES.get(self.dimension) or "".join(
            chr(ord("a") + 13 + k) for k in range(self.dimension)
        )
        if len(names) != self.dimension or len(set(names)) != self.dimension:
            raise ValueError(f"need {self.dimension} distinct coordinate letters, got {names!r}")
        object.__setattr__(self, "names", names)

    def index(self, letter):
        try:
            return self.names.index(letter)
        except ValueError:
            raise KeyError(f"{letter!r} is not a coordinate of R^{self.dimension}") from None

    @property
    def coordinates(self):
        return range(self.dimension)


class JetVar(NamedTuple):
    """Jet variable: symbol rank, derivative order, sorted coordinate indices"""

    rank: int
    order: int
    letters: tuple

    @property
    def is_coordinate(self):
        return self.rank < COORDINATE_LIMIT


def symbol_rank(name):
    """Rank of a fibre symbol; generic components P<i><j> and registered names included"""
    if name in SYMBOL_RANKS:
        return SYMBOL_RANKS[name]
    match = _GENERIC.match(name)
    if match:
        return 100 + 10 * int(match.group(1)) + int(match.group(2))
    if name in _dynamic_symbols:
        return _dynamic_symbols[name]
    raise KeyError(f"unknown symbol {name!r}")


def register_symbol(name):
    """Register an extra generic symbol, returns its rank"""
    if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", name):
        raise ValueError(f"invalid symbol name {name!r}")
    try:
        return symbol_rank(name)
    except KeyError:
        rank = 1000 + len(_dynamic_symbols)
        _dynamic_symbols[name] = rank
        return rank


@lru_cache(maxsize=None)
def symbol_name(rank):
    for name, value in SYMBOL_RANKS.items():
        if value == rank:
            return name
    if 100 <= rank < 200:
        return f"P{(rank - 100) // 10}{rank % 10}"
    for name, value in _dynamic_symbols.items():
        if value == rank:
            return name
    raise KeyError(f"no symbol with rank {rank}")


def symbol_kind(name):
    if name in SYMBOL_KINDS:
        return SYMBOL_KINDS[name]
    return "generic-component"


def jet_var(symbol, letters=()):
    """JetVar for a symbol name (or rank) and an iterable of coordinate indices"""
    rank = symbol if isinstance(symbol, int) else symbol_rank(symbol)
    letters = tuple(sorted(letters))
    return JetVar(rank, len(letters), letters)


def _norm(value):
    if isinstance(value, Fraction) and value.denominator == 1:
        return value.numerator
    return value


def mono_mul(m1, m2):
    """Product of two monomials given as sorted ((JetVar, exponent), ...) tuples"""
    if not m1:
        return m2
    if not m2:
        return m1
    merged = dict(m1)
    for var, exp in m2:
        merged[var] = merged.get(var, 0) + exp
    return tuple(sorted(merged.items()))


def mono_degree(mono):
    return sum(exp for _, exp in mono)


@lru_cache(maxsize=1 << 18)
def derive_monomial(mono, k):
    """Total derivative D_k of a monomial, as a tuple of (multiplicity, monomial)"""
    out = []
    for idx, (var, exp) in enumerate(mono):
        rest = list(mono)
        if exp > 1:
            rest[idx] = (var, exp - 1)
        else:
            del rest[idx]
        if var.is_coordinate:
            if var.rank != k:
                continue
            out.append((exp, tuple(rest)))
            continue
        derived = JetVar(var.rank, var.order + 1, tuple(sorted(var.letters + (k,))))
        out.append((exp, mono_mul(tuple(rest), ((derived, 1),))))
    return tuple(out)


class DiffPoly:
    """
    Sparse differential polynomial with exact rational coefficients.

    terms maps monomials (sorted tuples of (JetVar, exponent)) to nonzero
    coefficients. Instances are treated as immutable.
    """

    __slots__ = ("space", "terms")

    def __init__(self, space, terms=None):
        self.space = space
        self.terms = terms if terms is not None else {}

    # constructors

    @classmethod
    def zero(cls, space):
        return cls(space, {})

    @classmethod
    def constant(cls, space, value):
        value = _norm(Fraction(value))
        return cls(space, {(): value} if value else {})

    @classmethod
    def coordinate(cls, space, k):
        return cls(space, {((JetVar(k, 0, ()), 1),): 1})

    @classmethod
    def jet(cls, space, symbol, letters=()):
        if isinstance(letters, str):
            letters = [space.index(ch) for ch in letters]
        return cls(space, {((jet_var(symbol, letters), 1),): 1})

    @classmethod
    def from_terms(cls, space, terms):
        return cls(space, {m: _norm(c) for m, c in terms.items() if c})

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, DiffPoly):
            if other.space != self.space:
                raise BaseSpaceMismatchError(
                    f"R^{self.space.dimension}({self.space.names}) vs R^{other.space.dimension}({other.space.names})"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return DiffPoly.constant(self.space, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if len(other.terms) > len(self.terms):
            big, small = other.terms, self.terms
        else:
            big, small = self.terms, other.terms
        terms = dict(big)
        for mono, coeff in small.items():
            value = terms.get(mono, 0) + coeff
            if value:
                terms[mono] = _norm(value)
            else:
                del terms[mono]
        return DiffPoly(self.space, terms)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly(self.space, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor):
        factor = _norm(Fraction(factor))
        if not factor:
            return DiffPoly.zero(self.space)
        return DiffPoly(self.space, {m: _norm(c * factor) for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = mono_mul(m1, m2)
                value = terms.get(mono, 0) + c1 * c2
                if value:
                    terms[mono] = value
                else:
                    del terms[mono]
        return DiffPoly(self.space, {m: _norm(c) for m, c in terms.items()})

    __rmul__ = __mul__

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = DiffPoly.constant(self.space, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.constant(self.space, other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"DiffPoly({to_text(self)})"

    def __str__(self):
        return to_text(self)

    def derivative(self, k):
        return total_derivative(self, k)

    def monomials(self):
        return sorted(self.terms)

    def symbols(self):
        """Names of the fibre symbols present"""
        ranks = {var.rank for mono in self.terms for var, _ in mono if not var.is_coordinate}
        return sorted(symbol_name(rank) for rank in ranks)


def _check_space(p, q):
    if p.space != q.space:
        raise BaseSpaceMismatchError(f"R^{p.space.dimension} vs R^{q.space.dimension}")


def add(p, q):
    _check_space(p, q)
    return p + q


def mul(p, q):
    _check_space(p, q)
    return p * q


def total_derivative(p, k):
    """D_k by the Leibniz rule; jet variable (s, sigma) goes to (s, sigma + e_k)"""
    terms = {}
    for mono, coeff in p.terms.items():
        for mult, derived in derive_monomial(mono, k):
            value = terms.get(derived, 0) + mult * coeff
            if value:
                terms[derived] = value
            else:
                del terms[derived]
    return DiffPoly(p.space, terms)


def derivative_multi(p, letters):
    """Iterated total derivative along a sequence of coordinate indices"""
    for k in letters:
        p = total_derivative(p, k)
    return p


# division


def _grlex_key(mono):
    return mono_degree(mono), tuple(reversed(mono))


class _Descending:
    __slots__ = ("key", "mono")

    def __init__(self, mono):
        self.key = _grlex_key(mono)
        self.mono = mono

    def __lt__(self, other):
        return self.key > other.key


def _mono_div(m, d):
    remaining = dict(m)
    for var, exp in d:
        have = remaining.get(var, 0)
        if have < exp:
            return None
        if have == exp:
            del remaining[var]
        else:
            remaining[var] = have - exp
    return tuple(sorted(remaining.items()))


def exact_divide(p, q):
    """
    Quotient r with r*q = p, jet variables taken as independent indeterminates.

    Leading terms are eliminated under graded lexicographic order.
    """
    _check_space(p, q)
    if not q.terms:
        raise NotDivisibleError("division by the zero polynomial")
    lead = max(q.terms, key=_grlex_key)
    lead_coeff = Fraction(q.terms[lead])
    tail = [(m, c) for m, c in q.terms.items() if m != lead]

    remainder = dict(p.terms)
    heap = [_Descending(m) for m in remainder]
    heapq.heapify(heap)
    quotient = {}
    while heap:
        mono = heapq.heappop(heap).mono
        coeff = remainder.pop(mono, None)
        if not coeff:
            continue
        factor = _mono_div(mono, lead)
        if factor is None:
            raise NotDivisibleError(
                f"term {_term_text(p.space, mono, coeff)} is not divisible by the leading term of the divisor"
            )
        ratio = _norm(coeff / lead_coeff)
        quotient[factor] = ratio
        for tail_mono, tail_coeff in tail:
            product = mono_mul(factor, tail_mono)
            value = remainder.get(product, 0) - ratio * tail_coeff
            if value:
                if product not in remainder:
                    heapq.heappush(heap, _Descending(product))
                remainder[product] = _norm(value)
            else:
                remainder.pop(product, None)
    return DiffPoly(p.space, quotient)


# homogeneity


@dataclass
class HomogeneityProfile:
    """Per-symbol degrees, total derivative count and per-coordinate counts"""

    degrees: dict
    derivatives: int
    coordinate_counts: tuple

    def as_dict(self):
        return {
            "degrees": dict(self.degrees),
            "derivatives": self.derivatives,
            "coordinate_counts": list(self.coordinate_counts) if self.coordinate_counts else None,
        }


def _mono_profile(mono, dimension):
    degrees = {}
    counts = [0] * dimension
    for var, exp in mono:
        name = f"x{var.rank}" if var.is_coordinate else symbol_name(var.rank)
        degrees[name] = degrees.get(name, 0) + exp
        for k in var.letters:
            counts[k] += exp
    return degrees, tuple(counts)


def homogeneity_profile_counts(p):
    """
    Degrees per symbol and derivative counts shared by every monomial.

    Raises NonHomogeneousError when monomials disagree on a degree or on the
    total number of derivatives. coordinate_counts is None when the split of
    derivatives over coordinates varies between monomials.
    """
    if not p.terms:
        return HomogeneityProfile({}, 0, ())
    degrees = counts = None
    for mono in p.terms:
        mono_degrees, mono_counts = _mono_profile(mono, p.space.dimension)
        if degrees is None:
            degrees, counts, total = mono_degrees, mono_counts, sum(mono_counts)
            continue
        if mono_degrees != degrees:
            raise NonHomogeneousError(f"degrees {mono_degrees} differ from {degrees}")
        if sum(mono_counts) != total:
            raise NonHomogeneousError(f"{sum(mono_counts)} derivatives instead of {total}")
        if counts is not None and mono_counts != counts:
            counts = None
    degrees = {name: degree for name, degree in degrees.items() if degree}
    return HomogeneityProfile(degrees, total, counts)


def specialize_unit(p, symbol):
    """Set a fibre symbol to the constant 1, so all its derivatives vanish"""
    rank = symbol_rank(symbol)
    terms = {}
    for mono, coeff in p.terms.items():
        kept = []
        dead = False
        for var, exp in mono:
            if var.rank == rank:
                if var.order:
                    dead = True
                    break
                continue
            kept.append((var, exp))
        if dead:
            continue
        key = tuple(kept)
        value = terms.get(key, 0) + coeff
        if value:
            terms[key] = value
        else:
            del terms[key]
    return DiffPoly(p.space, terms)


def permute_var(var, perm):
    if var.is_coordinate:
        return JetVar(perm[var.rank], 0, ())
    return JetVar(var.rank, var.order, tuple(sorted(perm[k] for k in var.letters)))


def permute_monomial(mono, perm):
    return tuple(sorted((permute_var(var, perm), exp) for var, exp in mono))


def permute_coordinates(p, perm):
    """Relabel coordinate k as perm[k] in every jet variable and coordinate factor"""
    perm = tuple(perm)
    if sorted(perm) != list(range(p.space.dimension)):
        raise ValueError(f"{perm} is not a permutation of the coordinates")
    return DiffPoly(p.space, {permute_monomial(m, perm): c for m, c in p.terms.items()})


# text


def var_text(space, var):
    if var.is_coordinate:
        return space.names[var.rank]
    name = symbol_name(var.rank)
    if var.letters:
        return f"{name}_{''.join(space.names[k] for k in var.letters)}"
    return name


def _factors_text(space, mono):
    parts = []
    for var, exp in mono:
        token = var_text(space, var)
        parts.append(f"{token}^{exp}" if exp > 1 else token)
    return "*".join(parts)


def _coeff_text(coeff):
    coeff = Fraction(coeff)
    if coeff.denominator == 1:
        return str(coeff.numerator)
    return f"{coeff.numerator}/{coeff.denominator}"


def _term_text(space, mono, coeff):
    factors = _factors_text(space, mono)
    if not factors:
        return _coeff_text(coeff)
    if coeff == 1:
        return factors
    if coeff == -1:
        return "-" + factors
    return f"{_coeff_text(coeff)}*{factors}"


def to_text(p):
    """Canonical print: terms in monomial order, factors in JetVar order"""
    if not p.terms:
        return "0"
    out = []
    for mono in sorted(p.terms):
        term = _term_text(p.space, mono, p.terms[mono])
        if out and not term.startswith("-"):
            out.append("+")
        out.append(term)
    return "".join(out)


def _resolve_token(space, token):
    name, _, letters = token.partition("_")
    if not letters and name in space.names and len(name) == 1:
        return DiffPoly.coordinate(space, space.index(name))
    rank = symbol_rank(name)
    return DiffPoly(space, {((jet_var(rank, [space.index(ch) for ch in letters]), 1),): 1})


@lru_cache(maxsize=None)
def _grammar(space):
    expr = Forward()
    number = Regex(r"\d+(?:/\d+)?")

    def rational(s, loc, t):
        try:
            return DiffPoly.constant(space, Fraction(t[0]))
        except ZeroDivisionError:
            raise ParseFatalException(s, loc, f"zero denominator in {t[0]}") from None

    number.set_parse_action(rational)
    token = Regex(r"[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z]+)?")

    def resolve(s, loc, t):
        try:
            return _resolve_token(space, t[0])
        except KeyError as exc:
            raise ParseFatalException(s, loc, str(exc).strip("'\"")) from None

    token.set_parse_action(resolve)
    atom = number | token | Suppress("(") + expr + Suppress(")")
    power = atom + Optional(Suppress("^") + Regex(r"\d+"))
    power.set_parse_action(lambda t: t[0] ** int(t[1]) if len(t) > 1 else t[0])
    term = power + ZeroOrMore(Suppress("*") + power)

    def product(t):
        result = t[0]
        for factor in t[1:]:
            result = result * factor
        return result

    term.set_parse_action(product)
    sign = one_of("+ -")
    expr <<= Optional(sign) + term + ZeroOrMore(sign + term)

    def summation(t):
        tokens = list(t)
        total = DiffPoly.zero(space)
        negate = False
        for item in tokens:
            if isinstance(item, str):
                negate = item == "-"
                continue
            total = total - item if negate else total + item
            negate = False
        return total

    expr.set_parse_action(summation)
    return expr


def parse(text, space):
    """Parse expression text into a DiffPoly over space"""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression")
    try:
        return _grammar(space).parse_string(text, parse_all=True)[0]
    except ParseBaseException as exc:
        raise ExpressionSyntaxError(exc.msg, exc.lineno, exc.col) from None


def load_expression_fixture(path, space):
    """
    Read "name = expression" blocks from a text file.

    A block starts on a line holding "name ="; within a block whitespace is
    insignificant, so expressions may wrap anywhere, even inside a token.
    Lines starting with # are comments.
    """
    header = re.compile(r"\s*([A-Za-z][A-Za-z0-9]*)\s*=(.*)$")
    chunks = {}
    current = None
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        match = header.match(line)
        if match:
            current = match.group(1)
            if current in chunks:
                raise FixtureFormatError(f"{path}:{number}: block {current!r} appears twice")
            chunks[current] = [match.group(2)]
        elif current is None:
            raise FixtureFormatError(f"{path}:{number}: text before the first 'name =' header")
        else:
            chunks[current].append(line)
    if not chunks:
        raise FixtureFormatError(f"{path}: no 'name = expression' blocks")
    blocks = {}
    for name, lines in chunks.items():
        text = "".join("".join(line.split()) for line in lines)
        logger.debug("Parsing fixture block %s (%d characters)", name, len(text))
        blocks[name] = parse(text, space)
    return blocks
