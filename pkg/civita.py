"""
Civita-Symbol Collapse
Marker-monomials and their alternating sums over (S_d)^(n-1), differential
profiles, diagonal skew decomposition and the search for collapsed formulas
"""

import logging
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from pathlib import Path
from typing import NamedTuple

from pyparsing import Optional, ParseBaseException, Regex, Suppress, ZeroOrMore, one_of

from errors import (
    CollapseNotFoundError,
    ExpressionSyntaxError,
    FixtureFormatError,
    InvalidPartitionError,
    SymmetryError,
)
from jetcalc import BaseSpace, DiffPoly, JetVar, homogeneity_profile_counts, permute_monomial, symbol_name, symbol_rank
from linalg import SparseSystem, matrix_rank, solve
from multivec import PolyVector, sort_sign
from parallel import ordered_map

logger = logging.getLogger(__name__)

SLOT_LETTERS = {2: "uv", 3: "uvw", 4: "stuv"}
FREE_INDEX = "d"


def permutation_table(dimension):
    return [(perm, sort_sign(perm)[0]) for perm in permutations(range(dimension))]


class MarkerFactor(NamedTuple):
    """A fibre symbol whose derivative letters are (tuple, coordinate) slots"""

    rank: int
    slots: tuple


@dataclass(frozen=True)
class MarkerMonomial:
    """
    Differential monomial with its derivative letters split into tuples.

    Every tuple holds each coordinate exactly once. free is the slot of the
    output index for vector-field formulas, else None.
    """

    space: BaseSpace
    tuples: int
    factors: tuple
    free: tuple = None
    coefficient: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(MarkerFactor(r, tuple(s)) for r, s in self.factors))
        seen = {}
        slots = [slot for factor in self.factors for slot in factor.slots]
        if self.free is not None:
            slots.append(tuple(self.free))
        for k, c in slots:
            if not (0 <= k < self.tuples and 0 <= c < self.space.dimension):
                raise InvalidPartitionError(f"slot ({k}, {c}) outside {self.tuples} tuples of R^{self.space.dimension}")
            if (k, c) in seen:
                raise InvalidPartitionError(f"tuple {k + 1} uses coordinate {self.space.names[c]} twice")
            seen[(k, c)] = True
        expected = self.tuples * self.space.dimension
        if len(seen) != expected:
            raise InvalidPartitionError(f"{len(seen)} letters split into tuples, expected {expected}")

    def with_coefficient(self, value):
        return MarkerMonomial(self.space, self.tuples, self.factors, self.free, Fraction(value))

    def image(self, maps):
        """Monomial (and free coordinate) after permuting tuple k by maps[k]"""
        counts = {}
        for rank, slots in self.factors:
            letters = tuple(sorted(maps[k][c] for k, c in slots))
            var = JetVar(rank, len(letters), letters)
            counts[var] = counts.get(var, 0) + 1
        mono = tuple(sorted(counts.items()))
        if self.free is None:
            return mono, None
        k, c = self.free
        return mono, maps[k][c]

    def base_monomial(self):
        identity = tuple(range(self.space.dimension))
        return self.image([identity] * self.tuples)[0]

    def letter_partition(self):
        """For each tuple, the (factor position, coordinate) pairs it owns"""
        parts = [[] for _ in range(self.tuples)]
        for pos, (_, slots) in enumerate(self.factors):
            for k, c in slots:
                parts[k].append((pos, c))
        return [sorted(part) for part in parts]


def _accumulate_terms(terms, key, value):
    total = terms.get(key, 0) + value
    if total:
        terms[key] = total
    else:
        del terms[key]


def alternating_sum(marker):
    """
    Signed sum over (S_d)^(n-1): permutation k acts on the letters of tuple k.

    Returns a DiffPoly, or a degree-1 PolyVector when the marker has a free
    index.
    """
    space = marker.space
    table = permutation_table(space.dimension)
    coefficient = marker.coefficient
    scalar = {}
    vector = {}
    for combo in product(table, repeat=marker.tuples):
        sign = 1
        for _, s in combo:
            sign *= s
        mono, free = marker.image([perm for perm, _ in combo])
        if free is None:
            _accumulate_terms(scalar, mono, sign)
        else:
            _accumulate_terms(vector.setdefault(free, {}), mono, sign)
    if marker.free is None:
        return DiffPoly.from_terms(space, {m: c * coefficient for m, c in scalar.items()})
    components = {
        (k,): DiffPoly.from_terms(space, {m: c * coefficient for m, c in terms.items()})
        for k, terms in vector.items()
    }
    return PolyVector(space, 1, components)


def is_zero_marker(marker):
    return not alternating_sum(marker)


def diagonal_sum(marker):
    """The same sum restricted to sigma_1 = ... = sigma_{n-1}"""
    terms = {}
    for perm, sign in permutation_table(marker.space.dimension):
        mono, _ = marker.image([perm] * marker.tuples)
        _accumulate_terms(terms, mono, sign ** marker.tuples)
    return DiffPoly.from_terms(marker.space, {m: c * marker.coefficient for m, c in terms.items()})


def orbit_sum(mono, dimension, parity):
    """Sum over S_d of sgn(sigma)^parity times the relabeled monomial"""
    terms = {}
    for perm, sign in permutation_table(dimension):
        _accumulate_terms(terms, permute_monomial(mono, perm), sign if parity % 2 else 1)
    return terms


def skew_orbit_basis(monomials, dimension, parity):
    """Nonzero signed diagonal orbit sums, one per orbit, in first-seen order"""
    seen = set()
    basis = []
    for mono in monomials:
        if mono in seen:
            continue
        seen.update(permute_monomial(mono, perm) for perm in permutations(range(dimension)))
        terms = orbit_sum(mono, dimension, parity)
        if terms:
            basis.append(terms)
    return basis


# profiles


def _profile_order(name):
    kind_order = 0 if name.startswith("a") else 1 if name == "rho" else 2
    return kind_order, symbol_rank(name)


def profile_of(mono):
    """((symbol, sorted derivative orders), ...) with Casimirs first, then rho"""
    orders = {}
    for var, exp in mono:
        if var.is_coordinate:
            continue
        orders.setdefault(symbol_name(var.rank), []).extend([var.order] * exp)
    return tuple((name, tuple(sorted(orders[name]))) for name in sorted(orders, key=_profile_order))


def profile_text(profile):
    return " ".join(f"{name}:{''.join(str(o) for o in orders)}" for name, orders in profile)


def profile_label(mono):
    """Printable profile such as "a:1223 rho:001" """
    return profile_text(profile_of(mono))


def partition_by_profile(p):
    """{profile label: sub-polynomial} in label order"""
    groups = {}
    for mono, coeff in p.terms.items():
        groups.setdefault(profile_label(mono), {})[mono] = coeff
    return {label: DiffPoly(p.space, groups[label]) for label in sorted(groups)}


def profile_counts(p):
    return {label: len(part) for label, part in partition_by_profile(p).items()}


# greedy decomposition


def _per_coordinate_parity(p):
    counts = homogeneity_profile_counts(p).coordinate_counts
    if not counts or len(set(counts)) != 1:
        raise SymmetryError("derivatives are not spread evenly over the coordinates")
    return counts[0]


def greedy_skew_decompose(p, parity=None):
    """
    Representatives whose signed diagonal orbit sums add up to p.

    Repeatedly takes the smallest remaining monomial m, divides its
    coefficient by the coefficient of m in its own orbit sum and subtracts
    that multiple of the orbit sum.
    """
    if not p:
        return []
    d = p.space.dimension
    if parity is None:
        parity = _per_coordinate_parity(p)
    remaining = dict(p.terms)
    done = set()
    representatives = []
    while remaining:
        mono = min(remaining)
        if mono in done:
            raise SymmetryError(f"remainder left on an already processed orbit at {mono}")
        orbit = orbit_sum(mono, d, parity)
        stabilizer = orbit.get(mono, 0)
        if not stabilizer:
            raise SymmetryError("a remaining monomial has a vanishing orbit sum")
        coeff = Fraction(remaining[mono]) / stabilizer
        for image, sign in orbit.items():
            _accumulate_terms(remaining, image, -coeff * sign)
        done.update(permute_monomial(mono, perm) for perm, _ in permutation_table(d))
        representatives.append((coeff, mono))
    logger.info("Greedy decomposition: %d representatives", len(representatives))
    return representatives


def reassemble_orbits(space, representatives, parity):
    terms = {}
    for coeff, mono in representatives:
        for image, sign in orbit_sum(mono, space.dimension, parity).items():
            _accumulate_terms(terms, image, coeff * sign)
    return DiffPoly.from_terms(space, terms)


# partitions


def enumerate_partitions(mono, space, tuples, free=None):
    """
    Every way to split the derivative letters of mono into tuples.

    Occurrences are tracked per position inside each factor. The occurrences
    of the first coordinate are assigned to tuples in order, which fixes the
    relabeling of tuples; the others run over all bijections in
    lexicographic order. free optionally adds one output-index occurrence of
    that coordinate.
    """
    occurrences = []
    factor_list = []
    for var, exp in mono:
        if var.is_coordinate:
            raise InvalidPartitionError("coordinate factors carry no derivative letters")
        for _ in range(exp):
            pos = len(factor_list)
            factor_list.append(var)
            for offset, c in enumerate(var.letters):
                occurrences.append(((pos, offset), c))
    if free is not None:
        occurrences.append((("free", 0), free))

    by_coordinate = [[occ for occ, c in occurrences if c == coord] for coord in space.coordinates]
    for coord, occ in enumerate(by_coordinate):
        if len(occ) != tuples:
            raise InvalidPartitionError(
                f"{len(occ)} letters {space.names[coord]} cannot fill {tuples} tuples"
            )

    identity = tuple(range(tuples))
    choices = [[identity]] + [list(permutations(range(tuples))) for _ in range(space.dimension - 1)]
    for assignment in product(*choices):
        slot_of = {}
        for coord, perm in enumerate(assignment):
            for occ, k in zip(by_coordinate[coord], perm):
                slot_of[occ] = (k, coord)
        factors = []
        for pos, var in enumerate(factor_list):
            slots = tuple(slot_of[(pos, offset)] for offset in range(var.order))
            factors.append((var.rank, slots))
        yield MarkerMonomial(space, tuples, tuple(factors), slot_of.get(("free", 0)))


def proportionality(target, candidate):
    """The rational r with target = r * candidate, or None"""
    if not candidate or len(candidate.terms) != len(target.terms):
        return None
    mono, value = next(iter(candidate.terms.items()))
    if mono not in target.terms:
        return None
    ratio = Fraction(target.terms[mono]) / value
    for mono, value in candidate.terms.items():
        if target.terms.get(mono) != ratio * value:
            return None
    return ratio


def _two_term_fit(target, first, second):
    system = SparseSystem()
    for mono, value in first.terms.items():
        system.add_entry(mono, 0, value)
    for mono, value in second.terms.items():
        system.add_entry(mono, 1, value)
    for mono, value in target.terms.items():
        system.add_rhs(mono, value)
    system.add_column(0)
    system.add_column(1)
    result = solve(system)
    if not result.feasible or result.nullspace:
        return None
    return result.solution[0], result.solution[1]


def _marker_sums(job):
    mono, space, tuples = job
    out = []
    for marker in enumerate_partitions(mono, space, tuples):
        out.append((marker, alternating_sum(marker)))
    return out


def _collapse_class(label, part, tuples, monomial_limit):
    space = part.space
    nonzero = []
    monomials = sorted(part.terms)[:monomial_limit]
    for position, mono in enumerate(monomials):
        for marker in enumerate_partitions(mono, space, tuples):
            total = alternating_sum(marker)
            if not total:
                continue
            ratio = proportionality(part, total)
            if ratio is not None:
                return [marker.with_coefficient(ratio)]
            if all(proportionality(total, other) is None for _, other in nonzero):
                nonzero.append((marker, total))
        for (m1, s1), (m2, s2) in combinations(nonzero, 2):
            fit = _two_term_fit(part, s1, s2)
            if fit is not None and all(fit):
                logger.info("Profile %s needs two markers", label)
                return [m1.with_coefficient(fit[0]), m2.with_coefficient(fit[1])]
        logger.debug("Profile %s: no collapse on monomial %d yet", label, position)
    raise CollapseNotFoundError(f"no one- or two-marker collapse for profile {label}")


def collapse_search(target, tuples, monomial_limit=3):
    """
    Civita formula reproducing target, profile class by profile class.

    For each class the first monomial's partitions are tried in order and the
    first marker whose alternating sum is proportional to the class wins;
    otherwise pairs of non-proportional sums are fitted, widening to further
    monomials up to monomial_limit.
    """
    counts = homogeneity_profile_counts(target).coordinate_counts
    if not counts or set(counts) != {tuples}:
        raise InvalidPartitionError(f"target does not carry {tuples} derivatives along every coordinate")
    started = time.perf_counter()
    terms = []
    for label, part in partition_by_profile(target).items():
        for marker in _collapse_class(label, part, tuples, monomial_limit):
            terms.append((marker.coefficient, marker.with_coefficient(1)))
    logger.info("Collapse found %d markers in %.2fs", len(terms), time.perf_counter() - started)
    return CivitaFormula(target.space, tuples, terms)


@dataclass
class SymmetryReport:
    """How the nonzero markers of one profile class relate to the class"""

    profile: str
    monomials_examined: int = 0
    markers_examined: int = 0
    zero_markers: int = 0
    proportional_markers: int = 0
    nonproportional_markers: int = 0
    minimal_rank: int = None

    @property
    def nonzero_markers(self):
        return self.proportional_markers + self.nonproportional_markers

    @property
    def symmetry_holds(self):
        return self.nonzero_markers > 0 and self.nonproportional_markers == 0

    def as_dict(self):
        return {
            "profile": self.profile,
            "monomials_examined": self.monomials_examined,
            "markers_examined": self.markers_examined,
            "zero_markers": self.zero_markers,
            "proportional_markers": self.proportional_markers,
            "nonproportional_markers": self.nonproportional_markers,
            "symmetry_holds": self.symmetry_holds,
            "minimal_rank": self.minimal_rank,
        }


def orbit_representatives(monomials, dimension):
    seen = set()
    out = []
    for mono in sorted(monomials):
        if mono in seen:
            continue
        seen.update(permute_monomial(mono, perm) for perm in permutations(range(dimension)))
        out.append(mono)
    return out


def extra_symmetry_check(part, tuples, monomial_limit=None, jobs=1):
    """
    Examine every partition of every monomial of a profile class.

    Monomials are taken up to the diagonal relabeling, whose markers give
    relabeled sums. minimal_rank is 1 when some marker alone reproduces the
    class, 2 when a pair does, else None.
    """
    labels = {profile_label(m) for m in part.terms}
    if len(labels) != 1:
        raise InvalidPartitionError(f"class mixes {len(labels)} profiles")
    label = labels.pop()
    d = part.space.dimension
    monomials = orbit_representatives(part.terms, d)
    if monomial_limit is not None:
        monomials = monomials[:monomial_limit]
    report = SymmetryReport(label, monomials_examined=len(monomials))

    distinct = []
    jobs_list = [(mono, part.space, tuples) for mono in monomials]
    for sums in ordered_map(_marker_sums, jobs_list, jobs):
        for _, total in sums:
            report.markers_examined += 1
            if not total:
                report.zero_markers += 1
                continue
            if proportionality(part, total) is not None:
                report.proportional_markers += 1
                report.minimal_rank = 1
                continue
            report.nonproportional_markers += 1
            if all(proportionality(total, other) is None for other in distinct):
                distinct.append(total)

    if report.minimal_rank is None:
        for s1, s2 in combinations(distinct, 2):
            fit = _two_term_fit(part, s1, s2)
            if fit is not None and all(fit):
                report.minimal_rank = 2
                break
    logger.info(
        "Profile %s: %d markers, %d zero, %d proportional, rank %s",
        label,
        report.markers_examined,
        report.zero_markers,
        report.proportional_markers,
        report.minimal_rank,
    )
    return report


def span_rank(polys):
    """Rank of the span of a list of DiffPolys"""
    return matrix_rank([p.terms for p in polys])


# formulas


@dataclass
class CivitaFormula:
    """Linear combination of marker-monomials over one base space and tuple count"""

    space: BaseSpace
    tuples: int
    terms: list = field(default_factory=list)

    def __post_init__(self):
        frees = {marker.free is not None for _, marker in self.terms}
        if len(frees) > 1:
            raise InvalidPartitionError("markers disagree on having a free index")
        for _, marker in self.terms:
            if marker.space != self.space or marker.tuples != self.tuples:
                raise InvalidPartitionError("markers disagree on base space or tuple count")

    @property
    def has_free_index(self):
        return any(marker.free is not None for _, marker in self.terms)

    def __len__(self):
        return len(self.terms)

    def to_text(self):
        return "\n".join(_marker_text(coeff, marker) for coeff, marker in self.terms)


def _expand_term(job):
    coeff, marker = job
    return alternating_sum(marker.with_coefficient(coeff * marker.coefficient))


def expand_civita_formula(formula, jobs=1):
    """Full expansion, collected; a PolyVector when the markers carry a free index"""
    started = time.perf_counter()
    parts = ordered_map(_expand_term, formula.terms, jobs)
    if formula.has_free_index:
        total = PolyVector(formula.space, 1)
    else:
        total = DiffPoly.zero(formula.space)
    for part in parts:
        total = total + part
    logger.info("Expanded %d markers in %.2fs", len(formula.terms), time.perf_counter() - started)
    return total


def _slot_letters(space):
    try:
        return SLOT_LETTERS[space.dimension]
    except KeyError:
        raise FixtureFormatError(f"no slot letters defined for R^{space.dimension}") from None


def _marker_text(coeff, marker):
    letters = _slot_letters(marker.space)
    parts = []
    counts = {}
    for rank, slots in marker.factors:
        name = symbol_name(rank)
        if slots:
            parts.append(f"{name}_" + "".join(f"{letters[c]}{k + 1}" for k, c in slots))
        else:
            counts[name] = counts.get(name, 0) + 1
    for name, count in counts.items():
        parts.append(f"{name}^{count}" if count > 1 else name)
    if marker.free is not None:
        k, c = marker.free
        parts.append(f"{FREE_INDEX}_{letters[c]}{k + 1}")
    coeff = Fraction(coeff)
    text = str(coeff.numerator) if coeff.denominator == 1 else f"{coeff.numerator}/{coeff.denominator}"
    return f"{text}*" + "*".join(parts)


def _term_grammar():
    coeff = Regex(r"\d+(?:/\d+)?")
    factor = Regex(r"[A-Za-z][A-Za-z0-9]*(?:_(?:[a-z]\d+)+)?(?:\^\d+)?")
    return Optional(one_of("+ -"), default="+") + Optional(coeff + Suppress("*"), default="1") + factor + ZeroOrMore(
        Suppress("*") + factor
    )


_TERM = _term_grammar()
_FACTOR = re.compile(r"([A-Za-z][A-Za-z0-9]*)(?:_((?:[a-z]\d+)+))?(?:\^(\d+))?$")


def parse_marker(text, space, tuples):
    """One formula line into (coefficient, MarkerMonomial)"""
    letters = _slot_letters(space)
    try:
        sign, coeff, *factors = _TERM.parse_string(text, parse_all=True)
    except ParseBaseException as exc:
        raise ExpressionSyntaxError(exc.msg, exc.lineno, exc.col) from None
    coefficient = Fraction(coeff) * (-1 if sign == "-" else 1)
    marker_factors = []
    free = None
    for token in factors:
        name, slots_text, power = _FACTOR.match(token).groups()
        slots = []
        for letter, digits in re.findall(r"([a-z])(\d+)", slots_text or ""):
            if letter not in letters:
                raise ExpressionSyntaxError(f"slot letter {letter!r} is not one of {letters!r}")
            slots.append((int(digits) - 1, letters.index(letter)))
        if name == FREE_INDEX:
            if len(slots) != 1 or power:
                raise ExpressionSyntaxError(f"free index {token!r} needs exactly one slot")
            free = slots[0]
            continue
        if power and slots:
            raise ExpressionSyntaxError(f"{token!r}: powers only apply to undifferentiated symbols")
        try:
            rank = symbol_rank(name)
        except KeyError as exc:
            raise ExpressionSyntaxError(str(exc).strip("'\"")) from None
        for _ in range(int(power or 1)):
            marker_factors.append((rank, tuple(slots)))
    return coefficient, MarkerMonomial(space, tuples, tuple(marker_factors), free)


def load_civita_fixture(path):
    """
    Read a formula file: "dim = N" and "tuples = M" headers, then [section]
    blocks with one marker per line. Returns (space, tuples, {section: formula}).
    """
    header = {}
    sections = {}
    current = None
    space = tuples = None
    for number, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = re.fullmatch(r"\[(\w+)\]", line)
        if match:
            current = match.group(1)
            sections[current] = []
            continue
        match = re.fullmatch(r"(\w+)\s*=\s*(\d+)", line)
        if match and current is None:
            header[match.group(1)] = int(match.group(2))
            continue
        if current is None:
            raise FixtureFormatError(f"{path}:{number}: marker line before any [section]")
        if space is None:
            try:
                space = BaseSpace(header["dim"])
                tuples = header["tuples"]
            except KeyError as exc:
                raise FixtureFormatError(f"{path}: missing header {exc}") from None
        try:
            sections[current].append(parse_marker(line, space, tuples))
        except (ExpressionSyntaxError, InvalidPartitionError) as exc:
            raise FixtureFormatError(f"{path}:{number}: {exc}") from None
    if not sections:
        raise FixtureFormatError(f"{path}: no [section] blocks")
    formulas = {name: CivitaFormula(space, tuples, terms) for name, terms in sections.items()}
    return space, tuples, formulas
