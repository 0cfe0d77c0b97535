"""
Graph Flows on Nambu Structures
Evaluation of directed Kontsevich graphs, the tetrahedral flow and the induced
velocities of the Casimirs and of the inverse density
"""

import logging
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, permutations, product
from math import factorial
from typing import NamedTuple

from pyparsing import (
    Group,
    OneOrMore,
    ParseBaseException,
    ParseFatalException,
    Regex,
    Suppress,
    one_of,
)

from civita import profile_label, skew_orbit_basis
from errors import (
    ArityMismatchError,
    GraphEncodingError,
    InconsistentComponentsError,
    NoSolutionError,
    NonUniqueSolutionError,
    NotDivisibleError,
)
from jetcalc import (
    DiffPoly,
    JetVar,
    derivative_multi,
    exact_divide,
    symbol_rank,
    total_derivative,
)
from linalg import SparseSystem, solve
from multivec import PolyVector
from nambu import civita_sign, nambu_bivector
from parallel import ordered_map

logger = logging.getLogger(__name__)

SLOT_NAMES = "LR"


class Edge(NamedTuple):
    source: int
    slot: int
    target: int


@dataclass(frozen=True)
class DirectedGraph:
    """
    Internal vertices 0..n-1 with ordered out-edges; sinks are -1, -2, ...

    Each edge carries its own summation index; the content of a vertex is
    differentiated once along every incoming edge.
    """

    vertex_count: int
    edges: tuple

    def __post_init__(self):
        edges = tuple(sorted(Edge(*e) for e in self.edges))
        object.__setattr__(self, "edges", edges)
        self.validate()

    @property
    def sink_count(self):
        return sum(1 for e in self.edges if e.target < 0)

    def out_edges(self, v):
        return [e for e in self.edges if e.source == v]

    def in_edges(self, v):
        return [e for e in self.edges if e.target == v]

    def out_degree(self, v):
        return len(self.out_edges(v))

    def validate(self):
        for e in self.edges:
            if not 0 <= e.source < self.vertex_count:
                raise GraphEncodingError(f"edge {tuple(e)} leaves from a non-existent vertex")
            if e.target >= self.vertex_count:
                raise GraphEncodingError(f"edge {tuple(e)} points to a non-existent vertex")
        for v in range(self.vertex_count):
            slots = sorted(e.slot for e in self.out_edges(v))
            if slots != list(range(len(slots))):
                raise GraphEncodingError(f"vertex {v} has out-slots {slots}, expected 0..{len(slots) - 1}")
        sinks = sorted(-e.target for e in self.edges if e.target < 0)
        if sinks != list(range(1, len(sinks) + 1)):
            raise GraphEncodingError(f"sinks must be -1..-{len(sinks)}, each hit by exactly one edge")

    def edge_text(self, e):
        slot = SLOT_NAMES[e.slot] if self.out_degree(e.source) <= 2 else str(e.slot)
        return f"({e.source},{slot},{e.target})"


class GraphSum:
    """Rational linear combination of directed graphs with a common number of sinks"""

    def __init__(self, terms):
        terms = [(Fraction(c), g) for c, g in terms]
        if not terms:
            raise GraphEncodingError("empty graph sum")
        sinks = {g.sink_count for _, g in terms}
        if len(sinks) != 1:
            raise GraphEncodingError(f"graphs disagree on the number of sinks: {sorted(sinks)}")
        self.terms = terms

    @property
    def sink_count(self):
        return self.terms[0][1].sink_count

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        return isinstance(other, GraphSum) and self.terms == other.terms

    __hash__ = None

    def to_text(self):
        lines = []
        for coeff, graph in self.terms:
            c = str(coeff.numerator) if coeff.denominator == 1 else f"{coeff.numerator}/{coeff.denominator}"
            edges = " ".join(graph.edge_text(e) for e in graph.edges)
            lines.append(f"{c} ; {graph.vertex_count} ; {edges}")
        return "\n".join(lines) + "\n"


GAMMA3_TEXT = """\
1 ; 4 ; (0,L,-1) (0,R,-2) (1,L,0) (1,R,3) (2,L,0) (2,R,1) (3,L,0) (3,R,2)
3 ; 4 ; (0,L,-1) (0,R,3) (1,L,0) (1,R,-2) (2,L,1) (2,R,0) (3,L,2) (3,R,1)
-3 ; 4 ; (0,L,-2) (0,R,3) (1,L,0) (1,R,-1) (2,L,1) (2,R,0) (3,L,2) (3,R,1)
"""


def _rational(s, loc, t):
    try:
        return Fraction(t[0])
    except ZeroDivisionError:
        raise ParseFatalException(s, loc, f"zero denominator in {t[0]}") from None


def _graph_line_grammar():
    integer = Regex(r"[+-]?\d+").set_parse_action(lambda t: int(t[0]))
    coeff = Regex(r"[+-]?\d+(?:/\d+)?").set_parse_action(_rational)
    slot = one_of("L R").set_parse_action(lambda t: SLOT_NAMES.index(t[0])) | integer
    edge = Group(Suppress("(") + integer + Suppress(",") + slot + Suppress(",") + integer + Suppress(")"))
    return coeff + Suppress(";") + integer + Suppress(";") + Group(OneOrMore(edge))


_LINE = _graph_line_grammar()


def load_graph_sum(text):
    """
    Parse the graph-sum text format.

    One graph per line, "coeff ; vertex-count ; (source,slot,target) ...";
    slots are L, R or integers, sinks are negative ids, # starts a comment.
    """
    terms = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            coeff, count, edges = _LINE.parse_string(line, parse_all=True)
        except ParseBaseException as exc:
            raise GraphEncodingError(exc.msg, number, exc.col) from None
        try:
            graph = DirectedGraph(count, tuple(Edge(*e) for e in edges))
        except GraphEncodingError as exc:
            raise GraphEncodingError(str(exc), number, 1) from None
        terms.append((coeff, graph))
    if not terms:
        raise GraphEncodingError("empty graph sum")
    return GraphSum(terms)


def tetra_graph_sum():
    """Built-in encoding of the tetrahedral flow"""
    return load_graph_sum(GAMMA3_TEXT)


def _evaluate_single(graph, contents, space):
    d = space.dimension
    n = graph.vertex_count
    outs = [[e for e in graph.out_edges(v)] for v in range(n)]
    edge_list = [e for v in range(n) for e in outs[v]]
    position = {e: k for k, e in enumerate(edge_list)}
    out_pos = [[position[e] for e in outs[v]] for v in range(n)]
    in_pos = [[position[e] for e in graph.in_edges(v)] for v in range(n)]
    sink_pos = [position[next(e for e in edge_list if e.target == -s)] for s in range(1, graph.sink_count + 1)]

    assignment = [0] * len(edge_list)
    cache = {}
    tensor = {}

    def content(v):
        out_idx = tuple(assignment[k] for k in out_pos[v])
        ders = tuple(sorted(assignment[k] for k in in_pos[v]))
        key = (v, out_idx, ders)
        if key not in cache:
            cache[key] = derivative_multi(contents[v].component(out_idx), ders)
        return cache[key]

    def descend(v):
        if v == n:
            value = None
            for u in range(n):
                factor = content(u)
                if not factor:
                    return
                value = factor if value is None else value * factor
                if not value:
                    return
            sinks = tuple(assignment[k] for k in sink_pos)
            tensor[sinks] = tensor[sinks] + value if sinks in tensor else value
            return
        for idx in product(range(d), repeat=len(out_pos[v])):
            if not contents[v].component(idx):
                continue
            for k, value in zip(out_pos[v], idx):
                assignment[k] = value
            descend(v + 1)

    descend(0)
    return tensor


def evaluate_graph(gs, contents, space):
    """
    Evaluate a graph sum on vertex contents.

    Every assignment of indices 0..d-1 to the edges contributes the product of
    the differentiated contents; the out-slots of a vertex pick its component
    in slot order. Sink indices become the legs of the result, which is
    projected onto its antisymmetric part.
    """
    p = gs.sink_count
    total = {}
    for coeff, graph in gs.terms:
        if len(contents) != graph.vertex_count:
            raise ArityMismatchError(f"{len(contents)} contents for {graph.vertex_count} vertices")
        for v in range(graph.vertex_count):
            if contents[v].degree != graph.out_degree(v):
                raise ArityMismatchError(
                    f"vertex {v} has out-degree {graph.out_degree(v)} but content of degree {contents[v].degree}"
                )
        for sinks, value in _evaluate_single(graph, contents, space).items():
            value = value * coeff
            total[sinks] = total[sinks] + value if sinks in total else value
    result = PolyVector.from_components(space, p, total)
    return result.times(Fraction(1, factorial(p))) if p > 1 else result


def _derivative_tables(P):
    d = P.space.dimension
    comp = {(i, j): P.component((i, j)) for i in range(d) for j in range(d)}
    d1 = {(i, j, t): total_derivative(comp[i, j], t) for (i, j) in comp for t in range(d)}
    d2 = {}
    for (i, j, t), value in d1.items():
        for s in range(t, d):
            d2[i, j, t, s] = total_derivative(value, s)
    for (i, j, t, s) in list(d2):
        d2[i, j, s, t] = d2[i, j, t, s]
    return comp, d1, d2


def _accumulate(target, key, value):
    if value:
        target[key] = target[key] + value if key in target else value


def q_tetra(P):
    """
    Tetrahedral flow by its index formula, computed in stages.

    Q^{ij} = C1^{ij} + 3 (C2^{ij} - C2^{ji}) with
    C1^{ij} = d_klm P^{ij} d_l' P^{kk'} d_m' P^{ll'} d_k' P^{mm'} and
    C2^{im} = d_kl P^{ij} d_k'l' P^{km} d_m' P^{k'l} d_j P^{m'l'}.
    """
    space = P.space
    d = space.dimension
    started = time.perf_counter()
    comp, d1, d2 = _derivative_tables(P)
    zero = DiffPoly.zero(space)

    triple = {}
    for k, l, m in product(range(d), repeat=3):
        s = zero
        for kp, lp, mp in product(range(d), repeat=3):
            a, b, c = d1[k, kp, lp], d1[l, lp, mp], d1[m, mp, kp]
            if a and b and c:
                s = s + a * b * c
        if s:
            key = tuple(sorted((k, l, m)))
            triple[key] = triple[key] + s if key in triple else s

    c1 = {}
    for (k, l, m), s in triple.items():
        for i, j in combinations(range(d), 2):
            third = derivative_multi(comp[i, j], (k, l, m))
            if third:
                _accumulate(c1, (i, j), third * s)

    u = {}
    for kp, l, j, lp in product(range(d), repeat=4):
        s = zero
        for mp in range(d):
            a, b = d1[kp, l, mp], d1[mp, lp, j]
            if a and b:
                s = s + a * b
        if s:
            u[kp, l, j, lp] = s

    y = {}
    for i, k in product(range(d), repeat=2):
        for (kp, l, j, lp), value in u.items():
            a = d2[i, j, k, l]
            if a:
                _accumulate(y, (i, k, kp, lp), a * value)

    c2 = {}
    for (i, k, kp, lp), value in y.items():
        for m in range(d):
            b = d2[k, m, kp, lp]
            if b:
                _accumulate(c2, (i, m), value * b)

    components = {}
    for i, j in combinations(range(d), 2):
        value = c1.get((i, j), zero) + (c2.get((i, j), zero) - c2.get((j, i), zero)) * 3
        if value:
            components[(i, j)] = value
    logger.info("Tetrahedral flow over R^%d in %.2fs", d, time.perf_counter() - started)
    return PolyVector(space, 2, components)


def tetra_flow(P, method="formula"):
    """Tetrahedral flow of a bivector, by the index formula or by graph evaluation"""
    if P.degree != 2:
        raise ValueError("the tetrahedral flow acts on bivectors")
    if method == "formula":
        return q_tetra(P)
    if method == "graph":
        return graph_flow(tetra_graph_sum(), P)
    raise ValueError(f"unknown method {method!r}")


def graph_flow(gs, P):
    """Flow of P along a graph sum whose every vertex carries P"""
    arities = {graph.vertex_count for _, graph in gs.terms}
    if len(arities) != 1:
        raise ArityMismatchError(f"graphs disagree on the number of vertices: {sorted(arities)}")
    return evaluate_graph(gs, [P] * arities.pop(), P.space)


# induced velocities


@dataclass
class Velocities:
    """Velocities of the Casimirs and of the inverse density"""

    adots: tuple
    rhodot: object

    def counts(self):
        return {"adots": [len(a) for a in self.adots], "rhodot": len(self.rhodot)}


def reassemble_flow(data, adots, rhodot=None):
    """P(rhodot, [a]) + sum_l P(rho, [a1], ..., [adot_l], ...)"""
    total = PolyVector(data.space, 2)
    for l, adot in enumerate(adots):
        if adot:
            total = total + nambu_bivector(data.with_casimir(l, adot))
    if rhodot:
        total = total + nambu_bivector(data.with_density(rhodot))
    return total


def extract_density_velocity(data, dotP, adots):
    """
    rhodot as the common quotient of the residual bivector by the unit-density
    Nambu bivector, component by component.
    """
    residual = dotP - reassemble_flow(data, adots)
    if not residual:
        return DiffPoly.zero(data.space)
    unit = nambu_bivector(data.with_density(None))
    quotient = None
    for key in sorted(set(residual.components) | set(unit.components)):
        r, n = residual.component(key), unit.component(key)
        if not n:
            if r:
                raise InconsistentComponentsError(f"residual component {key} is nonzero where the determinant vanishes")
            continue
        try:
            q = exact_divide(r, n)
        except NotDivisibleError as exc:
            raise NotDivisibleError(f"component {key}: {exc}") from None
        if quotient is None:
            quotient = q
        elif q != quotient:
            raise InconsistentComponentsError(f"component {key} gives a different quotient")
        logger.debug("Component %s divided: %d terms", key, len(q))
    return quotient if quotient is not None else DiffPoly.zero(data.space)


def letter_tuples(dimension, cap):
    """Sorted coordinate tuples of length 0..cap"""
    out = []
    for n in range(cap + 1):
        out.extend(combinations_with_replacement(range(dimension), n))
    return out


def candidate_monomials(dimension, factors, per_coordinate, cap):
    """
    Monomials with the given symbol multiplicities and exactly per_coordinate
    derivatives along every coordinate, each factor of order at most cap.

    factors is a list of (symbol rank, multiplicity).
    """
    choices = letter_tuples(dimension, cap)
    slots = [rank for rank, count in factors for _ in range(count)]
    need = [per_coordinate] * dimension
    out = []
    picked = []

    def descend(pos, start):
        if pos == len(slots):
            if not any(need):
                mono = {}
                for rank, letters in zip(slots, picked):
                    var = JetVar(rank, len(letters), letters)
                    mono[var] = mono.get(var, 0) + 1
                out.append(tuple(sorted(mono.items())))
            return
        if sum(need) > (len(slots) - pos) * cap:
            return
        rank = slots[pos]
        first = start if pos and slots[pos - 1] == rank else 0
        for idx in range(first, len(choices)):
            letters = choices[idx]
            if any(letters.count(k) > need[k] for k in set(letters)):
                continue
            for k in letters:
                need[k] -= 1
            picked.append(letters)
            descend(pos + 1, idx)
            picked.pop()
            for k in letters:
                need[k] += 1

    descend(0, 0)
    return out


def _velocity_coefficients(data):
    """
    C[l][(i, j)][t]: coefficient of D_t adot_l in component (i, j), and the
    unit-density determinant N[(i, j)] multiplying rhodot.
    """
    space = data.space
    d = space.dimension
    gradients = [[total_derivative(a, k) for k in range(d)] for a in data.casimirs]
    one = DiffPoly.constant(space, 1)
    density = data.density if data.density is not None else one
    coeffs = [{} for _ in data.casimirs]
    determinant = {}
    for i, j in combinations(range(d), 2):
        rest = [k for k in range(d) if k not in (i, j)]
        det = DiffPoly.zero(space)
        for order in permutations(rest):
            sign = civita_sign(tuple(order) + (i, j))
            full = DiffPoly.constant(space, sign)
            for l, t in enumerate(order):
                full = full * gradients[l][t]
                partial = DiffPoly.constant(space, sign) * density
                for m, s in enumerate(order):
                    if m != l:
                        partial = partial * gradients[m][s]
                slot = coeffs[l].setdefault((i, j), {})
                slot[t] = slot[t] + partial if t in slot else partial
            det = det + full
        determinant[(i, j)] = det
    return coeffs, determinant


def _unknown_images(job):
    """Rows hit by each unknown; a module-level worker for ordered_map"""
    space, kind, coefficients, bases = job
    images = []
    for terms in bases:
        poly = DiffPoly(space, dict(terms))
        column = {}
        for key, value in coefficients.items():
            if kind == "adot":
                image = DiffPoly.zero(space)
                for t, c in value.items():
                    if c:
                        image = image + c * total_derivative(poly, t)
            else:
                image = value * poly
            for mono, coeff in image.terms.items():
                column[(key, mono)] = coeff
        images.append(column)
    return images


def _chunks(items, size):
    return [items[k:k + size] for k in range(0, len(items), size)]


def induce_velocities(data, dotP, order_cap=3, jobs=1, skew_ansatz=True, profiles=None):
    """
    Velocities adot_l and rhodot with
    dotP = P(rhodot, [a]) + sum_l P(rho, [a1], ..., [adot_l], ...).

    Candidates have the homogeneity of the flow and (n-1) derivatives along
    every coordinate, each factor of order <= order_cap. With skew_ansatz the
    unknowns are signed diagonal orbit sums; profiles optionally restricts the
    candidates to the given profile labels. Raises NoSolutionError when the
    flow leaves the Nambu class and NonUniqueSolutionError on a kernel.
    """
    space = data.space
    d = space.dimension
    names = data.casimir_symbols
    if d < 3:
        raise ValueError("velocity induction needs at least one Casimir, so d >= 3")
    if names is None or (data.density is not None and data.density_symbol is None):
        raise ValueError("velocity induction needs symbolic density and Casimirs")
    zero = DiffPoly.zero(space)
    if not dotP:
        return Velocities(tuple(zero for _ in names), zero)

    started = time.perf_counter()
    ranks = [symbol_rank(name) for name in names]
    key = next(iter(sorted(dotP.components)))
    sample = next(iter(dotP.components[key].terms))
    n = sum(exp for var, exp in sample if var.rank == ranks[0])
    mu = n - 1
    logger.info("Inducing velocities over R^%d: n = %d, %d derivatives per coordinate", d, n, mu)

    density_rank = symbol_rank(data.density_symbol) if data.density is not None else None
    unknown_groups = []
    for l, rank in enumerate(ranks):
        factors = [(r, n if r == rank else mu) for r in ranks]
        if density_rank is not None:
            factors.insert(0, (density_rank, mu))
        unknown_groups.append((("adot", l), factors))
    if density_rank is not None:
        unknown_groups.append((("rhodot", 0), [(density_rank, n)] + [(r, mu) for r in ranks]))

    coefficients, determinant = _velocity_coefficients(data)
    system = SparseSystem()
    bases_by_group = {}
    for group, factors in unknown_groups:
        monomials = candidate_monomials(d, factors, mu, order_cap)
        if profiles is not None:
            monomials = [m for m in monomials if profile_label(m) in profiles]
        if skew_ansatz:
            bases = skew_orbit_basis(monomials, d, mu)
        else:
            bases = [{m: 1} for m in monomials]
        bases = [tuple(sorted(b.items())) for b in bases]
        bases_by_group[group] = bases
        logger.info("%s: %d candidates, %d unknowns", group, len(monomials), len(bases))

        kind, l = group
        coeff_map = coefficients[l] if kind == "adot" else determinant
        jobs_list = [(space, kind, coeff_map, chunk) for chunk in _chunks(bases, 64)]
        images = [image for part in ordered_map(_unknown_images, jobs_list, jobs) for image in part]
        for index, column in enumerate(images):
            system.add_column_vector((kind, l, index), column)

    for key, value in sorted(dotP.components.items()):
        for mono, coeff in value.terms.items():
            system.add_rhs((key, mono), coeff)

    result = solve(system)
    if not result.feasible:
        raise NoSolutionError(
            f"no velocities reproduce the flow; contradictory row {result.certificate[0]}",
            certificate=result.certificate,
        )
    if result.nullspace:
        raise NonUniqueSolutionError(
            f"velocity system has a {len(result.nullspace)}-dimensional kernel",
            kernel_dimension=len(result.nullspace),
        )

    def assemble(group):
        kind, l = group
        terms = {}
        for index, basis in enumerate(bases_by_group[group]):
            c = result.solution[(kind, l, index)]
            if not c:
                continue
            for mono, sign in basis:
                value = terms.get(mono, 0) + c * sign
                if value:
                    terms[mono] = value
                else:
                    del terms[mono]
        return DiffPoly.from_terms(space, terms)

    adots = tuple(assemble(("adot", l)) for l in range(len(ranks)))
    rhodot = assemble(("rhodot", 0)) if density_rank is not None else zero
    logger.info(
        "Velocities found in %.2fs: %s adot terms, %d rhodot terms",
        time.perf_counter() - started,
        [len(a) for a in adots],
        len(rhodot),
    )
    return Velocities(adots, rhodot)


