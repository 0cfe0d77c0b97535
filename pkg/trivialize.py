"""
Trivializing Vector Field
Checks that the tetrahedral flow over R^3 is [[P, X]] for the built-in X and
rebuilds such an X from a micro-graph ansatz
"""

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from pathlib import Path

from civita import expand_civita_formula, load_civita_fixture
from errors import NoSolutionError
from graphflow import induce_velocities, tetra_flow
from jetcalc import DiffPoly, JetVar, symbol_rank
from linalg import SparseSystem, solve
from multivec import PolyVector, schouten, sort_sign
from nambu import density_volume, nambu_bivector
from parallel import ordered_map

logger = logging.getLogger(__name__)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
X_FIXTURE = FIXTURES / "trivializing_x.txt"

SINK = -1
DENSITY_VERTICES = 3
CASIMIR_BASE = 3


def builtin_x_formula(path=X_FIXTURE):
    """The 11-marker formula and its three underlined markers"""
    _, _, formulas = load_civita_fixture(path)
    return formulas["x"], formulas.get("underlined")


def builtin_x_field(jobs=1, path=X_FIXTURE):
    """Full expansion of the built-in trivializing vector field"""
    formula, _ = builtin_x_formula(path)
    return expand_civita_formula(formula, jobs)


def underlined_action(data, jobs=1, path=X_FIXTURE):
    """
    X(a) for the full built-in X and for its underlined markers alone.

    The two agree because the other markers cancel on the Casimir.
    """
    formula, underlined = builtin_x_formula(path)
    a = data.casimirs[0]
    full = expand_civita_formula(formula, jobs).apply(a)
    partial = expand_civita_formula(underlined, jobs).apply(a)
    return full, partial


@dataclass
class CoboundaryReport:
    """flow - [[P, X]]"""

    residual: PolyVector
    flow_terms: int

    @property
    def ok(self):
        return self.residual.is_zero()

    def as_dict(self):
        return {"ok": self.ok, "flow_terms": self.flow_terms, "residual_terms": self.residual.term_count()}


def verify_coboundary(P, X, flow=None):
    """Residual of the flow against the Schouten coboundary of X"""
    if P.degree != 2 or X.degree != 1:
        raise ValueError("need a bivector and a vector field")
    if flow is None:
        flow = tetra_flow(P)
    residual = flow - schouten(P, X)
    logger.info("Coboundary residual has %d terms", residual.term_count())
    return CoboundaryReport(residual, flow.term_count())


@dataclass
class VelocityConsistencyReport:
    """adot = -X(a) and rhodot * vol = [[rho * vol, X]]"""

    adot_matches: bool
    rhodot_matches: bool
    adot_terms: int
    rhodot_terms: int

    @property
    def ok(self):
        return self.adot_matches and self.rhodot_matches

    def as_dict(self):
        return {
            "ok": self.ok,
            "adot_matches": self.adot_matches,
            "rhodot_matches": self.rhodot_matches,
            "adot_terms": self.adot_terms,
            "rhodot_terms": self.rhodot_terms,
        }


def verify_velocity_consistency(data, X, velocities=None, jobs=1):
    """
    Compare the velocities induced by the flow with those generated by X.

    The density identity is rhodot * vol = [[rho * vol, X]] = -[[X, rho * vol]],
    the form forced by the graded Jacobi identity with [[P, X]] as the flow.
    """
    if data.space.dimension != 3:
        raise ValueError("velocity consistency is checked over R^3")
    if velocities is None:
        velocities = induce_velocities(data, tetra_flow(nambu_bivector(data)), jobs=jobs)
    adot = velocities.adots[0]
    adot_matches = adot == -X.apply(data.casimirs[0])
    generated = schouten(density_volume(data), X)
    expected = PolyVector.top(data.space, velocities.rhodot)
    rhodot_matches = generated == expected
    return VelocityConsistencyReport(adot_matches, rhodot_matches, len(adot), len(velocities.rhodot))


# micro-graphs


def _target_name(target):
    if target == SINK:
        return "s"
    if target < CASIMIR_BASE:
        return f"r{target}"
    return f"a{target - CASIMIR_BASE}"


@dataclass(frozen=True)
class MicroGraph:
    """
    Three density vertices 0..2 carrying rho * eps with three ordered out-edges,
    Casimir vertices 3..5 and one sink (-1) of in-degree 1.

    targets[v] lists the heads of the out-edges of density vertex v in slot
    order; an edge from v to v is a tadpole.
    """

    targets: tuple

    def __post_init__(self):
        targets = tuple(tuple(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != DENSITY_VERTICES or any(len(t) != 3 for t in targets):
            raise ValueError("every density vertex needs exactly three out-edges")
        if sum(t.count(SINK) for t in targets) != 1:
            raise ValueError("the sink must have in-degree 1")
        for heads in targets:
            for head in heads:
                if not (head == SINK or 0 <= head < CASIMIR_BASE + 3):
                    raise ValueError(f"edge to unknown vertex {head}")

    @property
    def has_tadpole(self):
        return any(v in heads for v, heads in enumerate(self.targets))

    def in_edges(self, vertex):
        return [(v, slot) for v, heads in enumerate(self.targets) for slot, head in enumerate(heads) if head == vertex]

    def relabeled(self, density_perm, casimir_perm):
        """Apply vertex permutations; slots keep their order"""

        def image(head):
            if head == SINK:
                return SINK
            if head < CASIMIR_BASE:
                return density_perm[head]
            return CASIMIR_BASE + casimir_perm[head - CASIMIR_BASE]

        new = [None] * DENSITY_VERTICES
        for v, heads in enumerate(self.targets):
            new[density_perm[v]] = tuple(image(h) for h in heads)
        return MicroGraph(tuple(new))

    def canonical(self):
        """(sign, canonical graph): minimal slot-sorted relabeling, sign of the slot sorting"""
        best = None
        for density_perm in permutations(range(DENSITY_VERTICES)):
            for casimir_perm in permutations(range(3)):
                graph = self.relabeled(density_perm, casimir_perm)
                sign = 1
                rows = []
                for heads in graph.targets:
                    s, ordered = sort_sign(heads)
                    sign *= s
                    rows.append(ordered)
                key = tuple(rows)
                if best is None or key < best[1]:
                    best = (sign, key)
        return best[0], MicroGraph(best[1])

    def to_text(self):
        return " ".join(
            f"r{v}(" + ",".join(_target_name(h) for h in heads) + ")" for v, heads in enumerate(self.targets)
        )


def enumerate_micro_graphs(allow_tadpoles=True):
    """Canonical micro-graphs, one per isomorphism class, in sorted order"""
    heads = [SINK] + list(range(CASIMIR_BASE + 3))
    subsets = list(combinations(heads, 3))
    seen = set()
    for rows in product(subsets, repeat=DENSITY_VERTICES):
        if sum(row.count(SINK) for row in rows) != 1:
            continue
        if not allow_tadpoles and any(v in row for v, row in enumerate(rows)):
            continue
        _, canonical = MicroGraph(rows).canonical()
        seen.add(canonical.targets)
    return [MicroGraph(targets) for targets in sorted(seen)]


def evaluate_micro_graph(graph, space, density="rho", casimir="a"):
    """
    Vector field of a micro-graph: sum over edge indices of the product of the
    differentiated rho's, the Civita signs and the differentiated Casimirs; the
    index on the sink edge is the output direction.
    """
    d = space.dimension
    rho_rank, a_rank = symbol_rank(density), symbol_rank(casimir)
    signed_perms = [(perm, sort_sign(perm)[0]) for perm in permutations(range(d))]
    in_edges = {v: graph.in_edges(v) for v in range(CASIMIR_BASE + 3)}
    sink_edge = graph.in_edges(SINK)[0]
    components = {}
    for choice in product(signed_perms, repeat=DENSITY_VERTICES):
        sign = 1
        for _, s in choice:
            sign *= s
        counts = {}
        for vertex in range(CASIMIR_BASE + 3):
            letters = tuple(sorted(choice[v][0][slot] for v, slot in in_edges[vertex]))
            rank = rho_rank if vertex < CASIMIR_BASE else a_rank
            var = JetVar(rank, len(letters), letters)
            counts[var] = counts.get(var, 0) + 1
        mono = tuple(sorted(counts.items()))
        out = choice[sink_edge[0]][0][sink_edge[1]]
        terms = components.setdefault((out,), {})
        value = terms.get(mono, 0) + sign
        if value:
            terms[mono] = value
        else:
            del terms[mono]
    return PolyVector(space, 1, {key: DiffPoly(space, terms) for key, terms in components.items()})


@dataclass
class TrivializationResult:
    """Affine solution set of [[P, sum c_g X_g]] = flow over the micro-graphs"""

    feasible: bool
    graphs: list = field(default_factory=list)
    coefficients: dict = field(default_factory=dict)
    kernel: list = field(default_factory=list)
    vector_field: PolyVector = None
    certificate: object = None

    def dump(self):
        """(micro-graph encoding, coefficient) for the particular solution"""
        return [(self.graphs[k].to_text(), c) for k, c in sorted(self.coefficients.items()) if c]


def _graph_job(job):
    graph, space, P = job
    field_ = evaluate_micro_graph(graph, space)
    if not field_:
        return None, None
    return field_, schouten(P, field_)


def solve_trivialization(data, allow_tadpoles=True, flow=None, jobs=1, raise_on_infeasible=False):
    """
    Solve [[P, X]] = flow with X a rational combination of micro-graphs.

    Graphs evaluating to zero are discarded before assembly. The result holds
    a particular solution (free coefficients zero) and the kernel; flow
    defaults to the tetrahedral flow of P.
    """
    if data.space.dimension != 3:
        raise ValueError("the micro-graph ansatz is built for R^3")
    started = time.perf_counter()
    P = nambu_bivector(data)
    if flow is None:
        flow = tetra_flow(P)
    graphs = enumerate_micro_graphs(allow_tadpoles)
    logger.info("%d micro-graphs up to isomorphism (tadpoles %s)", len(graphs), allow_tadpoles)

    evaluated = ordered_map(_graph_job, [(g, data.space, P) for g in graphs], jobs, chunksize=16)
    kept, fields, images = [], [], []
    for graph, (field_, image) in zip(graphs, evaluated):
        if field_ is None:
            continue
        kept.append(graph)
        fields.append(field_)
        images.append(image)
    logger.info("%d micro-graphs evaluate to nonzero fields", len(kept))

    system = SparseSystem()
    for index, image in enumerate(images):
        column = {}
        for key, value in image.components.items():
            for mono, coeff in value.terms.items():
                column[(key, mono)] = coeff
        system.add_column_vector(index, column)
    for key, value in sorted(flow.components.items()):
        for mono, coeff in value.terms.items():
            system.add_rhs((key, mono), coeff)

    result = solve(system)
    logger.info("Trivialization system solved in %.2fs", time.perf_counter() - started)
    if not result.feasible:
        if raise_on_infeasible:
            raise NoSolutionError("no micro-graph combination trivializes the flow", result.certificate)
        return TrivializationResult(False, kept, certificate=result.certificate)

    X = PolyVector(data.space, 1)
    for index, coeff in result.solution.items():
        if coeff:
            X = X + fields[index].times(coeff)
    return TrivializationResult(
        True,
        kept,
        coefficients={k: Fraction(c) for k, c in result.solution.items()},
        kernel=result.nullspace,
        vector_field=X,
    )

