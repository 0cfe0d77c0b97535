"""
Command line for the Nambu flow toolkit
Each subcommand runs one computation, prints a deterministic report on stdout
and exits 0 when every check passes, 1 on a failed check, 2 on bad input
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from civita import collapse_search, expand_civita_formula, extra_symmetry_check, load_civita_fixture, partition_by_profile
from errors import ConfigurationError, ExpressionSyntaxError, FixtureFormatError, NambuFlowError
from graphflow import (
    Velocities,
    extract_density_velocity,
    graph_flow,
    induce_velocities,
    load_graph_sum,
    reassemble_flow,
    tetra_flow,
    tetra_graph_sum,
)
from jetcalc import BaseSpace, DiffPoly, load_expression_fixture, parse, to_text
from multivec import PolyVector
from nambu import (
    NambuData,
    casimir_search,
    hamiltonian_field,
    jacobi_check,
    minors,
    nambu_bivector,
    nambu_via_schouten,
    preset_bivector,
)
from pdf_report import Check, VerificationReportPDF, render_check_lines
from profile_tables import (
    EXPECTED_3D_ADOT,
    EXPECTED_3D_RHODOT,
    EXPECTED_4D_A1DOT,
    EXPECTED_4D_UNIT_A1DOT,
    profile_table,
    swap_casimir_labels,
    table_matches,
    table_text,
    table_total,
)
from report_store import ResultStore
from run_config import DEFAULTS, RunConfig
from trivialize import builtin_x_field, solve_trivialization, underlined_action, verify_coboundary, verify_velocity_consistency

logger = logging.getLogger(__name__)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
VELOCITY_FIXTURE = FIXTURES / "adot_rhodot_g3_3D.txt"
COLLAPSED = {
    (3, "symbolic"): FIXTURES / "collapsed_g3_3D.txt",
    (4, "unit"): FIXTURES / "collapsed_g3_4D_unit.txt",
    (4, "symbolic"): FIXTURES / "collapsed_g3_4D.txt",
}

# Term counts of the tetrahedral velocities
EXPECTED_COUNTS = {
    (3, "symbolic"): {"adot": 228, "rhodot": 426},
    (4, "unit"): {"a1dot": 9024, "a2dot": 9024},
    (4, "symbolic"): {"a1dot": 33048, "a2dot": 33048, "rhodot": 90024},
}
FLOW_COMPONENT_TERMS_3D = 1504
# Copies of the Civita symbol in the tetrahedral velocities, one per vertex but the sink
TUPLES = 3
# Profile with a two-dimensional span of marker sums
RANK_TWO_PROFILES = {"a1:1123 a2:112 rho:001", "a1:112 a2:1123 rho:001"}
BUILTIN_GRAPHS = {"g3": tetra_graph_sum}


def _first_term(poly):
    mono = sorted(poly.terms)[0]
    return to_text(DiffPoly(poly.space, {mono: poly.terms[mono]}))


class Report:
    """Checks, free-form lines and structured results of one subcommand"""

    def __init__(self, title):
        self.title = title
        self.checks = []
        self.lines = []
        self.results = {}
        self.tables = {}

    def check(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))
        return passed

    def counts_check(self, name, poly, expected):
        found = len(poly)
        return self.check(name, found == expected, f"{found} terms, expected {expected}")

    def equality_check(self, name, left, right):
        """Equality with the first differing term as detail"""
        if left == right:
            return self.check(name, True)
        diff = left - right
        if isinstance(diff, PolyVector):
            key = sorted(diff.components)[0]
            detail = f"component {key}: first difference {_first_term(diff.components[key])}"
        else:
            detail = f"first difference {_first_term(diff)}"
        return self.check(name, False, detail)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)


def _space(config):
    return BaseSpace(config.dim)


def _data(config):
    return NambuData.symbolic(_space(config), density=not config.unit_density)


def _velocity_fixture(space):
    blocks = load_expression_fixture(VELOCITY_FIXTURE, space)
    try:
        return blocks["adot"], blocks["rhodot"]
    except KeyError as e:
        raise FixtureFormatError(f"{VELOCITY_FIXTURE}: missing block {e}") from None


def _collapsed_fixture(config):
    key = (config.dim, config.rho)
    if key not in COLLAPSED:
        raise ConfigurationError(f"no collapsed formulas ship for R^{config.dim} with {config.rho} rho")
    space, tuples, formulas = load_civita_fixture(COLLAPSED[key])
    if space.dimension != config.dim:
        raise FixtureFormatError(f"{COLLAPSED[key]} is a fixture for R^{space.dimension}")
    return tuples, formulas


# subcommands


def cmd_jacobi(config, args, report):
    space = _space(config)
    data = None
    if args.preset:
        P = preset_bivector(args.preset, space)
        report.lines.append(P.to_text())
    else:
        data = _data(config)
        P = nambu_bivector(data)
    report.equality_check("jacobi", jacobi_check(P), PolyVector(space, 3))
    if data is not None:
        for index, casimir in enumerate(data.casimirs):
            report.check(f"casimir-{index + 1}", hamiltonian_field(P, casimir).is_zero())
        report.equality_check("schouten-construction", nambu_via_schouten(data), P)
    if space.dimension >= 3:
        nonzero = [key for key, value in minors(P, 3) if value]
        report.check("rank-at-most-2", not nonzero, f"{len(nonzero)} nonzero 3x3 minors" if nonzero else "")
    report.results["bivector"] = P


def _flow(args, P, method="formula"):
    """Flow along --graph when given, else along the built-in --gamma cocycle"""
    if args.graph:
        return graph_flow(load_graph_sum(Path(args.graph).read_text()), P)
    if method == "graph":
        return graph_flow(BUILTIN_GRAPHS[args.gamma](), P)
    return tetra_flow(P)


def cmd_flow(config, args, report):
    data = _data(config)
    P = nambu_bivector(data)
    flow = _flow(args, P, args.method)
    counts = {str(key): len(value) for key, value in sorted(flow.components.items())}
    report.results["component_terms"] = counts
    report.lines.append(f"nonzero components: {len(counts)}")
    for key, count in counts.items():
        report.lines.append(f"component {key}: {count} terms")
    # published expectations cover the built-in cocycle only
    if config.dim == 3 and config.unit_density and not args.graph:
        report.check("flow-vanishes", flow.is_zero(), f"{flow.term_count()} terms")
    elif config.dim == 3 and not args.graph:
        bad = {key: count for key, count in counts.items() if count != FLOW_COMPONENT_TERMS_3D}
        report.check(
            "component-terms",
            len(counts) == 3 and not bad,
            f"expected {FLOW_COMPONENT_TERMS_3D} per component" + (f", got {bad}" if bad else ""),
        )
    if args.print_flow:
        report.lines.append(flow.to_text("Q"))
    report.results["flow"] = flow


def _expected_counts(config, report, velocities):
    expected = EXPECTED_COUNTS.get((config.dim, config.rho))
    if not expected:
        return
    names = list(expected)
    polys = list(velocities.adots) + ([velocities.rhodot] if "rhodot" in expected else [])
    for name, poly in zip(names, polys):
        report.counts_check(f"{name}-terms", poly, expected[name])


def cmd_induce(config, args, report):
    data = _data(config)
    flow = _flow(args, nambu_bivector(data))
    velocities = induce_velocities(data, flow, order_cap=config.order_cap, jobs=config.jobs)
    if not args.graph:
        _expected_counts(config, report, velocities)
    report.equality_check("reassembly", reassemble_flow(data, velocities.adots, velocities.rhodot), flow)
    if data.density is not None:
        report.equality_check(
            "division-path", extract_density_velocity(data, flow, velocities.adots), velocities.rhodot
        )
    for l, adot in enumerate(velocities.adots):
        name = "adot" if config.dim == 3 else f"a{l + 1}dot"
        report.lines.append(f"{name} = {to_text(adot)}")
        report.results[name] = adot
    if data.density is not None:
        report.lines.append(f"rhodot = {to_text(velocities.rhodot)}")
        report.results["rhodot"] = velocities.rhodot


def _profile_sources(config, args):
    """{name: (DiffPoly, expected counts)} for the velocities of the current settings"""
    space = _space(config)
    if config.dim == 3:
        if args.source == "induce":
            data = _data(config)
            velocities = induce_velocities(data, tetra_flow(nambu_bivector(data)), config.order_cap, config.jobs)
            adot, rhodot = velocities.adots[0], velocities.rhodot
        else:
            adot, rhodot = _velocity_fixture(space)
        return {"adot": (adot, EXPECTED_3D_ADOT), "rhodot": (rhodot, EXPECTED_3D_RHODOT)}

    expected = EXPECTED_4D_UNIT_A1DOT if config.unit_density else EXPECTED_4D_A1DOT
    if args.source == "induce":
        data = _data(config)
        velocities = induce_velocities(data, tetra_flow(nambu_bivector(data)), config.order_cap, config.jobs)
        a1dot, a2dot = velocities.adots
    else:
        _, formulas = _collapsed_fixture(config)
        a1dot = expand_civita_formula(formulas["a1dot"], config.jobs)
        a2dot = expand_civita_formula(formulas["a2dot"], config.jobs)
    return {"a1dot": (a1dot, expected), "a2dot": (a2dot, swap_casimir_labels(expected))}


def _span_checks(config, report, name, poly):
    """Exhaustive marker check per profile: rank 1 everywhere but the rank-two profiles"""
    for label, part in partition_by_profile(poly).items():
        symmetry = extra_symmetry_check(part, TUPLES, jobs=config.jobs)
        want = 2 if label in RANK_TWO_PROFILES else 1
        report.check(
            f"{name} {label} span",
            symmetry.minimal_rank == want,
            f"rank {symmetry.minimal_rank}, expected {want}",
        )


def cmd_profiles(config, args, report):
    for name, (poly, expected) in _profile_sources(config, args).items():
        df = profile_table(poly, expected)
        report.tables[name] = df
        report.lines.append(f"[{name}] {table_total(df)} terms")
        report.lines.append(table_text(df))
        report.check(f"{name}-profiles", table_matches(df))
        report.results[f"{name}_profiles"] = {row.profile: int(row.monomials) for row in df.itertuples()}
        if args.symmetry:
            _span_checks(config, report, name, poly)


def _collapse_targets(config):
    space = _space(config)
    if config.dim == 3:
        adot, rhodot = _velocity_fixture(space)
        return {"adot": adot, "rhodot": rhodot}
    _, formulas = _collapsed_fixture(config)
    return {name: expand_civita_formula(formula, config.jobs) for name, formula in formulas.items()}


def cmd_collapse(config, args, report):
    for name, target in _collapse_targets(config).items():
        formula = collapse_search(target, TUPLES, monomial_limit=args.monomial_limit)
        report.lines.append(f"[{name}] {len(formula)} markers")
        report.lines.append(formula.to_text())
        report.equality_check(f"{name}-collapse", expand_civita_formula(formula, config.jobs), target)
        report.results[f"{name}_formula"] = formula.to_text()


def cmd_verify_collapsed(config, args, report):
    space = _space(config)
    _, formulas = _collapsed_fixture(config)
    expanded = {name: expand_civita_formula(formula, config.jobs) for name, formula in formulas.items()}
    for name, poly in expanded.items():
        report.lines.append(f"{name}: {len(poly)} terms")
        report.results[name] = poly

    if config.dim == 3:
        adot, rhodot = _velocity_fixture(space)
        report.equality_check("adot", expanded["adot"], adot)
        report.equality_check("rhodot", expanded["rhodot"], rhodot)
        return

    data = _data(config)
    adots = (expanded["a1dot"], expanded["a2dot"])
    flow = tetra_flow(nambu_bivector(data))
    if config.unit_density:
        for name in ("a1dot", "a2dot"):
            report.counts_check(f"{name}-terms", expanded[name], EXPECTED_COUNTS[(4, "unit")][name])
        report.equality_check("reassembly", reassemble_flow(data, adots), flow)
        return

    df = profile_table(expanded["a1dot"], EXPECTED_4D_A1DOT)
    report.tables["a1dot"] = df
    report.check("a1dot-profiles", table_matches(df), f"{table_total(df)} terms")
    _span_checks(config, report, "a1dot", expanded["a1dot"])
    rhodot = extract_density_velocity(data, flow, adots)
    report.lines.append(f"rhodot: {len(rhodot)} terms")
    report.counts_check("rhodot-terms", rhodot, EXPECTED_COUNTS[(4, "symbolic")]["rhodot"])
    report.equality_check("reassembly", reassemble_flow(data, adots, rhodot), flow)


def cmd_trivialize(config, args, report):
    data = NambuData.symbolic(BaseSpace(3))
    result = solve_trivialization(data, allow_tadpoles=not args.no_tadpoles, jobs=config.jobs)
    report.lines.append(f"micro-graphs with nonzero fields: {len(result.graphs)}")
    if not report.check("feasible", result.feasible, "" if result.feasible else "no micro-graph combination"):
        return
    report.lines.append(f"kernel dimension: {len(result.kernel)}")
    for encoding, coeff in result.dump():
        report.lines.append(f"{coeff} {encoding}")
    coboundary = verify_coboundary(nambu_bivector(data), result.vector_field)
    report.check("coboundary", coboundary.ok, f"{coboundary.residual.term_count()} residual terms")
    report.results["solution"] = [[encoding, coeff] for encoding, coeff in result.dump()]
    report.results["x"] = result.vector_field


def cmd_verify_x(config, args, report):
    space = BaseSpace(3)
    data = NambuData.symbolic(space)
    X = builtin_x_field(config.jobs)
    report.lines.append(f"X: {X.term_count()} terms")
    coboundary = verify_coboundary(nambu_bivector(data), X)
    report.check("coboundary", coboundary.ok, f"{coboundary.residual.term_count()} residual terms")
    adot, rhodot = _velocity_fixture(space)
    consistency = verify_velocity_consistency(data, X, Velocities((adot,), rhodot))
    report.check("adot-from-x", consistency.adot_matches)
    report.check("rhodot-from-x", consistency.rhodot_matches)
    full, partial = underlined_action(data, config.jobs)
    report.equality_check("underlined-markers", partial, full)
    report.results["x"] = X


def cmd_casimir_search(config, args, report):
    space = _space(config)
    P = preset_bivector(args.preset, space)
    basis = casimir_search(P, args.degree)
    report.lines.append(f"{len(basis)} Casimirs up to degree {args.degree}")
    for c in basis:
        report.lines.append(to_text(c))
    bad = [to_text(c) for c in basis if not hamiltonian_field(P, c).is_zero()]
    report.check("casimirs-commute", not bad, ", ".join(bad))
    report.results["casimirs"] = [to_text(c) for c in basis]


def cmd_velocity_check(config, args, report):
    space = BaseSpace(3)
    blocks = load_expression_fixture(args.path, space)
    missing = {"adot", "rhodot"} - set(blocks)
    if missing:
        raise FixtureFormatError(f"{args.path}: missing blocks {sorted(missing)}")
    adot, rhodot = blocks["adot"], blocks["rhodot"]
    report.counts_check("adot-terms", adot, 228)
    report.counts_check("rhodot-terms", rhodot, 426)
    for name, poly in (("adot", adot), ("rhodot", rhodot)):
        report.equality_check(f"{name}-print-roundtrip", parse(to_text(poly), space), poly)
    data = NambuData.symbolic(space)
    flow = tetra_flow(nambu_bivector(data))
    report.equality_check("reassembly", reassemble_flow(data, (adot,), rhodot), flow)
    if args.induce:
        velocities = induce_velocities(data, flow, order_cap=config.order_cap, jobs=config.jobs)
        report.check("adot-induced", to_text(velocities.adots[0]) == to_text(adot))
        report.check("rhodot-induced", to_text(velocities.rhodot) == to_text(rhodot))


COMMANDS = {
    "jacobi": (cmd_jacobi, "Jacobi identity, Casimirs and rank of a Nambu bivector"),
    "flow": (cmd_flow, "Tetrahedral flow of the Nambu bivector"),
    "induce": (cmd_induce, "Velocities of the Casimirs and density inducing the flow"),
    "profiles": (cmd_profiles, "Monomial counts per differential profile"),
    "collapse": (cmd_collapse, "Search Civita formulas for the velocities"),
    "verify-collapsed": (cmd_verify_collapsed, "Expand the shipped Civita formulas and compare"),
    "trivialize": (cmd_trivialize, "Solve the micro-graph ansatz for a trivializing field"),
    "verify-x": (cmd_verify_x, "Check the built-in trivializing vector field"),
    "casimir-search": (cmd_casimir_search, "Polynomial Casimirs of a preset bivector"),
    "appendix-check": (cmd_velocity_check, "Check a velocity fixture against the flow"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, help=f"base dimension (default {DEFAULTS['dim']})")
    common.add_argument("--rho", choices=["symbolic", "unit"], help="density: jet symbol or rho = 1")
    common.add_argument("--order-cap", type=int, dest="order_cap", help="maximal derivative order in ansatz")
    common.add_argument("--heavy", action="store_true", default=None, help="allow runs that take hours")
    common.add_argument("--format", choices=["text", "json"], dest="output_format", help="stdout format")
    common.add_argument("--jobs", type=int, help="worker processes (default NAMBUFLOW_JOBS or CPU count)")
    common.add_argument("--log-level", dest="log_level", help="logging level (default WARNING)")
    common.add_argument("-v", "--verbose", action="store_true", help="shortcut for --log-level INFO")
    common.add_argument("--pdf", help="also write a PDF report to this path")
    common.add_argument("--json-out", dest="json_out", help="also write results as JSON to this path")

    parser = argparse.ArgumentParser(prog="nambuflow", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}

    parsers["jacobi"].add_argument("--preset", help="euler-top, log-symplectic or power-wedge-<k>")
    for name in ("flow", "induce"):
        parsers[name].add_argument("--gamma", choices=sorted(BUILTIN_GRAPHS), default="g3", help="built-in graph cocycle")
        parsers[name].add_argument("--graph", help="graph-sum file to flow along instead of --gamma")
    parsers["flow"].add_argument("--method", choices=["formula", "graph"], default="formula")
    parsers["flow"].add_argument("--print", dest="print_flow", action="store_true", help="print all components")
    parsers["profiles"].add_argument("--source", choices=["fixture", "induce"], default="fixture")
    parsers["profiles"].add_argument("--symmetry", action="store_true", help="also check marker spans")
    parsers["collapse"].add_argument("--monomial-limit", dest="monomial_limit", type=int, default=3)
    parsers["trivialize"].add_argument("--no-tadpoles", dest="no_tadpoles", action="store_true")
    parsers["casimir-search"].add_argument("--preset", required=True)
    parsers["casimir-search"].add_argument("--degree", type=int, default=2)
    parsers["appendix-check"].add_argument("path", nargs="?", default=str(VELOCITY_FIXTURE))
    parsers["appendix-check"].add_argument("--induce", action="store_true", help="also recompute the velocities")
    return parser


def _emit(config, report):
    if config.output_format == "json":
        summary = {
            "command": config.command,
            "passed": report.passed,
            "checks": [{"name": c.name, "status": c.status, "detail": c.detail} for c in report.checks],
            "lines": report.lines,
        }
        print(json.dumps(summary, indent=2))
    else:
        for line in report.lines:
            print(line)
        for line in render_check_lines(report.checks):
            print(line)
        print("PASS" if report.passed else "FAIL")


def _write_outputs(config, report):
    if config.json_out:
        store = ResultStore()
        metadata = ResultStore.metadata(_space(config), config.rho, config.command)
        metadata["checks"] = {c.name: c.status for c in report.checks}
        Path(config.json_out).write_text(store.export_json(report.results, metadata))
        logger.info("Wrote results to %s", config.json_out)
    if config.pdf:
        settings = {"command": config.command, "dimension": config.dim, "rho": config.rho}
        VerificationReportPDF().write(config.pdf, report.title, report.checks, report.tables, settings)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = "INFO" if args.verbose else (args.log_level or DEFAULTS["log_level"])
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )

    try:
        config = RunConfig.from_args(args).validate()
        handler, title = COMMANDS[config.command]
        report = Report(title)
        handler(config, args, report)
        _write_outputs(config, report)
    except (ConfigurationError, ExpressionSyntaxError, FixtureFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NambuFlowError as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return 1

    _emit(config, report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
