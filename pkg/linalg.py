"""
Exact Sparse Linear Algebra
Fraction-free Gaussian elimination over the rationals for the linear systems
built by the Casimir search, the velocity induction and the trivialization ansatz
"""

import heapq
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

logger = logging.getLogger(__name__)


class SparseSystem:
    """Sparse system A x = b with hashable row and column keys kept in insertion order"""

    def __init__(self):
        self.rows = {}
        self.rhs = {}
        self.columns = {}

    def add_column(self, col):
        """Register an unknown even if it never receives an entry"""
        self.columns.setdefault(col, None)

    def add_row(self, row):
        self.rows.setdefault(row, {})

    def add_entry(self, row, col, value):
        if not value:
            return
        self.add_column(col)
        entries = self.rows.setdefault(row, {})
        total = entries.get(col, 0) + Fraction(value)
        if total:
            entries[col] = total
        else:
            del entries[col]

    def add_column_vector(self, col, vector):
        """Add a whole column given as {row key: value}"""
        self.add_column(col)
        for row, value in vector.items():
            self.add_entry(row, col, value)

    def add_rhs(self, row, value):
        if not value:
            self.add_row(row)
            return
        self.add_row(row)
        total = self.rhs.get(row, 0) + Fraction(value)
        if total:
            self.rhs[row] = total
        else:
            self.rhs.pop(row, None)

    @property
    def shape(self):
        return len(self.rows), len(self.columns)

    def residual(self, solution):
        """Rows where A x - b is nonzero, as {row key: value}"""
        out = {}
        for row, entries in self.rows.items():
            total = -self.rhs.get(row, 0)
            for col, value in entries.items():
                total += value * solution.get(col, 0)
            if total:
                out[row] = total
        return out

    def apply(self, vector):
        """A x without the right-hand side"""
        out = {}
        for row, entries in self.rows.items():
            total = sum((value * vector.get(col, 0) for col, value in entries.items()), Fraction(0))
            if total:
                out[row] = total
        return out


@dataclass
class SolveResult:
    """Outcome of solve(): a particular solution plus a kernel basis, or a certificate"""

    feasible: bool
    solution: dict = field(default_factory=dict)
    nullspace: list = field(default_factory=list)
    certificate: object = None
    rank: int = 0

    @property
    def unique(self):
        return self.feasible and not self.nullspace


def _content_reduce(row, rhs):
    g = abs(rhs)
    for value in row.values():
        g = gcd(g, value)
        if g == 1:
            return row, rhs
    if g > 1:
        row = {col: value // g for col, value in row.items()}
        rhs //= g
    return row, rhs


def _integer_row(entries, rhs, column_index):
    denominator = Fraction(rhs).denominator
    for value in entries.values():
        denominator = lcm(denominator, value.denominator)
    row = {
        column_index[col]: value.numerator * (denominator // value.denominator)
        for col, value in entries.items()
    }
    rhs = Fraction(rhs)
    b = rhs.numerator * (denominator // rhs.denominator)
    return _content_reduce(row, b)


class _Eliminator:
    """Forward elimination with shortest-row, sparsest-column pivoting"""

    def __init__(self, rows, rhs):
        self.rows = rows
        self.rhs = rhs
        self.col_rows = {}
        for i, row in enumerate(rows):
            for col in row:
                self.col_rows.setdefault(col, set()).add(i)
        self.pivots = []
        self.contradiction = None

    def run(self):
        rows, rhs, col_rows = self.rows, self.rhs, self.col_rows
        heap = [(len(row), i) for i, row in enumerate(rows)]
        heapq.heapify(heap)
        done = set()
        while heap:
            length, i = heapq.heappop(heap)
            if i in done or len(rows[i]) != length:
                continue
            row = rows[i]
            done.add(i)
            if not row:
                if rhs[i]:
                    self.contradiction = i
                    return False
                continue

            col = min(row, key=lambda c: (len(col_rows[c]), c))
            for c in row:
                col_rows[c].discard(i)
            self.pivots.append((col, i))
            p = row[col]
            b = rhs[i]

            for j in list(col_rows[col]):
                target = rows[j]
                f = target[col]
                g = gcd(p, f)
                mp, mf = p // g, f // g
                new = {c: v * mp for c, v in target.items()} if mp != 1 else dict(target)
                for c, v in row.items():
                    value = new.get(c, 0) - mf * v
                    if value:
                        new[c] = value
                    else:
                        new.pop(c, None)
                new, new_b = _content_reduce(new, rhs[j] * mp - mf * b)
                for c in target:
                    if c not in new:
                        col_rows[c].discard(j)
                for c in new:
                    if c not in target:
                        col_rows[c].add(j)
                rows[j] = new
                rhs[j] = new_b
                heapq.heappush(heap, (len(new), j))
        return True

    def back_substitute(self, values, homogeneous=False):
        for col, i in reversed(self.pivots):
            row = self.rows[i]
            total = Fraction(0 if homogeneous else self.rhs[i])
            for c, v in row.items():
                if c != col:
                    known = values.get(c)
                    if known:
                        total -= v * known
            if total:
                values[col] = total / row[col]
        return values


def _prepare(system):
    columns = list(system.columns)
    column_index = {col: k for k, col in enumerate(columns)}
    row_keys = list(system.rows)
    rows, rhs = [], []
    for key in row_keys:
        row, b = _integer_row(system.rows[key], system.rhs.get(key, 0), column_index)
        rows.append(row)
        rhs.append(b)
    return columns, row_keys, rows, rhs


def solve(system):
    """
    Solve a SparseSystem exactly.

    Returns a SolveResult whose particular solution sets every free unknown to
    zero; the nullspace holds one basis vector per free unknown. An infeasible
    system carries the key of a row that reduced to 0 = nonzero.
    """
    started = time.perf_counter()
    columns, row_keys, rows, rhs = _prepare(system)
    logger.info("Solving %d x %d sparse system", len(rows), len(columns))

    eliminator = _Eliminator(rows, rhs)
    if not eliminator.run():
        key = row_keys[eliminator.contradiction]
        logger.info("System infeasible, contradictory row %r", key)
        return SolveResult(feasible=False, certificate=key, rank=len(eliminator.pivots))

    values = eliminator.back_substitute({})
    solution = {col: values.get(k, Fraction(0)) for k, col in enumerate(columns)}

    pivot_cols = {col for col, _ in eliminator.pivots}
    nullspace = []
    for k in range(len(columns)):
        if k in pivot_cols:
            continue
        vector = eliminator.back_substitute({k: Fraction(1)}, homogeneous=True)
        nullspace.append({columns[c]: v for c, v in sorted(vector.items()) if v})

    logger.info(
        "Rank %d, kernel dimension %d (%.2fs)",
        len(eliminator.pivots),
        len(nullspace),
        time.perf_counter() - started,
    )
    return SolveResult(
        feasible=True,
        solution=solution,
        nullspace=nullspace,
        rank=len(eliminator.pivots),
    )


def matrix_rank(vectors):
    """Rank of a list of sparse vectors given as {key: value} dicts"""
    system = SparseSystem()
    for i, vector in enumerate(vectors):
        system.add_row(i)
        for key, value in vector.items():
            system.add_entry(i, key, value)
    _, _, rows, rhs = _prepare(system)
    eliminator = _Eliminator(rows, rhs)
    eliminator.run()
    return len(eliminator.pivots)


def echelon_basis(vectors, order):
    """
    Reduced row echelon basis of the span of vectors.

    Pivots are taken leftmost along order; every pivot entry is 1, so the
    returned basis is unique for a given span.
    """
    position = {key: k for k, key in enumerate(order)}
    pending = [{k: Fraction(v) for k, v in vector.items() if v} for vector in vectors]
    pending = [vector for vector in pending if vector]
    basis = []
    for key in order:
        pivot = next((vector for vector in pending if vector.get(key)), None)
        if pivot is None:
            continue
        pending.remove(pivot)
        scale = pivot[key]
        pivot = {k: v / scale for k, v in pivot.items()}
        for group in (pending, basis):
            for idx, vector in enumerate(group):
                factor = vector.get(key)
                if factor:
                    updated = dict(vector)
                    for k, v in pivot.items():
                        value = updated.get(k, 0) - factor * v
                        if value:
                            updated[k] = value
                        else:
                            updated.pop(k, None)
                    group[idx] = updated
        pending = [vector for vector in pending if vector]
        basis.append(pivot)
    basis.sort(key=lambda vector: min(position[k] for k in vector))
    return basis
