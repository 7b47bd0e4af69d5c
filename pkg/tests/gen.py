"""Random formula generators and brute-force oracles shared by the tests.

The oracles here never touch the kernels: they walk ``itertools.product``
and evaluate clauses literal by literal.
"""

import itertools
import random
from fractions import Fraction

from sheafcheck.cnf import Atom, And, CnfFormula, Iff, Implies, Not, Or


def random_formula(rng, max_vars=8, max_clauses=12, every_var=False, min_clauses=1):
    n = rng.randint(1, max_vars)
    names = [f"v{i}" for i in range(n)]
    m = rng.randint(min_clauses, max_clauses)
    clauses = []
    for _ in range(m):
        k = rng.randint(1, min(3, n))
        vs = rng.sample(names, k)
        clauses.append([("-" if rng.random() < 0.5 else "") + v for v in vs])
    if every_var:
        used = {c.lstrip("-") for cl in clauses for c in cl}
        for v in names:
            if v not in used:
                clauses.append([("-" if rng.random() < 0.5 else "") + v])
    return CnfFormula.from_clauses(clauses, names)


def brute_models(formula):
    """Satisfying assignments as tuples of bools, lexicographic (F < T)."""
    out = []
    for bits in itertools.product((False, True), repeat=formula.nvars):
        env = dict(zip(formula.vocabulary, bits))
        if all(any(env[l.name] != l.negated for l in c.literals) for c in formula.clauses):
            out.append(bits)
    return out


def brute_relative(p, q):
    names = list(dict.fromkeys(p.vocabulary + q.vocabulary))
    hits = 0
    for bits in itertools.product((False, True), repeat=len(names)):
        env = dict(zip(names, bits))
        if all(any(env[l.name] != l.negated for l in c.literals) for c in p.clauses + q.clauses):
            hits += 1
    return Fraction(hits, 2 ** len(names))


def random_prop(rng, atoms, depth):
    if depth == 0 or rng.random() < 0.25:
        a = Atom(rng.choice(atoms))
        return Not(a) if rng.random() < 0.3 else a
    kind = rng.choice(["not", "and", "or", "imp", "iff"])
    sub = lambda: random_prop(rng, atoms, depth - 1)
    if kind == "not":
        return Not(sub())
    if kind == "and":
        return And(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == "or":
        return Or(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == "imp":
        return Implies(sub(), sub())
    return Iff(sub(), sub())


def truth_table(f, atoms):
    return {bits for bits in itertools.product((False, True), repeat=len(atoms)) if f.eval(dict(zip(atoms, bits)))}


def example_formula():
    """The four-clause example over w, x, y, z."""
    return CnfFormula.from_clauses([["w", "-x"], ["w", "y"], ["x", "-y"], ["x", "y", "-z"]], ["w", "x", "y", "z"])


def gf2_rank_naive(matrix):
    """Rank of a list of 0/1 rows by plain Gaussian elimination."""
    mat = [list(r) for r in matrix]
    rank = 0
    ncols = len(mat[0]) if mat else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][c]), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        for i in range(len(mat)):
            if i != rank and mat[i][c]:
                mat[i] = [a ^ b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def betti_naive(maximal):
    """Betti numbers over GF(2) from explicit boundary matrices."""
    faces = set()
    for m in maximal:
        m = sorted(m)
        for k in range(1, len(m) + 1):
            faces.update(itertools.combinations(m, k))
    top = max(len(f) for f in faces) - 1
    by_dim = [sorted(f for f in faces if len(f) == k + 1) for k in range(top + 1)]

    def rank(k):
        if k <= 0 or k > top:
            return 0
        lower = {f: i for i, f in enumerate(by_dim[k - 1])}
        rows = []
        for f in by_dim[k]:
            row = [0] * len(lower)
            for sub in itertools.combinations(f, k):
                row[lower[sub]] = 1
            rows.append(row)
        return gf2_rank_naive(rows)

    return [len(by_dim[k]) - rank(k) - rank(k + 1) for k in range(top + 1)]
