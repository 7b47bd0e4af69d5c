"""Global consistency measures over rated claim networks.

Ratings on the 0-10 scale map to truth values ``r/10``; an edge's discrepancy
is ``1 - mean/10``. Everything here uses exact ``Fraction`` arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Hashable, Iterable, Mapping, Sequence

from .cnf import (
    Clause,
    CnfError,
    CnfFormula,
    Literal,
    MaxSatResult,
    UnsatisfiableHardClauses,
    WeightedCnf,
    conjoin,
    is_satisfiable,
    max_sat,
)

SELECTOR_PREFIX = "_sel_"


class ConsistencyError(ValueError):
    pass


def truth_value(x) -> Fraction:
    v = Fraction(x)
    if not 0 <= v <= 1:
        raise ConsistencyError(f"truth value {x} outside [0, 1]")
    return v


def rating_to_truth(r) -> Fraction:
    return truth_value(Fraction(r) / 10)


def luk_and(*xs) -> Fraction:
    """Lukasiewicz t-norm, folded left; ``luk_and()`` is 1."""
    return reduce(lambda a, b: max(Fraction(0), a + b - 1), map(truth_value, xs), Fraction(1))


def luk_or(*xs) -> Fraction:
    return reduce(lambda a, b: min(Fraction(1), a + b), map(truth_value, xs), Fraction(0))


def luk_implies(a, b) -> Fraction:
    return min(Fraction(1), 1 - truth_value(a) + truth_value(b))


def luk_not(a) -> Fraction:
    return 1 - truth_value(a)


def edge_key(a: Hashable, b: Hashable) -> tuple:
    return (a, b) if str(a) <= str(b) else (b, a)


@dataclass
class DiscrepancyGraph:
    nodes: list
    edges: dict = field(default_factory=dict)  # edge_key -> Fraction discrepancy

    def __post_init__(self):
        self.nodes = list(dict.fromkeys(self.nodes))
        clean = {}
        for (a, b), d in self.edges.items():
            clean[self._check_edge(a, b)] = truth_value(d)
        self.edges = clean

    def _check_edge(self, a, b):
        if a == b:
            raise ConsistencyError(f"self-edge on {a!r}")
        for x in (a, b):
            if x not in self.nodes:
                raise ConsistencyError(f"unknown node {x!r}")
        return edge_key(a, b)

    def add_edge(self, a, b, discrepancy) -> None:
        self.edges[self._check_edge(a, b)] = truth_value(discrepancy)

    @classmethod
    def from_ratings(cls, nodes: Iterable, mean_ratings: Mapping[tuple, object]) -> DiscrepancyGraph:
        g = cls(list(nodes))
        for (a, b), r in mean_ratings.items():
            g.add_edge(a, b, 1 - rating_to_truth(r))
        return g

    def truth(self, e) -> Fraction:
        return 1 - self.edges[edge_key(*e)]

    def sorted_edges(self, epsilon=None) -> list[tuple]:
        """Edges in (discrepancy, lexicographic) order, optionally thresholded."""
        es = [(d, e) for e, d in self.edges.items() if epsilon is None or d <= Fraction(epsilon)]
        es.sort(key=lambda t: (t[0], str(t[1][0]), str(t[1][1])))
        return [e for _, e in es]


def consistency_radius(g: DiscrepancyGraph, scope: Iterable[tuple] | None = None) -> Fraction:
    """Worst discrepancy over the scoped edges (all edges by default)."""
    keys = list(g.edges) if scope is None else [edge_key(*e) for e in scope]
    if not keys:
        raise ConsistencyError("radius needs a non-empty scope")
    try:
        return max(g.edges[k] for k in keys)
    except KeyError as exc:
        raise ConsistencyError(f"edge {exc.args[0]} not in graph") from None


def worst_edges(g: DiscrepancyGraph, scope: Iterable[tuple] | None = None) -> list[tuple]:
    r = consistency_radius(g, scope)
    keys = list(g.edges) if scope is None else [edge_key(*e) for e in scope]
    return sorted((k for k in keys if g.edges[k] == r), key=lambda e: (str(e[0]), str(e[1])))


class _DSU:
    def __init__(self, items):
        self.parent = {x: x for x in items}
        self.members = {x: [x] for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        if len(self.members[ra]) < len(self.members[rb]):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.members[ra] += self.members.pop(rb)
        return ra


@dataclass(frozen=True)
class MergeEvent:
    threshold: Fraction
    edge: tuple
    left: tuple
    right: tuple

    @property
    def merged(self) -> tuple:
        return tuple(sorted(self.left + self.right, key=str))

    def to_json(self) -> dict:
        return {
            "threshold": float(self.threshold),
            "threshold_exact": str(self.threshold),
            "edge": list(self.edge),
            "left": list(self.left),
            "right": list(self.right),
            "merged": list(self.merged),
        }


@dataclass(frozen=True)
class ConsistencyFiltration:
    nodes: tuple
    merges: tuple[MergeEvent, ...]

    def thresholds(self) -> list[Fraction]:
        return [m.threshold for m in self.merges]

    def components_at(self, epsilon) -> list[tuple]:
        dsu = _DSU(self.nodes)
        for m in self.merges:
            if m.threshold <= Fraction(epsilon):
                dsu.union(m.edge[0], m.edge[1])
        comps = [tuple(sorted(v, key=str)) for v in dsu.members.values()]
        return sorted(comps, key=lambda c: str(c[0]))

    def dendrogram(self) -> list[tuple]:
        """``(threshold, left, right)`` triples in merge order."""
        return [(m.threshold, m.left, m.right) for m in self.merges]

    def to_json(self) -> list[dict]:
        return [m.to_json() for m in self.merges]


def consistency_filtration(g: DiscrepancyGraph) -> ConsistencyFiltration:
    """Single-linkage merge tree over discrepancy thresholds."""
    dsu = _DSU(g.nodes)
    events = []
    for a, b in g.sorted_edges():
        ra, rb = dsu.find(a), dsu.find(b)
        if ra == rb:
            continue
        left = tuple(sorted(dsu.members[ra], key=str))
        right = tuple(sorted(dsu.members[rb], key=str))
        if str(left[0]) > str(right[0]):
            left, right = right, left
        dsu.union(a, b)
        events.append(MergeEvent(g.edges[(a, b)], (a, b), left, right))
    return ConsistencyFiltration(tuple(g.nodes), tuple(events))


@dataclass(frozen=True)
class CycleReport:
    nodes: tuple  # closed walk order, first node not repeated
    edges: tuple
    score: Fraction
    jointly_untested: bool

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [list(e) for e in self.edges],
            "score": float(self.score),
            "score_exact": str(self.score),
            "jointly_untested": self.jointly_untested,
        }


def cycle_report(g: DiscrepancyGraph, epsilon=1) -> list[CycleReport]:
    """Fundamental cycles of the thresholded graph, scored by Lukasiewicz conjunction.

    A cycle whose score is 1 carries no pairwise evidence of inconsistency, yet
    its claims were never rated jointly; it is flagged ``jointly_untested``.
    """
    edges = g.sorted_edges(epsilon)
    dsu = _DSU(g.nodes)
    adj: dict = {n: [] for n in g.nodes}
    chords = []
    for a, b in edges:
        if dsu.union(a, b) is None:
            chords.append((a, b))
        else:
            adj[a].append(b)
            adj[b].append(a)
    out = []
    for a, b in chords:
        path = _tree_path(adj, b, a)
        cyc_edges = tuple(edge_key(path[i], path[i + 1]) for i in range(len(path) - 1)) + ((a, b),)
        score = luk_and(*(g.truth(e) for e in cyc_edges))
        out.append(CycleReport(tuple(path), cyc_edges, score, score == 1))
    return out


def _tree_path(adj, src, dst):
    prev = {src: None}
    stack = [src]
    while stack:
        x = stack.pop()
        if x == dst:
            break
        for y in adj[x]:
            if y not in prev:
                prev[y] = x
                stack.append(y)
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def cycle_rank(g: DiscrepancyGraph, epsilon=1) -> int:
    """E - V + C of the thresholded graph."""
    edges = g.sorted_edges(epsilon)
    dsu = _DSU(g.nodes)
    for a, b in edges:
        dsu.union(a, b)
    return len(edges) - len(g.nodes) + len(dsu.members)


# -- claim-level maximal satisfiability ----------------------------------


@dataclass(frozen=True)
class MaximalSubsetResult:
    kept: tuple
    dropped: tuple
    weight: Fraction
    maxsat: MaxSatResult | None = None

    def to_json(self) -> dict:
        return {
            "kept": list(self.kept),
            "dropped": list(self.dropped),
            "achieved_weight": float(self.weight),
            "achieved_weight_exact": str(self.weight),
        }


def group_maxsat_encoding(
    claims: Mapping[str, CnfFormula],
    weights: Mapping[str, object] | None = None,
    background: CnfFormula | None = None,
) -> tuple[WeightedCnf, dict[str, str]]:
    """One selector per claim: claim clauses become ``(-sel | clause)`` (hard),
    selectors are weighted unit soft clauses, background clauses are hard."""
    ids = list(claims)
    vocab: dict[str, None] = {}
    for f in ([background] if background is not None else []) + [claims[i] for i in ids]:
        for v in f.vocabulary:
            if v.startswith(SELECTOR_PREFIX):
                raise CnfError(f"atom {v!r} uses the reserved selector prefix")
            vocab.setdefault(v, None)
    selectors = {cid: f"{SELECTOR_PREFIX}{cid}" for cid in ids}
    vocab.update(dict.fromkeys(selectors.values()))
    clauses, ws, hard = [], [], []
    if background is not None:
        for c in background.clauses:
            clauses.append(c)
            ws.append(Fraction(0))
            hard.append(True)
    for cid in ids:
        sel = Literal(selectors[cid])
        for c in claims[cid].clauses:
            clauses.append(Clause((-sel,) + c.literals))
            ws.append(Fraction(0))
            hard.append(True)
    for cid in ids:
        w = Fraction(1) if weights is None else Fraction(weights.get(cid, 1))
        if w <= 0:
            raise ConsistencyError(f"claim weight for {cid!r} must be positive")
        clauses.append(Clause((Literal(selectors[cid]),)))
        ws.append(w)
        hard.append(False)
    return WeightedCnf(CnfFormula(tuple(vocab), tuple(clauses)), tuple(ws), tuple(hard)), selectors


def maximal_consistent_subset(
    claims: Mapping[str, CnfFormula],
    weights: Mapping[str, object] | None = None,
    background: CnfFormula | None = None,
) -> MaximalSubsetResult:
    if not claims:
        raise ConsistencyError("no claims given")
    if background is not None and background.clauses and not is_satisfiable(background):
        raise UnsatisfiableHardClauses("hard background is unsatisfiable on its own")
    wcnf, selectors = group_maxsat_encoding(claims, weights, background)
    res = max_sat(wcnf)
    kept = tuple(cid for cid in claims if res.assignment[selectors[cid]])
    dropped = tuple(cid for cid in claims if cid not in kept)
    return MaximalSubsetResult(kept, dropped, res.weight, res)


def conjunction(formulas: Sequence[CnfFormula]) -> CnfFormula:
    return reduce(conjoin, formulas, CnfFormula(()))
