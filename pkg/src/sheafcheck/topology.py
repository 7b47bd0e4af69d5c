"""Simplicial complexes from CNF formulas, the face poset and its up-set topology, GF(2) homology."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Hashable, Iterable

from . import kernels
from .cnf import CnfError, CnfFormula

MAX_FACES = 10**4
# hard ceiling for materializing faces at all (sheaf code needs them too)
_FACE_CEILING = 2 * 10**5

Simplex = tuple  # sorted tuple of vertex ids


class TopologyError(ValueError):
    pass


def vertex_key(v: Hashable):
    """Natural sort key: ``c2`` before ``c10``."""
    if isinstance(v, str):
        return tuple((0, int(p)) if p.isdigit() else (1, p) for p in re.split(r"(\d+)", v) if p)
    return ((0, v),)


def simplex(vertices: Iterable) -> Simplex:
    vs = set(vertices)
    if not vs:
        raise TopologyError("a simplex needs at least one vertex")
    return tuple(sorted(vs, key=vertex_key))


def face_key(s: Simplex):
    return (len(s), tuple(vertex_key(v) for v in s))


def format_simplex(s: Simplex) -> str:
    return "{" + ",".join(map(str, s)) + "}"


class SimplicialComplex:
    """A finite abstract simplicial complex given by its maximal simplices."""

    def __init__(self, simplices: Iterable[Iterable]):
        sets = {frozenset(s) for s in simplices}
        if not sets or any(not s for s in sets):
            raise TopologyError("complex needs at least one non-empty simplex")
        maximal = [s for s in sets if not any(s < t for t in sets)]
        self.maximal: tuple[Simplex, ...] = tuple(sorted((simplex(s) for s in maximal), key=face_key))

    @cached_property
    def faces(self) -> tuple[Simplex, ...]:
        total = sum((1 << len(m)) - 1 for m in self.maximal)
        if total > _FACE_CEILING:
            raise TopologyError(f"complex would have up to {total} faces; limit is {_FACE_CEILING}")
        out = set()
        for m in self.maximal:
            for k in range(1, len(m) + 1):
                out.update(combinations(m, k))
        return tuple(sorted(out, key=face_key))

    @cached_property
    def face_set(self) -> frozenset:
        return frozenset(self.faces)

    @property
    def vertices(self) -> tuple:
        return tuple(f[0] for f in self.faces if len(f) == 1)

    @property
    def dimension(self) -> int:
        return max(len(m) for m in self.maximal) - 1

    def faces_of_dim(self, k: int) -> list[Simplex]:
        return [f for f in self.faces if len(f) == k + 1]

    def __contains__(self, s) -> bool:
        return tuple(s) in self.face_set

    def euler_characteristic(self) -> int:
        return sum((-1) ** (len(f) - 1) for f in self.faces)

    def to_text(self) -> str:
        """One maximal simplex per line, vertices space-separated."""
        return "".join(" ".join(map(str, m)) + "\n" for m in self.maximal)

    @classmethod
    def from_text(cls, text: str) -> SimplicialComplex:
        return cls(line.split() for line in text.splitlines() if line.strip())

    def __eq__(self, other):
        return isinstance(other, SimplicialComplex) and self.maximal == other.maximal

    def __hash__(self):
        return hash(self.maximal)

    def __repr__(self):
        return "SimplicialComplex([" + ", ".join(format_simplex(m) for m in self.maximal) + "])"


def clause_complex(formula: CnfFormula) -> SimplicialComplex:
    """Complex whose maximal simplices are the maximal clause variable sets."""
    if not formula.clauses:
        raise CnfError("formula has no clauses")
    return SimplicialComplex(c.variables for c in formula.clauses)


def clause_label(j: int) -> str:
    return f"c{j + 1}"


def dowker_dual(formula: CnfFormula) -> SimplicialComplex:
    """Dual complex on clauses: one simplex per variable, spanning the clauses it occurs in."""
    if not formula.clauses:
        raise CnfError("formula has no clauses")
    occ: dict[str, set[str]] = {}
    for j, c in enumerate(formula.clauses):
        for v in c.variables:
            occ.setdefault(v, set()).add(clause_label(j))
    return SimplicialComplex(occ.values())


# -- face poset & Alexandrov topology ------------------------------------


@dataclass(frozen=True)
class OpenSet:
    cells: frozenset

    def __or__(self, other: OpenSet) -> OpenSet:
        return OpenSet(self.cells | other.cells)

    def __and__(self, other: OpenSet) -> OpenSet:
        return OpenSet(self.cells & other.cells)

    def __le__(self, other: OpenSet) -> bool:
        return self.cells <= other.cells

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(sorted(self.cells, key=face_key))

    def __contains__(self, s):
        return tuple(s) in self.cells


class FacePoset:
    """Faces of a complex ordered by inclusion."""

    def __init__(self, complex: SimplicialComplex):
        self.complex = complex
        self.elements = complex.faces

    @staticmethod
    def leq(a: Simplex, b: Simplex) -> bool:
        return set(a) <= set(b)

    def covers(self) -> list[tuple[Simplex, Simplex]]:
        """Pairs (a, b) with a a codimension-one face of b."""
        out = []
        for b in self.elements:
            if len(b) > 1:
                for a in combinations(b, len(b) - 1):
                    out.append((a, b))
        return out

    def up(self, s: Simplex) -> frozenset:
        ss = set(s)
        return frozenset(t for t in self.elements if ss <= set(t))


def _as_face(complex: SimplicialComplex, s) -> Simplex:
    f = simplex(s)
    if f not in complex.face_set:
        raise TopologyError(f"{format_simplex(f)} is not a face of the complex")
    return f


def up_set(complex: SimplicialComplex, s) -> OpenSet:
    f = _as_face(complex, s)
    return OpenSet(FacePoset(complex).up(f))


def whole_space(complex: SimplicialComplex) -> OpenSet:
    return OpenSet(complex.face_set)


def is_open(complex: SimplicialComplex, cells) -> bool:
    cells = {tuple(c) for c in (cells.cells if isinstance(cells, OpenSet) else cells)}
    unknown = cells - complex.face_set
    if unknown:
        raise TopologyError(f"unknown cells: {sorted(map(format_simplex, unknown))}")
    for m in complex.maximal:
        ms = set(m)
        # only need to check immediate cofaces; up-closure follows by induction
        for c in cells:
            if set(c) < ms:
                for v in m:
                    if v not in c:
                        t = simplex(set(c) | {v})
                        if t not in cells:
                            return False
    return True


# -- homology ------------------------------------------------------------


@dataclass(frozen=True)
class BettiNumbers:
    b: tuple[int, ...]

    def __getitem__(self, k):
        return self.b[k] if k < len(self.b) else 0

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * x for k, x in enumerate(self.b))

    def __str__(self):
        return " ".join(f"b{k}={x}" for k, x in enumerate(self.b))


def boundary_rank(complex: SimplicialComplex, k: int) -> int:
    """GF(2) rank of the boundary map from k-faces to (k-1)-faces."""
    if k <= 0:
        return 0
    lower = complex.faces_of_dim(k - 1)
    upper = complex.faces_of_dim(k)
    if not lower or not upper:
        return 0
    col = {f: i for i, f in enumerate(lower)}
    rows = []
    for f in upper:
        r = 0
        for sub in combinations(f, k):
            r |= 1 << col[sub]
        rows.append(r)
    return kernels.gf2_rank(rows, len(lower))


def betti(complex: SimplicialComplex, max_dim: int | None = None) -> BettiNumbers:
    if max_dim is None:
        max_dim = complex.dimension
    total = sum((1 << len(m)) - 1 for m in complex.maximal)
    if total > MAX_FACES and len(complex.faces) > MAX_FACES:
        raise TopologyError(f"complex has {len(complex.faces)} faces; betti is capped at {MAX_FACES}")
    ranks = [boundary_rank(complex, k) for k in range(max_dim + 2)]
    out = []
    for k in range(max_dim + 1):
        n_k = len(complex.faces_of_dim(k))
        out.append(n_k - ranks[k] - ranks[k + 1])
    return BettiNumbers(tuple(out))
