"""The Boolean assignment sheaf on the clause complex of a CNF formula.

The stalk over a face is the set of assignments to the face's variables that
satisfy every clause whose variables lie inside the face. Restriction is
projection. A section over an open set picks one stalk member per cell so that
comparable cells agree after projection.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable

from . import kernels
from .cnf import Assignment, CnfFormula, TooLargeError, _check_size
from .topology import (
    OpenSet,
    SimplicialComplex,
    TopologyError,
    clause_complex,
    face_key,
    format_simplex,
    is_open,
    simplex,
    whole_space,
)

log = logging.getLogger(__name__)

MAX_SECTION_VARS = 20


class SheafError(ValueError):
    pass


@dataclass(frozen=True)
class Stalk:
    face: tuple
    members: tuple[tuple[bool, ...], ...]

    def __len__(self):
        return len(self.members)

    def __contains__(self, values):
        return tuple(values) in self.members

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.face, m)) for m in self.members]


@dataclass(frozen=True)
class LocalSection:
    open_set: OpenSet
    data: tuple  # ((face, values), ...) in face order

    def __getitem__(self, face):
        face = tuple(face)
        for f, v in self.data:
            if f == face:
                return v
        raise KeyError(face)

    def as_dict(self) -> dict:
        return dict(self.data)

    def restrict(self, u: OpenSet) -> LocalSection:
        if not u.cells <= self.open_set.cells:
            raise SheafError("can only restrict to a smaller open set")
        return LocalSection(u, tuple((f, v) for f, v in self.data if f in u.cells))

    def variable_values(self) -> dict:
        """Value of each variable read from the vertex cells (or any cell carrying it)."""
        out = {}
        for f, vals in self.data:
            for x, b in zip(f, vals):
                out.setdefault(x, b)
        return out

    def dump(self) -> str:
        return ";".join(",".join(map(str, f)) + "=" + "".join("T" if b else "F" for b in v) for f, v in self.data)


def restrict(values, tau, sigma) -> tuple[bool, ...]:
    """Project a stalk member over ``tau`` to the subface ``sigma``."""
    tau, sigma = tuple(tau), tuple(sigma)
    if not set(sigma) <= set(tau):
        raise SheafError(f"{format_simplex(sigma)} is not a subface of {format_simplex(tau)}")
    pos = {v: i for i, v in enumerate(tau)}
    return tuple(values[pos[v]] for v in sigma)


class ClauseSheaf:
    def __init__(self, formula: CnfFormula):
        self.formula = formula
        self.complex: SimplicialComplex = clause_complex(formula)
        self._clause_vars = [c.variables for c in formula.clauses]
        self._stalk_cache: dict = {}

    def constraints(self, face) -> tuple[int, ...]:
        """Indices of clauses whose variables all lie in ``face``."""
        f = self._face(face)
        fs = set(f)
        return tuple(j for j, vs in enumerate(self._clause_vars) if vs <= fs)

    def constraint_map(self) -> dict:
        return {f: self.constraints(f) for f in self.complex.faces}

    def _face(self, face) -> tuple:
        f = simplex(face)
        if f not in self.complex.face_set:
            raise TopologyError(f"{format_simplex(f)} is not a face of the complex")
        return f

    def _masks(self, clause_ids, pos_of) -> tuple[list[int], list[int]]:
        """Clause masks where ``pos_of(var)`` gives the bit for that variable."""
        ps, ns = [], []
        seen = set()
        for j in clause_ids:
            p = n = 0
            for l in self.formula.clauses[j].literals:
                if l.negated:
                    n |= pos_of(l.name)
                else:
                    p |= pos_of(l.name)
            if (p, n) not in seen:
                seen.add((p, n))
                ps.append(p)
                ns.append(n)
        return ps, ns

    def stalk(self, face) -> Stalk:
        f = self._face(face)
        k = len(f)
        bit = {v: 1 << (k - 1 - i) for i, v in enumerate(f)}
        ps, ns = self._masks(self.constraints(f), bit.__getitem__)
        members = tuple(tuple(bool(m >> (k - 1 - i) & 1) for i in range(k)) for m in kernels.sat_masks(ps, ns, k))
        return Stalk(f, members)

    def is_section(self, s: LocalSection) -> bool:
        """Check stalk membership and pairwise compatibility directly."""
        data = s.as_dict()
        if set(data) != set(s.open_set.cells):
            return False
        for f, v in data.items():
            if f not in self._stalk_cache:
                self._stalk_cache[f] = self.stalk(f)
            if v not in self._stalk_cache[f]:
                return False
        for f, v in data.items():
            fs = set(f)
            for g, w in data.items():
                if len(g) > len(f) and fs < set(g) and restrict(w, g, f) != v:
                    return False
        return True

    # -- sections ---------------------------------------------------------

    def _check_open(self, u: OpenSet):
        if not is_open(self.complex, u):
            raise SheafError("cell set is not open (not up-closed)")

    def _plan(self, u: OpenSet):
        """Split U into connected pieces and give each variable one copy per
        comparability class of the cells containing it."""
        cells = sorted(u.cells, key=face_key)
        parent = {c: c for c in cells}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        copy_parent: dict = {}

        def cfind(x):
            while copy_parent[x] != x:
                copy_parent[x] = copy_parent[copy_parent[x]]
                x = copy_parent[x]
            return x

        for c in cells:
            for v in c:
                copy_parent.setdefault((v, c), (v, c))
        cellset = u.cells
        for c in cells:
            # immediate cofaces inside U suffice: U is up-closed
            for m in self.complex.maximal:
                if set(c) < set(m):
                    for v in m:
                        if v in c:
                            continue
                        t = simplex(set(c) | {v})
                        if t in cellset:
                            ra, rb = find(c), find(t)
                            if ra != rb:
                                parent[max(ra, rb, key=face_key)] = min(ra, rb, key=face_key)
                            for x in c:
                                a, b = cfind((x, c)), cfind((x, t))
                                if a != b:
                                    lo, hi = sorted((a, b), key=lambda p: face_key(p[1]))
                                    copy_parent[hi] = lo
        comps: dict = {}
        for c in cells:
            comps.setdefault(find(c), []).append(c)
        plans = []
        for root in sorted(comps, key=face_key):
            members = comps[root]
            copies = sorted({cfind((v, c)) for c in members for v in c}, key=lambda p: (face_key(p[1]), p[0]))
            plans.append((members, copies, cfind))
        return plans

    def _component_solutions(self, members, copies, cfind, limit):
        k = len(copies)
        if k > limit:
            raise TooLargeError(f"open set carries {k} independent variables; limit is {limit}")
        index = {c: i for i, c in enumerate(copies)}
        ps, ns = [], []
        seen = set()
        for c in members:
            bit = {v: 1 << (k - 1 - index[cfind((v, c))]) for v in c}
            p_, n_ = self._masks(self.constraints(c), bit.__getitem__)
            for p, n in zip(p_, n_):
                if (p, n) not in seen:
                    seen.add((p, n))
                    ps.append(p)
                    ns.append(n)
        sols = []
        for m in kernels.sat_masks(ps, ns, k):
            bits = [bool(m >> (k - 1 - i) & 1) for i in range(k)]
            sols.append(tuple((c, tuple(bits[index[cfind((v, c))]] for v in c)) for c in members))
        return sols

    def iter_sections(self, u: OpenSet, limit: int = MAX_SECTION_VARS):
        self._check_open(u)
        per = [self._component_solutions(m, cp, cf, limit) for m, cp, cf in self._plan(u)]
        for combo in itertools.product(*per):
            data = sorted((pair for part in combo for pair in part), key=lambda p: face_key(p[0]))
            yield LocalSection(u, tuple(data))

    def sections(self, u: OpenSet, limit: int = MAX_SECTION_VARS) -> list[LocalSection]:
        return list(self.iter_sections(u, limit))

    def extend(self, s: LocalSection, v: OpenSet) -> list[LocalSection]:
        if not s.open_set.cells <= v.cells:
            raise SheafError("target open set must contain the section's open set")
        self._check_open(s.open_set)
        self._check_open(v)
        want = s.data
        u = s.open_set
        return [t for t in self.iter_sections(v) if t.restrict(u).data == want]

    def global_sections(self) -> list[Assignment]:
        """Global sections as total assignments over the formula's vocabulary.

        Vocabulary variables that occur in no clause are expanded as free.
        """
        f = self.formula
        _check_size(f.nvars)
        vocab = f.vocabulary
        free = [v for v in vocab if v not in set(self.complex.vertices)]
        out = []
        for s in self.iter_sections(whole_space(self.complex), limit=24):
            vals = s.variable_values()
            for bits in itertools.product((False, True), repeat=len(free)):
                d = dict(vals)
                d.update(zip(free, bits))
                out.append(Assignment.from_dict(vocab, d))
        out.sort(key=lambda a: a.mask)
        return out


def build_sheaf(formula: CnfFormula) -> ClauseSheaf:
    return ClauseSheaf(formula)


def stalk(sheaf: ClauseSheaf, face) -> Stalk:
    return sheaf.stalk(face)


def sections(sheaf: ClauseSheaf, u: OpenSet) -> list[LocalSection]:
    return sheaf.sections(u)


def extend(sheaf: ClauseSheaf, s: LocalSection, v: OpenSet) -> list[LocalSection]:
    return sheaf.extend(s, v)


def global_sections(sheaf: ClauseSheaf) -> list[Assignment]:
    return sheaf.global_sections()


def dump_sections(secs: Iterable[LocalSection]) -> str:
    return "".join(s.dump() + "\n" for s in secs)
