"""CNF formulas, DIMACS I/O, exhaustive model enumeration, Tseitin, MAX-SAT."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import kernels

MAX_VARS = 24
TSEITIN_PREFIX = "_ts"


class CnfError(ValueError):
    pass


class ParseError(CnfError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TooLargeError(CnfError):
    pass


class UnsatisfiableHardClauses(CnfError):
    pass


@dataclass(frozen=True, order=True)
class Variable:
    name: str
    index: int


@dataclass(frozen=True, order=True)
class Literal:
    name: str
    negated: bool = False

    def __neg__(self) -> Literal:
        return Literal(self.name, not self.negated)

    def __str__(self) -> str:
        return ("-" if self.negated else "") + self.name


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]

    def __post_init__(self):
        lits = tuple(self.literals)
        if not lits:
            raise CnfError("clause must contain at least one literal")
        if len(set(lits)) != len(lits):
            raise CnfError(f"duplicate literal in clause {lits}")
        object.__setattr__(self, "literals", lits)

    @classmethod
    def of(cls, *lits: str) -> Clause:
        """Build from signed names: ``Clause.of("w", "-x")``."""
        return cls(tuple(_lit(s) for s in lits))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(l.name for l in self.literals)

    @property
    def tautological(self) -> bool:
        return any(-l in self.literals for l in self.literals)

    def satisfied_by(self, values: Mapping[str, bool]) -> bool:
        return any(values[l.name] != l.negated for l in self.literals)

    def __str__(self) -> str:
        return "(" + " | ".join(str(l) for l in self.literals) + ")"


def _lit(s: str) -> Literal:
    s = s.strip()
    if s.startswith(("-", "~", "!")):
        return Literal(s[1:], True)
    return Literal(s, False)


@dataclass(frozen=True)
class CnfFormula:
    vocabulary: tuple[str, ...]
    clauses: tuple[Clause, ...] = ()

    def __post_init__(self):
        vocab = tuple(self.vocabulary)
        clauses = tuple(self.clauses)
        if len(set(vocab)) != len(vocab):
            raise CnfError("variable names must be unique")
        if any(not isinstance(v, str) or not v for v in vocab):
            raise CnfError("variable names must be non-empty strings")
        known = set(vocab)
        for c in clauses:
            missing = c.variables - known
            if missing:
                raise CnfError(f"clause {c} uses unknown variables {sorted(missing)}")
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "clauses", clauses)

    @classmethod
    def from_clauses(cls, clauses: Iterable[Iterable[str]], vocabulary: Sequence[str] | None = None) -> CnfFormula:
        """Build from lists of signed names; vocabulary defaults to first-appearance order."""
        cl = [Clause.of(*c) for c in clauses]
        if vocabulary is None:
            seen: dict[str, None] = {}
            for c in cl:
                for l in c.literals:
                    seen.setdefault(l.name, None)
            vocabulary = tuple(seen)
        return cls(tuple(vocabulary), tuple(cl))

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(Variable(n, i) for i, n in enumerate(self.vocabulary))

    @property
    def nvars(self) -> int:
        return len(self.vocabulary)

    def index(self, name: str) -> int:
        return self.vocabulary.index(name)

    def masks(self) -> tuple[list[int], list[int]]:
        """Positive/negative literal masks per clause (MSB = first variable)."""
        n = self.nvars
        pos_of = {v: 1 << (n - 1 - i) for i, v in enumerate(self.vocabulary)}
        pos, neg = [], []
        for c in self.clauses:
            p = q = 0
            for l in c.literals:
                if l.negated:
                    q |= pos_of[l.name]
                else:
                    p |= pos_of[l.name]
            pos.append(p)
            neg.append(q)
        return pos, neg

    def __str__(self) -> str:
        return " & ".join(str(c) for c in self.clauses) or "TRUE"


@dataclass(frozen=True)
class Assignment:
    """A total Boolean assignment over an ordered vocabulary."""

    vocabulary: tuple[str, ...]
    values: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        object.__setattr__(self, "values", tuple(bool(v) for v in self.values))
        if len(self.vocabulary) != len(self.values):
            raise CnfError("assignment must cover exactly its vocabulary")

    @classmethod
    def from_mask(cls, vocabulary: Sequence[str], mask: int) -> Assignment:
        n = len(vocabulary)
        return cls(tuple(vocabulary), tuple(bool(mask >> (n - 1 - i) & 1) for i in range(n)))

    @classmethod
    def from_dict(cls, vocabulary: Sequence[str], values: Mapping[str, bool]) -> Assignment:
        if set(values) != set(vocabulary):
            raise CnfError("assignment domain must equal the vocabulary")
        return cls(tuple(vocabulary), tuple(values[v] for v in vocabulary))

    @property
    def mask(self) -> int:
        m = 0
        for v in self.values:
            m = (m << 1) | int(v)
        return m

    def as_dict(self) -> dict[str, bool]:
        return dict(zip(self.vocabulary, self.values))

    def __getitem__(self, name: str) -> bool:
        return self.values[self.vocabulary.index(name)]

    def project(self, names: Sequence[str]) -> Assignment:
        d = self.as_dict()
        return Assignment(tuple(names), tuple(d[n] for n in names))

    def __str__(self) -> str:
        return " ".join(f"{n}={'T' if v else 'F'}" for n, v in zip(self.vocabulary, self.values))


# -- DIMACS ---------------------------------------------------------------

_HEADER = re.compile(r"^p\s+cnf\s+(\d+)\s+(\d+)\s*$")
_WHEADER = re.compile(r"^p\s+wcnf\s+(\d+)\s+(\d+)(?:\s+(\d+))?\s*$")


def _body_tokens(lines, start):
    """Yield (line_no, token) for the clause body, skipping comments."""
    for no, line in lines[start:]:
        s = line.strip()
        if not s or s.startswith("c") or s.startswith("%"):
            continue
        for tok in s.split():
            yield no, tok


def _numbered(text: str):
    return [(i + 1, line) for i, line in enumerate(text.splitlines())]


def _find_header(lines, pattern, kind):
    for pos, (no, line) in enumerate(lines):
        s = line.strip()
        if not s or s.startswith("c"):
            continue
        m = pattern.match(s)
        if not m:
            raise ParseError(f"expected 'p {kind} ...' header, got {s!r}", no)
        return pos, no, m
    raise ParseError(f"missing 'p {kind}' header")


def _make_literals(ints, nvars, no):
    lits = []
    for k in ints:
        if k == 0 or abs(k) > nvars:
            raise ParseError(f"literal {k} out of range 1..{nvars}", no)
        lit = Literal(str(abs(k)), k < 0)
        if lit not in lits:
            lits.append(lit)
    if not lits:
        raise ParseError("empty clause", no)
    return Clause(tuple(lits))


def parse_dimacs(text: str) -> CnfFormula:
    lines = _numbered(text)
    pos, hno, m = _find_header(lines, _HEADER, "cnf")
    nvars, nclauses = int(m.group(1)), int(m.group(2))
    clauses: list[Clause] = []
    cur: list[int] = []
    last_no = hno
    for no, tok in _body_tokens(lines, pos + 1):
        last_no = no
        try:
            k = int(tok)
        except ValueError:
            raise ParseError(f"bad token {tok!r}", no) from None
        if k == 0:
            clauses.append(_make_literals(cur, nvars, no))
            cur = []
        else:
            if abs(k) > nvars:
                raise ParseError(f"literal {k} out of range 1..{nvars}", no)
            cur.append(k)
    if cur:
        # tolerate a final clause without its terminating 0
        clauses.append(_make_literals(cur, nvars, last_no))
    if len(clauses) != nclauses:
        raise ParseError(f"header declares {nclauses} clauses, found {len(clauses)}", last_no)
    return CnfFormula(tuple(str(i) for i in range(1, nvars + 1)), tuple(clauses))


def emit_dimacs(formula: CnfFormula) -> str:
    idx = {v: i + 1 for i, v in enumerate(formula.vocabulary)}
    out = [f"p cnf {formula.nvars} {len(formula.clauses)}"]
    for c in formula.clauses:
        out.append(" ".join(str(-idx[l.name] if l.negated else idx[l.name]) for l in c.literals) + " 0")
    return "\n".join(out) + "\n"


# -- evaluation & enumeration --------------------------------------------


def _check_size(n: int, limit: int = MAX_VARS):
    if n > limit:
        raise TooLargeError(f"{n} variables exceeds the exhaustive bound of {limit}")


def evaluate(formula: CnfFormula, a: Assignment) -> bool:
    if tuple(a.vocabulary) != formula.vocabulary:
        raise CnfError("assignment vocabulary does not match the formula")
    values = a.as_dict()
    return all(c.satisfied_by(values) for c in formula.clauses)


def model_masks(formula: CnfFormula) -> list[int]:
    _check_size(formula.nvars)
    pos, neg = formula.masks()
    return kernels.sat_masks(pos, neg, formula.nvars)


def enumerate_models(formula: CnfFormula) -> list[Assignment]:
    """All satisfying assignments, in lexicographic order (F < T)."""
    return [Assignment.from_mask(formula.vocabulary, m) for m in model_masks(formula)]


def count_models(formula: CnfFormula) -> int:
    _check_size(formula.nvars)
    pos, neg = formula.masks()
    return kernels.count_sat(pos, neg, formula.nvars)


def is_satisfiable(formula: CnfFormula) -> bool:
    return count_models(formula) > 0


def conjoin(p: CnfFormula, q: CnfFormula) -> CnfFormula:
    vocab = list(p.vocabulary)
    seen = set(vocab)
    vocab += [v for v in q.vocabulary if v not in seen]
    return CnfFormula(tuple(vocab), p.clauses + q.clauses)


def relative_consistency(p: CnfFormula, q: CnfFormula) -> Fraction:
    """Models of ``p & q`` over ``2**V``, V the merged vocabulary size."""
    pq = conjoin(p, q)
    _check_size(pq.nvars)
    return Fraction(count_models(pq), 1 << pq.nvars)


# -- propositional formulas & Tseitin ------------------------------------


class PropFormula:
    def atoms(self) -> list[str]:
        """Atom names in first-appearance order."""
        out: dict[str, None] = {}
        self._collect(out)
        return list(out)

    def _collect(self, out):
        for a in self.args:
            a._collect(out)

    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __rshift__(self, other):
        return Implies(self, other)


@dataclass(frozen=True)
class Atom(PropFormula):
    name: str

    def _collect(self, out):
        out.setdefault(self.name, None)

    def eval(self, env):
        return env[self.name]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(PropFormula):
    arg: PropFormula

    @property
    def args(self):
        return (self.arg,)

    def eval(self, env):
        return not self.arg.eval(env)

    def __str__(self):
        return f"~{_paren(self.arg)}"


@dataclass(frozen=True)
class And(PropFormula):
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise CnfError("And needs at least one argument")
        object.__setattr__(self, "args", tuple(self.args))

    def eval(self, env):
        return all(a.eval(env) for a in self.args)

    def __str__(self):
        return " & ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Or(PropFormula):
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise CnfError("Or needs at least one argument")
        object.__setattr__(self, "args", tuple(self.args))

    def eval(self, env):
        return any(a.eval(env) for a in self.args)

    def __str__(self):
        return " | ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Implies(PropFormula):
    lhs: PropFormula
    rhs: PropFormula

    @property
    def args(self):
        return (self.lhs, self.rhs)

    def eval(self, env):
        return (not self.lhs.eval(env)) or self.rhs.eval(env)

    def __str__(self):
        return f"{_paren(self.lhs)} -> {_paren(self.rhs)}"


@dataclass(frozen=True)
class Iff(PropFormula):
    lhs: PropFormula
    rhs: PropFormula

    @property
    def args(self):
        return (self.lhs, self.rhs)

    def eval(self, env):
        return self.lhs.eval(env) == self.rhs.eval(env)

    def __str__(self):
        return f"{_paren(self.lhs)} <-> {_paren(self.rhs)}"


def _paren(f):
    return str(f) if isinstance(f, (Atom, Not)) else f"({f})"


_TOKEN = re.compile(r"\s*(<->|->|[()~!&|]|[A-Za-z_][A-Za-z0-9_.]*)")


def parse_prop(text: str) -> PropFormula:
    """Parse ``~ & | -> <->`` infix syntax (``!`` also negates).

    Precedence from tightest: ``~``, ``&``, ``|``, ``->`` (right assoc), ``<->``.
    """
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character at offset {pos} in {text!r}")
        toks.append(m.group(1))
        pos = m.end()
    toks.append(None)
    i = 0

    def peek():
        return toks[i]

    def take(expect=None):
        nonlocal i
        t = toks[i]
        if expect is not None and t != expect:
            raise ParseError(f"expected {expect!r}, got {t!r} in {text!r}")
        i += 1
        return t

    def iff():
        f = imp()
        while peek() == "<->":
            take()
            f = Iff(f, imp())
        return f

    def imp():
        f = disj()
        if peek() == "->":
            take()
            return Implies(f, imp())
        return f

    def disj():
        parts = [conj()]
        while peek() == "|":
            take()
            parts.append(conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj():
        parts = [unary()]
        while peek() == "&":
            take()
            parts.append(unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary():
        t = peek()
        if t in ("~", "!"):
            take()
            return Not(unary())
        if t == "(":
            take()
            f = iff()
            take(")")
            return f
        if t is None or t in ("&", "|", "->", "<->", ")"):
            raise ParseError(f"unexpected token {t!r} in {text!r}")
        take()
        return Atom(t)

    f = iff()
    if peek() is not None:
        raise ParseError(f"trailing token {peek()!r} in {text!r}")
    return f


def _as_literal(f: PropFormula) -> Literal | None:
    if isinstance(f, Atom):
        return Literal(f.name)
    if isinstance(f, Not):
        inner = _as_literal(f.arg)
        return -inner if inner is not None else None
    return None


def _as_clause(f: PropFormula) -> list[Literal] | None:
    """Literals of ``f`` when it is already a disjunction (or a -> b) of literals."""
    lit = _as_literal(f)
    if lit is not None:
        return [lit]
    if isinstance(f, Or):
        out = []
        for a in f.args:
            sub = _as_clause(a)
            if sub is None:
                return None
            out += sub
        return out
    if isinstance(f, Implies):
        lhs, rhs = _as_literal(f.lhs), _as_clause(f.rhs)
        if lhs is None or rhs is None:
            return None
        return [-lhs] + rhs
    return None


def _top_conjuncts(f):
    if isinstance(f, And):
        for a in f.args:
            yield from _top_conjuncts(a)
    else:
        yield f


def tseitin(f: PropFormula, vocabulary: Sequence[str] | None = None, prefix: str = TSEITIN_PREFIX) -> CnfFormula:
    """Equisatisfiable CNF whose models project exactly onto the models of ``f``.

    Top-level conjuncts that are already clauses are emitted as-is; every
    other connective gets a fully defined auxiliary (``<prefix><k>``), so each
    model of ``f`` extends to exactly one model of the result.
    """
    atoms = list(vocabulary) if vocabulary is not None else f.atoms()
    missing = set(f.atoms()) - set(atoms)
    if missing:
        raise CnfError(f"formula uses atoms outside the vocabulary: {sorted(missing)}")
    if any(a.startswith(prefix) for a in atoms):
        raise CnfError(f"atom names may not start with the reserved prefix {prefix!r}")
    aux: list[str] = []
    clauses: list[list[Literal]] = []

    def fresh():
        name = f"{prefix}{len(aux) + 1}"
        aux.append(name)
        return Literal(name)

    def encode(g) -> Literal:
        lit = _as_literal(g)
        if lit is not None:
            return lit
        if isinstance(g, Not):
            return -encode(g.arg)
        t = fresh()
        if isinstance(g, And):
            subs = [encode(a) for a in g.args]
            for s in subs:
                clauses.append([-t, s])
            clauses.append([t] + [-s for s in subs])
        elif isinstance(g, Or):
            subs = [encode(a) for a in g.args]
            clauses.append([-t] + subs)
            for s in subs:
                clauses.append([t, -s])
        elif isinstance(g, Implies):
            a, b = encode(g.lhs), encode(g.rhs)
            clauses.extend([[-t, -a, b], [t, a], [t, -b]])
        elif isinstance(g, Iff):
            a, b = encode(g.lhs), encode(g.rhs)
            clauses.extend([[-t, -a, b], [-t, a, -b], [t, a, b], [t, -a, -b]])
        else:
            raise CnfError(f"unknown connective {type(g).__name__}")
        return t

    for conj in _top_conjuncts(f):
        direct = _as_clause(conj)
        if direct is not None:
            clauses.append(direct)
        else:
            clauses.append([encode(conj)])

    out = []
    for c in clauses:
        dedup = list(dict.fromkeys(c))
        out.append(Clause(tuple(dedup)))
    return CnfFormula(tuple(atoms) + tuple(aux), tuple(out))


# -- weighted MAX-SAT ----------------------------------------------------


@dataclass(frozen=True)
class WeightedCnf:
    base: CnfFormula
    weights: tuple[Fraction, ...]
    hard: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        n = len(self.base.clauses)
        if n == 0:
            raise CnfError("weighted formula needs at least one clause")
        weights = tuple(Fraction(w) for w in self.weights)
        hard = tuple(bool(h) for h in self.hard) if self.hard else (False,) * n
        if len(weights) != n or len(hard) != n:
            raise CnfError("need one weight and one hard flag per clause")
        if any(w < 0 for w in weights):
            raise CnfError("weights must be non-negative")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "hard", hard)

    @property
    def soft_total(self) -> Fraction:
        return sum((w for w, h in zip(self.weights, self.hard) if not h), Fraction(0))


@dataclass(frozen=True)
class MaxSatResult:
    assignment: Assignment
    weight: Fraction
    satisfied: tuple[int, ...]


def max_sat(w: WeightedCnf) -> MaxSatResult:
    """Exact weighted MAX-SAT by exhaustive sweep; ties go to the smallest bit pattern."""
    f = w.base
    _check_size(f.nvars)
    pos, neg = f.masks()
    denom = math.lcm(*(x.denominator for x in w.weights))
    iweights = [int(x * denom) for x in w.weights]
    mask, best = kernels.best_weighted(pos, neg, iweights, list(w.hard), f.nvars)
    if mask < 0:
        raise UnsatisfiableHardClauses("hard clauses are jointly unsatisfiable")
    a = Assignment.from_mask(f.vocabulary, mask)
    values = a.as_dict()
    sat = tuple(i for i, c in enumerate(f.clauses) if c.satisfied_by(values))
    return MaxSatResult(a, Fraction(best, denom), sat)


def parse_wdimacs(text: str) -> WeightedCnf:
    lines = _numbered(text)
    pos, hno, m = _find_header(lines, _WHEADER, "wcnf")
    nvars, nclauses = int(m.group(1)), int(m.group(2))
    top = int(m.group(3)) if m.group(3) else None
    clauses, weights, hard = [], [], []
    cur: list[int] = []
    weight = None
    last_no = hno
    for no, tok in _body_tokens(lines, pos + 1):
        last_no = no
        try:
            k = int(tok)
        except ValueError:
            raise ParseError(f"bad token {tok!r}", no) from None
        if weight is None:
            if k < 0:
                raise ParseError(f"negative weight {k}", no)
            weight = k
            continue
        if k == 0:
            clauses.append(_make_literals(cur, nvars, no))
            weights.append(Fraction(weight))
            hard.append(top is not None and weight >= top)
            cur, weight = [], None
        else:
            if abs(k) > nvars:
                raise ParseError(f"literal {k} out of range 1..{nvars}", no)
            cur.append(k)
    if cur or weight is not None:
        raise ParseError("unterminated clause", last_no)
    if len(clauses) != nclauses:
        raise ParseError(f"header declares {nclauses} clauses, found {len(clauses)}", last_no)
    base = CnfFormula(tuple(str(i) for i in range(1, nvars + 1)), tuple(clauses))
    return WeightedCnf(base, tuple(weights), tuple(hard))


def emit_wdimacs(w: WeightedCnf) -> str:
    if any(x.denominator != 1 for x in w.weights):
        raise CnfError("WDIMACS needs integer weights")
    f = w.base
    top = int(w.soft_total) + 1
    idx = {v: i + 1 for i, v in enumerate(f.vocabulary)}
    out = [f"p wcnf {f.nvars} {len(f.clauses)} {top}"]
    for c, x, h in zip(f.clauses, w.weights, w.hard):
        lits = " ".join(str(-idx[l.name] if l.negated else idx[l.name]) for l in c.literals)
        out.append(f"{top if h else int(x)} {lits} 0")
    return "\n".join(out) + "\n"
