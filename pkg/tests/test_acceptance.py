"""Acceptance criteria 1-9.

Each ``criterion_N`` raises ``AssertionError`` on failure and returns a short
detail string on success. Under pytest every criterion prints one
``PASS``/``FAIL`` line; ``python tests/test_acceptance.py`` prints the same
lines and exits non-zero if any criterion fails.
"""

import hashlib
import importlib.util
import io
import itertools
import json
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import httpx
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from gen import betti_naive, brute_models, brute_relative, random_formula  # noqa: E402

from sheafcheck import cli  # noqa: E402
from sheafcheck.claims import load_corpus  # noqa: E402
from sheafcheck.cnf import (  # noqa: E402
    CnfFormula,
    conjoin,
    count_models,
    enumerate_models,
    is_satisfiable,
    parse_dimacs,
    relative_consistency,
)
from sheafcheck.consistency import (  # noqa: E402
    DiscrepancyGraph,
    consistency_filtration,
    consistency_radius,
    cycle_report,
    group_maxsat_encoding,
    maximal_consistent_subset,
    worst_edges,
)
from sheafcheck.oracle import (  # noqa: E402
    HttpChatClient,
    OracleConfig,
    RatingDistribution,
    detect_bimodality,
    extract_rating,
    mock_transport,
    parse_user_message,
    rate_pair,
    system_prompt,
)
from sheafcheck.sheaf import build_sheaf, extend, sections  # noqa: E402
from sheafcheck.topology import betti, clause_complex, dowker_dual, up_set, whole_space  # noqa: E402

FIX = HERE / "fixtures"
EXAMPLE_CNF = FIX / "example_formula.cnf"
T, F = True, False
FIVE_MODELS = {(T, F, F, F), (T, T, F, F), (T, T, F, T), (T, T, T, F), (T, T, T, T)}
PROMPT_SHA256 = "0341b3ad18abd89613247dbb19f24a04570683fa8040d9392651f561844ebf88"


def _timed(limit, fn):
    t0 = time.perf_counter()
    out = fn()
    dt = time.perf_counter() - t0
    assert dt < limit, f"took {dt:.2f}s, limit {limit}s"
    return out, dt


def _cli_json(*argv):
    buf = io.StringIO()
    assert cli.main(list(argv), out=buf) == 0
    return json.loads(buf.getvalue())


def _as_tuple(d):
    return tuple(d[v] for v in ("w", "x", "y", "z"))


def criterion_1():
    def run():
        sat = _cli_json("sat", str(EXAMPLE_CNF), "--enumerate", "--format", "json")
        glob = _cli_json("sheaf", str(EXAMPLE_CNF), "--global", "--format", "json")
        return sat, glob

    (sat, glob), dt = _timed(1.0, run)
    got = [_as_tuple(m) for m in sat["models"]]
    assert len(got) == 5 and set(got) == FIVE_MODELS
    assert [_as_tuple(m) for m in glob["global_sections"]] == got
    return f"5 models, global sections identical ({dt * 1e3:.0f} ms)"


def criterion_2():
    def run():
        f = parse_dimacs(EXAMPLE_CNF.read_text())
        return betti(clause_complex(f)), betti(dowker_dual(f))

    (a, d), dt = _timed(1.0, run)
    for b in (a, d):
        assert (b[0], b[1], b[2]) == (1, 1, 0)
    return f"clause {a}; dual {d} ({dt * 1e3:.0f} ms)"


def _load_oracle_script():
    spec = importlib.util.spec_from_file_location("gen_up_y_sections", HERE / "oracles" / "gen_up_y_sections.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def criterion_3():
    brute = _load_oracle_script().compute()
    committed = json.loads((FIX / "up_y_sections.json").read_text())
    assert brute == committed
    f = CnfFormula.from_clauses([["w", "-x"], ["w", "y"], ["x", "-y"], ["x", "y", "-z"]], ["w", "x", "y", "z"])
    sh = build_sheaf(f)
    secs = sections(sh, up_set(sh.complex, ["y"]))
    assert len(secs) == brute["count"] == 7
    want = {_as_tuple(e["assignment"]): e["global_extensions"] for e in brute["sections"]}
    whole = whole_space(sh.complex)
    got = {_as_tuple(s.variable_values()): len(extend(sh, s, whole)) for s in secs}
    assert got == want
    assert 0 in got.values() and 1 in got.values()
    return "7 sections; extension counts match the brute-force fixture"


def criterion_4():
    def run():
        rng = random.Random(20240101)
        for i in range(500):
            f = random_formula(rng, max_vars=8, max_clauses=12)
            models = [a.values for a in enumerate_models(f)]
            assert models == brute_models(f), f"formula {i}: enumeration"
            glob = [a.values for a in build_sheaf(f).global_sections()]
            assert set(glob) == set(models) and len(glob) == len(models), f"formula {i}: global sections"
            assert count_models(f) == len(models), f"formula {i}: count"
            bc, bd = betti(clause_complex(f)), betti(dowker_dual(f))
            top = max(len(bc.b), len(bd.b))
            assert [bc[k] for k in range(top)] == [bd[k] for k in range(top)], f"formula {i}: duality"
            assert list(bc.b) == betti_naive(clause_complex(f).maximal)

    _, dt = _timed(60.0, run)
    return f"500 formulas, zero mismatches ({dt:.1f} s)"


def criterion_5():
    net = load_corpus("triangle")
    cnfs = net.claim_cnfs()
    whole = net.background
    for c in cnfs.values():
        whole = conjoin(whole, c)
    assert not is_satisfiable(whole) and not brute_models(whole)
    res = maximal_consistent_subset(cnfs, None, net.background)
    assert len(res.kept) == 2 and res.weight == 2
    # exhaustive search over every assignment of atoms, auxiliaries and selectors
    w, selectors = group_maxsat_encoding(cnfs, None, net.background)
    vocab = w.base.vocabulary
    best = -1
    for bits in itertools.product((False, True), repeat=len(vocab)):
        env = dict(zip(vocab, bits))
        hard_ok = all(
            any(env[l.name] != l.negated for l in c.literals)
            for c, h in zip(w.base.clauses, w.hard)
            if h
        )
        if hard_ok:
            best = max(best, sum(env[s] for s in selectors.values()))
    assert best == 2
    return f"conjunction UNSAT; keeps {', '.join(res.kept)} (exhaustive optimum 2 of 3)"


def criterion_6():
    rng = random.Random(7)
    zeros = 0
    for i in range(200):
        p = random_formula(rng, max_vars=6, max_clauses=6)
        q = random_formula(rng, max_vars=6, max_clauses=6)
        # rename q's variables so the merged vocabulary varies from 1 to 10
        shift = rng.randint(0, 4)
        ren = {v: f"v{int(v[1:]) + shift}" for v in q.vocabulary}
        q = CnfFormula.from_clauses(
            [[("-" if l.negated else "") + ren[l.name] for l in c.literals] for c in q.clauses],
            [ren[v] for v in q.vocabulary],
        )
        merged = set(p.vocabulary) | set(q.vocabulary)
        assert len(merged) <= 10
        r = relative_consistency(p, q)
        assert isinstance(r, Fraction)
        assert r == brute_relative(p, q), f"pair {i}"
        unsat = not brute_models(conjoin(p, q))
        assert (r == 0) == unsat, f"pair {i}: zero iff unsat"
        zeros += unsat
    assert zeros > 0
    return f"200 pairs exact; {zeros} unsatisfiable conjunctions all scored 0"


def criterion_7():
    replies = json.loads((FIX / "quoted_replies.json").read_text(encoding="utf-8"))
    assert [extract_rating(replies[k]) for k in ("zero", "five", "ten")] == [0, 5, 10]
    golden = (FIX / "initialization_prompt.golden.txt").read_bytes()
    assert system_prompt().encode("utf-8") == golden
    assert hashlib.sha256(golden).hexdigest() == PROMPT_SHA256

    calls = {"n": 0}

    def responder(messages, body):
        assert messages[0]["content"] == system_prompt()
        parse_user_message(messages[-1]["content"])
        calls["n"] += 1
        if calls["n"] == 50:
            return "I cannot provide a rating."
        return replies["ten"]

    cfg = OracleConfig(endpoint="http://mock.invalid/v1", n_repeats=100, max_in_flight=1)
    client = HttpChatClient(cfg, api_key="test", http=httpx.Client(transport=mock_transport(responder)))
    d = rate_pair(cfg, "The earth is flat", "The sky is red", client)
    assert d.n_success + d.n_fail == 100 and d.n_fail == 1
    return "extract 0/5/10 on quoted replies; prompt byte-identical; 99+1=100 over mock endpoint"


def criterion_8():
    def dist(**bins):
        c = [0] * 11
        for k, v in bins.items():
            c[int(k[1:])] = v
        return RatingDistribution(tuple(c))

    assert detect_bimodality(dist(b10=100)) is False
    assert detect_bimodality(dist(b0=50, b10=50)) is True
    assert detect_bimodality(dist(b10=80, b9=20)) is False
    rng = random.Random(8)
    ratings = [rng.choice([None, 0, 0, 3, 5, 9, 10, 10]) for _ in range(100)]
    base = RatingDistribution.from_ratings(ratings)
    for _ in range(100):
        rng.shuffle(ratings)
        d = RatingDistribution.from_ratings(ratings)
        assert (d.counts, d.n_fail, d.mean, d.variance, d.std, d.bimodal) == (
            base.counts, base.n_fail, base.mean, base.variance, base.std, base.bimodal)
    return "3 synthetic extremes classified; stats invariant under 100 shuffles"


def criterion_9():
    def run():
        g = DiscrepancyGraph.from_ratings("abcd", {("a", "b"): 10, ("b", "c"): 9, ("c", "d"): 2})
        assert consistency_radius(g) == Fraction(4, 5)
        tri = load_corpus("triangle").discrepancy_graph()
        assert consistency_radius(tri) == Fraction(1, 2)
        assert worst_edges(tri) == [("flat", "red_skies")]
        (c,) = cycle_report(tri, 1)
        assert c.score == Fraction(1, 2)
        flat = DiscrepancyGraph.from_ratings(tri.nodes, {e: 10 for e in tri.edges})
        (c,) = cycle_report(flat, 1)
        assert c.score == 1 and c.jointly_untested
        h = DiscrepancyGraph(["A", "B", "C"])
        h.add_edge("A", "B", Fraction(1, 10))
        h.add_edge("B", "C", Fraction(1, 5))
        h.add_edge("C", "A", Fraction(4, 5))
        fl = consistency_filtration(h)
        assert fl.thresholds() == [Fraction(1, 10), Fraction(1, 5)]
        assert [m.merged for m in fl.merges] == [("A", "B"), ("A", "B", "C")]
        rng = random.Random(9)
        for _ in range(200):
            n = rng.randint(1, 8)
            nodes = [f"n{i}" for i in range(n)]
            gg = DiscrepancyGraph(nodes)
            for a, b in itertools.combinations(nodes, 2):
                if rng.random() < 0.5:
                    gg.add_edge(a, b, Fraction(rng.randint(0, 10), 10))
            th = consistency_filtration(gg).thresholds()
            assert th == sorted(th)

    _, dt = _timed(5.0, run)
    return f"radius 4/5 and 1/2, filtration 1/10 then 1/5, cycle scores 1/2 and 1; 200 monotone ({dt:.2f} s)"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9]


def _report(n, fn):
    try:
        detail = fn()
    except Exception as exc:
        return False, f"FAIL criterion {n}: {type(exc).__name__}: {exc}"
    return True, f"PASS criterion {n}: {detail}"


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n, capsys):
    ok, line = _report(n, CRITERIA[n - 1])
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_report(i + 1, fn) for i, fn in enumerate(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
