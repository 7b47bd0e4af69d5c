import itertools
import json
import random
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from sheafcheck.claims import (
    CorpusError,
    UnratedPairs,
    analyze,
    load_corpus,
    minimal_unsat_cores,
    minimum_correction_sets,
    parse_corpus,
    thresholded_complex,
    traceability_holds,
)
from sheafcheck.oracle import MockChatClient, OracleConfig
from sheafcheck.topology import betti

Fr = Fraction


def corpus(ids, ratings=None, pairs=None, **extra):
    obj = {"atoms": extra.pop("atoms", []), "claims": [{"id": i, "text": f"Claim {i}"} for i in ids]}
    if pairs is not None:
        obj["pairs"] = [list(p) for p in pairs]
    if ratings:
        obj["ratings"] = [{"pair": list(p), "histogram": {str(r): 10}} for p, r in ratings.items()]
    obj.update(extra)
    return obj


# -- parsing ------------------------------------------------------------------


def test_bundled_triangle():
    net = load_corpus("triangle")
    assert [c.text for c in net.claims.values()] == [
        "The earth is flat", "The earth has a blue sky", "Flat planets have red skies"]
    assert len(net.pairs) == 3 and net.encoded and not net.unrated()
    assert net.background is not None and len(net.background.clauses) == 1
    assert net.rating("flat", "red_skies").mean == 5


def test_bundled_pairs_corpus():
    net = load_corpus("fig2_pairs")
    text = {c.id: c.text for c in net.claims.values()}
    assert (text["earth_flat"], text["sky_red"]) == ("The earth is flat", "The sky is red")
    assert ("earth_flat", "sky_red") in net.pairs
    assert not net.encoded and not net.unrated()
    assert net.rating("evolution", "earth_flat").bimodal is True


def test_bundled_untested_corpus():
    net = load_corpus("brandenburger_keisler")
    assert len(net.unrated()) == 2


def test_default_pairs_are_all_pairs():
    net = parse_corpus(corpus("abcd"))
    assert net.pairs == list(itertools.combinations("abcd", 2))


def test_corpus_from_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(corpus("ab")))
    assert parse_corpus(p).ids == ["a", "b"]
    with pytest.raises(CorpusError, match="no such corpus"):
        parse_corpus(tmp_path / "missing.json")


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda o: o.update(claims=[]), "claims"),
        (lambda o: o["claims"].append({"id": "a", "text": "again"}), r"claims\[2\]\.id"),
        (lambda o: o["claims"][1].pop("text"), r"claims\[1\]"),
        (lambda o: o["claims"][0].update(text="has ] bracket"), r"claims\[0\]\.text"),
        (lambda o: o["claims"][0].update(encoding="p & q"), r"claims\[0\]\.encoding"),
        (lambda o: o["claims"][0].update(encoding="p &"), r"claims\[0\]\.encoding"),
        (lambda o: o["claims"][0].update(weight=0), r"claims\[0\]\.weight"),
        (lambda o: o["claims"][0].update(weight="heavy"), r"claims\[0\]\.weight"),
        (lambda o: o.update(pairs=[["a"]]), r"pairs\[0\]"),
        (lambda o: o.update(pairs=[["a", "z"]]), "pairs"),
        (lambda o: o.update(pairs=[["a", "a"]]), "pairs"),
        (lambda o: o.update(pairs=[["a", "b"], ["b", "a"]]), "pairs"),
        (lambda o: o.update(hard_background=[["-q"]]), r"hard_background\[0\]"),
        (lambda o: o.update(hard_background=[[]]), r"hard_background\[0\]"),
        (lambda o: o.update(ratings=[{"pair": ["a", "b"], "counts": [1]}]), r"ratings\[0\]"),
        (lambda o: o.update(ratings=[{"counts": [0] * 11}]), r"ratings\[0\]"),
        (lambda o: o.update(atoms=["p", "p"]), "atoms"),
    ],
)
def test_corpus_errors_name_the_field(mutate, where):
    obj = corpus("ab", atoms=["p"])
    mutate(obj)
    with pytest.raises(CorpusError, match=where):
        parse_corpus(obj)


def test_rating_for_undesignated_pair():
    obj = corpus("abc", {("a", "c"): 5}, pairs=[("a", "b")])
    with pytest.raises(CorpusError, match="not a designated pair"):
        parse_corpus(obj)


# -- thresholded complexes ----------------------------------------------------


def test_filled_triangle():
    net = parse_corpus(corpus("abc", {("a", "b"): 10, ("b", "c"): 9, ("a", "c"): 8}))
    k = thresholded_complex(net, Fr(1, 4))
    assert k.maximal == (("a", "b", "c"),)
    assert betti(k).b == (1, 0, 0)


def test_triangle_missing_edge_is_path():
    net = load_corpus("triangle")
    k = thresholded_complex(net, Fr(1, 4))
    assert len(k.faces_of_dim(1)) == 2
    b = betti(k)
    assert b[0] == 1 and b[1] == 0


def test_four_cycle_has_hole():
    ratings = {("a", "b"): 10, ("b", "c"): 10, ("c", "d"): 10, ("d", "a"): 10, ("a", "c"): 0, ("b", "d"): 0}
    net = parse_corpus(corpus("abcd", ratings))
    b = betti(thresholded_complex(net, Fr(1, 2)))
    assert b[0] == 1 and b[1] == 1
    # with the diagonals unrated and undesignated the hole is the same
    net = parse_corpus(corpus("abcd", {p: r for p, r in ratings.items() if r}, pairs=[p for p, r in ratings.items() if r]))
    assert betti(thresholded_complex(net, 1))[1] == 1


def test_unrated_pairs_rejected():
    net = load_corpus("brandenburger_keisler")
    with pytest.raises(UnratedPairs):
        thresholded_complex(net, 1)
    with pytest.raises(UnratedPairs):
        analyze(net)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_thresholded_complex_monotone(seed):
    rng = random.Random(seed)
    ids = [f"k{i}" for i in range(rng.randint(2, 6))]
    ratings = {p: rng.randint(0, 10) for p in itertools.combinations(ids, 2)}
    net = parse_corpus(corpus(ids, ratings))
    grid = sorted({Fr(rng.randint(0, 10), 10) for _ in range(4)})
    prev = None
    for eps in grid:
        faces = thresholded_complex(net, eps).face_set
        if prev is not None:
            assert prev <= faces
        prev = faces


# -- analysis -----------------------------------------------------------------


def test_analyze_triangle():
    r = analyze(load_corpus("triangle"))
    rad = r["consistency_radius"]
    assert rad["exact"] == "1/2" and rad["attained_on"] == [["flat", "red_skies"]]
    top = r["thresholds"][-1]
    assert top["epsilon"] == 1.0 and len(top["cycles"]) == 1
    assert top["cycles"][0]["score_exact"] == "1/2" and not top["cycles"][0]["jointly_untested"]
    lg = r["logical"]
    assert lg["satisfiable"] is False and lg["model_count"] == 0
    m = lg["maximal_consistent_subset"]
    assert len(m["kept"]) == 2 and m["achieved_weight_exact"] == "2"
    assert lg["minimal_unsat_cores"] == [["flat", "blue_sky", "red_skies"]]


def test_analyze_consistent_encoded():
    obj = corpus("ab", {("a", "b"): 9}, atoms=["p", "q"])
    obj["claims"][0]["encoding"] = "p"
    obj["claims"][1]["encoding"] = "p -> q"
    r = analyze(parse_corpus(obj))
    assert r["logical"]["satisfiable"] is True
    assert r["logical"]["maximal_consistent_subset"]["kept"] == ["a", "b"]
    assert r["consistency_radius"]["exact"] == "1/10"


def test_analyze_unencoded():
    r = analyze(load_corpus("fig2_pairs"))
    assert r["logical"] is None
    assert "logical analysis skipped" in r.to_markdown()


def test_analyze_deterministic():
    a = analyze(load_corpus("triangle"))
    b = analyze(load_corpus("triangle"))
    assert a.to_json() == b.to_json() and a.to_markdown() == b.to_markdown()
    json.loads(a.to_json())


def test_analyze_rates_missing_pairs():
    net = load_corpus("brandenburger_keisler")
    client = MockChatClient(responder=lambda a, b, i: f"Rated, so the consistency rating of these claims is {3 if 'not' in b else 9}.")
    r = analyze(net, cfg=OracleConfig(n_repeats=20), client=client)
    means = {tuple(p["pair"]): p["distribution"]["mean"] for p in r["pairs"]}
    assert means == {("bk_belief", "bk_wrong"): 9.0, ("bk_belief", "bk_not_wrong"): 3.0}


def test_markdown_sections():
    md = analyze(load_corpus("triangle")).to_markdown()
    for head in ("## Pair ratings", "## Filtration", "## Thresholded complexes", "## Logical analysis"):
        assert head in md
    assert "**Consistency radius:** 1/2" in md


def test_traceability_triangle():
    net = load_corpus("triangle")
    assert traceability_holds(net)
    fixes = minimum_correction_sets(net)
    assert sorted(fixes) == [("blue_sky",), ("flat",), ("red_skies",)]
    low = {"flat", "red_skies"}
    assert all(low <= set(c) for c in minimal_unsat_cores(net))


def test_traceability_fails_when_ratings_point_elsewhere():
    obj = json.loads(resources.files("sheafcheck").joinpath("corpora/triangle.json").read_text(encoding="utf-8"))
    obj["atoms"].append("tides")
    obj["claims"].append({"id": "moon", "text": "The moon drives the tides", "encoding": "tides"})
    obj["pairs"].append(["moon", "flat"])
    obj["ratings"].append({"pair": ["moon", "flat"], "histogram": {"0": 10}})
    net = parse_corpus(obj)
    # the worst pair involves a claim outside every unsatisfiable core
    assert minimal_unsat_cores(net) == [("flat", "blue_sky", "red_skies")]
    assert not traceability_holds(net)


def test_weighted_correction_sets():
    net = load_corpus("triangle")
    obj = json.loads(json.dumps({
        "atoms": ["flat", "sky_blue", "sky_red"],
        "claims": [
            {"id": c.id, "text": c.text, "encoding": e, "weight": w}
            for c, e, w in zip(net.claims.values(), ["flat", "sky_blue", "flat -> sky_red"], [3, 1, 2])
        ],
        "hard_background": [["-sky_blue", "-sky_red"]],
    }))
    heavy = parse_corpus(obj)
    assert minimum_correction_sets(heavy) == [("blue_sky",)]
