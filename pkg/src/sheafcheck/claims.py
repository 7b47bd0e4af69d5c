"""Claim corpora, rated claim networks, and end-to-end consistency analysis."""

from __future__ import annotations

import itertools
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import networkx as nx

from .cnf import (
    Clause,
    CnfError,
    CnfFormula,
    ParseError,
    PropFormula,
    conjoin,
    count_models,
    is_satisfiable,
    parse_prop,
    relative_consistency,
    tseitin,
)
from .consistency import (
    DiscrepancyGraph,
    consistency_filtration,
    consistency_radius,
    cycle_rank,
    cycle_report,
    edge_key,
    maximal_consistent_subset,
    worst_edges,
)
from .oracle import ClaimText, OracleConfig, RatingDistribution, rate_pair
from .topology import SimplicialComplex, betti

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))
BUNDLED = ("triangle", "fig2_pairs", "brandenburger_keisler")
# exhaustive core/correction-set search bound
MAX_SUBSET_CLAIMS = 12


class CorpusError(ValueError):
    pass


class UnratedPairs(ValueError):
    pass


@dataclass(frozen=True)
class Claim:
    id: str
    text: str
    encoding: PropFormula | None = None
    weight: Fraction = Fraction(1)

    def cnf(self, atoms: Sequence[str]) -> CnfFormula:
        """Tseitin CNF over the atoms the encoding uses (in corpus order)."""
        if self.encoding is None:
            raise CorpusError(f"claim {self.id!r} has no encoding")
        used = set(self.encoding.atoms())
        return tseitin(self.encoding, [a for a in atoms if a in used], prefix=f"_ts_{self.id}_")


@dataclass
class ClaimNetwork:
    claims: dict[str, Claim]
    atoms: list[str] = field(default_factory=list)
    pairs: list[tuple[str, str]] = field(default_factory=list)
    ratings: dict[tuple[str, str], RatingDistribution] = field(default_factory=dict)
    background: CnfFormula | None = None
    name: str = ""

    def __post_init__(self):
        if not self.claims:
            raise CorpusError("claims: at least one claim is required")
        if not self.pairs:
            self.pairs = list(itertools.combinations(self.claims, 2))
        for a, b in self.pairs:
            for x in (a, b):
                if x not in self.claims:
                    raise CorpusError(f"pairs: unknown claim id {x!r}")
            if a == b:
                raise CorpusError(f"pairs: self-pair on {a!r}")
        keys = {edge_key(a, b) for a, b in self.pairs}
        if len(keys) != len(self.pairs):
            raise CorpusError("pairs: duplicate designated pair")
        for p in self.ratings:
            if edge_key(*p) not in keys:
                raise CorpusError(f"ratings: pair {list(p)} is not a designated pair")

    @property
    def ids(self) -> list[str]:
        return list(self.claims)

    def rating(self, a, b) -> RatingDistribution | None:
        return self.ratings.get((a, b)) or self.ratings.get((b, a))

    def unrated(self) -> list[tuple[str, str]]:
        return [p for p in self.pairs if self.rating(*p) is None]

    @property
    def encoded(self) -> bool:
        return all(c.encoding is not None for c in self.claims.values())

    def claim_cnfs(self) -> dict[str, CnfFormula]:
        return {cid: c.cnf(self.atoms) for cid, c in self.claims.items()}

    def discrepancy_graph(self) -> DiscrepancyGraph:
        missing = self.unrated()
        if missing:
            raise UnratedPairs(f"{len(missing)} designated pairs are unrated, e.g. {list(missing[0])}")
        g = DiscrepancyGraph(self.ids)
        for a, b in self.pairs:
            d = self.rating(a, b)
            if d.mean is None:
                raise UnratedPairs(f"pair {[a, b]} has no successful ratings")
            g.add_edge(a, b, 1 - d.mean / 10)
        return g


# -- corpus parsing ------------------------------------------------------


def _req(obj, key, path):
    if not isinstance(obj, dict) or key not in obj:
        raise CorpusError(f"{path}: missing field {key!r}")
    return obj[key]


def parse_corpus(source: str | os.PathLike | dict) -> ClaimNetwork:
    """Validate a corpus (path, bundled name, or already-loaded dict)."""
    if isinstance(source, dict):
        obj = source
    else:
        obj = json.loads(_read_corpus_text(source))
    if not isinstance(obj, dict):
        raise CorpusError("$: corpus must be a JSON object")
    atoms = obj.get("atoms", [])
    if not isinstance(atoms, list) or not all(isinstance(a, str) and a for a in atoms):
        raise CorpusError("atoms: must be a list of non-empty names")
    if len(set(atoms)) != len(atoms):
        raise CorpusError("atoms: duplicate atom name")
    raw_claims = _req(obj, "claims", "$")
    if not isinstance(raw_claims, list) or not raw_claims:
        raise CorpusError("claims: must be a non-empty list")
    claims: dict[str, Claim] = {}
    for i, rc in enumerate(raw_claims):
        path = f"claims[{i}]"
        cid = str(_req(rc, "id", path))
        text = _req(rc, "text", path)
        if cid in claims:
            raise CorpusError(f"{path}.id: duplicate claim id {cid!r}")
        try:
            ClaimText(cid, text)
        except ValueError as exc:
            raise CorpusError(f"{path}.text: {exc}") from None
        enc = rc.get("encoding")
        if enc is not None:
            try:
                enc = parse_prop(enc)
            except ParseError as exc:
                raise CorpusError(f"{path}.encoding: {exc}") from None
            unknown = set(enc.atoms()) - set(atoms)
            if unknown:
                raise CorpusError(f"{path}.encoding: unknown atoms {sorted(unknown)}")
        try:
            w = Fraction(str(rc.get("weight", 1)))
        except ValueError:
            raise CorpusError(f"{path}.weight: not a number") from None
        if w <= 0:
            raise CorpusError(f"{path}.weight: must be positive")
        claims[cid] = Claim(cid, text, enc, w)
    pairs = []
    for i, p in enumerate(obj.get("pairs") or []):
        if not (isinstance(p, list) and len(p) == 2):
            raise CorpusError(f"pairs[{i}]: must be a two-element list")
        pairs.append((str(p[0]), str(p[1])))
    background = None
    if obj.get("hard_background"):
        clauses = []
        for i, c in enumerate(obj["hard_background"]):
            path = f"hard_background[{i}]"
            if not isinstance(c, list) or not c:
                raise CorpusError(f"{path}: must be a non-empty list of signed atom names")
            for lit in c:
                if lit.lstrip("-~!") not in atoms:
                    raise CorpusError(f"{path}: unknown atom {lit!r}")
            try:
                clauses.append(Clause.of(*c))
            except CnfError as exc:
                raise CorpusError(f"{path}: {exc}") from None
        used = {l.name for c in clauses for l in c.literals}
        background = CnfFormula(tuple(a for a in atoms if a in used), tuple(clauses))
    ratings = {}
    for i, r in enumerate(obj.get("ratings") or []):
        path = f"ratings[{i}]"
        p = _req(r, "pair", path)
        try:
            ratings[(str(p[0]), str(p[1]))] = RatingDistribution.from_json(r)
        except (ValueError, TypeError, IndexError) as exc:
            raise CorpusError(f"{path}: {exc}") from None
    try:
        return ClaimNetwork(claims, list(atoms), pairs, ratings, background, str(obj.get("name", "")))
    except CorpusError:
        raise


def _read_corpus_text(source) -> str:
    p = Path(source)
    if p.exists():
        return p.read_text(encoding="utf-8")
    name = str(source)
    if name in BUNDLED:
        return resources.files("sheafcheck").joinpath(f"corpora/{name}.json").read_text(encoding="utf-8")
    raise CorpusError(f"no such corpus file or bundled corpus: {name}")


def load_corpus(name: str) -> ClaimNetwork:
    return parse_corpus(name)


def bundled_fixture_dir() -> Path:
    return Path(str(resources.files("sheafcheck").joinpath("fixtures/replies")))


# -- topology on claims --------------------------------------------------


def thresholded_graph(network: ClaimNetwork, epsilon) -> nx.Graph:
    g = network.discrepancy_graph()
    eps = Fraction(epsilon)
    out = nx.Graph()
    out.add_nodes_from(network.ids)
    out.add_edges_from(e for e, d in g.edges.items() if d <= eps)
    return out


def thresholded_complex(network: ClaimNetwork, epsilon) -> SimplicialComplex:
    """Clique complex of the graph of pairs with discrepancy at most ``epsilon``."""
    return SimplicialComplex(nx.find_cliques(thresholded_graph(network, epsilon)))


# -- rating acquisition --------------------------------------------------


def acquire_ratings(network: ClaimNetwork, cfg: OracleConfig, client, max_pairs_in_flight: int = 2) -> None:
    """Rate every unrated designated pair in place."""
    todo = network.unrated()
    if not todo:
        return

    def job(p):
        a, b = p
        ca, cb = network.claims[a], network.claims[b]
        return p, rate_pair(cfg, ClaimText(a, ca.text), ClaimText(b, cb.text), client=client)

    with ThreadPoolExecutor(max_workers=max(1, max_pairs_in_flight)) as pool:
        for p, d in pool.map(job, todo):
            network.ratings[p] = d


# -- logical path --------------------------------------------------------


def _subsets_by_size(ids):
    for k in range(len(ids) + 1):
        yield from itertools.combinations(ids, k)


def _sat_subset(cnfs, background, subset) -> bool:
    f = background if background is not None else CnfFormula(())
    for cid in subset:
        f = conjoin(f, cnfs[cid])
    return is_satisfiable(f)


def minimal_unsat_cores(network: ClaimNetwork) -> list[tuple[str, ...]]:
    """Inclusion-minimal unsatisfiable claim sets (with the background), exhaustively."""
    ids = network.ids
    if len(ids) > MAX_SUBSET_CLAIMS:
        raise ValueError(f"core search is capped at {MAX_SUBSET_CLAIMS} claims")
    cnfs = network.claim_cnfs()
    cores: list[tuple[str, ...]] = []
    for s in _subsets_by_size(ids):
        if any(set(c) <= set(s) for c in cores):
            continue
        if not _sat_subset(cnfs, network.background, s):
            cores.append(s)
    return cores


def minimum_correction_sets(network: ClaimNetwork) -> list[tuple[str, ...]]:
    """Every minimum-weight set of claims whose removal restores satisfiability."""
    ids = network.ids
    if len(ids) > MAX_SUBSET_CLAIMS:
        raise ValueError(f"correction-set search is capped at {MAX_SUBSET_CLAIMS} claims")
    cnfs = network.claim_cnfs()
    best = None
    out: list[tuple[str, ...]] = []
    for drop in _subsets_by_size(ids):
        w = sum((network.claims[c].weight for c in drop), Fraction(0))
        if best is not None and w > best:
            continue
        keep = [c for c in ids if c not in drop]
        if _sat_subset(cnfs, network.background, keep):
            if best is None or w < best:
                best, out = w, [drop]
            else:
                out.append(drop)
    return out


def logical_analysis(network: ClaimNetwork) -> dict:
    cnfs = network.claim_cnfs()
    whole = network.background if network.background is not None else CnfFormula(())
    for cid in network.ids:
        whole = conjoin(whole, cnfs[cid])
    weights = {cid: c.weight for cid, c in network.claims.items()}
    mcs = maximal_consistent_subset(cnfs, weights, network.background)
    rel = []
    for a, b in network.pairs:
        r = relative_consistency(cnfs[a], cnfs[b])
        rel.append({"pair": [a, b], "relative_consistency": float(r), "relative_consistency_exact": str(r)})
    out = {
        "satisfiable": is_satisfiable(whole),
        "model_count": count_models(whole),
        "vocabulary": list(whole.vocabulary),
        "maximal_consistent_subset": mcs.to_json(),
        "pairwise_relative_consistency": rel,
    }
    if len(network.ids) <= MAX_SUBSET_CLAIMS:
        out["minimal_unsat_cores"] = [list(c) for c in minimal_unsat_cores(network)]
        out["minimum_correction_sets"] = [list(c) for c in minimum_correction_sets(network)]
    return out


# -- analysis ------------------------------------------------------------


@dataclass
class AnalysisReport:
    data: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, ensure_ascii=False) + "\n"

    def to_markdown(self) -> str:
        return render_markdown(self.data)

    def __getitem__(self, k):
        return self.data[k]


def analyze(
    network: ClaimNetwork,
    epsilons: Iterable = DEFAULT_EPSILONS,
    cfg: OracleConfig | None = None,
    client=None,
) -> AnalysisReport:
    """Statistical path always; logical path when every claim carries an encoding.

    Unrated pairs are rated through ``client`` first when one is given.
    """
    if network.unrated():
        if client is None:
            raise UnratedPairs(f"{len(network.unrated())} designated pairs are unrated and no oracle was given")
        acquire_ratings(network, cfg or OracleConfig(), client)
    g = network.discrepancy_graph()
    eps_list = sorted({Fraction(e) for e in epsilons})
    pairs = []
    for a, b in network.pairs:
        d = network.rating(a, b)
        pairs.append(
            {
                "pair": [a, b],
                "texts": [network.claims[a].text, network.claims[b].text],
                "distribution": d.to_json(),
                "discrepancy": float(g.edges[edge_key(a, b)]),
            }
        )
    radius = consistency_radius(g)
    levels = []
    for eps in eps_list:
        cx = thresholded_complex(network, eps)
        levels.append(
            {
                "epsilon": float(eps),
                "betti": list(betti(cx, max(cx.dimension, 1)).b),
                "maximal_simplices": [list(m) for m in cx.maximal],
                "cycle_rank": cycle_rank(g, eps),
                "cycles": [c.to_json() for c in cycle_report(g, eps)],
            }
        )
    data: dict[str, Any] = {
        "corpus": network.name,
        "claims": [{"id": c.id, "text": c.text} for c in network.claims.values()],
        "pairs": pairs,
        "discrepancy_graph": {
            "nodes": list(g.nodes),
            "edges": [{"edge": list(e), "discrepancy": float(g.edges[e])} for e in g.sorted_edges()],
        },
        "consistency_radius": {
            "value": float(radius),
            "exact": str(radius),
            "attained_on": [list(e) for e in worst_edges(g)],
        },
        "filtration": consistency_filtration(g).to_json(),
        "thresholds": levels,
        "logical": logical_analysis(network) if network.encoded else None,
    }
    return AnalysisReport(data)


def _fmt(x) -> str:
    return "-" if x is None else (f"{x:.3f}" if isinstance(x, float) else str(x))


def render_markdown(r: dict) -> str:
    lines = [f"# Consistency report: {r['corpus'] or 'corpus'}", ""]
    lines += ["## Pair ratings", "", "| pair | n ok | n fail | mean | std | bimodal | discrepancy |", "|---|---|---|---|---|---|---|"]
    for p in r["pairs"]:
        d = p["distribution"]
        lines.append(
            f"| {p['texts'][0]} / {p['texts'][1]} | {d['n_success']} | {d['n_fail']} | "
            f"{_fmt(d['mean'])} | {_fmt(d['std'])} | {_fmt(d['bimodal'])} | {_fmt(p['discrepancy'])} |"
        )
    rad = r["consistency_radius"]
    lines += ["", f"**Consistency radius:** {rad['exact']} (attained on {', '.join('/'.join(e) for e in rad['attained_on'])})", ""]
    lines += ["## Filtration", ""]
    if r["filtration"]:
        for m in r["filtration"]:
            lines.append(f"- at {m['threshold_exact']}: {{{', '.join(m['left'])}}} + {{{', '.join(m['right'])}}}")
    else:
        lines.append("- no merges")
    lines += ["", "## Thresholded complexes", "", "| epsilon | betti | cycles |", "|---|---|---|"]
    for lv in r["thresholds"]:
        cyc = "; ".join(
            f"{'-'.join(c['nodes'])} score {c['score_exact']}" + (" (jointly untested)" if c["jointly_untested"] else "")
            for c in lv["cycles"]
        )
        lines.append(f"| {lv['epsilon']} | {' '.join(map(str, lv['betti']))} | {cyc or '-'} |")
    lg = r["logical"]
    lines += ["", "## Logical analysis", ""]
    if lg is None:
        lines.append("Not all claims carry encodings; logical analysis skipped.")
    else:
        m = lg["maximal_consistent_subset"]
        lines += [
            f"- conjunction satisfiable: {lg['satisfiable']} ({lg['model_count']} models)",
            f"- maximal consistent subset keeps {', '.join(m['kept']) or '-'}; drops {', '.join(m['dropped']) or '-'} (weight {m['achieved_weight_exact']})",
        ]
        for rc in lg["pairwise_relative_consistency"]:
            lines.append(f"- relative consistency {'/'.join(rc['pair'])}: {rc['relative_consistency_exact']}")
        if "minimal_unsat_cores" in lg:
            lines.append(f"- minimal unsatisfiable cores: {lg['minimal_unsat_cores']}")
            lines.append(f"- minimum correction sets: {lg['minimum_correction_sets']}")
    return "\n".join(lines) + "\n"


def traceability_holds(network: ClaimNetwork) -> bool:
    """Lowest-rated pair lies inside every minimal unsatisfiable core and meets
    some minimum-weight correction set."""
    g = network.discrepancy_graph()
    worst = worst_edges(g)
    cores = minimal_unsat_cores(network)
    fixes = minimum_correction_sets(network)
    for e in worst:
        if all(set(e) <= set(c) for c in cores) and any(set(e) & set(f) for f in fixes):
            return True
    return False
