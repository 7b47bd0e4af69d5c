"""``sheafcheck`` command line.

Exit codes: 0 success, 2 input error, 3 environment error, 4 oracle transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import __version__
from .claims import CorpusError, UnratedPairs, analyze, bundled_fixture_dir, parse_corpus
from .cnf import (
    CnfError,
    CnfFormula,
    count_models,
    enumerate_models,
    max_sat,
    parse_dimacs,
    parse_wdimacs,
    WeightedCnf,
)
from .oracle import (
    ClaimError,
    ClaimText,
    HttpChatClient,
    MissingApiKey,
    MockChatClient,
    NoFixture,
    OracleConfig,
    OracleTransportError,
    TriagePolicy,
    TransportError,
    rate_pair,
    triage,
)
from .sheaf import build_sheaf, dump_sections
from .topology import TopologyError, betti, clause_complex, dowker_dual, up_set

EXIT_OK, EXIT_INPUT, EXIT_ENV, EXIT_TRANSPORT = 0, 2, 3, 4

_VAR_COMMENT = re.compile(r"^c\s+var\s+(\d+)\s+(\S+)\s*$")


class InputError(Exception):
    pass


def rename_from_comments(formula: CnfFormula, text: str) -> CnfFormula:
    """Apply ``c var <index> <name>`` comment lines as display names."""
    names = {}
    for line in text.splitlines():
        m = _VAR_COMMENT.match(line.strip())
        if m:
            names[m.group(1)] = m.group(2)
    if not names:
        return formula
    new = {v: names.get(v, v) for v in formula.vocabulary}
    if len(set(new.values())) != len(new):
        raise InputError("duplicate names in 'c var' comments")
    return CnfFormula.from_clauses(
        ([("-" if l.negated else "") + new[l.name] for l in c.literals] for c in formula.clauses),
        [new[v] for v in formula.vocabulary],
    )


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_dimacs(path) -> CnfFormula:
    text = _read(path)
    return rename_from_comments(parse_dimacs(text), text)


def _assignment_json(a) -> dict:
    return {k: v for k, v in zip(a.vocabulary, a.values)}


def _emit(obj, fmt, text_lines, out):
    if fmt == "json":
        out.write(json.dumps(obj, indent=2) + "\n")
    else:
        out.write("".join(line + "\n" for line in text_lines))


def cmd_sat(args, out) -> int:
    f = _load_dimacs(args.file)
    lines, obj = [], {}
    if args.count or not args.enumerate:
        n = count_models(f)
        obj["count"] = n
        lines.append(str(n))
    if args.enumerate:
        models = enumerate_models(f)
        obj["count"] = len(models)
        obj["models"] = [_assignment_json(a) for a in models]
        lines += [str(a) for a in models]
    _emit(obj, args.format, lines, out)
    return EXIT_OK


def _face_arg(s: str) -> list[str]:
    return [v for v in re.split(r"[,\s]+", s.strip("{} ")) if v]


def cmd_sheaf(args, out) -> int:
    f = _load_dimacs(args.file)
    sheaf = build_sheaf(f)
    lines, obj = [], {}
    if args.complex:
        cx = dowker_dual(f) if args.dual else clause_complex(f)
        obj["maximal_simplices"] = [list(m) for m in cx.maximal]
        lines.append(cx.to_text().rstrip("\n"))
    if args.betti:
        cx = dowker_dual(f) if args.dual else clause_complex(f)
        b = betti(cx)
        obj["betti"] = list(b.b)
        lines.append(str(b))
    if args.sections is not None:
        u = up_set(sheaf.complex, _face_arg(args.sections))
        secs = sheaf.sections(u)
        obj["sections"] = [s.dump() for s in secs]
        lines += dump_sections(secs).splitlines()
    if args.global_:
        gs = sheaf.global_sections()
        obj["global_sections"] = [_assignment_json(a) for a in gs]
        lines += [str(a) for a in gs]
    if not (args.complex or args.betti or args.sections is not None or args.global_):
        raise InputError("choose at least one of --betti, --sections, --global, --complex")
    _emit(obj, args.format, lines, out)
    return EXIT_OK


def cmd_maxsat(args, out) -> int:
    text = _read(args.file)
    if _is_plain_cnf(text):
        # plain CNF: every clause soft with weight 1
        f = parse_dimacs(text)
        w = WeightedCnf(f, (Fraction(1),) * len(f.clauses), (False,) * len(f.clauses))
    else:
        w = parse_wdimacs(text)
    w = replace(w, base=rename_from_comments(w.base, text))
    res = max_sat(w)
    obj = {
        "weight": float(res.weight),
        "weight_exact": str(res.weight),
        "assignment": _assignment_json(res.assignment),
        "satisfied": [i + 1 for i in res.satisfied],
    }
    lines = [f"weight {res.weight}", str(res.assignment), "satisfied " + " ".join(str(i + 1) for i in res.satisfied)]
    _emit(obj, args.format, lines, out)
    return EXIT_OK


def _is_plain_cnf(text: str) -> bool:
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith("c"):
            return s.split()[:2] == ["p", "cnf"]
    return False


def _oracle_cfg(args) -> OracleConfig:
    kw = {"seed": args.seed}
    for name in ("endpoint", "model", "temperature", "timeout"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if args.n is not None:
        kw["n_repeats"] = args.n
    if args.in_flight is not None:
        kw["max_in_flight"] = args.in_flight
    try:
        return OracleConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _client(args, cfg):
    if args.live:
        return HttpChatClient(cfg)
    fixtures = args.fixtures or bundled_fixture_dir()
    return MockChatClient.from_fixtures(fixtures, sample=args.sample, seed=args.seed)


def cmd_rate(args, out) -> int:
    cfg = _oracle_cfg(args)
    a, b = ClaimText("a", args.claim_a), ClaimText("b", args.claim_b)
    client = _client(args, cfg)
    d = rate_pair(cfg, a, b, client=client)
    obj = {
        "claims": [a.text, b.text],
        "mode": "live" if args.live else "mock",
        "config": cfg.to_json(),
        "distribution": d.to_json(),
        "triage": triage(d, TriagePolicy(std_threshold=args.std_threshold)),
    }
    if args.format == "json":
        out.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")
    else:
        dj = obj["distribution"]
        peak = max(d.counts) or 1
        lines = [f"[{a.text}] [{b.text}]  ({obj['mode']}, N={cfg.n_repeats})"]
        for r, c in enumerate(d.counts):
            lines.append(f"{r:>2} | {'#' * round(40 * c / peak)} {c}")
        lines.append(f"ok={dj['n_success']} fail={dj['n_fail']} mean={dj['mean']} std={dj['std']} bimodal={dj['bimodal']} triage={obj['triage']}")
        out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_analyze(args, out) -> int:
    net = parse_corpus(args.corpus)
    cfg = _oracle_cfg(args)
    client = None
    if net.unrated():
        client = _client(args, cfg)
    eps = [Fraction(e) for e in args.epsilon] if args.epsilon else None
    kwargs = {"cfg": cfg, "client": client}
    if eps:
        kwargs["epsilons"] = eps
    rep = analyze(net, **kwargs)
    if args.out:
        stem = Path(args.out)
        stem.parent.mkdir(parents=True, exist_ok=True)
        if args.format in ("json", "both"):
            stem.with_suffix(".json").write_text(rep.to_json(), encoding="utf-8")
        if args.format in ("markdown", "both"):
            stem.with_suffix(".md").write_text(rep.to_markdown(), encoding="utf-8")
    else:
        if args.format in ("json", "both"):
            out.write(rep.to_json())
        if args.format in ("markdown", "both"):
            out.write(rep.to_markdown())
    return EXIT_OK


def _add_oracle_flags(p):
    p.add_argument("--live", action="store_true", help="query a real endpoint (needs SHEAFCHECK_API_KEY)")
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--timeout", type=float)
    p.add_argument("--n", type=int, help="repetitions per pair (default 100)")
    p.add_argument("--in-flight", type=int, help="concurrent calls per pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixtures", help="directory of recorded replies for mock mode")
    p.add_argument("--sample", action="store_true", help="mock mode: draw replies at random (seeded)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sheafcheck", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sat", help="count or enumerate models of a DIMACS CNF file")
    p.add_argument("file")
    p.add_argument("--enumerate", action="store_true")
    p.add_argument("--count", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_sat)

    p = sub.add_parser("sheaf", help="clause complex, homology and sheaf sections of a DIMACS file")
    p.add_argument("file")
    p.add_argument("--betti", action="store_true")
    p.add_argument("--dual", action="store_true", help="use the clause/variable dual complex")
    p.add_argument("--complex", action="store_true", help="list maximal simplices")
    p.add_argument("--sections", metavar="FACE", help="sections over the up-set of FACE (e.g. y or x,y)")
    p.add_argument("--global", dest="global_", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_sheaf)

    p = sub.add_parser("maxsat", help="exact weighted MAX-SAT of a WDIMACS file")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_maxsat)

    p = sub.add_parser("rate", help="rate the consistency of two claims")
    p.add_argument("claim_a")
    p.add_argument("claim_b")
    _add_oracle_flags(p)
    p.add_argument("--std-threshold", type=float, default=2.0)
    p.add_argument("--format", choices=("text", "json"), default="json")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("analyze", help="analyze a claim corpus")
    p.add_argument("corpus", help="corpus JSON path or bundled name (triangle, fig2_pairs, ...)")
    _add_oracle_flags(p)
    p.add_argument("--epsilon", action="append", help="threshold (repeatable)")
    p.add_argument("--format", choices=("json", "markdown", "both"), default="json")
    p.add_argument("--out", help="write <out>.json / <out>.md instead of stdout")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except MissingApiKey as exc:
        print(f"sheafcheck: {exc}", file=sys.stderr)
        return EXIT_ENV
    except (OracleTransportError, TransportError) as exc:
        print(f"sheafcheck: oracle transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (InputError, CnfError, TopologyError, CorpusError, UnratedPairs, ClaimError, NoFixture, ValueError) as exc:
        print(f"sheafcheck: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
