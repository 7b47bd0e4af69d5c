"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py            # full sizes
    python3 benchmarks/bench_kernels.py --quick    # smoke run

Each kernel is run on identical random inputs under every available backend;
results are checked for agreement before timings are reported.
"""

import argparse
import itertools
import random
import time

from sheafcheck import _purepy, kernels


def random_clauses(rng, n, m, width=3):
    pos, neg = [], []
    for _ in range(m):
        p = q = 0
        for v in rng.sample(range(n), min(width, n)):
            if rng.random() < 0.5:
                p |= 1 << v
            else:
                q |= 1 << v
        pos.append(p)
        neg.append(q)
    return pos, neg


def simplex_boundary(n, k):
    """Rows of the boundary map from k-faces to (k-1)-faces of an n-simplex."""
    lower = {f: i for i, f in enumerate(itertools.combinations(range(n), k))}
    rows = []
    for f in itertools.combinations(range(n), k + 1):
        r = 0
        for sub in itertools.combinations(f, k):
            r |= 1 << lower[sub]
        rows.append(r)
    return rows, len(lower)


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(quick):
    rng = random.Random(0)
    n_sat = 14 if quick else 22
    pos, neg = random_clauses(rng, n_sat, 4 * n_sat)
    yield f"count_sat V={n_sat}", lambda b: b.count_sat(pos, neg, n_sat)
    n_en = 12 if quick else 20
    p2, q2 = random_clauses(rng, n_en, 2 * n_en)
    yield f"sat_masks V={n_en}", lambda b: len(b.sat_masks(p2, q2, n_en))
    n_w = 12 if quick else 20
    p3, q3 = random_clauses(rng, n_w, 3 * n_w)
    w = [rng.randint(1, 9) for _ in p3]
    hard = [rng.random() < 0.1 for _ in p3]
    yield f"best_weighted V={n_w}", lambda b: tuple(b.best_weighted(p3, q3, w, hard, n_w))
    n_s = 10 if quick else 16
    rows, ncols = simplex_boundary(n_s, 3)
    yield f"gf2_rank {len(rows)}x{ncols}", lambda b: b.gf2_rank(rows, ncols)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    names = sorted(backends)
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<26}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.quick):
        times, outs = {}, {}
        for n in names:
            times[n], outs[n] = best_of(lambda: fn(backends[n]), 1 if args.quick else args.repeat)
        ref = outs.get("python", fn(_purepy))
        assert all(o == ref for o in outs.values()), f"{label}: backends disagree"
        row = f"{label:<26}" + "".join(f"{times[n] * 1e3:>10.1f}ms" for n in names)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
