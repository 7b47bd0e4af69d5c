"""Pure-Python kernels. Same signatures as the compiled ``_speedups`` module.

Assignments are integers: bit ``nvars - 1 - i`` carries variable ``i``, so
integer order is lexicographic order over the vocabulary (F < T). A clause is
a pair of masks ``(pos, neg)``; it is satisfied by ``m`` iff
``(m & pos) | (~m & neg)`` is non-zero.
"""


def sat_masks(pos, neg, nvars):
    full = (1 << nvars) - 1
    clauses = list(zip(pos, neg))
    out = []
    for m in range(1 << nvars):
        nm = ~m & full
        for p, n in clauses:
            if not ((m & p) | (nm & n)):
                break
        else:
            out.append(m)
    return out


def count_sat(pos, neg, nvars):
    full = (1 << nvars) - 1
    clauses = list(zip(pos, neg))
    total = 0
    for m in range(1 << nvars):
        nm = ~m & full
        for p, n in clauses:
            if not ((m & p) | (nm & n)):
                break
        else:
            total += 1
    return total


def best_weighted(pos, neg, weights, hard, nvars):
    """Exhaustive weighted MAX-SAT over integer weights.

    Returns ``(mask, weight)`` for the smallest mask attaining the maximum
    soft weight among masks satisfying every hard clause, or ``(-1, 0)``
    when the hard clauses are unsatisfiable.
    """
    full = (1 << nvars) - 1
    hard_cl = [(p, n) for p, n, h in zip(pos, neg, hard) if h]
    soft_cl = [(p, n, w) for p, n, w, h in zip(pos, neg, weights, hard) if not h]
    best_mask, best_w = -1, -1
    for m in range(1 << nvars):
        nm = ~m & full
        for p, n in hard_cl:
            if not ((m & p) | (nm & n)):
                break
        else:
            w = 0
            for p, n, cw in soft_cl:
                if (m & p) | (nm & n):
                    w += cw
            if w > best_w:
                best_mask, best_w = m, w
    if best_mask < 0:
        return -1, 0
    return best_mask, best_w


def gf2_rank(rows, ncols):
    # rows are int bitsets; ncols is unused here but kept for signature parity
    basis = {}
    rank = 0
    for row in rows:
        r = row
        while r:
            top = r.bit_length() - 1
            b = basis.get(top)
            if b is None:
                basis[top] = r
                rank += 1
                break
            r ^= b
    return rank
