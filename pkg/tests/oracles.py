"""Independent reference implementations used by the oracle tests."""

import math
from fractions import Fraction


def oracle_split(rows, features, X, y):
    """Every (feature, midpoint) candidate scored with exact rational SSE."""
    def sse(vals):
        fr = [Fraction(v) for v in vals]
        m = sum(fr) / len(fr)
        return sum((v - m) ** 2 for v in fr)

    best = None
    for f in sorted(set(features)):
        vals = sorted(set(X[r, f] for r in rows))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2.0
            if thr == b:
                thr = a
            left = [y[r] for r in rows if X[r, f] <= thr]
            right = [y[r] for r in rows if X[r, f] > thr]
            cand = (sse(left) + sse(right), f, thr)
            if best is None or cand < best:
                best = cand
    if best is None:
        return None
    return best[1], best[2], float(best[0])


def brute_force_knn(target, pool, k, self_pool):
    """Exhaustive oracle: plain loops, its own statistics, explicit sort."""
    n_pool, p = len(pool), len(pool[0])
    means, stds = [], []
    for j in range(p):
        col = [r[j] for r in pool if not math.isnan(r[j])]
        mu = sum(col) / len(col)
        sd = math.sqrt(sum((v - mu) ** 2 for v in col) / len(col))
        means.append(mu)
        stds.append(sd if sd > 0 else 1.0)
    z = lambda v, j: (v - means[j]) / stds[j]  # noqa: E731
    out = [list(r) for r in target]
    for i, t in enumerate(target):
        dists = []
        for q in range(n_pool):
            if self_pool and q == i:
                continue
            shared = [j for j in range(p) if not math.isnan(t[j]) and not math.isnan(pool[q][j])]
            if not shared:
                continue
            ss = sum((z(t[j], j) - z(pool[q][j], j)) ** 2 for j in shared)
            dists.append((math.sqrt(ss * p / len(shared)), q))
        dists.sort()
        for j in range(p):
            if not math.isnan(t[j]):
                continue
            donors = sorted(q for _, q in [d for d in dists if not math.isnan(pool[d[1]][j])][:k])
            total = 0.0
            for q in donors:
                total += pool[q][j]
            out[i][j] = total / len(donors)
    return out
