"""Independent brute-force reference implementations used as test oracles.

These are deliberately written with plain Python loops and no shared code
with the package, so agreement is meaningful.
"""

import math


def brute_multisurf(X, y, is_continuous, ranges, class_count):
    """Loop-based near-neighbor feature scoring.

    X: list of rows (floats, None for missing); y: int labels;
    is_continuous: per-feature flags; ranges: per-feature widths.
    Returns per-feature scores averaged over all target instances.
    """
    n = len(X)
    p = len(X[0])

    def diff(f, a, b):
        if a is None or b is None:
            return 1.0
        if is_continuous[f]:
            r = ranges[f] if ranges[f] > 0 else 1.0
            return abs(a - b) / r
        return 0.0 if a == b else 1.0

    def dist(i, j):
        return sum(diff(f, X[i][f], X[j][f]) for f in range(p)) / p

    D = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            D[i][j] = D[j][i] = dist(i, j)

    prior = [0.0] * class_count
    for label in y:
        prior[label] += 1.0 / n

    scores = [0.0] * p
    for i in range(n):
        ds = [D[i][j] for j in range(n) if j != i]
        mu = sum(ds) / len(ds)
        var = sum(d * d for d in ds) / len(ds) - mu * mu
        sigma = math.sqrt(max(var, 0.0))
        thr = mu - sigma / 2.0
        for j in range(n):
            if j == i or not D[i][j] < thr:
                continue
            if y[j] == y[i]:
                for f in range(p):
                    scores[f] -= diff(f, X[i][f], X[j][f])
            else:
                w = prior[y[j]] / (1.0 - prior[y[i]])
                for f in range(p):
                    scores[f] += w * diff(f, X[i][f], X[j][f])
    return [s / n for s in scores]


def brute_ward(D):
    """Naive min-pair agglomeration with Ward updates on squared distances.

    Ties break on the lexicographically smallest active slot pair (i, j).
    Returns merge rows (left_id, right_id, height, size) with left < right and
    new cluster ids m, m+1, ... in merge order.
    """
    m = len(D)
    S = [[D[i][j] ** 2 for j in range(m)] for i in range(m)]
    active = [True] * m
    sizes = [1] * m
    cid = list(range(m))
    merges = []
    for step in range(m - 1):
        bi = bj = -1
        best = None
        for i in range(m):
            if not active[i]:
                continue
            for j in range(i + 1, m):
                if not active[j]:
                    continue
                if best is None or S[i][j] < best:
                    best = S[i][j]
                    bi, bj = i, j
        i, j = bi, bj
        height = math.sqrt(best)
        left, right = sorted((cid[i], cid[j]))
        merges.append((left, right, height, sizes[i] + sizes[j]))
        ni, nj = sizes[i], sizes[j]
        for k in range(m):
            if not active[k] or k in (i, j):
                continue
            nk = sizes[k]
            new = ((ni + nk) * S[i][k] + (nj + nk) * S[j][k] - nk * S[i][j]) / (ni + nj + nk)
            S[i][k] = S[k][i] = new
        active[j] = False
        sizes[i] = ni + nj
        cid[i] = m + step
    return merges
