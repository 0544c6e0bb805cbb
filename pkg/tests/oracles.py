"""Independent reference implementations used only by the tests."""

from itertools import combinations

import numpy as np


def naive_dfa(x, scales, m=2):
    """Textbook DFA F_2(s): one global profile, 2*floor(N/s) segments from both ends, np.polyfit per segment."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    profile = np.cumsum(x - x.mean())
    out = []
    for s in scales:
        ns = n // s
        starts = [k * s for k in range(ns)] + [n - (k + 1) * s for k in range(ns)]
        t = np.arange(s, dtype=float)
        f2 = []
        for st in starts:
            seg = profile[st:st + s]
            fit = np.polyval(np.polyfit(t, seg, m), t)
            f2.append(np.mean((seg - fit) ** 2))
        out.append(np.sqrt(np.mean(f2)))
    return np.array(out)


def brute_force_mst_weight(d):
    """Minimum total weight over all spanning trees by enumerating (N-1)-edge subsets."""
    n = len(d)
    edges = list(combinations(range(n), 2))
    best = np.inf
    for subset in combinations(edges, n - 1):
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        ok = True
        for i, j in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            best = min(best, sum(d[i][j] for i, j in subset))
    return best


def brute_force_mst_edges(d):
    """Edge set of the unique minimum spanning tree (distinct weights assumed)."""
    n = len(d)
    edges = list(combinations(range(n), 2))
    best, best_set = np.inf, None
    for subset in combinations(edges, n - 1):
        adj = {i: set() for i in range(n)}
        for i, j in subset:
            adj[i].add(j)
            adj[j].add(i)
        seen, stack = {0}, [0]
        while stack:
            for k in adj[stack.pop()] - seen:
                seen.add(k)
                stack.append(k)
        if len(seen) == n:
            w = sum(d[i][j] for i, j in subset)
            if w < best:
                best, best_set = w, set(subset)
    return best_set


def random_distance_matrix(n, rng):
    """Symmetric matrix with a zero diagonal and distinct off-diagonal entries in (0, 2)."""
    iu = np.triu_indices(n, 1)
    d = np.zeros((n, n))
    d[iu] = rng.uniform(0.01, 2.0, len(iu[0]))
    return d + d.T
