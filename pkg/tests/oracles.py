"""Independent reference implementations used as test oracles.

Nothing here imports the package under test. The algorithms are the plain
textbook forms: no pruning, no streaming, no numba.
"""
from __future__ import annotations

import math

import numpy as np


def naive_dtw(a, b, radius=None) -> float:
    """Full DTW in pure Python: squared-difference cost, steps (1,0), (0,1), (1,1).

    ``radius`` is a Sakoe-Chiba half-width (``None`` = unconstrained).
    """
    n, m = len(a), len(b)
    inf = math.inf
    D = [[inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if radius is not None and abs(i - j) > radius:
                continue
            c = (float(a[i - 1]) - float(b[j - 1])) ** 2
            D[i][j] = c + min(D[i - 1][j], D[i][j - 1], D[i - 1][j - 1])
    return D[n][m]


def naive_znorm(x) -> np.ndarray:
    x = [float(v) for v in x]
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    std = math.sqrt(var)
    return np.array([(v - mean) / std for v in x])


def search_oracle(query, stream, radius, threshold, normalize=True, flat_tol=1e-10):
    """Full DP at every offset, vectorised across offsets.

    Returns ``(offsets, distances)`` of windows with distance <= threshold.
    Flat windows are skipped in normalized mode.
    """
    q = np.asarray(query, dtype=np.float64)
    s = np.asarray(stream, dtype=np.float64)
    m = q.size
    n_off = s.size - m + 1
    W = np.stack([s[t : t + m] for t in range(n_off)])
    keep = np.ones(n_off, dtype=bool)
    if normalize:
        q = (q - q.mean()) / q.std()
        mu = W.mean(axis=1, keepdims=True)
        sd = W.std(axis=1, keepdims=True)
        keep = sd[:, 0] > flat_tol * np.maximum(1.0, np.abs(mu[:, 0]))
        sd[~keep] = 1.0
        W = (W - mu) / sd
    D = np.full((m + 1, m + 1, n_off), np.inf)
    D[0, 0] = 0.0
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            if radius is not None and abs(i - j) > radius:
                continue
            cost = (q[i - 1] - W[:, j - 1]) ** 2
            D[i, j] = cost + np.minimum(np.minimum(D[i - 1, j], D[i, j - 1]), D[i - 1, j - 1])
    d = D[m, m]
    hit = keep & (d <= threshold)
    idx = np.nonzero(hit)[0]
    return idx, d[idx]


def naive_median_filter(x, window):
    """Sort-and-pick median with symmetric shrinking at the edges."""
    x = list(map(float, x))
    n, half = len(x), window // 2
    out = []
    for i in range(n):
        k = min(half, i, n - 1 - i)
        seg = sorted(x[i - k : i + k + 1])
        out.append(seg[len(seg) // 2])
    return np.array(out)


def unpack_212(data: bytes):
    """Byte-at-a-time format-212 decoder."""
    s1, s2 = [], []
    for g in range(0, len(data) - len(data) % 3, 3):
        b0, b1, b2 = data[g], data[g + 1], data[g + 2]
        v1 = ((b1 & 0x0F) << 8) | b0
        v2 = ((b1 >> 4) << 8) | b2
        s1.append(v1 - 4096 if v1 & 0x800 else v1)
        s2.append(v2 - 4096 if v2 & 0x800 else v2)
    return s1, s2


def match_beats(reference, detected, tolerance):
    """Greedy one-to-one matching; returns (true positives, false negatives, false positives)."""
    ref = sorted(int(r) for r in reference)
    det = sorted(int(d) for d in detected)
    used = [False] * len(det)
    tp = 0
    j0 = 0
    for r in ref:
        while j0 < len(det) and det[j0] < r - tolerance:
            j0 += 1
        best = None
        j = j0
        while j < len(det) and det[j] <= r + tolerance:
            if not used[j] and (best is None or abs(det[j] - r) < abs(det[best] - r)):
                best = j
            j += 1
        if best is not None:
            used[best] = True
            tp += 1
    return tp, len(ref) - tp, len(det) - tp
