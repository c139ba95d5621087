"""Independent oracle implementations the library tests compare against.

These deliberately use different algorithms and arithmetic than the package:
breadth-first flood fill instead of union-find labeling, exact big-integer
enumeration instead of log-space floats, direct sorting instead of library
quantiles, Monte Carlo containment instead of determinant volumes.
"""

from collections import deque
from fractions import Fraction

import numpy as np

NEIGHBORS_6 = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def flood_fill_label_6(mask):
    """BFS flood-fill labeling, label ids in z-major first-encounter order."""
    mask = np.asarray(mask)
    nz, ny, nx = mask.shape
    fg = set(map(tuple, np.argwhere(mask)))
    labels = np.zeros(mask.shape, dtype=np.int32)
    next_label = 0
    for seed in map(tuple, np.argwhere(mask)):  # argwhere is z-major ordered
        if labels[seed]:
            continue
        next_label += 1
        labels[seed] = next_label
        queue = deque([seed])
        while queue:
            z, y, x = queue.popleft()
            for dz, dy, dx in NEIGHBORS_6:
                p = (z + dz, y + dy, x + dx)
                if p in fg and not labels[p]:
                    labels[p] = next_label
                    queue.append(p)
    return labels, next_label


def fisher_p_fraction(counts, rel_tol_parts=(10_000_001, 10_000_000)):
    """Exact two-sided Fisher p as a Fraction.

    Enumerates margin-fixed tables column by column carrying exact integer
    multinomial weights W(T) = N!/prod(cells!); a table qualifies when
    W(T) * rel_tol_parts[1] <= W_obs * rel_tol_parts[0], i.e. the observed
    probability times (1 + 1e-7) as an exact rational.  The p-value is the
    qualifying weight over the total weight.
    """
    counts = np.asarray(counts, dtype=np.int64)
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    r, c = counts.shape
    if r <= 1 or c <= 1:
        return Fraction(1)
    rows = [int(v) for v in counts.sum(axis=1)]
    cols = [int(v) for v in counts.sum(axis=0)]
    n = sum(rows)
    fact = [1] * (n + 1)
    for i in range(2, n + 1):
        fact[i] = fact[i - 1] * i

    def weight(cells):
        w = fact[n]
        for v in cells:
            w //= fact[v]
        return w

    w_obs = weight([int(v) for v in counts.reshape(-1)])
    hi, lo = rel_tol_parts
    included = 0
    total = 0
    fact_n = fact[n]

    # fill column by column carrying the running product of cell factorials;
    # the last column is forced by the row remainders
    def rec(j, row_rem, denom):
        nonlocal included, total
        if j == c - 1:
            for v in row_rem:
                denom *= fact[v]
            w = fact_n // denom
            total += w
            if w * lo <= w_obs * hi:
                included += w
            return
        col = cols[j]

        def fill(i, col_rem, acc, denom_acc):
            if i == r - 1:
                if col_rem <= row_rem[i]:
                    new_rem = row_rem.copy()
                    for k, v in enumerate(acc):
                        new_rem[k] -= v
                    new_rem[r - 1] -= col_rem
                    rec(j + 1, new_rem, denom_acc * fact[col_rem])
                return
            upper = min(col_rem, row_rem[i])
            for v in range(0, upper + 1):
                fill(i + 1, col_rem - v, acc + [v], denom_acc * fact[v])

        fill(0, col, [], denom)

    rec(0, rows.copy(), 1)
    return Fraction(included, total)


def sorted_quantile(values, p):
    """Linear-interpolation quantile computed from an explicit sort."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if len(v) == 1:
        return float(v[0])
    h = (len(v) - 1) * p
    lo = int(np.floor(h))
    hi = min(lo + 1, len(v) - 1)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def mc_ellipsoid_volume(ellipsoid, n_samples=400_000, seed=123):
    """Monte Carlo volume of an ellipsoid via containment sampling in its
    bounding box."""
    rng = np.random.default_rng(seed)
    a_inv = np.linalg.inv(ellipsoid.shape_matrix)
    half = np.sqrt(np.diag(a_inv))
    box_vol = float(np.prod(2 * half))
    pts = ellipsoid.center + rng.uniform(-1, 1, size=(n_samples, 3)) * half
    inside = ellipsoid.squared_form(pts) <= 1.0
    return box_vol * inside.mean()


def border_pixels_4(mask):
    """Set of foreground pixels with a 4-neighbor background (or image edge)."""
    mask = np.asarray(mask).astype(bool)
    padded = np.pad(mask, 1, constant_values=False)
    inner = (
        padded[1:-1, 1:-1]
        & padded[:-2, 1:-1] & padded[2:, 1:-1]
        & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return set(map(tuple, np.argwhere(mask & ~inner)))


def moving_average_gain(k_cycles, window, n_samples):
    """Attenuation of a length-``window`` centered circular moving average on
    a sinusoid with ``k_cycles`` full periods over ``n_samples`` points."""
    x = np.pi * k_cycles / n_samples
    return np.sin(x * window) / (window * np.sin(x))
