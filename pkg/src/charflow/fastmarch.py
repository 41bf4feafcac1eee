"""First-order fast marching for the unit-speed eikonal equation on a raster."""

import heapq

import numpy as np

_FAR, _TRIAL, _KNOWN = 0, 1, 2


def fast_march(region, spacing):
    """Distance to the complement of `region`, marched over the region pixels.

    Complement pixels are frozen sources at distance 0; the front enters the
    region through 4-neighbor contacts.  Returns an array with distances on
    region pixels and 0 elsewhere.
    """
    region = np.asarray(region, dtype=bool)
    ny, nx = region.shape
    dist = np.where(region, np.inf, 0.0)
    state = np.where(region, _FAR, _KNOWN).astype(np.int8)

    def quad_update(i, j):
        # smallest known neighbor value per axis; the raster border counts as
        # a zero-distance virtual outside pixel
        a = 0.0 if i in (0, ny - 1) else np.inf
        if i > 0 and state[i - 1, j] == _KNOWN:
            a = min(a, dist[i - 1, j])
        if i < ny - 1 and state[i + 1, j] == _KNOWN:
            a = min(a, dist[i + 1, j])
        b = 0.0 if j in (0, nx - 1) else np.inf
        if j > 0 and state[i, j - 1] == _KNOWN:
            b = min(b, dist[i, j - 1])
        if j < nx - 1 and state[i, j + 1] == _KNOWN:
            b = min(b, dist[i, j + 1])
        if a > b:
            a, b = b, a
        if b - a >= spacing:  # one-sided update
            return a + spacing
        s = a + b
        disc = s * s - 2.0 * (a * a + b * b - spacing * spacing)
        return 0.5 * (s + np.sqrt(disc))

    heap = []
    ii, jj = np.nonzero(region)
    for i, j in zip(ii, jj):
        touches = (
            (i > 0 and not region[i - 1, j])
            or (i < ny - 1 and not region[i + 1, j])
            or (j > 0 and not region[i, j - 1])
            or (j < nx - 1 and not region[i, j + 1])
            or i in (0, ny - 1)
            or j in (0, nx - 1)
        )
        if touches:
            d = quad_update(i, j)
            dist[i, j] = d
            state[i, j] = _TRIAL
            heapq.heappush(heap, (d, i, j))

    while heap:
        d, i, j = heapq.heappop(heap)
        if state[i, j] == _KNOWN:
            continue
        state[i, j] = _KNOWN
        dist[i, j] = d
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < ny and 0 <= nj < nx and state[ni, nj] != _KNOWN and region[ni, nj]:
                nd = quad_update(ni, nj)
                if nd < dist[ni, nj]:
                    dist[ni, nj] = nd
                    state[ni, nj] = _TRIAL
                    heapq.heappush(heap, (nd, ni, nj))
    return dist


def signed_distance(region, spacing, outside_band=None):
    """Positive fast-marching distance inside `region`, negative outside.

    The outside part is marched only up to `outside_band` pixels (enough to
    extend fields across the interface for interpolation).
    """
    region = np.asarray(region, dtype=bool)
    d_in = fast_march(region, spacing)
    comp = ~region
    d_out = fast_march(comp, spacing)
    if outside_band is not None:
        d_out = np.minimum(d_out, outside_band * spacing)
    return np.where(region, d_in, -d_out)
