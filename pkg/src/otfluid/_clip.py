"""Compiled kernel: clip every power cell out of the domain polygon.

Each cell starts as the domain polygon and is cut by one halfplane per
candidate neighbor.  The halfplane of neighbor j against site i is

    2 (M_j - M_i) . x  <=  (|M_j|^2 + psi_j) - (|M_i|^2 + psi_i)

Every vertex carries the label of the edge leaving it: a candidate index
for bisector edges, -(k+1) for the k-th domain boundary edge.  The cell
loop is embarrassingly parallel.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def clip_cells(sites, power, dom, indptr, indices, active,
               out_offsets, out_verts, out_srcs, out_counts):
    nd = dom.shape[0]
    n = sites.shape[0]
    for i in prange(n):
        if not active[i]:
            out_counts[i] = 0
            continue
        base = out_offsets[i]
        cap = out_offsets[i + 1] - base
        ax = np.empty(cap)
        ay = np.empty(cap)
        asrc = np.empty(cap, np.int64)
        bx = np.empty(cap)
        by = np.empty(cap)
        bsrc = np.empty(cap, np.int64)
        dbuf = np.empty(cap)
        nv = nd
        for k in range(nd):
            ax[k] = dom[k, 0]
            ay[k] = dom[k, 1]
            asrc[k] = -(k + 1)
        six = sites[i, 0]
        siy = sites[i, 1]
        spi = power[i]
        for ptr in range(indptr[i], indptr[i + 1]):
            j = indices[ptr]
            hx = 2.0 * (sites[j, 0] - six)
            hy = 2.0 * (sites[j, 1] - siy)
            c = power[j] - spi
            for k in range(nv):
                dbuf[k] = hx * ax[k] + hy * ay[k] - c
            m = 0
            for k in range(nv):
                kn = k + 1
                if kn == nv:
                    kn = 0
                da = dbuf[k]
                db = dbuf[kn]
                if da <= 0.0:
                    bx[m] = ax[k]
                    by[m] = ay[k]
                    bsrc[m] = asrc[k]
                    m += 1
                    if db > 0.0:
                        t = da / (da - db)
                        bx[m] = ax[k] + t * (ax[kn] - ax[k])
                        by[m] = ay[k] + t * (ay[kn] - ay[k])
                        bsrc[m] = j
                        m += 1
                elif db <= 0.0:
                    t = da / (da - db)
                    bx[m] = ax[k] + t * (ax[kn] - ax[k])
                    by[m] = ay[k] + t * (ay[kn] - ay[k])
                    bsrc[m] = asrc[k]
                    m += 1
            if m < 3:
                nv = 0
                break
            nv = m
            ax, bx = bx, ax
            ay, by = by, ay
            asrc, bsrc = bsrc, asrc
        out_counts[i] = nv
        for k in range(nv):
            out_verts[base + k, 0] = ax[k]
            out_verts[base + k, 1] = ay[k]
            out_srcs[base + k] = asrc[k]
