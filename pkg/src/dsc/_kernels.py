"""Hot interpolation kernels: batched evaluation of per-mode frequency tables.

Every expensive operation in the package (twisted product, adjoint and Weyl
shifts, dense-window sampling for operator application and compression) reduces
to the same primitive: evaluate all table columns of a symbol at a batch of
frequency points, using exact reads on the coarse integer lattice and
tensor-product barycentric interpolation on the refinement patches.

Two implementations are provided with identical semantics:

* a numba ``@njit(parallel=True)`` kernel (default when numba imports), and
* a vectorized pure-numpy fallback.

Selection: the numpy path is forced by setting the environment variable
``DSC_NO_NUMBA`` to a truthy value before import. ``benchmarks/bench_kernels.py``
times both paths.

Geometry conventions (shared with :mod:`dsc.grid`):

* coarse core: all integer lattice points of the open box (-B, B)^d,
  stored row-major with the first axis slowest;
* refinement level j = 1..L: the square annulus between half-widths
  b = B*3**(j-1) and 3b, tiled by 8 blocks (2 intervals in 1D) of side 2b,
  each carrying a K^d uniform node grid that includes the block corners;
* blocks are indexed by their cell position in the 3x3 cell grid of the
  annulus, row-major, skipping the center cell;
* a point on a shared edge belongs to the lowest level whose closed annulus
  contains it, then to the block with the smallest index;
* points beyond the outer bandlimit N are evaluated by extrapolating the
  owning boundary patch polynomial up to half an outer-block width past N,
  and are hard-clamped beyond that. Callers count these events.
"""

from __future__ import annotations

import math
import os

import numpy as np

NODE_TOL = 1e-9   # node-hit tolerance, units of one node spacing
EDGE_TOL = 1e-9   # cell-edge tolerance, units of one cell width

HAVE_NUMBA = False
try:  # pragma: no cover - environment dependent
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range  # type: ignore[assignment]

NUMBA_DISABLED = os.environ.get("DSC_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def barycentric_consts(n: int) -> np.ndarray:
    """Barycentric weights for n uniformly spaced nodes: (-1)^j * C(n-1, j)."""
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    w = np.empty(n, dtype=np.float64)
    for j in range(n):
        w[j] = (-1.0) ** j * math.comb(n - 1, j)
    return w


def _margin(b_xi: int, levels: int) -> float:
    # extrapolation allowance past the outer bandlimit: half an outer block
    if levels >= 1:
        return float(b_xi * 3 ** (levels - 1))
    return max(1.0, float(b_xi - 1))


def _domain_limit(b_xi: int, levels: int) -> float:
    # largest |coordinate| covered by a cell: outer annulus edge, or the
    # last core lattice point when there are no refinement levels
    if levels >= 1:
        return float(b_xi * 3 ** levels)
    return float(b_xi - 1)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _axis_weights(t, w, wb, nw):
    # barycentric weights on nodes 0..nw-1 at local coordinate t; one-hot on
    # a node hit so stored values are reproduced bit-exactly
    r = round(t)
    ir = int(r)
    if 0 <= ir < nw and abs(t - r) < NODE_TOL:
        for i in range(nw):
            w[i] = 0.0
        w[ir] = 1.0
        return
    s = 0.0
    for i in range(nw):
        v = wb[i] / (t - i)
        w[i] = v
        s += v
    inv = 1.0 / s
    for i in range(nw):
        w[i] *= inv


@njit(cache=True)
def _locate_1d(x, b_xi, levels, k, w_core):
    # returns (base, stride, nw, t) for the patch owning x
    if levels >= 1:
        n_lim = float(b_xi * 3 ** levels)
    else:
        n_lim = float(b_xi - 1)
    core_org = -(b_xi - 1)
    sx = x
    if sx > n_lim:
        sx = n_lim
    elif sx < -n_lim:
        sx = -n_lim
    if abs(sx) < b_xi:
        i0 = int(math.floor(sx)) - (w_core // 2 - 1)
        if i0 < core_org:
            i0 = core_org
        hi = (b_xi - 1) - (w_core - 1)
        if i0 > hi:
            i0 = hi
        return i0 - core_org, 1, w_core, x - i0
    j = 1
    b = b_xi
    while abs(sx) > 3.0 * b:
        b *= 3
        j += 1
    # 1D annulus has two cells: I=0 -> [-3b,-b], I=2 -> [b,3b]
    u = (sx + 3.0 * b) / (2.0 * b)
    f = math.floor(u)
    rfrac = u - f
    if rfrac < EDGE_TOL and 1.0 <= f <= 2.0:
        cell = int(f) - 1
    elif (1.0 - rfrac) < EDGE_TOL and 0.0 <= f <= 1.0:
        cell = int(f) + 1
    else:
        cell = int(f)
        if cell < 0:
            cell = 0
        elif cell > 2:
            cell = 2
    if cell == 1:
        cell = 0 if sx < 0 else 2
    idx = 0 if cell == 0 else 1
    core_size = 2 * b_xi - 1
    base = core_size + ((j - 1) * 2 + idx) * k
    lo = (-3 + 2 * cell) * b
    sp = 2.0 * b / (k - 1)
    return base, 1, k, (x - lo) / sp


@njit(cache=True, parallel=True)
def _eval_hier_1d_nb(tab, pts, b_xi, levels, k, w_core, wb_k, wb_c, out, clamped):
    npts = pts.shape[0]
    nlam = tab.shape[1]
    if levels >= 1:
        n_lim = float(b_xi * 3 ** levels)
        marg = float(b_xi * 3 ** (levels - 1))
    else:
        n_lim = float(b_xi - 1)
        marg = max(1.0, float(b_xi - 1))
    kmax = max(k, w_core)
    for p in prange(npts):
        w = np.empty(kmax, dtype=np.float64)
        x = pts[p]
        cl = 0
        if abs(x) > n_lim:
            cl = 1
            lim = n_lim + marg
            if x > lim:
                x = lim
            elif x < -lim:
                x = -lim
        base, stride, nw, t = _locate_1d(x, b_xi, levels, k, w_core)
        if nw == w_core:
            _axis_weights(t, w, wb_c, nw)
        else:
            _axis_weights(t, w, wb_k, nw)
        for l in range(nlam):
            out[p, l] = 0.0
        for u in range(nw):
            wu = w[u]
            if wu == 0.0:
                continue
            row = base + u * stride
            for l in range(nlam):
                out[p, l] += tab[row, l] * wu
        clamped[p] = cl


@njit(cache=True, parallel=True)
def _eval_hier_2d_nb(tab, pts, b_xi, levels, k, w_core, wb_k, wb_c, out, clamped):
    npts = pts.shape[0]
    nlam = tab.shape[1]
    core_m = 2 * b_xi - 1
    core_org = -(b_xi - 1)
    core_size = core_m * core_m
    if levels >= 1:
        n_lim = float(b_xi * 3 ** levels)
        marg = float(b_xi * 3 ** (levels - 1))
    else:
        n_lim = float(b_xi - 1)
        marg = max(1.0, float(b_xi - 1))
    kmax = max(k, w_core)
    for p in prange(npts):
        wx = np.empty(kmax, dtype=np.float64)
        wy = np.empty(kmax, dtype=np.float64)
        x = pts[p, 0]
        y = pts[p, 1]
        cl = 0
        ax = abs(x)
        ay = abs(y)
        m0 = ax if ax > ay else ay
        if m0 > n_lim:
            cl = 1
            lim = n_lim + marg
            if x > lim:
                x = lim
            elif x < -lim:
                x = -lim
            if y > lim:
                y = lim
            elif y < -lim:
                y = -lim
        sx = x
        if sx > n_lim:
            sx = n_lim
        elif sx < -n_lim:
            sx = -n_lim
        sy = y
        if sy > n_lim:
            sy = n_lim
        elif sy < -n_lim:
            sy = -n_lim
        ms = abs(sx)
        if abs(sy) > ms:
            ms = abs(sy)
        if ms < b_xi:
            nw1 = w_core
            nw2 = w_core
            i0 = int(math.floor(sx)) - (w_core // 2 - 1)
            if i0 < core_org:
                i0 = core_org
            hi = (b_xi - 1) - (w_core - 1)
            if i0 > hi:
                i0 = hi
            j0 = int(math.floor(sy)) - (w_core // 2 - 1)
            if j0 < core_org:
                j0 = core_org
            if j0 > hi:
                j0 = hi
            t1 = x - i0
            t2 = y - j0
            base = (i0 - core_org) * core_m + (j0 - core_org)
            s1 = core_m
            _axis_weights(t1, wx, wb_c, nw1)
            _axis_weights(t2, wy, wb_c, nw2)
        else:
            j = 1
            b = b_xi
            while ms > 3.0 * b:
                b *= 3
                j += 1
            bu = 2.0 * b
            u1 = (sx + 3.0 * b) / bu
            u2 = (sy + 3.0 * b) / bu
            f1 = math.floor(u1)
            r1 = u1 - f1
            if r1 < EDGE_TOL and 1.0 <= f1 <= 2.0:
                c1lo = int(f1) - 1
                c1hi = int(f1)
            elif (1.0 - r1) < EDGE_TOL and 0.0 <= f1 <= 1.0:
                c1lo = int(f1)
                c1hi = int(f1) + 1
            else:
                c = int(f1)
                if c < 0:
                    c = 0
                elif c > 2:
                    c = 2
                c1lo = c
                c1hi = c
            f2 = math.floor(u2)
            r2 = u2 - f2
            if r2 < EDGE_TOL and 1.0 <= f2 <= 2.0:
                c2lo = int(f2) - 1
                c2hi = int(f2)
            elif (1.0 - r2) < EDGE_TOL and 0.0 <= f2 <= 1.0:
                c2lo = int(f2)
                c2hi = int(f2) + 1
            else:
                c = int(f2)
                if c < 0:
                    c = 0
                elif c > 2:
                    c = 2
                c2lo = c
                c2hi = c
            # first combination in block-index order that is not the center
            i1 = c1lo
            i2 = c2lo
            if i1 == 1 and i2 == 1:
                if c2hi != c2lo:
                    i2 = c2hi
                elif c1hi != c1lo:
                    i1 = c1hi
            lin = i1 * 3 + i2
            idx = lin if lin < 4 else lin - 1
            base = core_size + ((j - 1) * 8 + idx) * k * k
            lo1 = (-3 + 2 * i1) * b
            lo2 = (-3 + 2 * i2) * b
            sp = bu / (k - 1)
            t1 = (x - lo1) / sp
            t2 = (y - lo2) / sp
            nw1 = k
            nw2 = k
            s1 = k
            _axis_weights(t1, wx, wb_k, nw1)
            _axis_weights(t2, wy, wb_k, nw2)
        for l in range(nlam):
            out[p, l] = 0.0
        for u in range(nw1):
            wu = wx[u]
            if wu == 0.0:
                continue
            rb = base + u * s1
            for v in range(nw2):
                w = wu * wy[v]
                if w == 0.0:
                    continue
                row = rb + v
                for l in range(nlam):
                    out[p, l] += tab[row, l] * w
        clamped[p] = cl


# ---------------------------------------------------------------------------
# numpy fallback
# ---------------------------------------------------------------------------


def _axis_weights_np(t: np.ndarray, wb: np.ndarray) -> np.ndarray:
    """Vectorized barycentric weights: t (P,), wb (W,) -> (P, W)."""
    nw = wb.shape[0]
    d = t[:, None] - np.arange(nw)[None, :]
    hit = np.abs(d) < NODE_TOL
    anyhit = hit.any(axis=1)
    d_safe = np.where(hit | (d == 0.0), 1.0, d)
    w = wb[None, :] / d_safe
    w /= w.sum(axis=1, keepdims=True)
    if anyhit.any():
        w[anyhit] = hit[anyhit].astype(np.float64)
    return w


def _locate_block_cells_np(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-axis cell choice with edge ties kept as (lo, hi) pairs.

    s, b: (P,) clamped coordinates and level half-widths. Returns (P, 2)
    integer array of [lo, hi] cell candidates (lo == hi when unambiguous).
    """
    u = (s + 3.0 * b) / (2.0 * b)
    f = np.floor(u)
    r = u - f
    lo = np.clip(f.astype(np.int64), 0, 2)
    hi = lo.copy()
    m_lo = (r < EDGE_TOL) & (f >= 1.0) & (f <= 2.0)
    lo[m_lo] = f[m_lo].astype(np.int64) - 1
    hi[m_lo] = f[m_lo].astype(np.int64)
    m_hi = ((1.0 - r) < EDGE_TOL) & (f >= 0.0) & (f <= 1.0)
    lo[m_hi] = f[m_hi].astype(np.int64)
    hi[m_hi] = f[m_hi].astype(np.int64) + 1
    return np.stack([lo, hi], axis=1)


def _locate_np(pts: np.ndarray, b_xi: int, levels: int, k: int, w_core: int):
    """Vectorized locate: pts (P, d) -> patch descriptors.

    Returns (base, strides (P, d), nws (P, d), ts (P, d), clamped (P,)).
    """
    dim = pts.shape[1]
    n_lim = _domain_limit(b_xi, levels)
    marg = _margin(b_xi, levels)
    core_m = 2 * b_xi - 1
    core_org = -(b_xi - 1)
    core_size = core_m ** dim

    m0 = np.max(np.abs(pts), axis=1)
    clamped = m0 > n_lim
    x = np.clip(pts, -(n_lim + marg), n_lim + marg)
    s = np.clip(x, -n_lim, n_lim)
    ms = np.max(np.abs(s), axis=1)

    P = pts.shape[0]
    base = np.zeros(P, dtype=np.int64)
    strides = np.zeros((P, dim), dtype=np.int64)
    nws = np.zeros((P, dim), dtype=np.int64)
    ts = np.zeros((P, dim), dtype=np.float64)

    in_core = ms < b_xi
    if in_core.any():
        sc = s[in_core]
        xc = x[in_core]
        i0 = np.floor(sc).astype(np.int64) - (w_core // 2 - 1)
        i0 = np.clip(i0, core_org, (b_xi - 1) - (w_core - 1))
        ts[in_core] = xc - i0
        nws[in_core] = w_core
        off = i0 - core_org
        if dim == 1:
            base[in_core] = off[:, 0]
            strides[in_core, 0] = 1
        else:
            base[in_core] = off[:, 0] * core_m + off[:, 1]
            strides[in_core, 0] = core_m
            strides[in_core, 1] = 1

    blk = ~in_core
    if blk.any():
        sb = s[blk]
        xb = x[blk]
        msb = ms[blk]
        j = np.ones(sb.shape[0], dtype=np.int64)
        b = np.full(sb.shape[0], float(b_xi))
        # level search: at most L rounds
        for _ in range(max(levels - 1, 0)):
            up = msb > 3.0 * b
            b[up] *= 3.0
            j[up] += 1
        if dim == 1:
            cells = _locate_block_cells_np(sb[:, 0], b)
            cell = cells[:, 0].copy()
            center = cell == 1
            cell[center] = np.where(sb[center, 0] < 0, 0, 2)
            idx = np.where(cell == 0, 0, 1)
            base[blk] = core_size + ((j - 1) * 2 + idx) * k
            lo = (-3 + 2 * cell) * b
            sp = 2.0 * b / (k - 1)
            ts[blk, 0] = (xb[:, 0] - lo) / sp
            strides[blk, 0] = 1
        else:
            c1 = _locate_block_cells_np(sb[:, 0], b)
            c2 = _locate_block_cells_np(sb[:, 1], b)
            i1 = c1[:, 0].copy()
            i2 = c2[:, 0].copy()
            center = (i1 == 1) & (i2 == 1)
            bump2 = center & (c2[:, 1] != c2[:, 0])
            i2[bump2] = c2[bump2, 1]
            bump1 = center & ~bump2 & (c1[:, 1] != c1[:, 0])
            i1[bump1] = c1[bump1, 1]
            lin = i1 * 3 + i2
            idx = np.where(lin < 4, lin, lin - 1)
            base[blk] = core_size + ((j - 1) * 8 + idx) * k * k
            lo1 = (-3 + 2 * i1) * b
            lo2 = (-3 + 2 * i2) * b
            sp = 2.0 * b / (k - 1)
            ts[blk, 0] = (xb[:, 0] - lo1) / sp
            ts[blk, 1] = (xb[:, 1] - lo2) / sp
            strides[blk, 0] = k
            strides[blk, 1] = 1
        nws[blk] = k

    return base, strides, nws, ts, clamped


def _eval_hier_np(tab, pts, b_xi, levels, k, w_core, wb_k, wb_c, out, clamped_u8):
    dim = 1 if pts.ndim == 1 else pts.shape[1]
    p2 = pts.reshape(-1, dim)
    base, strides, nws, ts, clamped = _locate_np(p2, b_xi, levels, k, w_core)
    clamped_u8[:] = clamped
    nlam = tab.shape[1]
    is_core = nws[:, 0] == w_core
    for mask, wb in ((is_core, wb_c), (~is_core, wb_k)):
        if not mask.any():
            continue
        nw = wb.shape[0]
        bsel = base[mask]
        ssel = strides[mask]
        tsel = ts[mask]
        rows = np.where(mask)[0]
        # chunk to bound the gather buffer
        step = max(64, int(4e6 / max(1, nw ** dim * nlam)))
        for c0 in range(0, rows.shape[0], step):
            sl = slice(c0, c0 + step)
            w1 = _axis_weights_np(tsel[sl, 0], wb)
            if dim == 1:
                idx = bsel[sl, None] + np.arange(nw)[None, :] * ssel[sl, 0:1]
                out[rows[sl]] = np.einsum("pul,pu->pl", tab[idx], w1)
            else:
                w2 = _axis_weights_np(tsel[sl, 1], wb)
                s0 = ssel[sl, 0][:, None, None]
                s1 = ssel[sl, 1][:, None, None]
                idx = (
                    bsel[sl][:, None, None]
                    + np.arange(nw)[None, :, None] * s0
                    + np.arange(nw)[None, None, :] * s1
                )
                out[rows[sl]] = np.einsum("puvl,pu,pv->pl", tab[idx], w1, w2)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def eval_hier_table(
    tab: np.ndarray,
    pts: np.ndarray,
    b_xi: int,
    levels: int,
    k: int,
    w_core: int,
    wb_k: np.ndarray,
    wb_c: np.ndarray,
    use_numba: bool | None = None,
) -> tuple[np.ndarray, int]:
    """Evaluate table columns at points.

    tab: (n_omega, n_lambda) complex128, C-contiguous.
    pts: (P,) for 1D grids or (P, 2) for 2D.
    Returns (values (P, n_lambda), number of out-of-domain points).
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    dim = 1 if pts.ndim == 1 else pts.shape[1]
    p = np.ascontiguousarray(pts, dtype=np.float64)
    t = np.ascontiguousarray(tab, dtype=np.complex128)
    npts = p.shape[0]
    out = np.empty((npts, t.shape[1]), dtype=np.complex128)
    flags = np.zeros(npts, dtype=np.uint8)
    if npts == 0:
        return out, 0
    if use_numba and HAVE_NUMBA:
        if dim == 1:
            _eval_hier_1d_nb(t, p.reshape(-1), b_xi, levels, k, w_core, wb_k, wb_c, out, flags)
        else:
            _eval_hier_2d_nb(t, p, b_xi, levels, k, w_core, wb_k, wb_c, out, flags)
    else:
        _eval_hier_np(t, p, b_xi, levels, k, w_core, wb_k, wb_c, out, flags)
    return out, int(flags.sum())
