"""Compressed symbols: separated band expansion with tabulated frequency parts.

A symbol a(x, xi) of declared order m, band-limited in x, is stored as the
table h[w, l] = ahat_l(xi_w) / <xi_w>**m, where ahat_l is the l-th spatial
Fourier coefficient of a, xi_w runs over the frequency-grid nodes and
<xi> = (1 + |xi|^2)**0.5. Off-node frequencies are reconstructed by the
grid's interpolation rule; the weight <xi>**m is divided out before
tabulation and multiplied back after interpolation, so tables stay O(1)
for symbols of any order.

Sampling convention: symbol callables take (x, xi) with trailing axis dim
and broadcastable leading shapes, returning a complex array of the
broadcast shape.
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.fft

from .grid import ChebFreqGrid, HierFreqGrid, SpatialGrid

logger = logging.getLogger(__name__)

FreqGrid = Union[HierFreqGrid, ChebFreqGrid]

MAGIC = b"DSC1"
_KIND_HIER = 0
_KIND_CHEB = 1


def weight(pts: np.ndarray, order: float) -> np.ndarray:
    """Japanese-bracket weight <xi>**order at points (P, dim) or (P,)."""
    p = np.asarray(pts, dtype=np.float64)
    if p.ndim == 1:
        sq = p * p
    else:
        sq = (p * p).sum(axis=-1)
    if order == 0.0:
        return np.ones_like(sq)
    return (1.0 + sq) ** (0.5 * order)


@dataclass
class Symbol:
    """Tabulated symbol: h table, declared order, and its two grids."""

    table: np.ndarray          # (n_nodes, n_bands) complex128
    order: float
    xgrid: SpatialGrid
    fgrid: FreqGrid
    clamp_count: int = 0       # out-of-domain evaluations while building
    _cheb_coeff: np.ndarray | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        t = np.ascontiguousarray(self.table, dtype=np.complex128)
        expect = (self.fgrid.n_nodes, self.xgrid.n_bands)
        if t.shape != expect:
            raise ValueError(f"table shape {t.shape} does not match grids {expect}")
        if self.xgrid.dim != self.fgrid.dim:
            raise ValueError(
                f"grid dims differ: spatial {self.xgrid.dim}, frequency {self.fgrid.dim}"
            )
        self.table = t
        self.order = float(self.order)

    @property
    def dim(self) -> int:
        return self.xgrid.dim

    @property
    def n_bands(self) -> int:
        return self.table.shape[1]

    def bands(self) -> np.ndarray:
        return self.xgrid.bands()

    def with_table(self, table: np.ndarray, order: float | None = None) -> "Symbol":
        return replace(
            self,
            table=table,
            order=self.order if order is None else order,
            _cheb_coeff=None,
        )

    def with_order(self, new_order: float) -> "Symbol":
        """Re-declare the order without changing the symbol itself."""
        if new_order == self.order:
            return self
        w = weight(self._node_pts(), self.order - new_order)
        return self.with_table(self.table * w[:, None], order=new_order)

    def _node_pts(self) -> np.ndarray:
        nodes = self.fgrid.nodes
        return nodes[:, 0] if self.dim == 1 else nodes

    # -- evaluation ---------------------------------------------------------

    def eval_h(self, pts: np.ndarray, columns: slice | None = None) -> np.ndarray:
        """Weighted tables h interpolated at frequency points (P, [dim])."""
        vals, ncl = self._eval_table(pts, columns)
        if ncl:
            self.clamp_count += ncl
        return vals

    def eval_hat(self, pts: np.ndarray) -> np.ndarray:
        """Band coefficient functions ahat_l = h_l * <xi>**order at points."""
        vals = self.eval_h(pts)
        p = np.asarray(pts, dtype=np.float64)
        return vals * weight(p, self.order)[:, None]

    def eval_symbol(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Pointwise a(x_i, xi_i) for paired points x (P, dim), xi (P, dim)."""
        xp = np.atleast_2d(np.asarray(x, dtype=np.float64))
        fp = np.asarray(xi, dtype=np.float64)
        fp2 = fp[:, None] if fp.ndim == 1 else fp
        if xp.shape[0] != fp2.shape[0]:
            raise ValueError(
                f"point counts differ: {xp.shape[0]} spatial, {fp2.shape[0]} frequency"
            )
        hat = self.eval_hat(fp2 if self.dim == 2 else fp2[:, 0])
        phases = np.exp(2j * np.pi * (xp @ self.bands().T.astype(np.float64)))
        return (phases * hat).sum(axis=1)

    def _eval_table(
        self, pts: np.ndarray, columns: slice | None
    ) -> tuple[np.ndarray, int]:
        if isinstance(self.fgrid, HierFreqGrid):
            tab = self.table if columns is None else self.table[:, columns]
            return self.fgrid.eval_table(np.ascontiguousarray(tab), pts)
        return self._eval_cheb(pts, columns), 0

    # -- rational-Chebyshev evaluation -------------------------------------

    def _cheb_coefficients(self) -> np.ndarray:
        if self._cheb_coeff is None:
            g = self.fgrid
            assert isinstance(g, ChebFreqGrid)
            vals = self.table.reshape(g.n_theta, g.n_r, self.n_bands)
            c = np.fft.fft(vals, axis=0) / g.n_theta
            c = scipy.fft.dct(c, type=2, axis=1) / g.n_r
            c[:, 0, :] *= 0.5
            sign = (-1.0) ** np.arange(g.n_r)
            c = c * sign[None, :, None]
            self._cheb_coeff = np.ascontiguousarray(c)
        return self._cheb_coeff

    def _eval_cheb(self, pts: np.ndarray, columns: slice | None) -> np.ndarray:
        g = self.fgrid
        assert isinstance(g, ChebFreqGrid)
        coeff = self._cheb_coefficients()
        if columns is not None:
            coeff = coeff[:, :, columns]
        nb = coeff.shape[2]
        p = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r = np.hypot(p[:, 0], p[:, 1])
        th = np.arctan2(p[:, 1], p[:, 0])
        s = g.to_s(r)
        m = np.fft.fftfreq(g.n_theta) * g.n_theta
        out = np.empty((p.shape[0], nb), dtype=np.complex128)
        step = max(16, int(2e6 / max(1, g.n_theta * g.n_r)))
        for c0 in range(0, p.shape[0], step):
            sl = slice(c0, c0 + step)
            ss = s[sl]
            t_mat = np.empty((ss.shape[0], g.n_r))
            t_mat[:, 0] = 1.0
            if g.n_r > 1:
                t_mat[:, 1] = ss
                for n in range(2, g.n_r):
                    t_mat[:, n] = 2.0 * ss * t_mat[:, n - 1] - t_mat[:, n - 2]
            e_mat = np.exp(1j * th[sl, None] * m[None, :])
            out[sl] = np.einsum("pm,pn,mnl->pl", e_mat, t_mat, coeff)
        return out


def sample_symbol(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    order: float,
    xgrid: SpatialGrid,
    fgrid: FreqGrid,
) -> Symbol:
    """Tabulate a symbol callable on the product of the two grids.

    Parameters
    ----------
    fn : callable
        Symbol function fn(x, xi); both arguments carry a trailing axis of
        length dim and broadcast against each other.
    order : float
        Declared order; the table stores values divided by <xi>**order.
    xgrid, fgrid
        Spatial lattice and frequency node set.
    """
    if xgrid.dim != fgrid.dim:
        raise ValueError(
            f"grid dims differ: spatial {xgrid.dim}, frequency {fgrid.dim}"
        )
    n = xgrid.n
    dim = xgrid.dim
    pts = xgrid.points()
    nodes = fgrid.nodes
    n_nodes = nodes.shape[0]
    tab = np.empty((n_nodes, xgrid.n_bands), dtype=np.complex128)
    inv_w = weight(nodes if dim == 2 else nodes[:, 0], -order)
    step = max(8, int(4e6 / max(1, xgrid.n_points)))
    for c0 in range(0, n_nodes, step):
        sl = slice(c0, min(c0 + step, n_nodes))
        vals = np.asarray(
            fn(pts[None, :, :], nodes[sl, None, :]), dtype=np.complex128
        )
        if vals.shape != (sl.stop - c0, xgrid.n_points):
            raise ValueError(
                f"symbol callable returned shape {vals.shape}, "
                f"expected {(sl.stop - c0, xgrid.n_points)}"
            )
        finite = np.isfinite(vals)
        if not finite.all():
            i, j = np.argwhere(~finite)[0]
            raise ValueError(
                f"symbol callable returned a non-finite value at "
                f"x={tuple(pts[j])}, xi={tuple(nodes[c0 + i])}"
            )
        shp = (sl.stop - c0,) + (n,) * dim
        ahat = np.fft.fftn(vals.reshape(shp), axes=tuple(range(1, dim + 1)))
        ahat /= float(xgrid.n_points)
        ahat = np.fft.fftshift(ahat, axes=tuple(range(1, dim + 1)))
        if dim == 1:
            band = ahat[:, 1:]
        else:
            band = ahat[:, 1:, 1:]
        tab[sl] = band.reshape(sl.stop - c0, -1) * inv_w[sl, None]
    return Symbol(table=tab, order=order, xgrid=xgrid, fgrid=fgrid)


def eval_h(sym: Symbol, lam, pts: np.ndarray) -> np.ndarray:
    """Interpolate one weighted band table h_lam at frequency points."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.int64))
    bands = sym.bands()
    match = np.all(bands == lam_arr[None, :], axis=1)
    idx = np.where(match)[0]
    if idx.size != 1:
        raise ValueError(f"band index {lam} is outside the spatial band")
    col = int(idx[0])
    return sym.eval_h(pts, columns=slice(col, col + 1))[:, 0]


def eval_symbol(sym: Symbol, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Pointwise symbol values a(x_i, xi_i); see Symbol.eval_symbol."""
    return sym.eval_symbol(x, xi)


# -- serialization ----------------------------------------------------------


def save_symbol(sym: Symbol, path: str | Path) -> None:
    """Write a symbol to the binary container.

    Layout, all little-endian: magic "DSC1"; dim u32; order f64; spatial
    half-bandwidth u32; grid kind u8 plus its parameters; table shape
    (bands, nodes) as u64 pairs; the h table as complex64, band-major
    (all nodes of band 0, then band 1, ...). complex64 caps file
    round-trip precision at single precision; in-memory tables stay
    complex128.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<Id", sym.dim, sym.order))
    buf.write(struct.pack("<I", sym.xgrid.b_x))
    if isinstance(sym.fgrid, HierFreqGrid):
        buf.write(struct.pack("<BIII", _KIND_HIER, sym.fgrid.b_xi,
                              sym.fgrid.levels, sym.fgrid.k))
    else:
        buf.write(struct.pack("<BIId", _KIND_CHEB, sym.fgrid.n_theta,
                              sym.fgrid.n_r, sym.fgrid.l_map))
    buf.write(struct.pack("<QQ", sym.table.shape[1], sym.table.shape[0]))
    buf.write(np.ascontiguousarray(sym.table.T, dtype="<c8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_symbol(path: str | Path) -> Symbol:
    """Read a symbol written by `save_symbol`."""
    from .grid import build_cheb_freq_grid, build_hier_freq_grid, build_spatial_grid

    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a symbol file (bad magic {raw[:4]!r})")
    off = 4
    dim, order = struct.unpack_from("<Id", raw, off)
    off += struct.calcsize("<Id")
    (b_x,) = struct.unpack_from("<I", raw, off)
    off += 4
    (kind,) = struct.unpack_from("<B", raw, off)
    off += 1
    if kind == _KIND_HIER:
        b_xi, levels, k = struct.unpack_from("<III", raw, off)
        off += 12
        fgrid: FreqGrid = build_hier_freq_grid(b_xi, levels, k, dim=dim)
    elif kind == _KIND_CHEB:
        n_theta, n_r, l_map = struct.unpack_from("<IId", raw, off)
        off += 16
        fgrid = build_cheb_freq_grid(n_theta, n_r, l_map)
    else:
        raise ValueError(f"{path}: unknown frequency grid kind {kind}")
    n_bands, n_nodes = struct.unpack_from("<QQ", raw, off)
    off += 16
    table = np.frombuffer(
        raw, dtype="<c8", count=n_nodes * n_bands, offset=off
    ).reshape(n_bands, n_nodes)
    xgrid = build_spatial_grid(b_x, dim=dim)
    return Symbol(
        table=table.T.astype(np.complex128), order=order, xgrid=xgrid, fgrid=fgrid
    )
