"""Grids: periodic spatial lattice and compressed frequency node sets.

Frequencies are covered in one of two ways:

* hierarchical grid: an exact integer-lattice core box plus dyadically
  growing square annuli, each tiled by uniform-node blocks (piecewise
  polynomial interpolation in between);
* polar rational-Chebyshev grid: tensor product of uniform angles and a
  Chebyshev grid in a rational radial coordinate mapping [0, inf) to
  [-1, 1) (global spectral interpolation, 2D only).

Node tables produced here are ordered to match the gather kernels in
:mod:`dsc._kernels`: core lattice row-major, then per level, per block,
block nodes row-major.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import (
    _domain_limit,
    _locate_np,
    _margin,
    barycentric_consts,
    eval_hier_table,
)

logger = logging.getLogger(__name__)

# 2D annulus cells in block order (3x3 grid minus the center), row-major
ANNULUS_CELLS_2D = ((0, 0), (0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2))
ANNULUS_CELLS_1D = (0, 2)


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic lattice on [0, 1)^dim with 2*b_x points per axis."""

    b_x: int
    dim: int = 2

    def __post_init__(self) -> None:
        if self.b_x < 1:
            raise ValueError(f"spatial bandwidth must be >= 1, got {self.b_x}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")

    @property
    def n(self) -> int:
        return 2 * self.b_x

    @property
    def n_points(self) -> int:
        return self.n ** self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.float64) / self.n

    def points(self) -> np.ndarray:
        """All lattice points, shape (n_points, dim), row-major."""
        ax = self.axis()
        if self.dim == 1:
            return ax[:, None]
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=1)

    def bands(self) -> np.ndarray:
        """Spatial wavenumbers resolved by the lattice, shape (n_bands, dim).

        Per axis the band is the centered set -(b_x-1)..(b_x-1); the
        unmatched half-bandwidth mode is dropped. Row-major, ascending.
        """
        ax = np.arange(-(self.b_x - 1), self.b_x, dtype=np.int64)
        if self.dim == 1:
            return ax[:, None]
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=1)

    @property
    def n_bands(self) -> int:
        return (2 * self.b_x - 1) ** self.dim


@dataclass(frozen=True)
class Patch:
    """Result of locating a frequency point on a hierarchical grid."""

    kind: str          # "core" or "block"
    level: int         # 0 for the core
    block: int         # index within the level, -1 for the core
    base: int          # first node row in the table
    strides: tuple[int, ...]
    widths: tuple[int, ...]
    local: tuple[float, ...]   # coordinates in node spacing units
    clamped: bool


@dataclass(frozen=True)
class HierFreqGrid:
    """Integer core plus per-level uniform-node blocks on square annuli."""

    b_xi: int
    levels: int
    k: int
    dim: int = 2
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    w_core: int = field(init=False)
    wb_block: np.ndarray = field(init=False, repr=False, compare=False)
    wb_core: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.b_xi < 2:
            raise ValueError(f"frequency core half-width must be >= 2, got {self.b_xi}")
        if self.levels < 0:
            raise ValueError(f"level count must be >= 0, got {self.levels}")
        if self.k < 2:
            raise ValueError(f"nodes per block axis must be >= 2, got {self.k}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        w_core = min(4, 2 * self.b_xi - 1)
        object.__setattr__(self, "w_core", w_core)
        object.__setattr__(self, "wb_block", barycentric_consts(self.k))
        object.__setattr__(self, "wb_core", barycentric_consts(w_core))
        object.__setattr__(self, "nodes", self._build_nodes())

    def _build_nodes(self) -> np.ndarray:
        b, k, dim = self.b_xi, self.k, self.dim
        core_ax = np.arange(-(b - 1), b, dtype=np.float64)
        rows: list[np.ndarray] = []
        if dim == 1:
            rows.append(core_ax[:, None])
        else:
            g1, g2 = np.meshgrid(core_ax, core_ax, indexing="ij")
            rows.append(np.stack([g1.ravel(), g2.ravel()], axis=1))
        u = np.arange(k, dtype=np.float64)
        for j in range(1, self.levels + 1):
            hw = b * 3 ** (j - 1)
            # node = lo + u * (2*hw) / (k-1), computed so corners are exact
            def block_axis(cell: int) -> np.ndarray:
                lo = (-3 + 2 * cell) * hw
                return (lo * (k - 1) + 2.0 * hw * u) / (k - 1)

            if dim == 1:
                for cell in ANNULUS_CELLS_1D:
                    rows.append(block_axis(cell)[:, None])
            else:
                for c1, c2 in ANNULUS_CELLS_2D:
                    a1 = block_axis(c1)
                    a2 = block_axis(c2)
                    g1, g2 = np.meshgrid(a1, a2, indexing="ij")
                    rows.append(np.stack([g1.ravel(), g2.ravel()], axis=1))
        out = np.ascontiguousarray(np.concatenate(rows, axis=0))
        out.setflags(write=False)
        return out

    @property
    def bandlimit(self) -> int:
        return self.b_xi * 3 ** self.levels

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def core_size(self) -> int:
        return (2 * self.b_xi - 1) ** self.dim

    @property
    def blocks_per_level(self) -> int:
        return 8 if self.dim == 2 else 2

    def unique_node_count(self, decimals: int = 6) -> int:
        """Distinct frequency points (shared block edges counted once)."""
        return np.unique(np.round(self.nodes, decimals), axis=0).shape[0]

    def eval_table(
        self, tab: np.ndarray, pts: np.ndarray, use_numba: bool | None = None
    ) -> tuple[np.ndarray, int]:
        """Evaluate all table columns at points; see `eval_hier_table`."""
        return eval_hier_table(
            tab,
            pts,
            self.b_xi,
            self.levels,
            self.k,
            self.w_core,
            self.wb_block,
            self.wb_core,
            use_numba=use_numba,
        )

    def extrapolation_limit(self) -> float:
        """Largest |coordinate| evaluated by extrapolation before clamping."""
        return _domain_limit(self.b_xi, self.levels) + _margin(self.b_xi, self.levels)


def build_spatial_grid(b_x: int, dim: int = 2) -> SpatialGrid:
    return SpatialGrid(b_x=int(b_x), dim=int(dim))


def build_hier_freq_grid(b_xi: int, levels: int, k: int, dim: int = 2) -> HierFreqGrid:
    g = HierFreqGrid(b_xi=int(b_xi), levels=int(levels), k=int(k), dim=int(dim))
    logger.debug(
        "hier grid: b_xi=%d levels=%d k=%d dim=%d nodes=%d unique=%d",
        g.b_xi, g.levels, g.k, g.dim, g.n_nodes, g.unique_node_count(),
    )
    return g


def locate_block(grid: HierFreqGrid, xi) -> Patch:
    """Locate the interpolation patch owning the frequency point xi."""
    p = np.atleast_1d(np.asarray(xi, dtype=np.float64)).reshape(1, grid.dim)
    base, strides, nws, ts, clamped = _locate_np(
        p, grid.b_xi, grid.levels, grid.k, grid.w_core
    )
    b = int(base[0])
    if b < grid.core_size:
        kind, level, block = "core", 0, -1
    else:
        rel = b - grid.core_size
        per_level = grid.blocks_per_level * grid.k ** grid.dim
        level = rel // per_level + 1
        block = (rel % per_level) // grid.k ** grid.dim
        kind = "block"
    return Patch(
        kind=kind,
        level=int(level),
        block=int(block),
        base=b,
        strides=tuple(int(v) for v in strides[0]),
        widths=tuple(int(v) for v in nws[0]),
        local=tuple(float(v) for v in ts[0]),
        clamped=bool(clamped[0]),
    )


@dataclass(frozen=True)
class ChebFreqGrid:
    """Polar grid: uniform angles x Chebyshev nodes in a rational radius map.

    The radial coordinate is s = (r - l_map) / (r + l_map), an increasing
    bijection from [0, inf) onto [-1, 1); nodes are s_q = -cos(pi (q + 1/2)
    / n_r). 2D only.
    """

    n_theta: int
    n_r: int
    l_map: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_theta < 4:
            raise ValueError(f"need at least 4 angles, got {self.n_theta}")
        if self.n_r < 2:
            raise ValueError(f"need at least 2 radial nodes, got {self.n_r}")
        if not (np.isfinite(self.l_map) and self.l_map > 0):
            raise ValueError(f"radial map scale must be positive, got {self.l_map}")
        object.__setattr__(self, "nodes", self._build_nodes())

    @property
    def dim(self) -> int:
        return 2

    @property
    def n_nodes(self) -> int:
        return self.n_theta * self.n_r

    def s_nodes(self) -> np.ndarray:
        q = np.arange(self.n_r, dtype=np.float64)
        return -np.cos(np.pi * (q + 0.5) / self.n_r)

    def r_nodes(self) -> np.ndarray:
        s = self.s_nodes()
        return self.l_map * (1.0 + s) / (1.0 - s)

    def theta_nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta, dtype=np.float64) / self.n_theta

    def _build_nodes(self) -> np.ndarray:
        r = self.r_nodes()
        th = self.theta_nodes()
        # theta-major: node index = i_theta * n_r + i_r
        x = np.cos(th)[:, None] * r[None, :]
        y = np.sin(th)[:, None] * r[None, :]
        out = np.ascontiguousarray(
            np.stack([x.ravel(), y.ravel()], axis=1)
        )
        out.setflags(write=False)
        return out

    def to_s(self, r: np.ndarray) -> np.ndarray:
        return (r - self.l_map) / (r + self.l_map)


def build_cheb_freq_grid(n_theta: int, n_r: int, l_map: float) -> ChebFreqGrid:
    return ChebFreqGrid(n_theta=int(n_theta), n_r=int(n_r), l_map=float(l_map))
