"""Symbol-level operator algebra.

Pointwise operations (scale, add, conjugate) act directly on tables. The
structural operations reconstruct band coefficient functions at shifted
frequencies through the grid's interpolation rule:

* compose: the twisted product, c_hat_lam(xi) = sum over band splittings
  lam = k + l of a_hat_k(xi + l) * b_hat_l(xi);
* adjoint: c_hat_lam(xi) = conj(a_hat_{-lam}(xi + lam));
* half-shift transforms between the quantization conventions (see `moyal`).

Iterations (inverse, sqrt_invsqrt, exponential) are built from compose on
a normalized operand alpha*A and run at the declared order of their limit,
so the bracket-weight normalization of the tables stays fixed across
iterates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import SpatialGrid
from .symbol import FreqGrid, Symbol, weight

logger = logging.getLogger(__name__)

MOYAL_DIRECTIONS = ("to_weyl", "from_weyl")


@dataclass
class IterationReport:
    """Progress record of a Newton-type symbol iteration."""

    iterations: int
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    alpha: float = 1.0

    def lines(self) -> list[str]:
        out = [
            f"alpha = {self.alpha:.6e}",
            f"iterations = {self.iterations}",
            f"converged = {self.converged}",
        ]
        for k, r in enumerate(self.residual_history):
            out.append(f"iter {k + 1}: change = {r:.3e}")
        return out


def identity_symbol(xgrid: SpatialGrid, fgrid: FreqGrid) -> Symbol:
    """Neutral element of compose: constant 1, order 0."""
    table = np.zeros((fgrid.n_nodes, xgrid.n_bands), dtype=np.complex128)
    table[:, _center_column(xgrid)] = 1.0
    return Symbol(table=table, order=0.0, xgrid=xgrid, fgrid=fgrid)


def scale(c: complex, a: Symbol) -> Symbol:
    """Multiply a symbol by a scalar; order unchanged."""
    return a.with_table(a.table * c)


def add(a: Symbol, b: Symbol) -> Symbol:
    """Pointwise sum; result order is the larger declared order."""
    _check_compat(a, b)
    d_c = max(a.order, b.order)
    return a.with_table(
        a.with_order(d_c).table + b.with_order(d_c).table, order=d_c
    )


def conjugate(a: Symbol) -> Symbol:
    """Symbol of conj(a(x, xi)): bands flip sign and conjugate."""
    return a.with_table(np.conj(a.table[:, ::-1]))


def max_abs_symbol(a: Symbol) -> float:
    """max |a(x, xi)| over the spatial lattice and frequency nodes."""
    nodes = a._node_pts()
    hat = a.table * weight(nodes, a.order)[:, None]
    phases = np.exp(
        2j * np.pi * (a.xgrid.points() @ a.bands().T.astype(np.float64))
    )
    m = float(np.abs(phases @ hat.T).max())
    if not np.isfinite(m):
        raise ValueError("symbol has non-finite values")
    return m


def compose(a: Symbol, b: Symbol) -> Symbol:
    """Twisted product: the symbol of operator composition A then B...

    Result order is the sum of the operand orders; bands beyond the shared
    spatial band are truncated.
    """
    _check_compat(a, b)
    bands = a.bands()
    nodes = a._node_pts()
    nlam = bands.shape[0]
    n_omega = nodes.shape[0]
    dim = a.dim
    d_c = a.order + b.order
    b_hat = b.table * weight(nodes, b.order)[:, None]
    out = np.zeros((n_omega, nlam), dtype=np.complex128)

    plans = []
    bm = a.xgrid.b_x - 1
    for j in range(nlam):
        s = bands + bands[j][None, :]
        ok = np.all(np.abs(s) <= bm, axis=1)
        plans.append((np.where(ok)[0], _band_columns(s[ok], a.xgrid)))

    chunk = max(1, int(2e6) // max(1, n_omega * nlam))
    for c0 in range(0, nlam, chunk):
        c1 = min(c0 + chunk, nlam)
        shift = bands[c0:c1].astype(np.float64)
        if dim == 1:
            pts = (nodes[None, :] + shift[:, 0][:, None]).reshape(-1)
        else:
            pts = (nodes[None, :, :] + shift[:, None, :]).reshape(-1, 2)
        a_hat = a.eval_hat(pts)
        for i, j in enumerate(range(c0, c1)):
            k_idx, out_idx = plans[j]
            if k_idx.size == 0:
                continue
            blk = a_hat[i * n_omega : (i + 1) * n_omega, k_idx]
            out[:, out_idx] += blk * b_hat[:, j][:, None]

    out *= weight(nodes, -d_c)[:, None]
    return Symbol(table=out, order=d_c, xgrid=a.xgrid, fgrid=a.fgrid)


def adjoint(a: Symbol) -> Symbol:
    """Symbol of the adjoint operator; order unchanged."""
    bands = a.bands()
    nodes = a._node_pts()
    nlam = bands.shape[0]
    out = np.empty_like(a.table)
    inv_w = weight(nodes, -a.order)
    for j in range(nlam):
        pts = _shift(nodes, bands[j].astype(np.float64), a.dim)
        jc = nlam - 1 - j  # column of the negated band
        col = a.eval_h(pts, columns=slice(jc, jc + 1))[:, 0]
        out[:, j] = np.conj(col * weight(pts, a.order)) * inv_w
    return a.with_table(out)


def moyal(a: Symbol, direction: str) -> Symbol:
    """Transform between quantization conventions by band half-shifts.

    direction "to_weyl" re-centers each band coefficient function at
    xi - band/2; "from_weyl" undoes it. The two directions are exact
    inverses up to interpolation error.
    """
    if direction not in MOYAL_DIRECTIONS:
        raise ValueError(
            f"direction must be one of {MOYAL_DIRECTIONS}, got {direction!r}"
        )
    sgn = -0.5 if direction == "to_weyl" else 0.5
    bands = a.bands()
    nodes = a._node_pts()
    out = np.empty_like(a.table)
    inv_w = weight(nodes, -a.order)
    for j in range(bands.shape[0]):
        pts = _shift(nodes, sgn * bands[j].astype(np.float64), a.dim)
        col = a.eval_h(pts, columns=slice(j, j + 1))[:, 0]
        out[:, j] = col * weight(pts, a.order) * inv_w
    return a.with_table(out)


def inverse(
    a: Symbol, tol: float = 1e-10, max_iter: int = 200
) -> tuple[Symbol, IterationReport]:
    """Symbol of the operator inverse, by the quadratic Newton iteration.

    Seeds X = identity declared at the inverse's order, iterates
    X <- 2X - X (alpha A) X with alpha = 1/(2 max|a|), and stops when the
    relative table change drops below tol. Returns alpha * X_final with
    order -a.order.
    """
    alpha = 0.5 / max_abs_symbol(a)
    b = scale(alpha, a)
    x = identity_symbol(a.xgrid, a.fgrid).with_order(-a.order)
    report = IterationReport(iterations=0, alpha=alpha)
    for k in range(max_iter):
        xa = compose(x, b)
        xn = add(scale(2.0, x), scale(-1.0, compose(xa, x)))
        if not np.all(np.isfinite(xn.table)):
            raise RuntimeError(f"inverse iteration diverged at step {k + 1}")
        change = _rel_change(xn.table, x.table)
        report.residual_history.append(change)
        report.iterations = k + 1
        logger.debug("inverse iter %d: change %.3e", k + 1, change)
        x = xn
        if change < tol:
            report.converged = True
            break
    return scale(alpha, x), report


def sqrt_invsqrt(
    a: Symbol, tol: float = 1e-10, max_iter: int = 200
) -> tuple[Symbol, Symbol, IterationReport]:
    """Square root and inverse square root by the coupled Newton iteration.

    On the normalized operand B = alpha A: Yseeds at B, Z at identity;
    each step forms T = 3I - Z Y and updates Y <- Y T / 2, Z <- T Z / 2.
    Returns (alpha^-1/2 Y, alpha^1/2 Z) with orders +-a.order/2.
    """
    alpha = 0.5 / max_abs_symbol(a)
    half = 0.5 * a.order
    y = scale(alpha, a).with_order(half)
    z = identity_symbol(a.xgrid, a.fgrid).with_order(-half)
    ident = identity_symbol(a.xgrid, a.fgrid)
    report = IterationReport(iterations=0, alpha=alpha)
    for k in range(max_iter):
        w = compose(z, y)
        t = add(scale(3.0, ident), scale(-1.0, w))
        yn = scale(0.5, compose(y, t))
        zn = scale(0.5, compose(t, z))
        if not (np.all(np.isfinite(yn.table)) and np.all(np.isfinite(zn.table))):
            raise RuntimeError(f"square-root iteration diverged at step {k + 1}")
        change = max(_rel_change(yn.table, y.table), _rel_change(zn.table, z.table))
        report.residual_history.append(change)
        report.iterations = k + 1
        logger.debug("sqrt iter %d: change %.3e", k + 1, change)
        y, z = yn, zn
        if change < tol:
            report.converged = True
            break
    return scale(alpha ** -0.5, y), scale(alpha ** 0.5, z), report


def exponential(a: Symbol, t: float, k_min: int = 4) -> Symbol:
    """Operator exponential exp(t A) by scaling and squaring.

    The time step is halved K times until delta*max|a| <= 1/8 (K at least
    k_min), the base case is the 4th-order Taylor polynomial, and the
    result is squared K times. Result order 0.
    """
    if t == 0.0:
        return identity_symbol(a.xgrid, a.fgrid)
    m = max_abs_symbol(a)
    k = k_min
    if 8.0 * abs(t) * m > 1.0:
        k = max(k_min, int(math.ceil(math.log2(8.0 * abs(t) * m))))
    delta = t / 2 ** k
    w1 = scale(delta, a).with_order(0.0)
    w2 = compose(w1, w1)
    w3 = compose(w1, w2)
    w4 = compose(w2, w2)
    y = identity_symbol(a.xgrid, a.fgrid)
    for term, c in ((w1, 1.0), (w2, 0.5), (w3, 1.0 / 6.0), (w4, 1.0 / 24.0)):
        y = add(y, scale(c, term))
    logger.debug("exponential: K=%d delta=%.3e max|a|=%.3e", k, delta, m)
    for j in range(k):
        y = compose(y, y)
        if not np.all(np.isfinite(y.table)):
            raise RuntimeError(
                f"exponential overflowed at squaring step {j + 1} of {k} "
                f"(t={t:g}, max|a|={m:.3e})"
            )
    return y


# -- helpers ----------------------------------------------------------------


def _check_compat(a: Symbol, b: Symbol) -> None:
    if a.xgrid != b.xgrid:
        raise ValueError("symbols live on different spatial grids")
    if a.fgrid is not b.fgrid and a.fgrid != b.fgrid:
        raise ValueError("symbols live on different frequency grids")


def _center_column(xgrid: SpatialGrid) -> int:
    m = 2 * xgrid.b_x - 1
    c = xgrid.b_x - 1
    return c * m + c if xgrid.dim == 2 else c


def _band_columns(bands: np.ndarray, xgrid: SpatialGrid) -> np.ndarray:
    m = 2 * xgrid.b_x - 1
    off = xgrid.b_x - 1
    if xgrid.dim == 1:
        return (bands[:, 0] + off).astype(np.int64)
    return ((bands[:, 0] + off) * m + (bands[:, 1] + off)).astype(np.int64)


def _shift(nodes: np.ndarray, s: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        return nodes + s[0]
    return nodes + s[None, :]


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    denom = np.linalg.norm(old.ravel())
    if denom == 0.0:
        return float(np.linalg.norm(new.ravel()))
    return float(np.linalg.norm((new - old).ravel()) / denom)
