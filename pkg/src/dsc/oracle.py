"""Dense brute-force references for the symbol calculus at small sizes.

A symbol is realized as an explicit matrix on the n^d periodic lattice
(`densify`), and every calculus operation gets a ground-truth matrix
counterpart built by plain linear algebra (`dense_reference`). Deliberately
naive; capped at desk scale.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from .symbol import Symbol

logger = logging.getLogger(__name__)

MAX_ROWS = 4096

_REFERENCE_KINDS = ("compose", "adjoint", "inverse", "sqrt", "invsqrt", "exp")


def window_frequencies(n: int, dim: int) -> np.ndarray:
    """Integer frequencies of the centered window [-n/2, n/2)^dim.

    Ordered to match the raveled FFT layout of an n^dim array (Nyquist
    assigned to -n/2).
    """
    w = (np.fft.fftfreq(n) * n).astype(np.float64)
    if dim == 1:
        return w[:, None]
    g1, g2 = np.meshgrid(w, w, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=1)


def densify(sym: Symbol, n: int) -> np.ndarray:
    """Matrix of the operator on the n^dim lattice, rows = output points.

    M[p, q] = (1/n^dim) sum_xi a(x_p, xi) e^{2 pi i (x_p - x_q) xi}.
    """
    dim = sym.dim
    rows = n ** dim
    if rows > MAX_ROWS:
        raise ValueError(f"dense realization capped at {MAX_ROWS} rows, got n^d={rows}")
    if n % 2:
        raise ValueError(f"grid size must be even, got n={n}")
    freqs = window_frequencies(n, dim)
    hat = sym.eval_hat(freqs if dim == 2 else freqs[:, 0])  # (rows, nlam)
    x = np.arange(n, dtype=np.float64) / n
    if dim == 1:
        pts = x[:, None]
    else:
        g1, g2 = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    phases = np.exp(2j * np.pi * (pts @ sym.bands().T.astype(np.float64)))
    vals = phases @ hat.T  # (rows_x, rows_xi): a(x_p, xi_w)
    # row p of M is the inverse DFT of a(x_p, .) read at lag (p - q) mod n
    shp = (rows,) + (n,) * dim
    w = np.fft.ifftn(vals.reshape(shp), axes=tuple(range(1, dim + 1)))
    idx = np.arange(n)
    lag = (idx[:, None] - idx[None, :]) % n
    if dim == 1:
        return np.ascontiguousarray(w[np.arange(rows)[:, None], lag])
    p1 = np.repeat(np.arange(n), n)
    p2 = np.tile(np.arange(n), n)
    l1 = (p1[:, None] - p1[None, :]) % n
    l2 = (p2[:, None] - p2[None, :]) % n
    return np.ascontiguousarray(w[np.arange(rows)[:, None], l1, l2])


def dense_reference(
    kind: str,
    a: Symbol,
    b: Symbol | None = None,
    n: int = 16,
    t: float = 0.0,
) -> np.ndarray:
    """Ground-truth matrix for a calculus operation, by dense linear algebra.

    kind: one of compose, adjoint, inverse, sqrt, invsqrt, exp. sqrt and
    invsqrt use the eigendecomposition of the Hermitian part and require a
    positive spectrum; exp is scaling-and-squaring at time t.
    """
    if kind not in _REFERENCE_KINDS:
        raise ValueError(f"unknown reference kind {kind!r}, expected one of {_REFERENCE_KINDS}")
    ma = densify(a, n)
    if kind == "compose":
        if b is None:
            raise ValueError("compose reference needs a second symbol")
        return ma @ densify(b, n)
    if kind == "adjoint":
        return ma.conj().T
    if kind == "inverse":
        return np.linalg.inv(ma)
    if kind == "exp":
        return scipy.linalg.expm(t * ma)
    herm = 0.5 * (ma + ma.conj().T)
    ew, ev = np.linalg.eigh(herm)
    if ew.min() <= 0:
        raise ValueError(
            f"{kind} reference needs a positive definite Hermitian part, "
            f"min eigenvalue {ew.min():.3e}"
        )
    pw = np.sqrt(ew) if kind == "sqrt" else 1.0 / np.sqrt(ew)
    return (ev * pw[None, :]) @ ev.conj().T


def estimate_opnorm(
    m: np.ndarray, seed: int = 0, steps: int = 20, vectors: int = 16
) -> float:
    """Spectral norm estimate by power iteration on M*M.

    vectors independent random starts, steps iterations each; returns the
    largest Rayleigh estimate. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    rows = m.shape[1]
    best = 0.0
    for _ in range(vectors):
        v = rng.standard_normal(rows) + 1j * rng.standard_normal(rows)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(steps):
            w = m @ v
            v = m.conj().T @ w
            nv = np.linalg.norm(v)
            if nv == 0.0:
                est = 0.0
                break
            est = np.sqrt(nv)
            v /= nv
        best = max(best, float(est))
    return best
