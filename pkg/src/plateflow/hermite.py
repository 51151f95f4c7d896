"""Clamped cubic Hermite elements on an interval.

One conforming H^2_0 kernel serves both the plate modes and the 1D factors of
the fluid stream functions.  Every function in the space vanishes together
with its slope at both ends of the interval.
"""

from __future__ import annotations

import numpy as np


def gauss_grid(breakpoints, n_points=8):
    """Composite Gauss-Legendre rule over the intervals between breakpoints.

    Breakpoints closer than 1e-13 are merged.  Returns ``(nodes, weights)``.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    keep = np.concatenate([[True], np.diff(bp) > 1e-13 * max(1.0, np.ptp(bp))])
    bp = bp[keep]
    if bp.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    t, w = np.polynomial.legendre.leggauss(n_points)
    mid = 0.5 * (bp[1:] + bp[:-1])
    half = 0.5 * np.diff(bp)
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _local_shapes(s, he, deriv):
    """Hermite shape functions on the reference element, scaled to length he.

    Columns: value left, slope left, value right, slope right.  ``deriv=-1``
    gives the primitive from the left end of the element (in x units).
    """
    s = np.asarray(s, dtype=float)
    if deriv == 0:
        cols = [1 - 3 * s**2 + 2 * s**3, he * (s - 2 * s**2 + s**3),
                3 * s**2 - 2 * s**3, he * (-s**2 + s**3)]
    elif deriv == 1:
        cols = [(-6 * s + 6 * s**2) / he, 1 - 4 * s + 3 * s**2,
                (6 * s - 6 * s**2) / he, -2 * s + 3 * s**2]
    elif deriv == 2:
        cols = [(-6 + 12 * s) / he**2, (-4 + 6 * s) / he,
                (6 - 12 * s) / he**2, (-2 + 6 * s) / he]
    elif deriv == 3:
        one = np.ones_like(s)
        cols = [12 * one / he**3, 6 * one / he**2, -12 * one / he**3, 6 * one / he**2]
    elif deriv == -1:
        cols = [he * (s - s**3 + s**4 / 2), he**2 * (s**2 / 2 - 2 * s**3 / 3 + s**4 / 4),
                he * (s**3 - s**4 / 2), he**2 * (-s**3 / 3 + s**4 / 4)]
    else:
        raise ValueError(f"unsupported derivative order {deriv}")
    return np.stack(cols, axis=-1)


class HermiteSpace:
    """Uniform cubic Hermite mesh on ``[a, b]`` with clamped ends removed.

    The space has dimension ``2 * n_elements - 2``: value and slope at every
    interior node.
    """

    def __init__(self, a: float, b: float, n_elements: int):
        if not b > a:
            raise ValueError("interval must satisfy b > a")
        if n_elements < 2:
            raise ValueError("need at least two elements for a nontrivial clamped space")
        self.a = float(a)
        self.b = float(b)
        self.n_elements = int(n_elements)
        self.he = (self.b - self.a) / self.n_elements
        self.dim = 2 * self.n_elements - 2
        self.nodes = np.linspace(self.a, self.b, self.n_elements + 1)

    @property
    def length(self) -> float:
        return self.b - self.a

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        e = np.floor((x - self.a) / self.he).astype(int)
        e = np.clip(e, 0, self.n_elements - 1)
        s = (x - self.a) / self.he - e
        return e, s

    def basis_matrix(self, x, deriv: int = 0) -> np.ndarray:
        """Values (or derivatives) of every basis function at the points x.

        Returns an array of shape ``(len(x), dim)``.  Points outside the
        interval give zero, except for the primitive (``deriv=-1``), which
        equals the full integral to the right of ``b``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.dim))
        inside = (x >= self.a) & (x <= self.b)
        xi = x[inside]
        rows = np.nonzero(inside)[0]
        e, s = self._locate(xi)
        local = _local_shapes(s, self.he, deriv)
        block = np.zeros((xi.size, self.dim))
        for k in range(4):
            g = 2 * e + k - 2
            ok = (g >= 0) & (g < self.dim)
            block[np.nonzero(ok)[0], g[ok]] += local[ok, k]
        if deriv == -1:
            prefix = self._element_prefix()
            block += prefix[e]
            out[x > self.b] = prefix[-1] + self._element_integrals()[-1]
        out[rows] = block
        return out

    def _element_integrals(self) -> np.ndarray:
        """Integral of every basis function over each element, shape (n_el, dim)."""
        full = _local_shapes(np.array([1.0]), self.he, -1)[0]
        table = np.zeros((self.n_elements, self.dim))
        for e in range(self.n_elements):
            for k in range(4):
                g = 2 * e + k - 2
                if 0 <= g < self.dim:
                    table[e, g] += full[k]
        return table

    def _element_prefix(self) -> np.ndarray:
        ints = self._element_integrals()
        prefix = np.zeros_like(ints)
        prefix[1:] = np.cumsum(ints, axis=0)[:-1]
        return prefix

    def integrals(self) -> np.ndarray:
        """Vector of integrals of the basis functions over the interval."""
        return self._element_integrals().sum(axis=0)

    def quadrature(self, n_points: int = 8):
        return gauss_grid(self.nodes, n_points)

    def gram(self, deriv: int = 0, n_points: int = 8) -> np.ndarray:
        """Gram matrix of the ``deriv``-th derivatives, (N^(d)_i, N^(d)_j)."""
        x, w = self.quadrature(n_points)
        B = self.basis_matrix(x, deriv)
        G = B.T @ (w[:, None] * B)
        return 0.5 * (G + G.T)

    def interpolate(self, f, df) -> np.ndarray:
        """Hermite interpolant coefficients from a function and its derivative."""
        xn = self.nodes[1:-1]
        c = np.empty(self.dim)
        c[0::2] = f(xn)
        c[1::2] = df(xn)
        return c


def clamped_raw_basis(a: float, b: float, n_raw: int) -> HermiteSpace:
    """Conforming clamped space on ``(a, b)`` built from ``n_raw`` Hermite elements."""
    if n_raw < 4:
        raise ValueError(f"n_raw must be at least 4, got {n_raw}")
    return HermiteSpace(a, b, n_raw)


def clamped_beam_modes(space: HermiteSpace, count: int, n_points: int = 8):
    """Lowest unconstrained clamped-beam modes of the space.

    Solves ``(w'', v'') = lam (w, v)`` and returns ``(eigenvalues, coeffs)``
    with coefficient columns normalized in L2.
    """
    from scipy.linalg import eigh

    if count > space.dim:
        raise ValueError(f"requested {count} modes from a space of dimension {space.dim}")
    M = space.gram(0, n_points)
    K = space.gram(2, n_points)
    if count == 0:
        return np.zeros(0), np.zeros((space.dim, 0))
    lam, vec = eigh(K, M, subset_by_index=[0, count - 1])
    # deterministic sign: first nonzero curvature at the left end positive
    d2 = space.basis_matrix(np.array([space.a]), 2)[0] @ vec
    vec = vec * np.where(d2 < 0, -1.0, 1.0)
    return lam, vec
