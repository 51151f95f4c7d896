"""Families of 2D velocity fields with separable components.

A family holds fields indexed ``i = a * nz + b`` whose components are

    v^r(x1, x3) = X^r_a(x1) * Z^r_b(x3),    r = 0 (horizontal), 1 (vertical).

All L2 and H1 Gram blocks then factor into Kronecker products of 1D
integrals over a shared tensor quadrature, which keeps assembly cheap and
exact for the piecewise-polynomial factors used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# f(x, d) -> array (n_funcs, len(x)) holding the d-th derivative of every factor
Factor = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class TensorGrid:
    x1: np.ndarray
    w1: np.ndarray
    x3: np.ndarray
    w3: np.ndarray


class SeparableFamily:
    def __init__(self, fx: tuple[Factor, Factor], fz: tuple[Factor, Factor],
                 grid: TensorGrid, name: str = ""):
        self.fx = fx
        self.fz = fz
        self.grid = grid
        self.name = name
        self.X = tuple(f(grid.x1, 0) for f in fx)
        self.dX = tuple(f(grid.x1, 1) for f in fx)
        self.Z = tuple(f(grid.x3, 0) for f in fz)
        self.dZ = tuple(f(grid.x3, 1) for f in fz)
        self.nx = self.X[0].shape[0]
        self.nz = self.Z[0].shape[0]

    @property
    def size(self) -> int:
        return self.nx * self.nz

    # pointwise evaluation -------------------------------------------------
    def _outer(self, xa, zb):
        n = xa.shape[1]
        return (xa.T[:, :, None] * zb.T[:, None, :]).reshape(n, -1)

    def values(self, x1, x3) -> np.ndarray:
        """Field values at paired points, shape (2, n_points, size)."""
        x1 = np.atleast_1d(np.asarray(x1, float))
        x3 = np.atleast_1d(np.asarray(x3, float))
        return np.stack([self._outer(self.fx[r](x1, 0), self.fz[r](x3, 0)) for r in (0, 1)])

    def gradients(self, x1, x3) -> np.ndarray:
        """``out[r, s]`` is d v^r / d x_s (s=0: x1, s=1: x3), each (n_points, size)."""
        x1 = np.atleast_1d(np.asarray(x1, float))
        x3 = np.atleast_1d(np.asarray(x3, float))
        out = []
        for r in (0, 1):
            X0, X1 = self.fx[r](x1, 0), self.fx[r](x1, 1)
            Z0, Z1 = self.fz[r](x3, 0), self.fz[r](x3, 1)
            out.append([self._outer(X1, Z0), self._outer(X0, Z1)])
        return np.array(out)


def _g1(A, B, w, weight=None):
    return (A * (w if weight is None else w * weight)) @ B.T


def mass_block(F: SeparableFamily, G: SeparableFamily) -> np.ndarray:
    """``out[i, j] = (F_i, G_j)`` in L2."""
    g = F.grid
    out = np.zeros((F.size, G.size))
    for r in (0, 1):
        out += np.kron(_g1(F.X[r], G.X[r], g.w1), _g1(F.Z[r], G.Z[r], g.w3))
    return out


def stiffness_block(F: SeparableFamily, G: SeparableFamily) -> np.ndarray:
    """``out[i, j] = (grad F_i, grad G_j)``."""
    g = F.grid
    out = np.zeros((F.size, G.size))
    for r in (0, 1):
        out += np.kron(_g1(F.dX[r], G.dX[r], g.w1), _g1(F.Z[r], G.Z[r], g.w3))
        out += np.kron(_g1(F.X[r], G.X[r], g.w1), _g1(F.dZ[r], G.dZ[r], g.w3))
    return out


def l0_block(test: SeparableFamily, trial: SeparableFamily, speed, shear, drag,
             parts=("advection", "shear", "drag")) -> np.ndarray:
    """``out[i, j] = (L0 trial_j, test_i)``.

    ``speed`` and ``shear`` are the horizontal base velocity a(x3) + U and its
    derivative a'(x3) sampled on the x3 quadrature nodes.  ``drag`` is the
    constant 2x2 matrix A.  L0 v = (a0 . grad) v + (v . grad) a0 + A v, and
    with a0 = (a(x3) + U, 0) the second term is (a'(x3) v^1, 0).
    """
    g = test.grid
    out = np.zeros((test.size, trial.size))
    if "advection" in parts:
        for r in (0, 1):
            out += np.kron(_g1(test.X[r], trial.dX[r], g.w1),
                           _g1(test.Z[r], trial.Z[r], g.w3, speed))
    if "shear" in parts:
        out += np.kron(_g1(test.X[0], trial.X[1], g.w1),
                       _g1(test.Z[0], trial.Z[1], g.w3, shear))
    if "drag" in parts:
        for r in (0, 1):
            for s in (0, 1):
                if drag[r, s] != 0.0:
                    out += drag[r, s] * np.kron(_g1(test.X[r], trial.X[s], g.w1),
                                                _g1(test.Z[r], trial.Z[s], g.w3))
    return out


def combined(blockfn, families, *args, **kwargs) -> np.ndarray:
    """Assemble a block matrix over a list of families."""
    rows = [[blockfn(F, G, *args, **kwargs) for G in families] for F in families]
    return np.block(rows) if families else np.zeros((0, 0))
