"""Zero-mean clamped plate eigenmodes, the mean projector, and the special element.

The plate occupies the interval Omega = (a, b).  Functions on it are stored as
coefficient vectors in a clamped Hermite space (``raw`` coordinates); modal
coordinates refer to the zero-mean eigenmodes xi_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import eigh, null_space

from .hermite import HermiteSpace, clamped_raw_basis


class SpecialElement:
    """e(x) = (x - a)^2 (b - x)^2 / 24, the clamped solution of e'''' = 1."""

    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self.poly = Polynomial.fromroots([a, a, b, b]) / 24.0

    def __call__(self, x, deriv: int = 0):
        p = self.poly.deriv(deriv) if deriv > 0 else self.poly
        return p(np.asarray(x, dtype=float))


def special_element(a: float, b: float) -> SpecialElement:
    if not b > a:
        raise ValueError("degenerate plate interval")
    return SpecialElement(a, b)


@dataclass(frozen=True)
class MeanProjector:
    """(Delta., Delta.)-orthogonal projector onto the zero-mean clamped functions.

    ``matrix`` acts on raw coefficients; ``complement`` holds the raw
    coefficients of the discrete special element e_h, which spans the range
    of I - P.
    """
    matrix: np.ndarray
    complement: np.ndarray
    integrals: np.ndarray

    def split(self, u):
        """Return ``(P u, c)`` with ``u = P u + c e_h``."""
        u = np.asarray(u, dtype=float)
        c = float(self.integrals @ u) / float(self.integrals @ self.complement)
        return u - c * self.complement, c


@dataclass
class PlateBasis:
    space: HermiteSpace
    coeffs: np.ndarray          # (dim, n) raw coefficients of the modes
    eigenvalues: np.ndarray     # kappa_1 <= kappa_2 <= ...
    nodes: np.ndarray           # plate quadrature
    weights: np.ndarray
    projector: MeanProjector
    special: SpecialElement

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def a(self) -> float:
        return self.space.a

    @property
    def b(self) -> float:
        return self.space.b

    @property
    def complement(self) -> np.ndarray:
        return self.projector.complement

    def eval(self, x, deriv: int = 0) -> np.ndarray:
        """Mode values at x, shape (n, len(x)); ``deriv=-1`` is the primitive from a."""
        return (self.space.basis_matrix(x, deriv) @ self.coeffs).T

    def eval_raw(self, u, x, deriv: int = 0) -> np.ndarray:
        return self.space.basis_matrix(x, deriv) @ np.asarray(u, dtype=float)

    def combine(self, beta, c0: float = 0.0) -> np.ndarray:
        """Raw coefficients of sum_j beta_j xi_j + c0 e_h."""
        return self.coeffs @ np.asarray(beta, dtype=float) + c0 * self.complement

    def project(self, u) -> np.ndarray:
        """Modal coefficients (u, xi_j) of a raw plate function."""
        return self.coeffs.T @ (self.mass_raw @ np.asarray(u, dtype=float))

    def mean(self, u) -> float:
        return float(self.projector.integrals @ np.asarray(u, dtype=float))

    @cached_property
    def mass_raw(self) -> np.ndarray:
        return self.space.gram(0)

    @cached_property
    def stiff_raw(self) -> np.ndarray:
        return self.space.gram(2)


def project_mean(basis: PlateBasis, u):
    """Split a raw clamped function as ``u = P u + c e_h``; returns ``(P u, c)``."""
    return basis.projector.split(u)


def mean_projector(space: HermiteSpace, n_points: int = 8) -> MeanProjector:
    K = space.gram(2, n_points)
    m = space.integrals()
    # discrete e_h solves (e_h'', w'') = int w for all w, so it is K-orthogonal
    # to every zero-mean function
    e_h = np.linalg.solve(K, m)
    P = np.eye(space.dim) - np.outer(e_h, m) / (m @ e_h)
    return MeanProjector(matrix=P, complement=e_h, integrals=m)


def zero_mean_eigenmodes(n_plate: int, a: float = 0.0, b: float = 1.0,
                         n_raw: int = 64, n_points: int = 8) -> PlateBasis:
    """Lowest ``n_plate`` modes of (xi'', w'') = kappa (xi, w) on zero-mean w."""
    space = clamped_raw_basis(a, b, n_raw)
    if n_plate > space.dim - 1:
        raise ValueError(f"n_plate={n_plate} exceeds the zero-mean subspace dimension {space.dim - 1}")
    M = space.gram(0, n_points)
    K = space.gram(2, n_points)
    proj = mean_projector(space, n_points)
    Q = null_space(proj.integrals[None, :])
    if n_plate > 0:
        kappa, w = eigh(Q.T @ K @ Q, Q.T @ M @ Q, subset_by_index=[0, n_plate - 1])
        coeffs = Q @ w
    else:
        kappa, coeffs = np.zeros(0), np.zeros((space.dim, 0))
    # fix signs: xi_j'(a) = 0 for clamped modes, so use the curvature at a
    d2 = space.basis_matrix(np.array([a]), 2)[0] @ coeffs
    coeffs = coeffs * np.where(d2 < 0, -1.0, 1.0)
    nodes, weights = space.quadrature(n_points)
    return PlateBasis(space=space, coeffs=coeffs, eigenvalues=kappa, nodes=nodes,
                      weights=weights, projector=proj, special=special_element(a, b))
