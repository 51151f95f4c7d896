"""Interior divergence-free fluid basis built from clamped stream functions.

Each basis field is the curl of eta(x1, x3) = p_a(x1) q_b(x3), where p_a and
q_b are clamped-beam modes on the box sides.  The velocity
psi = (d eta / d x3, -d eta / d x1) is divergence free identically and vanishes
on the whole box boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import fields
from .base_flow import BaseFlow, l0_matrix
from .hermite import HermiteSpace, clamped_beam_modes, gauss_grid


class Modes1D:
    """A set of functions in a clamped Hermite space, evaluable with derivatives."""

    def __init__(self, space: HermiteSpace, coeffs: np.ndarray, eigenvalues=None):
        self.space = space
        self.coeffs = coeffs
        self.eigenvalues = eigenvalues

    @property
    def count(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        return (self.space.basis_matrix(x, deriv) @ self.coeffs).T


def fluid_factor_modes(a: float, b: float, count: int, n_elements: int) -> Modes1D:
    space = HermiteSpace(a, b, n_elements)
    lam, vec = clamped_beam_modes(space, count)
    return Modes1D(space, vec, lam)


def make_grid(domain, n_fluid_elements: int, n_plate_elements: int,
              cutoff_depth: float, n_points: int = 8) -> fields.TensorGrid:
    """Tensor Gauss grid whose breakpoints include every mesh node in use."""
    bp1 = np.concatenate([
        np.linspace(domain.box_lo, domain.box_hi, n_fluid_elements + 1),
        np.linspace(domain.plate_lo, domain.plate_hi, n_plate_elements + 1),
    ])
    bp3 = np.concatenate([np.linspace(-domain.h, 0.0, n_fluid_elements + 1), [-cutoff_depth]])
    x1, w1 = gauss_grid(bp1, n_points)
    x3, w3 = gauss_grid(bp3, n_points)
    return fields.TensorGrid(x1, w1, x3, w3)


@dataclass
class StreamBasis:
    px: Modes1D
    qz: Modes1D
    family: fields.SeparableFamily

    @property
    def m1(self) -> int:
        return self.px.count

    @property
    def m3(self) -> int:
        return self.qz.count

    @property
    def size(self) -> int:
        return self.m1 * self.m3

    def index(self, a: int, b: int) -> int:
        return a * self.m3 + b

    def pair(self, i: int) -> tuple[int, int]:
        return divmod(i, self.m3)


def stream_family(px: Modes1D, qz: Modes1D, grid) -> fields.SeparableFamily:
    # psi = (p q', -p' q)
    fx = (lambda x, d: px(x, d), lambda x, d: -px(x, d + 1))
    fz = (lambda z, d: qz(z, d + 1), lambda z, d: qz(z, d))
    return fields.SeparableFamily(fx, fz, grid, name="stream")


def build_stream_basis(m1: int, m3: int, domain, grid=None, n_elements: int = 32,
                       cutoff_depth: float | None = None, n_plate_elements: int = 64,
                       n_points: int = 8) -> StreamBasis:
    if m1 < 0 or m3 < 0:
        raise ValueError("mode counts must be nonnegative")
    if grid is None:
        if cutoff_depth is None:
            cutoff_depth = 0.5 * min(domain.h, domain.plate_length)
        grid = make_grid(domain, n_elements, n_plate_elements, cutoff_depth, n_points)
    px = fluid_factor_modes(domain.box_lo, domain.box_hi, m1, n_elements)
    qz = fluid_factor_modes(-domain.h, 0.0, m3, n_elements)
    return StreamBasis(px, qz, stream_family(px, qz, grid))


@dataclass(frozen=True)
class FluidMatrices:
    M_ff: np.ndarray
    K_ff: np.ndarray
    L_ff: np.ndarray


def _sym(A):
    return 0.5 * (A + A.T)


def assemble_fluid_matrices(basis: StreamBasis, flow: BaseFlow) -> FluidMatrices:
    F = basis.family
    return FluidMatrices(M_ff=_sym(fields.mass_block(F, F)),
                         K_ff=_sym(fields.stiffness_block(F, F)),
                         L_ff=l0_matrix(flow, F, F))


class VelocitySpace:
    """Span of several separable families on one grid (stream fields, extensions)."""

    def __init__(self, families):
        self.families = [f for f in families if f.size > 0]
        self.sizes = [f.size for f in families]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def mass(self) -> np.ndarray:
        return _sym(fields.combined(fields.mass_block, self.families))

    @cached_property
    def stiffness(self) -> np.ndarray:
        return _sym(fields.combined(fields.stiffness_block, self.families))

    def l0(self, flow: BaseFlow, parts=("advection", "shear", "drag")) -> np.ndarray:
        if not self.families:
            return np.zeros((0, 0))
        return np.block([[l0_matrix(flow, F, G, parts) for G in self.families]
                         for F in self.families])

    def _stack(self, method, x1, x3):
        parts = [getattr(F, method)(x1, x3) for F in self.families]
        if not parts:
            n = np.atleast_1d(x1).size
            return np.zeros((2, n, 0)) if method == "values" else np.zeros((2, 2, n, 0))
        return np.concatenate(parts, axis=-1)

    def values(self, x1, x3) -> np.ndarray:
        return self._stack("values", x1, x3)

    def gradients(self, x1, x3) -> np.ndarray:
        return self._stack("gradients", x1, x3)

    def field(self, coeffs) -> "VelocityField":
        return VelocityField(self, np.asarray(coeffs, dtype=float))


@dataclass
class VelocityField:
    space: VelocitySpace
    coeffs: np.ndarray

    def __call__(self, x1, x3) -> np.ndarray:
        """Velocity (2, n_points)."""
        return self.space.values(x1, x3) @ self.coeffs

    def gradient(self, x1, x3) -> np.ndarray:
        return self.space.gradients(x1, x3) @ self.coeffs

    def divergence(self, x1, x3) -> np.ndarray:
        g = self.gradient(x1, x3)
        return g[0, 0] + g[1, 1]

    def norm(self) -> float:
        return float(np.sqrt(max(self.coeffs @ self.space.mass @ self.coeffs, 0.0)))
