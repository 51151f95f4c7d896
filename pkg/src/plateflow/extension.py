"""Divergence-free lifting of zero-mean plate data into the channel.

For a zero-mean plate function g with primitive G(x1) = int_a^x1 g, the
extension is the curl of the stream function -G(x1) chi(x3):

    Ext[g] = (-G(x1) chi'(x3), g(x1) chi(x3)).

G vanishes at both plate ends because g has zero mean, chi(0) = 1 and
chi'(0) = 0, and chi vanishes to second order at depth h_c.  Hence the trace
on the plate is (0, g), the trace on every other boundary part is zero and
the divergence vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields
from .base_flow import BaseFlow, l0_matrix
from .fluid_basis import StreamBasis, VelocityField, VelocitySpace
from .plate_modes import PlateBasis


class Cutoff:
    """Quintic smoothstep chi(x3) = S((x3 + h_c) / h_c), S(s) = 10s^3 - 15s^4 + 6s^5.

    chi(0) = 1, chi'(0) = chi''(0) = 0 and chi, chi', chi'' vanish at -h_c;
    chi is zero below -h_c.
    """

    def __init__(self, depth: float):
        if depth <= 0:
            raise ValueError("cutoff depth must be positive")
        self.depth = float(depth)

    def __call__(self, x3, deriv: int = 0) -> np.ndarray:
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        s = (x3 + self.depth) / self.depth
        inside = s > 0
        s = np.where(inside, s, 0.0)
        if deriv == 0:
            val = 10 * s**3 - 15 * s**4 + 6 * s**5
        elif deriv == 1:
            val = (30 * s**2 - 60 * s**3 + 30 * s**4) / self.depth
        elif deriv == 2:
            val = (60 * s - 180 * s**2 + 120 * s**3) / self.depth**2
        elif deriv == 3:
            val = (60 - 360 * s + 360 * s**2) / self.depth**3
        else:
            raise ValueError(f"unsupported derivative order {deriv}")
        return np.where(inside, val, 0.0)[None, :]


def default_cutoff_depth(domain) -> float:
    return 0.5 * min(domain.h, domain.plate_length)


def extension_family(plate_fn, cutoff: Cutoff, grid, name: str = "extension"):
    """Family of Ext[g_j] for plate functions given by ``plate_fn(x, d) -> (n, len(x))``.

    ``plate_fn(x, -1)`` must be the primitive from the left plate end.
    """
    fx = (lambda x, d: -plate_fn(x, d - 1), lambda x, d: plate_fn(x, d))
    fz = (lambda z, d: cutoff(z, d + 1), lambda z, d: cutoff(z, d))
    return fields.SeparableFamily(fx, fz, grid, name=name)


@dataclass
class ExtensionOperator:
    plate: PlateBasis
    cutoff: Cutoff
    grid: fields.TensorGrid
    family: fields.SeparableFamily      # phi_j = Ext[xi_j]

    @property
    def n(self) -> int:
        return self.plate.n

    def mean_tolerance(self, u) -> float:
        scale = np.sqrt(max(u @ self.plate.mass_raw @ u, 0.0))
        return 1e-10 * max(1.0, scale) * max(1.0, self.plate.space.length)

    def extend(self, u) -> VelocityField:
        """Ext of a zero-mean raw plate function, as a field on its own space."""
        u = np.asarray(u, dtype=float)
        mean = self.plate.mean(u)
        if abs(mean) > self.mean_tolerance(u):
            raise ValueError(f"extension needs zero-mean plate data, got integral {mean:.3e}")
        space = self.plate.space

        def fn(x, d):
            return (space.basis_matrix(x, d) @ u)[None, :]

        fam = extension_family(fn, self.cutoff, self.grid, name="extension-single")
        return VelocitySpace([fam]).field(np.ones(1))

    def mode_norms(self) -> np.ndarray:
        return np.sqrt(np.diag(fields.mass_block(self.family, self.family)))

    def bound_constant(self) -> float:
        """C = max_j ||phi_j|| / ||xi_j|| over the stored modes (||xi_j|| = 1)."""
        return float(self.mode_norms().max()) if self.n else 0.0

    def operator_norm(self) -> float:
        """Norm of Ext restricted to the span of the modes (orthonormal in L2)."""
        if not self.n:
            return 0.0
        M = fields.mass_block(self.family, self.family)
        return float(np.sqrt(np.linalg.eigvalsh(0.5 * (M + M.T))[-1]))


def build_extension(plate: PlateBasis, grid, cutoff_depth: float) -> ExtensionOperator:
    cutoff = Cutoff(cutoff_depth)
    fam = extension_family(plate.eval, cutoff, grid)
    return ExtensionOperator(plate=plate, cutoff=cutoff, grid=grid, family=fam)


@dataclass(frozen=True)
class CouplingBlocks:
    M_fe: np.ndarray
    K_fe: np.ndarray
    L_fe: np.ndarray   # rows stream tests, columns extension trials
    L_ef: np.ndarray
    M_ee: np.ndarray
    K_ee: np.ndarray
    L_ee: np.ndarray
    mass_min_eig: float
    mass_condition: float


def assemble_coupling(ext: ExtensionOperator, stream: StreamBasis, flow: BaseFlow,
                      max_condition: float = 1e12) -> CouplingBlocks:
    """All mass, stiffness and L0 blocks between stream fields and extensions."""
    F, E = stream.family, ext.family
    M_fe = fields.mass_block(F, E)
    M_ee = fields.mass_block(E, E)
    M_ee = 0.5 * (M_ee + M_ee.T)
    M_ff = fields.mass_block(F, F)
    G = np.block([[0.5 * (M_ff + M_ff.T), M_fe], [M_fe.T, M_ee]])
    eig = np.linalg.eigvalsh(G) if G.size else np.array([1.0])
    cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
    if not eig[0] > 0 or cond > max_condition:
        raise ValueError(f"combined fluid family is numerically dependent (condition {cond:.3e}); "
                         "change the stream or plate basis sizes")
    K_ee = fields.stiffness_block(E, E)
    return CouplingBlocks(
        M_fe=M_fe,
        K_fe=fields.stiffness_block(F, E),
        L_fe=l0_matrix(flow, F, E),
        L_ef=l0_matrix(flow, E, F),
        M_ee=M_ee,
        K_ee=0.5 * (K_ee + K_ee.T),
        L_ee=l0_matrix(flow, E, E),
        mass_min_eig=float(eig[0]),
        mass_condition=float(cond),
    )
