"""Coupled Galerkin system in the state variables (alpha, beta, beta_dot).

The velocity is v = sum_i alpha_i psi_i + sum_j beta_dot_j phi_j with
phi_j = Ext[xi_j], so the trace on the plate equals the plate velocity by
construction.  Writing y = (alpha, beta_dot), the semi-discrete system is

    M y' = -(nu K + L) y - P (K_p beta + F(beta)) + b(t),     beta' = P^T y,

where M = G + diag(0, I) with G the fluid mass over [psi, phi], K the
fluid stiffness, L the matrix of the L0 form (rows are test functions),
K_p = diag(kappa_j) and P injects plate loads into the plate rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import fields
from .base_flow import BaseFlow
from .config import ForcingSpec, RunConfig
from .extension import ExtensionOperator, build_extension, default_cutoff_depth
from .fluid_basis import StreamBasis, VelocityField, VelocitySpace, build_stream_basis, make_grid
from .plate_modes import PlateBasis, zero_mean_eigenmodes


@dataclass
class StateVector:
    alpha: np.ndarray
    beta: np.ndarray
    beta_dot: np.ndarray
    c0: float = 0.0
    t: float = 0.0

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta_dot])

    def copy(self) -> "StateVector":
        return StateVector(self.alpha.copy(), self.beta.copy(), self.beta_dot.copy(), self.c0, self.t)


@dataclass
class CoupledSystem:
    M: np.ndarray            # full mass over y = (alpha, beta_dot)
    G: np.ndarray            # fluid part of the mass
    K: np.ndarray            # fluid stiffness
    L: np.ndarray            # L0 form, out[i, j] = (L0 trial_j, test_i)
    Kp: np.ndarray           # plate eigenvalues kappa_j
    nu: float
    nf: int                  # number of stream fields
    plate: PlateBasis
    space: VelocitySpace
    flow: BaseFlow
    stream: StreamBasis | None = None
    ext: ExtensionOperator | None = None
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    fluid_load: np.ndarray | None = None    # (G_f, psi_i), (G_f, phi_j) per unit amplitude
    plate_load: np.ndarray | None = None    # (G_pl, xi_j) per unit amplitude
    mass_condition: float = 1.0

    def __post_init__(self):
        self._chol = cho_factor(self.M) if self.M.size else None
        self.D = self.nu * self.K + self.L

    @property
    def n(self) -> int:
        return self.plate.n

    @property
    def size(self) -> int:
        return self.nf + self.n

    @property
    def plate_rows(self) -> slice:
        return slice(self.nf, self.nf + self.n)

    def solve_mass(self, rhs) -> np.ndarray:
        return cho_solve(self._chol, rhs) if self._chol is not None else np.zeros(0)

    def loads(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Fluid and plate load vectors on the y rows at time t."""
        f = self.forcing
        bf = np.zeros(self.size)
        bp = np.zeros(self.size)
        if self.fluid_load is not None:
            bf = f.fluid_load_amplitude * np.cos(f.fluid_load_omega * t) * self.fluid_load
        if self.plate_load is not None:
            bp = f.plate_load_amplitude * np.cos(f.plate_load_omega * t) * self.plate_load
        return bf, bp

    def velocity(self, state: StateVector) -> VelocityField:
        return self.space.field(state.y[:self.space.size])

    # plate bookkeeping ------------------------------------------------------
    def mode_means(self) -> np.ndarray:
        return self.plate.projector.integrals @ self.plate.coeffs

    def mean_u(self, state: StateVector) -> float:
        pr = self.plate.projector
        return float(self.mode_means() @ state.beta + state.c0 * (pr.integrals @ pr.complement))

    def mean_ut(self, state: StateVector) -> float:
        return float(self.mode_means() @ state.beta_dot)

    def complement_energy(self, c0: float) -> float:
        """||Delta (c0 e_h)||^2; e_h is stiffness-orthogonal to every mode."""
        pr = self.plate.projector
        return c0 * c0 * float(pr.integrals @ pr.complement)


def _sym(A):
    return 0.5 * (A + A.T)


def assemble(plate: PlateBasis, flow: BaseFlow, stream: StreamBasis | None = None,
             ext: ExtensionOperator | None = None, forcing: ForcingSpec | None = None,
             max_condition: float = 1e12) -> CoupledSystem:
    """Assemble all blocks; ``stream``/``ext`` may be omitted for decoupled limits."""
    forcing = forcing or ForcingSpec()
    families = []
    if stream is not None and stream.size:
        families.append(stream.family)
    nf = stream.size if stream is not None else 0
    if ext is not None and plate.n:
        families.append(ext.family)
    space = VelocitySpace(families)
    n = plate.n
    size = nf + n
    G = np.zeros((size, size))
    K = np.zeros((size, size))
    L = np.zeros((size, size))
    # ext may be absent: the plate rows then carry no fluid blocks
    cols = np.arange(nf) if ext is None or not plate.n else np.arange(size)
    if families:
        G[np.ix_(cols, cols)] = space.mass
        K[np.ix_(cols, cols)] = space.stiffness
        L[np.ix_(cols, cols)] = space.l0(flow)
    M = G.copy()
    M[nf:, nf:] += np.eye(n)
    M = _sym(M)
    cond = 1.0
    if size:
        eig = np.linalg.eigvalsh(M)
        cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
        try:
            cho_factor(M)
        except LinAlgError:
            raise ValueError(f"mass matrix is not positive definite (condition {cond:.3e})") from None
        if cond > max_condition:
            raise ValueError(f"mass matrix is ill conditioned (condition {cond:.3e})")

    fluid_load = plate_load = None
    if forcing.fluid_load_mode > 0:
        if forcing.fluid_load_mode > nf:
            raise ValueError("fluid_load_mode exceeds the number of stream fields")
        fluid_load = G[:, forcing.fluid_load_mode - 1].copy()
    if forcing.plate_load_mode > 0:
        if forcing.plate_load_mode > n:
            raise ValueError("plate_load_mode exceeds n_plate")
        plate_load = np.zeros(size)
        plate_load[nf + forcing.plate_load_mode - 1] = 1.0

    return CoupledSystem(M=M, G=G, K=_sym(K), L=L, Kp=plate.eigenvalues.copy(), nu=flow.nu, nf=nf,
                         plate=plate, space=space, flow=flow, stream=stream, ext=ext,
                         forcing=forcing, fluid_load=fluid_load, plate_load=plate_load,
                         mass_condition=float(cond))


@dataclass
class Bases:
    plate: PlateBasis
    stream: StreamBasis | None
    ext: ExtensionOperator | None
    grid: fields.TensorGrid
    flow: BaseFlow


def build_bases(config: RunConfig, m1: int | None = None, m3: int | None = None,
                with_extension: bool = True) -> Bases:
    dom = config.domain
    m1 = config.m1 if m1 is None else m1
    m3 = config.m3 if m3 is None else m3
    plate = zero_mean_eigenmodes(config.n_plate, dom.plate_lo, dom.plate_hi,
                                 n_raw=config.n_plate_elements, n_points=config.quad_points)
    hc = default_cutoff_depth(dom)
    grid = make_grid(dom, config.n_fluid_elements, config.n_plate_elements, hc, config.quad_points)
    stream = None
    if m1 * m3 > 0:
        stream = build_stream_basis(m1, m3, dom, grid=grid, n_elements=config.n_fluid_elements)
    ext = build_extension(plate, grid, hc) if with_extension else None
    flow = BaseFlow(k=config.k, nu=config.nu, h=dom.h, oseen_u=config.oseen_u, drag=config.drag)
    return Bases(plate=plate, stream=stream, ext=ext, grid=grid, flow=flow)


def build_system(config: RunConfig, **kwargs) -> CoupledSystem:
    b = build_bases(config, **kwargs)
    return assemble(b.plate, b.flow, b.stream, b.ext, config.forcing)


# initial data -----------------------------------------------------------------

def _stream_products(system: CoupledSystem, v0) -> np.ndarray:
    """(v0, psi_i) for a velocity field or callable ``v0(x1, x3) -> (2, n)``."""
    nf = system.nf
    if v0 is None or nf == 0:
        return np.zeros(nf)
    F = system.stream.family
    if isinstance(v0, VelocityField):
        out = np.zeros(nf)
        for fam, off in zip(v0.space.families, v0.space.offsets):
            out += fields.mass_block(F, fam) @ v0.coeffs[off:off + fam.size]
        return out
    g = F.grid
    X1, X3 = np.meshgrid(g.x1, g.x3, indexing="ij")
    vals = np.asarray(v0(X1.ravel(), X3.ravel()))
    W = np.outer(g.w1, g.w3).ravel()
    basis = F.values(X1.ravel(), X3.ravel())
    return np.einsum("rp,rpi,p->i", vals, basis, W)


def build_initial_state(system: CoupledSystem, v0=None, u0=None, u1=None,
                        alpha0=None, t0: float = 0.0) -> StateVector:
    """Galerkin initial data.

    v(0) = Pi_m (v0 - Ext[u1]) + Ext[P_n u1],  u(0) = P_n P^ u0 + (I - P^) u0,
    u_t(0) = P_n u1.  ``u0`` and ``u1`` are raw plate coefficient vectors;
    ``alpha0`` adds stream coefficients directly to Pi_m v0.
    """
    plate = system.plate
    dim = plate.space.dim
    u0 = np.zeros(dim) if u0 is None else np.asarray(u0, dtype=float)
    u1 = np.zeros(dim) if u1 is None else np.asarray(u1, dtype=float)
    if system.ext is not None:
        tol = system.ext.mean_tolerance(u1)
    else:
        tol = 1e-10 * max(1.0, float(np.sqrt(abs(u1 @ plate.mass_raw @ u1))))
    if abs(plate.mean(u1)) > tol:
        raise ValueError(f"u1 must have zero mean (integral {plate.mean(u1):.3e})")
    pu0, c0 = plate.projector.split(u0)
    beta = plate.project(pu0)
    beta_dot = plate.project(u1)
    nf = system.nf
    rhs = _stream_products(system, v0)
    if nf and system.ext is not None and np.any(u1):
        rhs = rhs - _stream_products(system, system.ext.extend(u1))
    alpha = np.linalg.solve(system.G[:nf, :nf], rhs) if nf else np.zeros(0)
    if alpha0 is not None:
        alpha = alpha + np.asarray(alpha0, dtype=float)
    return StateVector(alpha=alpha, beta=beta, beta_dot=beta_dot, c0=float(c0), t=t0)


def state_from_config(system: CoupledSystem, config: RunConfig, seed: int = 0) -> StateVector:
    """Initial state from the [initial] section plus an optional seeded random part."""
    ini = config.initial
    plate = system.plate
    u0 = ini.u0_amplitude * plate.coeffs[:, ini.u0_mode - 1]
    u1 = ini.u1_amplitude * plate.coeffs[:, ini.u1_mode - 1]
    alpha0 = np.zeros(system.nf)
    if system.nf:
        alpha0[ini.v0_mode - 1] = ini.v0_amplitude
    state = build_initial_state(system, u0=u0, u1=u1, alpha0=alpha0)
    if ini.random_amplitude > 0:
        state = add_random(system, state, ini.random_amplitude, seed)
    return state


def add_random(system: CoupledSystem, state: StateVector, amplitude: float, seed: int) -> StateVector:
    """Add a random perturbation with energy norm sqrt(2 E0) = ``amplitude``."""
    rng = np.random.default_rng(seed)
    n = system.n
    da = rng.standard_normal(system.nf) / np.sqrt(1.0 + np.arange(system.nf))
    db = rng.standard_normal(n) / np.sqrt(system.Kp) if n else np.zeros(0)
    dbd = rng.standard_normal(n) / np.sqrt(1.0 + np.arange(n))
    y = np.concatenate([da, dbd])
    norm = np.sqrt(y @ system.M @ y + db @ (system.Kp * db))
    if norm == 0:
        return state
    s = amplitude / norm
    return StateVector(state.alpha + s * da, state.beta + s * db, state.beta_dot + s * dbd,
                       state.c0, state.t)


# dynamics -----------------------------------------------------------------------

def rhs(system: CoupledSystem, state: StateVector, force=None, t: float | None = None):
    """Return (alpha', beta'') from M y' = -D y - P(K_p beta + F) + b(t).

    ``force`` is a bound force model (see :mod:`plateflow.plate_forces`) or None.
    """
    t = state.t if t is None else t
    y = state.y
    r = -system.D @ y
    bf, bp = system.loads(t)
    r += bf + bp
    pl = system.plate_rows
    r[pl] -= system.Kp * state.beta
    if force is not None:
        r[pl] -= force.force(state.beta, state.c0)
    yd = system.solve_mass(r)
    return yd[:system.nf], yd[pl]


def trace_mismatch(system: CoupledSystem, state: StateVector, n_points: int = 50) -> float:
    """max over plate points of |v(x, 0) - (0, u_t(x))|."""
    p = system.plate
    x = np.linspace(p.a, p.b, n_points + 2)[1:-1]
    v = system.velocity(state)(x, np.zeros_like(x))
    ut = state.beta_dot @ p.eval(x)
    return float(max(np.abs(v[0]).max(), np.abs(v[1] - ut).max()))
