"""Energies, the perturbed-energy Lyapunov functional, decay fits, distance to
the stationary set and the two-trajectory quasi-stability check."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import CoupledSystem, StateVector
from .integrator import Trajectory, energy0


@dataclass(frozen=True)
class EnergyEntry:
    E0: float
    Pi: float
    E: float


def energy(state: StateVector, system: CoupledSystem, force=None) -> EnergyEntry:
    e0 = energy0(system, state)
    pi = force.potential(state.beta, state.c0) if force is not None else 0.0
    return EnergyEntry(E0=e0, Pi=pi, E=e0 + pi)


@dataclass
class EnergyReport:
    E0: np.ndarray
    Pi: np.ndarray
    E: np.ndarray
    dissipation_cum: np.ndarray
    work_cum: np.ndarray
    max_residual: float

    def summary(self) -> dict:
        return {"E0_initial": float(self.E0[0]), "E0_final": float(self.E0[-1]),
                "E_initial": float(self.E[0]), "E_final": float(self.E[-1]),
                "dissipation_total": float(self.dissipation_cum[-1]),
                "work_total": float(self.work_cum[-1]), "max_residual": self.max_residual}


def energy_report(traj: Trajectory) -> EnergyReport:
    return EnergyReport(E0=traj.E0, Pi=traj.E - traj.E0, E=traj.E,
                        dissipation_cum=traj.cumulative(traj.dissipation),
                        work_cum=traj.cumulative(traj.work), max_residual=ledger_closure(traj))


def ledger_closure(traj: Trajectory) -> float:
    """max_n |E(t_{n+1}) - E(t_n) + dissipation_n - work_n|."""
    return float(np.abs(traj.residual).max()) if len(traj.residual) else 0.0


# Lyapunov functional ---------------------------------------------------------------

def psi_term(system: CoupledSystem, state: StateVector) -> float:
    """(u, u_t) on the plate plus (v, Ext[P^ u]) in the fluid."""
    plate = system.plate
    ec = plate.coeffs.T @ (plate.mass_raw @ plate.complement)      # (e_h, xi_j)
    y = state.y
    nf = system.nf
    uut = state.beta @ state.beta_dot + state.c0 * (ec @ state.beta_dot)
    return float(uut + y @ system.G[:, nf:] @ state.beta)


@dataclass
class LyapunovReport:
    epsilon: float
    V: np.ndarray
    a0: float
    a1: float
    violations: int
    sandwich_ok: bool

    def summary(self) -> dict:
        return {"epsilon": self.epsilon, "a0": self.a0, "a1": self.a1,
                "violations": self.violations, "sandwich_ok": self.sandwich_ok}


def _violations(V, rtol=1e-12):
    dv = np.diff(V)
    return int(np.sum(dv > rtol * np.maximum(np.abs(V[:-1]), 1e-300)))


def lyapunov(traj: Trajectory, system: CoupledSystem, epsilon: float) -> LyapunovReport:
    """V = E0 + eps Psi along the samples with its sandwich constants against E0."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    E0 = traj.E0
    psi = np.array([psi_term(system, traj.state(i)) for i in range(len(traj))])
    V = E0 + epsilon * psi
    pos = E0 > 0
    ratio = V[pos] / E0[pos] if np.any(pos) else np.ones(1)
    a0, a1 = float(ratio.min()), float(ratio.max())
    return LyapunovReport(epsilon=float(epsilon), V=V, a0=a0, a1=a1,
                          violations=_violations(V), sandwich_ok=bool(a0 > 0 and np.isfinite(a1)))


def max_monotone_epsilon(traj: Trajectory, system: CoupledSystem, eps_hi: float = 10.0,
                         n_bisect: int = 40) -> float:
    """Largest eps in [0, eps_hi] (bisection) with V non-increasing and a0 > 0."""
    def ok(eps):
        r = lyapunov(traj, system, eps)
        return r.violations == 0 and r.sandwich_ok

    if not ok(0.0):
        return 0.0
    if ok(eps_hi):
        return eps_hi
    lo, hi = 0.0, eps_hi
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# decay fit -----------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    M: float
    gamma: float
    r2: float
    window: tuple
    conclusive: bool

    def summary(self) -> dict:
        return asdict(self)


def fit_decay(times, E0, window=None, min_r2: float = 0.9) -> DecayFit:
    """Least squares of log E0 = log M - gamma t over ``window = (t_lo, t_hi)``."""
    times = np.asarray(times, dtype=float)
    E0 = np.asarray(E0, dtype=float)
    if window is None:
        window = (times[0], times[-1])
    sel = (times >= window[0]) & (times <= window[1])
    t, e = times[sel], E0[sel]
    if len(t) < 2 or np.ptp(t) == 0:
        raise ValueError("degenerate decay window")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("E0 must be positive on the decay window")
    y = np.log(e)
    A = np.column_stack([np.ones_like(t), t])
    (c, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ np.array([c, slope])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(res**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res <= 1e-24 * len(y) else 0.0)
    return DecayFit(M=float(np.exp(c)), gamma=float(-slope), r2=float(r2),
                    window=(float(window[0]), float(window[1])), conclusive=bool(r2 >= min_r2))


# stationary set -----------------------------------------------------------------------

def distance_to_stationary(state: StateVector, stationary_betas, system: CoupledSystem) -> float:
    """min over u* of (||v||^2 + ||Delta(u - u*)||^2 + ||u_t||^2)^(1/2); u* has zero mean."""
    if len(stationary_betas) == 0:
        raise ValueError("empty stationary set")
    betas = np.asarray(stationary_betas, dtype=float).reshape(len(stationary_betas), system.n)
    y = state.y
    base = float(y @ system.G @ y + state.beta_dot @ state.beta_dot
                 + system.complement_energy(state.c0))
    d = state.beta[None, :] - betas
    lap = np.sum(system.Kp * d * d, axis=1)
    return float(np.sqrt(max(base + lap.min(), 0.0)))


# quasi-stability ---------------------------------------------------------------------------

DEFAULT_GAMMAS = tuple(10.0 ** np.linspace(-3, 1, 41))


@dataclass
class QuasiStabilityReport:
    times: np.ndarray
    z: np.ndarray                 # ||Z(t)||_H^2
    lower: np.ndarray             # ||u1 - u2||^2 on the plate
    gammas: np.ndarray
    M_R: np.ndarray               # smallest certifying constant per gamma
    with_integral: bool
    feasible: bool
    best: tuple = field(default=(0.0, np.inf))     # (gamma*, M_R) at the largest feasible gamma

    def pareto_rows(self):
        return [(float(g), float(m)) for g, m in zip(self.gammas, self.M_R) if np.isfinite(m)]

    def certifies(self, gamma: float, M_R: float, rtol: float = 1e-12) -> bool:
        """Direct a posteriori check of the inequality at every sample."""
        den = _denominator(self.times, self.z, self.lower, gamma, self.with_integral)
        return bool(np.all(self.z <= M_R * den * (1 + rtol) + 1e-300))

    def summary(self) -> dict:
        return {"feasible": self.feasible, "gamma_star": float(self.best[0]),
                "M_R": float(self.best[1]), "with_integral": self.with_integral,
                "z0": float(self.z[0]), "z_final": float(self.z[-1])}


def _denominator(times, z, lower, gamma, with_integral):
    den = np.exp(-gamma * (times - times[0])) * z[0]
    if with_integral:
        integ = np.zeros_like(times)
        for k in range(1, len(times)):
            h = times[k] - times[k - 1]
            decay = np.exp(-gamma * h)
            integ[k] = decay * integ[k - 1] + 0.5 * h * (decay * lower[k - 1] + lower[k])
        den = den + integ
    return den


def difference_norms(traj1: Trajectory, traj2: Trajectory, system: CoupledSystem):
    """||Z||_H^2 = ||v1 - v2||^2 + ||Delta(u1 - u2)||^2 + ||u_t1 - u_t2||^2 and ||u1 - u2||^2."""
    da = traj1.alpha - traj2.alpha
    db = traj1.beta - traj2.beta
    dbd = traj1.beta_dot - traj2.beta_dot
    dy = np.hstack([da, dbd])
    dc = traj1.c0 - traj2.c0
    z = (np.einsum("ki,ij,kj->k", dy, system.G, dy) + np.sum(system.Kp * db * db, axis=1)
         + np.sum(dbd * dbd, axis=1) + system.complement_energy(dc))
    lower = np.sum(db * db, axis=1)
    return z, lower


def quasi_stability_check(traj1: Trajectory, traj2: Trajectory, system: CoupledSystem,
                          gammas=DEFAULT_GAMMAS, with_integral: bool = True) -> QuasiStabilityReport:
    """Smallest M_R per gamma* such that the quasi-stability bound holds at all samples."""
    if len(traj1) != len(traj2) or not np.array_equal(traj1.times, traj2.times):
        raise ValueError("trajectories are sampled on different time grids")
    times = traj1.times
    z, lower = difference_norms(traj1, traj2, system)
    gammas = np.asarray(gammas, dtype=float)
    M = np.full(len(gammas), np.inf)
    for i, g in enumerate(gammas):
        if not np.any(z > 0):
            M[i] = 1.0
            continue
        den = _denominator(times, z, lower, g, with_integral)
        pos = z > 0
        if np.any(den[pos] <= 0):
            continue
        M[i] = float(np.max(z[pos] / den[pos]))
    ok = np.isfinite(M) & (gammas > 0)
    best = (float(gammas[ok][-1]), float(M[ok][-1])) if np.any(ok) else (0.0, np.inf)
    return QuasiStabilityReport(times=times, z=z, lower=lower, gammas=gammas, M_R=M,
                                with_integral=with_integral, feasible=bool(np.any(ok)), best=best)
