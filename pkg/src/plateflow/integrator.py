"""Implicit midpoint time stepping with an exact per-step energy ledger.

With y = (alpha, beta_dot) and the midpoint values y_m = (y0 + y1)/2,
beta_m = (beta0 + beta1)/2, beta1 = beta0 + dt P^T y_m, one step solves

    M (y1 - y0) + dt D y_m + dt P (K_p beta_m + Fbar) - dt b(t + dt/2) = 0.

Multiplying by y_m gives E(t1) - E(t0) + dt y_m^T D y_m - dt b . y_m = 0
exactly when Fbar is a discrete gradient, Fbar . (beta1 - beta0) =
Pi(beta1) - Pi(beta0), and up to O(dt^3) for Fbar = F(beta_m).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .assembly import CoupledSystem, StateVector

SCHEMES = ("midpoint", "midpoint_discrete_gradient")


class SolverError(RuntimeError):
    def __init__(self, message: str, residuals=(), t: float | None = None):
        super().__init__(message)
        self.residuals = list(residuals)
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-2
    scheme: str = "midpoint"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    linear_tol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.newton_tol > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def from_config(cls, config) -> "IntegratorConfig":
        return cls(dt=config.dt, scheme=config.scheme, newton_tol=config.tol_newton,
                   newton_max_iter=config.newton_max_iter, linear_tol=config.tol_linear)


@dataclass
class LedgerEntry:
    dissipation: float
    work_fluid: float
    work_plate: float
    residual: float
    iterations: int


def energy0(system: CoupledSystem, state: StateVector) -> float:
    """E0 = (||v||^2 + ||u_t||^2 + ||Delta u||^2) / 2."""
    y = state.y
    return 0.5 * float(y @ system.M @ y + state.beta @ (system.Kp * state.beta)
                       + system.complement_energy(state.c0))


def total_energy(system: CoupledSystem, state: StateVector, force=None) -> float:
    pi = force.potential(state.beta, state.c0) if force is not None else 0.0
    return energy0(system, state) + pi


class Stepper:
    """Reusable stepping context: caches the factorized linear Jacobian."""

    def __init__(self, system: CoupledSystem, force=None, integ: IntegratorConfig | None = None):
        self.system = system
        self.force = None if force is None or force.model.is_linear else force
        self.integ = integ or IntegratorConfig()
        s, dt = system, self.integ.dt
        self.P = np.zeros((s.size, s.n))
        self.P[s.nf:, :] = np.eye(s.n)
        self.J0 = s.M + 0.5 * dt * s.D + 0.25 * dt * dt * self.P @ np.diag(s.Kp) @ self.P.T
        self.lu = lu_factor(self.J0) if s.size else None

    def _fbar(self, b0, b1, c0):
        if self.integ.scheme == "midpoint":
            return self.force.force(0.5 * (b0 + b1), c0)
        return self.force.discrete_gradient(b0, b1, c0)

    def _fbar_jacobian(self, b0, b1, c0):
        """d Fbar / d beta1; beta1 moves by dt/2 per unit change of y1."""
        if self.integ.scheme == "midpoint":
            return 0.5 * self.force.jacobian(0.5 * (b0 + b1), c0)
        return self.force.discrete_gradient_jacobian(b0, b1, c0)

    def residual(self, y1, y0, b0, c0, bload):
        s, dt = self.system, self.integ.dt
        ym = 0.5 * (y0 + y1)
        b1 = b0 + dt * ym[s.nf:]
        bm = 0.5 * (b0 + b1)
        R = s.M @ (y1 - y0) + dt * (s.D @ ym) - dt * bload
        plate = s.Kp * bm
        if self.force is not None:
            plate = plate + self._fbar(b0, b1, c0)
        R[s.nf:] += dt * plate
        return R, ym, b1

    def step(self, state: StateVector) -> tuple[StateVector, LedgerEntry]:
        s, integ = self.system, self.integ
        dt = integ.dt
        if s.size == 0:
            return StateVector(state.alpha, state.beta, state.beta_dot, state.c0, state.t + dt), \
                LedgerEntry(0.0, 0.0, 0.0, 0.0, 0)
        y0, b0, c0 = state.y, state.beta, state.c0
        bf, bp = s.loads(state.t + 0.5 * dt)
        bload = bf + bp
        E0 = total_energy(s, state, self.force)
        history = []
        if self.force is None:
            rhs = s.M @ y0 - 0.5 * dt * (s.D @ y0) + dt * bload
            rhs[s.nf:] -= dt * s.Kp * (b0 + 0.25 * dt * y0[s.nf:])
            y1 = lu_solve(self.lu, rhs)
            iters = 1
        else:
            y1, iters = self._newton(y0, b0, c0, bload, E0, history, state.t)
        R, ym, b1 = self.residual(y1, y0, b0, c0, bload)
        new = StateVector(alpha=y1[:s.nf].copy(), beta=b1, beta_dot=y1[s.nf:].copy(),
                          c0=c0, t=state.t + dt)
        diss = dt * float(ym @ s.D @ ym)
        wf = dt * float(bf @ ym)
        wp = dt * float(bp @ ym)
        E1 = total_energy(s, new, self.force)
        return new, LedgerEntry(diss, wf, wp, E1 - E0 + diss - wf - wp, iters)

    def _newton(self, y0, b0, c0, bload, E0, history, t):
        s, integ = self.system, self.integ
        dt = integ.dt
        # frozen linear Jacobian first, exact Jacobian once contraction is slow
        y = y0.copy()
        # the energy residual is about y_m . R, so aim well below newton_tol;
        # the relative bound 10 tol (1 + E) is the fallback at the roundoff floor
        target = 0.1 * integ.newton_tol
        full = False
        for it in range(1, integ.newton_max_iter + 1):
            R, ym, b1 = self.residual(y, y0, b0, c0, bload)
            rn = float(np.linalg.norm(R))
            history.append(rn)
            if not np.isfinite(rn):
                break
            if rn * max(1.0, float(np.linalg.norm(ym))) <= target and it > 1:
                return y, it
            if len(history) >= 3 and history[-1] > 0.5 * history[-2]:
                full = True
            if full:
                Jf = self._fbar_jacobian(b0, b1, c0)
                J = self.J0 + 0.5 * dt * dt * self.P @ Jf @ self.P.T
                try:
                    delta = np.linalg.solve(J, R)
                except np.linalg.LinAlgError:
                    break
            else:
                delta = lu_solve(self.lu, R)
            y = y - delta
            if np.linalg.norm(delta) <= 1e-15 * max(1.0, float(np.linalg.norm(y))):
                R, ym, _ = self.residual(y, y0, b0, c0, bload)
                history.append(float(np.linalg.norm(R)))
                if history[-1] * max(1.0, float(np.linalg.norm(ym))) <= 10 * integ.newton_tol * (1.0 + abs(E0)):
                    return y, it
        raise SolverError(f"Newton did not converge at t={t:.6g} (residuals {history[-3:]})",
                          residuals=history, t=t)


def step(system: CoupledSystem, state: StateVector, force=None, integ: IntegratorConfig | None = None):
    """One step; returns (next state, ledger entry)."""
    return Stepper(system, force, integ).step(state)


@dataclass
class Trajectory:
    times: np.ndarray
    alpha: np.ndarray            # (n_samples, nf)
    beta: np.ndarray             # (n_samples, n)
    beta_dot: np.ndarray
    c0: float
    E0: np.ndarray
    E: np.ndarray
    # per-step ledger
    dissipation: np.ndarray
    work_fluid: np.ndarray
    work_plate: np.ndarray
    residual: np.ndarray
    sample_steps: np.ndarray     # step index of every sample
    completed: bool = True
    failure: str | None = None
    extra: dict = field(default_factory=dict)

    def state(self, i: int) -> StateVector:
        return StateVector(self.alpha[i].copy(), self.beta[i].copy(), self.beta_dot[i].copy(),
                           self.c0, float(self.times[i]))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def work(self) -> np.ndarray:
        return self.work_fluid + self.work_plate

    def cumulative(self, arr) -> np.ndarray:
        """Cumulative ledger value at every sample."""
        c = np.concatenate([[0.0], np.cumsum(arr)])
        return c[self.sample_steps]


def simulate(system: CoupledSystem, initial: StateVector, force=None,
             integ: IntegratorConfig | None = None, t_final: float | None = None,
             n_steps: int | None = None, sample_every: int = 1, raise_on_failure: bool = False,
             callback=None) -> Trajectory:
    """Advance ``initial`` to ``t_final`` (or for ``n_steps`` steps)."""
    integ = integ or IntegratorConfig()
    if n_steps is None:
        if t_final is None:
            raise ValueError("give t_final or n_steps")
        n_steps = int(round((t_final - initial.t) / integ.dt))
    stepper = Stepper(system, force, integ)
    fobj = stepper.force
    st = initial.copy()
    samples = [st]
    steps = [0]
    ledger = []
    failure = None
    for k in range(1, n_steps + 1):
        try:
            st, entry = stepper.step(st)
        except SolverError as exc:
            failure = str(exc)
            if raise_on_failure:
                raise
            break
        ledger.append(entry)
        if k % sample_every == 0 or k == n_steps:
            samples.append(st)
            steps.append(k)
        if callback is not None:
            callback(k, st)
    E0 = np.array([energy0(system, s) for s in samples])
    E = np.array([total_energy(system, s, fobj) for s in samples])
    arr = np.array([[e.dissipation, e.work_fluid, e.work_plate, e.residual] for e in ledger]).reshape(-1, 4)
    return Trajectory(
        times=np.array([s.t for s in samples]),
        alpha=np.array([s.alpha for s in samples]).reshape(len(samples), system.nf),
        beta=np.array([s.beta for s in samples]).reshape(len(samples), system.n),
        beta_dot=np.array([s.beta_dot for s in samples]).reshape(len(samples), system.n),
        c0=initial.c0, E0=E0, E=E,
        dissipation=arr[:, 0], work_fluid=arr[:, 1], work_plate=arr[:, 2], residual=arr[:, 3],
        sample_steps=np.array(steps), completed=failure is None, failure=failure,
    )


TRAJECTORY_COLUMNS = ("t", "E0", "E", "dissipation_cum", "work_cum", "residual",
                      "norm_v", "norm_lap_u", "norm_ut", "mean_u")


def trajectory_table(system: CoupledSystem, traj: Trajectory) -> np.ndarray:
    """Rows matching :data:`TRAJECTORY_COLUMNS`; ``residual`` is the max |r_n| up to the sample."""
    res = np.concatenate([[0.0], np.maximum.accumulate(np.abs(traj.residual))]) \
        if len(traj.residual) else np.zeros(1)
    rows = []
    diss = traj.cumulative(traj.dissipation)
    work = traj.cumulative(traj.work)
    for i in range(len(traj)):
        s = traj.state(i)
        y = s.y
        nv = np.sqrt(max(y @ system.G @ y, 0.0))
        lap = np.sqrt(s.beta @ (system.Kp * s.beta) + system.complement_energy(s.c0))
        rows.append([s.t, traj.E0[i], traj.E[i], diss[i], work[i], res[traj.sample_steps[i]],
                     nv, lap, np.linalg.norm(s.beta_dot), system.mean_u(s)])
    return np.array(rows).reshape(-1, len(TRAJECTORY_COLUMNS))


def format_csv(columns, rows) -> str:
    """CSV text with floats written by repr, so output is bit-reproducible."""
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                           for v in row) + "\n")
    return buf.getvalue()


def trajectory_csv(system: CoupledSystem, traj: Trajectory) -> str:
    return format_csv(TRAJECTORY_COLUMNS, [[float(v) for v in r] for r in trajectory_table(system, traj)])
