"""Zero-mean stationary plate states and the Berger buckling branch.

A stationary state has v = 0, u_t = 0 and u = sum_j beta_j xi_j solving

    kappa_j beta_j + (F(u), xi_j) = 0   for every mode j.

For the Berger force the nontrivial solutions bifurcate from Gamma = mu_1,
the smallest eigenvalue of (u'', w'') = mu (u', w') on the zero-mean clamped
space, and on the first branch ||u'||^2 = (Gamma - mu_1) / kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh

from .plate_forces import ForceModel
from .plate_modes import PlateBasis

DEDUP_TOL = 1e-6


def stationary_residual(beta, c0, model: ForceModel, basis: PlateBasis) -> np.ndarray:
    """(Delta u, Delta xi_j) + (F(u), xi_j) for all modes."""
    beta = np.asarray(beta, dtype=float)
    return basis.eigenvalues * beta + model.bind(basis).force(beta, c0)


def buckling_threshold(basis: PlateBasis, return_vector: bool = False):
    """mu_1 of K_p x = mu S x with S the slope Gram matrix of the modes."""
    d1 = basis.eval(basis.nodes, 1)
    S = (d1 * basis.weights) @ d1.T
    mu, vec = eigh(np.diag(basis.eigenvalues), 0.5 * (S + S.T), subset_by_index=[0, 0])
    if return_vector:
        return float(mu[0]), vec[:, 0]
    return float(mu[0])


@dataclass
class StationaryPoint:
    beta: np.ndarray
    residual: float
    amplitude: float      # ||u'||^2
    gamma: float = 0.0


@dataclass
class StationarySet:
    points: list = field(default_factory=list)
    failures: list = field(default_factory=list)     # (guess index, message)
    guesses: int = 0
    gamma_path: tuple = ()

    def __len__(self) -> int:
        return len(self.points)

    def betas(self) -> np.ndarray:
        n = len(self.points[0].beta) if self.points else 0
        return np.array([p.beta for p in self.points]).reshape(len(self.points), n)


def h2_distance(basis: PlateBasis, b1, b2) -> float:
    d = np.asarray(b1) - np.asarray(b2)
    return float(np.sqrt(np.sum(basis.eigenvalues * d * d)))


def newton_solve(model: ForceModel, basis: PlateBasis, guess, c0: float = 0.0,
                 tol: float = 1e-11, max_iter: int = 60):
    """Damped Newton on the stationary residual; returns (beta, residual norm, converged)."""
    bound = model.bind(basis)
    kap = basis.eigenvalues
    beta = np.array(guess, dtype=float)
    scale = max(1.0, float(kap.max()) if len(kap) else 1.0)

    def res(b):
        return kap * b + bound.force(b, c0)

    r = res(beta)
    rn = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if rn <= tol * scale:
            return beta, rn, True
        J = np.diag(kap) + bound.jacobian(beta, c0)
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-8:
            trial = beta - lam * step
            rt = res(trial)
            rtn = float(np.linalg.norm(rt))
            if rtn < (1 - 1e-4 * lam) * rn:
                break
            lam *= 0.5
        else:
            return beta, rn, False
        beta, r, rn = trial, rt, rtn
    return beta, rn, rn <= tol * scale


def _merge(points, candidate, basis):
    for p in points:
        if h2_distance(basis, p.beta, candidate.beta) <= DEDUP_TOL:
            return False
    points.append(candidate)
    return True


def solve_stationary(model: ForceModel, basis: PlateBasis, guesses=None, n_random: int = 8,
                     seed: int = 0, gamma_path=None, tol: float = 1e-11, c0: float = 0.0) -> StationarySet:
    """Collect distinct stationary states from several starting points.

    ``gamma_path`` (Berger only) is an increasing list of Gamma values ending
    below or at the model value; solutions at each value seed the next.
    Random guesses have H^2 norms spread over a few decades; Berger adds the
    buckling vector and Kirchhoff adds every mode softened by lam.
    """
    rng = np.random.default_rng(seed)
    n = basis.n
    start = [np.zeros(n)]
    if guesses is not None:
        start += [np.asarray(g, dtype=float) for g in guesses]
    scale = 1.0 / np.sqrt(basis.eigenvalues) if n else np.zeros(0)
    for _ in range(n_random):
        g = rng.standard_normal(n) * scale
        start.append(g * 10 ** rng.uniform(-1, 3))
    if model.variant == "berger" and n:
        _, v = buckling_threshold(basis, return_vector=True)
        start += [10.0 * v / np.sqrt(np.sum(basis.eigenvalues * v * v)),
                  -10.0 * v / np.sqrt(np.sum(basis.eigenvalues * v * v))]
    if model.variant == "kirchhoff" and n:
        # one-mode balance k3 b^2 int xi_j^4 = lam - kappa_j for every softened mode
        phi = basis.eval(basis.nodes)
        quartic = (phi**4) @ basis.weights
        for j in np.nonzero(basis.eigenvalues < model.kirchhoff_lambda)[0]:
            amp = np.sqrt((model.kirchhoff_lambda - basis.eigenvalues[j])
                          / (model.kirchhoff_cubic * quartic[j]))
            start += [amp * np.eye(n)[j], -amp * np.eye(n)[j]]

    path = tuple(gamma_path) if gamma_path is not None and model.variant == "berger" else ()
    out = StationarySet(guesses=len(start), gamma_path=path)
    models = [replace(model, berger_gamma=g) for g in path] + [model]
    for idx, g0 in enumerate(start):
        beta = g0
        ok, msg = True, ""
        for m in models:
            beta, rn, ok = newton_solve(m, basis, beta, c0=c0, tol=tol)
            if not ok:
                msg = f"Newton stalled at residual {rn:.3e} (Gamma={m.berger_gamma})"
                break
        if not ok:
            out.failures.append((idx, msg))
            continue
        bound = model.bind(basis)
        for b in (beta, -beta):
            rn = float(np.linalg.norm(stationary_residual(b, c0, model, basis)))
            _merge(out.points, StationaryPoint(beta=b.copy(), residual=rn,
                                               amplitude=bound.slope_sq(b, c0),
                                               gamma=model.berger_gamma), basis)
    out.points.sort(key=lambda p: (p.amplitude, tuple(np.round(p.beta, 12))))
    return out


def branch_table(model: ForceModel, basis: PlateBasis, gammas, n_random: int = 8, seed: int = 0):
    """Rows (Gamma, amplitude ||u'||^2, residual) over a Gamma sweep."""
    rows = []
    for g in gammas:
        m = replace(model, berger_gamma=float(g))
        for p in solve_stationary(m, basis, n_random=n_random, seed=seed).points:
            rows.append((float(g), p.amplitude, p.residual))
    return rows
