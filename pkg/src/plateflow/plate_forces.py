"""Nonlinear plate forces F(u) = Pi'(u) and their structural checks.

Plate displacements are passed as ``(beta, c0)``: u = sum_j beta_j xi_j + c0 e_h.
Force vectors are always the loads (F(u), xi_j) tested against the modes.

Variants:

* linear     F = 0, Pi = 0
* kirchhoff  F(u) = k3 u^3 - lam u,  Pi(u) = int (k3 u^4 / 4 - lam u^2 / 2)
* berger     F(u) = -(kappa ||u'||^2 - Gamma) u'',
             Pi(u) = kappa ||u'||^4 / 4 - Gamma ||u'||^2 / 2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plate_modes import PlateBasis

# Dual-norm surrogate for H^{-1/2}(Omega) used by the Lipschitz check.
LIPSCHITZ_NORM = "euclidean norm of (F, xi_j): dual of the plate L2 mass on span{xi_j}"


@dataclass(frozen=True)
class ForceModel:
    variant: str = "linear"
    kirchhoff_cubic: float = 1.0
    kirchhoff_lambda: float = 0.0
    berger_kappa: float = 1.0
    berger_gamma: float = 0.0

    def __post_init__(self):
        if self.variant not in ("linear", "kirchhoff", "berger"):
            raise ValueError(f"unknown force model {self.variant!r}")
        if self.variant == "kirchhoff" and not (self.kirchhoff_cubic > 0 and self.kirchhoff_lambda >= 0):
            raise ValueError("kirchhoff needs kirchhoff_cubic > 0 and kirchhoff_lambda >= 0")
        if self.variant == "berger" and not self.berger_kappa > 0:
            raise ValueError("berger needs berger_kappa > 0")

    @classmethod
    def from_config(cls, config) -> "ForceModel":
        return cls(variant=config.force_model, kirchhoff_cubic=config.kirchhoff_cubic,
                   kirchhoff_lambda=config.kirchhoff_lambda, berger_kappa=config.berger_kappa,
                   berger_gamma=config.berger_gamma)

    @property
    def is_linear(self) -> bool:
        return self.variant == "linear"

    def bind(self, basis: PlateBasis) -> "BoundForce":
        return BoundForce(self, basis)


class BoundForce:
    """A force model tied to one plate basis, with precomputed quadrature tables."""

    def __init__(self, model: ForceModel, basis: PlateBasis):
        self.model = model
        self.basis = basis
        x, w = basis.nodes, basis.weights
        self.w = w
        self.phi = basis.eval(x)                                 # (n, nq)
        self.e = basis.eval_raw(basis.complement, x)             # (nq,)
        d1 = basis.eval(x, 1)
        e1 = basis.eval_raw(basis.complement, x, 1)
        self.S = (d1 * w) @ d1.T                                 # (xi_j', xi_k')
        self.s_e = (d1 * w) @ e1                                 # (xi_j', e_h')
        self.ee = float(np.sum(w * e1 * e1))                     # ||e_h'||^2
        self.e_lap2 = float(basis.mean(basis.complement))        # ||e_h''||^2 = int e_h

    # kirchhoff helpers --------------------------------------------------------
    def _u(self, beta, c0):
        return np.asarray(beta) @ self.phi + c0 * self.e

    # berger helpers -----------------------------------------------------------
    def slope_sq(self, beta, c0=0.0) -> float:
        """||u'||^2 on the plate."""
        beta = np.asarray(beta, dtype=float)
        return float(beta @ self.S @ beta + 2 * c0 * (self.s_e @ beta) + c0 * c0 * self.ee)

    def force(self, beta, c0: float = 0.0) -> np.ndarray:
        m = self.model
        beta = np.asarray(beta, dtype=float)
        if m.variant == "linear":
            return np.zeros(self.basis.n)
        if m.variant == "kirchhoff":
            u = self._u(beta, c0)
            return self.phi @ (self.w * (m.kirchhoff_cubic * u**3 - m.kirchhoff_lambda * u))
        q = self.slope_sq(beta, c0)
        return (m.berger_kappa * q - m.berger_gamma) * (self.S @ beta + c0 * self.s_e)

    def potential(self, beta, c0: float = 0.0) -> float:
        m = self.model
        if m.variant == "linear":
            return 0.0
        if m.variant == "kirchhoff":
            u = self._u(beta, c0)
            return float(np.sum(self.w * (m.kirchhoff_cubic * u**4 / 4 - m.kirchhoff_lambda * u**2 / 2)))
        q = self.slope_sq(beta, c0)
        return m.berger_kappa * q * q / 4 - m.berger_gamma * q / 2

    def jacobian(self, beta, c0: float = 0.0) -> np.ndarray:
        """d (F(u), xi_j) / d beta_k."""
        m = self.model
        n = self.basis.n
        if m.variant == "linear":
            return np.zeros((n, n))
        if m.variant == "kirchhoff":
            u = self._u(beta, c0)
            return (self.phi * (self.w * (3 * m.kirchhoff_cubic * u**2 - m.kirchhoff_lambda))) @ self.phi.T
        beta = np.asarray(beta, dtype=float)
        q = self.slope_sq(beta, c0)
        g = self.S @ beta + c0 * self.s_e
        return (m.berger_kappa * q - m.berger_gamma) * self.S + 2 * m.berger_kappa * np.outer(g, g)

    def pairing(self, beta, c0: float = 0.0) -> float:
        """(u, F(u)) including the complement component of u."""
        m = self.model
        beta = np.asarray(beta, dtype=float)
        if m.variant == "linear":
            return 0.0
        if m.variant == "kirchhoff":
            u = self._u(beta, c0)
            return float(np.sum(self.w * u * (m.kirchhoff_cubic * u**3 - m.kirchhoff_lambda * u)))
        q = self.slope_sq(beta, c0)
        return (m.berger_kappa * q - m.berger_gamma) * q

    def discrete_gradient(self, beta0, beta1, c0: float = 0.0) -> np.ndarray:
        """Fbar with Fbar . (beta1 - beta0) = Pi(beta1) - Pi(beta0) exactly.

        Closed forms without difference quotients: for Berger q is quadratic
        in beta, so the chord of kappa q^2/4 - Gamma q/2 is exact; for
        Kirchhoff the pointwise chord of the quartic density is a polynomial.
        """
        m = self.model
        b0 = np.asarray(beta0, dtype=float)
        b1 = np.asarray(beta1, dtype=float)
        if m.variant == "linear":
            return np.zeros(self.basis.n)
        if m.variant == "kirchhoff":
            u0, u1 = self._u(b0, c0), self._u(b1, c0)
            chord = (m.kirchhoff_cubic * (u1**3 + u1 * u1 * u0 + u1 * u0 * u0 + u0**3) / 4
                     - m.kirchhoff_lambda * (u0 + u1) / 2)
            return self.phi @ (self.w * chord)
        q0, q1 = self.slope_sq(b0, c0), self.slope_sq(b1, c0)
        gm = self.S @ (0.5 * (b0 + b1)) + c0 * self.s_e
        return (m.berger_kappa * (q0 + q1) / 2 - m.berger_gamma) * gm

    def discrete_gradient_jacobian(self, beta0, beta1, c0: float = 0.0) -> np.ndarray:
        """d Fbar / d beta1."""
        m = self.model
        b0 = np.asarray(beta0, dtype=float)
        b1 = np.asarray(beta1, dtype=float)
        n = self.basis.n
        if m.variant == "linear":
            return np.zeros((n, n))
        if m.variant == "kirchhoff":
            u0, u1 = self._u(b0, c0), self._u(b1, c0)
            d = m.kirchhoff_cubic * (3 * u1 * u1 + 2 * u1 * u0 + u0 * u0) / 4 - m.kirchhoff_lambda / 2
            return (self.phi * (self.w * d)) @ self.phi.T
        q0, q1 = self.slope_sq(b0, c0), self.slope_sq(b1, c0)
        gm = self.S @ (0.5 * (b0 + b1)) + c0 * self.s_e
        g1 = self.S @ b1 + c0 * self.s_e
        return ((m.berger_kappa * (q0 + q1) / 2 - m.berger_gamma) * 0.5 * self.S
                + m.berger_kappa * np.outer(gm, g1))

    def lap_sq(self, beta, c0: float = 0.0) -> float:
        """||Delta u||^2 = sum kappa_j beta_j^2 + c0^2 ||e_h''||^2."""
        beta = np.asarray(beta, dtype=float)
        return float(np.sum(self.basis.eigenvalues * beta**2) + c0 * c0 * self.e_lap2)


def force_vector(model: ForceModel, beta, c0, basis: PlateBasis) -> np.ndarray:
    return model.bind(basis).force(beta, c0)


def potential(model: ForceModel, beta, c0, basis: PlateBasis) -> float:
    return model.bind(basis).potential(beta, c0)


def gradient_check(model: ForceModel, beta, direction, basis: PlateBasis, c0: float = 0.0,
                   eps_sweep=(1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6)) -> float:
    """Minimal relative mismatch between (F(u), w) and a centered difference of Pi."""
    bound = model.bind(basis)
    w = np.asarray(direction, dtype=float)
    if not np.linalg.norm(w) > 0:
        raise ValueError("direction must be nonzero")
    beta = np.asarray(beta, dtype=float)
    exact = float(bound.force(beta, c0) @ w)
    best = np.inf
    for eps in eps_sweep:
        fd = (bound.potential(beta + eps * w, c0) - bound.potential(beta - eps * w, c0)) / (2 * eps)
        scale = max(abs(exact), abs(fd))
        err = 0.0 if scale == 0.0 else abs(fd - exact) / scale
        best = min(best, err)
    return best


@dataclass(frozen=True)
class Certificate:
    eta: float
    C: float
    c: float
    potential_margin: float      # min over samples of eta ||Delta u||^2 + Pi(u) + C
    pairing_margin: float        # min over samples of eta ||Delta u||^2 + (u, F(u)) + c


def analytic_constants(model: ForceModel, plate_length: float) -> tuple[float, float, float]:
    """Closed-form (eta, C, c) for the lower bounds on Pi and (u, F(u))."""
    if model.variant == "linear":
        return 0.0, 0.0, 0.0
    if model.variant == "kirchhoff":
        # pointwise: k3 s^4/4 - lam s^2/2 >= -lam^2/(4 k3), k3 s^4 - lam s^2 >= -lam^2/(4 k3)
        C = plate_length * model.kirchhoff_lambda**2 / (4 * model.kirchhoff_cubic)
        return 0.0, C, C
    # quartic in q = ||u'||^2 >= 0: kappa q^2/4 - Gamma q/2 >= -Gamma^2/(4 kappa)
    C = model.berger_gamma**2 / (4 * model.berger_kappa)
    return 0.0, C, C


def bound_certificates(model: ForceModel, samples, basis: PlateBasis) -> Certificate:
    """Analytic constants plus worst sampled margins over ``samples`` of (beta, c0)."""
    bound = model.bind(basis)
    eta, C, c = analytic_constants(model, basis.space.length)
    pm, qm = np.inf, np.inf
    for beta, c0 in samples:
        lap = bound.lap_sq(beta, c0)
        pm = min(pm, eta * lap + bound.potential(beta, c0) + C)
        qm = min(qm, eta * lap + bound.pairing(beta, c0) + c)
    if pm == np.inf:
        pm = qm = 0.0
    return Certificate(eta=eta, C=C, c=c, potential_margin=float(pm), pairing_margin=float(qm))


def lipschitz_estimate(model: ForceModel, basis: PlateBasis, radius: float, n_pairs: int = 50,
                       seed: int = 0) -> float:
    """Empirical C_R = max ||F(u1) - F(u2)|| / ||Delta (u1 - u2)|| on a ball of radius R.

    The force difference is measured in :data:`LIPSCHITZ_NORM`.
    """
    rng = np.random.default_rng(seed)
    bound = model.bind(basis)
    scale = 1.0 / np.sqrt(basis.eigenvalues)
    best = 0.0
    for _ in range(n_pairs):
        pair = []
        for _ in range(2):
            b = rng.standard_normal(basis.n) * scale
            b *= rng.uniform(0, radius) / np.sqrt(bound.lap_sq(b))
            pair.append(b)
        diff = np.sqrt(bound.lap_sq(pair[0] - pair[1]))
        if diff > 0:
            best = max(best, np.linalg.norm(bound.force(pair[0]) - bound.force(pair[1])) / diff)
    return float(best)
