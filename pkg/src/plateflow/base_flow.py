"""Base Poiseuille/Oseen profile, drag matrix, and the stability hypothesis."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh, LinAlgError

from . import fields


def poiseuille_profile(k, nu, h, x3):
    """Channel profile a(x3) = -(k x3 / 2 nu)(h + x3) on -h <= x3 <= 0."""
    x3 = np.asarray(x3, dtype=float)
    tol = 1e-12 * max(1.0, h)
    if np.any(x3 < -h - tol) or np.any(x3 > tol):
        raise ValueError(f"x3 must lie in [-{h}, 0]")
    return -(k * x3 / (2.0 * nu)) * (h + x3)


@dataclass(frozen=True)
class BaseFlow:
    k: float
    nu: float
    h: float
    oseen_u: float = 0.0
    drag: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    @classmethod
    def from_config(cls, config) -> "BaseFlow":
        return cls(k=config.k, nu=config.nu, h=config.domain.h,
                   oseen_u=config.oseen_u, drag=config.drag)

    def profile(self, x3):
        return poiseuille_profile(self.k, self.nu, self.h, x3)

    def profile_derivative(self, x3):
        x3 = np.asarray(x3, dtype=float)
        return -(self.k / (2.0 * self.nu)) * (self.h + 2.0 * x3)

    def speed(self, x3):
        """Total horizontal base velocity a(x3) + U."""
        return self.profile(x3) + self.oseen_u

    @property
    def sup_shear(self) -> float:
        """sup |a'(x3)| over the channel, equal to k h / (2 nu)."""
        return abs(self.k) * self.h / (2.0 * self.nu)


def l0_matrix(flow: BaseFlow, test, trial, parts=("advection", "shear", "drag")):
    """Matrix of the L0 form between two field families (rows: test)."""
    x3 = test.grid.x3
    return fields.l0_block(test, trial, flow.speed(x3), flow.profile_derivative(x3),
                           np.asarray(flow.drag, float), parts=parts)


def l0_weak(flow: BaseFlow, v, w) -> float:
    """The bilinear form (L0 v, w) for two velocity fields on a common space.

    ``v`` and ``w`` are :class:`plateflow.fluid_basis.VelocityField` values.
    """
    if v.space is not w.space:
        raise ValueError("fields live on different bases")
    L = v.space.l0(flow)
    return float(w.coeffs @ L @ v.coeffs)


def friedrichs_poincare_constant(mass, stiffness) -> float:
    """Discrete constant c with ||v|| <= c ||grad v|| on the span of the basis.

    Equal to 1/sqrt(lambda_min) of the pencil K x = lambda M x.
    """
    M = np.atleast_2d(np.asarray(mass, dtype=float))
    K = np.atleast_2d(np.asarray(stiffness, dtype=float))
    try:
        cholesky(M)
    except LinAlgError:
        raise ValueError("mass matrix is singular or not positive definite") from None
    lam = eigh(K, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    if lam <= 0:
        raise ValueError("stiffness matrix is not positive definite on the span")
    return 1.0 / np.sqrt(lam)


def _sym_min_eig(S) -> float:
    a, b, d = S[0, 0], 0.5 * (S[0, 1] + S[1, 0]), S[1, 1]
    return 0.5 * (a + d) - np.hypot(0.5 * (a - d), b)


@dataclass(frozen=True)
class StabilityReport:
    sigma_min: float
    c_O: float
    margin: float
    satisfied: bool
    which_branch: str
    sup_shear: float
    nu: float

    def to_dict(self) -> dict:
        return asdict(self)


def stability_margin(flow: BaseFlow, c_O: float) -> StabilityReport:
    """Evaluate the two-branch stability hypothesis.

    ``sigma_min`` is the smallest eigenvalue of the symmetric part of the
    zero-order matrix A(x) = A_drag + grad a0(x), minimized over the channel.
    grad a0 has the single entry a'(x3) in position (1, 3); since the minimal
    eigenvalue is concave in a', the minimum sits at a' = +-sup|a'|.  The check
    is sufficient, never necessary.
    """
    if c_O <= 0:
        raise ValueError("c_O must be positive")
    D = np.asarray(flow.drag, dtype=float)
    s = flow.sup_shear
    off = np.array([[0.0, 1.0], [0.0, 0.0]])
    sigma_min = min(_sym_min_eig(D + s * off), _sym_min_eig(D - s * off))
    margin = flow.nu / c_O**2 + sigma_min
    if sigma_min > 0:
        branch = "positive drag"
    elif margin > 0:
        branch = "Friedrichs-Poincare"
    else:
        branch = "none"
    return StabilityReport(sigma_min=float(sigma_min), c_O=float(c_O), margin=float(margin),
                           satisfied=bool(sigma_min > 0 or margin > 0), which_branch=branch,
                           sup_shear=float(s), nu=float(flow.nu))
