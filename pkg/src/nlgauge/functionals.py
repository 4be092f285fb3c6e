"""The five density/current functionals R_1..R_5 and the kinetic expansion.

Two evaluation routes exist on purpose:

* :func:`compute_R` is the reference form, ratios of spectral derivatives
  with the hard floor ``rho_tilde = max(rho, eps * max rho)``. It is the
  diagnostic/oracle route used by tests and by :func:`kinetic_decomposition`.
* :func:`log_derivative_fields` evaluates the same functionals from
  log-density derivatives (``G = grad ln(rho + f)``, ``u = J/(rho + f)``)
  with a smooth additive floor. All divisions are pointwise-local and all
  spectral derivatives act on bounded fields, which is what the time
  integrator needs: the ratio form divides globally-coupled spectral
  residuals by the tiny floor and is violently unstable inside a stepper.

Both agree wherever the density is safely above the floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import (
    Grid,
    WaveFunction,
    hydro,
    spectral_divergence,
    spectral_gradient,
    spectral_laplacian,
)

__all__ = [
    "DensityFloor",
    "RValues",
    "compute_R",
    "kinetic_decomposition",
    "LogDerivativeFields",
    "log_derivative_fields",
]


@dataclass(frozen=True)
class DensityFloor:
    """Relative density floor; rho below ``epsilon_rel * max rho`` is cut off."""

    epsilon_rel: float = 1e-12

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon_rel < 1e-3:
            raise ValueError(f"epsilon_rel must lie in (0, 1e-3), got {self.epsilon_rel}")

    def absolute(self, rho: np.ndarray) -> float:
        m = float(rho.max())
        if m <= 0.0:
            raise ValueError("density is identically zero")
        return self.epsilon_rel * m


@dataclass(frozen=True)
class RValues:
    """Pointwise values of R_1..R_5 on a grid."""

    grid: Grid
    r1: np.ndarray = field(repr=False)
    r2: np.ndarray = field(repr=False)
    r3: np.ndarray = field(repr=False)
    r4: np.ndarray = field(repr=False)
    r5: np.ndarray = field(repr=False)


def compute_R(psi: WaveFunction, floor: DensityFloor = DensityFloor()) -> RValues:
    """Reference evaluation of the five functionals.

    R1 = div J / rho~   R2 = lap rho / rho~   R3 = J.J / rho~^2
    R4 = J.grad rho / rho~^2   R5 = grad rho . grad rho / rho~^2
    with rho~ = max(rho, eps * max rho) and all derivatives spectral.
    """
    h = hydro(psi)
    rho, J = h.rho, h.current
    rho_t = np.maximum(rho, floor.absolute(rho))
    grid = psi.grid
    div_j = np.real(spectral_divergence(J, grid))
    lap_rho = np.real(spectral_laplacian(rho, grid))
    grad_rho = tuple(np.real(g) for g in spectral_gradient(rho, grid))
    j_sq = sum(j * j for j in J)
    j_dot_grad = sum(j * g for j, g in zip(J, grad_rho))
    grad_sq = sum(g * g for g in grad_rho)
    return RValues(
        grid,
        r1=div_j / rho_t,
        r2=lap_rho / rho_t,
        r3=j_sq / rho_t**2,
        r4=j_dot_grad / rho_t**2,
        r5=grad_sq / rho_t**2,
    )


def kinetic_decomposition(
    psi: WaveFunction, floor: DensityFloor = DensityFloor()
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of lap(psi)/psi = i R1 + R2/2 - R3 - R5/4, pointwise.

    Test oracle only; meaningful where |psi| is above the floor. The left
    side divides by psi with the floored modulus to keep far-tail points
    finite.
    """
    amp = psi.amplitudes
    rho = np.abs(amp) ** 2
    f = floor.absolute(rho)
    safe = np.where(rho >= f, amp, np.where(amp == 0, np.sqrt(f), amp * np.sqrt(f / np.maximum(rho, 1e-300))))
    lhs = spectral_laplacian(amp, psi.grid) / safe
    r = compute_R(psi, floor)
    rhs = 1j * r.r1 + 0.5 * r.r2 - r.r3 - 0.25 * r.r5
    return lhs, rhs


@dataclass(frozen=True)
class LogDerivativeFields:
    """Functional fields in the form the integrator consumes.

    ``v = ln(rho + f)``, ``G = grad v``, ``u = J / (rho + f)`` and the five
    R fields assembled from them:

        R1 = div u + G.u    R2 = lap v + G.G    R3 = u.u
        R4 = u.G            R5 = G.G

    ``taper`` is exp(-(3f/rho)^2): a smooth switch that turns the nonlinear
    excess off where the density sits at or below the floor. It multiplies
    the R fields (not the log term) inside the evolution right-hand side.
    """

    grid: Grid
    r1: np.ndarray = field(repr=False)
    r2: np.ndarray = field(repr=False)
    r3: np.ndarray = field(repr=False)
    r4: np.ndarray = field(repr=False)
    r5: np.ndarray = field(repr=False)
    log_rho: np.ndarray = field(repr=False)
    u: tuple[np.ndarray, ...] = field(repr=False)
    taper: np.ndarray = field(repr=False)

    def blend(self, other: "LogDerivativeFields", w_self: float, w_other: float) -> "LogDerivativeFields":
        """Linear combination used for midpoint extrapolation of coefficients."""
        def mix(a, b):
            return w_self * a + w_other * b

        return LogDerivativeFields(
            self.grid,
            mix(self.r1, other.r1),
            mix(self.r2, other.r2),
            mix(self.r3, other.r3),
            mix(self.r4, other.r4),
            mix(self.r5, other.r5),
            mix(self.log_rho, other.log_rho),
            tuple(mix(a, b) for a, b in zip(self.u, other.u)),
            mix(self.taper, other.taper),
        )


def log_derivative_fields(
    psi: WaveFunction, floor: DensityFloor = DensityFloor()
) -> LogDerivativeFields:
    """Evaluate the integrator-form functional fields of ``psi``."""
    grid = psi.grid
    amp = psi.amplitudes
    rho = np.abs(amp) ** 2
    f = floor.absolute(rho)
    rho_t = rho + f
    v = np.log(rho_t)
    G = tuple(np.real(g) for g in spectral_gradient(v, grid))
    lap_v = np.real(spectral_laplacian(v, grid))
    grads = spectral_gradient(amp, grid)
    u = tuple(np.imag(np.conj(amp) * g) / rho_t for g in grads)
    g_sq = sum(g * g for g in G)
    div_u = np.real(spectral_divergence(u, grid))
    g_dot_u = sum(g * c for g, c in zip(G, u))
    with np.errstate(over="ignore", divide="ignore"):
        taper = np.exp(-((3.0 * f / np.maximum(rho, 1e-300)) ** 2))
    return LogDerivativeFields(
        grid,
        r1=div_u + g_dot_u,
        r2=lap_v + g_sq,
        r3=sum(c * c for c in u),
        r4=g_dot_u,
        r5=g_sq,
        log_rho=v,
        u=u,
        taper=taper,
    )
