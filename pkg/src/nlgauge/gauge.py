"""The nonlinear gauge group.

A strictly local transformation acts pointwise as

    N[psi] = kappa |psi|^delta exp{ i (gamma ln|psi| + Lambda arg psi + theta) }

with delta = 1 and Lambda = +-1 on the invertible family. Because Lambda
is restricted to +-1, no phase unwrapping is ever needed: Lambda = +1 uses
psi itself and Lambda = -1 its complex conjugate. The pure gauge map
N_gamma (kappa = 1, theta = 0, Lambda = +1) multiplies psi by
exp(i gamma ln|psi|) and leaves |psi| untouched pointwise.

``delta != 1`` and |Lambda| >= 2 are accepted only with ``formal=True``;
they are not invertible on all of L^2 and are excluded from every shipped
scenario.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .field import WaveFunction
from .functionals import DensityFloor
from .paths import ScalarPath, as_path, coef_value, is_constant

__all__ = [
    "CauchyPower",
    "GaugeTransform",
    "c_prime",
    "pure_gauge",
    "local_unitary",
    "identity_transform",
    "apply",
    "invert",
    "compose",
    "apply_local_unitary",
    "pushforward_params",
]


@dataclass(frozen=True)
class CauchyPower:
    """Parameters of the continuous solution of Cauchy's power equation."""

    delta: float = 1.0
    gamma: float = 0.0
    lam: int = 1

    def __post_init__(self) -> None:
        if int(self.lam) != self.lam:
            raise ValueError("lam must be an integer")


def c_prime(p: CauchyPower, c: complex) -> complex:
    """|c|^(delta + i gamma) * exp(i lam arg c); rejects c = 0."""
    c = complex(c)
    if c == 0:
        raise ValueError("c_prime undefined at c = 0")
    return abs(c) ** complex(p.delta, p.gamma) * np.exp(1j * p.lam * np.angle(c))


@dataclass(frozen=True)
class GaugeTransform:
    """A strictly local gauge transformation N_(delta, gamma, Lambda; kappa, theta).

    ``gamma`` may be a float or a :class:`ScalarPath`; ``theta`` may be a
    field, a scalar, or a callable t -> field. ``kappa`` must be positive
    and bounded; ``kappa is None`` means kappa == 1 identically.
    """

    delta: float = 1.0
    gamma: "float | ScalarPath" = 0.0
    lam: int = 1
    kappa: "np.ndarray | float | None" = None
    theta: "np.ndarray | float | Callable | None" = None
    floor: DensityFloor = DensityFloor()
    formal: bool = False

    def __post_init__(self) -> None:
        if self.lam not in (+1, -1) and not self.formal:
            raise ValueError("Lambda must be +-1 unless formal=True")
        if self.delta != 1.0 and not self.formal:
            raise ValueError("delta != 1 is not invertible on L2; pass formal=True")
        if self.kappa is not None:
            kap = np.asarray(self.kappa, dtype=float)
            if np.any(kap <= 0.0) or not np.all(np.isfinite(kap)):
                raise ValueError("kappa must be positive and bounded")
            object.__setattr__(self, "kappa", kap)

    @property
    def norm_preserving(self) -> bool:
        if self.delta != 1.0:
            return False
        return self.kappa is None or bool(np.all(np.asarray(self.kappa) == 1.0))

    @property
    def invertible(self) -> bool:
        return self.delta == 1.0 and self.lam in (+1, -1)

    def gamma_at(self, t: float) -> float:
        return coef_value(self.gamma, t)

    def gamma_dot_at(self, t: float) -> float:
        return as_path(self.gamma).dot(t)

    def theta_at(self, t: float):
        th = self.theta
        if th is None:
            return None
        if callable(th):
            return np.asarray(th(t), dtype=float)
        return th


def pure_gauge(gamma, floor: DensityFloor = DensityFloor()) -> GaugeTransform:
    """The pure gauge map N_gamma."""
    return GaugeTransform(gamma=gamma, floor=floor)


def local_unitary(theta, floor: DensityFloor = DensityFloor()) -> GaugeTransform:
    """U_theta as a member of the gauge group."""
    return GaugeTransform(theta=theta, floor=floor)


def identity_transform() -> GaugeTransform:
    return GaugeTransform()


def apply(n: GaugeTransform, psi: WaveFunction, t: float = 0.0) -> WaveFunction:
    """Apply ``n`` to ``psi`` at time ``t`` (for time-dependent gamma/theta).

    ln|psi| uses the floored modulus: points whose density falls below the
    floor pick up the phase of the floored value instead of diverging.
    """
    amp = psi.amplitudes
    rho = np.abs(amp) ** 2
    if rho.max() == 0.0:
        return psi  # N[0] = 0 for every pointwise transform
    rho_t = np.maximum(rho, n.floor.absolute(rho))
    log_mod = 0.5 * np.log(rho_t)

    phase = n.gamma_at(t) * log_mod
    theta = n.theta_at(t)
    if theta is not None:
        phase = phase + theta

    if n.lam == 1:
        base = amp
    elif n.lam == -1:
        base = np.conj(amp)
    else:  # formal mode: principal-value argument
        base = np.abs(amp) * np.exp(1j * n.lam * np.angle(amp))

    out = base * np.exp(1j * phase)
    if n.delta != 1.0:
        out = out * np.exp((n.delta - 1.0) * log_mod)
    if n.kappa is not None:
        out = out * n.kappa
    return psi.with_amplitudes(out)


def _gamma_combine(d2: float, g1, lam1: int, g2):
    """gamma of a composition: g1 * d2 + lam1 * g2, kept constant if possible."""
    if is_constant(g1) and is_constant(g2):
        return d2 * float(g1) + lam1 * float(g2)
    p1, p2 = as_path(g1), as_path(g2)
    return ScalarPath(
        lambda t: d2 * p1.value(t) + lam1 * p2.value(t),
        lambda t: d2 * p1.dot(t) + lam1 * p2.dot(t),
    )


def invert(n: GaugeTransform) -> GaugeTransform:
    """Group inverse; defined on the invertible family (delta=1, Lambda=+-1).

    N^{-1} has kappa' = 1/kappa, Lambda' = Lambda, gamma' = -Lambda gamma,
    theta' = -Lambda theta + Lambda gamma ln kappa.
    """
    if not n.invertible:
        raise ValueError("transform is not invertible (needs delta=1, Lambda=+-1)")
    lam = n.lam
    gamma_inv = _gamma_combine(0.0, 0.0, -lam, n.gamma)
    kappa_inv = None if n.kappa is None else 1.0 / np.asarray(n.kappa)

    th, g = n.theta, n.gamma
    if n.kappa is None:
        if th is None:
            theta_inv = None
        elif callable(th):
            theta_inv = lambda t: -lam * np.asarray(th(t))
        else:
            theta_inv = -lam * np.asarray(th, dtype=float)
    else:
        log_k = np.log(np.asarray(n.kappa))
        if th is None and is_constant(g):
            theta_inv = lam * float(g) * log_k
        else:
            def theta_inv(t):
                base = lam * coef_value(g, t) * log_k
                if th is None:
                    return base
                tv = np.asarray(th(t)) if callable(th) else th
                return base - lam * tv

    return GaugeTransform(
        delta=1.0, gamma=gamma_inv, lam=lam, kappa=kappa_inv, theta=theta_inv,
        floor=n.floor, formal=n.formal,
    )


def compose(n1: GaugeTransform, n2: GaugeTransform) -> GaugeTransform:
    """Closed-form parameters of n1 after n2: compose(n1, n2)[psi] = n1[n2[psi]].

    delta = d1 d2, Lambda = L1 L2, gamma = g1 d2 + L1 g2,
    kappa = k1 k2^d1, theta = th1 + L1 th2 + g1 ln k2.
    For pure gauges with Lambda = +1 the gammas simply add.
    """
    gamma = _gamma_combine(n2.delta, n1.gamma, n1.lam, n2.gamma)

    if n2.kappa is None:
        kappa = n1.kappa
    else:
        k2 = np.asarray(n2.kappa) ** n1.delta
        kappa = k2 if n1.kappa is None else np.asarray(n1.kappa) * k2

    th1, th2, lam1 = n1.theta, n2.theta, n1.lam
    log_k2 = None if n2.kappa is None else np.log(np.asarray(n2.kappa))
    time_dep = callable(th1) or callable(th2) or (
        log_k2 is not None and not is_constant(n1.gamma)
    )

    def theta_value(t):
        parts = []
        if th1 is not None:
            parts.append(np.asarray(th1(t)) if callable(th1) else th1)
        if th2 is not None:
            v = np.asarray(th2(t)) if callable(th2) else th2
            parts.append(lam1 * v)
        if log_k2 is not None:
            parts.append(coef_value(n1.gamma, t) * log_k2)
        if not parts:
            return None
        total = parts[0]
        for p in parts[1:]:
            total = total + p
        return total

    theta = theta_value if time_dep else theta_value(0.0)
    floor = n1.floor if n1.floor.epsilon_rel <= n2.floor.epsilon_rel else n2.floor
    return GaugeTransform(
        delta=n1.delta * n2.delta, gamma=gamma, lam=n1.lam * n2.lam, kappa=kappa,
        theta=theta, floor=floor, formal=n1.formal or n2.formal,
    )


def apply_local_unitary(theta, psi: WaveFunction, t: float = 0.0) -> WaveFunction:
    """Multiply by exp(i theta(x[, t])); norm preserved exactly."""
    th = np.asarray(theta(t)) if callable(theta) else theta
    return psi.with_amplitudes(psi.amplitudes * np.exp(1j * th))


def pushforward_params(p, gamma, gamma_dot=None):
    """Coefficients p' such that N_gamma maps solutions of p to solutions of p'.

    With rho' = rho and J' = J + (gamma/2) grad rho the functionals mix
    linearly (R1' = R1 + (gamma/2) R2, R3' = R3 + gamma R4 + (gamma^2/4) R5,
    R4' = R4 + (gamma/2) R5), and the chain rule on exp(i gamma ln|psi|)
    contributes -(gamma_dot/2) ln rho - gamma (nu1 R1 + nu2 R2). Solving
    for the primed coefficients:

        nu2'   = nu2 - (gamma/2) nu1
        mu1'   = mu1 - gamma nu1
        mu2'   = mu2 - (gamma/2) mu1 + (gamma^2/2) nu1 - gamma nu2
        mu4'   = mu4 - gamma mu3
        mu5'   = mu5 - (gamma/2) mu4 + (gamma^2/4) mu3
        alpha1' = alpha1 - gamma_dot/2

    nu1, mu3, mu0, V and A are untouched. The map composes additively in
    gamma: pushforward(g1) after pushforward(g2) equals pushforward(g1+g2).
    gamma may be a float (with gamma_dot, default 0) or a ScalarPath, in
    which case the returned coefficients are time functions.
    """
    if isinstance(gamma, ScalarPath) or callable(gamma):
        g = as_path(gamma) if gamma_dot is None else ScalarPath(gamma, gamma_dot)
        constant = False
    else:
        g = ScalarPath(float(gamma), 0.0 if gamma_dot is None else float(gamma_dot))
        constant = True

    def combo(base_makers):
        """Build one primed coefficient from {coef: weight(gv)} plus base term."""

        def value_at(t):
            gv = g.value(t)
            total = 0.0
            for coef, weight in base_makers(gv):
                total += weight * coef_value(coef, t)
            return total

        if constant and all(is_constant(c) for c, _ in base_makers(g.value(0.0))):
            return value_at(0.0)
        return value_at

    nu2 = combo(lambda gv: [(p.nu2, 1.0), (p.nu1, -gv / 2.0)])
    mu1 = combo(lambda gv: [(p.mu1, 1.0), (p.nu1, -gv)])
    mu2 = combo(
        lambda gv: [(p.mu2, 1.0), (p.mu1, -gv / 2.0), (p.nu1, gv**2 / 2.0), (p.nu2, -gv)]
    )
    mu4 = combo(lambda gv: [(p.mu4, 1.0), (p.mu3, -gv)])
    mu5 = combo(lambda gv: [(p.mu5, 1.0), (p.mu4, -gv / 2.0), (p.mu3, gv**2 / 4.0)])

    if constant and is_constant(p.alpha1):
        alpha1 = float(p.alpha1) - g.dot(0.0) / 2.0
    else:
        alpha1 = lambda t: coef_value(p.alpha1, t) - g.dot(t) / 2.0

    return dataclasses.replace(
        p, nu2=nu2, mu1=mu1, mu2=mu2, mu4=mu4, mu5=mu5, alpha1=alpha1
    )
