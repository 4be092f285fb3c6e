"""Positional observables, linear projections and their gauge conjugates.

A linear projection E acts on wavefunctions; a generalized projection is
its conjugate N o E o N^{-1} by a norm-preserving gauge transform. A
generalized projection-valued measure assigns one generalized projection
per bin of a finite partition of the value space, all sharing one
conjugator, and inherits the probability-measure, intersection and
certainty properties from the linear side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gauge as gauge_mod
from .evolution import conjugated_evolve, evolve_linear
from .field import Grid, WaveFunction, inner, norm
from .gauge import GaugeTransform

__all__ = [
    "BorelBin",
    "LinearProjection",
    "GeneralizedProjection",
    "GeneralizedPVM",
    "p_B",
    "apply_generalized",
    "pvm_measure",
    "position_pvm",
    "momentum_pvm",
    "equivalence_table_check",
    "expectation_value",
    "position_moment",
    "momentum_expectation",
]


@dataclass(frozen=True)
class BorelBin:
    """An axis-aligned measurable region realized as a {0,1} indicator field."""

    grid: Grid
    indicator: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self) -> None:
        ind = np.asarray(self.indicator)
        if ind.shape != self.grid.shape:
            raise ValueError("indicator shape must match the grid")
        if not np.all((ind == 0) | (ind == 1)):
            raise ValueError("indicator must be a {0,1} field")
        ind = ind.astype(float)
        ind.flags.writeable = False
        object.__setattr__(self, "indicator", ind)

    @classmethod
    def box(cls, grid: Grid, lo, hi, label: str = "") -> "BorelBin":
        """Half-open box [lo, hi) per axis."""
        if np.isscalar(lo):
            lo = (float(lo),) * grid.dims
        if np.isscalar(hi):
            hi = (float(hi),) * grid.dims
        coords = grid.coordinates()
        ind = np.ones(grid.shape, dtype=bool)
        for x, a, b in zip(coords, lo, hi):
            ind &= (x >= a) & (x < b)
        return cls(grid, ind.astype(float), label or f"box{lo}:{hi}")

    @classmethod
    def half_space(cls, grid: Grid, axis: int = 0, threshold: float = 0.0,
                   label: str = "") -> "BorelBin":
        coords = grid.coordinates()
        ind = (coords[axis] >= threshold).astype(float)
        return cls(grid, ind, label or f"x{axis}>={threshold}")

    @classmethod
    def full(cls, grid: Grid) -> "BorelBin":
        return cls(grid, np.ones(grid.shape), "full")

    def complement(self) -> "BorelBin":
        return BorelBin(self.grid, 1.0 - self.indicator, f"not({self.label})")

    def union(self, other: "BorelBin") -> "BorelBin":
        return BorelBin(self.grid, np.maximum(self.indicator, other.indicator),
                        f"({self.label})|({other.label})")

    def intersect(self, other: "BorelBin") -> "BorelBin":
        return BorelBin(self.grid, self.indicator * other.indicator,
                        f"({self.label})&({other.label})")

    def is_disjoint(self, other: "BorelBin") -> bool:
        return not np.any(self.indicator * other.indicator)


def p_B(psi: WaveFunction, bin_: BorelBin) -> float:
    """Positional probability <psi|chi_B psi>/||psi||^2."""
    n2 = norm(psi) ** 2
    if n2 == 0.0:
        raise ValueError("positional probability undefined for the zero state")
    num = float(np.sum(bin_.indicator * np.abs(psi.amplitudes) ** 2) * psi.grid.cell_volume)
    return num / n2


@dataclass(frozen=True)
class LinearProjection:
    """An orthogonal projection on the discretized Hilbert space.

    kinds: ``position`` (indicator multiplication), ``spectral`` (keep a
    set of grid momentum modes), ``rank_one`` (projection onto one state).
    """

    kind: str
    grid: Grid
    bin: BorelBin | None = None
    modes: frozenset | None = None
    state: WaveFunction | None = field(default=None, repr=False)
    label: str = ""

    @classmethod
    def position(cls, bin_: BorelBin) -> "LinearProjection":
        return cls("position", bin_.grid, bin=bin_, label=bin_.label)

    @classmethod
    def spectral_subspace(cls, grid: Grid, modes, label: str = "") -> "LinearProjection":
        """Projection onto the listed FFT modes (tuples of per-axis indices)."""
        mset = frozenset(tuple(int(i) % grid.points[a] for a, i in enumerate(m if isinstance(m, tuple) else (m,)))
                         for m in modes)
        return cls("spectral", grid, modes=mset, label=label or f"modes{sorted(mset)}")

    @classmethod
    def rank_one(cls, phi: WaveFunction, label: str = "") -> "LinearProjection":
        nphi = norm(phi)
        if nphi == 0.0:
            raise ValueError("cannot project on the zero state")
        unit = phi.with_amplitudes(phi.amplitudes / nphi)
        return cls("rank_one", phi.grid, state=unit, label=label or "rank_one")

    def apply(self, psi: WaveFunction) -> WaveFunction:
        if psi.grid != self.grid:
            raise ValueError("projection and state live on different grids")
        if self.kind == "position":
            return psi.with_amplitudes(psi.amplitudes * self.bin.indicator)
        if self.kind == "spectral":
            hat = np.fft.fftn(psi.amplitudes)
            mask = np.zeros(self.grid.shape, dtype=bool)
            for m in self.modes:
                mask[m] = True
            return psi.with_amplitudes(np.fft.ifftn(np.where(mask, hat, 0.0)))
        if self.kind == "rank_one":
            c = inner(self.state, psi)
            return psi.with_amplitudes(c * self.state.amplitudes)
        raise ValueError(f"unknown projection kind {self.kind!r}")

    def intersect(self, other: "LinearProjection") -> "LinearProjection":
        """Meet of two commuting projections of the same kind."""
        if self.kind != other.kind:
            raise ValueError("can only intersect projections of the same kind")
        if self.kind == "position":
            return LinearProjection.position(self.bin.intersect(other.bin))
        if self.kind == "spectral":
            return LinearProjection("spectral", self.grid,
                                    modes=self.modes & other.modes,
                                    label=f"({self.label})&({other.label})")
        raise ValueError("rank-one projections have no canonical meet")


@dataclass(frozen=True)
class GeneralizedProjection:
    """E_hat = N o E o N^{-1} with a norm-preserving conjugator N."""

    projection: LinearProjection
    conjugator: GaugeTransform

    def __post_init__(self) -> None:
        if not self.conjugator.invertible:
            raise ValueError("conjugator must be invertible")

    def apply(self, psi: WaveFunction, t: float = 0.0) -> WaveFunction:
        return apply_generalized(self, psi, t)

    def expectation(self, psi: WaveFunction, t: float = 0.0) -> float:
        n2 = norm(psi) ** 2
        if n2 == 0.0:
            raise ValueError("expectation undefined for the zero state")
        return norm(self.apply(psi, t)) ** 2 / n2

    def negation(self) -> "GeneralizedProjection":
        """The unique complement with E_hat o (not E_hat) = 0."""
        if self.projection.kind == "position":
            comp = LinearProjection.position(self.projection.bin.complement())
        elif self.projection.kind == "spectral":
            all_modes = np.ndindex(*self.projection.grid.shape)
            comp_modes = frozenset(m for m in all_modes) - self.projection.modes
            comp = LinearProjection("spectral", self.projection.grid, modes=comp_modes,
                                    label=f"not({self.projection.label})")
        else:
            raise ValueError("negation implemented for position and spectral kinds")
        return GeneralizedProjection(comp, self.conjugator)

    def intersect(self, other: "GeneralizedProjection") -> "GeneralizedProjection":
        if self.conjugator is not other.conjugator and self.conjugator != other.conjugator:
            raise ValueError("intersection requires a shared conjugator")
        return GeneralizedProjection(self.projection.intersect(other.projection),
                                     self.conjugator)


def apply_generalized(e_hat: GeneralizedProjection, psi: WaveFunction,
                      t: float = 0.0) -> WaveFunction:
    """N[E[N^{-1}[psi]]]; idempotent."""
    n = e_hat.conjugator
    chi = gauge_mod.apply(gauge_mod.invert(n), psi, t)
    chi = e_hat.projection.apply(chi)
    return gauge_mod.apply(n, chi, t)


@dataclass(frozen=True)
class GeneralizedPVM:
    """A finite-partition projection-valued measure, conjugated by one N.

    ``projections`` maps bin labels to linear projections that form a
    partition (their images span and are mutually orthogonal: indicator
    bins tile the box, or mode sets tile the spectrum).
    """

    projections: dict
    conjugator: GaugeTransform

    def labels(self) -> list:
        return list(self.projections.keys())

    def member(self, label) -> GeneralizedProjection:
        return GeneralizedProjection(self.projections[label], self.conjugator)

    def measure(self, psi: WaveFunction, label, t: float = 0.0) -> float:
        return pvm_measure(self, psi, label, t)

    def distribution(self, psi: WaveFunction, t: float = 0.0) -> dict:
        return {lab: self.measure(psi, lab, t) for lab in self.labels()}


def pvm_measure(m: GeneralizedPVM, psi: WaveFunction, label, t: float = 0.0) -> float:
    """mu_psi(B) = ||E_hat(B) psi||^2 / ||psi||^2."""
    return m.member(label).expectation(psi, t)


def position_pvm(grid: Grid, edges: Sequence[float], axis: int = 0,
                 conjugator: GaugeTransform | None = None) -> GeneralizedPVM:
    """Partition of the box into slabs [edges[i], edges[i+1]) along ``axis``.

    The first and last slabs absorb everything below/above the edge range,
    so the family always partitions the full box.
    """
    conjugator = conjugator or gauge_mod.identity_transform()
    coords = grid.coordinates()[axis]
    projs = {}
    bounds = list(edges)
    lo_pad = float(np.min(coords)) - 1.0
    hi_pad = float(np.max(coords)) + 1.0
    bounds = [lo_pad] + bounds + [hi_pad]
    for i in range(len(bounds) - 1):
        ind = ((coords >= bounds[i]) & (coords < bounds[i + 1])).astype(float)
        label = f"[{bounds[i]:.4g},{bounds[i+1]:.4g})"
        projs[label] = LinearProjection.position(BorelBin(grid, ind, label))
    return GeneralizedPVM(projs, conjugator)


def momentum_pvm(grid: Grid, mode_groups: Sequence[Sequence], labels=None,
                 conjugator: GaugeTransform | None = None) -> GeneralizedPVM:
    """Partition of all FFT modes into the given groups (last group = rest)."""
    conjugator = conjugator or gauge_mod.identity_transform()
    labels = labels or [f"band{i}" for i in range(len(mode_groups) + 1)]
    used = set()
    projs = {}
    for i, group in enumerate(mode_groups):
        proj = LinearProjection.spectral_subspace(grid, group, label=labels[i])
        projs[labels[i]] = proj
        used |= set(proj.modes)
    rest = frozenset(tuple(m) for m in np.ndindex(*grid.shape)) - frozenset(used)
    projs[labels[len(mode_groups)]] = LinearProjection(
        "spectral", grid, modes=rest, label=labels[len(mode_groups)]
    )
    return GeneralizedPVM(projs, conjugator)


# --- expectation helpers ------------------------------------------------------


def expectation_value(psi: WaveFunction, weight: np.ndarray) -> float:
    """<psi| w |psi> / ||psi||^2 for a pointwise real weight field."""
    n2 = norm(psi) ** 2
    return float(np.sum(weight * np.abs(psi.amplitudes) ** 2) * psi.grid.cell_volume / n2)


def position_moment(psi: WaveFunction, power: int = 1, axis: int = 0) -> float:
    coords = psi.grid.coordinates()[axis]
    return expectation_value(psi, coords**power)


def momentum_expectation(psi: WaveFunction, axis: int = 0) -> float:
    """<p> on ``axis`` via the spectral representation (hbar = 1 units)."""
    hat = np.fft.fftn(psi.amplitudes)
    k = psi.grid.wavenumbers(axis, zero_nyquist=True)
    w = np.abs(hat) ** 2
    return float(np.sum(k * w) / np.sum(w))


# --- the equivalence table -----------------------------------------------------


def equivalence_table_check(psi0: WaveFunction, n: GaugeTransform,
                            projection: LinearProjection, V,
                            t_final: float, dt: float,
                            hbar: float = 1.0, mass: float = 1.0,
                            bin_: BorelBin | None = None,
                            state_stride: int = 1) -> dict:
    """Check the four equivalence rows between the two descriptions.

    Rows (each reported as max deviation over the captured times):

    * ``wave_functions``: conjugated trajectory state versus N applied to
      the linear trajectory state;
    * ``time_evolution``: flow property of the conjugated evolution,
      restarting it from an intermediate captured state;
    * ``observables``: expectation of N o E o N^{-1} on the nonlinear side
      versus that of E on the linear side;
    * ``position``: positional probabilities on both sides.
    """
    if bin_ is None:
        bin_ = BorelBin.half_space(psi0.grid)
    psi0_prime = gauge_mod.apply(n, psi0, t=0.0)
    lin = evolve_linear(psi0, V, t_final, dt, hbar, mass, state_stride=state_stride)
    nl = conjugated_evolve(psi0_prime, n, V, t_final, dt, hbar, mass,
                           state_stride=state_stride)

    rows = {"wave_functions": [], "time_evolution": [], "observables": [], "position": []}
    times = []
    e_hat = GeneralizedProjection(projection, n)

    lin_states = dict_states(lin)
    nl_states = dict_states(nl)
    common = sorted(set(lin_states) & set(nl_states))

    for t in common:
        chi_t = lin_states[t]
        psi_t = nl_states[t]
        times.append(t)
        mapped = gauge_mod.apply(n, chi_t, t=t)
        scale = norm(mapped) or 1.0
        rows["wave_functions"].append(
            norm(mapped.with_amplitudes(mapped.amplitudes - psi_t.amplitudes)) / scale
        )
        lin_exp = norm(projection.apply(chi_t)) ** 2 / norm(chi_t) ** 2
        nl_exp = e_hat.expectation(psi_t, t)
        rows["observables"].append(abs(lin_exp - nl_exp))
        rows["position"].append(abs(p_B(chi_t, bin_) - p_B(psi_t, bin_)))

    # flow property: restart the conjugated evolution halfway
    if len(common) >= 3:
        t_mid = common[len(common) // 2]
        remaining = t_final - t_mid
        if remaining > 0:
            def shifted_V(t, V=V):
                return V(t + t_mid) if callable(V) else V

            n_shift = _time_shifted(n, t_mid)
            restart = conjugated_evolve(nl_states[t_mid], n_shift,
                                        shifted_V if callable(V) else V,
                                        remaining, dt, hbar, mass,
                                        state_stride=state_stride)
            for t_rel, state in restart.states:
                t_abs = t_mid + t_rel
                match = _closest(nl_states, t_abs)
                if match is None:
                    continue
                ref = nl_states[match]
                scale = norm(ref) or 1.0
                rows["time_evolution"].append(
                    norm(ref.with_amplitudes(ref.amplitudes - state.amplitudes)) / scale
                )
    if not rows["time_evolution"]:
        rows["time_evolution"].append(0.0)

    return {
        "times": times,
        "rows": {k: v for k, v in rows.items()},
        "max_deviation": {k: (max(v) if v else 0.0) for k, v in rows.items()},
    }


def _time_shifted(n: GaugeTransform, t0: float) -> GaugeTransform:
    """The same transform with its clock moved forward by t0."""
    from dataclasses import replace

    gamma = n.gamma
    if not (callable(gamma) or hasattr(gamma, "value")):
        shifted_gamma = gamma
    else:
        from .paths import as_path

        g = as_path(gamma)
        shifted_gamma = type(g)(lambda t: g.value(t + t0), lambda t: g.dot(t + t0))
    theta = n.theta
    shifted_theta = (lambda t: theta(t + t0)) if callable(theta) else theta
    return replace(n, gamma=shifted_gamma, theta=shifted_theta)


def dict_states(traj) -> dict:
    return {round(t, 12): s for t, s in traj.states}


def _closest(states: dict, t: float, tol: float = 1e-9):
    for key in states:
        if abs(key - t) <= tol:
            return key
    return None
