"""Statistical mixtures and the decomposition (in)consistency demonstration.

A mixed state is a weighted list of pure states. Two decompositions of the
same density matrix evolve identically under linear flow; under genuinely
nonlinear flow their observable statistics diverge, which is the numerical
content of the no-consistent-density-matrix argument. For linearizable
flows the consistency is restored when the observables are conjugated by
the same gauge transform as the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .evolution import UnifiedParams, evolve
from .field import Grid, WaveFunction, inner, norm
from .gauge import GaugeTransform
from .observables import BorelBin, GeneralizedProjection, LinearProjection

__all__ = [
    "Ensemble",
    "ensemble_expectation",
    "equivalent_decompositions",
    "decomposition_divergence",
    "default_observable_set",
    "random_smooth_state",
    "density_matrix",
]


@dataclass(frozen=True)
class Ensemble:
    """Weighted mixture of pure states; weights positive, summing to one."""

    members: tuple

    def __post_init__(self) -> None:
        members = tuple((float(w), s) for w, s in self.members)
        if not members:
            raise ValueError("ensemble needs at least one member")
        total = sum(w for w, _ in members)
        if any(w <= 0 for w, _ in members):
            raise ValueError("weights must be positive")
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total}")
        grid = members[0][1].grid
        if any(s.grid != grid for _, s in members):
            raise ValueError("ensemble members must share one grid")
        object.__setattr__(self, "members", members)

    @property
    def grid(self) -> Grid:
        return self.members[0][1].grid


def ensemble_expectation(e: Ensemble, f: Callable[[WaveFunction], float]) -> float:
    """sum_j lambda_j f(psi_j) for any real observable functional f."""
    return float(sum(w * f(s) for w, s in e.members))


def equivalent_decompositions(phi1: WaveFunction, phi2: WaveFunction
                              ) -> tuple[Ensemble, Ensemble]:
    """The two canonical expansions of the same rank-2 density matrix.

    Requires an orthonormal pair: |<phi1|phi2>| <= 1e-10 and equal norms.
    Returns the even mixture of (phi1, phi2) and of ((phi1 +- phi2)/sqrt2).
    """
    olap = abs(inner(phi1, phi2))
    if olap > 1e-10:
        raise ValueError(f"states are not orthogonal: |<phi1|phi2>| = {olap:.3e}")
    n1, n2 = norm(phi1), norm(phi2)
    if abs(n1 - n2) > 1e-10:
        raise ValueError(f"states must have equal norms, got {n1} and {n2}")
    plus = phi1.with_amplitudes((phi1.amplitudes + phi2.amplitudes) / np.sqrt(2.0))
    minus = phi1.with_amplitudes((phi1.amplitudes - phi2.amplitudes) / np.sqrt(2.0))
    e = Ensemble(((0.5, phi1), (0.5, phi2)))
    e_prime = Ensemble(((0.5, plus), (0.5, minus)))
    return e, e_prime


def random_smooth_state(grid: Grid, rng: np.random.Generator,
                        correlation: float = 1.0) -> WaveFunction:
    """A normalized random state with spectrum damped as exp(-|k| corr)."""
    noise = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    damp = np.ones(grid.shape)
    for a in range(grid.dims):
        damp = damp * np.exp(-np.abs(grid.wavenumbers(a)) * correlation)
    amp = np.fft.ifftn(damp * np.fft.fftn(noise))
    psi = WaveFunction(grid, amp)
    return psi.with_amplitudes(psi.amplitudes / norm(psi))


def default_observable_set(grid: Grid, seed: int = 0,
                           conjugator: GaugeTransform | None = None,
                           n_bins: int = 10, n_momentum: int = 5,
                           n_rank_one: int = 5) -> list:
    """The standard divergence observable set.

    ``n_bins`` position slabs, ``n_momentum`` low-|k| spectral-subspace
    projections, and ``n_rank_one`` random rank-one projections drawn from
    a seeded PCG64 generator. With a conjugator every projection is
    evaluated through its generalized (conjugated) form.
    """
    obs: list[tuple[str, Callable[[WaveFunction], float]]] = []
    axis = 0
    lo = -0.5 * grid.lengths[axis]
    edges = np.linspace(lo, -lo, n_bins + 1)
    for i in range(n_bins):
        ind = BorelBin.box(grid, edges[i], edges[i + 1], label=f"bin{i}")
        proj = LinearProjection.position(ind)
        obs.append((f"pos_bin_{i}", _as_functional(proj, conjugator)))

    for j in range(n_momentum):
        modes = [(j,) + (0,) * (grid.dims - 1), (-j,) + (0,) * (grid.dims - 1)] \
            if j else [(0,) * grid.dims]
        proj = LinearProjection.spectral_subspace(grid, modes, label=f"mom{j}")
        obs.append((f"mom_band_{j}", _as_functional(proj, conjugator)))

    rng = np.random.default_rng(seed)
    for r in range(n_rank_one):
        phi = random_smooth_state(grid, rng)
        proj = LinearProjection.rank_one(phi, label=f"rank1_{r}")
        obs.append((f"rank_one_{r}", _as_functional(proj, conjugator)))
    return obs


def _as_functional(proj: LinearProjection,
                   conjugator: GaugeTransform | None) -> Callable[[WaveFunction], float]:
    if conjugator is None:
        def f(psi: WaveFunction, proj=proj) -> float:
            return norm(proj.apply(psi)) ** 2 / norm(psi) ** 2
        return f
    e_hat = GeneralizedProjection(proj, conjugator)

    def f(psi: WaveFunction, e_hat=e_hat) -> float:
        return e_hat.expectation(psi)

    return f


def decomposition_divergence(e: Ensemble, e_prime: Ensemble, p: UnifiedParams,
                             t_final: float, dt: float,
                             observables: Sequence | None = None,
                             state_stride: int | None = None) -> dict:
    """Evolve both decompositions and compare observable statistics.

    Returns the maximal |<f>_e - <f>_e'| over the observable set at the
    final time, plus the full per-time, per-observable table (used by the
    mixture-demo CSV output).
    """
    if observables is None:
        observables = default_observable_set(e.grid)
    trajs_e = [evolve(s, p, t_final, dt, state_stride=state_stride) for _, s in e.members]
    trajs_ep = [evolve(s, p, t_final, dt, state_stride=state_stride) for _, s in e_prime.members]

    def captured_times(trajs):
        return [t for t, _ in trajs[0].states]

    times = captured_times(trajs_e)
    rows = []
    final_div = 0.0
    for idx, t in enumerate(times):
        for label, f in observables:
            a = float(sum(w * f(traj.states[idx][1])
                          for (w, _), traj in zip(e.members, trajs_e)))
            b = float(sum(w * f(traj.states[idx][1])
                          for (w, _), traj in zip(e_prime.members, trajs_ep)))
            rows.append((t, label, a, b, abs(a - b)))
            if idx == len(times) - 1:
                final_div = max(final_div, abs(a - b))
    return {"divergence": final_div, "rows": rows, "times": times}


def density_matrix(e: Ensemble) -> np.ndarray:
    """Explicit density matrix sum_j w_j |psi_j><psi_j| dV on small grids.

    Memory scales with the square of the grid size; intended for the
    n <= 64 consistency oracle.
    """
    size = int(np.prod(e.grid.shape))
    if size > 4096:
        raise ValueError("density_matrix is a small-grid oracle (<= 4096 cells)")
    w_mat = np.zeros((size, size), dtype=np.complex128)
    dv = e.grid.cell_volume
    for w, s in e.members:
        v = s.amplitudes.ravel()
        w_mat += w * np.outer(v, np.conj(v)) * dv
    return w_mat
