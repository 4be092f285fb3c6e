import numpy as np
import pytest

from nlgauge import Grid, WaveFunction, make_gaussian, norm
from nlgauge.ensembles import random_smooth_state


@pytest.fixture
def grid1d() -> Grid:
    return Grid((256,), (40.0,))


@pytest.fixture
def grid1d_fine() -> Grid:
    return Grid((512,), (40.0,))


@pytest.fixture
def grid2d() -> Grid:
    return Grid((64, 64), (20.0, 20.0))


@pytest.fixture
def gaussian(grid1d) -> WaveFunction:
    return make_gaussian(grid1d, 0.0, 1.0, 0.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


def make_nodeless(grid: Grid, rng: np.random.Generator, strength: float = 0.3) -> WaveFunction:
    """A random strictly nodeless state: Gaussian envelope times exp(small smooth field)."""
    base = make_gaussian(grid, 0.0, max(1.0, 3.5 * max(grid.spacing)), 0.0)
    bump_re = random_smooth_state(grid, rng).amplitudes.real
    bump_im = random_smooth_state(grid, rng).amplitudes.real
    scale = strength / max(np.abs(bump_re).max(), 1e-30)
    scale_i = strength / max(np.abs(bump_im).max(), 1e-30)
    amp = base.amplitudes * np.exp(scale * bump_re + 1j * scale_i * bump_im)
    psi = WaveFunction(grid, amp)
    return psi.with_amplitudes(psi.amplitudes / norm(psi))


@pytest.fixture
def nodeless_states(grid1d, rng):
    return [make_nodeless(grid1d, rng) for _ in range(10)]


def make_floor_free(grid: Grid, rng: np.random.Generator) -> WaveFunction:
    """A state bounded well away from zero everywhere (no floor activity)."""
    packet = make_gaussian(grid, 0.0, max(1.0, 3.5 * max(grid.spacing)), 0.0)
    phase = random_smooth_state(grid, rng).amplitudes.real
    phase = 0.5 * phase / max(np.abs(phase).max(), 1e-30)
    amp = (0.2 * np.abs(packet.amplitudes).max() + np.abs(packet.amplitudes)) \
        * np.exp(1j * phase)
    psi = WaveFunction(grid, amp)
    return psi.with_amplitudes(psi.amplitudes / norm(psi))
