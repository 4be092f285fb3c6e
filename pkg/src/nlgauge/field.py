"""Periodic grids, wavefunctions, hydrodynamic fields and spectral operators.

Everything downstream (functionals, gauge maps, integrators, observables)
works on the two value types defined here:

* :class:`Grid` -- a uniform periodic lattice in 1, 2 or 3 dimensions that
  owns the FFT wavenumber tables.
* :class:`WaveFunction` -- a complex field sampled on a grid.

Conventions, fixed once so every test can rely on them:

* coordinates run over ``[-L/2, L/2)`` per axis with spacing ``dx = L/n``;
* the forward DFT is unnormalized and the inverse carries ``1/prod(n)``
  (numpy's default), so Parseval reads
  ``sum |psi|^2 dV == sum |psi_hat|^2 * dV / prod(n)``;
* odd-order spectral derivatives zero the unpaired Nyquist mode on axes of
  even length (``1j*k`` is ill-defined there and injects a spurious
  imaginary component into gradients of real fields).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "WaveFunction",
    "HydroFields",
    "make_gaussian",
    "make_plane_wave",
    "hydro",
    "inner",
    "norm",
    "write_snapshot",
    "read_snapshot",
]


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice in ``dims`` dimensions.

    ``points`` and ``lengths`` are per-axis; index arithmetic wraps modulo
    ``points[i]`` on every axis. Cell volume times cell count equals the
    box volume exactly.
    """

    points: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(int(p) for p in self.points)
        lens = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lengths", lens)
        if not 1 <= len(pts) <= 3:
            raise ValueError(f"dims must be 1..3, got {len(pts)}")
        if len(lens) != len(pts):
            raise ValueError("points and lengths must have equal rank")
        if any(p < 8 for p in pts):
            raise ValueError(f"need at least 8 points per axis, got {pts}")
        if any(x <= 0 for x in lens):
            raise ValueError(f"axis lengths must be positive, got {lens}")

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        dv = 1.0
        for h in self.spacing:
            dv *= h
        return dv

    @property
    def volume(self) -> float:
        v = 1.0
        for L in self.lengths:
            v *= L
        return v

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n = self.points[axis]
        h = self.spacing[axis]
        return -0.5 * self.lengths[axis] + h * np.arange(n)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays, one per axis, each of shape ``shape``."""
        axes = [self.axis_coordinates(a) for a in range(self.dims)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self, axis: int, zero_nyquist: bool = False) -> np.ndarray:
        """Angular wavenumbers of ``axis``, broadcastable to ``shape``."""
        n = self.points[axis]
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing[axis])
        if zero_nyquist and n % 2 == 0:
            k = k.copy()
            k[n // 2] = 0.0
        form = [1] * self.dims
        form[axis] = n
        return k.reshape(form)

    def k_squared(self) -> np.ndarray:
        """|k|^2 on the full grid (Nyquist modes kept: k^2 is even-order)."""
        out = np.zeros(self.shape)
        for a in range(self.dims):
            out = out + self.wavenumbers(a) ** 2
        return out

    def grid_momentum(self, k_target: float, axis: int = 0) -> float:
        """Nearest exactly-representable plane-wave momentum on ``axis``."""
        base = 2.0 * np.pi / self.lengths[axis]
        return base * round(k_target / base)


@dataclass(frozen=True)
class WaveFunction:
    """A complex field on a :class:`Grid`; immutable after construction."""

    grid: Grid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {amp.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(amp.view(np.float64))):
            raise ValueError("amplitudes contain NaN or Inf")
        amp = amp.copy()
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "WaveFunction":
        return WaveFunction(self.grid, amplitudes)

    def norm(self) -> float:
        return norm(self)


@dataclass(frozen=True)
class HydroFields:
    """Probability density rho = |psi|^2 and current J = Im(conj(psi) grad psi)."""

    grid: Grid
    rho: np.ndarray = field(repr=False)
    current: tuple[np.ndarray, ...] = field(repr=False)


def _require_same_grid(a: WaveFunction, b: WaveFunction) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("wavefunctions live on different grids")


def spectral_gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis spectral derivatives of ``f`` (complex output).

    Zeroes the unpaired Nyquist mode per axis; exact for resolved modes.
    """
    fhat = np.fft.fftn(f)
    out = []
    for a in range(grid.dims):
        k = grid.wavenumbers(a, zero_nyquist=True)
        out.append(np.fft.ifftn(1j * k * fhat))
    return tuple(out)


def spectral_laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral Laplacian of ``f`` (complex output)."""
    return np.fft.ifftn(-grid.k_squared() * np.fft.fftn(f))


def spectral_divergence(vec: tuple[np.ndarray, ...], grid: Grid) -> np.ndarray:
    """Divergence of a vector field, one spectral derivative per axis."""
    out = np.zeros(grid.shape, dtype=np.complex128)
    for a, comp in enumerate(vec):
        k = grid.wavenumbers(a, zero_nyquist=True)
        out = out + np.fft.ifftn(1j * k * np.fft.fftn(comp))
    return out


def inner(psi1: WaveFunction, psi2: WaveFunction) -> complex:
    """Riemann-sum inner product <psi1|psi2> = sum conj(psi1) psi2 dV."""
    _require_same_grid(psi1, psi2)
    return complex(np.sum(np.conj(psi1.amplitudes) * psi2.amplitudes) * psi1.grid.cell_volume)


def norm(psi: WaveFunction) -> float:
    return float(np.sqrt(np.sum(np.abs(psi.amplitudes) ** 2) * psi.grid.cell_volume))


def make_gaussian(
    grid: Grid,
    center: tuple[float, ...] | float = 0.0,
    sigma: float = 1.0,
    momentum: tuple[float, ...] | float = 0.0,
) -> WaveFunction:
    """Normalized Gaussian packet exp(ik.x) exp(-|x-c|^2 / 4 sigma^2).

    ``sigma`` is the position-space standard deviation of the density.
    Rejects packets the grid cannot resolve (sigma < 3 max dx) and packets
    whose support leaks out of the box (center closer than 6 sigma to an
    edge).
    """
    if np.isscalar(center):
        center = (float(center),) * grid.dims
    if np.isscalar(momentum):
        momentum = (float(momentum),) * grid.dims
    if len(center) != grid.dims or len(momentum) != grid.dims:
        raise ValueError("center/momentum rank must match grid dims")
    if sigma < 3.0 * max(grid.spacing):
        raise ValueError(
            f"sigma={sigma} under-resolved: need sigma >= 3*dx = {3 * max(grid.spacing)}"
        )
    for c, L in zip(center, grid.lengths):
        if abs(c) + 6.0 * sigma > 0.5 * L:
            raise ValueError(
                f"packet at {c} with sigma={sigma} too close to the box edge (L={L})"
            )
    coords = grid.coordinates()
    r2 = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for x, c, k in zip(coords, center, momentum):
        r2 = r2 + (x - c) ** 2
        phase = phase + k * x
    amp = np.exp(1j * phase) * np.exp(-r2 / (4.0 * sigma**2))
    psi = WaveFunction(grid, amp)
    return psi.with_amplitudes(psi.amplitudes / norm(psi))


def make_plane_wave(grid: Grid, momentum: tuple[float, ...] | float) -> WaveFunction:
    """Normalized plane wave on exactly representable grid momenta."""
    if np.isscalar(momentum):
        momentum = (float(momentum),) + (0.0,) * (grid.dims - 1)
    snapped = tuple(grid.grid_momentum(k, a) for a, k in enumerate(momentum))
    coords = grid.coordinates()
    phase = np.zeros(grid.shape)
    for x, k in zip(coords, snapped):
        phase = phase + k * x
    amp = np.exp(1j * phase) / np.sqrt(grid.volume)
    return WaveFunction(grid, amp)


def hydro(psi: WaveFunction) -> HydroFields:
    """Density and probability current of ``psi`` (gradient spectral)."""
    amp = psi.amplitudes
    rho = np.abs(amp) ** 2
    grads = spectral_gradient(amp, psi.grid)
    current = tuple(np.imag(np.conj(amp) * g) for g in grads)
    return HydroFields(psi.grid, rho, current)


# --- field snapshot format -------------------------------------------------
#
# Header line: "GFLD1 d n1 [n2 n3] L1 [L2 L3]\n" in ASCII, then prod(n)
# little-endian float64 (re, im) pairs in row-major axis order. Bit-exact.

_MAGIC = "GFLD1"


def write_snapshot(psi: WaveFunction, fh) -> None:
    """Write ``psi`` to a binary file object in GFLD1 format."""
    g = psi.grid
    ns = " ".join(str(n) for n in g.points)
    ls = " ".join(repr(x) for x in g.lengths)
    fh.write(f"{_MAGIC} {g.dims} {ns} {ls}\n".encode("ascii"))
    flat = np.ascontiguousarray(psi.amplitudes, dtype=np.complex128).ravel()
    pairs = np.empty(2 * flat.size, dtype="<f8")
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    fh.write(pairs.tobytes())


def read_snapshot(fh) -> WaveFunction:
    """Read a GFLD1 snapshot written by :func:`write_snapshot`."""
    header = bytearray()
    while True:
        b = fh.read(1)
        if not b:
            raise ValueError("truncated snapshot header")
        if b == b"\n":
            break
        header.extend(b)
    parts = header.decode("ascii").split()
    if not parts or parts[0] != _MAGIC:
        raise ValueError(f"bad snapshot magic: {parts[:1]}")
    d = int(parts[1])
    ns = tuple(int(p) for p in parts[2 : 2 + d])
    ls = tuple(float(p) for p in parts[2 + d : 2 + 2 * d])
    grid = Grid(ns, ls)
    count = int(np.prod(ns))
    raw = fh.read(16 * count)
    if len(raw) != 16 * count:
        raise ValueError("truncated snapshot payload")
    pairs = np.frombuffer(raw, dtype="<f8")
    amp = (pairs[0::2] + 1j * pairs[1::2]).reshape(ns)
    return WaveFunction(grid, amp)


def snapshot_bytes(psi: WaveFunction) -> bytes:
    buf = io.BytesIO()
    write_snapshot(psi, buf)
    return buf.getvalue()
