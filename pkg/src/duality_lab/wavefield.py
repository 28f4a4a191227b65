"""
One-dimensional wavefunction algebra on a uniform grid.

Natural units (hbar = 1) are used throughout. Integrals are trapezoid sums,
which are spectrally accurate for the smooth, rapidly decaying integrands
that appear here. Translations are done in momentum space, so a packet is
shifted exactly as long as it stays away from the grid edges (the padding
rule below).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.integrate import trapezoid

from .errors import GridMismatch, PaddingViolation

# Boundary amplitude allowed, relative to the peak amplitude of the packet.
PADDING_TOL = 1e-12
MIN_POINTS = 256


@dataclass(frozen=True)
class Grid:
    """Uniform grid including both end points."""

    x_min: float
    x_max: float
    n_points: int = 4096

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        n = int(self.n_points)
        if n < MIN_POINTS or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= {MIN_POINTS}, got {n}")

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        x.flags.writeable = False
        return x

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order (period n_points * dx)."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k

    @classmethod
    def symmetric(cls, half_width: float, n_points: int = 4096) -> "Grid":
        return cls(-half_width, half_width, n_points)

    @classmethod
    def default_for(cls, widths: Iterable[float], centers: Iterable[float] = (0.0,),
                    a: float = 0.0) -> "Grid":
        """The fixed 4096-point grid spanning 12 * max(w, |x0| + |a|) on each side."""
        extent = max(list(widths) + [abs(c) + abs(a) for c in centers])
        return cls.symmetric(12.0 * extent, 4096)

    @classmethod
    def covering(cls, centers: Iterable[float], widths: Iterable[float],
                 resolve: Iterable[float] = (), pad: float = 8.0,
                 points_per_width: float = 10.0, max_dx: float | None = None) -> "Grid":
        """
        Smallest power-of-two grid that holds every packet and resolves every width.

        Each packet ``(center, width)`` gets ``pad`` widths of margin on both
        sides; ``resolve`` lists extra length scales (e.g. detector widths) that
        only need resolving, not padding.
        """
        centers = list(centers)
        widths = list(widths)
        if len(centers) != len(widths) or not centers:
            raise ValueError("need one width per center")
        lo = min(c - pad * w for c, w in zip(centers, widths))
        hi = max(c + pad * w for c, w in zip(centers, widths))
        dx = min(list(widths) + list(resolve)) / points_per_width
        if max_dx is not None:
            dx = min(dx, max_dx)
        needed = (hi - lo) / dx + 1
        n = max(MIN_POINTS, 1 << math.ceil(math.log2(needed)))
        return cls(lo, hi, n)


@dataclass(frozen=True)
class GaussianParams:
    """Packet exp(-(x - x0)^2 / w^2 + i k x), before normalization."""

    x0: float
    w: float
    k: float = 0.0

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("Gaussian width must be positive")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.exp(-((x - self.x0) ** 2) / self.w**2 + 1j * self.k * x)

    def shifted(self, a: float) -> "GaussianParams":
        # same modulus profile; the global phase exp(-i k a) is not tracked
        return GaussianParams(self.x0 + a, self.w, self.k)


@dataclass(frozen=True, eq=False)
class Wavepacket:
    grid: Grid
    psi: np.ndarray
    gaussian: GaussianParams | None = None

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match grid")
        psi = psi.copy()
        psi.flags.writeable = False
        object.__setattr__(self, "psi", psi)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def norm(self) -> float:
        return math.sqrt(trapezoid(np.abs(self.psi) ** 2, dx=self.grid.dx))

    def normalized(self) -> "Wavepacket":
        return Wavepacket(self.grid, self.psi / self.norm(), self.gaussian)

    def boundary_ratio(self) -> float:
        peak = np.max(np.abs(self.psi))
        if peak == 0.0:
            return 0.0
        return max(abs(self.psi[0]), abs(self.psi[-1])) / peak

    def check_padding(self) -> "Wavepacket":
        ratio = self.boundary_ratio()
        if ratio > PADDING_TOL:
            raise PaddingViolation(f"boundary amplitude {ratio:.3g} of peak exceeds {PADDING_TOL}")
        return self


def make_gaussian(params: GaussianParams, grid: Grid) -> Wavepacket:
    """Normalized Gaussian packet; raises PaddingViolation if it touches the grid edges."""
    packet = Wavepacket(grid, params(grid.x), params)
    return packet.check_padding().normalized()


def translated_gaussian(params: GaussianParams, a: float, grid: Grid) -> Wavepacket:
    """
    T_a applied to ``make_gaussian(params, grid)`` in closed form, free of the
    round-off floor a spectral shift leaves across the whole grid.
    """
    packet = make_gaussian(params.shifted(a), grid)
    return Wavepacket(grid, packet.psi * np.exp(-1j * params.k * a), packet.gaussian)


def _same_grid(p: Wavepacket, q: Wavepacket) -> Grid:
    if p.grid != q.grid:
        raise GridMismatch("wavepackets live on different grids")
    return p.grid


def integrate(values: np.ndarray, grid: Grid) -> complex:
    return trapezoid(values, dx=grid.dx)


def inner_product(psi1: Wavepacket, psi2: Wavepacket) -> complex:
    """<psi1|psi2> by trapezoid quadrature."""
    grid = _same_grid(psi1, psi2)
    return complex(integrate(np.conj(psi1.psi) * psi2.psi, grid))


def shift_array(values: np.ndarray, a: float, grid: Grid) -> np.ndarray:
    """f(x) -> f(x - a) via the momentum-space phase exp(-i k a)."""
    if a == 0.0:
        return np.array(values, dtype=complex)
    phase = np.exp(-1j * grid.wavenumbers * a)
    return np.fft.ifft(np.fft.fft(values) * phase)


def shift(psi: Wavepacket, a: float) -> Wavepacket:
    """
    Apply the translation T_a = exp(-i a p): returns psi(x - a).

    The spectral shift is periodic, so amplitude pushed past one edge would
    silently re-enter at the other; that is rejected as a padding violation.
    """
    grid = psi.grid
    peak = np.max(np.abs(psi.psi))
    if a != 0.0 and peak > 0.0:
        x = grid.x
        leaving = psi.psi[x > grid.x_max - a] if a > 0 else psi.psi[x < grid.x_min - a]
        if leaving.size and np.max(np.abs(leaving)) > PADDING_TOL * peak:
            raise PaddingViolation(f"shift by {a:.4g} carries amplitude across the grid edge")
    tag = psi.gaussian.shifted(a) if psi.gaussian is not None else None
    out = Wavepacket(psi.grid, shift_array(psi.psi, a, psi.grid), tag)
    return out.check_padding()


def expectation_T(psi: Wavepacket, a: float) -> complex:
    """<psi|T_a|psi>; its modulus never exceeds the squared norm."""
    if a == 0.0:
        return complex(psi.norm() ** 2)
    return inner_product(psi, shift(psi, a))


def position_moments(psi: Wavepacket) -> tuple[float, float]:
    """Mean and variance of x under |psi|^2 (psi need not be normalized)."""
    x = psi.grid.x
    density = np.abs(psi.psi) ** 2
    total = integrate(density, psi.grid)
    mean = integrate(x * density, psi.grid) / total
    var = integrate((x - mean) ** 2 * density, psi.grid) / total
    return float(mean), float(var)


def gaussian_overlap(p: GaussianParams, q: GaussianParams) -> complex:
    """Closed-form <p|q> for normalized Gaussian packets."""
    # normalized amplitude: (2/(pi w^2))^(1/4) exp(-(x-x0)^2/w^2 + i k x)
    A = 1.0 / p.w**2 + 1.0 / q.w**2
    B = 2.0 * p.x0 / p.w**2 + 2.0 * q.x0 / q.w**2 + 1j * (q.k - p.k)
    C = p.x0**2 / p.w**2 + q.x0**2 / q.w**2
    norm = (2.0 / (math.pi * p.w**2)) ** 0.25 * (2.0 / (math.pi * q.w**2)) ** 0.25
    return complex(norm * np.sqrt(np.pi / A) * np.exp(B**2 / (4 * A) - C))
