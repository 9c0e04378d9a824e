"""Periodic transverse grid shared by the medium and the solvers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-length/2, length/2)^d.

    Parameters
    ----------
    d : int
        Transverse dimension, 1 or 2.
    n : int
        Points per dimension; a power of two >= 8.
    length : float
        Periodic domain size per dimension.
    dz : float
        Solver step in z.
    """

    d: int
    n: int
    length: float
    dz: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise InvalidParameter(f"d must be 1 or 2, got {self.d}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise InvalidParameter(f"n must be a power of two >= 8, got {self.n}")
        if not (self.length > 0):
            raise InvalidParameter(f"length must be positive, got {self.length}")
        if not (self.dz > 0):
            raise InvalidParameter(f"dz must be positive, got {self.dz}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    def axis(self) -> np.ndarray:
        """Centered coordinates along one dimension; x=0 sits at index n//2."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    def points(self) -> np.ndarray:
        """All grid points, shape (n,)*d + (d,)."""
        axes = np.meshgrid(*([self.axis()] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def wavenumber_axis(self) -> np.ndarray:
        """FFT-ordered wavevector samples 2*pi*j/length, j in [-n/2, n/2)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def wavenumber_sq(self) -> np.ndarray:
        """|xi|^2 on the FFT-ordered grid, shape (n,)*d."""
        return _wavenumber_sq(self.d, self.n, self.length)


@lru_cache(maxsize=32)
def _wavenumber_sq(d: int, n: int, length: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    mesh = np.meshgrid(*([k] * d), indexing="ij")
    return sum(m ** 2 for m in mesh)
