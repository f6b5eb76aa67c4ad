"""
Spectral calculus on the periodic interval [0, 2*pi).

All fields live on a uniform grid of ``n`` nodes (``n`` even).  Scalar
fields are arrays of shape ``(n,)``; vector fields are ``(n, d)`` with the
node axis first.  Differentiation is DFT-based and therefore exact (to
round-off) for band-limited data; quadrature is the trapezoidal rule,
which is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_NODES = 8


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid with pre-computed spectral multipliers.

    Parameters
    ----------
    n : int
        Node count; must be even and at least ``MIN_NODES``.

    Attributes
    ----------
    nodes : ndarray, shape (n,)
        Sample points ``x_j = 2*pi*j/n``.
    wavenumbers : ndarray of int, shape (n,)
        Integer wavenumbers in standard DFT order
        ``0, 1, ..., n/2-1, -n/2, ..., -1``.
    dx : float
        Node spacing ``2*pi/n``.
    """

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < MIN_NODES:
            raise ValueError(
                f"grid size must be an even integer >= {MIN_NODES}, got {self.n}"
            )
        dx = 2.0 * np.pi / self.n
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "nodes", dx * np.arange(self.n))
        object.__setattr__(
            self, "wavenumbers", np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)
        )
        # rfft layout: modes 0 .. n/2, the last bin being the Nyquist mode.
        object.__setattr__(self, "_kr", np.arange(self.n // 2 + 1, dtype=float))

    def _check(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n:
            raise ValueError(
                f"field has {values.shape[0]} samples, grid has {self.n} nodes"
            )
        return values

    def derivative(self, values, order=1):
        """
        Spectral derivative of the given order.

        Mode ``k`` is multiplied by ``(i*k)**order``.  Odd orders zero the
        Nyquist mode so real input stays real; even orders keep the
        ``(i*(-n/2))**order`` multiplier.  Vector fields are differentiated
        componentwise.
        """
        if order < 1:
            raise ValueError(f"derivative order must be >= 1, got {order}")
        values = self._check(values)
        mult = (1j * self._kr) ** order
        if order % 2 == 1:
            mult[-1] = 0.0
        spec = np.fft.rfft(values, axis=0)
        mult = mult.reshape((-1,) + (1,) * (values.ndim - 1))
        return np.fft.irfft(mult * spec, self.n, axis=0)

    def quadrature(self, values, compensated=False):
        """
        Integral of a scalar field over [0, 2*pi).

        Plain running summation in node order by default (deterministic);
        ``compensated=True`` switches to exactly rounded summation.
        """
        values = self._check(values)
        if values.ndim != 1:
            raise ValueError("quadrature expects a scalar field")
        samples = values.tolist()
        if compensated:
            total = math.fsum(samples)
        else:
            total = 0.0
            for v in samples:
                total += v
        return self.dx * total

    def resample(self, values, n_new):
        """
        Spectral interpolation onto a grid with ``n_new`` nodes.

        Modes are zero-padded (refinement) or truncated (coarsening); the
        Nyquist mode is split or folded so real samples map to real
        samples.  Resampling to the same node count is the identity.
        """
        values = self._check(values)
        new_grid = Grid(n_new)
        if n_new == self.n:
            return new_grid, values.copy()
        spec = np.fft.fft(values, axis=0) / self.n
        out = np.zeros((n_new,) + values.shape[1:], dtype=complex)
        if n_new > self.n:
            half = self.n // 2
            out[:half] = spec[:half]
            out[-(half - 1):] = spec[-(half - 1):]
            # split the old Nyquist coefficient across +/- n/2
            out[half] = 0.5 * spec[half]
            out[-half] = 0.5 * spec[half]
        else:
            half = n_new // 2
            out[:half] = spec[:half]
            out[-(half - 1):] = spec[-(half - 1):]
            # +/- n_new/2 of the fine grid fold into the coarse Nyquist bin
            out[half] = spec[half] + spec[-half]
        return new_grid, np.fft.ifft(out * n_new, axis=0).real

    def dealias(self, values):
        """Zero all modes above the 2/3-rule cutoff ``n/3``."""
        values = self._check(values)
        spec = np.fft.rfft(values, axis=0)
        cutoff = self.n // 3
        spec[cutoff + 1:] = 0.0
        return np.fft.irfft(spec, self.n, axis=0)


def make_grid(n):
    """Build a periodic grid with ``n`` nodes (even, >= 8)."""
    return Grid(n)


def spectral_derivative(grid, values, order=1):
    return grid.derivative(values, order)


def quadrature(grid, values, compensated=False):
    return grid.quadrature(values, compensated=compensated)


def resample(grid, values, n_new):
    return grid.resample(values, n_new)
