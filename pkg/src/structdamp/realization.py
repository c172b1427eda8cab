"""Grid realization of the 1-D torus eigenbasis.

Coefficient slots follow :func:`structdamp.spectrum.torus_1d`: the constant
mode first, then ``cos(kx)/sqrt(pi)`` and ``sin(kx)/sqrt(pi)`` for
``k = 1..N``. Transforms are plain matrix products (O(N M)).

Pointwise nonlinearities of degree ``p`` are evaluated on the grid and
projected back. ``M >= p N + 1`` resolves the product's band, which keeps
the aliasing error small; an exact projection onto the retained modes of an
integer power needs ``M >= (p + 1) N + 1``, since frequency ``q <= p N``
folds onto ``q - M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingError, DomainError
from .spectrum import Spectrum, torus_1d

__all__ = [
    "GridRealization",
    "torus_realization",
    "forward_transform",
    "inverse_transform",
    "apply_pointwise_nonlinearity",
]


@dataclass(frozen=True, eq=False)
class GridRealization:
    spectrum: Spectrum
    grid_points: np.ndarray
    basis: np.ndarray  # (n_slots, M)
    quadrature_weight: float
    max_frequency: int

    @property
    def M(self) -> int:
        return int(self.grid_points.size)

    def dealiasing_ok(self, p: float) -> bool:
        """``M >= p N + 1``: the band of ``u^p`` is resolved."""
        return self.M >= p * self.max_frequency + 1

    def exact_projection_ok(self, p: float) -> bool:
        """``M >= (p + 1) N + 1``: no folded frequency reaches ``|k| <= N``."""
        return self.M >= (p + 1) * self.max_frequency + 1


def torus_realization(N: int, M: int) -> GridRealization:
    """Sampled real Fourier basis of ``torus_1d(N)`` on ``M`` equispaced points."""
    spectrum = torus_1d(N)
    N, M = int(N), int(M)
    if M < 2 * N + 1:
        raise AliasingError(f"grid size M={M} < 2N+1={2 * N + 1} aliases the basis")
    x = 2.0 * np.pi * np.arange(M) / M
    rows = [np.full(M, 1.0 / math.sqrt(2.0 * math.pi))]
    for k in range(1, N + 1):
        rows.append(np.cos(k * x) / math.sqrt(math.pi))
        rows.append(np.sin(k * x) / math.sqrt(math.pi))
    basis = np.vstack(rows)
    basis.setflags(write=False)
    x.setflags(write=False)
    return GridRealization(spectrum, x, basis, 2.0 * math.pi / M, N)


def forward_transform(realization: GridRealization, grid_values) -> np.ndarray:
    """Coefficients by quadrature against each basis row.

    Accepts a single grid function (length ``M``) or a stack with the grid
    along the last axis.
    """
    values = np.asarray(grid_values, dtype=float)
    if values.shape[-1:] != (realization.M,):
        raise DomainError(
            f"grid function has trailing length {values.shape[-1:]} but the realization has M={realization.M}"
        )
    return values @ realization.basis.T * realization.quadrature_weight


def inverse_transform(realization: GridRealization, coeffs) -> np.ndarray:
    """Synthesis ``sum_xi c(xi) u_xi(x)`` at every grid point."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1:] != (realization.spectrum.size,):
        raise DomainError(
            f"coefficient vector has trailing length {coeffs.shape[-1:]} "
            f"but the realization has {realization.spectrum.size} slots"
        )
    return coeffs @ realization.basis


def apply_pointwise_nonlinearity(grid_values, p: float, mu: float) -> np.ndarray:
    """``mu |u|^(p-1) u`` evaluated pointwise."""
    if not p > 1:
        raise DomainError(f"nonlinearity exponent must be > 1, got {p}")
    u = np.asarray(grid_values, dtype=float)
    return mu * np.abs(u) ** (p - 1.0) * u
