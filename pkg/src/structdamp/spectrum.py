"""Truncated discrete spectra, damping regimes and the R1-R4 mode partition."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "DampingParams",
    "Regime",
    "Spectrum",
    "RegionPartition",
    "classify_regime",
    "build_spectrum",
    "torus_1d",
    "harmonic",
    "landau",
    "from_list",
    "from_file",
    "partition_modes",
    "spectral_gap",
]

DEFAULT_PARTITION_TOL = 1e-12


class Regime(str, enum.Enum):
    UNDAMPED = "Undamped"
    EFFECTIVE = "Effective"
    CRITICAL = "Critical"
    NON_EFFECTIVE = "NonEffective"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DampingParams:
    """Exponent pair for ``u_tt + L^theta u_t + L^sigma u = f(u)``.

    Construction enforces ``theta >= 0``, ``sigma > 0`` and ``theta <= sigma``.
    """

    theta: float
    sigma: float

    def __post_init__(self):
        theta, sigma = float(self.theta), float(self.sigma)
        if not (math.isfinite(theta) and math.isfinite(sigma)):
            raise DomainError(f"exponents must be finite, got theta={theta}, sigma={sigma}")
        if theta < 0:
            raise DomainError(f"theta must be >= 0, got {theta}")
        if sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {sigma}")
        if 2 * theta > 2 * sigma:
            raise DomainError(
                f"2*theta must be <= 2*sigma, got 2*theta={2 * theta} > 2*sigma={2 * sigma}"
            )
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def regime(self) -> Regime:
        return classify_regime(self)


def _is_critical(theta: float, sigma: float) -> bool:
    return theta > 0 and math.isclose(2 * theta, sigma, rel_tol=1e-12, abs_tol=0.0)


def classify_regime(params) -> Regime:
    """Return the damping regime of ``params``.

    ``params`` may be a :class:`DampingParams` or a ``(theta, sigma)`` pair;
    inadmissible pairs raise :class:`DomainError`. ``2*theta == sigma`` is
    decided with a relative tolerance of 1e-12.
    """
    if not isinstance(params, DampingParams):
        params = DampingParams(*params)
    theta, sigma = params.theta, params.sigma
    if theta == 0:
        return Regime.UNDAMPED
    if _is_critical(theta, sigma):
        return Regime.CRITICAL
    if 2 * theta < sigma:
        return Regime.EFFECTIVE
    return Regime.NON_EFFECTIVE


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Finite section of a discrete spectrum.

    Eigenvalues are distinct and strictly increasing; each carries a positive
    multiplicity. Coefficient vectors are indexed by *slots*: eigenvalue ``i``
    owns ``multiplicities[i]`` consecutive slots.
    """

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    source: str = "unspecified"
    _slots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).ravel()
        mult = np.array(self.multiplicities).ravel()
        if lam.size == 0:
            raise DomainError("spectrum must contain at least one eigenvalue")
        if lam.shape != mult.shape:
            raise DomainError("eigenvalues and multiplicities must have the same length")
        if not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite")
        if np.any(lam < 0):
            raise DomainError(f"eigenvalues must be >= 0, got min {lam.min()}")
        if np.any(np.diff(lam) <= 0):
            raise DomainError("eigenvalues must be strictly increasing (no clusters)")
        if not np.all(mult == np.round(mult)) or np.any(mult < 1):
            raise DomainError("multiplicities must be positive integers")
        mult = mult.astype(np.int64)
        lam.setflags(write=False)
        mult.setflags(write=False)
        slots = np.repeat(lam, mult)
        slots.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "multiplicities", mult)
        object.__setattr__(self, "_slots", slots)

    @property
    def size(self) -> int:
        """Total multiplicity, i.e. the length of a coefficient vector."""
        return int(self._slots.size)

    @property
    def slot_eigenvalues(self) -> np.ndarray:
        return self._slots

    def __len__(self):
        return int(self.eigenvalues.size)

    def __repr__(self):
        return f"Spectrum(n_eigenvalues={len(self)}, size={self.size}, source={self.source!r})"

    @property
    def has_zero_mode(self) -> bool:
        return bool(self.eigenvalues[0] == 0.0)

    def positive_part(self) -> "Spectrum":
        """Drop the zero eigenvalue, if present."""
        keep = self.eigenvalues > 0
        if not keep.any():
            raise DomainError("spectrum has no positive eigenvalues")
        return Spectrum(
            self.eigenvalues[keep], self.multiplicities[keep], source=f"{self.source}[lambda>0]"
        )


def torus_1d(N: int) -> Spectrum:
    """``-d^2/dx^2`` on the circle: ``{k^2 : |k| <= N}``."""
    N = _check_count(N, "N")
    k = np.arange(N + 1)
    mult = np.where(k == 0, 1, 2)
    return Spectrum(k.astype(float) ** 2, mult, source=f"torus_1d(N={N})")


def harmonic(N: int) -> Spectrum:
    """Harmonic oscillator levels ``2n + 1`` for ``0 <= n <= N``."""
    N = _check_count(N, "N")
    n = np.arange(N + 1)
    return Spectrum(2.0 * n + 1.0, np.ones(N + 1, dtype=int), source=f"harmonic(N={N})")


def landau(B: float, N: int, multiplicity: int) -> Spectrum:
    """Landau levels ``(2n + 1) B`` with a finite per-level multiplicity cap."""
    N = _check_count(N, "N")
    B = float(B)
    if not B > 0:
        raise DomainError(f"field strength B must be > 0, got {B}")
    if int(multiplicity) != multiplicity or multiplicity < 1:
        raise DomainError(f"multiplicity cap must be a positive integer, got {multiplicity}")
    n = np.arange(N + 1)
    return Spectrum(
        (2.0 * n + 1.0) * B,
        np.full(N + 1, int(multiplicity)),
        source=f"landau(B={B!r}, N={N}, multiplicity={int(multiplicity)})",
    )


def from_list(values: Sequence[float], source: str | None = None) -> Spectrum:
    """Build a spectrum from raw values; exact duplicates become multiplicities."""
    vals = [float(v) for v in values]
    if not vals:
        raise DomainError("empty eigenvalue list")
    bad = [v for v in vals if not math.isfinite(v) or v < 0]
    if bad:
        raise DomainError(f"eigenvalues must be finite and >= 0, got {bad[0]}")
    counts = sorted(Counter(vals).items())
    lam = np.array([c[0] for c in counts])
    mult = np.array([c[1] for c in counts])
    return Spectrum(lam, mult, source=source or f"from_list(n={len(vals)})")


def from_file(path) -> Spectrum:
    """Read one eigenvalue per line; ``#`` starts a comment."""
    path = Path(path)
    values = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DomainError(f"{path}:{lineno}: cannot parse eigenvalue {line!r}") from None
    return from_list(values, source=f"file:{path}")


def _check_count(N, name):
    if int(N) != N or N < 0:
        raise DomainError(f"{name} must be a nonnegative integer, got {N}")
    return int(N)


_BUILDERS = {
    "torus_1d": (torus_1d, ("N",)),
    "harmonic": (harmonic, ("N",)),
    "landau": (landau, ("B", "N", "multiplicity")),
    "from_list": (from_list, ("values",)),
    "from_file": (from_file, ("path",)),
}


def build_spectrum(mapping: Mapping) -> Spectrum:
    """Dispatch on ``mapping["kind"]``; remaining keys are builder arguments.

    >>> build_spectrum({"kind": "torus_1d", "N": 2}).eigenvalues
    array([0., 1., 4.])
    """
    fields = dict(mapping)
    kind = fields.pop("kind", None)
    if kind not in _BUILDERS:
        raise DomainError(f"unknown spectrum kind {kind!r}; expected one of {sorted(_BUILDERS)}")
    builder, keys = _BUILDERS[kind]
    missing = [k for k in keys if k not in fields]
    extra = sorted(set(fields) - set(keys))
    if missing:
        raise DomainError(f"spectrum kind {kind!r} is missing field(s) {missing}")
    if extra:
        raise DomainError(f"spectrum kind {kind!r} got unknown field(s) {extra}")
    return builder(*(fields[k] for k in keys))


@dataclass(frozen=True)
class RegionPartition:
    """Labels ``R1``..``R4`` aligned with ``spectrum.eigenvalues``."""

    eigenvalues: tuple
    labels: tuple
    regime: Regime
    threshold_tolerance: float

    @property
    def assignment(self) -> dict:
        return dict(zip(self.eigenvalues, self.labels))

    def counts(self) -> dict:
        names = ("R1", "R2") if self.regime is Regime.CRITICAL else ("R1", "R2", "R3", "R4")
        c = Counter(self.labels)
        return {name: c.get(name, 0) for name in names}


def _compare(value, bound, tol):
    if abs(value - bound) <= tol * bound:
        return 0
    return -1 if value < bound else 1


def partition_modes(
    spectrum: Spectrum, params: DampingParams, tol: float = DEFAULT_PARTITION_TOL
) -> RegionPartition:
    """Assign every eigenvalue to one of the regions R1-R4.

    R1 is the zero mode. Otherwise the regime picks the test quantity and
    boundary (``lambda^sigma`` vs 1/4 undamped, ``lambda^(sigma-2 theta)``
    vs 1/4 effective, ``lambda^(2 theta-sigma)`` vs 4 non-effective) and the
    label is R2/R3/R4 for below/equal/above. Critical damping puts every
    positive eigenvalue in R2. Equality is decided with relative tolerance
    ``tol``.
    """
    if not (0 < tol <= 1e-6):
        raise DomainError(f"partition tolerance must lie in (0, 1e-6], got {tol}")
    regime = classify_regime(params)
    theta, sigma = params.theta, params.sigma
    if regime is Regime.UNDAMPED:
        exponent, bound = sigma, 0.25
    elif regime is Regime.EFFECTIVE:
        exponent, bound = sigma - 2 * theta, 0.25
    elif regime is Regime.NON_EFFECTIVE:
        exponent, bound = 2 * theta - sigma, 4.0
    else:
        exponent, bound = None, None

    labels = []
    for lam in spectrum.eigenvalues:
        if lam == 0:
            labels.append("R1")
        elif exponent is None:
            labels.append("R2")
        else:
            side = _compare(lam**exponent, bound, tol)
            labels.append({-1: "R2", 0: "R3", 1: "R4"}[side])
    return RegionPartition(
        eigenvalues=tuple(float(x) for x in spectrum.eigenvalues),
        labels=tuple(labels),
        regime=regime,
        threshold_tolerance=tol,
    )


def spectral_gap(spectrum: Spectrum):
    """Smallest positive eigenvalue (``None`` if there is none) and the
    minimum separation between consecutive eigenvalues (``inf`` for one)."""
    lam = spectrum.eigenvalues
    if lam.size == 0:
        raise DomainError("empty spectrum")
    positive = lam[lam > 0]
    lam_min = float(positive[0]) if positive.size else None
    sep = float(np.min(np.diff(lam))) if lam.size > 1 else math.inf
    return lam_min, sep
