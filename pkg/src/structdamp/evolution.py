"""Linear solutions, norms, the RK4 mode oracle and the Duhamel/Picard solver.

Coefficient vectors are plain ``ndarray``s whose last axis runs over the
slots of a :class:`~structdamp.spectrum.Spectrum`; a solution trace stores
one row per grid time.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .errors import DomainError, NonContractionError
from .propagator import propagator_pair
from .realization import (
    GridRealization,
    apply_pointwise_nonlinearity,
    forward_transform,
    inverse_transform,
)
from .spectrum import DampingParams, Spectrum

__all__ = [
    "TimeGrid",
    "InitialData",
    "NonlinearitySpec",
    "SolutionTrace",
    "ConvergenceReport",
    "solve_linear",
    "norm_h",
    "norm_sobolev",
    "oracle_solve_mode",
    "rk4_linear_modes",
    "duhamel_convolve",
    "solve_semilinear_picard",
    "xkbeta_norm",
    "read_trace_csv",
    "TRACE_COLUMNS",
]

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "norm_h", "norm_sobolev_beta", "norm_dt_k")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray
    uniform: bool = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise DomainError("time grid is empty")
        if not np.all(np.isfinite(pts)) or pts[0] < 0:
            raise DomainError("time grid must be finite and start at t >= 0")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise DomainError("time grid must be strictly increasing")
        uniform = bool(steps.size == 0 or np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "uniform", uniform)

    @classmethod
    def uniform_grid(cls, t_max: float, steps: int, t0: float = 0.0) -> "TimeGrid":
        """``steps`` equal intervals on ``[t0, t_max]``."""
        if steps < 1:
            raise DomainError("need at least one step")
        return cls(np.linspace(t0, t_max, int(steps) + 1))

    @classmethod
    def small_time_grid(cls, t_max: float, steps: int, n_small: int, t_min: float = 1e-3) -> "TimeGrid":
        """Log-spaced points on ``[t_min, 1]`` followed by ``steps`` uniform
        intervals on ``[1, t_max]``."""
        small = np.logspace(math.log10(t_min), 0.0, int(n_small))
        if t_max <= 1.0:
            return cls(small[small <= t_max])
        large = np.linspace(1.0, t_max, int(steps) + 1)[1:]
        return cls(np.concatenate([small, large]))

    @property
    def step(self) -> float:
        if not self.uniform or self.points.size < 2:
            raise DomainError("step size is only defined for uniform grids with >= 2 points")
        return float(self.points[1] - self.points[0])

    def __len__(self):
        return int(self.points.size)


@dataclass(frozen=True, eq=False)
class InitialData:
    u0_hat: np.ndarray
    u1_hat: np.ndarray
    spectrum: Spectrum

    def __post_init__(self):
        for name in ("u0_hat", "u1_hat"):
            v = np.array(getattr(self, name))
            if v.dtype.kind not in "fc":
                v = v.astype(float)
            if v.shape != (self.spectrum.size,):
                raise DomainError(
                    f"{name} has shape {v.shape}, expected ({self.spectrum.size},) for {self.spectrum!r}"
                )
            if not np.all(np.isfinite(v)):
                raise DomainError(f"{name} contains non-finite entries")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def scaled(self, factor: float) -> "InitialData":
        return InitialData(self.u0_hat * factor, self.u1_hat * factor, self.spectrum)


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "none"  # none | pointwise_power | modewise_power
    p: float = 3.0
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "pointwise_power", "modewise_power"):
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind != "none" and not self.p > 1:
            raise DomainError(f"nonlinearity exponent must be > 1, got {self.p}")


def norm_h(coeffs) -> np.ndarray:
    """l2 norm over the last axis (the H norm by Plancherel)."""
    c = np.asarray(coeffs)
    out = np.sqrt(np.sum(np.abs(c) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def norm_sobolev(coeffs, spectrum: Spectrum, s: float) -> np.ndarray:
    """``(sum lambda^s |c|^2)^(1/2)``; ``s = 0`` reduces to :func:`norm_h`."""
    if s < 0:
        raise DomainError(f"Sobolev order must be >= 0, got {s}")
    c = np.asarray(coeffs)
    if c.shape[-1:] != (spectrum.size,):
        raise DomainError("coefficients do not index the given spectrum")
    if s == 0:
        return norm_h(c)
    w = spectrum.slot_eigenvalues**s
    out = np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Coefficients and norms of a solution on a time grid.

    ``norm_sobolev_beta`` holds ``||L^beta u||_H`` and ``norm_dt_k`` holds
    ``||d^k u / dt^k||_H``.
    """

    times: TimeGrid
    coefficients: np.ndarray
    dt_coefficients: np.ndarray
    spectrum: Spectrum
    params: DampingParams
    beta: float
    k: int
    norm_h: np.ndarray
    norm_sobolev_beta: np.ndarray
    norm_dt_k: np.ndarray
    data: Optional[InitialData] = None

    @classmethod
    def from_coefficients(cls, times, coefficients, dt_coefficients, spectrum, params, beta, k, data=None):
        return cls(
            times=times,
            coefficients=coefficients,
            dt_coefficients=dt_coefficients,
            spectrum=spectrum,
            params=params,
            beta=float(beta),
            k=int(k),
            norm_h=norm_h(coefficients),
            norm_sobolev_beta=norm_sobolev(coefficients, spectrum, 2.0 * beta),
            norm_dt_k=norm_h(dt_coefficients),
            data=data,
        )

    @property
    def t(self) -> np.ndarray:
        return self.times.points

    def column(self, name: str) -> np.ndarray:
        if name == "t":
            return self.t
        if name not in TRACE_COLUMNS:
            raise DomainError(f"unknown trace column {name!r}")
        return getattr(self, name)

    def to_csv(self, path) -> None:
        write_trace_csv(path, self.t, self.norm_h, self.norm_sobolev_beta, self.norm_dt_k)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(path, t, nh, ns, nd) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(t, nh, ns, nd):
            w.writerow([_fmt(v) for v in row])


def read_trace_csv(path) -> dict:
    """Read a trace CSV into ``{column: ndarray}``; the ``t`` column and the
    three norm columns must all be present."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise DomainError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DomainError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DomainError(f"{path}:{lineno}: non-numeric field") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _check_data(spectrum: Spectrum, data: InitialData):
    if data.spectrum is not spectrum:
        same = (
            len(data.spectrum) == len(spectrum)
            and np.array_equal(data.spectrum.eigenvalues, spectrum.eigenvalues)
            and np.array_equal(data.spectrum.multiplicities, spectrum.multiplicities)
        )
        if not same:
            raise DomainError("initial data index a different spectrum than the one supplied")


def _linear_coefficients(spectrum, params, data, t, order):
    lam = spectrum.slot_eigenvalues
    e0, e1 = propagator_pair(lam[None, :], params, t[:, None], order)
    return e0 * data.u0_hat[None, :] + e1 * data.u1_hat[None, :]


def solve_linear(
    spectrum: Spectrum,
    params: DampingParams,
    data: InitialData,
    grid: TimeGrid,
    beta: float = 1.0,
    k: int = 1,
) -> SolutionTrace:
    """Superpose ``E0 u0 + E1 u1`` mode by mode on every grid time."""
    _check_data(spectrum, data)
    if beta < 0 or int(k) != k or k < 0:
        raise DomainError("need beta >= 0 and an integer k >= 0")
    t = grid.points
    u = _linear_coefficients(spectrum, params, data, t, 0)
    du = _linear_coefficients(spectrum, params, data, t, int(k)) if k else u
    return SolutionTrace.from_coefficients(grid, u, du, spectrum, params, beta, k, data)


def rk4_linear_modes(damping, stiffness, u0, u1, grid: TimeGrid, dt: float, forcing=None) -> np.ndarray:
    """Classical fixed-step RK4 for ``y'' + damping y' + stiffness y = f``.

    All of ``damping``, ``stiffness``, ``u0``, ``u1`` broadcast to one batch
    shape; ``forcing`` (optional) has shape ``(len(grid),) + batch`` and is
    linearly interpolated between grid samples. Each grid interval is split
    into equal substeps no longer than ``dt``. Returns ``y`` at the grid
    points, shape ``(len(grid),) + batch``.
    """
    damping, stiffness, y, v = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (damping, stiffness, u0, u1))
    )
    y, v = y.copy(), v.copy()
    pts = grid.points
    if forcing is not None:
        forcing = np.broadcast_to(np.asarray(forcing, dtype=float), (pts.size,) + y.shape)
        if pts[0] != 0.0:
            raise DomainError("forced oracle runs need a grid starting at t = 0")
    limit = 0.1 / np.max(np.maximum(1.0, np.maximum(damping, np.sqrt(stiffness))))
    spacing = np.min(np.diff(pts)) if pts.size > 1 else np.inf
    spacing = min(spacing, pts[0]) if pts[0] > 0 else spacing
    if dt > limit or dt > spacing:
        raise DomainError(
            f"RK4 step dt={dt:g} violates the stability guard; use dt <= {min(limit, spacing):g}"
        )

    def rhs(yy, vv, f):
        acc = -damping * vv - stiffness * yy
        if f is not None:
            acc = acc + f
        return vv, acc

    out = np.empty((pts.size,) + y.shape)
    knots = np.concatenate([[0.0], pts]) if pts[0] > 0 else pts
    offset = 1 if pts[0] > 0 else 0
    if offset == 0:
        out[0] = y
    for i in range(knots.size - 1):
        span = knots[i + 1] - knots[i]
        n_sub = max(1, math.ceil(span / dt - 1e-9))
        h = span / n_sub
        if forcing is not None:
            f_lo, f_hi = forcing[i], forcing[i + 1]
            slope = (f_hi - f_lo) / span
        for j in range(n_sub):
            if forcing is not None:
                s = j * h
                fa, fb, fc = f_lo + slope * s, f_lo + slope * (s + 0.5 * h), f_lo + slope * (s + h)
            else:
                fa = fb = fc = None
            k1y, k1v = rhs(y, v, fa)
            k2y, k2v = rhs(y + 0.5 * h * k1y, v + 0.5 * h * k1v, fb)
            k3y, k3v = rhs(y + 0.5 * h * k2y, v + 0.5 * h * k2v, fb)
            k4y, k4v = rhs(y + h * k3y, v + h * k3v, fc)
            y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        out[i + 1 - offset] = y
    return out


def oracle_solve_mode(
    lam, params: DampingParams, u0_hat, u1_hat, grid: TimeGrid, dt: float, forcing=None
) -> np.ndarray:
    """Independent RK4 solution of one mode ODE (``lam`` may be an array of
    modes solved together)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("eigenvalues must be >= 0")
    return rk4_linear_modes(lam**params.theta, lam**params.sigma, u0_hat, u1_hat, grid, dt, forcing)


def duhamel_convolve(
    spectrum: Spectrum, params: DampingParams, forcing_coeffs, grid: TimeGrid, order: int = 0
) -> np.ndarray:
    """Trapezoidal ``int_0^t d^order/dt^order E1(t - s) f(s) ds`` per mode.

    ``forcing_coeffs`` has shape ``(len(grid), spectrum.size)``. ``order``
    may be 0, 1 or 2; for 2 the boundary term ``f(t)`` from differentiating
    under the integral is added.
    """
    if not grid.uniform:
        raise DomainError("Duhamel convolution needs a uniform time grid")
    if order not in (0, 1, 2):
        raise DomainError(f"Duhamel derivative order must be 0, 1 or 2, got {order}")
    F = np.asarray(forcing_coeffs)
    n = len(grid)
    if F.shape != (n, spectrum.size):
        raise DomainError(f"forcing has shape {F.shape}, expected {(n, spectrum.size)}")
    if n == 1:
        return np.zeros_like(F, dtype=float)
    h = grid.step
    lags = grid.points - grid.points[0]
    _, K = propagator_pair(spectrum.slot_eigenvalues[None, :], params, lags[:, None], order)
    full = fftconvolve(K, F, axes=0)[:n]
    out = h * (full - 0.5 * K * F[0][None, :] - 0.5 * K[0][None, :] * F)
    out[0] = 0.0
    if order == 2:
        out = out + F
    return out


@dataclass
class ConvergenceReport:
    iterations: int
    differences: list
    contraction_factor: float
    converged: bool
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "differences": [float(d) for d in self.differences],
            "contraction_factor": float(self.contraction_factor),
            "converged": bool(self.converged),
            "message": self.message,
        }


def _contraction_factor(diffs):
    ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0 and math.isfinite(b)]
    return max(ratios) if ratios else 0.0


def _nonlinear_term(U, nonlinearity, realization):
    p, mu = nonlinearity.p, nonlinearity.mu
    if nonlinearity.kind == "modewise_power":
        return mu * np.abs(U) ** (p - 1.0) * U
    values = inverse_transform(realization, U)
    return forward_transform(realization, apply_pointwise_nonlinearity(values, p, mu))


def solve_semilinear_picard(
    realization: Optional[GridRealization],
    params: DampingParams,
    data: InitialData,
    nonlinearity: NonlinearitySpec,
    grid: TimeGrid,
    tol: float = 1e-12,
    max_iter: int = 50,
    beta: float = 1.0,
    k: int = 1,
):
    """Fixed-point iteration ``u <- u_lin + Duhamel(f(u))`` on whole traces.

    Stops once ``max_t ||u^{n+1}(t) - u^n(t)||_H <= tol`` and returns
    ``(trace, report)``. Raises :class:`NonContractionError` (with the report
    attached) when the differences blow up, stop decreasing for three
    iterations in a row, or ``max_iter`` runs out.
    """
    spectrum = data.spectrum
    if nonlinearity.kind == "none":
        trace = solve_linear(spectrum, params, data, grid, beta, k)
        return trace, ConvergenceReport(1, [0.0], 0.0, True, "linear problem")
    if not grid.uniform:
        raise DomainError("Picard iteration needs a uniform time grid")
    if int(k) != k or not 0 <= k <= 2:
        raise DomainError(f"semilinear traces support derivative orders 0..2, got {k}")
    if nonlinearity.kind == "pointwise_power":
        if realization is None:
            raise DomainError("pointwise_power nonlinearity needs a grid realization")
        _check_data(realization.spectrum, data)
        if not realization.dealiasing_ok(nonlinearity.p):
            log.warning(
                "grid size M=%d < p*N+1=%g: nonlinear products alias onto retained modes",
                realization.M, nonlinearity.p * realization.max_frequency + 1,
            )

    t = grid.points
    u_lin = _linear_coefficients(spectrum, params, data, t, 0)
    U = u_lin
    diffs = []
    converged = False
    message = ""
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            F = _nonlinear_term(U, nonlinearity, realization)
            U_new = u_lin + duhamel_convolve(spectrum, params, F, grid)
            diff = float(np.max(norm_h(U_new - U)))
            diffs.append(diff)
            U = U_new
            if not math.isfinite(diff):
                message = "iterates overflowed"
                break
            if diff <= tol:
                converged = True
                message = "converged"
                break
            if len(diffs) >= 4 and all(b >= a for a, b in zip(diffs[-4:], diffs[-3:])):
                message = "successive differences stopped decreasing"
                break
        else:
            message = f"no convergence within {max_iter} iterations"

    report = ConvergenceReport(len(diffs), diffs, _contraction_factor(diffs), converged, message)
    if not converged:
        raise NonContractionError(f"Picard iteration did not contract: {message}", report)

    F = _nonlinear_term(U, nonlinearity, realization)
    if k:
        dU = _linear_coefficients(spectrum, params, data, t, int(k)) + duhamel_convolve(
            spectrum, params, F, grid, order=int(k)
        )
    else:
        dU = U
    trace = SolutionTrace.from_coefficients(grid, U, dU, spectrum, params, beta, k, data)
    return trace, report


def xkbeta_norm(trace: SolutionTrace, delta: float, beta: Optional[float] = None, k: Optional[int] = None) -> float:
    """``sup_t e^(delta t) (||u|| + ||L^beta u|| + ||d^k u||)`` over the grid."""
    if delta <= 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    if beta is not None and not math.isclose(beta, trace.beta):
        raise DomainError(f"trace carries beta={trace.beta}, not {beta}")
    if k is not None and k != trace.k:
        raise DomainError(f"trace carries k={trace.k}, not {k}")
    total = trace.norm_h + trace.norm_sobolev_beta + trace.norm_dt_k
    return float(np.max(np.exp(delta * trace.t) * total))
