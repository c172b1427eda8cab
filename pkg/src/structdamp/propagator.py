"""Characteristic roots and closed-form mode propagators.

Each mode obeys ``u'' + lambda^theta u' + lambda^sigma u = 0``. With
``a = lambda^theta / 2`` and discriminant ``d = a^2 - lambda^sigma`` the roots
are ``-a +/- sqrt(d)`` and the two fundamental solutions can be written as

    E1(t) = exp(-a t) S(t),          S(t) = sinh(sqrt(d) t) / sqrt(d)
    E0(t) = exp(-a t) (C(t) + a S),  C(t) = cosh(sqrt(d) t)

where ``S`` and ``C`` continue analytically to ``sin``/``cos`` for ``d < 0``
and to ``t``/``1`` at ``d = 0``. Evaluating through these kernels (with a
power-series fallback near ``d t^2 = 0``) keeps the propagators continuous
across the degenerate discriminant. When ``sqrt(d) t > 1`` the kernel form
would overflow for stiff modes, so the two real roots are used directly,
with the slow root taken from Vieta's product to avoid cancellation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spectrum import DampingParams

__all__ = [
    "Branch",
    "CharRoots",
    "char_roots",
    "eval_e0",
    "eval_e1",
    "eval_dtk_e0",
    "eval_dtk_e1",
    "propagator_pair",
    "mode_decay_rate",
    "normalized_root_bounds",
]

DEFAULT_DEGENERACY_TOL = 1e-10

# |sqrt(d) t| below this uses the series for C and S
_SERIES_CUTOFF = 1e-4


class Branch(str, enum.Enum):
    REAL_DISTINCT = "RealDistinct"
    DOUBLE = "Double"
    COMPLEX_PAIR = "ComplexPair"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CharRoots:
    branch: Branch
    re_plus: float
    re_minus: float
    im: float
    half_damping: float
    discriminant: float

    @property
    def plus(self) -> complex:
        return complex(self.re_plus, self.im)

    @property
    def minus(self) -> complex:
        return complex(self.re_minus, -self.im)


def _coefficients(lam, params):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise DomainError("eigenvalues must be finite and >= 0")
    # numpy gives 0.0**0.0 == 1.0, so theta = 0 damps the zero mode too
    damping = lam**params.theta
    stiffness = lam**params.sigma
    return lam, damping, stiffness


def char_roots(lam: float, params: DampingParams, degeneracy_tol: float = DEFAULT_DEGENERACY_TOL) -> CharRoots:
    """Roots of ``tau^2 + lam^theta tau + lam^sigma = 0`` with a branch tag.

    The discriminant counts as zero when ``|d| <= degeneracy_tol * scale``
    with ``scale = max(a^2, lam^sigma)``.
    """
    _, damping, stiffness = _coefficients(float(lam), params)
    a = 0.5 * float(damping)
    stiffness = float(stiffness)
    d = a * a - stiffness
    scale = max(a * a, stiffness)
    if abs(d) <= degeneracy_tol * scale or scale == 0.0:
        return CharRoots(Branch.DOUBLE, -a, -a, 0.0, a, d)
    if d > 0:
        g = math.sqrt(d)
        re_minus = -(a + g)
        re_plus = -stiffness / (a + g)
        return CharRoots(Branch.REAL_DISTINCT, re_plus, re_minus, 0.0, a, d)
    return CharRoots(Branch.COMPLEX_PAIR, -a, -a, math.sqrt(-d), a, d)


def _kernels(d, t):
    """Return ``(C, S)`` for discriminant ``d`` and time ``t`` (arrays)."""
    x = d * t * t
    ax = np.abs(x)
    small = ax < _SERIES_CUTOFF**2
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        r = np.sqrt(ax)
        c_pos = np.cosh(np.minimum(r, 700.0))
        s_pos = np.sinh(np.minimum(r, 700.0)) / r
        c_neg = np.cos(r)
        s_neg = np.sin(r) / r
    c = np.where(x > 0, c_pos, c_neg)
    s = np.where(x > 0, s_pos, s_neg)
    c = np.where(small, 1.0 + x / 2.0 + x * x / 24.0, c)
    s = np.where(small, 1.0 + x / 6.0 + x * x / 120.0, s)
    return c, s * t


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and >= 0")
    return t


def _dtk_e1_array(damping, stiffness, t, k):
    """k-th time derivative of E1 (k >= 0), broadcasting over all inputs."""
    a = 0.5 * damping
    d = a * a - stiffness
    a, d, stiffness, t = np.broadcast_arrays(a, d, stiffness, t)
    out = np.empty(a.shape, dtype=float)

    # real-root form for sqrt(d) t > 1: no cancellation, no overflow
    root = (d > 0) & (d * t * t > 1.0)
    if np.any(root):
        ar, dr, sr, tr = a[root], d[root], stiffness[root], t[root]
        g = np.sqrt(dr)
        tau_m = -(ar + g)
        tau_p = -sr / (ar + g)
        out[root] = (tau_p**k * np.exp(tau_p * tr) - tau_m**k * np.exp(tau_m * tr)) / (2.0 * g)

    kern = ~root
    if np.any(kern):
        ak, dk, tk = a[kern], d[kern], t[kern]
        c, s = _kernels(dk, tk)
        # divided difference of tau^k e^{tau t} expanded binomially around -a
        acc = np.zeros_like(ak)
        for j in range(k + 1):
            dj = dk ** (j // 2) * (s if j % 2 == 0 else c)
            acc = acc + math.comb(k, j) * (-ak) ** (k - j) * dj
        out[kern] = np.exp(-ak * tk) * acc
    return out


def _e0_array(damping, stiffness, t):
    a = 0.5 * damping
    d = a * a - stiffness
    a, d, stiffness, t = np.broadcast_arrays(a, d, stiffness, t)
    out = np.empty(a.shape, dtype=float)
    root = (d > 0) & (d * t * t > 1.0)
    if np.any(root):
        ar, dr, sr, tr = a[root], d[root], stiffness[root], t[root]
        g = np.sqrt(dr)
        tau_m = -(ar + g)
        tau_p = -sr / (ar + g)
        out[root] = (tau_p * np.exp(tau_m * tr) - tau_m * np.exp(tau_p * tr)) / (2.0 * g)
    kern = ~root
    if np.any(kern):
        ak, dk, tk = a[kern], d[kern], t[kern]
        c, s = _kernels(dk, tk)
        out[kern] = np.exp(-ak * tk) * (c + ak * s)
    return out


def _scalar_or_array(x, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(x)
    return x


def eval_e1(lam, params: DampingParams, t):
    """Velocity propagator ``E1(t)`` (``E1(0) = 0``, ``E1'(0) = 1``)."""
    _, damping, stiffness = _coefficients(lam, params)
    t = _check_time(t)
    return _scalar_or_array(_dtk_e1_array(damping, stiffness, t, 0), lam, t)


def eval_e0(lam, params: DampingParams, t):
    """Displacement propagator ``E0(t)`` (``E0(0) = 1``, ``E0'(0) = 0``)."""
    _, damping, stiffness = _coefficients(lam, params)
    t = _check_time(t)
    return _scalar_or_array(_e0_array(damping, stiffness, t), lam, t)


def eval_dtk_e1(lam, params: DampingParams, t, k: int):
    """``d^k/dt^k E1``; ``k = 0`` returns ``E1`` itself."""
    k = _check_order(k, minimum=0)
    _, damping, stiffness = _coefficients(lam, params)
    t = _check_time(t)
    return _scalar_or_array(_dtk_e1_array(damping, stiffness, t, k), lam, t)


def eval_dtk_e0(lam, params: DampingParams, t, k: int):
    """``d^k/dt^k E0 = -lam^sigma d^(k-1)/dt^(k-1) E1`` for ``k >= 1``."""
    k = _check_order(k, minimum=1)
    _, damping, stiffness = _coefficients(lam, params)
    t = _check_time(t)
    out = -stiffness * _dtk_e1_array(damping, stiffness, t, k - 1)
    return _scalar_or_array(out, lam, t)


def propagator_pair(lam, params: DampingParams, t, k: int = 0):
    """``(d^k E0, d^k E1)`` broadcast over ``lam`` and ``t``; ``k = 0`` gives
    the propagators themselves."""
    k = _check_order(k, minimum=0)
    _, damping, stiffness = _coefficients(lam, params)
    t = _check_time(t)
    if k == 0:
        e0 = _e0_array(damping, stiffness, t)
    else:
        e0 = -stiffness * _dtk_e1_array(damping, stiffness, t, k - 1)
    e1 = _dtk_e1_array(damping, stiffness, t, k)
    return e0, e1


def _check_order(k, minimum):
    if int(k) != k or k < minimum:
        raise DomainError(f"derivative order must be an integer >= {minimum}, got {k}")
    return int(k)


def mode_decay_rate(lam, params: DampingParams):
    """Exact asymptotic decay rate ``-max Re(tau)`` of a mode.

    Zero for the zero mode (which never decays), ``lam^theta / 2`` on the
    oscillatory and double branches, ``lam^sigma / (a + sqrt(d))`` on the
    real branch.
    """
    _, damping, stiffness = _coefficients(lam, params)
    a = 0.5 * damping
    d = a * a - stiffness
    with np.errstate(invalid="ignore", divide="ignore"):
        real_rate = stiffness / (a + np.sqrt(np.maximum(d, 0.0)))
    rate = np.where(d > 0, real_rate, a)
    rate = np.where(stiffness == 0.0, 0.0, rate)
    return _scalar_or_array(rate, lam)


def normalized_root_bounds(x):
    """Roots of ``tau^2 + 2 tau + 4x = 0`` (i.e. ``-1 +/- sqrt(1 - 4x)``)
    for ``x`` in ``[0, 1/4]``; the ``+`` root uses the cancellation-free form
    ``-4x / (1 + sqrt(1 - 4x))``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 0.25):
        raise DomainError("x must lie in [0, 1/4]")
    s = np.sqrt(1.0 - 4.0 * x)
    return -4.0 * x / (1.0 + s), -1.0 - s
