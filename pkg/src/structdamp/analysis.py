"""Decay-rate fitting, predicted exponents and empirical bound checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .evolution import SolutionTrace, norm_sobolev
from .propagator import mode_decay_rate
from .spectrum import DampingParams, Regime, Spectrum, classify_regime

__all__ = [
    "DecayFit",
    "RatePrediction",
    "BoundRow",
    "BoundReport",
    "fit_exponential_rate",
    "fit_polynomial_rate",
    "spectral_abscissa",
    "envelope_constant",
    "theoretical_rates",
    "strictly_positive_rates",
    "sobolev_data_orders",
    "verify_bound",
]

MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class DecayFit:
    model: str  # "exponential" or "polynomial"
    rate: float
    amplitude: float
    rsquared: float
    window: tuple
    n_points: int


def _window_mask(t, window):
    lo, hi = window
    if lo >= hi:
        raise DomainError(f"empty fit window {window}")
    if lo < t[0] - 1e-12 * max(1.0, abs(t[0])) or hi > t[-1] + 1e-12 * max(1.0, abs(t[-1])):
        raise DomainError(f"window {window} lies outside the data range [{t[0]}, {t[-1]}]")
    return (t >= lo - 1e-12 * max(1.0, abs(lo))) & (t <= hi + 1e-12 * max(1.0, abs(hi)))


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


def _prepare(t, values, window):
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise DomainError("times and values must be 1-D arrays of equal length")
    if window is None:
        window = (float(t[0]), float(t[-1]))
    mask = _window_mask(t, window)
    t, v = t[mask], v[mask]
    if t.size < MIN_FIT_POINTS:
        raise DomainError(f"need >= {MIN_FIT_POINTS} points in the window, got {t.size}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError(
            "values must be finite and > 0 in the fit window (zero or negative samples mean "
            "no decay or a sign change; fit a norm and exclude exact zeros)"
        )
    return t, v, (float(window[0]), float(window[1]))


def _peaks(t, logv):
    """Local maxima of ``logv`` refined by a parabola through each triple."""
    tp, vp = [], []
    for i in range(1, t.size - 1):
        if logv[i] >= logv[i - 1] and logv[i] > logv[i + 1]:
            t0, t1, t2 = t[i - 1], t[i], t[i + 1]
            y0, y1, y2 = logv[i - 1], logv[i], logv[i + 1]
            denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
            A = (t2 * (y1 - y0) + t1 * (y0 - y2) + t0 * (y2 - y1)) / denom
            B = (t2 * t2 * (y0 - y1) + t1 * t1 * (y2 - y0) + t0 * t0 * (y1 - y2)) / denom
            if A < 0:
                tv = -B / (2 * A)
                yv = y1 + A * (tv - t1) ** 2 + (2 * A * t1 + B) * (tv - t1)
                if t0 <= tv <= t2:
                    tp.append(tv)
                    vp.append(yv)
                    continue
            tp.append(t1)
            vp.append(y1)
    return np.array(tp), np.array(vp)


def fit_exponential_rate(t, values, window=None, envelope: bool = False) -> DecayFit:
    """Least-squares fit of ``log(value) = log C - r t`` over ``window``.

    With ``envelope=True`` only the local maxima of the series enter the fit.
    For a damped oscillation ``exp(-r t)|cos(w t + phi)|`` those maxima are
    equally spaced and lie on one exponential, so the fit is unbiased where
    the plain log-linear fit is not.
    """
    t, v, window = _prepare(t, values, window)
    x, y = t, np.log(v)
    if envelope:
        x, y = _peaks(t, y)
        if x.size < 3:
            raise DomainError(f"envelope fit needs >= 3 local maxima in the window, found {x.size}")
    slope, intercept, r2 = _linear_fit(x, y)
    return DecayFit("exponential", -slope, math.exp(intercept), r2, window, int(x.size))


def fit_polynomial_rate(t, values, window=None) -> DecayFit:
    """Least-squares fit of ``log(value) = log C - q log t``; the window must
    lie inside ``(0, 1]``."""
    if window is not None and (window[0] <= 0 or window[1] > 1.0):
        raise DomainError(f"polynomial fits use windows inside (0, 1], got {window}")
    t = np.asarray(t, dtype=float)
    if window is None and (t[0] <= 0 or t[-1] > 1.0):
        raise DomainError("polynomial fits need samples inside (0, 1]")
    t, v, window = _prepare(t, values, window)
    slope, intercept, r2 = _linear_fit(np.log(t), np.log(v))
    return DecayFit("polynomial", -slope, math.exp(intercept), r2, window, int(t.size))


def spectral_abscissa(spectrum: Spectrum, params: DampingParams) -> float:
    """Slowest per-mode exponential decay rate over the spectrum."""
    return float(np.min(mode_decay_rate(spectrum.eigenvalues, params)))


def envelope_constant(beta: float, theta: float) -> float:
    """``sup_{x >= 0} x^(beta/theta) exp(-x/2) = (2 beta / (e theta))^(beta/theta)``,
    hence ``lam^beta exp(-lam^theta t / 2) <= C t^(-beta/theta)``."""
    if beta <= 0 or theta <= 0:
        raise DomainError("beta and theta must be > 0")
    q = beta / theta
    return (2.0 * beta / (math.e * theta)) ** q


QUANTITIES = ("u", "L^beta u", "d_t^k u")
LARGE_TIME = ("exponential", "none", "linear")


@dataclass(frozen=True)
class RatePrediction:
    """Predicted behavior of one norm driven by one initial-data channel.

    ``small_time_exponent`` is the ``q`` in ``t^-q`` on ``(0, 1]``; ``None``
    means no separate small-time statement (the large-time shape holds for
    all ``t``) and ``inf`` means the norm is not controlled at all.
    ``data_order`` is the Sobolev order of the data norm the bound uses.
    """

    regime: Regime
    quantity: str
    channel: str
    small_time_exponent: Optional[float]
    large_time: str
    data_order: float = 0.0
    beta: float = 0.0
    k: int = 0
    family: str = "minimal"

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise DomainError(f"unknown quantity {self.quantity!r}")
        if self.channel not in ("u0", "u1"):
            raise DomainError(f"unknown channel {self.channel!r}")
        if self.large_time not in LARGE_TIME:
            raise DomainError(f"unknown large-time behavior {self.large_time!r}")


def _ratio(num, den):
    if num <= 0:
        return 0.0
    return math.inf if den == 0 else num / den


def theoretical_rates(params: DampingParams, beta: float, k: int) -> list:
    """Exponent table for data of minimal regularity (Sobolev-regular data in
    the undamped case)."""
    if not (beta > 0 or k >= 1):
        raise DomainError("need beta > 0 or k >= 1")
    regime = classify_regime(params)
    th, sg = params.theta, params.sigma
    R = lambda *a, **kw: RatePrediction(regime, *a, beta=beta, k=k, **kw)  # noqa: E731
    out = [R("u", "u0", None, "none"), R("u", "u1", None, "linear")]

    if beta > 0:
        excess = 2 * beta - sg
        if regime is Regime.UNDAMPED:
            out += [
                R("L^beta u", "u0", None, "exponential", data_order=2 * beta),
                R("L^beta u", "u1", None, "exponential", data_order=max(excess, 0.0)),
            ]
        else:
            if regime is Regime.EFFECTIVE:
                q0, q1 = beta / th, _ratio(excess, 2 * th)
            elif regime is Regime.CRITICAL:
                q0, q1 = beta / th, _ratio(beta - th, th)
            else:
                q0, q1 = _ratio(beta, sg - th), _ratio(excess, 2 * sg - 2 * th)
            out += [
                R("L^beta u", "u0", q0, "exponential"),
                R("L^beta u", "u1", q1, "exponential"),
            ]

    if k >= 1:
        u1_large = "exponential" if k >= 2 else "none"
        if regime is Regime.UNDAMPED:
            out += [
                R("d_t^k u", "u0", None, "exponential", data_order=k * sg),
                R("d_t^k u", "u1", None, "exponential", data_order=(k - 1) * sg),
            ]
        else:
            if regime is Regime.EFFECTIVE:
                unit = sg / (2 * th)
            elif regime is Regime.CRITICAL:
                unit = 1.0
            else:
                unit = _ratio(th, sg - th)
            q0 = k * unit
            q1 = 0.0 if k == 1 else (k - 1) * unit
            out += [
                R("d_t^k u", "u0", q0, "exponential"),
                R("d_t^k u", "u1", q1, u1_large),
            ]
    return out


def sobolev_data_orders(params: DampingParams, beta: float, k: int):
    """Sobolev orders ``(m, n)`` of ``(u0, u1)`` giving exponential decay of
    ``d_t^k L^beta u`` when the operator is strictly positive."""
    excess = max(2 * beta - params.sigma, 0.0)
    if 2 * params.theta <= params.sigma:
        return k * params.sigma + 2 * beta, max((k - 1) * params.sigma, 0.0) + excess
    return 2 * k * params.theta + 2 * beta, max(2 * (k - 1) * params.theta, 0.0) + excess


def strictly_positive_rates(params: DampingParams, beta: float, k: int) -> list:
    """Exponential decay of every norm for Sobolev-regular data; valid only
    when no eigenvalue is zero."""
    regime = classify_regime(params)
    out = []
    targets = [("u", 0.0, 0)]
    if beta > 0:
        targets.append(("L^beta u", beta, 0))
    if k >= 1:
        targets.append(("d_t^k u", 0.0, k))
    for quantity, b, kk in targets:
        m, n = sobolev_data_orders(params, b, kk)
        out += [
            RatePrediction(regime, quantity, "u0", None, "exponential", m, beta, k, "sobolev-exp"),
            RatePrediction(regime, quantity, "u1", None, "exponential", n, beta, k, "sobolev-exp"),
        ]
    return out


@dataclass
class BoundRow:
    inequality: str
    channel: str
    fitted_C: float
    refined_C: float
    ratio_stability: float
    diverging: bool
    passed: bool


@dataclass
class BoundReport:
    rows: list = field(default_factory=list)
    delta: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["inequality", "channel", "fitted_C", "ratio_stability", "pass"])
            for r in self.rows:
                w.writerow(
                    [
                        r.inequality,
                        r.channel,
                        format(r.fitted_C, ".17g"),
                        format(r.ratio_stability, ".17g"),
                        "true" if r.passed else "false",
                    ]
                )


_COLUMN = {"u": "norm_h", "L^beta u": "norm_sobolev_beta", "d_t^k u": "norm_dt_k"}


def _shape(pred: RatePrediction, t, window, delta):
    q = pred.small_time_exponent
    if window == "small" and q is not None:
        return np.full_like(t, math.inf) if math.isinf(q) else t**-q
    if pred.large_time == "exponential":
        return np.exp(-delta * t)
    if pred.large_time == "linear":
        return t.copy()
    return np.ones_like(t)


def _ratio_curve(trace: SolutionTrace, preds, window, delta):
    t = trace.t
    mask = (t > 0) & (t <= 1.0) if window == "small" else (t >= 1.0)
    tw = t[mask]
    observed = trace.column(_COLUMN[preds[0].quantity])[mask]
    bound = np.zeros_like(tw)
    for p in preds:
        u = trace.data.u0_hat if p.channel == "u0" else trace.data.u1_hat
        D = norm_sobolev(u, trace.spectrum, p.data_order)
        if D > 0:
            bound = bound + D * _shape(p, tw, window, delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, observed / bound, np.where(observed > 1e-300, np.inf, 0.0))
    # an uncontrolled channel (infinite exponent) leaves nothing to fit
    r = np.where(np.isinf(bound), np.inf, r)
    return tw, r


def _check_trace_matches(trace, preds):
    for p in preds:
        if p.quantity == "L^beta u" and not math.isclose(p.beta, trace.beta):
            raise DomainError(f"prediction is for beta={p.beta} but the trace carries beta={trace.beta}")
        if p.quantity == "d_t^k u" and p.k != trace.k:
            raise DomainError(f"prediction is for k={p.k} but the trace carries k={trace.k}")


def verify_bound(
    trace: SolutionTrace,
    predictions: Sequence[RatePrediction],
    refinement_trace: SolutionTrace,
    delta: Optional[float] = None,
    delta_fraction: float = 0.5,
    stability_tol: float = 0.05,
    tail_fraction: float = 0.2,
) -> BoundReport:
    """Fit the constant of every predicted inequality and check it.

    Predictions are grouped by family and quantity; for each window (``t <= 1``
    and ``t >= 1``) the bound shape is ``sum_c ||u_c|| shape_c(t)`` over the
    two data channels and the fitted constant is ``max observed / shape``.
    A row passes when that constant is finite, changes by less than
    ``stability_tol`` between the two resolutions, and the ratio is not still
    growing over the final ``tail_fraction`` of the large-time window.
    ``delta`` defaults to ``delta_fraction`` times the spectral abscissa of
    the positive eigenvalues.
    """
    if trace.data is None or refinement_trace.data is None:
        raise DomainError("bound checks need traces that carry their initial data")
    predictions = list(predictions)
    _check_trace_matches(trace, predictions)
    if delta is None:
        positive = trace.spectrum.eigenvalues > 0
        if positive.any():
            delta = delta_fraction * float(
                np.min(mode_decay_rate(trace.spectrum.eigenvalues[positive], trace.params))
            )
        else:
            delta = 0.0

    t = trace.t
    has_small = bool(np.any((t > 0) & (t < 1.0)))
    has_large = bool(np.any(t >= 1.0))
    needs_small = any(p.small_time_exponent is not None for p in predictions)
    if needs_small and not has_small:
        raise DomainError("small-time predictions need trace samples inside (0, 1)")

    groups = {}
    for p in predictions:
        groups.setdefault((p.family, p.quantity), []).append(p)

    report = BoundReport(delta=delta)
    for (family, quantity), preds in groups.items():
        windows = []
        if any(p.small_time_exponent is not None for p in preds) and has_small:
            windows.append("small")
        if has_large:
            windows.append("large")
        for window in windows:
            tw, r = _ratio_curve(trace, preds, window, delta)
            _, r_ref = _ratio_curve(refinement_trace, preds, window, delta)
            if tw.size == 0:
                continue
            C = float(np.max(r))
            C_ref = float(np.max(r_ref)) if r_ref.size else C
            if math.isfinite(C) and math.isfinite(C_ref):
                scale = max(C, C_ref)
                stability = abs(C - C_ref) / scale if scale > 0 else 0.0
            else:
                stability = math.inf
            diverging = False
            if window == "large" and tw.size >= 10 and C > 0:
                split = int(math.floor(tw.size * (1.0 - tail_fraction)))
                head, tail = np.max(r[:split]), np.max(r[split:])
                diverging = bool(tail > (1.0 + stability_tol) * head)
            channels = []
            for p in preds:
                u = trace.data.u0_hat if p.channel == "u0" else trace.data.u1_hat
                if np.any(u != 0) and p.channel not in channels:
                    channels.append(p.channel)
            passed = math.isfinite(C) and stability < stability_tol and not diverging
            label = f"{family}:{quantity}:{'t<=1' if window == 'small' else 't>=1'}"
            report.rows.append(
                BoundRow(label, "+".join(channels) or "none", C, C_ref, stability, diverging, passed)
            )
    return report
