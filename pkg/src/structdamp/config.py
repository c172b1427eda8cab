"""JSON experiment configurations.

Every key is checked against a fixed schema; unknown keys, missing required
keys and ill-typed values raise :class:`ConfigError` naming the dotted field
path (``initial_data.u0.s``). Example::

    {
      "operator": {"kind": "torus_1d", "N": 16},
      "theta": 1.0, "sigma": 2.0,
      "initial_data": {"u0": {"rule": "random", "support": "positive"},
                       "u1": {"rule": "formula", "formula": "lambda^(-s)", "s": 1.0}},
      "beta": [1.0], "k": [1],
      "time": {"t_max": 20.0, "steps": 2000, "log_spaced_small_time": false},
      "seed": 7
    }

Randomness: one ``numpy.random.Generator(PCG64(seed))`` per call to
:meth:`ExperimentConfig.initial_data`. ``Generator.random`` builds each
uniform from the top 53 bits of a 64-bit draw (``(x >> 11) * 2**-53``);
the coefficient is ``2 u - 1``. The ``u0`` channel draws first (one value
per slot, in slot order), then ``u1``; only channels with the ``random``
rule consume draws.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .evolution import InitialData, NonlinearitySpec, TimeGrid, norm_h
from .realization import GridRealization, torus_realization
from .spectrum import DampingParams, Spectrum, build_spectrum

__all__ = ["ExperimentConfig", "TimeSpec", "Tolerances", "load_config", "parse_config"]

_TOP = {
    "operator", "theta", "sigma", "initial_data", "beta", "k", "time",
    "nonlinearity", "realization", "tolerances", "seed",
}
_REQUIRED = ("theta", "sigma", "initial_data", "time")
_RULE_KEYS = {
    "zero": set(),
    "values": {"values"},
    "formula": {"formula", "s"},
    "random": set(),
}
_RULE_OPTIONAL = {"support", "norm"}
_SUPPORTS = ("all", "positive", "zero")
_FORMULAS = ("lambda^(-s)",)


@dataclass(frozen=True)
class TimeSpec:
    t_max: float
    steps: int
    log_spaced_small_time: bool = False
    n_small: int = 200
    t_min: float = 1e-3

    def grid(self, refine: int = 1) -> TimeGrid:
        """Grid with ``refine`` times as many steps (and small-time points)."""
        if self.log_spaced_small_time:
            return TimeGrid.small_time_grid(self.t_max, self.steps * refine, self.n_small * refine, self.t_min)
        return TimeGrid.uniform_grid(self.t_max, self.steps * refine)


@dataclass(frozen=True)
class Tolerances:
    picard_tol: float = 1e-12
    picard_max_iter: int = 50
    degeneracy_tol: float = 1e-10
    partition_tol: float = 1e-12


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    spectrum: Spectrum
    params: DampingParams
    u0_rule: dict
    u1_rule: dict
    beta: tuple
    k: tuple
    time: TimeSpec
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    realization: Optional[GridRealization] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    def initial_data(self) -> InitialData:
        """Materialize both channels; identical seeds give identical bits."""
        rng = np.random.Generator(np.random.PCG64(self.seed))
        u0 = _materialize(self.u0_rule, self.spectrum, rng, "initial_data.u0")
        u1 = _materialize(self.u1_rule, self.spectrum, rng, "initial_data.u1")
        return InitialData(u0, u1, self.spectrum)

    def grid(self, refine: int = 1) -> TimeGrid:
        return self.time.grid(refine)


def _materialize(rule, spectrum, rng, where):
    kind = rule["rule"]
    lam = spectrum.slot_eigenvalues
    if kind == "zero":
        v = np.zeros(spectrum.size)
    elif kind == "values":
        v = np.array(rule["values"], dtype=float)
        if v.shape != (spectrum.size,):
            raise ConfigError(
                f"{where}.values: expected {spectrum.size} coefficients (one per slot), got {v.size}"
            )
    elif kind == "formula":
        s = rule["s"]
        v = np.zeros(spectrum.size)
        pos = lam > 0
        v[pos] = lam[pos] ** (-s)
    else:
        v = 2.0 * rng.random(spectrum.size) - 1.0

    support = rule.get("support", "all")
    if support == "positive":
        v = np.where(lam > 0, v, 0.0)
    elif support == "zero":
        v = np.where(lam == 0, v, 0.0)

    if "norm" in rule:
        target = rule["norm"]
        current = float(norm_h(v))
        if current == 0.0 and target != 0.0:
            raise ConfigError(f"{where}.norm: cannot rescale an all-zero channel to norm {target}")
        if current > 0:
            v = v * (target / current)
    return v


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(obj, path, allowed, required=()):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(f"{path}.{unknown[0]}" if path else unknown[0], f"unknown key (allowed: {', '.join(sorted(allowed))})")
    for key in required:
        if key not in obj:
            _fail(f"{path}.{key}" if path else key, "missing required field")


def _number(obj, key, path, default=None, minimum=None, positive=False):
    full = f"{path}.{key}" if path else key
    if key not in obj:
        if default is None:
            _fail(full, "missing required field")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(full, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        _fail(full, f"must be > 0, got {v}")
    if minimum is not None and v < minimum:
        _fail(full, f"must be >= {minimum}, got {v}")
    return float(v)


def _integer(obj, key, path, default=None, minimum=None):
    full = f"{path}.{key}" if path else key
    if key not in obj:
        if default is None:
            _fail(full, "missing required field")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(full, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(full, f"must be >= {minimum}, got {v}")
    return int(v)


def _parse_rule(obj, path):
    if not isinstance(obj, dict) or "rule" not in obj:
        _fail(f"{path}.rule", "missing required field")
    kind = obj["rule"]
    if kind not in _RULE_KEYS:
        _fail(f"{path}.rule", f"unknown rule {kind!r} (expected one of {', '.join(_RULE_KEYS)})")
    _check_keys(obj, path, {"rule"} | _RULE_KEYS[kind] | _RULE_OPTIONAL, sorted(_RULE_KEYS[kind]))
    rule = {"rule": kind}
    if kind == "values":
        vals = obj["values"]
        if not isinstance(vals, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in vals
        ):
            _fail(f"{path}.values", "expected a list of finite numbers")
        rule["values"] = [float(x) for x in vals]
    elif kind == "formula":
        if obj["formula"] not in _FORMULAS:
            _fail(f"{path}.formula", f"unsupported formula {obj['formula']!r} (expected {_FORMULAS[0]!r})")
        rule["formula"] = obj["formula"]
        rule["s"] = _number(obj, "s", path)
    if "support" in obj:
        if obj["support"] not in _SUPPORTS:
            _fail(f"{path}.support", f"expected one of {', '.join(_SUPPORTS)}, got {obj['support']!r}")
        rule["support"] = obj["support"]
    if "norm" in obj:
        rule["norm"] = _number(obj, "norm", path, minimum=0.0)
    return rule


def _number_list(obj, key, default, integer=False):
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, list):
        v = [v]
    if not v:
        _fail(key, "expected a non-empty list")
    out = []
    for i, x in enumerate(v):
        if integer:
            if isinstance(x, bool) or not isinstance(x, int) or x < 0:
                _fail(f"{key}[{i}]", f"expected an integer >= 0, got {x!r}")
            out.append(int(x))
        else:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x < 0:
                _fail(f"{key}[{i}]", f"expected a number >= 0, got {x!r}")
            out.append(float(x))
    return tuple(out)


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON object and build the experiment."""
    _check_keys(raw, "", _TOP, _REQUIRED)

    try:
        params = DampingParams(_number(raw, "theta", ""), _number(raw, "sigma", ""))
    except DomainError as exc:
        raise ConfigError(f"theta/sigma: {exc}") from None

    realization = None
    if "realization" in raw:
        r = raw["realization"]
        _check_keys(r, "realization", {"kind", "N", "M"}, ("kind", "N", "M"))
        if r["kind"] != "torus":
            _fail("realization.kind", f"only 'torus' is supported, got {r['kind']!r}")
        try:
            realization = torus_realization(_integer(r, "N", "realization", minimum=0), _integer(r, "M", "realization", minimum=1))
        except DomainError as exc:
            _fail("realization", str(exc))

    if "operator" in raw:
        op = raw["operator"]
        if not isinstance(op, dict):
            _fail("operator", "expected an object")
        try:
            spectrum = build_spectrum(op)
        except DomainError as exc:
            _fail("operator", str(exc))
        except (TypeError, OSError) as exc:
            _fail("operator", str(exc))
        if realization is not None and (
            len(spectrum) != len(realization.spectrum)
            or not np.array_equal(spectrum.eigenvalues, realization.spectrum.eigenvalues)
            or not np.array_equal(spectrum.multiplicities, realization.spectrum.multiplicities)
        ):
            _fail("operator", "does not match the spectrum of the configured realization")
    elif realization is not None:
        spectrum = realization.spectrum
    else:
        _fail("operator", "missing required field (needed unless a realization is given)")

    idata = raw["initial_data"]
    _check_keys(idata, "initial_data", {"u0", "u1"})
    u0_rule = _parse_rule(idata.get("u0", {"rule": "zero"}), "initial_data.u0")
    u1_rule = _parse_rule(idata.get("u1", {"rule": "zero"}), "initial_data.u1")

    beta = _number_list(raw, "beta", (1.0,))
    ks = _number_list(raw, "k", (1,), integer=True)

    tm = raw["time"]
    _check_keys(tm, "time", {"t_max", "steps", "log_spaced_small_time", "n_small", "t_min"}, ("t_max", "steps"))
    flag = tm.get("log_spaced_small_time", False)
    if not isinstance(flag, bool):
        _fail("time.log_spaced_small_time", f"expected true or false, got {flag!r}")
    time = TimeSpec(
        t_max=_number(tm, "t_max", "time", positive=True),
        steps=_integer(tm, "steps", "time", minimum=1),
        log_spaced_small_time=flag,
        n_small=_integer(tm, "n_small", "time", default=200, minimum=2),
        t_min=_number(tm, "t_min", "time", default=1e-3, positive=True),
    )
    if time.log_spaced_small_time and time.t_min >= 1.0:
        _fail("time.t_min", "must be < 1 for a log-spaced small-time grid")

    nonlinearity = NonlinearitySpec()
    if "nonlinearity" in raw:
        nl = raw["nonlinearity"]
        _check_keys(nl, "nonlinearity", {"kind", "p", "mu"}, ("kind",))
        try:
            nonlinearity = NonlinearitySpec(
                nl["kind"], _number(nl, "p", "nonlinearity", default=3.0), _number(nl, "mu", "nonlinearity", default=0.0)
            )
        except DomainError as exc:
            _fail("nonlinearity", str(exc))

    tolerances = Tolerances()
    if "tolerances" in raw:
        tl = raw["tolerances"]
        _check_keys(tl, "tolerances", {"picard_tol", "picard_max_iter", "degeneracy_tol", "partition_tol"})
        tolerances = Tolerances(
            picard_tol=_number(tl, "picard_tol", "tolerances", default=1e-12, positive=True),
            picard_max_iter=_integer(tl, "picard_max_iter", "tolerances", default=50, minimum=1),
            degeneracy_tol=_number(tl, "degeneracy_tol", "tolerances", default=1e-10, positive=True),
            partition_tol=_number(tl, "partition_tol", "tolerances", default=1e-12, positive=True),
        )
        if tolerances.partition_tol > 1e-6:
            _fail("tolerances.partition_tol", f"must lie in (0, 1e-6], got {tolerances.partition_tol}")

    seed = _integer(raw, "seed", "", default=0, minimum=0)
    if seed >= 2**64:
        _fail("seed", "must fit in 64 bits")

    cfg = ExperimentConfig(
        spectrum=spectrum,
        params=params,
        u0_rule=u0_rule,
        u1_rule=u1_rule,
        beta=beta,
        k=ks,
        time=time,
        nonlinearity=nonlinearity,
        realization=realization,
        tolerances=tolerances,
        seed=seed,
        raw=raw,
    )
    cfg.initial_data()  # surface length mismatches and zero-norm rescales now
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file; JSON syntax errors report the
    line and column."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    op = raw.get("operator") if isinstance(raw, dict) else None
    if isinstance(op, dict) and op.get("kind") == "from_file" and isinstance(op.get("path"), str):
        spec_path = Path(op["path"])
        if not spec_path.is_absolute():
            raw["operator"] = dict(op, path=str(Path(path).parent / spec_path))
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
