"""Command-line front end.

Subcommands ``classify``, ``simulate``, ``semilinear``, ``decay-fit`` and
``verify``. Exit codes: 0 ok, 2 configuration or input error,
3 non-contraction, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from .analysis import (
    BoundReport,
    fit_exponential_rate,
    fit_polynomial_rate,
    spectral_abscissa,
    strictly_positive_rates,
    theoretical_rates,
    verify_bound,
)
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DomainError, NonContractionError
from .evolution import TRACE_COLUMNS, read_trace_csv, solve_linear, solve_semilinear_picard
from .propagator import char_roots
from .spectrum import partition_modes, spectral_gap

__all__ = [
    "cmd_classify",
    "cmd_simulate",
    "cmd_semilinear",
    "cmd_decay_fit",
    "cmd_verify",
    "main",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NONCONTRACTION",
    "EXIT_IO",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONTRACTION = 3
EXIT_IO = 4

log = logging.getLogger("structdamp")

FIT_COLUMNS = ("column", "model", "rate", "amplitude", "rsquared", "t_lo", "t_hi")


def _g(x) -> str:
    return format(float(x), ".17g")


def cmd_classify(config: ExperimentConfig) -> str:
    """Regime, partition counts, root branches, spectral gap and abscissa."""
    spectrum, params = config.spectrum, config.params
    part = partition_modes(spectrum, params, config.tolerances.partition_tol)
    counts = " ".join(f"{name}:{n}" for name, n in part.counts().items())
    branches = Counter(
        str(char_roots(lam, params, config.tolerances.degeneracy_tol).branch) for lam in spectrum.eigenvalues
    )
    lam_min, sep = spectral_gap(spectrum)
    lines = [
        f"{params.regime}; {counts}",
        "branches: " + " ".join(f"{b}:{branches.get(b, 0)}" for b in ("RealDistinct", "Double", "ComplexPair")),
        f"spectral gap: lambda_min={'none' if lam_min is None else _g(lam_min)} min_separation={_g(sep)}",
        f"spectral abscissa: {_g(spectral_abscissa(spectrum, params))}",
    ]
    if spectrum.has_zero_mode and len(spectrum) > 1:
        lines.append(f"spectral abscissa (lambda>0): {_g(spectral_abscissa(spectrum.positive_part(), params))}")
    return "\n".join(lines)


def cmd_simulate(config: ExperimentConfig, out_path):
    """Linear solution over the configured grid, written as a trace CSV
    (first entries of ``beta`` and ``k``)."""
    trace = solve_linear(
        config.spectrum, config.params, config.initial_data(), config.grid(), config.beta[0], config.k[0]
    )
    trace.to_csv(out_path)
    return trace


def report_path(out_path) -> Path:
    """Where the convergence report of ``semilinear`` goes."""
    out = Path(out_path)
    return out.with_name(out.stem + ".report.json")


def cmd_semilinear(config: ExperimentConfig, out_path):
    """Picard solution written as a trace CSV plus a JSON convergence report.

    On non-contraction the report is still written and the
    :class:`NonContractionError` propagates.
    """
    grid = config.grid()
    tol = config.tolerances
    try:
        trace, report = solve_semilinear_picard(
            config.realization,
            config.params,
            config.initial_data(),
            config.nonlinearity,
            grid,
            tol=tol.picard_tol,
            max_iter=tol.picard_max_iter,
            beta=config.beta[0],
            k=config.k[0],
        )
    except NonContractionError as exc:
        _write_report(report_path(out_path), exc.report)
        raise
    trace.to_csv(out_path)
    _write_report(report_path(out_path), report)
    return trace, report


def _write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_decay_fit(trace_csv, model: str, window, out_path, envelope: bool = False, columns=None):
    """Fit every norm column (or ``columns``) of a trace CSV.

    Columns that are not strictly positive in the window (for instance an
    identically zero norm) get a row with ``nan`` entries rather than
    aborting the other fits.
    """
    data = read_trace_csv(trace_csv)
    names = list(columns) if columns else [c for c in TRACE_COLUMNS if c != "t"]
    missing = [c for c in names if c not in data]
    if missing:
        raise DomainError(f"{trace_csv}: missing column(s) {', '.join(missing)}")
    t = data["t"]
    rows = []
    for name in names:
        try:
            if model == "exp":
                fit = fit_exponential_rate(t, data[name], window, envelope=envelope)
            else:
                fit = fit_polynomial_rate(t, data[name], window)
        except DomainError as exc:
            if "values must be finite and > 0" not in str(exc):
                raise
            log.warning("column %s: %s", name, exc)
            lo, hi = window if window is not None else (t[0], t[-1])
            rows.append([name, model, "nan", "nan", "nan", _g(lo), _g(hi)])
            continue
        rows.append([name, model, _g(fit.rate), _g(fit.amplitude), _g(fit.rsquared), _g(fit.window[0]), _g(fit.window[1])])
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIT_COLUMNS)
        w.writerows(rows)
    return rows


def cmd_verify(config: ExperimentConfig, out_path) -> BoundReport:
    """Check every predicted inequality for each ``(beta, k)`` pair.

    Solves at the configured resolution and at twice that resolution, fits
    the bound constants on both, and writes one BoundReport CSV. Row labels
    carry the ``beta`` and ``k`` they refer to.
    """
    data = config.initial_data()
    coarse, fine = config.grid(1), config.grid(2)
    merged = BoundReport()
    for beta, k in itertools.product(config.beta, config.k):
        if not (beta > 0 or k >= 1):
            log.warning("skipping beta=%g, k=%d: nothing beyond the H norm to check", beta, k)
            continue
        preds = theoretical_rates(config.params, beta, k) + strictly_positive_rates(config.params, beta, k)
        tr = solve_linear(config.spectrum, config.params, data, coarse, beta, k)
        tr_ref = solve_linear(config.spectrum, config.params, data, fine, beta, k)
        rep = verify_bound(tr, preds, tr_ref)
        merged.delta = rep.delta
        for row in rep.rows:
            row.inequality = f"beta={beta:g},k={k}:{row.inequality}"
            merged.rows.append(row)
    merged.to_csv(out_path)
    return merged


def _parse_window(text):
    if text is None:
        return None
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"window needs LO < HI, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structdamp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
        if needs_out:
            p.add_argument("--out", required=True, metavar="PATH", help="output CSV path")
        p.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    common(sub.add_parser("classify", help="print regime, partition and spectral data"), needs_out=False)
    common(sub.add_parser("simulate", help="linear solution trace CSV"))
    common(sub.add_parser("semilinear", help="Picard solution trace CSV and convergence report"))
    common(sub.add_parser("verify", help="empirical check of the predicted decay bounds"))

    fit = sub.add_parser("decay-fit", help="fit decay rates to a trace CSV")
    fit.add_argument("trace", metavar="TRACE_CSV")
    common(fit, needs_config=False)
    fit.add_argument("--model", choices=("exp", "poly"), default="exp")
    fit.add_argument("--window", type=_parse_window, metavar="LO:HI", default=None)
    fit.add_argument("--envelope", action="store_true", help="exp model: fit only the local maxima")
    fit.add_argument("--column", action="append", choices=[c for c in TRACE_COLUMNS if c != "t"],
                     help="restrict to this norm column (repeatable)")
    return parser


def _run(args) -> int:
    say = (lambda *a: None) if args.quiet else print
    if args.command == "decay-fit":
        rows = cmd_decay_fit(args.trace, args.model, args.window, args.out, args.envelope, args.column)
        for r in rows:
            say(f"{r[0]}: rate={r[2]} rsquared={r[4]}")
        return EXIT_OK

    config = load_config(args.config)
    if args.command == "classify":
        print(cmd_classify(config))
    elif args.command == "simulate":
        trace = cmd_simulate(config, args.out)
        say(f"wrote {len(trace.t)} rows to {args.out}")
    elif args.command == "semilinear":
        try:
            _, report = cmd_semilinear(config, args.out)
        except NonContractionError as exc:
            print(f"error: {exc} (report: {report_path(args.out)})", file=sys.stderr)
            return EXIT_NONCONTRACTION
        say(f"converged in {report.iterations} iterations, contraction factor {report.contraction_factor:.3g}")
    elif args.command == "verify":
        report = cmd_verify(config, args.out)
        failed = [r.inequality for r in report.rows if not r.passed]
        say(f"{len(report.rows) - len(failed)}/{len(report.rows)} bounds passed (delta={report.delta:.6g})")
        for name in failed:
            say(f"  fail: {name}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
