"""Mode-by-mode solver and verification harness for structurally damped
wave equations ``u_tt + L^theta u_t + L^sigma u = f(u)`` with a nonnegative
self-adjoint operator ``L`` of discrete spectrum."""

from .analysis import (
    BoundReport,
    DecayFit,
    RatePrediction,
    envelope_constant,
    fit_exponential_rate,
    fit_polynomial_rate,
    spectral_abscissa,
    strictly_positive_rates,
    theoretical_rates,
    verify_bound,
)
from .config import ExperimentConfig, load_config, parse_config
from .errors import AliasingError, ConfigError, DomainError, NonContractionError
from .evolution import (
    ConvergenceReport,
    InitialData,
    NonlinearitySpec,
    SolutionTrace,
    TimeGrid,
    duhamel_convolve,
    norm_h,
    norm_sobolev,
    oracle_solve_mode,
    read_trace_csv,
    solve_linear,
    solve_semilinear_picard,
    xkbeta_norm,
)
from .propagator import (
    char_roots,
    eval_dtk_e0,
    eval_dtk_e1,
    eval_e0,
    eval_e1,
    mode_decay_rate,
    propagator_pair,
)
from .realization import forward_transform, inverse_transform, torus_realization
from .spectrum import (
    DampingParams,
    Regime,
    Spectrum,
    build_spectrum,
    classify_regime,
    from_file,
    from_list,
    harmonic,
    landau,
    partition_modes,
    spectral_gap,
    torus_1d,
)

__version__ = "0.1.0"
