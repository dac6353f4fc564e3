"""Simulation and estimation toolkit for weak-value-amplification schemes.

Four schemes are covered: standard (SWVA), biased (BWVA), joint (JWVA) and
dual (DWVA) weak-value amplification.
"""

__version__ = "0.1.0"

from .spectrum import (  # noqa: E402
    DomainKind,
    GaussianModel,
    SpectralAxis,
    Spectrum,
    convert_domain,
    load_spectrum,
    make_gaussian,
    make_mixture,
    moments,
    read_spectrum,
    resample,
    sld_like_spectrum,
    square_normalize,
    write_spectrum,
)
from .core import (  # noqa: E402
    Mode,
    PostselectedPair,
    Scheme,
    SchemeSpec,
    SystemState,
    evolve_exact,
    final_states,
    initial_state,
    postselected_spectra,
    weak_value,
    zeta,
)
from .estimator import (  # noqa: E402
    Calibration,
    EstimationReport,
    calibrate,
    difference_signal,
    estimate,
    estimate_tau,
    mean_shift,
    mws_rate,
    sensitivity,
    signal_intensity,
    squared_distribution,
)
