"""Estimators built on post-selected spectra.

Every mean-value shift is measured against the mean of the *input* spectrum.
Single-detection schemes use the mean of their one output, JWVA uses the signed
difference normalized by its own integral, DWVA the normalized square of the
difference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DetectionKind,
    InitialKind,
    Mode,
    PostselectedPair,
    Scheme,
    SchemeSpec,
    pointer_phase,
    postselected_spectra,
)
from .errors import (
    CalibrationError,
    DegenerateSignalError,
    DetectionKindError,
    NumericalError,
    ParameterError,
    SpectrumFormatError,
)
from .spectrum import (
    C_LIGHT,
    DomainKind,
    SpectralAxis,
    Spectrum,
    fingerprint,
    moments,
    trapezoid,
)

# relative size below which a difference signal counts as identically zero
DEGENERATE_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class DifferenceSignal:
    axis: SpectralAxis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.axis.grid.shape or not np.all(np.isfinite(v)):
            raise ParameterError("difference signal must be finite and match its axis")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class EstimationReport:
    scheme: SchemeSpec
    coupling: float
    delta_p: float
    xi: float
    sensitivity: float
    mode: Mode = Mode.EXACT

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme.scheme.value,
            "epsilon": self.scheme.epsilon,
            "p0_ref": self.scheme.p0_ref,
            "coupling": self.coupling,
            "delta_p": self.delta_p,
            "xi": self.xi,
            "sensitivity": self.sensitivity,
            "mode": self.mode.value,
        }


def difference_signal(pair: PostselectedPair) -> DifferenceSignal:
    if pair.p2 is None:
        raise DetectionKindError("difference signal needs both detection ports (DD)")
    return DifferenceSignal(pair.axis, pair.p1.density - pair.p2.density)


def _check_signal(values, reference) -> None:
    scale = float(np.max(np.abs(reference))) if np.size(reference) else 0.0
    if not np.max(np.abs(values)) > DEGENERATE_RTOL * scale:
        raise DegenerateSignalError("difference signal is identically zero (ε = 0 and g = 0?)")


def squared_distribution(d: DifferenceSignal) -> Spectrum:
    """``ΔP²`` renormalized into a probability distribution."""
    sq = d.values**2
    if not np.any(sq > 0):
        raise DegenerateSignalError("difference signal is identically zero")
    total = trapezoid(sq, d.axis.grid)
    return Spectrum(d.axis, sq / total / trapezoid(sq / total, d.axis.grid), normalized=True)


def _centered_mean(x, weights, center) -> float:
    norm = trapezoid(weights, x)
    if norm == 0 or not np.isfinite(norm):
        raise DegenerateSignalError("estimator normalizer vanished")
    return trapezoid((x - center) * weights, x) / norm


def _shift_from_pair(pair: PostselectedPair, center: float) -> float:
    x = pair.axis.grid
    scheme = pair.scheme
    if pair.p2 is None:
        return _centered_mean(x, pair.p1.density, center)
    delta = pair.p1.density - pair.p2.density
    _check_signal(delta, pair.p1.density + pair.p2.density)
    if scheme is not None and scheme.initial_kind is InitialKind.PI:
        return _centered_mean(x, delta, center)
    return _centered_mean(x, delta**2, center)


def _intensity_from_pair(pair: PostselectedPair) -> float:
    x = pair.axis.grid
    if pair.p2 is None:
        xi = trapezoid(pair.p1.density, x)
    else:
        xi = trapezoid(np.abs(pair.p1.density - pair.p2.density), x)
    return float(min(max(xi, 0.0), 1.0))


def mean_shift(scheme: SchemeSpec, g: float, s: Spectrum, mode=Mode.EXACT) -> float:
    """Mean-value shift of the scheme's estimator distribution, in axis units."""
    s = s.normalize()
    pair = postselected_spectra(scheme, g, s, mode)
    return _shift_from_pair(pair, moments(s).mean)


def signal_intensity(scheme: SchemeSpec, g: float, s: Spectrum, mode=Mode.EXACT) -> float:
    """Detected fraction of the input: post-selected mass (SD) or ∫|ΔP| (DD)."""
    return _intensity_from_pair(postselected_spectra(scheme, g, s.normalize(), mode))


def sensitivity(
    scheme: SchemeSpec,
    s: Spectrum,
    mode=Mode.EXACT,
    target_fraction: float = 0.01,
    linearity_rtol: float = 0.02,
) -> float:
    """``dδp/dg`` at ``g = 0`` by central differences.

    The step starts at ``|ε|·σ_κ/(100·κ0²)`` (κ the pointer in coupling-phase
    units) and is bisected until the odd part of the shift is about
    ``target_fraction`` of the spectral width. The step is then halved until
    two successive central differences agree within ``linearity_rtol``; the
    returned value is their Richardson extrapolation. Steps are capped so the
    coupling phase at the mean stays below a quarter of the bias phase.
    """
    mode = Mode(mode)
    s = s.normalize()
    scheme = scheme.with_reference(s)
    mean, var = moments(s)
    sigma = math.sqrt(var)
    kappa, _ = pointer_phase(s.axis, scheme.p0_ref)
    k0 = trapezoid(kappa * s.density, s.grid)
    sk = math.sqrt(trapezoid((kappa - k0) ** 2 * s.density, s.grid))
    eps = abs(scheme.epsilon)
    h_cap = 0.25 * eps / abs(k0)
    if mode is Mode.FIRST_ORDER:
        h_cap = min(h_cap, 0.1 / float(np.max(np.abs(kappa))))
    if not h_cap > 0:
        raise NumericalError("sensitivity undefined: step cap is zero (ε = 0?)")

    def shift(g):
        pair = postselected_spectra(scheme, g, s, mode)
        return _shift_from_pair(pair, mean)

    def odd(h):
        return 0.5 * (shift(h) - shift(-h))

    target = target_fraction * sigma
    h = min(eps * sk / (100 * k0**2), h_cap)
    # bracket [lo, hi] around |odd| = target, then bisect in log space
    lo = hi = h
    if abs(odd(h)) < target:
        while abs(odd(hi)) < target and hi < h_cap:
            lo, hi = hi, min(2 * hi, h_cap)
    else:
        while abs(odd(lo)) > target:
            hi, lo = lo, lo / 2
            if lo < h * 1e-12:
                raise NumericalError("step selection failed: shift never drops to target")
    for _ in range(8):
        if hi <= lo:
            break
        mid = math.sqrt(lo * hi)
        if abs(odd(mid)) < target:
            lo = mid
        else:
            hi = mid
    h = lo if lo > 0 else hi

    d_prev = odd(h) / h
    for _ in range(16):
        d_half = odd(h / 2) / (h / 2)
        if abs(d_half - d_prev) <= linearity_rtol * abs(d_half):
            return (4 * d_half - d_prev) / 3
        h, d_prev = h / 2, d_half
    raise NumericalError("step selection failed: nonlinear regime at the minimal step")


def estimate(scheme: SchemeSpec, g: float, s: Spectrum, mode=Mode.EXACT) -> EstimationReport:
    """Shift, intensity and sensitivity of one scheme at coupling ``g``."""
    s = s.normalize()
    scheme = scheme.with_reference(s)
    pair = postselected_spectra(scheme, g, s, mode)
    return EstimationReport(
        scheme=scheme,
        coupling=g,
        delta_p=_shift_from_pair(pair, moments(s).mean),
        xi=_intensity_from_pair(pair),
        sensitivity=sensitivity(scheme, s, mode),
        mode=Mode(mode),
    )


# ---------------------------------------------------------------- calibration


@dataclass(frozen=True)
class Calibration:
    bias: float
    slope_at_zero: float
    epsilon: float
    spectrum_fingerprint: str
    domain_kind: DomainKind = DomainKind.GENERIC

    def __post_init__(self):
        object.__setattr__(self, "domain_kind", DomainKind(self.domain_kind))
        if self.slope_at_zero == 0 or not math.isfinite(self.slope_at_zero):
            raise CalibrationError("calibration slope must be finite and nonzero")

    def to_text(self, header=()) -> str:
        lines = [f"# {h}" for h in header]
        lines += [
            f"epsilon={self.epsilon:.17g}",
            f"bias={self.bias:.17g}",
            f"slope_at_zero={self.slope_at_zero:.17g}",
            f"fingerprint={self.spectrum_fingerprint}",
            f"domain_kind={self.domain_kind.value}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Calibration":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SpectrumFormatError(f"malformed calibration line {line!r}")
            fields[key.strip()] = value.strip()
        try:
            return cls(
                bias=float(fields["bias"]),
                slope_at_zero=float(fields["slope_at_zero"]),
                epsilon=float(fields["epsilon"]),
                spectrum_fingerprint=fields["fingerprint"],
                domain_kind=DomainKind(fields.get("domain_kind", "generic")),
            )
        except (KeyError, ValueError) as exc:
            raise SpectrumFormatError(f"incomplete calibration file: {exc}") from None


def calibrate(s: Spectrum, epsilon: float) -> Calibration:
    """Bias at zero coupling and the DWVA slope there, for spectrum ``s``."""
    s = s.normalize()
    scheme = SchemeSpec.of(Scheme.DWVA, epsilon).with_reference(s)
    try:
        bias = mean_shift(scheme, 0.0, s)
        slope = sensitivity(scheme, s)
    except (DegenerateSignalError, NumericalError) as exc:
        raise CalibrationError(f"calibration failed: {exc}") from exc
    return Calibration(bias, slope, epsilon, fingerprint(s), s.domain_kind)


def measured_shift(measured: PostselectedPair) -> float:
    """Mean of the normalized ``ΔP²`` minus the mean of ``P1 + P2``."""
    d = difference_signal(measured)
    total = measured.total()
    _check_signal(d.values, total.density)
    return _centered_mean(d.axis.grid, d.values**2, moments(total).mean)


def estimate_tau(measured: PostselectedPair, cal: Calibration) -> float:
    """Invert a measured DWVA pair to the coupling via ``(δ - bias)/slope``.

    The result is in coupling units (attoseconds on optical axes).
    """
    if measured.axis.domain_kind is not cal.domain_kind:
        raise ParameterError(
            f"measured axis is {measured.axis.domain_kind.value}, "
            f"calibration is {cal.domain_kind.value}"
        )
    if fingerprint(measured.total()) != cal.spectrum_fingerprint:
        warnings.warn(
            "measured spectra do not match the calibration spectrum fingerprint",
            stacklevel=2,
        )
    return (measured_shift(measured) - cal.bias) / cal.slope_at_zero


def mws_rate(epsilon: float) -> float:
    """Mean wavelength shift rate ``4πc/ε`` in nm per attosecond.

    The simulated DWVA slope ``dδλ/dτ`` has the opposite sign, because
    wavelength decreases with frequency.
    """
    if epsilon == 0 or not math.isfinite(epsilon):
        raise ParameterError("mws_rate needs a finite nonzero ε")
    return 4 * math.pi * C_LIGHT / epsilon * 1e9 * 1e-18


# ---------------------------------------------------------------- closed forms


def closed_form_slope(scheme, p0: float, sigma: float, epsilon: float) -> float:
    """Small-coupling ``dδp/dg`` from the standard leading-order results."""
    scheme = Scheme(scheme)
    return {
        Scheme.SWVA: 2 * sigma**2 / epsilon,
        Scheme.BWVA: 2 * p0**2 / epsilon,
        Scheme.JWVA: sigma**2 / epsilon,
        Scheme.DWVA: 2 * p0**2 / epsilon,
    }[scheme]


def closed_form_intensity(scheme, p0: float, sigma: float, epsilon: float) -> float:
    """Leading-order signal intensity as conventionally quoted for each scheme.

    The BWVA and DWVA entries are a factor 2 and √2 below direct quadrature of
    a Gaussian input; see :func:`quadrature_intensity_gaussian`.
    """
    scheme = Scheme(scheme)
    e = abs(epsilon)
    return {
        Scheme.SWVA: e**2,
        Scheme.BWVA: sigma**2 / (2 * p0**2) * e**2,
        Scheme.JWVA: 2 * e,
        Scheme.DWVA: 2 / math.sqrt(math.pi) * sigma / p0 * e,
    }[scheme]


def quadrature_intensity_gaussian(scheme, p0: float, sigma: float, epsilon: float) -> float:
    """Leading-order intensity obtained by integrating a Gaussian input directly.

    ``⟨sin² C⟩ ≈ ε²σ²/p0²`` for BWVA and ``⟨|sin 2C|⟩ ≈ 2√2/√π·(σ/p0)·|ε|``
    for DWVA; SWVA and JWVA agree with :func:`closed_form_intensity`.
    """
    scheme = Scheme(scheme)
    e = abs(epsilon)
    if scheme is Scheme.BWVA:
        return e**2 * sigma**2 / p0**2
    if scheme is Scheme.DWVA:
        return 2 * math.sqrt(2) / math.sqrt(math.pi) * sigma / p0 * e
    return closed_form_intensity(scheme, p0, sigma, epsilon)
