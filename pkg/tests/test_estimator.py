import math

import numpy as np
import pytest

from wvalab.core import Mode, PostselectedPair, Scheme, SchemeSpec, postselected_spectra
from wvalab.errors import (
    CalibrationError,
    DegenerateSignalError,
    DetectionKindError,
    ParameterError,
    SpectrumFormatError,
)
from wvalab.estimator import (
    Calibration,
    calibrate,
    closed_form_intensity,
    closed_form_slope,
    difference_signal,
    estimate,
    estimate_tau,
    mean_shift,
    measured_shift,
    mws_rate,
    quadrature_intensity_gaussian,
    sensitivity,
    signal_intensity,
    squared_distribution,
)
from wvalab.spectrum import (
    C_LIGHT,
    NANOMETER,
    SKEWED_COMPONENTS,
    DomainKind,
    Spectrum,
    make_mixture,
    moments,
    trapezoid,
)


@pytest.fixture(scope="module")
def skewed():
    return make_mixture(SKEWED_COMPONENTS, domain_kind=DomainKind.WAVELENGTH)


def dwva(eps, s):
    return SchemeSpec.of(Scheme.DWVA, eps).with_reference(s)


def test_difference_signal_zero_at_origin(gauss_p):
    d = difference_signal(postselected_spectra(dwva(0.0, gauss_p), 0.0, gauss_p))
    assert np.all(d.values == 0)
    with pytest.raises(DegenerateSignalError):
        squared_distribution(d)


def test_difference_signal_closed_forms(gauss_p):
    g, eps = 3e-4, -0.05
    spec = dwva(eps, gauss_p)
    d = difference_signal(postselected_spectra(spec, g, gauss_p))
    c = (1 - gauss_p.grid / spec.p0_ref) * eps
    assert np.allclose(d.values, -np.sin(2 * (c - g * gauss_p.grid)) * gauss_p.density,
                       atol=1e-12, rtol=0)
    jspec = SchemeSpec.of(Scheme.JWVA, 0.01)
    g = 1e-6
    d = difference_signal(postselected_spectra(jspec, g, gauss_p, Mode.FIRST_ORDER))
    want = 2 * (g * gauss_p.grid - 0.01) * gauss_p.density
    assert np.allclose(d.values, want, rtol=1e-4, atol=1e-12)


def test_difference_signal_rejects_single_port(gauss_p):
    pair = postselected_spectra(SchemeSpec.of(Scheme.SWVA, 0.1), 0.0, gauss_p)
    with pytest.raises(DetectionKindError):
        difference_signal(pair)


def test_squared_distribution_first_order(gauss_p):
    spec = dwva(-0.01, gauss_p)
    sq = squared_distribution(difference_signal(postselected_spectra(spec, 0.0, gauss_p, Mode.FIRST_ORDER)))
    want = (1 - gauss_p.grid / spec.p0_ref) ** 2 * gauss_p.density**2
    want /= trapezoid(want, gauss_p.grid)
    assert np.allclose(sq.density, want, rtol=1e-3, atol=1e-10)


def test_mean_shift_examples(gauss_p):
    assert mean_shift(dwva(-0.001, gauss_p), 0.0, gauss_p) == pytest.approx(0.0, abs=1e-12)
    assert mean_shift(dwva(-0.001, gauss_p), 1e-9, gauss_p) == pytest.approx(-7.2e-3, rel=0.01)
    # magnitude only: the SWVA slope sign depends on the phase convention
    shift = mean_shift(SchemeSpec.of(Scheme.SWVA, 0.01), 1e-8, gauss_p)
    assert abs(shift) == pytest.approx(2e-6, rel=0.01)


def test_signal_intensity_examples(gauss_p):
    assert signal_intensity(SchemeSpec.of(Scheme.SWVA, 0.08), 0.0, gauss_p) == pytest.approx(
        math.sin(0.08) ** 2, rel=1e-12)
    xi_j = signal_intensity(SchemeSpec.of(Scheme.JWVA, 0.003), 0.0, gauss_p)
    assert xi_j == pytest.approx(2 * 0.003, rel=1e-4)
    ratio = closed_form_intensity("DWVA", 1540, 25, 0.08) / closed_form_intensity("BWVA", 1540, 25, 0.08)
    assert ratio == pytest.approx(4 / math.sqrt(math.pi) * 1540 / 25 / 0.08, rel=1e-12)
    assert 1.5e3 < ratio < 2e3


def test_sensitivity_dwva(gauss_p):
    assert sensitivity(dwva(-0.001, gauss_p), gauss_p) == pytest.approx(-7.2e6, rel=0.01)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_sensitivity_matches_closed_forms(gauss_p, scheme):
    spec = SchemeSpec.of(scheme, -0.002).with_reference(gauss_p)
    got = sensitivity(spec, gauss_p)
    assert abs(got) == pytest.approx(abs(closed_form_slope(scheme, 60, 1, -0.002)), rel=0.01)


def test_sensitivity_first_order_mode(gauss_p):
    spec = dwva(-0.01, gauss_p)
    assert sensitivity(spec, gauss_p, Mode.FIRST_ORDER) == pytest.approx(
        sensitivity(spec, gauss_p), rel=1e-3)


def test_estimate_report(gauss_nm):
    rep = estimate(dwva(-0.01, gauss_nm), 0.0, gauss_nm)
    # the 1/λ² asymmetry of a wavelength Gaussian gives a bias near -3σ²/λ0
    assert rep.delta_p == pytest.approx(-3 * 25.0**2 / 1540.0, rel=0.01)
    assert abs(rep.sensitivity) == pytest.approx(abs(mws_rate(-0.01)), rel=0.02)
    assert rep.as_dict()["scheme"] == "DWVA"
    assert 0 < rep.xi < 1e-2


def test_calibration_gaussian_bias_zero(gauss_p):
    cal = calibrate(gauss_p, -0.01)
    assert cal.bias == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(CalibrationError):
        calibrate(gauss_p, 0.0)


def test_calibration_bias_matches_fine_oracle(skewed):
    cal = calibrate(skewed, -0.01)
    fine = make_mixture(SKEWED_COMPONENTS, n_points=40960, domain_kind=DomainKind.WAVELENGTH)
    lam, p0 = fine.grid, fine.density
    mean = trapezoid(lam * p0, lam)
    omega = 2 * math.pi * C_LIGHT / (lam * NANOMETER)
    omega_ref = 2 * math.pi * C_LIGHT / (mean * NANOMETER)
    w = (np.sin(2 * (1 - omega / omega_ref) * -0.01) * p0) ** 2
    oracle = trapezoid((lam - mean) * w, lam) / trapezoid(w, lam)
    assert abs(oracle) > 0.5
    assert cal.bias == pytest.approx(oracle, rel=1e-6)


@pytest.mark.parametrize("tau", [0.0, 1e-4])
def test_round_trip_gaussian(gauss_nm, tau):
    cal = calibrate(gauss_nm, -0.01)
    got = estimate_tau(postselected_spectra(dwva(-0.01, gauss_nm), tau, gauss_nm), cal)
    if tau == 0:
        assert abs(got) < 1e-9
    else:
        assert got == pytest.approx(tau, rel=0.01)


@pytest.mark.parametrize("tau", [1e-4, -1e-4, 1e-3])
def test_round_trip_skewed(skewed, tau):
    cal = calibrate(skewed, -0.01)
    got = estimate_tau(postselected_spectra(dwva(-0.01, skewed), tau, skewed), cal)
    assert got == pytest.approx(tau, rel=0.01)


def test_round_trip_on_raw_scale(skewed):
    cal = calibrate(skewed, -0.01)
    pair = postselected_spectra(dwva(-0.01, skewed), 1e-4, skewed)
    scaled = PostselectedPair(Spectrum(pair.axis, 37.0 * pair.p1.density),
                              Spectrum(pair.axis, 37.0 * pair.p2.density))
    assert measured_shift(scaled) == pytest.approx(measured_shift(pair), rel=1e-12)
    assert estimate_tau(scaled, cal) == pytest.approx(1e-4, rel=0.01)


def test_estimate_tau_checks(skewed, gauss_nm, gauss_p):
    cal = calibrate(skewed, -0.01)
    pair = postselected_spectra(dwva(-0.01, gauss_nm), 0.0, gauss_nm)
    with pytest.warns(UserWarning, match="fingerprint"):
        estimate_tau(pair, cal)
    generic = postselected_spectra(dwva(-0.01, gauss_p), 0.0, gauss_p)
    with pytest.raises(ParameterError):
        estimate_tau(generic, cal)


def test_calibration_text_round_trip(skewed):
    cal = calibrate(skewed, -0.01)
    text = cal.to_text(["run a"])
    assert text.startswith("# run a\n")
    assert Calibration.from_text(text) == cal
    with pytest.raises(SpectrumFormatError):
        Calibration.from_text("epsilon=-0.01\n")


def test_mws_rate():
    assert abs(mws_rate(-0.01)) == pytest.approx(376.7, abs=0.05)
    assert abs(mws_rate(-0.08)) == pytest.approx(47.1, abs=0.05)
    with pytest.raises(ParameterError):
        mws_rate(0.0)


def test_intensity_closed_form_gaps():
    for scheme, gap in (("DWVA", math.sqrt(2)), ("BWVA", 2.0), ("SWVA", 1.0), ("JWVA", 1.0)):
        ratio = quadrature_intensity_gaussian(scheme, 60, 1, 0.01) / closed_form_intensity(scheme, 60, 1, 0.01)
        assert ratio == pytest.approx(gap, rel=1e-12)


def test_gaussian_squared_moments(gauss_p):
    sq = squared_distribution(difference_signal(postselected_spectra(dwva(-0.01, gauss_p), 0.0, gauss_p)))
    # (p - p0)² P0² has variance 3σ²/2 about p0
    assert moments(sq).variance == pytest.approx(1.5, rel=1e-3)


def test_swva_jwva_sensitivity_ratio(gauss_p):
    s = sensitivity(SchemeSpec.of(Scheme.SWVA, -0.001), gauss_p)
    j = sensitivity(SchemeSpec.of(Scheme.JWVA, -0.001), gauss_p)
    assert s / j == pytest.approx(2.0, rel=0.02)
