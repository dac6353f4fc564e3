"""Two-level system states, weak values and post-selected pointer spectra.

Phase convention
----------------
The system observable is ``A = diag(+1, -1)`` in the ``{|+1>, |-1>}`` basis and
the coupling is ``U(g) = cos(g p)·1 - i sin(g p)·A``. Initial states carry the
phase bias ``X`` as ``(e^{iX}, e^{-iX})/√2`` where ``X = ε`` for product
initialization (PI) and ``X = C = (1 - p/p0)·ε`` for entangled
initialization (EI). Dual detection projects on ``|f1> = (1, i)/√2`` and
``|f2> = (1, -i)/√2``; single detection on ``(1, -1)/√2``.

With these choices the exact post-selection weights are

* DD: ``w1,2 = ½[1 ∓ sin 2(X - gp)]``
* SD: ``w = sin²(X - gp)``

the DD weak values are ``A_w1 = i(1 + sin 2X)/cos 2X`` and
``A_w2 = -i(1 - sin 2X)/cos 2X``, and the first-order expansion of ``w1,2`` is
``½[1 ∓ sin 2X](1 + 2gp·Im A_wk)``.

For optical axes the pointer is the angular frequency ω and the coupling is a
time delay τ given in attoseconds, so the coupling phase is ``ω·τ·1e-18``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, RegimeError, SingularityError
from .spectrum import (
    ATTOSECOND,
    C_LIGHT,
    NANOMETER,
    DomainKind,
    SpectralAxis,
    Spectrum,
    moments,
)

SINGULARITY_MARGIN = 1e-6
FIRST_ORDER_MAX_PHASE = 0.1
FIRST_ORDER_MAX_EPSILON = 0.3
MAX_EPSILON = 0.5

_A = np.array([1.0, -1.0])


class InitialKind(str, enum.Enum):
    PI = "PI"
    EI = "EI"


class DetectionKind(str, enum.Enum):
    SD = "SD"
    DD = "DD"


class Mode(str, enum.Enum):
    EXACT = "exact"
    FIRST_ORDER = "first-order"


class Scheme(str, enum.Enum):
    SWVA = "SWVA"
    BWVA = "BWVA"
    JWVA = "JWVA"
    DWVA = "DWVA"

    @property
    def initial_kind(self) -> InitialKind:
        return _SCHEME_KINDS[self][0]

    @property
    def detection_kind(self) -> DetectionKind:
        return _SCHEME_KINDS[self][1]


_SCHEME_KINDS = {
    Scheme.SWVA: (InitialKind.PI, DetectionKind.SD),
    Scheme.BWVA: (InitialKind.EI, DetectionKind.SD),
    Scheme.JWVA: (InitialKind.PI, DetectionKind.DD),
    Scheme.DWVA: (InitialKind.EI, DetectionKind.DD),
}
_KINDS_SCHEME = {v: k for k, v in _SCHEME_KINDS.items()}


@dataclass(frozen=True)
class SystemState:
    amp_plus: complex
    amp_minus: complex

    def __post_init__(self):
        norm = abs(self.amp_plus) ** 2 + abs(self.amp_minus) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ParameterError(f"system state not normalized: norm² = {norm!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_plus, self.amp_minus], dtype=complex)

    def inner(self, other: "SystemState") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.vector, other.vector))


@dataclass(frozen=True)
class SchemeSpec:
    """Initial and detection kinds plus the phase bias.

    ``p0_ref`` is the EI modulation reference in axis units. ``None`` means
    "use the measured mean of the spectrum being processed".
    """

    initial_kind: InitialKind
    detection_kind: DetectionKind
    epsilon: float
    p0_ref: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "initial_kind", InitialKind(self.initial_kind))
        object.__setattr__(self, "detection_kind", DetectionKind(self.detection_kind))
        if not np.isfinite(self.epsilon) or abs(self.epsilon) >= MAX_EPSILON:
            raise ParameterError(f"|epsilon| must be below {MAX_EPSILON}, got {self.epsilon}")
        if self.p0_ref is not None and not (np.isfinite(self.p0_ref) and self.p0_ref > 0):
            raise ParameterError(f"p0_ref must be positive, got {self.p0_ref}")

    @classmethod
    def of(cls, scheme, epsilon: float, p0_ref: Optional[float] = None) -> "SchemeSpec":
        scheme = Scheme(scheme)
        return cls(scheme.initial_kind, scheme.detection_kind, epsilon, p0_ref)

    @property
    def scheme(self) -> Scheme:
        return _KINDS_SCHEME[(self.initial_kind, self.detection_kind)]

    def with_reference(self, s: Spectrum) -> "SchemeSpec":
        if self.p0_ref is not None:
            return self
        return SchemeSpec(self.initial_kind, self.detection_kind, self.epsilon, moments(s).mean)


@dataclass(frozen=True)
class PostselectedPair:
    """Output spectra of one run; ``p2`` is ``None`` for single detection.

    Both spectra are unnormalized: their mass is the post-selection probability.
    """

    p1: Spectrum
    p2: Optional[Spectrum]
    mode: Mode = Mode.EXACT
    scheme: Optional[SchemeSpec] = None
    coupling: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.p2 is not None and not self.p1.axis.same_as(self.p2.axis):
            raise ParameterError("post-selected spectra must share one axis")

    @property
    def axis(self) -> SpectralAxis:
        return self.p1.axis

    def total(self) -> Spectrum:
        """Pointwise ``p1 + p2`` (the full input for DD)."""
        d = self.p1.density if self.p2 is None else self.p1.density + self.p2.density
        return Spectrum(self.axis, d)


# ---------------------------------------------------------------- states


def _bias_phase(kind: InitialKind, epsilon, p, p0_ref):
    if InitialKind(kind) is InitialKind.PI:
        return np.broadcast_to(np.asarray(epsilon, dtype=float), np.shape(p)).astype(float)
    if not p0_ref > 0:
        raise ParameterError(f"p0_ref must be positive, got {p0_ref}")
    return (1.0 - np.asarray(p, dtype=float) / p0_ref) * epsilon


def _initial_amplitudes(bias) -> np.ndarray:
    bias = np.asarray(bias, dtype=float)
    return np.stack([np.exp(1j * bias), np.exp(-1j * bias)], axis=-1) / np.sqrt(2)


def initial_state(kind, epsilon: float, p: float, p0_ref: float) -> SystemState:
    """System state prepared for pointer value ``p``.

    PI ignores ``p``; EI uses the bias ``C = (1 - p/p0_ref)·ε``.
    """
    if not p0_ref > 0:
        raise ParameterError(f"p0_ref must be positive, got {p0_ref}")
    amps = _initial_amplitudes(_bias_phase(kind, epsilon, p, p0_ref))
    return SystemState(complex(amps[0]), complex(amps[1]))


_R2 = 1 / np.sqrt(2)
F_DD = (SystemState(_R2, 1j * _R2), SystemState(_R2, -1j * _R2))
F_SD = (SystemState(_R2, -_R2),)


def final_states(kind) -> tuple[SystemState, ...]:
    return F_DD if DetectionKind(kind) is DetectionKind.DD else F_SD


def weak_value_of(final: SystemState, initial: SystemState) -> complex:
    """``<f|A|ψ> / <f|ψ>`` by direct evaluation."""
    num = np.vdot(final.vector, _A * initial.vector)
    den = np.vdot(final.vector, initial.vector)
    if abs(den) < 1e-300:
        raise SingularityError("final and initial states are orthogonal")
    return complex(num / den)


def _check_dd_domain(bias):
    if np.any(np.abs(2 * np.asarray(bias)) >= np.pi / 2 - SINGULARITY_MARGIN):
        raise SingularityError(
            "weak value undefined: |2(1 - p/p0)ε| is within the margin of π/2"
        )


def _dd_weak_values(bias):
    """Imaginary parts of ``(A_w1, A_w2)`` for bias phase ``bias``."""
    _check_dd_domain(bias)
    s, c = np.sin(2 * bias), np.cos(2 * bias)
    return (1 + s) / c, -(1 - s) / c


def weak_value(k: int, p: float, epsilon: float, p0_ref: float) -> complex:
    """Dual-detection weak value ``A_wk`` of the entangled initial state."""
    if k not in (1, 2):
        raise ParameterError(f"k must be 1 or 2, got {k}")
    bias = _bias_phase(InitialKind.EI, epsilon, p, p0_ref)
    im = _dd_weak_values(bias)[k - 1]
    return complex(0.0, float(im))


def zeta(k: int, g: float, p: float, epsilon: float, p0_ref: float) -> float:
    """Shape factor ``cos²(gp) + sin²(gp)|A_wk|² + sin(2gp)·Im A_wk``."""
    a = weak_value(k, p, epsilon, p0_ref)
    gp = g * p
    return float(np.cos(gp) ** 2 + np.sin(gp) ** 2 * abs(a) ** 2 + np.sin(2 * gp) * a.imag)


# ---------------------------------------------------------------- evolution


def _weights_exact(initial_kind, detection_kind, epsilon, kappa, kappa_ref, g):
    """Post-selection weights by explicit 2×2 evolution and projection.

    ``kappa`` is the pointer in coupling-phase units (phase = g·kappa).
    Returns an array of shape ``(n_final, len(kappa))``.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    psi = _initial_amplitudes(_bias_phase(initial_kind, epsilon, kappa, kappa_ref))
    theta = g * kappa
    unitary = np.zeros(kappa.shape + (2, 2), dtype=complex)
    unitary[..., 0, 0] = np.cos(theta) - 1j * np.sin(theta)
    unitary[..., 1, 1] = np.cos(theta) + 1j * np.sin(theta)
    evolved = np.einsum("nij,nj->ni", unitary, psi)
    finals = np.array([f.vector for f in final_states(detection_kind)])
    amps = np.einsum("ki,ni->kn", finals.conj(), evolved)
    return np.abs(amps) ** 2


def _weights_first_order(initial_kind, detection_kind, epsilon, kappa, kappa_ref, g):
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    theta = g * kappa
    if np.max(np.abs(theta)) > FIRST_ORDER_MAX_PHASE:
        raise RegimeError(
            f"first-order mode needs |g·p| <= {FIRST_ORDER_MAX_PHASE}, "
            f"got {np.max(np.abs(theta)):.3g}"
        )
    if abs(epsilon) > FIRST_ORDER_MAX_EPSILON:
        raise RegimeError(f"first-order mode needs |ε| <= {FIRST_ORDER_MAX_EPSILON}")
    bias = _bias_phase(initial_kind, epsilon, kappa, kappa_ref)
    if DetectionKind(detection_kind) is DetectionKind.DD:
        im1, im2 = _dd_weak_values(bias)
        s = np.sin(2 * bias)
        w = np.array([0.5 * (1 - s) * (1 + 2 * theta * im1), 0.5 * (1 + s) * (1 + 2 * theta * im2)])
    else:
        # |<f|ψ>|²·Im A_w written as Im(<f|ψ>*·<f|A|ψ>) stays finite where <f|ψ> = 0
        psi = _initial_amplitudes(bias)
        f = F_SD[0].vector.conj()
        overlap = psi @ f
        a_overlap = (psi * _A) @ f
        w = (np.abs(overlap) ** 2 + 2 * theta * np.imag(overlap.conj() * a_overlap))[None, :]
    if np.any(w < 0):
        raise RegimeError("first-order spectrum turned negative; coupling outside the linear regime")
    return w


def pointer_phase(axis: SpectralAxis, p0_ref: float) -> tuple[np.ndarray, float]:
    """Pointer values and EI reference in coupling-phase units for ``axis``.

    Generic axes use the grid directly. Optical axes use angular frequency in
    rad/as so that a coupling given in attoseconds yields a phase in radians.
    ``p0_ref`` is in axis units; for wavelength axes it is a wavelength and
    maps to the reference frequency 2πc/p0_ref.
    """
    kind = axis.domain_kind
    if kind is DomainKind.GENERIC:
        return axis.grid, float(p0_ref)
    kappa = axis.angular_frequency() * ATTOSECOND
    if kind is DomainKind.ANGULAR_FREQUENCY:
        return kappa, float(p0_ref) * ATTOSECOND
    return kappa, 2 * np.pi * C_LIGHT / (p0_ref * NANOMETER) * ATTOSECOND


def evolve_exact(scheme: SchemeSpec, g: float, p) -> tuple:
    """Exact post-selection weights at pointer value(s) ``p`` (generic units).

    Returns ``(w1, w2)`` for dual detection and ``(w,)`` for single detection;
    scalars in, floats out.
    """
    ref = scheme.p0_ref if scheme.p0_ref is not None else 1.0
    if scheme.initial_kind is InitialKind.EI and scheme.p0_ref is None:
        raise ParameterError("EI evolution needs an explicit p0_ref")
    w = _weights_exact(scheme.initial_kind, scheme.detection_kind, scheme.epsilon, p, ref, g)
    if np.ndim(p) == 0:
        return tuple(float(x[0]) for x in w)
    return tuple(w)


def postselected_spectra(
    scheme: SchemeSpec, g: float, s: Spectrum, mode=Mode.EXACT
) -> PostselectedPair:
    """Apply the post-selection weights of ``scheme`` at coupling ``g`` to ``s``.

    ``g`` is dimensionless-per-axis-unit on generic axes and attoseconds on
    optical axes.
    """
    mode = Mode(mode)
    scheme = scheme.with_reference(s)
    kappa, kappa_ref = pointer_phase(s.axis, scheme.p0_ref)
    fn = _weights_exact if mode is Mode.EXACT else _weights_first_order
    w = fn(scheme.initial_kind, scheme.detection_kind, scheme.epsilon, kappa, kappa_ref, g)
    w = np.clip(w, 0.0, None)  # -0.0 and sub-ulp negatives from |.|² round-off
    spectra = [Spectrum(s.axis, wk * s.density) for wk in w]
    p2 = spectra[1] if len(spectra) > 1 else None
    return PostselectedPair(spectra[0], p2, mode=mode, scheme=scheme, coupling=g)
