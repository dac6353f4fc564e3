"""Pointer spectra: representation, generation, ingestion and transforms.

A spectrum is a nonnegative density sampled on a strictly increasing grid.
All integrals use the composite trapezoid rule on the stored grid.
"""

from __future__ import annotations

import enum
import hashlib
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ParameterError, SpectrumFormatError

C_LIGHT = 299_792_458.0  # m/s, exact
ATTOSECOND = 1e-18  # s
NANOMETER = 1e-9  # m

MIN_POINTS = 8
NORMALIZATION_RTOL = 1e-9


class DomainKind(str, enum.Enum):
    GENERIC = "generic"
    ANGULAR_FREQUENCY = "angular-frequency"
    WAVELENGTH = "wavelength"

    @property
    def unit(self) -> str:
        return _DOMAIN_UNITS[self]

    @property
    def is_optical(self) -> bool:
        return self is not DomainKind.GENERIC

    @classmethod
    def from_unit(cls, unit: str) -> "DomainKind":
        try:
            return _UNIT_DOMAINS[unit]
        except KeyError:
            raise SpectrumFormatError(
                f"unknown position unit {unit!r}; expected one of {sorted(_UNIT_DOMAINS)}"
            ) from None


_DOMAIN_UNITS = {
    DomainKind.GENERIC: "dimensionless",
    DomainKind.ANGULAR_FREQUENCY: "rad/s",
    DomainKind.WAVELENGTH: "nm",
}
_UNIT_DOMAINS = {v: k for k, v in _DOMAIN_UNITS.items()}


def trapezoid(y, x) -> float:
    return float(np.trapezoid(y, x))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralAxis:
    domain_kind: DomainKind
    grid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "domain_kind", DomainKind(self.domain_kind))
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < MIN_POINTS:
            raise ParameterError(f"axis grid needs at least {MIN_POINTS} points, got {grid.size}")
        if not np.all(np.isfinite(grid)):
            raise ParameterError("axis grid contains non-finite values")
        if not np.all(np.diff(grid) > 0):
            raise ParameterError("axis grid must be strictly increasing")
        object.__setattr__(self, "grid", _frozen(grid))

    def __len__(self):
        return self.grid.size

    def same_as(self, other: "SpectralAxis") -> bool:
        return (
            self.domain_kind is other.domain_kind
            and self.grid.shape == other.grid.shape
            and bool(np.array_equal(self.grid, other.grid))
        )

    def angular_frequency(self) -> np.ndarray:
        """Grid expressed as optical angular frequency in rad/s."""
        if self.domain_kind is DomainKind.ANGULAR_FREQUENCY:
            return self.grid
        if self.domain_kind is DomainKind.WAVELENGTH:
            return 2 * np.pi * C_LIGHT / (self.grid * NANOMETER)
        raise ParameterError("a generic pointer axis has no optical frequency")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sampled pointer density.

    ``clipped`` records that negative input samples were set to zero during
    ingestion.
    """

    axis: SpectralAxis
    density: np.ndarray
    normalized: bool = False
    clipped: bool = False

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != self.axis.grid.shape:
            raise ParameterError(
                f"density has shape {d.shape}, axis grid has shape {self.axis.grid.shape}"
            )
        if not np.all(np.isfinite(d)):
            raise ParameterError("density contains non-finite values")
        if np.any(d < 0):
            raise ParameterError("density must be nonnegative")
        object.__setattr__(self, "density", _frozen(d))
        if self.normalized:
            total = trapezoid(d, self.axis.grid)
            if abs(total - 1.0) > NORMALIZATION_RTOL:
                raise ParameterError(f"spectrum flagged normalized integrates to {total!r}")

    @property
    def grid(self) -> np.ndarray:
        return self.axis.grid

    @property
    def domain_kind(self) -> DomainKind:
        return self.axis.domain_kind

    def mass(self) -> float:
        return trapezoid(self.density, self.grid)

    def normalize(self) -> "Spectrum":
        if self.normalized:
            return self
        return _normalized(self.axis, self.density, clipped=self.clipped)


def _normalized(axis: SpectralAxis, density, clipped: bool = False) -> Spectrum:
    density = np.asarray(density, dtype=float)
    total = trapezoid(density, axis.grid)
    if not total > 0:
        raise ParameterError("cannot normalize a density with zero mass")
    density = density / total
    # one corrective pass absorbs the rounding of the first division
    density = density / trapezoid(density, axis.grid)
    return Spectrum(axis, density, normalized=True, clipped=clipped)


@dataclass(frozen=True)
class GaussianModel:
    center: float
    width: float

    def __post_init__(self):
        if not (np.isfinite(self.center) and np.isfinite(self.width)):
            raise ParameterError("Gaussian parameters must be finite")
        if self.width <= 0:
            raise ParameterError(f"Gaussian width must be positive, got {self.width}")
        if self.center <= 0:
            raise ParameterError(f"Gaussian center must be positive, got {self.center}")
        if self.center / self.width <= 1:
            raise ParameterError("Gaussian center must exceed its width")


def make_gaussian(
    model: GaussianModel,
    half_width_sigmas: float = 8.0,
    n_points: int = 4096,
    domain_kind: DomainKind = DomainKind.GENERIC,
) -> Spectrum:
    """Normalized Gaussian on a uniform grid ``center ± k·width``."""
    if n_points < MIN_POINTS:
        raise ParameterError(f"n_points must be at least {MIN_POINTS}")
    if half_width_sigmas < 4:
        raise ParameterError("half_width_sigmas must be at least 4")
    lo = model.center - half_width_sigmas * model.width
    if lo <= 0 and DomainKind(domain_kind).is_optical:
        raise ParameterError("optical grid would reach zero or negative positions")
    grid = np.linspace(lo, model.center + half_width_sigmas * model.width, n_points)
    z = (grid - model.center) / model.width
    density = np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * model.width)
    return _normalized(SpectralAxis(domain_kind, grid), density)


def make_mixture(
    components: Sequence[tuple[float, float, float]],
    half_width_sigmas: float = 8.0,
    n_points: int = 4096,
    domain_kind: DomainKind = DomainKind.GENERIC,
) -> Spectrum:
    """Normalized mixture of Gaussians given as ``(weight, center, width)`` triples.

    The grid spans every component out to ``half_width_sigmas`` of its width.
    """
    if not components:
        raise ParameterError("mixture needs at least one component")
    if n_points < MIN_POINTS:
        raise ParameterError(f"n_points must be at least {MIN_POINTS}")
    comps = np.array(components, dtype=float).reshape(-1, 3)
    if np.any(comps[:, 0] <= 0) or np.any(comps[:, 2] <= 0):
        raise ParameterError("mixture weights and widths must be positive")
    lo = float(np.min(comps[:, 1] - half_width_sigmas * comps[:, 2]))
    hi = float(np.max(comps[:, 1] + half_width_sigmas * comps[:, 2]))
    if lo <= 0 and DomainKind(domain_kind).is_optical:
        raise ParameterError("optical grid would reach zero or negative positions")
    grid = np.linspace(lo, hi, n_points)
    density = np.zeros_like(grid)
    for w, c, s in comps:
        density += w * np.exp(-0.5 * ((grid - c) / s) ** 2) / (np.sqrt(2 * np.pi) * s)
    return _normalized(SpectralAxis(domain_kind, grid), density)


# Skewed two-lobe broadband source, mean near 1540 nm and overall width near 25 nm.
SLD_LIKE_COMPONENTS = ((0.75, 1535.0, 18.0), (0.25, 1556.0, 14.0))
# strongly skewed two-lobe spectrum, handy for calibration checks
SKEWED_COMPONENTS = ((0.62, 1530.0, 15.0), (0.38, 1557.0, 20.0))


def sld_like_spectrum(n_points: int = 4096) -> Spectrum:
    """Synthetic non-Gaussian broadband wavelength spectrum (nm)."""
    return make_mixture(SLD_LIKE_COMPONENTS, n_points=n_points, domain_kind=DomainKind.WAVELENGTH)


def load_spectrum(
    table: Iterable[Sequence[float]],
    domain_kind: DomainKind,
    normalize: bool = True,
) -> Spectrum:
    """Build a spectrum from ``(position, intensity)`` rows.

    Rows are sorted by position. Extra columns are ignored. Negative intensities
    (detector noise) are clipped to zero, which sets ``clipped`` and emits a
    warning. With ``normalize=False`` the raw intensity scale is kept, which is
    what paired port measurements need.
    """
    try:
        rows = np.array([tuple(r)[:2] for r in table], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpectrumFormatError(f"spectrum table is not numeric: {exc}") from None
    if rows.ndim != 2 or rows.shape[0] < MIN_POINTS or rows.shape[1] < 2:
        raise SpectrumFormatError(
            f"spectrum needs at least {MIN_POINTS} rows of (position, intensity)"
        )
    if not np.all(np.isfinite(rows)):
        raise SpectrumFormatError("spectrum contains non-finite entries")
    rows = rows[np.argsort(rows[:, 0], kind="stable")]
    positions, intensity = rows[:, 0], rows[:, 1]
    if not np.all(np.diff(positions) > 0):
        raise SpectrumFormatError("spectrum positions must be distinct")
    clipped = bool(np.any(intensity < 0))
    if clipped:
        n_neg = int(np.count_nonzero(intensity < 0))
        warnings.warn(f"clipped {n_neg} negative intensity sample(s) to zero", stacklevel=2)
        intensity = np.clip(intensity, 0.0, None)
    if not np.any(intensity > 0):
        raise SpectrumFormatError("spectrum intensities are all zero")
    try:
        axis = SpectralAxis(domain_kind, positions)
    except ParameterError as exc:
        raise SpectrumFormatError(str(exc)) from None
    if normalize:
        return _normalized(axis, intensity, clipped=clipped)
    return Spectrum(axis, intensity, clipped=clipped)


_SPLIT = re.compile(r"[,\s;]+")


def parse_spectrum_text(text: str) -> list[tuple[float, ...]]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f for f in _SPLIT.split(line) if f]
        if len(fields) < 2:
            raise SpectrumFormatError(f"line {lineno}: expected position and intensity")
        try:
            rows.append(tuple(float(f) for f in fields))
        except ValueError:
            raise SpectrumFormatError(f"line {lineno}: non-numeric field in {raw!r}") from None
    return rows


def read_spectrum(path, domain_kind: DomainKind, normalize: bool = True) -> Spectrum:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpectrumFormatError(f"cannot read spectrum file {path}: {exc}") from None
    return load_spectrum(parse_spectrum_text(text), domain_kind, normalize=normalize)


def format_spectrum(s: Spectrum, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(f"# normalized={'true' if s.normalized else 'false'}")
    lines.append(f"# position_unit={s.domain_kind.unit}")
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in zip(s.grid, s.density))
    return "\n".join(lines) + "\n"


def write_spectrum(path, s: Spectrum, header: Sequence[str] = ()) -> None:
    Path(path).write_text(format_spectrum(s, header))


class Moments(NamedTuple):
    mean: float
    variance: float


def moments(s: Spectrum) -> Moments:
    """Trapezoid mean and central second moment, normalizing first if needed."""
    s = s.normalize()
    x, d = s.grid, s.density
    mean = trapezoid(x * d, x)
    variance = trapezoid((x - mean) ** 2 * d, x)
    if np.count_nonzero(d) <= 1 or variance <= 0:
        warnings.warn("degenerate spectrum: mass concentrated on a single point", stacklevel=2)
        variance = 0.0
    return Moments(mean, variance)


def square_normalize(s: Spectrum) -> Spectrum:
    """Pointwise square of the density, renormalized."""
    return _normalized(s.axis, s.normalize().density ** 2)


def convert_domain(
    s: Spectrum, target: DomainKind, include_jacobian: bool = True
) -> Spectrum:
    """Map between wavelength (nm) and angular frequency (rad/s) via λ = 2πc/ω.

    With ``include_jacobian`` the density is transformed as a probability
    density, so that integrals of the converted spectrum are unchanged.
    Without it the samples are carried over as-is. The result is renormalized
    either way.
    """
    target = DomainKind(target)
    source = s.domain_kind
    optical = {DomainKind.WAVELENGTH, DomainKind.ANGULAR_FREQUENCY}
    if source not in optical or target not in optical:
        raise ParameterError("domain conversion is defined between wavelength and angular frequency")
    if source is target:
        return s.normalize()
    x = s.grid
    if np.any(x <= 0):
        raise ParameterError("cannot convert a grid containing zero or negative positions")
    if source is DomainKind.WAVELENGTH:
        new_x = 2 * np.pi * C_LIGHT / (x * NANOMETER)
        jac = (x * NANOMETER) ** 2 / (2 * np.pi * C_LIGHT) / NANOMETER  # |dλ/dω| in nm per rad/s
    else:
        new_x = 2 * np.pi * C_LIGHT / x / NANOMETER
        jac = x**2 * NANOMETER / (2 * np.pi * C_LIGHT)  # |dω/dλ| in rad/s per nm
    density = s.density * jac if include_jacobian else s.density.copy()
    order = np.argsort(new_x)
    return _normalized(SpectralAxis(target, new_x[order]), density[order], clipped=s.clipped)


def resample(s: Spectrum, axis: SpectralAxis) -> Spectrum:
    """Linear interpolation onto ``axis``; zero outside the source support."""
    if axis.domain_kind is not s.domain_kind:
        raise ParameterError("resample target must share the source domain kind")
    density = np.interp(axis.grid, s.grid, s.density, left=0.0, right=0.0)
    return _normalized(axis, density, clipped=s.clipped)


def fingerprint(s: Spectrum) -> str:
    """Content hash of a spectrum's shape, robust to last-digit rounding."""
    n = s.normalize()
    h = hashlib.sha256()
    h.update(n.domain_kind.value.encode())
    for x, y in zip(n.grid, n.density):
        h.update(f"{x:.12g}:{y:.9g};".encode())
    return h.hexdigest()[:16]


def grid_hash(axis: SpectralAxis) -> str:
    h = hashlib.sha256(axis.domain_kind.value.encode())
    h.update(np.ascontiguousarray(axis.grid, dtype="<f8").tobytes())
    return h.hexdigest()[:10]
