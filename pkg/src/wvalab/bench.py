"""Scheme comparison table and parameter sweeps, with CSV/JSON writers."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import Mode, Scheme, SchemeSpec, postselected_spectra
from .errors import FeasibilityError, ParameterError, WVAError
from .estimator import (
    _intensity_from_pair,
    _shift_from_pair,
    closed_form_intensity,
    sensitivity,
)
from .spectrum import DomainKind, Spectrum, grid_hash, moments

SCHEME_ORDER = (Scheme.SWVA, Scheme.BWVA, Scheme.JWVA, Scheme.DWVA)

_FORMULAS = {
    Scheme.SWVA: "2*sigma^2/sqrt(xi)",
    Scheme.BWVA: "sqrt(2)*p0*sigma/sqrt(xi)",
    Scheme.JWVA: "2*sigma^2/xi",
    Scheme.DWVA: "4*p0*sigma/(sqrt(pi)*xi)",
}


@dataclass(frozen=True)
class ComparisonRow:
    scheme: Scheme
    formula: str
    epsilon: float
    sensitivity: float
    relative_sensitivity: float
    simulated_relative: float


def _solve_epsilon(scheme: Scheme, xi: float, ratio: float) -> float:
    """Phase bias at which the scheme's leading-order intensity equals ``xi`` (σ = 1)."""
    if scheme is Scheme.SWVA:
        return math.sqrt(xi)
    if scheme is Scheme.BWVA:
        return math.sqrt(2 * xi) * ratio
    if scheme is Scheme.JWVA:
        return xi / 2
    return math.sqrt(math.pi) * xi * ratio / 2


def compare_table(
    xi_budget: float = 1e-4, ratio_p0_sigma: float = 60.0, max_phase: float = math.pi / 2
) -> list[ComparisonRow]:
    """Highest sensitivity of each scheme under a signal-intensity budget.

    Each scheme's intensity formula is solved for ε at ``xi_budget`` and its
    slope formula evaluated there (σ = 1, p0 = ``ratio_p0_sigma``). The
    budget is infeasible for a scheme when the phase it needs (ε for product
    initialization, the one-sigma phase ε·σ/p0 for entangled initialization)
    reaches ``max_phase``.
    """
    if not (0 < xi_budget <= 1):
        raise ParameterError(f"xi budget must lie in (0, 1], got {xi_budget}")
    if not ratio_p0_sigma >= 1:
        raise ParameterError(f"p0/sigma must be at least 1, got {ratio_p0_sigma}")
    p0, sigma = float(ratio_p0_sigma), 1.0
    solved = {}
    for scheme in SCHEME_ORDER:
        eps = _solve_epsilon(scheme, xi_budget, p0)
        phase = eps if scheme.initial_kind.value == "PI" else eps * sigma / p0
        if phase >= max_phase:
            raise FeasibilityError(
                f"{scheme.value} needs phase {phase:.3g} rad >= {max_phase:.3g} "
                f"to reach xi = {xi_budget:g}",
                scheme=scheme,
            )
        check = closed_form_intensity(scheme, p0, sigma, eps)
        assert math.isclose(check, xi_budget, rel_tol=1e-12)
        sens = {
            Scheme.SWVA: 2 * sigma**2 / eps,
            Scheme.BWVA: 2 * p0**2 / eps,
            Scheme.JWVA: sigma**2 / eps,
            Scheme.DWVA: 2 * p0**2 / eps,
        }[scheme]
        solved[scheme] = (eps, sens)
    ref = solved[Scheme.SWVA][1]
    # table formulas evaluated directly; must agree with the solved slopes
    direct = {
        Scheme.SWVA: 1.0,
        Scheme.BWVA: p0 / (math.sqrt(2) * sigma),
        Scheme.JWVA: 1 / math.sqrt(xi_budget),
        Scheme.DWVA: 2 * p0 / (math.sqrt(math.pi * xi_budget) * sigma),
    }
    return [
        ComparisonRow(
            scheme=s,
            formula=_FORMULAS[s],
            epsilon=solved[s][0],
            sensitivity=solved[s][1],
            relative_sensitivity=direct[s],
            simulated_relative=solved[s][1] / ref,
        )
        for s in SCHEME_ORDER
    ]


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    epsilon: float
    coupling: float
    delta_p: float
    xi: float
    rate: float = math.nan
    sensitivity: float = math.nan
    relative_sensitivity: float = math.nan
    xi_bwva: float = math.nan
    grid_hash: str = ""
    error: str = ""


@dataclass
class SweepResult:
    variable: str
    grid: np.ndarray
    rows: list[SweepRow]
    domain_kind: DomainKind = DomainKind.GENERIC
    label: str = ""
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.size and not (np.all(np.diff(self.grid) > 0) or np.all(np.diff(self.grid) < 0)):
            raise ParameterError("sweep grid must be strictly monotone")

    def column(self, name: str, scheme: Optional[str] = None) -> np.ndarray:
        return np.array(
            [getattr(r, name) for r in self.rows if scheme is None or r.scheme == scheme]
        )


def _units(domain: DomainKind) -> dict:
    if domain is DomainKind.WAVELENGTH:
        return {"coupling": "tau_as", "delta_p": "mws_nm", "rate": "mwsr_nm_per_as",
                "sensitivity": "sensitivity_nm_per_as"}
    if domain is DomainKind.ANGULAR_FREQUENCY:
        return {"coupling": "tau_as", "delta_p": "shift_rad_per_s", "rate": "rate_rad_per_s_per_as",
                "sensitivity": "sensitivity_rad_per_s_per_as"}
    return {"coupling": "g_per_p", "delta_p": "delta_p", "rate": "ddelta_p_dg",
            "sensitivity": "sensitivity_p_per_g"}


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("sweep grid is empty")
    if not np.all(np.isfinite(grid)):
        raise ParameterError("sweep grid contains non-finite values")
    return grid


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sweep_epsilon(
    schemes: Sequence,
    epsilon_grid,
    spectrum: Spectrum,
    normalize_to: Optional[tuple] = (Scheme.SWVA, -0.001),
    workers: int = 1,
) -> SweepResult:
    """Sensitivity and intensity at zero coupling for each scheme and ε.

    ``normalize_to=(scheme, ε)`` fills ``relative_sensitivity`` as the
    magnitude ratio to that reference point; ``None`` leaves it NaN.
    """
    grid = _check_grid(epsilon_grid)
    s = spectrum.normalize()
    mean = moments(s).mean
    ghash = grid_hash(s.axis)
    schemes = [Scheme(x) for x in schemes]

    def point(args):
        scheme, eps = args
        try:
            spec = SchemeSpec.of(scheme, float(eps)).with_reference(s)
            pair = postselected_spectra(spec, 0.0, s)
            return SweepRow(
                scheme=scheme.value,
                epsilon=float(eps),
                coupling=0.0,
                delta_p=_shift_from_pair(pair, mean),
                xi=_intensity_from_pair(pair),
                sensitivity=sensitivity(spec, s),
                grid_hash=ghash,
            )
        except WVAError as exc:
            return SweepRow(scheme.value, float(eps), 0.0, math.nan, math.nan,
                            grid_hash=ghash, error=f"{type(exc).__name__}: {exc}")

    rows = _map(point, [(sc, e) for sc in schemes for e in grid], workers)
    if normalize_to is not None:
        ref_scheme, ref_eps = Scheme(normalize_to[0]), float(normalize_to[1])
        ref = next((r.sensitivity for r in rows
                    if r.scheme == ref_scheme.value and r.epsilon == ref_eps), None)
        if ref is None or not math.isfinite(ref):
            ref = sensitivity(SchemeSpec.of(ref_scheme, ref_eps), s)
        rows = [_replace(r, relative_sensitivity=abs(r.sensitivity / ref)) for r in rows]
    return SweepResult("epsilon", grid, rows, s.domain_kind, label="sweep_epsilon",
                       columns=("scheme", "epsilon", "coupling", "delta_p", "xi", "sensitivity",
                                "relative_sensitivity", "grid_hash", "error"))


def _replace(row: SweepRow, **changes) -> SweepRow:
    data = {f.name: getattr(row, f.name) for f in fields(row)}
    data.update(changes)
    return SweepRow(**data)


def sweep_tau(
    spectrum: Spectrum,
    epsilon: float,
    tau_grid,
    mode=Mode.EXACT,
    scheme=Scheme.DWVA,
    compare_bwva: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Shift, shift rate and intensity along a coupling grid.

    The rate uses centered differences inside the grid and one-sided
    differences at its ends.
    """
    grid = _check_grid(tau_grid)
    if grid.size >= 2 and not np.all(np.diff(grid) > 0):
        raise ParameterError("tau grid must be strictly increasing")
    s = spectrum.normalize()
    mean = moments(s).mean
    ghash = grid_hash(s.axis)
    spec = SchemeSpec.of(scheme, epsilon).with_reference(s)
    bwva = SchemeSpec.of(Scheme.BWVA, epsilon, spec.p0_ref)

    def point(tau):
        pair = postselected_spectra(spec, float(tau), s, mode)
        xi_b = _intensity_from_pair(postselected_spectra(bwva, float(tau), s)) if compare_bwva else math.nan
        return SweepRow(scheme=spec.scheme.value, epsilon=float(epsilon), coupling=float(tau),
                        delta_p=_shift_from_pair(pair, mean), xi=_intensity_from_pair(pair),
                        xi_bwva=xi_b, grid_hash=ghash)

    rows = _map(point, grid, workers)
    shifts = np.array([r.delta_p for r in rows])
    rates = np.gradient(shifts, grid) if grid.size >= 2 else np.full(grid.shape, math.nan)
    rows = [_replace(r, rate=float(v)) for r, v in zip(rows, rates)]
    cols = ("scheme", "epsilon", "coupling", "delta_p", "rate", "xi")
    if compare_bwva:
        cols += ("xi_bwva",)
    return SweepResult("tau", grid, rows, s.domain_kind, label="sweep_tau", columns=cols + ("grid_hash",))


def predict_experiment(
    spectrum: Spectrum,
    epsilon_list: Sequence[float] = (-0.08, -0.22),
    tau_grid=None,
    workers: int = 1,
) -> dict[float, SweepResult]:
    """Shift, rate and intensity curves per ε, with the BWVA intensity alongside."""
    if tau_grid is None:
        tau_grid = np.linspace(-5.0, 5.0, 1001)
    return {
        float(e): sweep_tau(spectrum, e, tau_grid, compare_bwva=True, workers=workers)
        for e in epsilon_list
    }


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def sweep_csv(result: SweepResult, header: Sequence[str] = ()) -> str:
    units = _units(result.domain_kind)
    names = {"epsilon": "epsilon_rad", "relative_sensitivity": "relative_sensitivity",
             "xi": "xi", "xi_bwva": "xi_bwva", "scheme": "scheme", "grid_hash": "grid_hash",
             "error": "error"}
    names.update(units)
    lines = [f"# {h}" for h in header]
    lines.append(",".join(names[c] for c in result.columns))
    for r in result.rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in result.columns))
    return "\n".join(lines) + "\n"


def comparison_csv(rows: Sequence[ComparisonRow], header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append("scheme,sensitivity_formula,epsilon_rad,sensitivity_sigma_units,"
                 "relative_sensitivity,simulation")
    for r in rows:
        lines.append(",".join([r.scheme.value, r.formula, _fmt(r.epsilon), _fmt(r.sensitivity),
                               _fmt(r.relative_sensitivity), _fmt(r.simulated_relative)]))
    return "\n".join(lines) + "\n"


def sweep_filename(result: SweepResult, scheme: str = "") -> str:
    first = result.rows[0] if result.rows else None
    scheme = scheme or (first.scheme if first else "none")
    if result.variable == "epsilon":
        eps = f"eps{result.grid[0]:g}to{result.grid[-1]:g}"
    else:
        eps = f"eps{first.epsilon:g}" if first else "eps"
    ghash = first.grid_hash if first else "nogrid"
    return f"{result.label}_{scheme}_{eps}_{ghash}.csv"


def write_sweep(result: SweepResult, outdir, header: Sequence[str] = ()) -> list[Path]:
    """One CSV per scheme present in ``result``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for scheme in dict.fromkeys(r.scheme for r in result.rows):
        part = SweepResult(result.variable, result.grid, [r for r in result.rows if r.scheme == scheme],
                           result.domain_kind, result.label, result.columns)
        path = outdir / sweep_filename(part, scheme)
        path.write_text(sweep_csv(part, header))
        paths.append(path)
    return paths


def summary(result: SweepResult) -> dict:
    """Per-scheme extrema used by the JSON summary."""
    out = {}
    for scheme in dict.fromkeys(r.scheme for r in result.rows):
        rows = [r for r in result.rows if r.scheme == scheme]
        entry = {"points": len(rows), "failures": sum(1 for r in rows if r.error)}
        xi = np.array([r.xi for r in rows])
        if np.any(np.isfinite(xi)):
            entry["xi_min"] = float(np.nanmin(xi))
            entry["xi_max"] = float(np.nanmax(xi))
        if result.variable == "tau":
            rate = np.array([r.rate for r in rows])
            i = int(np.nanargmax(np.abs(rate)))
            entry["peak_abs_rate"] = float(abs(rate[i]))
            entry["peak_rate_at"] = float(rows[i].coupling)
            xb = np.array([r.xi_bwva for r in rows])
            if np.any(np.isfinite(xb)):
                j = int(np.nanargmin(xi))
                entry["xi_ratio_dwva_bwva_at_min"] = float(xi[j] / xb[j])
        else:
            rel = np.array([r.relative_sensitivity for r in rows])
            if np.any(np.isfinite(rel)):
                entry["relative_sensitivity_max"] = float(np.nanmax(rel))
        out[scheme] = entry
    return out


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def tool_header(config: dict) -> list[str]:
    return [f"wvalab {__version__}", "config " + json.dumps(config, sort_keys=True)]
