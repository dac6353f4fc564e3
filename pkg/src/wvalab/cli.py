"""Command-line entry point.

Subcommands: simulate, compare, calibrate, estimate, sweep.

Settings come from three layers, later ones winning: a named ``--preset``, a
JSON ``--config`` file, then explicit flags. The spectrum source is resolved
as a unit: a layer that names any source replaces the source of the layers
below it.

Exit codes: 0 success, 2 configuration or format error, 3 numerical or
regime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import bench
from .core import Mode, PostselectedPair, Scheme, SchemeSpec, postselected_spectra
from .errors import ConfigError, NumericalError
from .estimator import (
    Calibration,
    calibrate,
    difference_signal,
    estimate,
    estimate_tau,
    measured_shift,
    squared_distribution,
)
from .spectrum import (
    DomainKind,
    SKEWED_COMPONENTS,
    GaussianModel,
    Spectrum,
    convert_domain,
    grid_hash,
    make_gaussian,
    make_mixture,
    moments,
    read_spectrum,
    sld_like_spectrum,
    write_spectrum,
)

logger = logging.getLogger("wvalab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SOURCE_KEYS = ("lambda0_nm", "sigma_nm", "p0", "sigma_p", "spectrum_file", "synthetic")

PRESETS = {
    "figure-1": {
        "sweep": "epsilon", "schemes": ["SWVA", "BWVA", "JWVA", "DWVA"],
        "p0": 60.0, "sigma_p": 1.0,
        "eps_min_rad": -0.02, "eps_max_rad": -0.001, "eps_points": 20,
        "normalize_scheme": "SWVA", "normalize_epsilon_rad": -0.001,
    },
    "figure-2": {
        "sweep": "tau", "schemes": ["DWVA"], "epsilon_rad": -0.01,
        "lambda0_nm": 1540.0, "sigma_nm": 25.0,
        "tau_min_as": -0.2, "tau_max_as": 0.2, "tau_points": 401,
    },
    "figure-4": {
        "sweep": "tau", "schemes": ["DWVA"], "epsilon_list_rad": [-0.08, -0.22],
        "synthetic": "sld-like", "compare_bwva": True,
        "tau_min_as": -5.0, "tau_max_as": 5.0, "tau_points": 1001,
    },
}


@dataclass
class RunConfig:
    command: str
    scheme: str = "DWVA"
    schemes: list = field(default_factory=lambda: ["DWVA"])
    epsilon_rad: float = -0.01
    epsilon_list_rad: Optional[list] = None
    lambda0_nm: Optional[float] = None
    sigma_nm: Optional[float] = None
    p0: Optional[float] = None
    sigma_p: Optional[float] = None
    spectrum_file: Optional[str] = None
    spectrum_unit: str = "nm"
    synthetic: Optional[str] = None
    points: int = 4096
    half_width_sigmas: float = 8.0
    mode: str = "exact"
    tau_as: float = 0.0
    coupling_g: float = 0.0
    sweep: Optional[str] = None
    eps_min_rad: Optional[float] = None
    eps_max_rad: Optional[float] = None
    eps_points: Optional[int] = None
    tau_min_as: Optional[float] = None
    tau_max_as: Optional[float] = None
    tau_points: Optional[int] = None
    g_min: Optional[float] = None
    g_max: Optional[float] = None
    g_points: Optional[int] = None
    normalize_scheme: Optional[str] = None
    normalize_epsilon_rad: Optional[float] = None
    compare_bwva: bool = False
    outdir: str = "wvalab_out"
    jacobian: bool = True
    convert_to: Optional[str] = None
    xi_budget: float = 1e-4
    ratio_p0_sigma: float = 60.0
    port1: Optional[str] = None
    port2: Optional[str] = None
    calibration: Optional[str] = None
    output: Optional[str] = None
    preset: Optional[str] = None
    workers: int = 1

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
        try:
            Mode(self.mode)
            Scheme(self.scheme)
            for s in self.schemes:
                Scheme(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.command in ("simulate", "calibrate", "sweep"):
            self._validate_source()
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def _validate_source(self) -> None:
        chosen = [k for k in ("gaussian-nm", "gaussian-p", "file", "synthetic") if self._has(k)]
        if len(chosen) != 1:
            raise ConfigError(
                "exactly one spectrum source is required (--lambda0-nm/--sigma-nm, "
                f"--p0/--sigma-p, --spectrum-file or --synthetic); got {chosen or 'none'}"
            )
        if chosen[0] == "gaussian-nm" and (self.lambda0_nm is None or self.sigma_nm is None):
            raise ConfigError("a wavelength Gaussian needs both --lambda0-nm and --sigma-nm")
        if chosen[0] == "gaussian-p" and (self.p0 is None or self.sigma_p is None):
            raise ConfigError("a generic Gaussian needs both --p0 and --sigma-p")

    def _has(self, kind: str) -> bool:
        if kind == "gaussian-nm":
            return self.lambda0_nm is not None or self.sigma_nm is not None
        if kind == "gaussian-p":
            return self.p0 is not None or self.sigma_p is not None
        if kind == "file":
            return self.spectrum_file is not None
        return self.synthetic is not None


# ---------------------------------------------------------------- config


def _merge(base: dict, layer: dict) -> dict:
    out = dict(base)
    if any(k in layer for k in SOURCE_KEYS):
        for k in SOURCE_KEYS:
            out.pop(k, None)
    out.update(layer)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    merged: dict = {}
    preset = flags.get("preset")
    if preset is not None:
        merged = _merge(merged, PRESETS[preset])
    if getattr(args, "config", None):
        try:
            file_layer = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(file_layer, dict):
            raise ConfigError("config file must hold a JSON object")
        if file_layer.get("preset") in PRESETS and preset is None:
            merged = _merge(PRESETS[file_layer["preset"]], file_layer)
        else:
            merged = _merge(merged, file_layer)
    merged = _merge(merged, flags)
    if "scheme" in flags and "schemes" not in flags:
        merged["schemes"] = [flags["scheme"]]
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def build_spectrum(cfg: RunConfig) -> Spectrum:
    if cfg.lambda0_nm is not None:
        s = make_gaussian(GaussianModel(cfg.lambda0_nm, cfg.sigma_nm), cfg.half_width_sigmas,
                          cfg.points, DomainKind.WAVELENGTH)
    elif cfg.p0 is not None:
        s = make_gaussian(GaussianModel(cfg.p0, cfg.sigma_p), cfg.half_width_sigmas,
                          cfg.points, DomainKind.GENERIC)
    elif cfg.spectrum_file is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = read_spectrum(cfg.spectrum_file, DomainKind.from_unit(cfg.spectrum_unit))
        _forward(caught)
    elif cfg.synthetic == "sld-like":
        s = sld_like_spectrum(cfg.points)
    elif cfg.synthetic == "skewed":
        s = make_mixture(SKEWED_COMPONENTS, n_points=cfg.points, domain_kind=DomainKind.WAVELENGTH)
    else:
        raise ConfigError(f"unknown synthetic spectrum {cfg.synthetic!r}")
    if cfg.convert_to is not None:
        s = convert_domain(s, DomainKind.from_unit(cfg.convert_to), cfg.jacobian)
    return s


def _forward(caught) -> None:
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)


def _coupling(cfg: RunConfig, s: Spectrum, explicit: set) -> float:
    if s.domain_kind.is_optical:
        if "coupling_g" in explicit:
            raise ConfigError("optical spectra take the coupling as --tau-as")
        return cfg.tau_as
    if "tau_as" in explicit:
        raise ConfigError("generic spectra take the coupling as --coupling-g")
    return cfg.coupling_g


def _header(cfg: RunConfig) -> list[str]:
    return bench.tool_header({k: v for k, v in asdict(cfg).items() if v is not None})


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_signed(path: Path, grid, values, header) -> None:
    lines = [f"# {h}" for h in header]
    lines += [f"{x:.17g} {y:.17g}" for x, y in zip(grid, values)]
    path.write_text("\n".join(lines) + "\n")


def _write_report(path: Path, items: dict, header) -> None:
    lines = [f"# {h}" for h in header]
    for k, v in items.items():
        lines.append(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, explicit: set) -> int:
    s = build_spectrum(cfg)
    g = _coupling(cfg, s, explicit)
    spec = SchemeSpec.of(cfg.scheme, cfg.epsilon_rad).with_reference(s)
    pair = postselected_spectra(spec, g, s, cfg.mode)
    report = estimate(spec, g, s, cfg.mode)
    out = _outdir(cfg)
    header = _header(cfg)
    coupling_tag = f"tau{g:g}as" if s.domain_kind.is_optical else f"g{g:g}"
    stem = f"simulate_{spec.scheme.value}_eps{cfg.epsilon_rad:g}_{coupling_tag}_{grid_hash(s.axis)}"
    write_spectrum(out / f"{stem}_p1.txt", pair.p1, header)
    written = [f"{stem}_p1.txt"]
    if pair.p2 is not None:
        d = difference_signal(pair)
        write_spectrum(out / f"{stem}_p2.txt", pair.p2, header)
        _write_signed(out / f"{stem}_delta.txt", d.axis.grid, d.values, header)
        write_spectrum(out / f"{stem}_squared.txt", squared_distribution(d), header)
        written += [f"{stem}_p2.txt", f"{stem}_delta.txt", f"{stem}_squared.txt"]
    unit = s.domain_kind.unit
    items = {
        "scheme": spec.scheme.value,
        "mode": report.mode.value,
        "domain_kind": s.domain_kind.value,
        "axis_unit": unit,
        "coupling_unit": "as" if s.domain_kind.is_optical else "dimensionless",
        "epsilon": spec.epsilon,
        "coupling": float(g),
        "p0_ref": float(spec.p0_ref),
        "input_mean": float(moments(s).mean),
        "delta_p": report.delta_p,
        "xi": report.xi,
        "sensitivity": report.sensitivity,
    }
    _write_report(out / f"{stem}_report.txt", items, header)
    per = "nm/as" if s.domain_kind is DomainKind.WAVELENGTH else f"{unit} per coupling unit"
    print(f"delta_p={report.delta_p:.9g} {unit}  xi={report.xi:.6g}  "
          f"sensitivity={report.sensitivity:.6g} {per}")
    for name in written + [f"{stem}_report.txt"]:
        logger.info("wrote %s", out / name)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, explicit: set) -> int:
    rows = bench.compare_table(cfg.xi_budget, cfg.ratio_p0_sigma)
    text = bench.comparison_csv(rows, _header(cfg))
    out = _outdir(cfg)
    (out / f"compare_xi{cfg.xi_budget:g}_ratio{cfg.ratio_p0_sigma:g}.csv").write_text(text)
    for r in rows:
        print(f"{r.scheme.value:5s} {r.formula:28s} epsilon={r.epsilon:<10.4g} "
              f"relative={r.relative_sensitivity:.1f}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, explicit: set) -> int:
    s = build_spectrum(cfg)
    cal = calibrate(s, cfg.epsilon_rad)
    path = Path(cfg.output) if cfg.output else _outdir(cfg) / "calibration.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cal.to_text(_header(cfg)))
    print(f"bias={cal.bias:.9g} {s.domain_kind.unit}  slope_at_zero={cal.slope_at_zero:.9g}")
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, explicit: set) -> int:
    if not (cfg.port1 and cfg.port2 and cfg.calibration):
        raise ConfigError("estimate needs --port1, --port2 and --calibration")
    kind = DomainKind.from_unit(cfg.spectrum_unit)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        p1 = read_spectrum(cfg.port1, kind, normalize=False)
        p2 = read_spectrum(cfg.port2, kind, normalize=False)
        if not p1.axis.same_as(p2.axis):
            raise ConfigError("port spectra are sampled on different axes")
        try:
            cal = Calibration.from_text(Path(cfg.calibration).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read calibration file: {exc}") from None
        pair = PostselectedPair(p1, p2)
        tau = estimate_tau(pair, cal)
    _forward(caught)
    shift = measured_shift(pair)
    unit = "as" if kind.is_optical else "coupling units"
    items = {"tau": float(tau), "tau_unit": unit, "measured_shift": float(shift),
             "bias": cal.bias, "slope_at_zero": cal.slope_at_zero}
    path = Path(cfg.output) if cfg.output else _outdir(cfg) / "estimate.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_report(path, items, _header(cfg))
    print(f"tau={tau:.9g} {unit}")
    return EXIT_OK


def _grid(lo, hi, n, what) -> np.ndarray:
    if lo is None or hi is None or n is None:
        raise ConfigError(f"{what} sweep needs min, max and points")
    if n < 1:
        raise ConfigError(f"{what} sweep grid is empty")
    if n > 1 and not hi > lo:
        raise ConfigError(f"{what} sweep needs max > min")
    return np.linspace(lo, hi, int(n))


def cmd_sweep(cfg: RunConfig, explicit: set) -> int:
    if cfg.sweep not in ("epsilon", "tau"):
        raise ConfigError("sweep needs --sweep epsilon|tau or a --preset")
    s = build_spectrum(cfg)
    out = _outdir(cfg)
    header = _header(cfg)
    files, results = [], {}
    if cfg.sweep == "epsilon":
        grid = _grid(cfg.eps_min_rad, cfg.eps_max_rad, cfg.eps_points, "epsilon")
        norm = None
        if cfg.normalize_scheme is not None and cfg.normalize_epsilon_rad is not None:
            norm = (cfg.normalize_scheme, cfg.normalize_epsilon_rad)
        res = bench.sweep_epsilon(cfg.schemes, grid, s, normalize_to=norm, workers=cfg.workers)
        files += bench.write_sweep(res, out, header)
        results["epsilon_sweep"] = bench.summary(res)
    else:
        if s.domain_kind.is_optical:
            grid = _grid(cfg.tau_min_as, cfg.tau_max_as, cfg.tau_points, "tau")
        else:
            grid = _grid(cfg.g_min, cfg.g_max, cfg.g_points, "coupling")
        eps_list = cfg.epsilon_list_rad or [cfg.epsilon_rad]
        for scheme in cfg.schemes:
            for eps in eps_list:
                res = bench.sweep_tau(s, eps, grid, cfg.mode, scheme, cfg.compare_bwva, cfg.workers)
                files += bench.write_sweep(res, out, header)
                results[f"{scheme}_eps{eps:g}"] = bench.summary(res)
    payload = {
        "tool": "wvalab",
        "version": __version__,
        "config": {k: v for k, v in asdict(cfg).items() if v is not None},
        "spectrum": {"domain_kind": s.domain_kind.value, "grid_hash": grid_hash(s.axis),
                     "mean": moments(s).mean},
        "files": [p.name for p in files],
        "results": results,
    }
    tag = cfg.preset or f"sweep_{cfg.sweep}"
    bench.write_json(out / f"{tag}_summary_{grid_hash(s.axis)}.json", payload)
    for p in files:
        print(p)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--preset", choices=sorted(PRESETS), default=S)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=S)
    p.add_argument("--schemes", nargs="+", choices=[s.value for s in Scheme], default=S)
    p.add_argument("--epsilon-rad", type=float, default=S, help="phase bias ε in radians")
    p.add_argument("--epsilon-list-rad", type=float, nargs="+", default=S)
    src = p.add_argument_group("spectrum source (exactly one)")
    src.add_argument("--lambda0-nm", type=float, default=S, help="Gaussian mean wavelength")
    src.add_argument("--sigma-nm", type=float, default=S, help="Gaussian line width (std)")
    src.add_argument("--p0", type=float, default=S, help="generic Gaussian mean (dimensionless)")
    src.add_argument("--sigma-p", type=float, default=S, help="generic Gaussian std (dimensionless)")
    src.add_argument("--spectrum-file", default=S)
    src.add_argument("--synthetic", choices=["sld-like", "skewed"], default=S)
    p.add_argument("--spectrum-unit", choices=["nm", "rad/s", "dimensionless"], default=S)
    p.add_argument("--convert-to", choices=["nm", "rad/s"], default=S)
    p.add_argument("--jacobian", dest="jacobian", action="store_true", default=S)
    p.add_argument("--no-jacobian", dest="jacobian", action="store_false", default=S)
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--half-width-sigmas", type=float, default=S)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=S)
    p.add_argument("--tau-as", type=float, default=S, help="time delay in attoseconds")
    p.add_argument("--coupling-g", type=float, default=S, help="coupling on generic axes")
    p.add_argument("--outdir", default=S)
    p.add_argument("--output", default=S)
    p.add_argument("--workers", type=int, default=S)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wvalab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wvalab {__version__}")
    parser.add_argument("--config", help="JSON run configuration; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="post-selected spectra and estimation report")
    _add_common(p)

    p = sub.add_parser("compare", help="sensitivity comparison under an intensity budget")
    _add_common(p)
    p.add_argument("--xi-budget", type=float, default=argparse.SUPPRESS)
    p.add_argument("--ratio-p0-sigma", type=float, default=argparse.SUPPRESS)

    p = sub.add_parser("calibrate", help="bias and slope at zero coupling")
    _add_common(p)

    p = sub.add_parser("estimate", help="invert measured port spectra to a coupling")
    _add_common(p)
    p.add_argument("--port1", default=argparse.SUPPRESS)
    p.add_argument("--port2", default=argparse.SUPPRESS)
    p.add_argument("--calibration", default=argparse.SUPPRESS)

    p = sub.add_parser("sweep", help="epsilon or tau sweeps (figure presets)")
    _add_common(p)
    p.add_argument("--sweep", choices=["epsilon", "tau"], default=argparse.SUPPRESS)
    for name in ("eps-min-rad", "eps-max-rad", "tau-min-as", "tau-max-as", "g-min", "g-max"):
        p.add_argument(f"--{name}", type=float, default=argparse.SUPPRESS)
    for name in ("eps-points", "tau-points", "g-points"):
        p.add_argument(f"--{name}", type=int, default=argparse.SUPPRESS)
    p.add_argument("--compare-bwva", action="store_true", default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    explicit = set(vars(args))
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg, explicit)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
