import json
import subprocess
import sys

import pytest

from wvalab import __version__
from wvalab.cli import main
from wvalab.estimator import calibrate
from wvalab.spectrum import SKEWED_COMPONENTS, DomainKind, make_mixture

GAUSS_NM = ["--lambda0-nm", "1540", "--sigma-nm", "25"]


def report(path):
    out = {}
    for line in path.read_text().splitlines():
        if not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k] = v
    return out


def only(outdir, pattern):
    found = sorted(outdir.glob(pattern))
    assert len(found) == 1, found
    return found[0]


def test_simulate_dwva_gaussian(tmp_path):
    rc = main(["simulate", *GAUSS_NM, "--epsilon-rad", "-0.01", "--tau-as", "0", "--outdir", str(tmp_path)])
    assert rc == 0
    names = sorted(p.name.rsplit("_", 1)[-1] for p in tmp_path.iterdir())
    assert names == ["delta.txt", "p1.txt", "p2.txt", "report.txt", "squared.txt"]
    for p in tmp_path.iterdir():
        head = p.read_text().splitlines()[:2]
        assert head[0] == f"# wvalab {__version__}"
        assert head[1].startswith("# config ")
    rep = report(only(tmp_path, "*_report.txt"))
    # the wavelength Gaussian bias is -3σ²/λ0 rather than zero
    assert float(rep["delta_p"]) == pytest.approx(-3 * 25.0**2 / 1540.0, rel=0.01)
    assert rep["axis_unit"] == "nm" and rep["coupling_unit"] == "as"


def test_simulate_generic_gaussian_zero_bias(tmp_path):
    rc = main(["simulate", "--p0", "60", "--sigma-p", "1", "--epsilon-rad", "-0.01",
               "--outdir", str(tmp_path)])
    assert rc == 0
    assert abs(float(report(only(tmp_path, "*_report.txt"))["delta_p"])) < 1e-12


def test_simulate_swva_intensity(tmp_path):
    rc = main(["simulate", "--p0", "60", "--sigma-p", "1", "--scheme", "SWVA",
               "--epsilon-rad", "0.08", "--coupling-g", "0", "--outdir", str(tmp_path)])
    assert rc == 0
    assert float(report(only(tmp_path, "*_report.txt"))["xi"]) == pytest.approx(6.3864e-3, rel=1e-4)
    assert not list(tmp_path.glob("*_p2.txt"))


def test_simulate_degenerate_exit_3(tmp_path, capsys):
    rc = main(["simulate", *GAUSS_NM, "--epsilon-rad", "0", "--outdir", str(tmp_path)])
    assert rc == 3
    assert "DegenerateSignalError" in capsys.readouterr().err


def test_simulate_regime_exit_3(tmp_path, capsys):
    rc = main(["simulate", "--p0", "60", "--sigma-p", "1", "--epsilon-rad", "-0.01",
               "--coupling-g", "0.01", "--mode", "first-order", "--outdir", str(tmp_path)])
    assert rc == 3
    assert "RegimeError" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "--p0", "60", "--sigma-p", "1", *GAUSS_NM],
    ["simulate"],
    ["simulate", "--lambda0-nm", "1540"],
    ["simulate", *GAUSS_NM, "--coupling-g", "0.1"],
    ["simulate", "--p0", "60", "--sigma-p", "1", "--tau-as", "0.1"],
    ["simulate", *GAUSS_NM, "--epsilon-rad", "nan"],
    ["simulate", "--spectrum-file", "/nonexistent/spectrum.txt"],
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    assert main([*argv, "--outdir", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--mode", "second-order"])
    assert info.value.code == 2


def test_compare(tmp_path, capsys):
    assert main(["compare", "--outdir", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4
    assert out[3].startswith("DWVA") and out[3].endswith("relative=6770.3")
    csv = only(tmp_path, "compare_*.csv").read_text().splitlines()
    assert csv[0].startswith("# wvalab")
    assert len([l for l in csv if not l.startswith("#")]) == 5


def test_compare_ratio_one(tmp_path, capsys):
    assert main(["compare", "--ratio-p0-sigma", "1", "--outdir", str(tmp_path)]) == 0
    assert "relative=0.7" in capsys.readouterr().out.splitlines()[1]


def test_calibrate_deterministic(tmp_path):
    argv = ["calibrate", "--synthetic", "skewed", "--epsilon-rad", "-0.01", "--outdir", str(tmp_path)]
    assert main(argv) == 0
    first = (tmp_path / "calibration.txt").read_bytes()
    assert main(argv) == 0
    assert (tmp_path / "calibration.txt").read_bytes() == first
    rep = report(tmp_path / "calibration.txt")
    oracle = calibrate(make_mixture(SKEWED_COMPONENTS, domain_kind=DomainKind.WAVELENGTH), -0.01)
    assert float(rep["bias"]) == oracle.bias


def test_calibrate_gaussian_file_bias_zero(tmp_path):
    assert main(["calibrate", "--p0", "60", "--sigma-p", "1", "--outdir", str(tmp_path)]) == 0
    assert abs(float(report(tmp_path / "calibration.txt")["bias"])) < 1e-12


def _simulate_and_calibrate(tmp_path, tau="1e-4", points="4096"):
    sim = tmp_path / f"sim{points}"
    assert main(["simulate", "--synthetic", "sld-like", "--epsilon-rad", "-0.01", "--tau-as", tau,
                 "--points", points, "--outdir", str(sim)]) == 0
    cal = tmp_path / "cal.txt"
    assert main(["calibrate", "--synthetic", "sld-like", "--epsilon-rad", "-0.01",
                 "--output", str(cal)]) == 0
    return only(sim, "*_p1.txt"), only(sim, "*_p2.txt"), cal


def test_estimate_round_trip(tmp_path, capsys):
    p1, p2, cal = _simulate_and_calibrate(tmp_path)
    out = tmp_path / "est.txt"
    rc = main(["estimate", "--port1", str(p1), "--port2", str(p2), "--calibration", str(cal),
               "--output", str(out)])
    assert rc == 0
    assert float(report(out)["tau"]) == pytest.approx(1e-4, rel=0.01)
    assert "warning" not in capsys.readouterr().err


def test_estimate_mismatched_axes(tmp_path):
    p1, _, cal = _simulate_and_calibrate(tmp_path)
    _, p2_other, _ = _simulate_and_calibrate(tmp_path, points="2048")
    rc = main(["estimate", "--port1", str(p1), "--port2", str(p2_other), "--calibration", str(cal),
               "--outdir", str(tmp_path)])
    assert rc == 2


def test_estimate_fingerprint_warning(tmp_path, capsys):
    p1, p2, _ = _simulate_and_calibrate(tmp_path)
    other = tmp_path / "other.txt"
    assert main(["calibrate", "--synthetic", "skewed", "--output", str(other)]) == 0
    capsys.readouterr()
    rc = main(["estimate", "--port1", str(p1), "--port2", str(p2), "--calibration", str(other),
               "--outdir", str(tmp_path)])
    assert rc == 0
    assert "warning:" in capsys.readouterr().err
    assert (tmp_path / "estimate.txt").exists()


def test_estimate_needs_inputs(tmp_path):
    assert main(["estimate", "--outdir", str(tmp_path)]) == 2


def test_sweep_figure2_preset(tmp_path):
    rc = main(["sweep", "--preset", "figure-2", "--tau-points", "41", "--points", "2048",
               "--outdir", str(tmp_path)])
    assert rc == 0
    csv = only(tmp_path, "sweep_tau_DWVA_*.csv").read_text().splitlines()
    header = [l for l in csv if not l.startswith("#")][0]
    assert "mws_nm" in header and "mwsr_nm_per_as" in header
    summary = json.loads(only(tmp_path, "figure-2_summary_*.json").read_text())
    assert summary["version"] == __version__
    assert summary["results"]["DWVA_eps-0.01"]["DWVA"]["peak_abs_rate"] == pytest.approx(376.7, rel=0.02)


def test_sweep_figure4_preset(tmp_path):
    rc = main(["sweep", "--preset", "figure-4", "--tau-points", "41", "--points", "2048",
               "--outdir", str(tmp_path)])
    assert rc == 0
    files = sorted(tmp_path.glob("sweep_tau_*.csv"))
    assert len(files) == 2
    header = [l for l in files[0].read_text().splitlines() if not l.startswith("#")][0]
    for col in ("mws_nm", "mwsr_nm_per_as", "xi", "xi_bwva"):
        assert col in header.split(",")


def test_sweep_figure1_preset(tmp_path):
    rc = main(["sweep", "--preset", "figure-1", "--eps-points", "4", "--points", "2048",
               "--outdir", str(tmp_path)])
    assert rc == 0
    assert len(list(tmp_path.glob("sweep_epsilon_*.csv"))) == 4


def test_sweep_preset_source_override(tmp_path):
    rc = main(["sweep", "--preset", "figure-2", "--synthetic", "sld-like", "--tau-points", "5",
               "--points", "1024", "--outdir", str(tmp_path)])
    assert rc == 0


def test_sweep_empty_grid_exit_2(tmp_path):
    rc = main(["sweep", "--sweep", "tau", *GAUSS_NM, "--tau-min-as", "0", "--tau-max-as", "1",
               "--tau-points", "0", "--outdir", str(tmp_path)])
    assert rc == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"p0": 60.0, "sigma_p": 1.0, "scheme": "SWVA", "epsilon_rad": 0.08}))
    out = tmp_path / "out"
    rc = main(["--config", str(cfg), "simulate", "--epsilon-rad", "0.05", "--outdir", str(out)])
    assert rc == 0
    rep = report(only(out, "*_report.txt"))
    assert rep["scheme"] == "SWVA"
    assert float(rep["epsilon"]) == 0.05


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"p0": 60.0, "sigma_p": 1.0, "frobnicate": 1}))
    assert main(["--config", str(bad), "simulate", "--outdir", str(tmp_path)]) == 2
    bad.write_text("{not json")
    assert main(["--config", str(bad), "simulate", "--outdir", str(tmp_path)]) == 2


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "wvalab.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == f"wvalab {__version__}"
