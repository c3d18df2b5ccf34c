"""Command-line front end.

Subcommands: calibrate, scatter, scan-xi0, scan-mc, influence,
riccati-check.  Configuration comes from an INI file (flat key = value
entries grouped in sections; every key has a baked-in default, so
`comvib scatter` runs with no config at all) plus dotted overrides:

    comvib scatter -c run.ini --set well.mV0=2.7 --set internal.xi0=0.5

Exit codes: 0 success, 1 configuration error, 2 numerical-diagnostic
failure (boundary leakage, Riccati blow-up, basis truncation); failures
emit a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .evolve import BoundaryLeakError
from .experiments import (
    ExperimentConfig,
    riccati_crosscheck,
    run_scattering,
    scan_compositeness,
    scan_xi0,
    write_manifest,
    write_mc_csv,
    write_xi0_csv,
)
from .grids import make_gaussian_1d
from .parametric import (
    FockTruncationError,
    RiccatiBlowupError,
    classical_reflected_path,
    classical_transmitted_path,
    influence_overlap,
    _apply_fock,
    to_fock,
)
from .potentials import calibrate_beam_splitter

__all__ = ["main", "parse_and_dispatch", "ConfigError", "CSV_FLOAT_FMT"]

CSV_FLOAT_FMT = "%.12g"

# INI section/key -> ExperimentConfig field
_SCHEMA: dict[str, dict[str, str]] = {
    "well": {"mV0": "mV0", "L": "L", "smoothing_s": "smoothing_s"},
    "internal": {"k": "k", "xi0": "xi0", "sigma_y_sq": "sigma_y_sq"},
    "com": {"Y0": "Y0", "sigma_Y_sq": "sigma_Y_sq", "p": "p"},
    "grid": {
        "Y_min": "Y_min",
        "Y_max": "Y_max",
        "n_Y": "n_Y",
        "y_min": "y_min",
        "y_max": "y_max",
        "n_y": "n_y",
    },
    "evolution": {
        "dt": "dt",
        "t_max": "t_max",
        "stop_radius": "stop_radius",
        "stop_threshold": "stop_threshold",
        "check_every": "check_every",
        "record_every": "record_every",
        "boundary_tol": "boundary_tol",
    },
    "fock": {"n_fock": "n_fock", "trunc_tol": "trunc_tol"},
    "scan": {
        "xi0_min": "xi0_min",
        "xi0_max": "xi0_max",
        "n_xi0": "n_xi0",
        "Y0_min": "mc_Y0_min",
        "Y0_max": "mc_Y0_max",
        "n_Y0": "mc_n_Y0",
        "xi_min": "mc_xi_min",
        "xi_max": "mc_xi_max",
        "n_xi": "mc_n_xi",
        "well_L": "mc_L",
        "width_sq": "mc_width_sq",
        "width_mode": "mc_width_mode",
    },
    "run": {
        "seed": "seed",
        "n_jobs": "n_jobs",
        "fft_workers": "fft_workers",
        "exploit_mirror": "exploit_mirror",
        "outdir": "outdir",
    },
}


class ConfigError(ValueError):
    pass


def _coerce(field_name: str, raw: str):
    ftypes = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    ftype = ftypes[field_name]
    raw = raw.strip()
    try:
        if ftype == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {field_name}: {e}") from None


def load_config(path: str | None, overrides: list[str]) -> ExperimentConfig:
    """Defaults, then INI file, then dotted section.key=value overrides."""
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        ini = configparser.ConfigParser()
        try:
            ini.read(p)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config: {e}") from None
        for section in ini.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in ini.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                values[_SCHEMA[section][key]] = _coerce(_SCHEMA[section][key], raw)
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        dotted, raw = ov.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown override key {dotted!r}")
        values[_SCHEMA[section][key]] = _coerce(_SCHEMA[section][key], raw)
    try:
        cfg = ExperimentConfig(**values)
        cfg.validate()
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e)) from None
    return cfg


def _emit_error(kind: str, exc: Exception) -> None:
    payload = {"error": {"type": kind, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)


def _outdir(cfg: ExperimentConfig, arg_outdir: str | None) -> Path:
    out = Path(arg_outdir if arg_outdir is not None else cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_calibrate(args) -> int:
    mv0 = calibrate_beam_splitter(args.p, args.L, args.target)
    print(f"mV0 = {mv0:.6f}  (p={args.p}, L={args.L}, target |R|^2={args.target})")
    return 0


def _cmd_scatter(args, cfg: ExperimentConfig) -> int:
    out = _outdir(cfg, args.outdir)
    record = run_scattering(cfg)
    path = out / "scatter.json"
    with open(path, "w") as f:
        json.dump(record.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(cfg, out / "manifest.json", extra={"command": "scatter"})
    print(
        f"xi0={record.xi0:g}  impurity={record.impurity:.6f}  "
        f"P_max={record.p_max:.6f}  theta*={record.theta_star:.6f}  -> {path}"
    )
    return 0 if record.valid else 2


def _cmd_scan_xi0(args, cfg: ExperimentConfig) -> int:
    out = _outdir(cfg, args.outdir)
    records = scan_xi0(cfg)
    write_xi0_csv(records, out / "scan_xi0.csv")
    write_manifest(cfg, out / "manifest.json", extra={"command": "scan-xi0"})
    bad = [r for r in records if not r.valid]
    print(f"wrote {len(records)} points -> {out/'scan_xi0.csv'}; invalid: {len(bad)}")
    if bad:
        _emit_error("diagnostics", RuntimeError(f"{len(bad)} scan points failed diagnostics"))
        return 2
    return 0


def _cmd_scan_mc(args, cfg: ExperimentConfig) -> int:
    out = _outdir(cfg, args.outdir)
    cells = scan_compositeness(cfg)
    write_mc_csv(cells, out / "scan_mc.csv")
    write_manifest(cfg, out / "manifest.json", extra={"command": "scan-mc"})
    print(f"wrote {len(cells)} cells -> {out/'scan_mc.csv'}")
    return 0


def _cmd_influence(args, cfg: ExperimentConfig) -> int:
    out = _outdir(cfg, args.outdir)
    well = cfg.constituent_smoothed()
    U = cfg.internal()
    om_max = (4 * cfg.k + 2 * abs(well.V0) / (6 * np.sqrt(3) * well.s**2) * 2 + 1) / 2
    dt = min(0.05 / om_max, 5e-4)
    T = (2 * cfg.Y0 + 10.0) / max(cfg.p, 1e-6)
    path_t = classical_transmitted_path(well, -cfg.Y0, cfg.p, T, dt)
    path_r = classical_reflected_path(well, -cfg.Y0, cfg.p, T, dt)
    gy = cfg.with_internal_grid_for(cfg.xi0).grid_y()
    psi_i = make_gaussian_1d(gy, center=cfg.xi0, width_sq=cfg.sigma_y_sq)
    res = influence_overlap(psi_i, path_t, path_r, well, U, n_fock=cfg.n_fock)

    csv_path = out / "influence.csv"
    stride = max(1, len(res.coeffs_a.times) // 400)
    c0, _ = to_fock(psi_i, res.n_fock)
    c0 = c0 / np.linalg.norm(c0)
    import csv as _csv

    with open(csv_path, "w", newline="") as f:
        f.write("# comvib-csv v1 influence (coefficients of the transmitted path)\n")
        wr = _csv.writer(f)
        wr.writerow(["t", "reE", "imE", "reD", "imD", "reA", "imA", "reF", "imF", "overlap_abs", "overlap_arg"])
        ca, cb = res.coeffs_a, res.coeffs_b
        for i in range(0, len(ca.times), stride):
            va = _apply_fock(ca, i, c0)
            vb = _apply_fock(cb, i, c0)
            ov = np.vdot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb))
            dv = well.value(path_t.Y[: i + 1]) - well.value(path_r.Y[: i + 1])
            # running phase factor uses the trapezoid (running Simpson is not defined at odd counts)
            ph = np.exp(-2j * np.trapezoid(dv, ca.times[: i + 1]))
            fbar = ph * ov
            wr.writerow(
                [f"{ca.times[i]:.10g}"]
                + [f"{v:.12g}" for v in (
                    ca.E[i].real, ca.E[i].imag, ca.D[i].real, ca.D[i].imag,
                    ca.A[i].real, ca.A[i].imag, ca.F[i].real, ca.F[i].imag,
                )]
                + [f"{abs(fbar):.12g}", f"{np.angle(fbar):.12g}"]
            )
    write_manifest(cfg, out / "manifest.json", extra={"command": "influence"})
    print(
        f"|<psi_A|psi_B>| = {res.overlap_mag:.8f}  arg F = {np.angle(res.value):.6f}  "
        f"(n_fock={res.n_fock}) -> {csv_path}"
    )
    return 0


def _cmd_riccati_check(args, cfg: ExperimentConfig) -> int:
    report = riccati_crosscheck(n_fock=cfg.n_fock)
    for row in report.rows:
        mark = "PASS" if row.passed else "FAIL"
        print(f"{mark}  {row.profile:<12s} x {row.state:<14s} fidelity={row.fidelity:.9f} (>= {row.threshold})")
    if not report.passed:
        _emit_error("diagnostics", RuntimeError(f"{len(report.failures())} battery pairs below threshold"))
        return 2
    return 0


def parse_and_dispatch(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="comvib",
        description="Composite-particle decoherence simulations (square-well interferometer).",
    )
    parser.add_argument("--version", action="version", version=f"comvib {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="solve |R|^2(mV0) = target for the beam splitter")
    p_cal.add_argument("--p", type=float, default=1.0)
    p_cal.add_argument("--L", type=float, default=0.5)
    p_cal.add_argument("--target", type=float, default=0.5)

    for name in ("scatter", "scan-xi0", "scan-mc", "influence", "riccati-check"):
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", default=None, help="INI config file")
        sp.add_argument("-o", "--outdir", default=None, help="output directory")
        sp.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        sp.add_argument("-v", "--verbose", action="count", default=0)

    args = parser.parse_args(argv)
    if args.command == "calibrate":
        try:
            return _cmd_calibrate(args)
        except ValueError as e:
            _emit_error("config", e)
            return 1

    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as e:
        _emit_error("config", e)
        return 1

    handler = {
        "scatter": _cmd_scatter,
        "scan-xi0": _cmd_scan_xi0,
        "scan-mc": _cmd_scan_mc,
        "influence": _cmd_influence,
        "riccati-check": _cmd_riccati_check,
    }[args.command]
    try:
        return handler(args, cfg)
    except (BoundaryLeakError, RiccatiBlowupError, FockTruncationError, RuntimeError) as e:
        _emit_error("numerical", e)
        return 2
    except ConfigError as e:
        _emit_error("config", e)
        return 1


def main(argv=None) -> int:
    code = parse_and_dispatch(argv)
    if argv is None:  # console entry point
        sys.exit(code)
    return code
