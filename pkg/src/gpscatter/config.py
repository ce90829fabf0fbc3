"""
JSON experiment configurations, task runners and run manifests.

A run writes its outputs and a ``manifest.json`` (resolved config, package
version, sha256 of every output) into ``out_dir``. Exit codes: 0 success,
2 validation failure, 3 numerical abort.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import io as gio
from .spectral import PHYSICAL, Field, Grid, make_grid

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3
TASKS = ("simulate", "scatter", "decay", "phase-scan", "verify-symbols", "normal-form", "oracle")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "dim", "grid", "task"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "dim": {"enum": [2, 3]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "L"],
            "properties": {"n": {"type": "integer", "minimum": 8}, "L": _pos},
        },
        "datum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian", "from_file"]},
                "amplitude": _num,
                "width": _pos,
                "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 3},
                "modulation": {"type": "array", "items": _num, "minItems": 2, "maxItems": 3},
                "besov_target": _pos,
                "path": {"type": "string"},
            },
        },
        "task": {"enum": list(TASKS)},
        "task_params": {"type": "object"},
        "seed": {"type": "integer"},
        "out_dir": {"type": "string"},
        "emit_gnuplot": {"type": "boolean"},
    },
}

TASK_SCHEMAS = {
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "T": _pos,
            "dt": _pos,
            "scheme": {"enum": ["strang_rk4", "etd_rk2"]},
            "dealias": {"type": "boolean"},
            "n_samples": {"type": "integer", "minimum": 2},
            "snapshots": {"type": "boolean"},
        },
    },
    "scatter": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "T": _pos,
            "T_max": _pos,
            "n_nodes": {"type": "integer", "minimum": 16},
            "sweeps": {"type": "integer", "minimum": 1},
            "tol": {"type": "number", "minimum": 0},
            "alpha": _num,
            "beta": _num,
            "kappa": _num,
            "eps": {"type": "number", "minimum": 0},
            "report_eps": _pos,
            "update": {"enum": ["jacobi", "seidel"]},
        },
    },
    "decay": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"q": {"oneOf": [{"type": "number", "minimum": 2}, {"const": "inf"}]}, "t_lo": _pos, "t_hi": _pos, "n_times": {"type": "integer", "minimum": 8}},
    },
    "phase-scan": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"kind": {"type": "string"}, "region": {"type": "string"}, "samples": {"type": "integer", "minimum": 1}, "delta": _pos},
    },
    "verify-symbols": {"type": "object", "additionalProperties": False, "properties": {"perturb_H": _pos}},
    "normal-form": {"type": "object", "additionalProperties": False, "properties": {"tol": _pos, "maxiter": {"type": "integer", "minimum": 1}}},
    "oracle": {"type": "object", "additionalProperties": False, "properties": {"case": {"enum": ["small2d"]}}},
}

DEFAULTS = {
    "simulate": {"T": 10.0, "dt": 1e-2, "scheme": "strang_rk4", "dealias": True, "n_samples": 11, "snapshots": True},
    "scatter": {"T": 10.0, "T_max": 80.0, "n_nodes": 600, "sweeps": 12, "tol": 1e-8, "alpha": 0.9, "beta": 0.48, "kappa": 0.05, "eps": 3 / 68, "report_eps": 0.1, "update": "jacobi"},
    "decay": {"q": "inf", "t_lo": 5.0, "t_hi": 30.0, "n_times": 16},
    "phase-scan": {"kind": "Phi0", "region": "Dplus", "samples": 100_000, "delta": 0.05},
    "verify-symbols": {"perturb_H": 1.0},
    "normal-form": {"tol": 1e-12, "maxiter": 50},
    "oracle": {"case": "small2d"},
}


class ConfigError(ValueError):
    """Schema violation; ``paths`` lists the offending field paths."""

    def __init__(self, errors: list):
        self.paths = [p for p, _ in errors]
        super().__init__("; ".join(f"{p or '<root>'}: {m}" for p, m in errors))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dim: int
    grid: dict
    task: str
    datum: dict
    task_params: dict
    seed: int
    out_dir: str
    emit_gnuplot: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "grid": dict(self.grid),
            "datum": dict(self.datum),
            "task": self.task,
            "task_params": dict(self.task_params),
            "seed": self.seed,
            "out_dir": self.out_dir,
            "emit_gnuplot": self.emit_gnuplot,
        }

    def make_grid(self) -> Grid:
        return make_grid(self.dim, self.grid["n"], float(self.grid["L"]))


def _errors(validator, doc, prefix="") -> list:
    out = []
    for e in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in e.absolute_path)
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            for k in extra:
                out.append((".".join(filter(None, [prefix, path, k])), "unknown key"))
            continue
        if e.validator == "required":
            missing = e.message.split("'")[1]
            out.append((".".join(filter(None, [prefix, path, missing])), e.message))
            continue
        out.append((".".join(filter(None, [prefix, path])), e.message))
    return out


def validate_config(doc: dict) -> ExperimentConfig:
    """Validate a config document and fill defaults; raises :class:`ConfigError`."""
    errs = _errors(jsonschema.Draft7Validator(SCHEMA), doc)
    if not errs:
        task = doc["task"]
        errs = _errors(jsonschema.Draft7Validator(TASK_SCHEMAS[task]), doc.get("task_params", {}), "task_params")
    if not errs:
        datum = doc.get("datum", {"kind": "gaussian"})
        for key in ("center", "modulation"):
            if key in datum and len(datum[key]) != doc["dim"]:
                errs.append((f"datum.{key}", f"expected {doc['dim']} entries"))
        if datum.get("kind") == "from_file" and "path" not in datum:
            errs.append(("datum.path", "required for kind from_file"))
    if errs:
        raise ConfigError(errs)
    params = copy.deepcopy(DEFAULTS[doc["task"]])
    params.update(doc.get("task_params", {}))
    datum = {"kind": "gaussian", "amplitude": 0.01, "width": 2.0}
    datum.update(doc.get("datum", {}))
    return ExperimentConfig(
        name=doc["name"],
        dim=doc["dim"],
        grid=dict(doc["grid"]),
        task=doc["task"],
        datum=datum,
        task_params=params,
        seed=int(doc.get("seed", 0)),
        out_dir=doc.get("out_dir", "out"),
        emit_gnuplot=bool(doc.get("emit_gnuplot", False)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return validate_config(json.load(fh))


# --------------------------------------------------------------------------
# data


def make_gaussian_datum(grid: Grid, amplitude: float, width: float, center=None, modulation=None) -> Field:
    """a exp(-|x - c|^2 / (2 w^2)), optionally times exp(i k.x) for a modulation vector k."""
    if width <= 0:
        raise ValueError("width must be positive")
    c = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    if np.any(np.abs(c) >= grid.box_length / 2):
        raise ValueError("center must lie inside the box")
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
    f = amplitude * np.exp(-r2 / (2 * width**2)) * np.ones(grid.shape, complex)
    if modulation is not None:
        f = f * np.exp(1j * sum(k * x for k, x in zip(modulation, grid.coords)))
    return Field(grid, f, PHYSICAL)


def build_datum(cfg: ExperimentConfig) -> Field:
    from .spectral import besov_norm

    d = cfg.datum
    if d["kind"] == "from_file":
        f, _ = gio.read_snapshot(d["path"])
        return f.physical()
    phi = make_gaussian_datum(cfg.make_grid(), d.get("amplitude", 0.01), d.get("width", 2.0), d.get("center"), d.get("modulation"))
    if "besov_target" in d:
        b = besov_norm(phi, 1.0, 1.0, 1.0)
        if b > 0:
            phi = Field(phi.grid, phi.values * (d["besov_target"] / b), PHYSICAL)
    return phi


# --------------------------------------------------------------------------
# tasks


def _task_simulate(cfg, out: Path, phi: Field) -> list:
    from .dynamics import SolverConfig, evolve, norm_table, trajectory_u, u_to_v

    p = cfg.task_params
    times = list(np.linspace(0.0, p["T"], p["n_samples"]))
    sc = SolverConfig(dt=p["dt"], scheme=p["scheme"], dealias=p["dealias"], sample_times=times)
    traj = trajectory_u(evolve(u_to_v(phi), p["T"], sc))
    files = [gio.write_norms_csv(out / "norms.csv", norm_table(traj))]
    if p["snapshots"]:
        for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
            files.append(gio.write_snapshot(out / f"u_{i:04d}.gpf", f, t))
    return files


def _task_scatter(cfg, out: Path, phi: Field) -> list:
    from .scattering import ScatteringConfig, correction_report, iterate

    p = cfg.task_params
    sc = ScatteringConfig(
        T=p["T"], T_max=p["T_max"], n_nodes=p["n_nodes"], sweeps=p["sweeps"], tol=p["tol"], alpha=p["alpha"],
        beta=p["beta"], kappa=p["kappa"], dim=cfg.dim, eps=p["eps"], update=p["update"],
    )
    res, diag = iterate(phi, sc, return_arrays=True)
    rows = []
    for k, (D, E) in enumerate(zip(diag.D, diag.E), start=1):
        ratio = diag.contraction_ratios[k - 2] if k >= 2 else float("nan")
        rows.append([k, float(D), float(E), float(ratio)])
    files = [gio.write_table_csv(out / "diagnostics.csv", ["k", "D_k", "E_k", "ratio"], rows)]
    files.append(gio.write_snapshot(out / "u_T.gpf", res.u_at(0), res.times[0]))
    files.append(gio.write_snapshot(out / "u_Tmax.gpf", res.u_at(len(res.times) - 1), res.times[-1]))
    files.append(gio.write_snapshot(out / "z_T.gpf", res.z_at(0), res.times[0]))
    if cfg.dim == 2:
        rep = correction_report(res, p["report_eps"], sc.dealias)
        keys = ["t", "zp_H1dot", "zp_Heps", "nu_H1H2", "nu_Heps", "zpp_H1"]
        files.append(gio.write_table_csv(out / "corrections.csv", keys, zip(*[rep[k] for k in keys])))
    summary = {"converged": diag.converged, "sweeps": diag.sweeps, "tail_estimate": diag.tail_estimate, "phi_besov": diag.phi_besov, "note": diag.note}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files.append(out / "summary.json")
    return files


def _task_decay(cfg, out: Path, phi: Field) -> list:
    from .analysis import linear_decay_experiment

    p = cfg.task_params
    q = np.inf if p["q"] == "inf" else float(p["q"])
    times = np.geomspace(p["t_lo"], p["t_hi"], p["n_times"])
    fit = linear_decay_experiment(phi, q, times)
    files = [gio.write_table_csv(out / "decay.csv", ["t", "norm"], zip(times, fit.notes["values"]))]
    files.append(
        gio.write_table_csv(out / "fit.csv", ["q", "exponent", "intercept", "r_squared", "wrap_safe_time"], [[str(p["q"]), fit.exponent, fit.intercept, fit.r_squared, fit.notes["wrap_safe_time"]]])
    )
    return files


def _task_phase_scan(cfg, out: Path, phi) -> list:
    from .analysis import phase_lower_bound_scan

    p = cfg.task_params
    r = phase_lower_bound_scan(p["kind"], p["region"], p["samples"], p["delta"], seed=cfg.seed)
    xi, eta = r["argmin"]
    row = [r["kind"], r["region"], r["delta"], r["min_ratio"], r["n_in_region"], *map(float, xi), *map(float, eta)]
    head = ["kind", "region", "delta", "min_ratio", "n_in_region", "xi_1", "xi_2", "eta_1", "eta_2"]
    return [gio.write_table_csv(out / "phase_scan.csv", head, [row])]


def _task_verify_symbols(cfg, out: Path, phi) -> list:
    from .verification import run_identity_suite, write_report

    res = run_identity_suite(perturb_H=cfg.task_params["perturb_H"], seed=cfg.seed)
    return [write_report(out / "symbols.csv", res)]


def _task_normal_form(cfg, out: Path, phi: Field) -> list:
    from .normal_form import from_normal_form, to_normal_form
    from .spectral import lp_norm

    p = cfg.task_params
    z = to_normal_form(phi)
    pair = from_normal_form(z, tol=p["tol"], maxiter=p["maxiter"])
    err = lp_norm(pair.u - phi, 2) / max(lp_norm(phi, 2), 1e-300)
    files = [gio.write_snapshot(out / "z.gpf", z, 0.0)]
    files.append(gio.write_table_csv(out / "roundtrip.csv", ["rel_L2_error", "iterations", "converged"], [[err, pair.fixed_point_iters, str(pair.converged)]]))
    return files


def oracle_small2d() -> list:
    """Direct vs spectral u1^2 Duhamel coefficient at five xi on a 64^2 lattice."""
    from .analysis import band_limited_datum, bilinear_integral_spectral, u1sq_direct

    g = make_grid(2, 64, 128.0)
    phi = band_limited_datum(g, 0.1, 2.0, 1.5, modulation=(0.5, 0.0))
    psi = band_limited_datum(g, 0.07, 1.5, 1.5, modulation=(0.0, -0.3))
    rows = []
    for xi in [(0, 0), (1, 0), (3, 2), (5, -4), (-17, 12)]:
        d = u1sq_direct(phi, psi, xi, 10.0, 12.0, 81)
        s = bilinear_integral_spectral(phi, psi, "u1sq", xi, 10.0, 12.0, 81)
        rows.append([xi[0], xi[1], d.real, d.imag, s.real, s.imag, abs(d - s) / abs(s)])
    return rows


def _task_oracle(cfg, out: Path, phi) -> list:
    head = ["xi_i", "xi_j", "direct_re", "direct_im", "spectral_re", "spectral_im", "rel_diff"]
    return [gio.write_table_csv(out / "oracle.csv", head, oracle_small2d())]


RUNNERS = {
    "simulate": _task_simulate,
    "scatter": _task_scatter,
    "decay": _task_decay,
    "phase-scan": _task_phase_scan,
    "verify-symbols": _task_verify_symbols,
    "normal-form": _task_normal_form,
    "oracle": _task_oracle,
}
NEEDS_DATUM = {"simulate", "scatter", "decay", "normal-form"}

GNUPLOT = {
    "norms.csv": "set datafile separator ','\nset logscale y\nplot for [n in 'energy charge L2 H1dot L4 Linf'] '{f}' using 1:(strcol(2) eq n ? $3 : 1/0) title n\n",
    "diagnostics.csv": "set datafile separator ','\nset logscale y\nplot '{f}' using 1:2 with linespoints title 'D_k', '' using 1:3 with linespoints title 'E_k'\n",
    "corrections.csv": "set datafile separator ','\nset logscale xy\nplot for [c=2:6] '{f}' using 1:c with lines title columnhead(c)\n",
    "decay.csv": "set datafile separator ','\nset logscale xy\nplot '{f}' using 1:2 with linespoints title 'norm'\n",
}


def _emit_gnuplot(out: Path, files: list) -> list:
    extra = []
    for f in files:
        tpl = GNUPLOT.get(Path(f).name)
        if tpl:
            p = out / (Path(f).stem + ".gp")
            p.write_text(tpl.format(f=Path(f).name))
            extra.append(p)
    return extra


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out: Path, cfg: ExperimentConfig, files: list, status: str) -> Path:
    entries = sorted({Path(f).name: gio.sha256(f) for f in files}.items())
    doc = {"config": cfg.to_dict(), "version": package_version(), "status": status, "files": [{"path": k, "sha256": v} for k, v in entries]}
    p = out / "manifest.json"
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return p


def run(cfg, out_dir: Optional[str] = None, phi: Optional[Field] = None, stream=None) -> int:
    """Run one experiment; returns the exit status. Messages go to ``stream`` (stderr by default)."""
    stream = stream or sys.stderr
    from .dynamics import NumericalAbort
    from .scattering import ScatteringDivergence

    if isinstance(cfg, dict):
        try:
            cfg = validate_config(cfg)
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=stream)
            return EXIT_INVALID
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.random.seed(cfg.seed)
    if phi is None and cfg.task in NEEDS_DATUM:
        try:
            phi = build_datum(cfg)
        except ValueError as exc:
            print(f"invalid config: datum: {exc}", file=stream)
            return EXIT_INVALID
    try:
        files = RUNNERS[cfg.task](cfg, out, phi)
        status = EXIT_OK
    except (NumericalAbort, ScatteringDivergence) as exc:
        print(f"numerical abort: {exc}", file=stream)
        files, status = [], EXIT_ABORT
    if cfg.emit_gnuplot:
        files += _emit_gnuplot(out, files)
    write_manifest(out, cfg, files, "ok" if status == EXIT_OK else "aborted")
    return status
