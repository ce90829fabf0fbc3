"""Command-line entry point ``gpscatter``."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import config as C


def _base(name: str, dim: int = 2, n: int = 64, L: float = 64.0) -> dict:
    return {"name": name, "dim": dim, "grid": {"n": n, "L": L}}


def _load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _with_task(doc: dict, task: str) -> dict:
    doc = dict(doc)
    doc["task"] = task
    return doc


def _finish(doc: dict, out, phi=None, emit=False) -> int:
    if emit:
        doc["emit_gnuplot"] = True
    try:
        cfg = C.validate_config(doc)
    except C.ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return C.EXIT_INVALID
    status = C.run(cfg, out_dir=out, phi=phi)
    if status == C.EXIT_OK:
        print(f"outputs written to {out or cfg.out_dir}")
    return status


def cmd_run(a) -> int:
    return _finish(_load(a.config), a.out, emit=a.emit_gnuplot)


def cmd_simulate(a) -> int:
    return _finish(_with_task(_load(a.config), "simulate"), a.out, emit=a.emit_gnuplot)


def cmd_scatter(a) -> int:
    doc = _with_task(_load(a.config), "scatter")
    phi = None
    if a.phi:
        from .io import read_snapshot

        phi = read_snapshot(a.phi)[0].physical()
        doc["dim"], doc["grid"] = phi.grid.dim, {"n": phi.grid.n, "L": phi.grid.box_length}
    return _finish(doc, a.out, phi, emit=a.emit_gnuplot)


def cmd_decay(a) -> int:
    doc = _base("decay", a.dim, a.n, a.L)
    doc["datum"] = {"kind": "gaussian", "amplitude": 1.0, "width": a.width, "modulation": [a.modulation] + [0.0] * (a.dim - 1)}
    doc["task"] = "decay"
    doc["task_params"] = {"q": "inf" if a.q == "inf" else float(a.q), "t_lo": a.t_lo, "t_hi": a.t_hi}
    out = Path(a.out)
    status = _finish(doc, str(out.parent if out.suffix else out))
    if status == C.EXIT_OK and out.suffix and out.name != "decay.csv":
        shutil.copyfile(out.parent / "decay.csv", out)
    return status


def cmd_phase_scan(a) -> int:
    doc = _base("phase-scan")
    doc["task"] = "phase-scan"
    doc["seed"] = a.seed
    doc["task_params"] = {"kind": a.kind, "region": a.region, "samples": a.samples, "delta": a.delta}
    status = _finish(doc, a.out)
    if status == C.EXIT_OK:
        print(Path(a.out, "phase_scan.csv").read_text(), end="")
    return status


def cmd_verify_symbols(a) -> int:
    doc = _base("verify-symbols")
    doc["task"] = "verify-symbols"
    status = _finish(doc, a.out)
    if status == C.EXIT_OK:
        text = Path(a.out, "symbols.csv").read_text()
        print(text, end="")
        if ",fail," in text:
            return 1
    return status


def cmd_normal_form(a) -> int:
    from .io import read_snapshot

    phi = read_snapshot(a.input)[0].physical()
    doc = _base("normal-form", phi.grid.dim, phi.grid.n, phi.grid.box_length)
    doc["task"] = "normal-form"
    status = _finish(doc, a.out, phi)
    if status == C.EXIT_OK and a.check_roundtrip:
        print(Path(a.out, "roundtrip.csv").read_text(), end="")
    return status


def cmd_oracle(a) -> int:
    doc = _base("oracle")
    doc["task"] = "oracle"
    doc["task_params"] = {"case": a.case}
    status = _finish(doc, a.out)
    if status == C.EXIT_OK:
        print(Path(a.out, "oracle.csv").read_text(), end="")
    return status


def cmd_verify(a) -> int:
    from .verification import run_identity_suite, run_rate_suite, write_report

    res = run_identity_suite() + run_rate_suite(a.budget)
    if a.report:
        write_report(a.report, res)
    for r in res:
        print(f"{r.status:4s} {r.check_id:28s} {r.measured:.4g}  {r.note}")
    return 1 if any(r.status == "fail" for r in res) else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpscatter", description="Gross-Pitaevskii scattering experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run any task from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("simulate", help="forward evolution with norm tables and snapshots")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("scatter", help="final-state iteration")
    s.add_argument("--config", required=True)
    s.add_argument("--phi", help="snapshot holding the asymptotic profile")
    s.add_argument("--out")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.set_defaults(fn=cmd_scatter)

    s = sub.add_parser("decay", help="linear decay-rate fit for a Gaussian")
    s.add_argument("--q", default="inf")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--L", type=float, default=128.0)
    s.add_argument("--width", type=float, default=1.5)
    s.add_argument("--modulation", type=float, default=1.5)
    s.add_argument("--t-lo", type=float, default=5.0)
    s.add_argument("--t-hi", type=float, default=30.0)
    s.add_argument("--out", required=True, help="CSV file or directory")
    s.set_defaults(fn=cmd_decay)

    s = sub.add_parser("phase-scan", help="phase lower-bound scan over a frequency region")
    s.add_argument("--kind", required=True)
    s.add_argument("--region", required=True)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="phase_scan_out")
    s.set_defaults(fn=cmd_phase_scan)

    s = sub.add_parser("verify-symbols", help="operator and phase identity table")
    s.add_argument("--out", default="verify_symbols_out")
    s.set_defaults(fn=cmd_verify_symbols)

    s = sub.add_parser("normal-form", help="normal-form transform of a snapshot")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--check-roundtrip", action="store_true")
    s.add_argument("--out", default="normal_form_out")
    s.set_defaults(fn=cmd_normal_form)

    s = sub.add_parser("oracle", help="direct vs spectral bilinear integral")
    s.add_argument("--case", default="small2d", choices=["small2d"])
    s.add_argument("--out", default="oracle_out")
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("verify", help="identity and rate suites")
    s.add_argument("--budget", default="quick", choices=["quick", "full"])
    s.add_argument("--report")
    s.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
