"""
Catalogue of identity checks and decay-rate regressions.

Every check returns a :class:`CheckResult`; failures are results, not
exceptions. Tolerances live in :data:`TOLERANCES`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np

from . import analysis as A
from . import operators as O
from .operators import PhaseKind, SymbolId
from .spectral import PHYSICAL, Field, apply_multiplier, make_grid

TOLERANCE_VERSION = "1"

# check_id -> (expected, tolerance); the tolerance is relative unless noted
TOLERANCES = {
    "ops.P_plus_Q": (0.0, 1e-12),
    "ops.U2_eq_Q": (0.0, 1e-12),
    "ops.2Q_eq_minus_P_lap": (0.0, 1e-12),
    "ops.V_Vinv": (0.0, 1e-12),
    "ops.values": (0.0, 1e-7),
    "ops.deriv.H1": (0.0, 1e-6),
    "ops.deriv.H2": (0.0, 1e-6),
    "ops.deriv.H3": (0.0, 1e-6),
    "ops.deriv.H4": (0.0, 1e-6),
    "ops.deriv.I": (0.0, 1e-6),
    "ops.deriv.I1": (0.0, 1e-6),
    "ops.unitarity": (0.0, 1e-12),
    "ops.group_law": (0.0, 1e-12),
    "phase.h_sum_identity": (0.0, 1e-12),
    "phase.gradient_fd": (0.0, 1e-6),
    "phase.radial_split": (0.0, 1e-6),
    "phase.angle_identity": (0.0, 1e-10),
    "phase.monotone_H": (0.0, 0.0),
    "phase.diff_ratio": ((0.5, 3.0), 0.0),
    "phase.vec_diff": ((0.4, 1.0), 0.0),
    "phase.scan_positive": (0.0, 0.0),
    "rate.linf_2d": (-1.0, 0.15),
    "rate.linf_3d": (-1.5, 0.2),
    "rate.l2": (0.0, 1e-6),
    "rate.l4_free_2d": (-0.5, 0.1),
    "rate.u01_linf_2d": (-1.0, 0.15),
    "rate.critical_3d": (0.0, 0.0),
}

BUDGETS = {"quick": {"n2": 128, "L2": 128.0, "n3": 48, "L3": 48.0}, "full": {"n2": 256, "L2": 200.0, "n3": 64, "L3": 80.0}}


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    status: str
    measured: float
    expected: object
    tolerance: float
    note: str = ""
    seconds: float = 0.0

    def row(self) -> list:
        return [self.check_id, self.status, self.measured, self.expected, self.tolerance, self.note]


def _judge(check_id: str, measured: float, note: str = "", t0: Optional[float] = None) -> CheckResult:
    expected, tol = TOLERANCES[check_id]
    if isinstance(expected, tuple):
        ok = expected[0] <= measured <= expected[1]
    elif check_id.startswith("rate.") and check_id != "rate.l2":
        ok = abs(measured - expected) <= tol
    else:
        ok = np.isfinite(measured) and abs(measured - expected) <= tol
    dt = 0.0 if t0 is None else time.perf_counter() - t0
    return CheckResult(check_id, "pass" if ok else "fail", float(measured), expected, tol, note, dt)


def _rel(a, b) -> float:
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


# --------------------------------------------------------------------------
# identity suite


def _random_fields(grid, count, rng):
    for _ in range(count):
        yield Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape), PHYSICAL)


def _operator_checks(rng) -> list:
    t0 = time.perf_counter()
    worst = {"ops.P_plus_Q": 0.0, "ops.U2_eq_Q": 0.0, "ops.2Q_eq_minus_P_lap": 0.0, "ops.V_Vinv": 0.0}
    for dim, n in ((2, 64), (3, 32)):
        grid = make_grid(dim, n, 2 * np.pi * 4)
        for f in _random_fields(grid, 20, rng):
            g = f.spectral().values
            P = apply_multiplier(f, SymbolId.P).spectral().values
            Q = apply_multiplier(f, SymbolId.Q).spectral().values
            U2 = apply_multiplier(apply_multiplier(f, SymbolId.U), SymbolId.U).spectral().values
            lap = -grid.kabs**2 * g
            PL = O.symbol_array(grid, SymbolId.P) * lap
            worst["ops.P_plus_Q"] = max(worst["ops.P_plus_Q"], _rel(P + Q, g))
            worst["ops.U2_eq_Q"] = max(worst["ops.U2_eq_Q"], _rel(U2, Q))
            worst["ops.2Q_eq_minus_P_lap"] = max(worst["ops.2Q_eq_minus_P_lap"], _rel(2 * Q, -PL))
            back = O.v_map(O.v_inverse_map(f)).spectral().values
            ref = g.copy()
            ref1, ref2 = O.split_real_imag(grid, ref)
            ref1.flat[0] = 0.0
            worst["ops.V_Vinv"] = max(worst["ops.V_Vinv"], _rel(back, ref1 + 1j * ref2))
    return [_judge(k, v, "2D 64^2 and 3D 32^3, 20 random fields each", t0) for k, v in worst.items()]


def _fd_derivatives(r: np.ndarray, scale: float = 1.0) -> dict:
    """Derivatives of scale * r sqrt(2 + r^2) by mpmath finite differences at 40 digits."""
    with mpmath.workdps(40):
        H = lambda x: scale * x * mpmath.sqrt(2 + x * x)  # noqa: E731
        rows = []
        for x in r:
            x = mpmath.mpf(float(x))
            d = list(mpmath.diffs(H, x, 4))
            rows.append((d[1], d[2], d[3], d[4], d[2] / x - d[1] / x**2, d[3] / x - 2 * d[2] / x**2 + 2 * d[1] / x**3))
    cols = np.array([[float(v) for v in row] for row in rows]).T
    return dict(zip(("H1", "H2", "H3", "H4", "I", "I1"), cols))


def _derivative_checks(perturb_H: float) -> list:
    t0 = time.perf_counter()
    r = np.logspace(-2, 2, 200)
    d = O.symbol_derivatives(r)
    fd = _fd_derivatives(r, perturb_H)
    out = []
    for key in ("H1", "H2", "H3", "H4", "I", "I1"):
        err = float(np.max(np.abs(d[key] - fd[key]) / np.abs(d[key])))
        out.append(_judge(f"ops.deriv.{key}", err, "extended-precision finite differences, 200 log-spaced r in [0.01, 100]", t0))
    return out


def _value_checks() -> list:
    t0 = time.perf_counter()
    s3 = np.sqrt(3.0)
    pairs = [
        (O.symbol_value(SymbolId.H, 1.0), 1.7320508),
        (O.symbol_derivatives(1e-9)["H1"], 1.4142136),
        (O.symbol_derivatives(1.0)["H2"], 1.5396007),
        (O.symbol_derivatives(1.0)["I"], -0.7698004),
        (O.symbol_value(SymbolId.P, 0.0), 1.0),
        (O.symbol_value(SymbolId.Uinv, 1.0), s3),
    ]
    err = max(abs(a - b) / abs(b) for a, b in pairs)
    return [_judge("ops.values", err, "closed-form spot values", t0)]


def _propagator_checks(rng) -> list:
    t0 = time.perf_counter()
    grid = make_grid(2, 64, 2 * np.pi * 4)
    f = next(_random_fields(grid, 1, rng))
    g = f.spectral().values
    w = grid.kabs
    a = O.propagate(f, 7.3).spectral().values
    e1 = abs(np.linalg.norm(w * a) - np.linalg.norm(w * g)) / np.linalg.norm(w * g)
    b = O.propagate(O.propagate(f, 1.7), 2.9).spectral().values
    e2 = _rel(b, O.propagate(f, 4.6).spectral().values)
    return [_judge("ops.unitarity", e1, "Hdot^1 norm at t = 7.3", t0), _judge("ops.group_law", e2, "t1 = 1.7, t2 = 2.9", t0)]


def _phase_checks(rng) -> list:
    t0 = time.perf_counter()
    out = []
    a, b = rng.uniform(0, 10, 1000), rng.uniform(0, 10, 1000)
    lhs, rhs = O.h_sum_identity(np.append(a, 1.0), np.append(b, 1.0))
    out.append(_judge("phase.h_sum_identity", _rel(lhs, rhs), "1000 random (a, b) plus a = b = 1", t0))

    xi = rng.normal(size=(100, 2)) * 2
    eta = rng.normal(size=(100, 2)) * 2
    err = 0.0
    for kind in PhaseKind:
        g = O.phase_gradient(kind, xi, eta)
        fd = np.zeros_like(g)
        for i in range(2):
            e = np.zeros(2)
            h = 1e-5 * np.maximum(np.linalg.norm(eta, axis=-1), 1.0)
            e[i] = 1.0
            fd[:, i] = (O.phase_value(kind, xi, eta + h[:, None] * e) - O.phase_value(kind, xi, eta - h[:, None] * e)) / (2 * h)
        err = max(err, float(np.max(np.linalg.norm(g - fd, axis=-1) / np.maximum(np.linalg.norm(g, axis=-1), 1e-3))))
    out.append(_judge("phase.gradient_fd", err, "central differences at 100 random points, all kinds", t0))

    # radial decomposition of Phi0 where |eta| >= |eta - xi|
    w = eta - xi
    r1, r2 = np.linalg.norm(eta, axis=-1), np.linalg.norm(w, axis=-1)
    m = r1 >= r2
    cosang = np.sum(eta * w, axis=-1) / (r1 * r2)
    split = O.H1(r1) - O.H1(r2) + O.H1(r2) * (1 - cosang)
    direct = np.sum(O.phase_gradient(PhaseKind.Phi0, xi, eta) * eta / r1[:, None], axis=-1)
    out.append(_judge("phase.radial_split", _rel(split[m], direct[m]), "Phi0 radial derivative at |eta| >= |eta - xi|", t0))

    lhs = np.sum((eta / r1[:, None] - w / r2[:, None]) ** 2, axis=-1) * r1 * r2
    rhs = np.sum(xi**2, axis=-1) - (r1 - r2) ** 2
    out.append(_judge("phase.angle_identity", _rel(lhs, rhs), "100 random points", t0))

    r = rng.uniform(0, 50, 1000)
    s = r * rng.uniform(0, 1, 1000)
    dh = O.symbol_value(SymbolId.H, r) - O.symbol_value(SymbolId.H, s)
    dh1 = O.H1(r) - O.H1(s)
    bad = int(np.sum(dh <= 0) + np.sum(dh1 <= 0))
    out.append(_judge("phase.monotone_H", float(bad), "count of non-increasing pairs among 1000", t0))
    ratio = dh / (np.sqrt(1 + r**2) * (r - s))
    lo, hi = float(ratio.min()), float(ratio.max())
    res = _judge("phase.diff_ratio", lo, f"(H(r)-H(s))/(<r>(r-s)) in [{lo:.3f}, {hi:.3f}]", t0)
    if not hi <= 3.0:
        res = CheckResult(res.check_id, "fail", res.measured, res.expected, res.tolerance, res.note, res.seconds)
    out.append(res)

    al = rng.normal(size=(1000, 2))
    be = rng.normal(size=(1000, 2))
    al /= np.linalg.norm(al, axis=-1)[:, None]
    be /= np.linalg.norm(be, axis=-1)[:, None]
    v = np.linalg.norm(r[:, None] * al - s[:, None] * be, axis=-1)
    bound = (r - s) + s * np.linalg.norm(al - be, axis=-1)
    q = v / bound
    out.append(_judge("phase.vec_diff", float(q.min()), f"|r a - s b| / ((r-s) + s|a-b|) max {q.max():.6f}", t0))
    if q.max() > 1 + 1e-12:
        out[-1] = CheckResult("phase.vec_diff", "fail", out[-1].measured, out[-1].expected, 0.0, out[-1].note)
    return out


def _scan_checks(n_samples: int) -> list:
    t0 = time.perf_counter()
    mins = {}
    for kind, region in A.SCAN_PAIRS:
        mins[f"{kind.value}/{region.value}"] = A.phase_lower_bound_scan(kind, region, n_samples)["min_ratio"]
    worst = min(mins.values())
    note = ", ".join(f"{k}: {v:.4g}" for k, v in mins.items())
    expected, tol = TOLERANCES["phase.scan_positive"]
    return [CheckResult("phase.scan_positive", "pass" if worst > 0 else "fail", worst, expected, tol, note, time.perf_counter() - t0)]


def run_identity_suite(perturb_H: float = 1.0, seed: int = 0, scan_samples: int = 20_000) -> list:
    """All operator and phase identity checks.

    ``perturb_H`` multiplies H inside the finite-difference oracles (a
    sensitivity hook: 1.01 must make the derivative checks fail).
    """
    rng = np.random.default_rng(seed)
    out = []
    out += _operator_checks(rng)
    out += _value_checks()
    out += _derivative_checks(perturb_H)
    out += _propagator_checks(rng)
    out += _phase_checks(rng)
    out += _scan_checks(scan_samples)
    return out


# --------------------------------------------------------------------------
# rate suite


def gaussian_datum(grid, width: float, modulation: float = 0.0, amplitude: float = 1.0) -> Field:
    f = amplitude * np.exp(-grid.r2 / (2 * width**2)) * np.exp(1j * modulation * grid.coords[0])
    return Field(grid, f * np.ones(grid.shape), PHYSICAL)


def _rate(check_id, phi, q, times, t0, note=""):
    fit = A.linear_decay_experiment(phi, q, times)
    return _judge(check_id, fit.exponent, f"{note} window [{times[0]:g}, {times[-1]:g}], r2 = {fit.r_squared:.4f}", t0)


def _rate_2d(b) -> list:
    t0 = time.perf_counter()
    g = make_grid(2, b["n2"], b["L2"])
    phi = gaussian_datum(g, 1.5, 1.5)
    t_hi = 40.0 if b["n2"] >= 256 else 30.0
    times = np.geomspace(5, t_hi, 16)
    return [_rate("rate.linf_2d", phi, np.inf, times, t0, "L^inf, 2D"), _rate("rate.l2", phi, 2, times, t0, "L^2, 2D")]


def _rate_3d(b) -> list:
    t0 = time.perf_counter()
    g = make_grid(3, b["n3"], b["L3"])
    phi = gaussian_datum(g, 1.5, 1.0)
    t_hi = 15.0 if b["n3"] >= 64 else 10.0
    return [_rate("rate.linf_3d", phi, np.inf, np.geomspace(3, t_hi, 16), t0, "L^inf, 3D")]


def _rate_free(b) -> list:
    from .scattering import free_profile

    t0 = time.perf_counter()
    g = make_grid(2, b["n2"], b["L2"])
    phi = gaussian_datum(g, 1.5, 1.5)
    times = np.geomspace(5, 30, 16)
    _, u0 = free_profile(phi, times)
    l4 = [f.physical() for f in u0.fields]
    v4 = [float(np.sum(np.abs(f.values) ** 4) * g.h**2) ** 0.25 for f in l4]
    vinf = [float(np.abs(f.values.real).max()) for f in l4]
    f4, fi = A.decay_fit(times, v4), A.decay_fit(times, vinf)
    return [
        _judge("rate.l4_free_2d", f4.exponent, "||u0(t)||_{L^4}", t0),
        _judge("rate.u01_linf_2d", fi.exponent, "||Re u0(t)||_{L^inf}", t0),
    ]


def _critical_3d(b) -> list:
    from .scattering import ScatteringConfig, ScatteringDivergence, iterate

    t0 = time.perf_counter()
    g = make_grid(3, b["n3"], b["L3"])
    phi = gaussian_datum(g, 3.0, 0.0, 3.0)
    cfg = ScatteringConfig(T=5.0, T_max=40.0, n_nodes=60, sweeps=4, dim=3, eps=0.0)
    try:
        _, diag = iterate(phi, cfg, return_arrays=True)
        state = "converged" if diag.converged else "not converged"
        status, measured, note = "skip", diag.D[-1], f"{state} after {diag.sweeps} sweeps, last D = {diag.D[-1]:.3g}"
    except ScatteringDivergence as exc:
        status, measured, note = "skip", float("nan"), f"divergence detected: {exc}"
    return [CheckResult("rate.critical_3d", status, measured, 0.0, 0.0, note, time.perf_counter() - t0)]


RATE_CHECKS = {"linf_2d": _rate_2d, "linf_3d": _rate_3d, "free_2d": _rate_free, "critical_3d": _critical_3d}


def run_rate_suite(budget: str = "quick", only: Optional[Sequence[str]] = None) -> list:
    """Decay-rate regressions; ``only`` selects keys of :data:`RATE_CHECKS`."""
    if budget not in BUDGETS:
        raise ValueError(f"budget must be one of {sorted(BUDGETS)}")
    b = BUDGETS[budget]
    out = []
    for key, fn in RATE_CHECKS.items():
        if only is None or key in only:
            out += fn(b)
    return out


def write_report(path, results: Sequence[CheckResult]):
    from .io import write_table_csv

    return write_table_csv(path, ["check_id", "status", "measured", "expected", "tolerance", "note"], [r.row() for r in results])
