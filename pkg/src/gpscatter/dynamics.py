"""
Forward integration of the perturbation equation in the diagonal variable.

The perturbation u = psi - 1 obeys

    i u_t + Lap u - 2 Re u = F(u),   F(u) = u^2 + 2|u|^2 + |u|^2 u,

and v = V^{-1}u turns the linear part into v_t = -iHv. Internally v is kept
as a spectral array in which U(0) := 1, so the xi = 0 coefficient of v holds
the mean of u unchanged. That mode is not diagonalised: its real part drives
the imaginary part through the term -2i Re v^(0), which is folded into the
nonlinear right-hand side so that the stiff propagator stays diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .operators import SymbolId, _symbol_array, split_real_imag, symbol_array
from .spectral import PHYSICAL, SPECTRAL, Field, Grid, lp_norm, sobolev_norm

OVERFLOW_LIMIT = 1e3
SCHEMES = ("strang_rk4", "etd_rk2")


class NumericalAbort(RuntimeError):
    """Raised when a trajectory leaves the perturbative range or turns non-finite."""


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    Attributes
    ----------
    dt : float
        Nominal step; each interval between sample times is split evenly.
    scheme : str
        ``"strang_rk4"`` (integrating-factor RK4 about the half step) or
        ``"etd_rk2"`` (Cox-Matthews exponential RK2).
    dealias : bool
        Apply the 2/3 rule to every pointwise product.
    sample_times : tuple of float
        Increasing, nonnegative output times; the final time is appended.
    nonlinear : bool
        Test hook; ``False`` switches F off.
    """

    dt: float = 1e-3
    scheme: str = "strang_rk4"
    dealias: bool = True
    sample_times: tuple = ()
    nonlinear: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        st = np.asarray(self.sample_times, float)
        if np.any(st < 0) or np.any(np.diff(st) <= 0):
            raise ValueError("sample_times must be nonnegative and increasing")


@dataclass
class Trajectory:
    """Time-sampled fields on a shared grid.

    ``variable_tag`` names the variable held ("u", "v" or "z"); ``info`` keeps
    run diagnostics such as conserved-quantity histories.
    """

    grid: Grid
    times: list
    fields: list
    variable_tag: str = "u"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields differ in length")
        if np.any(np.diff(np.asarray(self.times, float)) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for f in self.fields:
            if f.grid != self.grid:
                raise ValueError("all fields must share the trajectory grid")
        if self.variable_tag not in ("u", "v", "z"):
            raise ValueError(f"unknown variable tag {self.variable_tag!r}")

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> Field:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not sampled")
        return self.fields[i]


# --------------------------------------------------------------------------
# pointwise quantities


def _f_array(u: np.ndarray) -> np.ndarray:
    a2 = u.real**2 + u.imag**2
    return u * u + 2 * a2 + a2 * u


def nonlinearity_F(u: Field, dealias: bool = True) -> Field:
    """F(u) = u^2 + 2|u|^2 + |u|^2 u, optionally passed through the 2/3 rule."""
    up = u.physical()
    out = Field(u.grid, _f_array(up.values), PHYSICAL)
    if dealias:
        g = u.grid.fwd(out.values) * u.grid.dealias_mask
        out = Field(u.grid, u.grid.inv(g), PHYSICAL)
    return out


def energy(u: Field) -> float:
    """Riemann sum of |grad u|^2 + (|u|^2 + 2 Re u)^2 / 2."""
    up = u.physical().values
    grid = u.grid
    hd = grid.h**grid.dim
    grad2 = sobolev_norm(u, 1.0, homogeneous=True) ** 2
    w = np.abs(up) ** 2 + 2 * up.real
    return float(grad2 + 0.5 * np.sum(w * w) * hd)


def charge(u: Field) -> float:
    """Riemann sum of |u|^2 + 2 Re u."""
    up = u.physical().values
    hd = u.grid.h**u.grid.dim
    return float(np.sum(np.abs(up) ** 2 + 2 * up.real) * hd)


# --------------------------------------------------------------------------
# the v-system on spectral arrays


class VSystem:
    """Right-hand side pieces of v_t = -iHv + N(v) on one grid."""

    def __init__(self, grid: Grid, dealias: bool = True, nonlinear: bool = True):
        self.grid = grid
        self.dealias = dealias
        self.nonlinear = nonlinear
        self.H = symbol_array(grid, SymbolId.H)
        self.U = _symbol_array(grid, SymbolId.U, 1.0)
        self.Uinv = _symbol_array(grid, SymbolId.Uinv, 1.0)
        self.evals = 0

    def u_hat(self, vh: np.ndarray) -> np.ndarray:
        re, im = split_real_imag(self.grid, vh)
        return self.U * re + 1j * im

    def v_from_u_hat(self, uh: np.ndarray) -> np.ndarray:
        re, im = split_real_imag(self.grid, uh)
        return self.Uinv * re + 1j * im

    def u_phys(self, vh: np.ndarray) -> np.ndarray:
        return self.grid.inv(self.u_hat(vh))

    def N(self, vh: np.ndarray) -> np.ndarray:
        """Nonlinear part -V^{-1}(iF(Vv)) plus the zero-mode coupling."""
        self.evals += 1
        g = self.grid
        out = np.zeros_like(vh)
        if self.nonlinear:
            u = self.u_phys(vh)
            umax = np.abs(u).max()
            if not np.isfinite(umax) or umax > OVERFLOW_LIMIT:
                raise NumericalAbort(f"|u|_inf = {umax:.3e} exceeds {OVERFLOW_LIMIT:g}")
            fh = g.fwd(_f_array(u))
            if self.dealias:
                fh *= g.dealias_mask
            out = -self.v_from_u_hat(1j * fh)
        out.flat[0] += -2j * vh.flat[0].real
        return out

    def rhs(self, vh: np.ndarray) -> np.ndarray:
        return -1j * self.H * vh + self.N(vh)

    # one step of each scheme
    def step_if_rk4(self, vh: np.ndarray, dt: float) -> np.ndarray:
        E = np.exp(-0.5j * dt * self.H)
        w0 = E * vh
        k1 = E * self.N(vh)
        k2 = self.N(w0 + 0.5 * dt * k1)
        k3 = self.N(w0 + 0.5 * dt * k2)
        k4 = self.N(E * (w0 + dt * k3)) / E
        return E * (w0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))

    def step_etd2(self, vh: np.ndarray, dt: float) -> np.ndarray:
        z = -1j * dt * self.H
        ez = np.exp(z)
        phi1, phi2 = _phi12(z)
        n0 = self.N(vh)
        a = ez * vh + dt * phi1 * n0
        return a + dt * phi2 * (self.N(a) - n0)

    def step(self, vh: np.ndarray, dt: float, scheme: str) -> np.ndarray:
        if scheme == "strang_rk4":
            out = self.step_if_rk4(vh, dt)
        elif scheme == "etd_rk2":
            out = self.step_etd2(vh, dt)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if not np.all(np.isfinite(out)):
            raise NumericalAbort("non-finite coefficients after step")
        return out


def _phi12(z: np.ndarray):
    """phi1 = (e^z - 1)/z and phi2 = (e^z - 1 - z)/z^2 with series near 0."""
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z * z / 24 + z**3 / 120, (np.expm1(zs) - zs) / zs**2)
    return phi1, phi2


_systems: dict = {}


def vsystem(grid: Grid, dealias: bool = True, nonlinear: bool = True) -> VSystem:
    key = (grid, dealias, nonlinear)
    if key not in _systems:
        _systems[key] = VSystem(grid, dealias, nonlinear)
    return _systems[key]


# --------------------------------------------------------------------------
# Field-level API


def u_to_v(u: Field) -> Field:
    """v = V^{-1}u with the mean of Re u carried in the zero mode."""
    sys = vsystem(u.grid)
    return Field(u.grid, sys.v_from_u_hat(u.spectral().values), SPECTRAL).physical()


def v_to_u(v: Field) -> Field:
    """Inverse of :func:`u_to_v`."""
    sys = vsystem(v.grid)
    return Field(v.grid, sys.u_hat(v.spectral().values), SPECTRAL).physical()


def rhs_v(v: Field, keep_zero_mode: bool = False, dealias: bool = True) -> Field:
    """dv/dt = -iHv - V^{-1}(iF(Vv)).

    By default V and V^{-1} follow the drop policy (U^{-1} and U vanish at
    xi = 0), which discards the mean of u. ``keep_zero_mode=True`` evaluates
    the closed system used by the integrators, zero-mode coupling included.
    """
    grid = v.grid
    vh = v.spectral().values
    if keep_zero_mode:
        out = vsystem(grid, dealias).rhs(vh)
    else:
        Hs = symbol_array(grid, SymbolId.H)
        re, im = split_real_imag(grid, vh)
        uh = symbol_array(grid, SymbolId.U) * re + 1j * im
        fh = grid.fwd(_f_array(grid.inv(uh)))
        if dealias:
            fh *= grid.dealias_mask
        re, im = split_real_imag(grid, 1j * fh)
        out = -1j * Hs * vh - (symbol_array(grid, SymbolId.Uinv) * re + 1j * im)
    res = Field(grid, out, SPECTRAL)
    return res if v.representation == SPECTRAL else res.physical()


def step(v: Field, dt: float, scheme: str = "strang_rk4", dealias: bool = True, nonlinear: bool = True) -> Field:
    """Advance v by one step of ``scheme`` (zero mode carried, see module notes)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    sys = vsystem(v.grid, dealias, nonlinear)
    out = Field(v.grid, sys.step(v.spectral().values, dt, scheme), SPECTRAL)
    return out if v.representation == SPECTRAL else out.physical()


def advance_hat(sys: VSystem, vh: np.ndarray, duration: float, dt: float, scheme: str) -> np.ndarray:
    """Integrate a spectral array over ``duration`` with steps no larger than dt."""
    if duration <= 0:
        return vh
    nsteps = max(1, int(np.ceil(duration / dt - 1e-9)))
    h = duration / nsteps
    for _ in range(nsteps):
        vh = sys.step(vh, h, scheme)
    return vh


def evolve(v0: Field, T: float, config: SolverConfig, t0: float = 0.0) -> Trajectory:
    """Integrate from t0 to t0 + T, sampling at config.sample_times (plus both ends).

    Sample times are absolute. ``info`` holds energy and charge of u = Vv at
    every sample and their maximal relative drifts.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    grid = v0.grid
    sys = vsystem(grid, config.dealias, config.nonlinear)
    t_end = t0 + T
    times = sorted({t0, t_end, *[t for t in config.sample_times if t0 <= t <= t_end]})
    vh = v0.spectral().values.copy()
    fields, en, ch = [], [], []
    t = t0
    for ts in times:
        vh = advance_hat(sys, vh, ts - t, config.dt, config.scheme)
        t = ts
        vf = Field(grid, vh.copy(), SPECTRAL)
        u = Field(grid, sys.u_phys(vh), PHYSICAL)
        fields.append(vf.physical())
        en.append(energy(u))
        ch.append(charge(u))
    en, ch = np.array(en), np.array(ch)
    info = {
        "energy": en,
        "charge": ch,
        "energy_drift": _rel_drift(en),
        "charge_drift": _rel_drift(ch),
    }
    return Trajectory(grid, times, fields, "v", info)


def _rel_drift(x: np.ndarray) -> float:
    scale = max(abs(x[0]), 1e-300)
    return float(np.max(np.abs(x - x[0])) / scale)


def trajectory_u(traj: Trajectory) -> Trajectory:
    """Map a v-trajectory to the corresponding u-trajectory."""
    if traj.variable_tag == "u":
        return traj
    return Trajectory(traj.grid, list(traj.times), [v_to_u(v) for v in traj.fields], "u", dict(traj.info))


def norm_table(traj: Trajectory) -> list:
    """Rows (t, name, value) for the standard norm set of a u- or v-trajectory."""
    rows = []
    for t, f in zip(traj.times, traj.fields):
        u = v_to_u(f) if traj.variable_tag == "v" else f
        vals = {
            "energy": energy(u),
            "charge": charge(u),
            "L2": lp_norm(u, 2),
            "H1dot": sobolev_norm(u, 1.0, homogeneous=True),
            "L4": lp_norm(u, 4),
            "Linf": lp_norm(u, np.inf),
        }
        rows.extend((t, k, v) for k, v in vals.items())
    return rows
