"""
Normal form z = V^{-1}(u + P|u|^2/2), its inversion and the transformed nonlinearity.

With P = 2/(2 - Lap) the non-derivative quadratic interaction disappears and z
solves

    z_t = -iHz + N2(u) + N3(u),
    N2(u) = -2i u1^2 - 2 P U^{-1} div(u1 grad u2),
    N3(u) = -i |u|^2 u1 + U(|u|^2 u2).

U^{-1} loses the xi = 0 coefficient of the real part; ``to_normal_form``
stores it on the returned Field so that ``from_normal_form`` can rebuild the
mean of u1 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .operators import SymbolId, propagator, split_real_imag, symbol_array
from .spectral import PHYSICAL, SPECTRAL, Field, Grid, lp_norm


@dataclass(frozen=True)
class NormalFormPair:
    z: Field
    u: Field
    converged: bool
    fixed_point_iters: int


def _dealiased_fwd(grid: Grid, a: np.ndarray, dealias: bool) -> np.ndarray:
    g = grid.fwd(a)
    return g * grid.dealias_mask if dealias else g


def to_normal_form(u: Field, dealias: bool = True) -> Field:
    """z = U^{-1}(u1 + P|u|^2/2) + i u2 (physical Field).

    The dropped xi = 0 coefficient of u1 + P|u|^2/2 is kept in
    ``dropped_zero_mode``.
    """
    grid = u.grid
    up = u.physical().values
    w1 = grid.fwd(up.real) + 0.5 * symbol_array(grid, SymbolId.P) * _dealiased_fwd(grid, np.abs(up) ** 2, dealias)
    dropped = complex(w1.flat[0])
    zh = symbol_array(grid, SymbolId.Uinv) * w1
    z = grid.inv(zh).real + 1j * up.imag
    return Field(grid, z, PHYSICAL, dropped)


def from_normal_form(z: Field, tol: float = 1e-12, maxiter: int = 50, dealias: bool = True) -> NormalFormPair:
    """Solve u = Vz - P|u|^2/2 by fixed-point iteration from u = Vz.

    u2 = z2 throughout. The zero mode of u1 is fixed by the iteration, with
    ``z.dropped_zero_mode`` (the lost mean of u1 + P|u|^2/2) added back.
    Stops when the L^2 change is at most ``tol * (1 + ||u||)``.
    """
    grid = z.grid
    zp = z.physical()
    zh1 = grid.fwd(zp.values.real)
    base = symbol_array(grid, SymbolId.U) * zh1
    base.flat[0] = z.dropped_zero_mode.real
    Ps = symbol_array(grid, SymbolId.P)
    u2 = zp.values.imag
    u1 = grid.inv(base).real
    hist = []
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        a2 = u1 * u1 + u2 * u2
        new = grid.inv(base - 0.5 * Ps * _dealiased_fwd(grid, a2, dealias)).real
        diff = np.sqrt(np.sum((new - u1) ** 2) * grid.h**grid.dim)
        u1 = new
        hist.append(diff)
        norm = np.sqrt(np.sum(u1 * u1 + u2 * u2) * grid.h**grid.dim)
        if diff <= tol * (1 + norm):
            converged = True
            break
    pair = NormalFormPair(z, Field(grid, u1 + 1j * u2, PHYSICAL), converged, it)
    object.__setattr__(pair, "history", hist)
    return pair


def _grad_hat(grid: Grid, g: np.ndarray) -> list:
    return [1j * k * g for k in grid.kvec]


def N2(u: Field, dealias: bool = True) -> Field:
    """-2i u1^2 - 2 P U^{-1} div(u1 grad u2)."""
    return Field(u.grid, u.grid.inv(n2_hat(u.grid, u.physical().values, dealias)), PHYSICAL)


def N3(u: Field, dealias: bool = True) -> Field:
    """-i|u|^2 u1 + U(|u|^2 u2)."""
    return Field(u.grid, u.grid.inv(n3_hat(u.grid, u.physical().values, dealias)), PHYSICAL)


def n2_parts_hat(grid: Grid, u: np.ndarray, dealias: bool = True):
    """Transforms of the two summands of N2 for a physical array u."""
    u1, u2 = u.real, u.imag
    first = -2j * _dealiased_fwd(grid, u1 * u1, dealias)
    g2 = grid.fwd(u2)
    flux = [_dealiased_fwd(grid, u1 * grid.inv(d).real, dealias) for d in _grad_hat(grid, g2)]
    div = sum(1j * k * f for k, f in zip(grid.kvec, flux))
    mult = symbol_array(grid, SymbolId.P) * symbol_array(grid, SymbolId.Uinv)
    second = -2 * mult * div
    return first, second


def n2_hat(grid: Grid, u: np.ndarray, dealias: bool = True) -> np.ndarray:
    a, b = n2_parts_hat(grid, u, dealias)
    return a + b


def n3_hat(grid: Grid, u: np.ndarray, dealias: bool = True) -> np.ndarray:
    u1, u2 = u.real, u.imag
    a2 = u1 * u1 + u2 * u2
    return -1j * _dealiased_fwd(grid, a2 * u1, dealias) + symbol_array(grid, SymbolId.U) * _dealiased_fwd(
        grid, a2 * u2, dealias
    )


def duhamel_residual(ztraj: Trajectory, utraj: Trajectory, T: float, dealias: bool = True) -> float:
    """Max over samples of || z(t) - e^{-iH(t-T)} z(T) - int_T^t e^{-iH(t-s)} (N2 + N3)(s) ds - drift ||_{L^2}.

    The integral is a composite trapezoid over the trajectory samples, built
    forward recursively. ``drift`` accounts for the undiagonalised zero mode:
    the mean of Im z moves by -2 d (t - T) where d is the dropped mean stored
    on the z samples.
    """
    if ztraj.grid != utraj.grid or len(ztraj) != len(utraj):
        raise ValueError("trajectories are not aligned")
    if np.any(np.abs(np.asarray(ztraj.times) - np.asarray(utraj.times)) > 1e-12):
        raise ValueError("trajectory time grids differ")
    grid = ztraj.grid
    times = np.asarray(ztraj.times, float)
    i0 = int(np.argmin(np.abs(times - T)))
    if abs(times[i0] - T) > 1e-9:
        raise ValueError("T is not a sample time")

    def nhat(k):
        up = utraj.fields[k].physical().values
        return n2_hat(grid, up, dealias) + n3_hat(grid, up, dealias)

    zT = ztraj.fields[i0].spectral().values
    dT = ztraj.fields[i0].dropped_zero_mode.real
    worst = 0.0
    for direction in (1, -1):
        acc = np.zeros(grid.shape, complex)
        n_prev = nhat(i0)
        k = i0 + direction
        while 0 <= k < len(times):
            dt = times[k] - times[k - direction]
            E = propagator(grid, dt)
            n_cur = nhat(k)
            acc = E * (acc + 0.5 * dt * n_prev) + 0.5 * dt * n_cur
            t = times[k]
            pred = propagator(grid, t - T) * zT + acc
            d_mean = 0.5 * (dT + ztraj.fields[k].dropped_zero_mode.real)
            pred.flat[0] += -2j * d_mean * (t - T)
            res = ztraj.fields[k].spectral().values - pred
            worst = max(worst, float(np.sqrt(np.sum(np.abs(res) ** 2) / grid.volume)))
            n_prev = n_cur
            k += direction
    return worst
