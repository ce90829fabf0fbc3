"""
Weighted time-Lebesgue norms and the composite norms of the iteration.

All norms are evaluated on sampled spatial norms n(t_j). The weighted norm

    ||u||_{W^{s,b}_T} = sup_{S >= T} S^s || n ||_{L^{1/b}(S, 2S)}

is replaced by its discrete dyadic version S in {T, 2T, 4T, ...} with
2S inside the sampled range, a lower bound for the continuum sup.
"""

from __future__ import annotations

from itertools import product
from typing import Callable, Sequence

import numpy as np

from .operators import SymbolId, symbol_array
from .spectral import SPECTRAL, Field, Grid, lp_norm, sobolev_norm

MIN_NODES = 8


class InsufficientSampling(ValueError):
    """Fewer than MIN_NODES samples fall in a window."""


def _window(times: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return (times >= lo * (1 - 1e-12)) & (times <= hi * (1 + 1e-12))


def _time_norm(times: np.ndarray, vals: np.ndarray, b: float) -> float:
    if b == 0:
        return float(np.max(vals))
    p = 1.0 / b
    return float(np.trapezoid(vals**p, times) ** (1.0 / p))


def dyadic_starts(times: Sequence[float], T: float, to_infinity: bool = False) -> list:
    """Dyadic S = T 2^m whose window lies in the sampled range.

    With ``to_infinity`` the window is [S, t_last] and S runs while S <= t_last / 2.
    """
    t_last = float(times[-1])
    out, S = [], float(T)
    limit = t_last / 2 if to_infinity else t_last / 2
    while S <= limit * (1 + 1e-12):
        out.append(S)
        S *= 2
    return out


def wl_norm_series(times, values, s: float, b: float, T: float) -> float:
    """Discrete W^{s,b}_T norm of a scalar series n(t_j) >= 0."""
    if not 0 <= b <= 1:
        raise ValueError("b must lie in [0, 1]")
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    starts = dyadic_starts(times, T)
    if not starts:
        raise InsufficientSampling(f"no dyadic window [S, 2S] with S >= {T} inside the samples")
    best = 0.0
    for S in starts:
        m = _window(times, S, 2 * S)
        if m.sum() < MIN_NODES:
            raise InsufficientSampling(f"{m.sum()} samples in [{S:g}, {2 * S:g}]")
        best = max(best, S**s * _time_norm(times[m], values[m], b))
    return best


def _l2(f: Field) -> float:
    return lp_norm(f, 2)


def wl_norm(traj, s: float, b: float, T: float, spatial: Callable = _l2) -> float:
    """W^{s,b}_T norm of a trajectory with the given spatial norm (default L^2)."""
    vals = [spatial(f) for f in traj.fields]
    return wl_norm_series(traj.times, vals, s, b, T)


def x_eps_series(times, values, eps: float, T: float) -> float:
    """sup_S S^{1/2 - 8 eps} || n ||_{L^p(S, t_last)} with 1/p = 10 eps."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    starts = dyadic_starts(times, T, to_infinity=True)
    if not starts:
        raise InsufficientSampling("time range too short for the X^eps norm")
    b = 10.0 * eps
    if b > 1:
        raise ValueError("eps must be at most 1/10")
    best = 0.0
    for S in starts:
        m = times >= S * (1 - 1e-12)
        if m.sum() < MIN_NODES:
            raise InsufficientSampling(f"{m.sum()} samples after {S:g}")
        best = max(best, S ** (0.5 - 8 * eps) * _time_norm(times[m], values[m], b))
    return best


def x_eps_exponent_q(eps: float) -> float:
    """Spatial exponent q with 1/q = 1/3 - eps."""
    return 1.0 / (1.0 / 3.0 - eps)


def sobolev_lq(grid: Grid, g: np.ndarray, q: float) -> float:
    """H^1_q norm ||<grad> f||_{L^q} from the transform g of f."""
    w = np.sqrt(1.0 + grid.kabs**2)
    a = np.abs(grid.inv(w * g))
    if np.isinf(q):
        return float(a.max())
    return float((np.sum(a**q) * grid.h**grid.dim) ** (1.0 / q))


def x_eps_norm(traj, eps: float, T: float) -> float:
    """X^eps_T norm: sup_S S^{1/2-8eps} ||u||_{L^p_t(S, t_last; H^1_q)}."""
    q = x_eps_exponent_q(eps)
    vals = [sobolev_lq(traj.grid, f.spectral().values, q) for f in traj.fields]
    return x_eps_series(traj.times, vals, eps, T)


# --------------------------------------------------------------------------
# per-node spatial pieces of the composite norms


def l2_hat(grid: Grid, g: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(g) ** 2) / grid.volume))


def hdot_hat(grid: Grid, g: np.ndarray, s: float) -> float:
    w = grid.kabs**s
    return float(np.sqrt(np.sum((w * np.abs(g)) ** 2) / grid.volume))


def lp_phys(grid: Grid, a: np.ndarray, p: float) -> float:
    m = np.abs(a)
    if np.isinf(p):
        return float(m.max())
    return float((np.sum(m**p) * grid.h**grid.dim) ** (1.0 / p))


def z2_pieces(grid: Grid, zh: np.ndarray) -> dict:
    """Spatial norms entering Z^2: H^1-dot and H^{1/2}-dot."""
    return {"H1dot": hdot_hat(grid, zh, 1.0), "Hhalf": hdot_hat(grid, zh, 0.5)}


def zprime_pieces(grid: Grid, u: np.ndarray, uh: np.ndarray = None) -> dict:
    """Spatial norms entering Z': L^4, L^2 of Re u and L^2 of grad u."""
    if uh is None:
        uh = grid.fwd(u)
    return {
        "L4": lp_phys(grid, u, 4),
        "L2re": float(np.sqrt(np.sum(u.real**2) * grid.h**grid.dim)),
        "L2grad": hdot_hat(grid, uh, 1.0),
    }


def free_pieces(grid: Grid, u0: np.ndarray, u0h: np.ndarray = None) -> dict:
    """Spatial norms of the free part entering Z: L^4, L^inf of Re u0 and of grad u0."""
    if u0h is None:
        u0h = grid.fwd(u0)
    gmax = np.zeros(grid.shape)
    for k in grid.kvec:
        gmax += np.abs(grid.inv(1j * k * u0h)) ** 2
    return {
        "L4": lp_phys(grid, u0, 4),
        "Linf_re": float(np.abs(u0.real).max()),
        "Linf_grad": float(np.sqrt(gmax.max())),
    }


def z2_norm(times, pieces: dict, alpha: float, beta: float, T: float) -> float:
    return wl_norm_series(times, pieces["H1dot"], alpha, 0, T) + wl_norm_series(times, pieces["Hhalf"], beta, 0, T)


def zprime_norm(times, pieces: dict, alpha: float, beta: float, T: float) -> float:
    return (
        wl_norm_series(times, pieces["L4"], beta, 0, T)
        + wl_norm_series(times, pieces["L2re"], alpha, 0, T)
        + wl_norm_series(times, pieces["L2grad"], alpha, 0, T)
    )


def free_norm(times, pieces: dict, T: float) -> float:
    return (
        wl_norm_series(times, pieces["L4"], 0.5, 0, T)
        + wl_norm_series(times, pieces["Linf_re"], 1.0, 0, T)
        + wl_norm_series(times, pieces["Linf_grad"], 1.0, 0, T)
    )


def _stack(rows: list) -> dict:
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


def script_z_norms(traj, u0traj, cfg) -> dict:
    """Z_T record of a u-trajectory relative to its free part, constituents included."""
    grid = traj.grid
    times = np.asarray(traj.times, float)
    fr = _stack([free_pieces(grid, f.physical().values) for f in u0traj.fields])
    dp = _stack(
        [zprime_pieces(grid, (f.physical() - g.physical()).values) for f, g in zip(traj.fields, u0traj.fields)]
    )
    rec = {
        "u0_L4_W_half": wl_norm_series(times, fr["L4"], 0.5, 0, cfg.T),
        "u0_Re_Linf_W_1": wl_norm_series(times, fr["Linf_re"], 1.0, 0, cfg.T),
        "u0_grad_Linf_W_1": wl_norm_series(times, fr["Linf_grad"], 1.0, 0, cfg.T),
        "diff_L4_W_beta": wl_norm_series(times, dp["L4"], cfg.beta, 0, cfg.T),
        "diff_Re_L2_W_alpha": wl_norm_series(times, dp["L2re"], cfg.alpha, 0, cfg.T),
        "diff_grad_L2_W_alpha": wl_norm_series(times, dp["L2grad"], cfg.alpha, 0, cfg.T),
    }
    rec["Zprime"] = rec["diff_L4_W_beta"] + rec["diff_Re_L2_W_alpha"] + rec["diff_grad_L2_W_alpha"]
    rec["Z"] = rec["u0_L4_W_half"] + rec["u0_Re_Linf_W_1"] + rec["u0_grad_Linf_W_1"] + rec["Zprime"]
    return rec


def data_norm_N(phi: Field) -> float:
    """||phi||_{H^1} + sum_{|k|<=2} ||<xi>^{-1/2} |xi|^{|k|} d^k phi~||_{L^2 and L^inf}.

    d^k in xi is realised as the transform of (-ix)^k phi; the L^2 part uses
    the lattice measure (2 pi / L)^d. Meaningful only for phi localised well
    inside the box.
    """
    grid = phi.grid
    p = phi.physical().values
    total = sobolev_norm(phi, 1.0)
    w = (1.0 + grid.kabs**2) ** -0.25
    dxi = grid.dk**grid.dim
    for k in product(range(3), repeat=grid.dim):
        order = sum(k)
        if order > 2:
            continue
        f = p.copy()
        for axis, power in enumerate(k):
            f = f * (-1j * grid.coords[axis]) ** power
        g = w * grid.kabs**order * np.abs(grid.fwd(f))
        total += float(np.sqrt(np.sum(g**2) * dxi)) + float(g.max())
    return total
