"""
Final-state construction: solutions prescribed by their free profile at t -> inf.

Given phi, the free flow z0 = exp(-iHt) phi, u0 = V z0 and

    z = z0 + int_inf^t exp(-iH(t-s)) [N2(u) + N3(u)] ds,   u = Vz - P|u|^2/2

is solved on [T, T_max] by the Jacobi iteration

    z_(k+1) = z0 + Tri(u_(k)) + Dif(u_(k)) + Asy(u0),
    u_(k+1) = V z_(k) - P|u_(k)|^2/2.

The integral from infinity is cut at T_max; the neglected tail is estimated
and reported. Node grids are geometric in t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import weighted as W
from .dynamics import OVERFLOW_LIMIT, Trajectory
from .normal_form import n2_hat, n3_hat
from .operators import SymbolId, propagator, split_real_imag, symbol_array
from .spectral import PHYSICAL, SPECTRAL, Field, Grid, besov_norm


class ScatteringDivergence(RuntimeError):
    """The iteration stopped contracting; ``diagnostics`` holds the history."""

    def __init__(self, message: str, diagnostics: "IterationDiagnostics"):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ScatteringConfig:
    """Parameters of the final-state iteration.

    Attributes
    ----------
    T, T_max : float
        The solution is built on [T, T_max]; T >= 1.
    n_nodes : int
        Number of geometric time nodes (ignored when ``time_nodes`` is given).
    time_nodes : tuple, optional
        Explicit increasing nodes from T to T_max.
    sweeps : int
        Sweep budget.
    tol : float
        Stop when D_k <= tol.
    alpha, beta, kappa : float
        Weights of the diagnostic norms; need beta < 1/2, 1 - beta < alpha < 2 beta,
        kappa in (0, 1/4) and 1/2 + kappa < alpha < 2 beta - kappa.
    dim : int
        2 or 3.
    eps : float
        Exponent of the X^eps norm used for the diagnostics in 3D.
    symbol_scale : float
        Test hook; the propagator uses exp(-i scale H t).
    update : str
        ``"jacobi"`` (u_(k+1) from z_(k)) or ``"seidel"`` (u_(k+1) from z_(k+1)).
    """

    T: float = 10.0
    T_max: float = 80.0
    n_nodes: int = 600
    time_nodes: Optional[tuple] = None
    sweeps: int = 12
    tol: float = 1e-8
    alpha: float = 0.9
    beta: float = 0.48
    kappa: float = 0.05
    dim: int = 2
    eps: float = 3.0 / 68.0
    dealias: bool = True
    symbol_scale: float = 1.0
    update: str = "jacobi"

    def __post_init__(self):
        if self.update not in ("jacobi", "seidel"):
            raise ValueError("update must be 'jacobi' or 'seidel'")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.T_max > self.T:
            raise ValueError("T_max must exceed T")
        a, b, k = self.alpha, self.beta, self.kappa
        if not (b < 0.5 and 1 - b < a < 2 * b):
            raise ValueError("need beta < 1/2 and 1 - beta < alpha < 2 beta")
        if not (0 < k < 0.25 and 0.5 + k < a < 2 * b - k):
            raise ValueError("need kappa in (0, 1/4) and 1/2 + kappa < alpha < 2 beta - kappa")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not 0 <= self.eps <= 0.1:
            raise ValueError("eps must lie in [0, 1/10]")
        if self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if self.time_nodes is not None:
            t = np.asarray(self.time_nodes, float)
            if np.any(np.diff(t) <= 0) or abs(t[0] - self.T) > 1e-12 or abs(t[-1] - self.T_max) > 1e-9:
                raise ValueError("time_nodes must increase from T to T_max")
        elif self.n_nodes < 2 * W.MIN_NODES:
            raise ValueError("too few nodes")

    def nodes(self) -> np.ndarray:
        if self.time_nodes is not None:
            return np.asarray(self.time_nodes, float)
        return geometric_nodes(self.T, self.T_max, self.n_nodes)


def geometric_nodes(T: float, T_max: float, n: int) -> np.ndarray:
    t = T * (T_max / T) ** (np.arange(n) / (n - 1))
    t[-1] = T_max
    return t


@dataclass
class IterationDiagnostics:
    D: list = field(default_factory=list)
    E: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    components: list = field(default_factory=list)
    converged: bool = False
    sweeps: int = 0
    tail_estimate: float = float("nan")
    phi_besov: float = float("nan")
    contraction_held_at: float = float("nan")
    note: str = ""

    def record(self, D: float, E: float, parts: dict):
        if self.D:
            self.contraction_ratios.append(D / self.D[-1] if self.D[-1] > 0 else 0.0)
        self.D.append(D)
        self.E.append(E)
        self.components.append(parts)
        self.sweeps = len(self.D)


# --------------------------------------------------------------------------
# free flow and Duhamel integrals


def free_profile(phi: Field, times) -> tuple:
    """z0(t) = exp(-iHt) phi and u0 = V z0 at the given times."""
    grid = phi.grid
    ph = phi.spectral().values
    Us = symbol_array(grid, SymbolId.U)
    zs, us = [], []
    for t in times:
        zh = propagator(grid, t) * ph
        re, im = split_real_imag(grid, zh)
        zs.append(Field(grid, grid.inv(zh), PHYSICAL))
        us.append(Field(grid, grid.inv(Us * re + 1j * im), PHYSICAL))
    times = list(map(float, times))
    return Trajectory(grid, times, zs, "z"), Trajectory(grid, times, us, "u")


def duhamel_nodes(grid: Grid, times, source: Callable[[int], np.ndarray], symbol_scale: float = 1.0, out=None):
    """I(t_j) = int_{t_last}^{t_j} exp(-iH(t_j - s)) N(s) ds at every node.

    ``source(j)`` returns the transform of N at node j. Composite trapezoid
    with each node propagated exactly, computed backwards:

        I_j = exp(iH d)(I_{j+1} - d/2 N_{j+1}) - d/2 N_j,   d = t_{j+1} - t_j.

    Results are spectral arrays, written into ``out`` when given.
    """
    times = np.asarray(times, float)
    M = len(times)
    res = out if out is not None else [None] * M
    acc = np.zeros(grid.shape, complex)
    n_next = source(M - 1)
    res[M - 1] = acc.copy()
    for j in range(M - 2, -1, -1):
        d = times[j + 1] - times[j]
        n_cur = source(j)
        acc = propagator(grid, -d, symbol_scale) * (acc - 0.5 * d * n_next) - 0.5 * d * n_cur
        res[j] = acc.copy() if out is None else acc
        n_next = n_cur
    return res


def tail_estimate(times, source_norms) -> float:
    """L^2 size of int_{T_max}^inf N ds under a power-law fit of the last quarter of nodes."""
    times = np.asarray(times, float)
    vals = np.asarray(source_norms, float)
    k = max(W.MIN_NODES, len(times) // 4)
    tt, vv = times[-k:], vals[-k:]
    if np.any(vv <= 0):
        return 0.0
    p = -np.polyfit(np.log(tt), np.log(vv), 1)[0]
    if p <= 1:
        return float("inf")
    return float(vv[-1] * tt[-1] / (p - 1))


def _check_node_grid(traj: Trajectory, t: float, T_max: float):
    times = np.asarray(traj.times)
    if abs(times[-1] - T_max) > 1e-9 * max(1.0, T_max):
        raise ValueError("T_max must be the last node")
    if not times[0] - 1e-12 <= t <= T_max + 1e-12:
        raise ValueError(f"t = {t} outside the node range")


def duhamel_from_infinity(Ntraj: Trajectory, t: float, T_max: float, symbol_scale: float = 1.0) -> Field:
    """-int_t^{T_max} exp(-iH(t-s)) N(s) ds over the nodes >= t (t must be a node)."""
    _check_node_grid(Ntraj, t, T_max)
    times = np.asarray(Ntraj.times, float)
    j0 = int(np.argmin(np.abs(times - t)))
    if abs(times[j0] - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a node")
    sub = times[j0:]
    res = duhamel_nodes(Ntraj.grid, sub, lambda j: Ntraj.fields[j0 + j].spectral().values, symbol_scale)
    return Field(Ntraj.grid, res[0], SPECTRAL).physical()


def _duhamel_traj(utrajs, source_fn, dealias=True) -> Trajectory:
    ref = utrajs[0]
    grid = ref.grid
    res = duhamel_nodes(grid, ref.times, lambda j: source_fn(*[u.fields[j].physical().values for u in utrajs]))
    return Trajectory(grid, list(ref.times), [Field(grid, grid.inv(r), PHYSICAL) for r in res], "z")


def tri_term(utraj: Trajectory, dealias: bool = True) -> Trajectory:
    """int_inf^t exp(-iH(t-s)) N3(u) ds at every node."""
    g = utraj.grid
    return _duhamel_traj([utraj], lambda u: n3_hat(g, u, dealias))


def dif_term(utraj: Trajectory, u0traj: Trajectory, dealias: bool = True) -> Trajectory:
    """int_inf^t exp(-iH(t-s)) [N2(u) - N2(u0)] ds at every node."""
    g = utraj.grid
    return _duhamel_traj([utraj, u0traj], lambda u, u0: n2_hat(g, u, dealias) - n2_hat(g, u0, dealias))


def asy_term(u0traj: Trajectory, dealias: bool = True) -> Trajectory:
    """int_inf^t exp(-iH(t-s)) N2(u0) ds at every node."""
    g = u0traj.grid
    return _duhamel_traj([u0traj], lambda u0: n2_hat(g, u0, dealias))


def z_prime(z0traj: Trajectory, dealias: bool = True) -> Trajectory:
    """z' = i int_inf^t exp(-iH(t-s)) |U z0|^2 ds at every node."""
    grid = z0traj.grid
    Us = symbol_array(grid, SymbolId.U)

    def src(z0):
        uz = grid.inv(Us * grid.fwd(z0))
        g = grid.fwd(np.abs(uz) ** 2)
        return 1j * (g * grid.dealias_mask if dealias else g)

    return _duhamel_traj([z0traj], src)


def z_prime_from_phi(phi: Field, times, dealias: bool = True, keep=None) -> dict:
    """Spatial norms of z' at the nodes, computing z0 on the fly.

    ``keep`` lists node indices whose z' fields are returned as well.
    """
    grid = phi.grid
    ph = phi.spectral().values
    Us = symbol_array(grid, SymbolId.U)
    times = np.asarray(times, float)

    def src(j):
        uz = grid.inv(Us * propagator(grid, times[j]) * ph)
        g = grid.fwd(np.abs(uz) ** 2)
        return 1j * (g * grid.dealias_mask if dealias else g)

    norms = {"H1dot": np.zeros(len(times)), "L2": np.zeros(len(times))}
    kept = {}

    class _Sink(list):
        def __setitem__(self, j, val):
            norms["H1dot"][j] = W.hdot_hat(grid, val, 1.0)
            norms["L2"][j] = W.l2_hat(grid, val)
            if keep is not None and j in keep:
                kept[j] = val.copy()

    duhamel_nodes(grid, times, src, out=_Sink([None] * len(times)))
    return {"times": times, "norms": norms, "fields": kept}


def nu_field(u: Field, dealias: bool = True) -> Field:
    """nu = (2 - Lap)^{-1} U^{-1} |u|^2; the dropped xi = 0 coefficient is recorded."""
    grid = u.grid
    g = grid.fwd(np.abs(u.physical().values) ** 2)
    if dealias:
        g = g * grid.dealias_mask
    dropped = complex(g.flat[0])
    m = symbol_array(grid, SymbolId.InvTwoMinusLap) * symbol_array(grid, SymbolId.Uinv)
    return Field(grid, grid.inv(m * g), PHYSICAL, dropped)


def correction_report(res: "ScatteringResult", eps: float = 0.1, dealias: bool = True) -> dict:
    """Norms of the asymptotic corrections at every node.

    With V^{-1}u = z0 - nu + z' + z'' and z = V^{-1}u + nu, the remainder is
    z'' = z - z0 - z'. Columns: t, z'_H1dot, z'_Heps, nu_H1H2 (Hdot^1 + Hdot^2),
    nu_Heps, z''_H1.
    """
    grid = res.grid
    times = np.asarray(res.times, float)
    ph = res.phi.spectral().values
    M = len(times)
    cols = {k: np.zeros(M) for k in ("zp_H1dot", "zp_Heps", "nu_H1H2", "nu_Heps", "zpp_H1")}
    nu_mult = symbol_array(grid, SymbolId.InvTwoMinusLap) * symbol_array(grid, SymbolId.Uinv)
    mask = grid.dealias_mask if dealias else 1.0
    Us = symbol_array(grid, SymbolId.U)

    def src(j):
        uz = grid.inv(Us * propagator(grid, times[j]) * ph)
        return 1j * mask * grid.fwd(np.abs(uz) ** 2)

    class _Sink(list):
        def __setitem__(self, j, zp):
            cols["zp_H1dot"][j] = W.hdot_hat(grid, zp, 1.0)
            cols["zp_Heps"][j] = W.hdot_hat(grid, zp, eps)
            nu = nu_mult * mask * grid.fwd(np.abs(res.u[j]) ** 2)
            cols["nu_H1H2"][j] = W.hdot_hat(grid, nu, 1.0) + W.hdot_hat(grid, nu, 2.0)
            cols["nu_Heps"][j] = W.hdot_hat(grid, nu, eps)
            zpp = res.z[j] - propagator(grid, times[j]) * ph - zp
            cols["zpp_H1"][j] = float(np.sqrt(np.sum((1 + grid.kabs**2) * np.abs(zpp) ** 2) / grid.volume))

    duhamel_nodes(grid, times, src, out=_Sink([None] * M))
    cols["t"] = times
    return cols


# --------------------------------------------------------------------------
# the iteration


@dataclass
class ScatteringResult:
    """Final iterates on the node grid, kept as dense arrays.

    ``z`` holds transforms, ``u`` physical values; both have the node index first.
    """

    grid: Grid
    times: np.ndarray
    z: np.ndarray
    u: np.ndarray
    phi: Field

    def ztraj(self) -> Trajectory:
        g = self.grid
        return Trajectory(g, list(self.times), [Field(g, g.inv(z), PHYSICAL) for z in self.z], "z")

    def utraj(self) -> Trajectory:
        g = self.grid
        return Trajectory(g, list(self.times), [Field(g, u.copy(), PHYSICAL) for u in self.u], "u")

    def u_at(self, j: int) -> Field:
        return Field(self.grid, self.u[j].copy(), PHYSICAL)

    def z_at(self, j: int) -> Field:
        return Field(self.grid, self.z[j].copy(), SPECTRAL).physical()


def iterate(phi: Field, cfg: ScatteringConfig, return_arrays: bool = False):
    """Run the Jacobi iteration until D_k <= tol or the sweep budget is spent.

    Returns ``(ztraj, utraj, diagnostics)``; with ``return_arrays`` the first
    two are replaced by a single :class:`ScatteringResult` (less memory).

    In 2D, D_k = ||z_(k) - z_(k-1)||_{Z^2} + ||u_(k+1) - u_(k)||_{Z'} and
    E_k = ||u_(k)||_Z. In 3D both use the X^eps norm (plus the sup-in-time
    H^1 norm for z). Raises :class:`ScatteringDivergence` when D_k grows on
    three consecutive sweeps or the iterates overflow.
    """
    grid = phi.grid
    if grid.dim != cfg.dim:
        raise ValueError(f"datum is {grid.dim}D but config has dim={cfg.dim}")
    times = cfg.nodes()
    M = len(times)
    ph = phi.spectral().values
    Us = symbol_array(grid, SymbolId.U)
    Ps = symbol_array(grid, SymbolId.P)
    mask = grid.dealias_mask if cfg.dealias else 1.0
    scale = cfg.symbol_scale

    diag = IterationDiagnostics()
    diag.phi_besov = besov_norm(phi, 1.0, 1.0, 1.0)

    def z0_hat(j):
        return propagator(grid, times[j], scale) * ph

    def vmap_hat(zh):
        re, im = split_real_imag(grid, zh)
        return Us * re + 1j * im

    def u0_phys(j):
        return grid.inv(vmap_hat(z0_hat(j)))

    def u_update(zh, u):
        return grid.inv(vmap_hat(zh) - 0.5 * Ps * mask * grid.fwd(np.abs(u) ** 2))

    # free part norms and the cached Asy term
    q3 = W.x_eps_exponent_q(cfg.eps)
    free_rows = []
    asy = np.empty((M,) + grid.shape, complex)
    src_norm = np.zeros(M)

    def asy_src(j):
        u0 = u0_phys(j)
        if cfg.dim == 2:
            free_rows.append((j, W.free_pieces(grid, u0)))
        g = n2_hat(grid, u0, cfg.dealias)
        src_norm[j] = W.l2_hat(grid, g)
        return g

    duhamel_nodes(grid, times, asy_src, scale, out=asy)
    diag.tail_estimate = tail_estimate(times, src_norm)
    free = None
    if cfg.dim == 2:
        free_rows.sort(key=lambda r: r[0])
        free = W._stack([r[1] for r in free_rows])
        free_Z = W.free_norm(times, free, cfg.T)
    else:
        free_X = W.x_eps_series(
            times, [W.sobolev_lq(grid, vmap_hat(z0_hat(j)), q3) for j in range(M)], cfg.eps, cfg.T
        )

    Z = np.empty((M,) + grid.shape, complex)
    Uu = np.empty((M,) + grid.shape, complex)
    for j in range(M):
        Z[j] = z0_hat(j)
        Uu[j] = u0_phys(j)

    for k in range(1, cfg.sweeps + 1):
        rows = [None] * M
        n_next = None
        acc = np.zeros(grid.shape, complex)
        for j in range(M - 1, -1, -1):
            u0 = u0_phys(j)
            uk = Uu[j]
            src = n3_hat(grid, uk, cfg.dealias) + n2_hat(grid, uk, cfg.dealias) - n2_hat(grid, u0, cfg.dealias)
            if j < M - 1:
                d = times[j + 1] - times[j]
                acc = propagator(grid, -d, scale) * (acc - 0.5 * d * n_next) - 0.5 * d * src
            n_next = src
            z_new = z0_hat(j) + acc + asy[j]
            u_new = u_update(Z[j] if cfg.update == "jacobi" else z_new, uk)
            umax = np.abs(u_new).max()
            if not np.isfinite(umax) or umax > OVERFLOW_LIMIT:
                diag.note = f"overflow at sweep {k}, t = {times[j]:.3g}"
                raise ScatteringDivergence(diag.note, diag)
            u_next = u_update(z_new, u_new)
            dz = z_new - Z[j]
            du = u_next - u_new
            if cfg.dim == 2:
                rows[j] = {
                    "z": W.z2_pieces(grid, dz),
                    "u": W.zprime_pieces(grid, du),
                    "E": W.zprime_pieces(grid, u_new - u0),
                }
            else:
                rows[j] = {
                    "z_X": W.sobolev_lq(grid, dz, q3),
                    "z_H1": float(np.sqrt(np.sum((1 + grid.kabs**2) * np.abs(dz) ** 2) / grid.volume)),
                    "u_X": W.sobolev_lq(grid, grid.fwd(du), q3),
                    "E_X": W.sobolev_lq(grid, grid.fwd(u_new), q3),
                }
            Z[j] = z_new
            Uu[j] = u_new
        if cfg.dim == 2:
            zp = W._stack([r["z"] for r in rows])
            upc = W._stack([r["u"] for r in rows])
            ep = W._stack([r["E"] for r in rows])
            Dz = W.z2_norm(times, zp, cfg.alpha, cfg.beta, cfg.T)
            Du = W.zprime_norm(times, upc, cfg.alpha, cfg.beta, cfg.T)
            E = free_Z + W.zprime_norm(times, ep, cfg.alpha, cfg.beta, cfg.T)
        else:
            Dz = W.x_eps_series(times, [r["z_X"] for r in rows], cfg.eps, cfg.T) + max(r["z_H1"] for r in rows)
            Du = W.x_eps_series(times, [r["u_X"] for r in rows], cfg.eps, cfg.T)
            E = W.x_eps_series(times, [r["E_X"] for r in rows], cfg.eps, cfg.T)
        D = Dz + Du
        diag.record(D, E, {"Dz": Dz, "Du": Du})
        if not np.isfinite(D):
            diag.note = f"non-finite D at sweep {k}"
            raise ScatteringDivergence(diag.note, diag)
        if D <= cfg.tol:
            diag.converged = True
            break
        if len(diag.D) >= 4 and all(diag.D[-i] > diag.D[-i - 1] for i in (1, 2, 3)):
            diag.note = f"D_k increased on three consecutive sweeps (k = {k})"
            raise ScatteringDivergence(diag.note, diag)
    if diag.converged and all(r <= 1 for r in diag.contraction_ratios):
        diag.contraction_held_at = diag.phi_besov

    res = ScatteringResult(grid, times, Z, Uu, phi)
    if return_arrays:
        return res, diag
    return res.ztraj(), res.utraj(), diag
