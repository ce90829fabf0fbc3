"""
Decay fits, frequency-region predicates, phase lower-bound scans and a
brute-force evaluator for the bilinear oscillatory integrals.

Regions are described through

    lambda = |eta| + |eta - xi| - |xi|,   c = (|eta| - |eta - xi|) / |xi|,

and sampled in elliptic coordinates around the foci 0 and xi (2D):

    eta = xi/2 + a cos(th) xi^ + b sin(th) xi^perp,
    a = (|xi| + lambda)/2,  b = sqrt(a^2 - |xi|^2/4),

for which |eta| - |eta - xi| = |xi| cos(th) exactly. Each region is then a
box in (lambda, cos th).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .operators import (
    PHASE_SIGNS,
    PhaseKind,
    SymbolId,
    H1,
    bracket,
    phase_gradient,
    phase_value,
    propagate,
    propagator,
    split_real_imag,
    symbol_array,
    symbol_value,
)
from .spectral import PHYSICAL, SPECTRAL, Field, Grid, lp_norm


# --------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power law value ~ exp(intercept) * t^exponent."""

    exponent: float
    intercept: float
    r_squared: float
    window: tuple
    notes: dict = field(default_factory=dict)


def decay_fit(times, values) -> DecayFit:
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    if t.size != v.size:
        raise ValueError("times and values differ in length")
    if t.size < 8:
        raise ValueError(f"need at least 8 samples, got {t.size}")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ValueError("decay_fit needs positive times and values")
    x, y = np.log(t), np.log(v)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return DecayFit(float(slope), float(icpt), r2, (float(t[0]), float(t[-1])))


def wrap_safe_time(phi: Field, mass_fraction: float = 0.99) -> float:
    """L/(2 v) with v the group speed H' at the radius holding ``mass_fraction`` of |phi^|^2."""
    g = phi.grid
    a = np.abs(phi.spectral().values) ** 2
    r = g.kabs.ravel()
    order = np.argsort(r)
    cum = np.cumsum(a.ravel()[order])
    if cum[-1] == 0:
        return float("inf")
    rc = r[order][np.searchsorted(cum, mass_fraction * cum[-1])]
    return float(g.box_length / (2 * H1(rc)))


def linear_decay_experiment(phi: Field, q: float, times) -> DecayFit:
    """Fit the decay of ||exp(-iHt) phi||_{L^q} over the sample times.

    The L^q norm stands in for the Besov norm of the decay estimate;
    ``notes`` reports the wrap-around estimate of :func:`wrap_safe_time`.
    """
    times = np.asarray(times, float)
    if times.size < 8:
        raise ValueError("window too short: need at least 8 sample times")
    g = phi.spectral().values
    grid = phi.grid
    vals = [lp_norm(Field(grid, grid.inv(propagator(grid, t) * g), PHYSICAL), q) for t in times]
    fit = decay_fit(times, vals)
    notes = {"q": q, "values": np.asarray(vals), "wrap_safe_time": wrap_safe_time(phi)}
    return DecayFit(fit.exponent, fit.intercept, fit.r_squared, fit.window, notes)


def expected_decay_exponent(dim: int, q: float) -> float:
    """-d sigma with sigma = 1/2 - 1/q."""
    return -dim * (0.5 - (0.0 if np.isinf(q) else 1.0 / q))


# --------------------------------------------------------------------------
# regions


class RegionId(str, Enum):
    Dplus = "Dplus"
    Dzero = "Dzero"
    Dminus = "Dminus"
    DF = "DF"
    DTplus = "DTplus"
    DTzero = "DTzero"
    DX = "DX"


def _norm(a):
    return np.sqrt(np.sum(np.square(a), axis=-1))


def japanese(r):
    return np.sqrt(1.0 + np.square(r))


def region_coordinates(xi, eta):
    """(|xi|, |eta|, |eta - xi|, lambda, c) with c = (|eta| - |eta-xi|)/|xi|."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    a, r1, r2 = _norm(xi), _norm(eta), _norm(eta - xi)
    return a, r1, r2, r1 + r2 - a, (r1 - r2) / a


def lambda_range(region: RegionId, xi_abs, delta: float, lam_min: float = 1e-9, lam_max: float = 2e3):
    """Interval of lambda admitted by a region (before the c-restriction)."""
    a = np.asarray(xi_abs, float)
    jx = japanese(a)
    lo = np.full_like(a, lam_min)
    hi = np.full_like(a, lam_max)
    region = RegionId(region)
    if region is RegionId.DF:
        lo = a / delta
        hi = np.maximum(hi, 4 * a / delta)
    elif region in (RegionId.DTplus, RegionId.DTzero):
        hi = np.minimum(2 * a / delta, 2 * a**3 / (delta * jx))
        if region is RegionId.DTzero:
            lo = delta * a**3 / jx**2
    return lo, hi


def c_range(region: RegionId, delta: float) -> tuple:
    """Interval of c = (|eta| - |eta-xi|)/|xi| admitted by a region."""
    region = RegionId(region)
    if region in (RegionId.Dplus, RegionId.DTplus):
        return (1 - 2 * delta, 1.0)
    if region is RegionId.Dminus:
        return (-1.0, -(1 - 2 * delta))
    if region in (RegionId.Dzero, RegionId.DTzero):
        return (-(1 - delta), 1 - delta)
    return (-1.0, 1.0)


def region_contains(region: RegionId, xi, eta, delta: float) -> np.ndarray:
    """Membership predicates of the defining inequalities (DX: union of its two cases)."""
    region = RegionId(region)
    a, r1, r2, lam, c = region_coordinates(xi, eta)
    jx = japanese(a)
    if region is RegionId.Dplus:
        return c > 1 - 2 * delta
    if region is RegionId.Dminus:
        return c < -(1 - 2 * delta)
    if region is RegionId.Dzero:
        return np.abs(c) < 1 - delta
    if region is RegionId.DF:
        return lam >= a / delta
    in_T = (lam <= 2 * a**3 / (delta * jx)) & (lam <= 2 * a / delta)
    if region is RegionId.DTplus:
        return in_T & (c > 1 - 2 * delta)
    if region is RegionId.DTzero:
        return in_T & (np.abs(c) < 1 - delta) & (lam >= delta * a**3 / jx**2)
    case1 = (a <= 1) & (lam >= a**3 / (delta * jx)) & (lam <= 2 * a / delta)
    case2 = (lam <= delta * a**3 / jx**2) & (np.abs(c) <= 1 - delta)
    return case1 | case2


def elliptic_points(xi, lam, cos_th, sign=1.0):
    """eta with prescribed lambda and cos(theta) about the foci 0 and xi (2D)."""
    xi = np.asarray(xi, float)
    a_xi = _norm(xi)
    e1 = xi / a_xi[..., None]
    e2 = np.stack([-e1[..., 1], e1[..., 0]], axis=-1)
    a = 0.5 * (a_xi + lam)
    b = np.sqrt(np.maximum(a * a - 0.25 * a_xi**2, 0.0))
    sin_th = sign * np.sqrt(np.maximum(1 - cos_th**2, 0.0))
    return 0.5 * xi + (a * cos_th)[..., None] * e1 + (b * sin_th)[..., None] * e2


def sample_region(region: RegionId, n: int, delta: float, rng: np.random.Generator, xi_range=(1e-3, 1e3), lam_case=None, small_factor=None):
    """Log-uniform |xi|, log-uniform lambda and uniform cos(theta) inside a region.

    Returns (xi, eta) arrays of shape (n, 2). ``lam_case`` selects one DX case;
    case 2 uses lambda <= small_factor |xi|^3/<xi>^2 (default delta).
    """
    lo_x, hi_x = np.log(xi_range[0]), np.log(xi_range[1])
    a = np.exp(rng.uniform(lo_x, hi_x, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    xi = np.stack([a * np.cos(ang), a * np.sin(ang)], axis=-1)
    if lam_case is None:
        lo, hi = lambda_range(region, a, delta)
        c_lo, c_hi = c_range(region, delta)
    elif lam_case == 1:
        a = np.minimum(a, 1.0)
        xi = np.stack([a * np.cos(ang), a * np.sin(ang)], axis=-1)
        jx = japanese(a)
        lo, hi = a**3 / (delta * jx), 2 * a / delta
        c_lo, c_hi = -1.0, 1.0
    else:
        jx = japanese(a)
        f = delta if small_factor is None else small_factor
        lo, hi = np.full_like(a, 1e-12) * a**3, f * a**3 / jx**2
        c_lo, c_hi = -(1 - delta), 1 - delta
    lam = np.exp(rng.uniform(np.log(lo), np.log(hi)))
    cos_th = rng.uniform(c_lo, c_hi, n)
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    return xi, elliptic_points(xi, lam, cos_th, sign)


# comparators of the six scanned (kind, region) pairs: (quantity, comparator)
def _radial_unit(v):
    return v / _norm(v)[..., None]


def _ratio_phi0_dplus(xi, eta):
    d = np.sum(phase_gradient(PhaseKind.Phi0, xi, eta) * _radial_unit(eta), axis=-1)
    r = _norm(eta)
    return d / (r * _norm(xi) / japanese(r))


def _ratio_phi0_dzero(xi, eta):
    g = _norm(phase_gradient(PhaseKind.Phi0, xi, eta))
    r = _norm(eta)
    return g * r / (japanese(r) * _norm(xi))


def _ratio_phi0_dminus(xi, eta):
    w = eta - xi
    d = -np.sum(phase_gradient(PhaseKind.Phi0, xi, eta) * _radial_unit(w), axis=-1)
    r = _norm(w)
    return d / (r * _norm(xi) / japanese(r))


def _ratio_phiplus_df(xi, eta):
    d = -np.sum(phase_gradient(PhaseKind.PhiPlus, xi, eta) * _radial_unit(eta), axis=-1)
    return d / japanese(_norm(eta))


def _ratio_phiplus_dt(xi, eta):
    d = -np.sum(phase_gradient(PhaseKind.PhiPlus, xi, eta) * _radial_unit(eta), axis=-1)
    a = _norm(xi)
    return d / (a * a / japanese(a))


SCAN_PAIRS = {
    (PhaseKind.Phi0, RegionId.Dplus): _ratio_phi0_dplus,
    (PhaseKind.Phi0, RegionId.Dzero): _ratio_phi0_dzero,
    (PhaseKind.Phi0, RegionId.Dminus): _ratio_phi0_dminus,
    (PhaseKind.PhiPlus, RegionId.DF): _ratio_phiplus_df,
    (PhaseKind.PhiPlus, RegionId.DTplus): _ratio_phiplus_dt,
    (PhaseKind.PhiPlus, RegionId.DTzero): _ratio_phiplus_dt,
}


class EmptyRegion(ValueError):
    pass


def _mirror_to_major(xi, eta):
    """Reflect eta -> xi - eta where |eta| < |eta - xi| (the symmetric half)."""
    flip = _norm(eta) < _norm(eta - xi)
    return np.where(flip[..., None], xi - eta, eta)


def phase_lower_bound_scan(kind: PhaseKind, region: RegionId, n_samples: int = 100_000, delta: float = 0.05, seed: int = 0, batch: int = 50_000) -> dict:
    """Minimum of (phase derivative)/(comparator) over samples in a region.

    For the Phi+ regions and D0 the samples are reduced to |eta| >= |eta - xi|
    by the symmetry eta -> xi - eta of the phase.
    """
    kind, region = PhaseKind(kind), RegionId(region)
    if (kind, region) not in SCAN_PAIRS:
        raise ValueError(f"no scan defined for ({kind.value}, {region.value})")
    if not 0 < delta <= 0.1:
        raise ValueError("delta must lie in (0, 0.1]")
    fn = SCAN_PAIRS[(kind, region)]
    rng = np.random.default_rng(seed)
    best, arg, count = np.inf, None, 0
    done = 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        xi, eta = sample_region(region, m, delta, rng)
        if kind is PhaseKind.PhiPlus or region is RegionId.Dzero:
            eta = _mirror_to_major(xi, eta)
        ok = region_contains(region, xi, eta, delta)
        # keep away from the removable points eta = 0, xi
        ok &= (_norm(eta) > 1e-8) & (_norm(eta - xi) > 1e-8)
        if ok.any():
            r = fn(xi[ok], eta[ok])
            i = int(np.argmin(r))
            count += int(ok.sum())
            if r[i] < best:
                best, arg = float(r[i]), (xi[ok][i].copy(), eta[ok][i].copy())
        done += m
    if count == 0:
        raise EmptyRegion(f"no samples landed in {region.value}")
    return {"min_ratio": best, "argmin": arg, "n_in_region": count, "kind": kind.value, "region": region.value, "delta": delta}


def phi_plus_time_bound_scan(n_samples: int = 100_000, delta: float = 0.05, seed: int = 0, small_factor: float = None) -> dict:
    """min |Phi+| <xi> / |xi|^3 over both DX cases (sign-checked per case).

    Case 1: |xi| <= 1 and |xi|^3/(delta <xi>) <= lambda <= 2|xi|/delta, where -Phi+ > 0.
    Case 2: lambda <= small_factor |xi|^3/<xi>^2 and ||eta| - |eta-xi|| <= (1-delta)|xi|,
    where Phi+ > 0. The gain in case 2 is of order delta |xi|^3/<xi> near the
    edge |c| = 1 - delta, so the small-lambda constant must be a fraction of
    delta; the default is delta/4 (at small_factor = delta the minimum is negative).
    """
    if small_factor is None:
        small_factor = delta / 4
    rng = np.random.default_rng(seed)
    out = {"small_factor": small_factor}
    for case, sign in ((1, -1.0), (2, 1.0)):
        xi, eta = sample_region(RegionId.DX, n_samples, delta, rng, lam_case=case, small_factor=small_factor)
        ph = sign * phase_value(PhaseKind.PhiPlus, xi, eta)
        a = _norm(xi)
        r = ph * japanese(a) / a**3
        i = int(np.argmin(r))
        out[f"case{case}"] = float(r[i])
        out[f"argmin{case}"] = (xi[i].copy(), eta[i].copy())
    out["min_ratio"] = min(out["case1"], out["case2"])
    return out


# --------------------------------------------------------------------------
# bilinear oscillatory integrals


def trapezoid_nodes(t_lo: float, t_hi: float, n_s: int):
    s = np.linspace(t_lo, t_hi, n_s)
    w = np.full(n_s, (t_hi - t_lo) / (n_s - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return s, w


class ResolutionError(ValueError):
    pass


def bilinear_integral_direct(F: Callable, kind: Optional[PhaseKind], xi, t_lo: float, t_hi: float, eta_grid, n_s: int = 81, check: bool = True) -> complex:
    """Tensor quadrature of int_{t_lo}^{t_hi} sum_eta exp(i Phi s) F(xi, eta) w_eta ds.

    ``eta_grid`` is ``(points, weight)`` with points of shape (..., d) and a
    scalar cell weight; ``F(xi, points)`` returns the amplitude. ``kind=None``
    sets Phi = 0. Time uses the trapezoid rule on n_s nodes.
    """
    pts, weight = eta_grid
    xi = np.asarray(xi, float)
    amp = F(xi, pts)
    s, w = trapezoid_nodes(t_lo, t_hi, n_s)
    if kind is None:
        return complex(np.sum(w) * np.sum(amp) * weight)
    ph = phase_value(kind, xi, pts)
    if check:
        _check_resolution(kind, xi, pts, amp, ph, weight, s)
    tf = np.exp(1j * np.multiply.outer(ph, s)) @ w
    return complex(np.sum(amp * tf) * weight)


def _check_resolution(kind, xi, pts, amp, ph, weight, s):
    live = np.abs(amp) > 1e-14 * max(np.abs(amp).max(), 1e-300)
    if not live.any():
        return
    d = pts.shape[-1]
    h = weight ** (1.0 / d)
    p, x = pts[live], np.broadcast_to(xi, pts[live].shape)
    ok = (_norm(p) > 1e-12) & (_norm(p - x) > 1e-12)
    grad = _norm(phase_gradient(kind, x[ok], p[ok])).max() if ok.any() else 0.0
    ds = s[1] - s[0] if len(s) > 1 else 0.0
    if grad * h > 0.5 or np.abs(ph[live]).max() * ds > 0.5:
        raise ResolutionError(
            f"under-resolved: max|grad Phi| h = {grad * h:.3g}, max|Phi| ds = {np.abs(ph[live]).max() * ds:.3g}"
        )


def lattice_points(grid: Grid) -> np.ndarray:
    return np.stack(np.meshgrid(*([grid.frequencies] * grid.dim), indexing="ij"), axis=-1)


def _wrapped(grid: Grid, arr: np.ndarray, xi_idx) -> np.ndarray:
    """arr evaluated at xi - eta on the lattice (indices mod n)."""
    return np.roll(grid.reflect(arr), shift=tuple(xi_idx), axis=tuple(range(grid.dim)))


def _difference_vectors(grid: Grid, xi_idx) -> np.ndarray:
    """Frequency vector of the lattice index (xi_idx - eta_idx) mod n."""
    idx = np.arange(grid.n)
    axes = []
    for a in range(grid.dim):
        f = grid.frequencies[(xi_idx[a] - idx) % grid.n]
        shape = [1] * grid.dim
        shape[a] = grid.n
        axes.append(np.broadcast_to(f.reshape(shape), grid.shape))
    return np.stack(axes, axis=-1)


def u1sq_direct(phi: Field, psi: Field, xi_idx, t_lo: float, t_hi: float, n_s: int = 81, check: bool = True) -> complex:
    """Direct evaluation of the xi coefficient of int exp(iH(xi)s) F[Re u0_phi Re u0_psi](s) ds.

    With w = Re z0 the product expands into four terms
    f(xi - eta) g(eta) exp(i(H(xi) + a H(xi - eta) + b H(eta)) s), (a, b) = (-,-), (+,+), (-,+), (+,-),
    i.e. Phi+, Phi-, Phi0 and Phi0 with eta -> xi - eta. Each is summed over the
    lattice with closed-form phases and trapezoid weights in s.
    """
    grid = phi.grid
    U = symbol_array(grid, SymbolId.U)
    ph, ps = phi.spectral().values, psi.spectral().values
    conj_neg = lambda a: np.conj(grid.reflect(a))  # noqa: E731  k -> conj a(-k)
    f = {-1: _wrapped(grid, U * ph, xi_idx), 1: _wrapped(grid, U * conj_neg(ph), xi_idx)}
    g = {-1: U * ps, 1: U * conj_neg(ps)}
    eta = lattice_points(grid)
    diff = _difference_vectors(grid, xi_idx)
    xi = eta[tuple(xi_idx)]
    h_xi = float(symbol_value(SymbolId.H, _norm(xi)))
    h_diff = symbol_value(SymbolId.H, _norm(diff))
    h_eta = symbol_value(SymbolId.H, _norm(eta))
    s, w = trapezoid_nodes(t_lo, t_hi, n_s)
    kinds = {(-1, -1): (PhaseKind.PhiPlus, False), (1, 1): (PhaseKind.PhiMinus, False), (-1, 1): (PhaseKind.Phi0, False), (1, -1): (PhaseKind.Phi0, True)}
    total = 0.0
    for (a, b), (kind, mirrored) in kinds.items():
        amp = 0.25 * f[a] * g[b] / grid.volume
        phase = h_xi + a * h_diff + b * h_eta
        if check:
            live = np.abs(amp) > 1e-14 * max(np.abs(amp).max(), 1e-300)
            pts = (xi - diff)[live] if not mirrored else diff[live]
            _check_resolution(kind, xi, pts, np.ones(len(pts)), phase[live], grid.dk**grid.dim, s)
        total += np.sum(amp * (np.exp(1j * np.multiply.outer(phase, s)) @ w))
    return complex(total)


def bilinear_integral_spectral(phi: Field, psi: Field, term: str, xi_idx, t_lo: float, t_hi: float, n_s: int = 81) -> complex:
    """The same coefficient computed by the production path.

    At each trapezoid node: propagate both data, apply V, form the product
    (``"u1sq"``: Re u_phi Re u_psi; ``"cross"``: P U^{-1} div(Re u_phi grad Im u_psi)),
    transform, and multiply by exp(iH(xi)s).
    """
    grid = phi.grid
    ph, ps = phi.spectral().values, psi.spectral().values
    U = symbol_array(grid, SymbolId.U)
    H = symbol_array(grid, SymbolId.H)
    s, w = trapezoid_nodes(t_lo, t_hi, n_s)
    idx = tuple(xi_idx)
    total = 0.0
    for sj, wj in zip(s, w):
        ua = _vmap(grid, U, propagator(grid, sj) * ph)
        ub = _vmap(grid, U, propagator(grid, sj) * ps) if psi is not phi else ua
        if term == "u1sq":
            g = grid.fwd(ua.real * ub.real)
        elif term == "cross":
            gb = grid.fwd(ub.imag)
            flux = [grid.fwd(ua.real * grid.inv(1j * k * gb).real) for k in grid.kvec]
            div = sum(1j * k * f for k, f in zip(grid.kvec, flux))
            g = symbol_array(grid, SymbolId.P) * symbol_array(grid, SymbolId.Uinv) * div
        else:
            raise ValueError(f"unknown term {term!r}")
        total += wj * np.exp(1j * H[idx] * sj) * g[idx]
    return complex(total)


def _vmap(grid, U, zh):
    re, im = split_real_imag(grid, zh)
    return grid.inv(U * re + 1j * im)


def band_limited_datum(grid: Grid, amplitude: float, width: float, k_cut: float, modulation=None) -> Field:
    """Gaussian (optionally modulated) with its spectrum cut smoothly at |xi| = k_cut."""
    r2 = grid.r2
    f = amplitude * np.exp(-r2 / (2 * width**2)) * np.ones(grid.shape, complex)
    if modulation is not None:
        f = f * np.exp(1j * sum(k * c for k, c in zip(modulation, grid.coords)))
    g = grid.fwd(f)
    r = grid.kabs / k_cut
    taper = np.where(r < 1, np.exp(-1.0 / np.maximum(1 - r * r, 1e-300) + 1.0), 0.0)
    return Field(grid, g * taper, SPECTRAL).physical()
