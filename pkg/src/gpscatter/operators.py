"""
Radial symbol calculus and the bilinear phases.

All symbols are functions of r = |xi| with the bracket [r] = sqrt(2 + r^2):

    U = r/[r],  U^{-1} = [r]/r,  H = r[r],  P = 2/[r]^2,  Q = r^2/[r]^2.

The maps V^{-1}u = U^{-1} Re u + i Im u and Vv = U Re v + i Im v are only
real-linear, so they are evaluated by splitting a spectral array into the
transforms of its real and imaginary parts.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .spectral import PHYSICAL, SPECTRAL, Field, Grid, Multiplier, ZeroModeError


class SymbolId(str, Enum):
    U = "U"
    Uinv = "Uinv"
    H = "H"
    P = "P"
    Q = "Q"
    InvTwoMinusLap = "InvTwoMinusLap"


class PhaseKind(str, Enum):
    Phi0 = "Phi0"
    PhiPlus = "PhiPlus"
    PhiMinus = "PhiMinus"


# signs (s1, s2) in Phi = H(xi) + s1 H(eta) + s2 H(eta - xi)
PHASE_SIGNS = {
    PhaseKind.Phi0: (1.0, -1.0),
    PhaseKind.PhiPlus: (-1.0, -1.0),
    PhaseKind.PhiMinus: (1.0, 1.0),
}


def bracket(r):
    return np.sqrt(2.0 + np.square(r))


_FORMULAS = {
    SymbolId.U: lambda r: r / bracket(r),
    SymbolId.Uinv: lambda r: bracket(r) / r,
    SymbolId.H: lambda r: r * bracket(r),
    SymbolId.P: lambda r: 2.0 / (2.0 + r * r),
    SymbolId.Q: lambda r: r * r / (2.0 + r * r),
    SymbolId.InvTwoMinusLap: lambda r: 1.0 / (2.0 + r * r),
}


def symbol_value(id: SymbolId, r):
    """Closed-form value of a radial symbol; U^{-1} is undefined at r = 0."""
    id = SymbolId(id)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("symbols are evaluated at r >= 0")
    if id is SymbolId.Uinv and np.any(r == 0):
        raise ValueError("Uinv is singular at r = 0")
    out = _FORMULAS[id](r)
    return float(out) if out.ndim == 0 else out


def multiplier(id: SymbolId) -> Multiplier:
    id = SymbolId(id)
    return Multiplier(_FORMULAS[id], singular_at_zero=id is SymbolId.Uinv, name=id.value)


def symbol_derivatives(r) -> dict:
    """H', H'', H''', H'''' and I = H''/r - H'/r^2 with its derivative I'.

    The H-derivatives are continuous at 0 (H'(0) = sqrt 2); I and I' need r > 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("symbol_derivatives needs r > 0")
    b = bracket(r)
    out = {
        "H1": 2 * (1 + r * r) / b,
        "H2": 2 * r * (3 + r * r) / b**3,
        "H3": 12 / b**5,
        "H4": -60 * r / b**7,
        "I": -4 / (r * r * b**3),
        "I1": 4 * (4 + 5 * r * r) / (r**3 * b**5),
    }
    if r.ndim == 0:
        out = {k: float(v) for k, v in out.items()}
    return out


def H1(r):
    """H'(r), valid down to r = 0."""
    r = np.asarray(r, dtype=float)
    return 2 * (1 + r * r) / bracket(r)


def H2(r):
    r = np.asarray(r, dtype=float)
    return 2 * r * (3 + r * r) / bracket(r) ** 3


def H3(r):
    return 12 / bracket(np.asarray(r, dtype=float)) ** 5


def I_fn(r):
    r = np.asarray(r, dtype=float)
    return -4 / (r * r * bracket(r) ** 3)


# --------------------------------------------------------------------------
# real-linear maps on spectral arrays


def split_real_imag(grid: Grid, g: np.ndarray):
    """Transforms of Re f and Im f from the transform g of f."""
    gm = np.conj(grid.reflect(g))
    return 0.5 * (g + gm), -0.5j * (g - gm)


def _symbol_array(grid: Grid, id: SymbolId, zero_value: float = 0.0) -> np.ndarray:
    key = ("_sym", id, zero_value)
    cache = grid.__dict__.setdefault("_symbol_cache", {})
    if key not in cache:
        r = grid.kabs
        if id is SymbolId.Uinv:
            with np.errstate(divide="ignore"):
                m = bracket(r) / np.where(r > 0, r, 1.0)
            m = np.array(m)
            m.flat[0] = zero_value
        else:
            m = _FORMULAS[id](r) * np.ones(grid.shape)
            if id is SymbolId.U:
                m.flat[0] = zero_value
        cache[key] = m
    return cache[key]


def symbol_array(grid: Grid, id: SymbolId) -> np.ndarray:
    """Symbol sampled on the lattice (U^{-1} set to 0 at the origin)."""
    return _symbol_array(grid, SymbolId(id))


def v_inverse_hat(grid: Grid, g: np.ndarray, keep_zero_mode: bool = False) -> np.ndarray:
    """Spectral V^{-1}. With ``keep_zero_mode`` the origin passes through unchanged."""
    re, im = split_real_imag(grid, g)
    return _symbol_array(grid, SymbolId.Uinv, 1.0 if keep_zero_mode else 0.0) * re + 1j * im


def v_hat(grid: Grid, g: np.ndarray, keep_zero_mode: bool = False) -> np.ndarray:
    """Spectral V. With ``keep_zero_mode`` the origin passes through unchanged."""
    re, im = split_real_imag(grid, g)
    return _symbol_array(grid, SymbolId.U, 1.0 if keep_zero_mode else 0.0) * re + 1j * im


def _wrap(f: Field, g: np.ndarray, dropped: complex = 0.0) -> Field:
    out = Field(f.grid, g, SPECTRAL, dropped)
    return out if f.representation == SPECTRAL else out.physical()


def v_inverse_map(u: Field, zero_mode: str = "drop", tol: float = 1e-12) -> Field:
    """V^{-1}u = U^{-1} Re u + i Im u.

    The xi=0 coefficient of the real part is dropped and recorded in
    ``dropped_zero_mode``; ``zero_mode="reject"`` raises when it is not
    negligible and ``zero_mode="keep"`` passes it through (U(0) := 1).
    """
    g = u.spectral().values
    re0 = 0.5 * (g.flat[0] + np.conj(g.flat[0]))
    if zero_mode == "reject" and abs(re0) > tol * max(np.abs(g).max(), 1e-300):
        raise ZeroModeError(f"real-part zero mode {abs(re0):.3e} under U^-1")
    keep = zero_mode == "keep"
    return _wrap(u, v_inverse_hat(u.grid, g, keep), 0.0 if keep else complex(re0))


def v_map(v: Field, zero_mode: str = "drop") -> Field:
    """Vv = U Re v + i Im v (U vanishes at the origin unless ``zero_mode="keep"``)."""
    g = v.spectral().values
    return _wrap(v, v_hat(v.grid, g, zero_mode == "keep"))


def propagator(grid: Grid, t: float, scale: float = 1.0) -> np.ndarray:
    return np.exp(-1j * t * scale * symbol_array(grid, SymbolId.H))


def propagate(f: Field, t: float) -> Field:
    """Free evolution exp(-iHt) applied in spectral space."""
    g = f.spectral().values
    return _wrap(f, g * propagator(f.grid, t), f.dropped_zero_mode)


# --------------------------------------------------------------------------
# phases on (xi, eta) pairs; vectors along the last axis


def _norm(a):
    return np.sqrt(np.sum(np.square(a), axis=-1))


def phase_value(kind: PhaseKind, xi, eta):
    """Phi = H(xi) + s1 H(eta) + s2 H(eta - xi) for the chosen kind."""
    s1, s2 = PHASE_SIGNS[PhaseKind(kind)]
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    H = _FORMULAS[SymbolId.H]
    return H(_norm(xi)) + s1 * H(_norm(eta)) + s2 * H(_norm(eta - xi))


GUARD = 1e-8


def _check_guard(*radii):
    for r in radii:
        if np.any(np.asarray(r) < GUARD):
            raise ValueError("phase derivatives need eta away from 0 and xi")


def phase_gradient(kind: PhaseKind, xi, eta):
    """Gradient in eta: s1 H'(|eta|) eta^ + s2 H'(|eta-xi|) (eta-xi)^."""
    s1, s2 = PHASE_SIGNS[PhaseKind(kind)]
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    d = eta - xi
    r1, r2 = _norm(eta), _norm(d)
    _check_guard(r1, r2)
    return (s1 * H1(r1) / r1)[..., None] * eta + (s2 * H1(r2) / r2)[..., None] * d


def phase_hessian(kind: PhaseKind, xi, eta):
    """Hessian in eta, built from s [H'' n n^T + (H'/r)(Id - n n^T)] per term."""
    s1, s2 = PHASE_SIGNS[PhaseKind(kind)]
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    out = 0.0
    for s, v in ((s1, eta), (s2, eta - xi)):
        r = _norm(v)
        _check_guard(r)
        n = v / r[..., None]
        nn = n[..., :, None] * n[..., None, :]
        eye = np.eye(v.shape[-1])
        out = out + s * (H2(r)[..., None, None] * nn + (H1(r) / r)[..., None, None] * (eye - nn))
    return out


def _third_directional(r, n, a):
    """d^3/dt^3 H(|x + t a|) at t = 0 for unit direction a and x = r n."""
    an = np.sum(a * n, axis=-1)
    aa = np.sum(a * a, axis=-1)
    i = I_fn(r)
    return (H3(r) - 3 * i) * an**3 + 3 * i * an * aa


def phase_directional_derivs(kind: PhaseKind, xi, eta, a, order: int):
    """Derivative of Phi(xi, .) at eta in direction a, of order 1, 2 or 3."""
    s1, s2 = PHASE_SIGNS[PhaseKind(kind)]
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    a = np.asarray(a, float)
    if order == 1:
        return np.sum(phase_gradient(kind, xi, eta) * a, axis=-1)
    if order == 2:
        hess = phase_hessian(kind, xi, eta)
        return np.einsum("...i,...ij,...j->...", a, hess, a)
    if order == 3:
        out = 0.0
        for s, v in ((s1, eta), (s2, eta - xi)):
            r = _norm(v)
            _check_guard(r)
            out = out + s * _third_directional(r, v / r[..., None], a)
        return out
    raise ValueError("order must be 1, 2 or 3")


def phase_radial_derivs(kind: PhaseKind, xi, eta, order: int):
    """Derivative along the radial direction a = eta^ of the given order."""
    eta = np.asarray(eta, float)
    r = _norm(eta)
    _check_guard(r)
    return phase_directional_derivs(kind, xi, eta, eta / r[..., None], order)


def h_sum_identity(a, b):
    """Both sides of H(a+b) - H(a) - H(b) = ab(2a+b)/([a+b]+[a]) + ab(a+2b)/([a+b]+[b])."""
    H = _FORMULAS[SymbolId.H]
    lhs = H(a + b) - H(a) - H(b)
    rhs = a * b * (2 * a + b) / (bracket(a + b) + bracket(a)) + a * b * (a + 2 * b) / (
        bracket(a + b) + bracket(b)
    )
    return lhs, rhs
