"""Complex-argument cylinder functions and Helmholtz/Laplace Green kernels.

Everything here is valid on the closed upper half-plane Im z >= 0, which is
the only regime the solver visits: Laplace-transform frequencies s with
Re s > 0 enter the Helmholtz kernels as wavenumbers k = i*s, so Im k > 0.

Evaluation is backed by the AMOS routines behind ``scipy.special``.  Scaled
variants (``hankel1e``-style) are used so that wavenumbers with very large
imaginary parts neither overflow nor produce spurious NaNs: products such as
J_l(k*eps) * H_l(k*d) are recombined with one explicit exponential whose
magnitude stays bounded whenever d >= eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

EULER_GAMMA = float(np.euler_gamma)


def _as_complex(z) -> complex:
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError(f"non-finite argument {z!r}")
    return z


def bessel_j(n: int, z) -> complex:
    """Bessel function J_n(z) for integer order and complex argument.

    Negative orders fold back through J_{-n} = (-1)^n J_n.  Raises on
    non-finite input/output and on |z| beyond the supported range.
    """
    z = _as_complex(z)
    n = int(n)
    if abs(z) > 1e8:
        raise OverflowError(f"|z| = {abs(z):.3g} beyond supported range")
    sign = 1.0
    if n < 0:
        n, sign = -n, (-1.0) ** n
    val = sign * complex(_sp.jv(n, z))
    if not (np.isfinite(val.real) and np.isfinite(val.imag)):
        raise OverflowError(f"J_{n}({z!r}) not representable")
    return val


def hankel1(n: int, z) -> complex:
    """Hankel function H^(1)_n(z); complex argument, Im z >= 0 intended."""
    z = _as_complex(z)
    if z == 0:
        raise ValueError("hankel1 has a logarithmic singularity at z = 0")
    n = int(n)
    sign = 1.0
    if n < 0:
        n, sign = -n, (-1.0) ** n
    val = sign * complex(_sp.hankel1(n, z))
    if not (np.isfinite(val.real) and np.isfinite(val.imag)):
        raise OverflowError(f"H1_{n}({z!r}) not representable")
    return val


@dataclass
class CylinderFnTable:
    """Values J_0..J_nmax and H^(1)_0..H^(1)_nmax at one complex argument."""

    order_max: int
    argument: complex
    j_values: np.ndarray
    h_values: np.ndarray


def cylinder_table(order_max: int, z) -> CylinderFnTable:
    z = _as_complex(z)
    if z == 0:
        raise ValueError("cylinder_table requires z != 0")
    orders = np.arange(order_max + 1)
    j = np.asarray(_sp.jv(orders, z), dtype=complex)
    h = np.asarray(_sp.hankel1(orders, z), dtype=complex)
    if not (np.all(np.isfinite(j.real)) and np.all(np.isfinite(j.imag))
            and np.all(np.isfinite(h.real)) and np.all(np.isfinite(h.imag))):
        raise OverflowError(f"cylinder table at {z!r} not representable")
    return CylinderFnTable(int(order_max), z, j, h)


def hankel1_scaled_table(order_max: int, z: np.ndarray) -> np.ndarray:
    """H^(1)_l(z) * exp(-i z) for l = 0..order_max, on a complex array.

    Seeds orders 0 and 1 from AMOS and runs the upward recurrence
    H_{l+1} = (2l/z) H_l - H_{l-1}, which is stable for H and commutes with
    the exp(-iz) scaling.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty((order_max + 1,) + z.shape, dtype=complex)
    out[0] = _sp.hankel1e(0, z)
    if order_max >= 1:
        out[1] = _sp.hankel1e(1, z)
    for ell in range(1, order_max):
        out[ell + 1] = (2.0 * ell / z) * out[ell] - out[ell - 1]
    return out


def besselj_table(order_max: int, z: np.ndarray) -> np.ndarray:
    """J_l(z) for l = 0..order_max on a complex array (unscaled)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty((order_max + 1,) + z.shape, dtype=complex)
    for ell in range(order_max + 1):
        out[ell] = _sp.jv(ell, z)
    return out


def hankel1_grid(n: int, z: np.ndarray) -> np.ndarray:
    """H^(1)_n on a complex array via the scaled form.

    For Im z >> 1 the true value underflows to exactly 0.0, the correct
    limit for the exponentially damped kernels used here.
    """
    z = np.asarray(z, dtype=complex)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = _sp.hankel1e(n, z) * np.exp(1j * z)
    return np.where(np.isnan(out) & (np.asarray(z).imag > 50.0), 0.0, out)


def green_laplace(r) -> np.ndarray:
    """Laplace Green function -(1/2pi) log r, r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_laplace requires r > 0")
    return -np.log(r) / (2.0 * np.pi)


def green_helmholtz(k, r) -> np.ndarray:
    """Helmholtz Green function (i/4) H^(1)_0(k r), r > 0, k != 0."""
    k = _as_complex(k)
    if k == 0:
        raise ValueError("green_helmholtz requires k != 0")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_helmholtz requires r > 0")
    return 0.25j * hankel1_grid(0, k * r)


# Ascending series for the log split of (i/4) H_0^(1).  With harmonic numbers
# h_j and w = (kr/2)^2:
#   (i/4) H_0(kr) = c0(k) J_0(kr) - (1/2pi) log(r) J_0(kr) - S(w)/(2pi),
#   c0(k) = i/4 - (log(k/2) + gamma)/(2pi),
#   S(w)  = sum_{j>=1} (-1)^{j+1} h_j w^j / (j!)^2.
_SERIES_J = np.arange(1, 26)
_SERIES_H = np.cumsum(1.0 / _SERIES_J)


def green_diff_derivs(k, r: np.ndarray):
    """(F, F', F'') for F(r) = G_k(r) - G_0(r), stable down to r -> 0.

    Direct AMOS evaluation cancels catastrophically for |kr| small, so the
    ascending series is used there; the branches agree to ~1e-12 on the
    crossover band |kr| ~ 2.
    """
    k = _as_complex(k)
    if k == 0:
        raise ValueError("green_diff_derivs requires k != 0")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_diff_derivs requires r > 0")
    F = np.empty(r.shape, dtype=complex)
    F1 = np.empty(r.shape, dtype=complex)
    F2 = np.empty(r.shape, dtype=complex)
    twopi = 2.0 * np.pi
    small = np.abs(k) * r <= 2.0
    if np.any(small):
        rs = r[small]
        z = k * rs
        j0 = _sp.jv(0, z)
        j1 = _sp.jv(1, z)
        c0 = 0.25j - (np.log(k / 2.0) + EULER_GAMMA) / twopi
        w = (z / 2.0) ** 2
        S = np.zeros_like(w)
        dS = np.zeros_like(w)   # dS/dw
        d2S = np.zeros_like(w)  # d2S/dw2
        term = np.ones_like(w)  # (-1)^j w^j / (j!)^2 after update below
        for j, hj in zip(_SERIES_J, _SERIES_H):
            term = term * (-w) / (j * j)
            S -= hj * term
            dS -= hj * term * j / w
            if j >= 2:
                d2S -= hj * term * j * (j - 1) / w**2
        dw = k * k * rs / 2.0      # dw/dr
        d2w = k * k / 2.0
        Sp = dS * dw
        Spp = d2S * dw * dw + dS * d2w
        logr = np.log(rs)
        j0p = -k * j1                       # d/dr J_0(kr)
        j0pp = -(k * k) * (j0 - j1 / z)     # d2/dr2 J_0(kr)
        F[small] = c0 * j0 - logr * (j0 - 1.0) / twopi - S / twopi
        F1[small] = c0 * j0p - ((j0 - 1.0) / rs + logr * j0p) / twopi - Sp / twopi
        F2[small] = (
            c0 * j0pp
            - (-(j0 - 1.0) / rs**2 + 2.0 * j0p / rs + logr * j0pp) / twopi
            - Spp / twopi
        )
    big = ~small
    if np.any(big):
        rb = r[big]
        z = k * rb
        h0 = hankel1_grid(0, z)
        h1 = hankel1_grid(1, z)
        F[big] = 0.25j * h0 + np.log(rb) / twopi
        F1[big] = -0.25j * k * h1 + 1.0 / (twopi * rb)
        F2[big] = -0.25j * k * k * (h0 - h1 / z) - 1.0 / (twopi * rb**2)
    return F, F1, F2


def km_diagonal(k, speed: np.ndarray) -> np.ndarray:
    """Diagonal limit of the smooth part in the Kussmaul-Martensen split.

    For H(t,tau) = (i/4) H_0(k r) = H1 log(4 sin^2((t-tau)/2)) + H2 with
    H1 = -(1/4pi) J_0(k r), the limit H2(t,t) for a parametrization with
    speed |gamma'(t)|.
    """
    k = _as_complex(k)
    return (
        0.25j
        - (EULER_GAMMA + np.log(k / 2.0) + np.log(np.asarray(speed, dtype=float)))
        / (2.0 * np.pi)
    )
