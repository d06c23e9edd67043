"""Alpert hybrid Gauss-trapezoidal quadrature for log-singular kernels.

The correction nodes chi_p and weights w_p satisfy, for j = 0..m-1,

    sum_p w_p chi_p^j          = -zeta(-j)  + sum_{i=1}^{a-1} i^j
    sum_p w_p chi_p^j log chi_p=  zeta'(-j) + sum_{i=1}^{a-1} i^j log i,

the Euler-Maclaurin matching conditions for integrands phi(x)+psi(x) log x.
The tables below were generated by a 50-digit Newton solve of that system
(they reproduce the published rules); loading asserts cheap invariants and
the test suite re-verifies the moment equations and the measured order.

Assembly produces dense Nystrom matrices on the half-offset periodic grid.
Two variants exist: closed curves (one log singularity per row, at the
diagonal) and doubled open arcs (two singularities per row: the diagonal
and its mirror image under theta -> 2pi - theta).  Rows too close to the
arc folds, where the two singular points nearly collide, fall back to
panelwise Gauss quadrature of the kernel against the even trigonometric
interpolant of the density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryMesh
from .trig import cosine_basis_matrices

TWO_PI = 2.0 * math.pi

_TABLES = {
    (2, 3): (
        [0.023796472841189737, 0.293537074150191457, 1.02371512425189025],
        [0.0879594267559388663, 0.49890171529136991, 0.913138857952691223],
        4,
    ),
    (6, 10): (
        [0.00117508938122730775, 0.0187703412983128866, 0.0968646839142685951,
         0.300481866800288465, 0.690133155717335629, 1.29369573808365889,
         2.09018772979877955, 3.01671931314921141, 4.00136974787248636,
         5.00002566179342292],
        [0.00456074688208420709, 0.0381060632238475688, 0.129386499728951184,
         0.288436038140883482, 0.495811191434496071, 0.707715460059452906,
         0.874192436528508338, 0.966136198651521779, 0.995788786607870007,
         0.999866578742384457],
        10,
    ),
}


@dataclass(frozen=True)
class AlpertRule:
    a: int
    m: int
    chi: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def stencil(self) -> int:
        return self.m + 4

    @property
    def reach(self) -> int:
        """Grid radius touched by corrections and their stencils."""
        return max(self.a, int(math.ceil(self.chi.max()))) + self.m + 4


def alpert_rule(a: int, m: int) -> AlpertRule:
    try:
        chi, w, order = _TABLES[(int(a), int(m))]
    except KeyError:
        raise ValueError(f"unsupported Alpert rule (a={a}, m={m})") from None
    chi = np.asarray(chi)
    w = np.asarray(w)
    if not (np.all(chi > 0) and np.all(np.diff(chi) > 0) and np.all(w > 0)):
        raise AssertionError("Alpert table corrupted: nodes/weights not admissible")
    if abs(w.sum() - (a - 0.5)) > 1e-13:
        raise AssertionError("Alpert table corrupted: zeroth moment mismatch")
    return AlpertRule(int(a), int(m), chi, w, order)


def lagrange_stencil(rule: AlpertRule) -> np.ndarray:
    """Cardinal coefficients L[p, q]: density at offset chi_p from grid offsets q.

    Equispaced nodes q = 0..m+3; reproduces polynomials of degree m+3.
    """
    q = np.arange(rule.stencil)
    L = np.ones((rule.m, rule.stencil))
    for j in range(rule.stencil):
        for r in range(rule.stencil):
            if r != j:
                L[:, j] *= (rule.chi - r) / (j - r)
    return L


def assemble_alpert_matrix(kernel, mesh: BoundaryMesh, rule: AlpertRule) -> np.ndarray:
    """Dense matrix for int_0^2pi kernel(t_i, s) mu(s) ds on a closed mesh.

    ``kernel(t, s)`` must broadcast over arrays of working-variable values
    and be finite off the diagonal; the rule never evaluates it at s = t_i.
    """
    if mesh.doubled or not mesh.curve.closed:
        raise ValueError("closed-curve assembly requires a closed graded mesh")
    N = mesh.n_nodes
    if N < 4 * rule.reach:
        raise ValueError(f"mesh too coarse for Alpert rule: N={N}")
    h = mesh.h
    t = mesh.nodes
    i_idx = np.arange(N)
    # bulk trapezoid: offsets a..N-a from each target
    K = kernel(t[:, None], t[None, :])
    d = (i_idx[None, :] - i_idx[:, None]) % N
    mask = (d >= rule.a) & (d <= N - rule.a)
    W = np.where(mask, h * K, 0.0)
    # endpoint corrections folded through the Lagrange stencil
    L = lagrange_stencil(rule)
    qs = np.arange(rule.stencil)
    for p in range(rule.m):
        for sgn in (+1, -1):
            s_fan = (t + sgn * rule.chi[p] * h) % TWO_PI
            Kf = kernel(t, s_fan)
            cols = (i_idx[:, None] + sgn * qs[None, :]) % N
            W[i_idx[:, None], cols] += (h * rule.weights[p]) * Kf[:, None] * L[p][None, :]
    return W


def _gauss_panels_toward(a: float, b: float, toward_a: bool, depth: int, n_gauss: int):
    """Composite Gauss nodes/weights on [a,b], panels dyadically graded."""
    x0, w0 = np.polynomial.legendre.leggauss(n_gauss)
    edges = [0.0] + [2.0**-j for j in range(depth, -1, -1)]
    xs, ws = [], []
    L = b - a
    for lo, hi in zip(edges[:-1], edges[1:]):
        if toward_a:
            p0, p1 = a + lo * L, a + hi * L
        else:
            p0, p1 = b - hi * L, b - lo * L
        mid, half = (p0 + p1) / 2.0, (p1 - p0) / 2.0
        xs.append(mid + half * x0)
        ws.append(half * w0)
    return np.concatenate(xs), np.concatenate(ws)


def _arc_fallback_row(kernel, theta_i: float, n_half: int, interp_A: np.ndarray,
                      n_gauss: int = 12, depth: int = 44) -> np.ndarray:
    """Row weights for int_0^pi K(theta_i, s) mu(s) ds, mu even half-grid data."""
    xs1, ws1 = _gauss_panels_toward(0.0, theta_i, False, depth, n_gauss)
    xs2, ws2 = _gauss_panels_toward(theta_i, math.pi, True, depth, n_gauss)
    xs = np.concatenate([xs1, xs2])
    ws = np.concatenate([ws1, ws2])
    kv = kernel(np.full_like(xs, theta_i), xs) * ws
    m = np.arange(n_half)
    E = np.cos(xs[:, None] * m[None, :])
    return (kv @ E) @ interp_A


def assemble_alpert_arc(kernel, mesh: BoundaryMesh, rule: AlpertRule) -> np.ndarray:
    """Matrix for int_0^pi kernel(theta_i, s) mu(s) ds on a doubled arc mesh.

    Acts on half-grid samples of the even density mu; rows are collocated at
    theta_i, i = 1..N/2.  The kernel must be symmetric under s -> 2pi - s
    (it depends on s through the physical point) and log-singular at the
    diagonal; rows whose diagonal and mirror singularities nearly collide
    are integrated by graded Gauss panels against the cosine interpolant.
    """
    if not mesh.doubled:
        raise ValueError("arc assembly requires a doubled arc mesh")
    N = mesh.n_nodes
    n = mesh.n_half
    h = mesh.h
    t = mesh.nodes
    th = t[:n]
    L = lagrange_stencil(rule)
    qs = np.arange(rule.stencil)
    i_idx = np.arange(n)

    # full-grid weights for rows i < n, then fold columns by evenness
    K = kernel(th[:, None], t[None, :])
    d = (np.arange(N)[None, :] - i_idx[:, None]) % N
    q_star = (N + 1 - 2 * (i_idx + 1)) % N          # mirror offset per row
    dist_mirror = np.minimum((d - q_star[:, None]) % N,
                             (q_star[:, None] - d) % N)
    mask = (d >= rule.a) & (d <= N - rule.a) & (dist_mirror >= rule.a)
    W = np.where(mask, h * K, 0.0)

    bad = np.minimum(q_star, N - q_star) < 2 * rule.reach
    good = ~bad
    for p in range(rule.m):
        for sgn in (+1, -1):
            for base in ("diag", "mirror"):
                off = sgn * rule.chi[p]
                center = np.zeros(n) if base == "diag" else q_star.astype(float)
                s_fan = (th + (center + off) * h) % TWO_PI
                Kf = kernel(th, s_fan)
                cols = (i_idx[:, None] + np.rint(center)[:, None].astype(int)
                        + sgn * qs[None, :]) % N
                contrib = (h * rule.weights[p]) * Kf[:, None] * L[p][None, :]
                contrib[bad] = 0.0
                W[i_idx[:, None], cols] += contrib
    # fold: mu(theta_{N+1-j}) = mu(theta_j)
    M = 0.5 * (W[:, :n] + W[:, ::-1][:, :n])
    if np.any(bad):
        _, A = cosine_basis_matrices(n)
        for i in np.nonzero(bad)[0]:
            M[i] = _arc_fallback_row(kernel, th[i], n, A)
    return M
