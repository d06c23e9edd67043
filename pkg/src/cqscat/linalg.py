"""Dense complex linear algebra for the frequency sweep.

LU solves delegate to LAPACK; GMRES is an unrestarted Arnoldi/Givens
implementation so that iteration counts have a single well-defined meaning
across the iteration studies.  The scaled DFT pair implements the
lambda-weighted transforms that decouple the convolution-quadrature system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


def lu_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b (one or many right-hand sides) by partial-pivot LU."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    lu, piv = sla.lu_factor(A)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-13 * max(d.max(), 1e-300):
        raise np.linalg.LinAlgError("matrix singular to pivot tolerance")
    return sla.lu_solve((lu, piv), b)


@dataclass
class LuOperator:
    """Reusable factorization for repeated right-hand sides."""

    lu: np.ndarray
    piv: np.ndarray

    @classmethod
    def factor(cls, A: np.ndarray) -> "LuOperator":
        lu, piv = sla.lu_factor(np.asarray(A))
        return cls(lu, piv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve((self.lu, self.piv), b)


@dataclass
class GmresReport:
    iterations: int
    final_residual: float
    converged: bool
    residual_history: np.ndarray


def gmres(apply_op, b: np.ndarray, tol: float = 1e-7, max_iter: int = 0):
    """Unrestarted GMRES with full orthogonalization.

    ``apply_op`` is either a matrix or a callable v -> A v.  Returns
    (x, GmresReport); on stagnation at max_iter the best iterate is
    returned with converged=False.
    """
    b = np.asarray(b, dtype=complex).ravel()
    n = b.size
    if callable(apply_op):
        matvec = apply_op
    else:
        A = np.asarray(apply_op)
        if A.shape != (n, n):
            raise ValueError("operator/rhs dimension mismatch")
        matvec = lambda v: A @ v
    if max_iter <= 0:
        max_iter = n
    max_iter = min(max_iter, n)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n, dtype=complex), GmresReport(0, 0.0, True, np.zeros(1))
    V = np.empty((max_iter + 1, n), dtype=complex)
    Hcol = np.zeros((max_iter + 1, max_iter), dtype=complex)
    cs = np.zeros(max_iter, dtype=complex)
    sn = np.zeros(max_iter, dtype=complex)
    g = np.zeros(max_iter + 1, dtype=complex)
    V[0] = b / bnorm
    g[0] = bnorm
    hist = [1.0]
    k_final = 0
    for k in range(max_iter):
        w = matvec(V[k])
        for j in range(k + 1):
            Hcol[j, k] = np.vdot(V[j], w)
            w = w - Hcol[j, k] * V[j]
        # one re-orthogonalization pass keeps the basis clean for stiff systems
        for j in range(k + 1):
            corr = np.vdot(V[j], w)
            Hcol[j, k] += corr
            w = w - corr * V[j]
        Hcol[k + 1, k] = np.linalg.norm(w)
        if abs(Hcol[k + 1, k]) > 1e-300:
            V[k + 1] = w / Hcol[k + 1, k]
        for j in range(k):
            tmp = cs[j] * Hcol[j, k] + sn[j] * Hcol[j + 1, k]
            Hcol[j + 1, k] = -np.conj(sn[j]) * Hcol[j, k] + np.conj(cs[j]) * Hcol[j + 1, k]
            Hcol[j, k] = tmp
        denom = np.sqrt(abs(Hcol[k, k]) ** 2 + abs(Hcol[k + 1, k]) ** 2)
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = np.conj(Hcol[k, k]) / denom
            sn[k] = np.conj(Hcol[k + 1, k]) / denom
        Hcol[k, k] = cs[k] * Hcol[k, k] + sn[k] * Hcol[k + 1, k]
        Hcol[k + 1, k] = 0.0
        g[k + 1] = -np.conj(sn[k]) * g[k]
        g[k] = cs[k] * g[k]
        # |g_{k+1}| = |sn_k| |g_k| with |sn_k| <= 1: monotone by construction
        res = abs(g[k + 1]) / bnorm
        hist.append(res)
        k_final = k + 1
        if res <= tol:
            break
    y = sla.solve_triangular(Hcol[:k_final, :k_final], g[:k_final], lower=False)
    x = V[:k_final].T @ y
    final = hist[-1]
    return x, GmresReport(k_final, float(final), bool(final <= tol),
                          np.asarray(hist))


def dft_scaled(values: np.ndarray, lam: float, axis: int = 0) -> np.ndarray:
    """hat g_l = sum_n lam^n g_n zeta_{N+1}^{-l n} along ``axis``."""
    values = np.asarray(values)
    if lam <= 0:
        raise ValueError("scaling radius must be positive")
    n = values.shape[axis]
    if lam < 1.0 and (n - 1) * abs(np.log(lam)) > 700:
        raise ValueError("lambda too small: lambda^{-N} overflows")
    shape = [1] * values.ndim
    shape[axis] = n
    scale = (lam ** np.arange(n)).reshape(shape)
    return np.fft.fft(values * scale, axis=axis)


def idft_scaled(values_hat: np.ndarray, lam: float, axis: int = 0) -> np.ndarray:
    """g_n = lam^{-n} (N+1)^{-1} sum_l hat g_l zeta_{N+1}^{+l n}."""
    values_hat = np.asarray(values_hat)
    if lam <= 0:
        raise ValueError("scaling radius must be positive")
    n = values_hat.shape[axis]
    if lam < 1.0 and (n - 1) * abs(np.log(lam)) > 700:
        raise ValueError("lambda too small: lambda^{-N} overflows")
    shape = [1] * values_hat.ndim
    shape[axis] = n
    scale = (lam ** -np.arange(n)).reshape(shape)
    return np.fft.ifft(values_hat, axis=axis) * scale


@dataclass
class SmallEig:
    eigenvalues: np.ndarray
    P: np.ndarray
    Pinv: np.ndarray


def small_eig(delta: np.ndarray, sep_tol: float = 1e-10) -> SmallEig:
    """Eigendecomposition of a small (2x2/3x3) matrix with residual check.

    Raises on near-defective input (eigenvalue separation below
    sep_tol * ||Delta||); callers perturb and retry.
    """
    delta = np.asarray(delta, dtype=complex)
    lam, P = np.linalg.eig(delta)
    scale = np.linalg.norm(delta)
    m = len(lam)
    for i in range(m):
        for j in range(i + 1, m):
            if abs(lam[i] - lam[j]) < sep_tol * scale:
                raise np.linalg.LinAlgError("near-defective stage matrix")
    Pinv = np.linalg.inv(P)
    resid = np.linalg.norm(P @ np.diag(lam) @ Pinv - delta)
    if resid > 1e-12 * max(scale, 1e-300):
        raise np.linalg.LinAlgError("eigendecomposition residual too large")
    return SmallEig(lam, P, Pinv)
