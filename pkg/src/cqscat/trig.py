"""Spectral machinery on the half-offset periodic grid t_j = (j-1/2) 2pi/N.

Provides the quadrature matrix for the periodic log kernel
log(4 sin^2((t-s)/2)) (exact on trigonometric interpolants), the Hilbert
transform operator used by the hypersingular splitting, and the symmetric
sine/cosine transforms used by the doubled parametrization of open arcs.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def grid(N: int) -> np.ndarray:
    return (np.arange(1, N + 1) - 0.5) * (TWO_PI / N)


def _fourier_modes(N: int) -> np.ndarray:
    return np.fft.fftfreq(N, 1.0 / N)


def circulant_from_symbol(N: int, symbol: np.ndarray) -> np.ndarray:
    """Dense matrix of f -> idft(symbol * dft(f)) on any length-N grid."""
    first_col = np.fft.ifft(symbol)
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return first_col[idx]


def log_sin_quadrature_matrix(N: int) -> np.ndarray:
    """Weights R s.t. (R f)_i ~ int_0^2pi log(4 sin^2((t_i-s)/2)) f(s) ds.

    Exact for trigonometric polynomials up to the grid bandwidth: the kernel
    acts diagonally in Fourier with multiplier -2pi/|m| (0 for m = 0).
    """
    m = _fourier_modes(N)
    sym = np.where(m == 0, 0.0, -TWO_PI / np.maximum(np.abs(m), 1.0))
    return np.real(circulant_from_symbol(N, sym.astype(complex)))


def hilbert_derivative_matrix(N: int) -> np.ndarray:
    """Matrix of psi -> (1/2pi) pv-int cot((t-s)/2) psi'(s) ds.

    Diagonal in Fourier with multiplier |m| (Nyquist included as N/2).
    """
    m = _fourier_modes(N)
    return np.real(circulant_from_symbol(N, np.abs(m).astype(complex)))


def differentiation_matrix(N: int) -> np.ndarray:
    """Spectral d/dt on the periodic grid (Nyquist mode carried as cosine)."""
    m = _fourier_modes(N)
    sym = 1j * m
    if N % 2 == 0:
        sym[N // 2] = 0.0
    return np.real(circulant_from_symbol(N, sym))


def sine_basis_matrices(n: int):
    """(synthesis S, analysis A) for sin(m theta), m = 1..n, on the half grid.

    theta_j = (j - 1/2) pi / n, j = 1..n.  S[j, m-1] = sin(m theta_j) and
    A = S^{-1} via discrete orthogonality.
    """
    theta = (np.arange(1, n + 1) - 0.5) * math.pi / n
    m = np.arange(1, n + 1)
    S = np.sin(theta[:, None] * m[None, :])
    A = S.T * (2.0 / n)
    A[n - 1, :] *= 0.5
    return S, A


def arc_hilbert_matrix(n: int) -> np.ndarray:
    """Folded Hilbert-type operator for the doubled arc parametrization.

    Acting on grid values of the odd density psi on theta_j in (0, pi), this
    returns the matrix of psi -> -(1/2)|D| psi where |D| sin(m theta) =
    m sin(m theta); it represents the half-traversal-weighted sum of the two
    cotangent convolutions generated by the cosine change of variables.
    """
    S, A = sine_basis_matrices(n)
    m = np.arange(1, n + 1, dtype=float)
    return -0.5 * (S * m[None, :]) @ A


def cosine_basis_matrices(n: int):
    """(synthesis C, analysis A) for cos(m theta), m = 0..n-1, half grid."""
    theta = (np.arange(1, n + 1) - 0.5) * math.pi / n
    m = np.arange(n)
    C = np.cos(theta[:, None] * m[None, :])
    A = C.T * (2.0 / n)
    A[0, :] *= 0.5
    return C, A


def cosine_interp_matrix(n: int, theta_eval: np.ndarray) -> np.ndarray:
    """Evaluate the even trigonometric interpolant at arbitrary angles.

    Rows map half-grid values of an even function to values at theta_eval.
    """
    _, A = cosine_basis_matrices(n)
    m = np.arange(n)
    E = np.cos(np.asarray(theta_eval, dtype=float)[:, None] * m[None, :])
    return E @ A


def sine_interp_matrix(n: int, theta_eval: np.ndarray) -> np.ndarray:
    """Evaluate the odd trigonometric interpolant at arbitrary angles."""
    S, A = sine_basis_matrices(n)
    m = np.arange(1, n + 1)
    E = np.sin(np.asarray(theta_eval, dtype=float)[:, None] * m[None, :])
    return E @ A
