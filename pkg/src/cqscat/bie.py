"""Boundary integral formulations for one complex-wavenumber Helmholtz solve.

Formulations
------------
sl_dirichlet      weighted single-layer first-kind system (Alpert or QBX)
kt_second_kind    -phi/2 + K^T, weighted, closed curves (Alpert or QBX)
hypersingular     N(k) split as (N(k)-N(0)) via Alpert plus the Kress form
                  of N(0) (bounded kernel + spectral Hilbert term); smooth
                  closed curves, or smooth open arcs through the doubled
                  cosine parametrization with odd densities
sl_split_cutoff   Kussmaul-Martensen log splitting localized by a cutoff
sl_split_jtilde   log splitting with the exponentially damped J~_0 factor
cc                current-and-charge 2x2 block system (QBX)

All wavenumbers satisfy Im k >= 0 (k = i s for Laplace frequencies s with
Re s > 0), and assembled systems are dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import trig
from .alpert import alpert_rule, assemble_alpert_arc, assemble_alpert_matrix
from .geometry import BoundaryMesh, ParamCurve
from .linalg import GmresReport, LuOperator, gmres
from .qbx import QbxConfig, QbxEngine, periodic_qbx_operator
from .specfun import EULER_GAMMA, green_diff_derivs, hankel1_grid

TWO_PI = 2.0 * math.pi

_TAGS = ("sl_dirichlet", "kt_second_kind", "hypersingular", "cc",
         "cc_preconditioned", "sl_split_cutoff", "sl_split_jtilde")


@dataclass(frozen=True)
class Formulation:
    tag: str
    quadrature: str = "alpert"      # "alpert" | "qbx"
    alpert_a: int = 2
    alpert_m: int = 3
    qbx_p: int = 8
    qbx_beta: int = 4
    split_L: int = 4                # Taylor truncation of the J~_0 splitting

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown formulation {self.tag!r}")
        if self.quadrature not in ("alpert", "qbx"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        if self.tag in ("cc", "cc_preconditioned") and self.quadrature != "qbx":
            raise ValueError("current-and-charge requires QBX")
        if self.tag in ("hypersingular", "sl_split_cutoff", "sl_split_jtilde") \
                and self.quadrature != "alpert":
            raise ValueError(f"{self.tag} uses the Alpert/spectral path")


@dataclass
class NystromSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    k: complex
    formulation: Formulation
    mesh: BoundaryMesh
    unknown_scale: np.ndarray       # physical density = unknown / scale
    cc_blocks: tuple | None = None
    engine: object = None           # QbxEngine when quadrature is qbx

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class DensitySolution:
    values: np.ndarray
    k: complex
    formulation: Formulation
    mesh: BoundaryMesh
    unknown_scale: np.ndarray
    engine: object = None


def _check_wavenumber(k) -> complex:
    k = complex(k)
    if abs(k) < 1e-8:
        raise ValueError("wavenumber too close to zero")
    if k.imag < -1e-12:
        raise ValueError("wavenumbers must satisfy Im k >= 0")
    return k


def _graded_positions(mesh: BoundaryMesh):
    curve = mesh.curve

    def pos(t):
        par, _ = mesh.param_map(np.asarray(t, dtype=float))
        return curve.position(par)

    return pos


def _sl_kernel(mesh: BoundaryMesh, k: complex):
    pos = _graded_positions(mesh)

    def kern(t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        tt, ss = np.broadcast_arrays(t, s)
        d = pos(tt) - pos(ss)
        r = np.hypot(d[..., 0], d[..., 1])
        r = np.maximum(r, 1e-30)
        return 0.25j * hankel1_grid(0, k * r)

    return kern


def _kt_kernel(mesh: BoundaryMesh, k: complex):
    """Weighted adjoint-double-layer kernel; target factor gamma'(t)^perp."""
    pos = _graded_positions(mesh)
    curve = mesh.curve

    def kern(t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        tt, ss = np.broadcast_arrays(t, s)
        par_t, dpar_t = mesh.param_map(tt)
        xt = curve.position(par_t)
        der = curve.derivative(par_t) * dpar_t[..., None]
        d = xt - pos(ss)
        r = np.hypot(d[..., 0], d[..., 1])
        r = np.maximum(r, 1e-30)
        perp = d[..., 0] * der[..., 1] - d[..., 1] * der[..., 0]
        return -0.25j * k * hankel1_grid(1, k * r) * perp / r

    return kern


def _hyp_diff_kernel(mesh: BoundaryMesh, k: complex, include_speed: bool):
    """Kernel of N(k) - N(0): second normal derivatives of G_k - G_0."""
    curve = mesh.curve

    def kern(t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        tt, ss = np.broadcast_arrays(t, s)
        par_t, _ = mesh.param_map(tt)
        par_s, _ = mesh.param_map(ss)
        xt = curve.position(par_t)
        ys = curve.position(par_s)
        dert = curve.derivative(par_t)
        ders = curve.derivative(par_s)
        spt = np.hypot(dert[..., 0], dert[..., 1])
        sps = np.hypot(ders[..., 0], ders[..., 1])
        nt = np.stack([dert[..., 1], -dert[..., 0]], axis=-1) / spt[..., None]
        ns = np.stack([ders[..., 1], -ders[..., 0]], axis=-1) / sps[..., None]
        d = xt - ys
        r = np.hypot(d[..., 0], d[..., 1])
        r = np.maximum(r, 1e-30)
        cx = (d[..., 0] * nt[..., 0] + d[..., 1] * nt[..., 1]) / r
        cy = (d[..., 0] * ns[..., 0] + d[..., 1] * ns[..., 1]) / r
        nn = nt[..., 0] * ns[..., 0] + nt[..., 1] * ns[..., 1]
        F, F1, F2 = green_diff_derivs(k, r)
        out = -F2 * cx * cy - F1 * (nn - cx * cy) / r
        if include_speed:
            out = out * sps
        return out

    return kern


def _kress_q(curve: ParamCurve, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d^2/da db of log(|gamma(a)-gamma(b)|^2 / (a-b)^2), diagonal by limit."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    ga, gb = curve.position(a), curve.position(b)
    da, db = curve.derivative(a), curve.derivative(b)
    d = ga - gb
    rho2 = d[..., 0] ** 2 + d[..., 1] ** 2
    diag = np.abs(a - b) < 1e-13
    rho2 = np.where(diag, 1.0, rho2)
    ab2 = np.where(diag, 1.0, (a - b) ** 2)
    Da = d[..., 0] * da[..., 0] + d[..., 1] * da[..., 1]
    Db = d[..., 0] * db[..., 0] + d[..., 1] * db[..., 1]
    dot = da[..., 0] * db[..., 0] + da[..., 1] * db[..., 1]
    off = -2.0 * dot / rho2 + 4.0 * Da * Db / rho2**2 - 2.0 / ab2
    if np.any(diag):
        aa = curve.second_derivative(a)
        aaa = curve.third_derivative(a)
        A1 = da[..., 0] ** 2 + da[..., 1] ** 2
        A2 = da[..., 0] * aa[..., 0] + da[..., 1] * aa[..., 1]
        dd = aa[..., 0] ** 2 + aa[..., 1] ** 2
        d13 = da[..., 0] * aaa[..., 0] + da[..., 1] * aaa[..., 1]
        lim = -(A2 / A1) ** 2 + 0.5 * dd / A1 + d13 / (3.0 * A1)
        off = np.where(diag, lim, off)
    return off


def _kress_n0_closed(curve: ParamCurve, t: np.ndarray) -> np.ndarray:
    """Kress kernel N_0(t,s) with the 4 sin^2 reference on the grid."""
    T, S = t[:, None], t[None, :]
    ga, gb = curve.position(T), curve.position(S)
    da, db = curve.derivative(T), curve.derivative(S)
    d = ga - gb
    rho2 = d[..., 0] ** 2 + d[..., 1] ** 2
    eye = np.eye(len(t), dtype=bool)
    rho2 = np.where(eye, 1.0, rho2)
    Da = d[..., 0] * da[..., 0] + d[..., 1] * da[..., 1]
    Db = d[..., 0] * db[..., 0] + d[..., 1] * db[..., 1]
    dot = da[..., 0] * db[..., 0] + da[..., 1] * db[..., 1]
    sin2 = np.where(eye, 1.0, np.sin((T - S) / 2.0) ** 2)
    N0 = -2.0 * dot / rho2 + 4.0 * Da * Db / rho2**2 - 0.5 / sin2
    aa = curve.second_derivative(t)
    aaa = curve.third_derivative(t)
    da1 = curve.derivative(t)
    A1 = np.sum(da1**2, axis=-1)
    A2 = np.sum(da1 * aa, axis=-1)
    lim = (-(A2 / A1) ** 2 + 0.5 * np.sum(aa**2, axis=-1) / A1
           + np.sum(da1 * aaa, axis=-1) / (3.0 * A1) - 1.0 / 6.0)
    N0[eye] = lim
    return N0


def kress_n0_diagonal(curve: ParamCurve, t: np.ndarray) -> np.ndarray:
    """Diagonal limit of the closed-curve Kress kernel (exposed for tests)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.diag(_kress_n0_closed(curve, t)).copy()


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble(form: Formulation, mesh: BoundaryMesh, k, boundary_data) -> NystromSystem:
    """Build the dense system for one wavenumber.

    ``boundary_data`` holds node values of g (Dirichlet) or f = du/dn
    (Neumann) at the mesh unknown nodes (half grid for doubled arcs).
    """
    k = _check_wavenumber(k)
    data = np.asarray(boundary_data, dtype=complex)
    if form.tag == "sl_dirichlet":
        return _assemble_sl(form, mesh, k, data)
    if form.tag == "kt_second_kind":
        return _assemble_kt(form, mesh, k, data)
    if form.tag == "hypersingular":
        return _assemble_hyp(form, mesh, k, data)
    if form.tag in ("cc", "cc_preconditioned"):
        sys = _assemble_cc(form, mesh, k, data)
        if form.tag == "cc_preconditioned":
            sys = precondition_cc(sys)
        return sys
    if form.tag in ("sl_split_cutoff", "sl_split_jtilde"):
        return _assemble_split(form, mesh, k, data)
    raise ValueError(form.tag)


def _assemble_sl(form, mesh, k, data):
    if form.quadrature == "alpert":
        if mesh.kind != "graded":
            raise ValueError("Alpert single layer needs a graded mesh")
        rule = alpert_rule(form.alpert_a, form.alpert_m)
        kern = _sl_kernel(mesh, k)
        if mesh.doubled:
            M = assemble_alpert_arc(kern, mesh, rule)
            n = mesh.n_half
            if len(data) != n:
                raise ValueError("data must live on the half grid")
            scale = mesh.speeds[:n]
        else:
            M = assemble_alpert_matrix(kern, mesh, rule)
            scale = mesh.speeds
        return NystromSystem(M, data.copy(), k, form, mesh, scale)
    engine = QbxEngine(mesh, QbxConfig(form.qbx_p, form.qbx_beta))
    wts = _sl_qbx_weightings(mesh)
    M = _panelwise_operator(engine, k, "value", wts)
    scale = _panel_scale(mesh, wts)
    return NystromSystem(M, data.copy(), k, form, mesh, scale, engine=engine)


def _sl_qbx_weightings(mesh):
    """Per-panel density representation for the weighted single layer."""
    names = []
    for p in mesh.panels:
        names.append("fej2" if p.kind == "end" else "cheb")
    return names


def _panel_scale(mesh, weighting_names):
    w = np.empty(mesh.n_nodes)
    for p, name in zip(mesh.panels, weighting_names):
        sl = p.sl
        if name == "plain":
            w[sl] = 1.0
        elif name == "cheb":
            w[sl] = mesh.speeds[sl] * np.sqrt(1.0 - mesh.nodes[sl] ** 2)
        elif name == "cheb_times":
            w[sl] = mesh.speeds[sl] / np.sqrt(1.0 - mesh.nodes[sl] ** 2)
        elif name == "fej1":
            w[sl] = mesh.speeds[sl] * np.sqrt(mesh.nodes[sl])
        elif name == "fej2":
            w[sl] = mesh.speeds[sl] / np.sqrt(mesh.nodes[sl])
        else:
            raise ValueError(name)
    return w


def _panelwise_operator(engine, k, kind, weighting_names, source_factor=None):
    return engine.operator(k, kind, weighting_names, source_factor=source_factor)


def _assemble_kt(form, mesh, k, data):
    if not mesh.curve.closed:
        raise ValueError("second-kind K^T formulation needs a closed curve")
    if form.quadrature == "alpert":
        if mesh.kind != "graded":
            raise ValueError("Alpert K^T needs a graded mesh")
        rule = alpert_rule(form.alpert_a, form.alpert_m)
        kern = _kt_kernel(mesh, k)
        M = assemble_alpert_matrix(kern, mesh, rule)
        M -= 0.5 * np.eye(mesh.n_nodes)
        rhs = data * mesh.speeds
        return NystromSystem(M, rhs, k, form, mesh, mesh.speeds.copy())
    engine = QbxEngine(mesh, QbxConfig(form.qbx_p, form.qbx_beta))
    wts = _sl_qbx_weightings(mesh)
    KT = _panelwise_operator(engine, k, "dn_avg", wts)
    scale = _panel_scale(mesh, wts)
    M = np.diag(scale) @ KT - 0.5 * np.eye(mesh.n_nodes)
    rhs = data * scale
    return NystromSystem(M, rhs, k, form, mesh, scale, engine=engine)


def _assemble_hyp(form, mesh, k, data):
    if mesh.kind != "graded":
        raise ValueError("hypersingular split needs a graded mesh")
    if mesh.curve.corner_params:
        raise ValueError("hypersingular split requires a smooth curve "
                         "(use the current-and-charge formulation instead)")
    rule = alpert_rule(form.alpert_a, form.alpert_m)
    curve = mesh.curve
    if not mesh.doubled:
        N = mesh.n_nodes
        kern = _hyp_diff_kernel(mesh, k, include_speed=True)
        M = mesh.speeds[:, None] * assemble_alpert_matrix(kern, mesh, rule)
        t = mesh.params
        M += (mesh.h / (4.0 * np.pi)) * _kress_n0_closed(curve, t)
        M += -0.5 * trig.hilbert_derivative_matrix(N)
        rhs = data * mesh.speeds
        return NystromSystem(M, rhs, k, form, mesh, np.ones(N))
    # open smooth arc: doubled parametrization, odd density
    n = mesh.n_half
    if len(data) != n:
        raise ValueError("data must live on the half grid")
    kern = _hyp_diff_kernel(mesh, k, include_speed=False)
    M = mesh.speeds[:n][:, None] * assemble_alpert_arc(kern, mesh, rule) \
        * mesh.speeds[:n][None, :]
    th_half = mesh.nodes[:n]
    th_full = mesh.nodes
    tau_half, _ = mesh.param_map(th_half)
    tau_full, _ = mesh.param_map(th_full)
    Q = _kress_q(curve, tau_half[:, None], tau_full[None, :])
    N0a = np.sin(th_half)[:, None] * np.sin(th_full)[None, :] * Q
    fold = 0.5 * (mesh.h / (4.0 * np.pi)) * (N0a[:, :n] - N0a[:, ::-1][:, :n])
    M += fold
    M += trig.arc_hilbert_matrix(n)
    rhs = data * mesh.speeds[:n]
    return NystromSystem(M, rhs, k, form, mesh, np.ones(n))


def _cc_weightings(mesh):
    """(phi-route, rho-route) weighting names per panel for the CC system."""
    phi_names, rho_names = [], []
    single_arc = (not mesh.curve.closed) and len(mesh.panels) == 1
    for p in mesh.panels:
        if p.kind == "end":
            phi_names.append("fej2")
            rho_names.append("fej1")
        elif single_arc:
            phi_names.append("cheb_times")
            rho_names.append("cheb")
        else:
            phi_names.append("plain")
            rho_names.append("cheb")
    return phi_names, rho_names


def _assemble_cc(form, mesh, k, data):
    if mesh.kind != "panels":
        raise ValueError("current-and-charge runs on Chebyshev panels")
    engine = QbxEngine(mesh, QbxConfig(form.qbx_p, form.qbx_beta))
    n = mesh.n_nodes
    phi_w, rho_w = _cc_weightings(mesh)
    nt = mesh.normals
    tt = mesh.tangents
    tf = engine.fine.tangents
    nf = engine.fine.normals
    # CC11 = -ik n(x) . SL[n phi](x)
    cc11 = np.zeros((n, n), dtype=complex)
    for comp in range(2):
        op = _panelwise_operator(engine, k, "value", phi_w,
                                 source_factor=nf[:, comp])
        cc11 += nt[:, comp][:, None] * op
    cc11 *= -1j * k
    # CC12 = d_s SL[rho](x)
    cc12 = _panelwise_operator(engine, k, "ds", rho_w)
    # CC21 = div SL[t phi](x)
    cc21 = np.zeros((n, n), dtype=complex)
    for comp in range(2):
        opn = _panelwise_operator(engine, k, "div_n", phi_w,
                                  source_factor=tf[:, comp])
        opt = _panelwise_operator(engine, k, "div_t", phi_w,
                                  source_factor=tf[:, comp])
        cc21 += nt[:, comp][:, None] * opn + tt[:, comp][:, None] * opt
    # CC22 = -ik SL[rho](x)
    cc22 = -1j * k * _panelwise_operator(engine, k, "value", rho_w)
    M = np.block([[cc11, cc12], [cc21, cc22]])
    rhs = np.concatenate([data / (1j * k), np.zeros(n, dtype=complex)])
    scale = np.concatenate([_panel_scale(mesh, phi_w), _panel_scale(mesh, rho_w)])
    return NystromSystem(M, rhs, k, form, mesh, scale,
                         cc_blocks=(cc11, cc12, cc21, cc22), engine=engine)


def precondition_cc(system: NystromSystem) -> NystromSystem:
    """Left-multiply the CC system by [[CC22, -CC12], [-CC21, CC11]]."""
    if system.cc_blocks is None:
        raise ValueError("preconditioner applies to current-and-charge systems")
    c11, c12, c21, c22 = system.cc_blocks
    P = np.block([[c22, -c12], [-c21, c11]])
    scale = np.linalg.norm(P, ord=np.inf)
    if not np.isfinite(scale) or scale < 1e-300:
        raise np.linalg.LinAlgError("singular preconditioner block")
    form = Formulation("cc_preconditioned", "qbx", qbx_p=system.formulation.qbx_p,
                       qbx_beta=system.formulation.qbx_beta)
    return NystromSystem(P @ system.matrix, P @ system.rhs, system.k, form,
                         system.mesh, system.unknown_scale,
                         cc_blocks=system.cc_blocks, engine=system.engine)


def _assemble_split(form, mesh, k, data):
    """Kernel-splitting baselines on smooth closed graded meshes."""
    if mesh.kind != "graded" or mesh.doubled or mesh.curve.corner_params:
        raise ValueError("splitting baselines run on smooth closed curves")
    N = mesh.n_nodes
    t = mesh.nodes
    pos = mesh.points
    d = pos[:, None, :] - pos[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    eye = np.eye(N, dtype=bool)
    r_safe = np.where(eye, 1.0, r)
    absk = abs(k)
    from scipy import special as _sp

    if form.tag == "sl_split_cutoff":
        chi = _cutoff(absk * r_safe**4)
        with np.errstate(over="ignore", invalid="ignore"):
            j0 = np.where(chi > 0, _sp.jv(0, k * r_safe), 0.0)
        j0 = np.nan_to_num(j0, nan=0.0, posinf=0.0, neginf=0.0)
        H1 = chi * (-1.0 / (4.0 * np.pi)) * j0
    else:
        L = form.split_L
        phase = np.exp((2.0 * np.angle(k) + np.pi) * 1j)
        c = np.zeros(L + 1, dtype=complex)
        for ell in range(L + 1):
            acc = 0.0 + 0.0j
            for m in range(ell // 2 + 1):
                acc += phase**m / (4.0**m * math.factorial(m) ** 2
                                   * math.factorial(ell - 2 * m))
            c[ell] = acc
        x = absk * r_safe
        poly = np.zeros_like(r_safe, dtype=complex)
        for ell in range(L, -1, -1):
            poly = poly * x + c[ell]
        jt = np.exp(-x) * poly
        H1 = (-1.0 / (4.0 * np.pi)) * jt
    Hfull = 0.25j * hankel1_grid(0, k * r_safe)
    log4s = np.log(np.where(eye, 1.0, 4.0 * np.sin((t[:, None] - t[None, :]) / 2.0) ** 2))
    H2 = Hfull - H1 * log4s
    diag = (0.25j - (EULER_GAMMA + np.log(k / 2.0) + np.log(mesh.speeds))
            / (2.0 * np.pi))
    H2[eye] = diag
    R = trig.log_sin_quadrature_matrix(N)
    M = R * H1 + (TWO_PI / N) * H2
    return NystromSystem(M, data.copy(), k, form, mesh, mesh.speeds.copy())


def _cutoff(x: np.ndarray) -> np.ndarray:
    """Smooth bump: 1 for x <= 1/2, 0 for x >= 1, C^inf in between."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[x <= 0.5] = 1.0
    mid = (x > 0.5) & (x < 1.0)
    u = (x[mid] - 0.5) / 0.5
    # standard partition-of-unity ramp e(1-u)/(e(1-u)+e(u)), e(v)=exp(-1/v)
    ev = np.exp(-1.0 / (1.0 - u))
    eu = np.exp(-1.0 / u)
    out[mid] = ev / (ev + eu)
    return out


def assemble_splitting_baseline(kind: str, mesh: BoundaryMesh, k, data,
                                L: int = 4) -> NystromSystem:
    tag = {"cutoff": "sl_split_cutoff", "jtilde": "sl_split_jtilde"}[kind]
    return assemble(Formulation(tag, "alpert", split_L=L), mesh, k, data)


# ---------------------------------------------------------------------------
# solve and evaluate
# ---------------------------------------------------------------------------

def solve_system(system: NystromSystem, method: str = "lu", tol: float = 1e-7,
                 max_iter: int = 0):
    """Solve; returns (DensitySolution, GmresReport or None)."""
    if method == "lu":
        x = LuOperator.factor(system.matrix).solve(system.rhs)
        report = None
    elif method == "gmres":
        x, report = gmres(system.matrix, system.rhs, tol=tol, max_iter=max_iter)
    else:
        raise ValueError(method)
    sol = DensitySolution(x, system.k, system.formulation, system.mesh,
                          system.unknown_scale, engine=system.engine)
    return sol, report


def _sl_rep_values(sol: DensitySolution):
    """(source points, complex weights) so that u(z) = sum_j G(z,y_j) w_j."""
    mesh = sol.mesh
    if mesh.kind == "graded":
        if mesh.doubled:
            n = mesh.n_half
            return mesh.points[:n], sol.values * mesh.h
        return mesh.points, sol.values * mesh.h
    raise ValueError("panel SL representations evaluate through the engine")


def eval_potential(sol: DensitySolution, points: np.ndarray) -> np.ndarray:
    """Scattered field at exterior points (>= one mesh spacing away)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = sol.k
    mesh = sol.mesh
    tag = sol.formulation.tag
    _reject_near_curve(mesh, points)
    if tag in ("sl_dirichlet", "kt_second_kind", "sl_split_cutoff", "sl_split_jtilde"):
        if mesh.kind == "panels":
            wts = _sl_qbx_weightings(mesh)
            rows = _panelwise_potential(sol.engine, k, points, wts, "single")
            return rows @ sol.values
        src, w = _sl_rep_values(sol)
        d = points[:, None, :] - src[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        return (0.25j * hankel1_grid(0, k * r)) @ w
    if tag == "hypersingular":
        # double layer representation with density phi = values
        n = mesh.n_half if mesh.doubled else mesh.n_nodes
        src = mesh.points[:n]
        nrm = mesh.normals[:n]
        w = sol.values * mesh.speeds[:n] * mesh.h
        d = points[:, None, :] - src[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        cosf = (d[..., 0] * nrm[None, :, 0] + d[..., 1] * nrm[None, :, 1]) / r
        return (0.25j * k * hankel1_grid(1, k * r) * cosf) @ w
    if tag in ("cc", "cc_preconditioned"):
        n = mesh.n_nodes
        phi_w, _ = _cc_weightings(mesh)
        rows = _panelwise_potential(sol.engine, k, points, phi_w, "double")
        return rows @ sol.values[:n]
    raise ValueError(tag)


def _panelwise_potential(engine, k, points, weighting_names, kernel):
    return engine.potential_rows(k, points, weighting_names, kernel=kernel)


def eval_gradient(sol: DensitySolution, points: np.ndarray) -> np.ndarray:
    """Gradient of the scattered field at exterior points, shape (n, 2)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = sol.k
    mesh = sol.mesh
    tag = sol.formulation.tag
    if tag in ("sl_dirichlet", "kt_second_kind", "sl_split_cutoff", "sl_split_jtilde"):
        if mesh.kind == "panels":
            src, nrm, w = _panel_sources(sol, "phi")
        else:
            src, w = _sl_rep_values(sol)
            nrm = None
        d = points[:, None, :] - src[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        fac = (-0.25j * k * hankel1_grid(1, k * r) / r) * w[None, :]
        return np.stack([(fac * d[..., 0]).sum(axis=1),
                         (fac * d[..., 1]).sum(axis=1)], axis=-1)
    # double layer gradient
    if tag in ("cc", "cc_preconditioned"):
        src, nrm, w = _panel_sources(sol, "phi")
    else:
        n = mesh.n_half if mesh.doubled else mesh.n_nodes
        src = mesh.points[:n]
        nrm = mesh.normals[:n]
        w = sol.values[:n] * mesh.speeds[:n] * mesh.h
    d = points[:, None, :] - src[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    kr = k * r
    h0 = hankel1_grid(0, kr)
    h1 = hankel1_grid(1, kr)
    cy = (d[..., 0] * nrm[None, :, 0] + d[..., 1] * nrm[None, :, 1]) / r
    Gp = -0.25j * k * h1
    Gpp = -0.25j * k * k * (h0 - h1 / kr)
    gx = (-Gpp * cy * d[..., 0] / r - Gp * (nrm[None, :, 0] / r - d[..., 0] * cy / r**2)) * w[None, :]
    gy = (-Gpp * cy * d[..., 1] / r - Gp * (nrm[None, :, 1] / r - d[..., 1] * cy / r**2)) * w[None, :]
    return np.stack([gx.sum(axis=1), gy.sum(axis=1)], axis=-1)


def _panel_sources(sol: DensitySolution, which: str):
    """Fine-grid sources with their quadrature weights for potential sums."""
    engine = sol.engine
    mesh = sol.mesh
    n = mesh.n_nodes
    if sol.formulation.tag in ("cc", "cc_preconditioned"):
        phi_w, _ = _cc_weightings(mesh)
        U = sol.values[:n]
    else:
        phi_w = _sl_qbx_weightings(mesh)
        U = sol.values
    w = engine.factors(phi_w) * (engine.fine.interp @ U)
    return engine.fine.points, engine.fine.normals, w


def _reject_near_curve(mesh: BoundaryMesh, points):
    d = points[:, None, :] - mesh.points[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    min_d = r.min()
    spacing = np.median(np.linalg.norm(np.diff(mesh.points, axis=0), axis=1))
    if min_d < 0.5 * spacing:
        raise ValueError(f"evaluation point too close to the boundary "
                         f"(distance {min_d:.3g})")


def periodic_qbx_sl_matrix(mesh: BoundaryMesh, k, p: int = 12, beta: int = 4) -> np.ndarray:
    """Single-layer value operator on a smooth closed equispaced mesh.

    Global trapezoid-based QBX acting on plain density values; used by the
    circle eigenvalue study.
    """
    k = _check_wavenumber(k)
    return periodic_qbx_operator(k, mesh, QbxConfig(p=p, beta=beta), kind="value")
