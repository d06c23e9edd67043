"""Scatterer boundaries, sigmoid-graded global meshes, and Chebyshev panels.

Closed curves carry a 2pi-periodic parametrization; open arcs carry a chain
parameter on [-1, 1].  Graded-equispaced meshes for open arcs use the doubled
parametrization tau = -cos(theta), theta in [0, 2pi], which traverses the arc
twice; solvers then work on the half grid theta in (0, pi) with even/odd
reflection.  Normals are outward for counterclockwise closed curves and equal
rotate(tangent, -90 deg) everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass
class ParamCurve:
    """Piecewise-smooth boundary with analytic parametrization.

    ``position``/``derivative``/... map arrays of parameters to (n, 2) arrays.
    ``corner_params`` lists interior corner parameters (strictly inside the
    domain for arcs; anywhere on the period for closed curves).
    """

    name: str
    closed: bool
    position: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]
    third_derivative: Callable[[np.ndarray], np.ndarray]
    corner_params: list = field(default_factory=list)

    @property
    def domain(self):
        return (0.0, TWO_PI) if self.closed else (-1.0, 1.0)


def _vec(fx, fy):
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.asarray(fx(t), dtype=float) * np.ones_like(t),
                         np.asarray(fy(t), dtype=float) * np.ones_like(t)], axis=-1)
    return f


def _polyline_curve(name: str, vertices: Sequence) -> ParamCurve:
    """Open polyline on chain parameter [-1, 1], uniform speed per segment."""
    verts = np.asarray(vertices, dtype=float)
    nseg = len(verts) - 1
    breaks = np.linspace(-1.0, 1.0, nseg + 1)

    def locate(t):
        t = np.asarray(t, dtype=float)
        seg = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, nseg - 1)
        return seg

    def position(t):
        t = np.asarray(t, dtype=float)
        seg = locate(t)
        lo = breaks[seg]
        frac = (t - lo) / (breaks[seg + 1] - lo)
        return verts[seg] + frac[..., None] * (verts[seg + 1] - verts[seg])

    def derivative(t):
        t = np.asarray(t, dtype=float)
        seg = locate(t)
        scale = (nseg / 2.0)
        return (verts[seg + 1] - verts[seg]) * scale

    zero = lambda t: np.zeros(np.shape(np.asarray(t, dtype=float)) + (2,))
    return ParamCurve(name, False, position, derivative, zero, zero,
                      corner_params=list(breaks[1:-1]))


def make_shape(name: str, **params) -> ParamCurve:
    """Shape catalog by name.

    circle(radius, center), teardrop(alpha), boomerang, kite, starfish,
    strip(p0, p1), v_shape, w_shape, circular_arc(radius, center,
    angle_center, angle_span).
    """
    name = name.lower()
    if name == "circle":
        r = float(params.get("radius", 1.0))
        cx, cy = params.get("center", (0.0, 0.0))
        if r <= 0:
            raise ValueError("circle radius must be positive")
        return ParamCurve(
            "circle", True,
            _vec(lambda t: cx + r * np.cos(t), lambda t: cy + r * np.sin(t)),
            _vec(lambda t: -r * np.sin(t), lambda t: r * np.cos(t)),
            _vec(lambda t: -r * np.cos(t), lambda t: -r * np.sin(t)),
            _vec(lambda t: r * np.sin(t), lambda t: -r * np.cos(t)),
        )
    if name == "teardrop":
        alpha = float(params.get("alpha", 0.5))
        if not 0.0 < alpha < 1.0:
            raise ValueError("teardrop alpha must lie in (0, 1)")
        b = math.tan(alpha * math.pi / 2.0)
        return ParamCurve(
            "teardrop", True,
            _vec(lambda t: 2.0 * np.sin(t / 2.0), lambda t: -b * np.sin(t)),
            _vec(lambda t: np.cos(t / 2.0), lambda t: -b * np.cos(t)),
            _vec(lambda t: -0.5 * np.sin(t / 2.0), lambda t: b * np.sin(t)),
            _vec(lambda t: -0.25 * np.cos(t / 2.0), lambda t: b * np.cos(t)),
            corner_params=[0.0],
        )
    if name == "boomerang":
        return ParamCurve(
            "boomerang", True,
            _vec(lambda t: -(2.0 / 3.0) * np.sin(1.5 * t), lambda t: -np.sin(t)),
            _vec(lambda t: -np.cos(1.5 * t), lambda t: -np.cos(t)),
            _vec(lambda t: 1.5 * np.sin(1.5 * t), lambda t: np.sin(t)),
            _vec(lambda t: 2.25 * np.cos(1.5 * t), lambda t: np.cos(t)),
            corner_params=[0.0],
        )
    if name == "kite":
        return ParamCurve(
            "kite", True,
            _vec(lambda t: np.cos(t) + 0.65 * np.cos(2 * t) - 0.65,
                 lambda t: 1.5 * np.sin(t)),
            _vec(lambda t: -np.sin(t) - 1.3 * np.sin(2 * t),
                 lambda t: 1.5 * np.cos(t)),
            _vec(lambda t: -np.cos(t) - 2.6 * np.cos(2 * t),
                 lambda t: -1.5 * np.sin(t)),
            _vec(lambda t: np.sin(t) + 5.2 * np.sin(2 * t),
                 lambda t: -1.5 * np.cos(t)),
        )
    if name == "starfish":
        a, m = 0.3, 5

        def rho(t):
            return 1.0 + a * np.cos(m * t)

        def rho1(t):
            return -a * m * np.sin(m * t)

        def rho2(t):
            return -a * m * m * np.cos(m * t)

        def rho3(t):
            return a * m**3 * np.sin(m * t)

        return ParamCurve(
            "starfish", True,
            _vec(lambda t: rho(t) * np.cos(t), lambda t: rho(t) * np.sin(t)),
            _vec(lambda t: rho1(t) * np.cos(t) - rho(t) * np.sin(t),
                 lambda t: rho1(t) * np.sin(t) + rho(t) * np.cos(t)),
            _vec(lambda t: (rho2(t) - rho(t)) * np.cos(t) - 2 * rho1(t) * np.sin(t),
                 lambda t: (rho2(t) - rho(t)) * np.sin(t) + 2 * rho1(t) * np.cos(t)),
            _vec(lambda t: (rho3(t) - 3 * rho1(t)) * np.cos(t)
                 - (3 * rho2(t) - rho(t)) * np.sin(t),
                 lambda t: (rho3(t) - 3 * rho1(t)) * np.sin(t)
                 + (3 * rho2(t) - rho(t)) * np.cos(t)),
        )
    if name == "strip":
        p0 = np.asarray(params.get("p0", (-1.0, 0.0)), dtype=float)
        p1 = np.asarray(params.get("p1", (1.0, 0.0)), dtype=float)
        mid, half = (p0 + p1) / 2.0, (p1 - p0) / 2.0
        zero = lambda t: np.zeros(np.shape(np.asarray(t, dtype=float)) + (2,))
        return ParamCurve(
            "strip", False,
            lambda t: mid + np.asarray(t, dtype=float)[..., None] * half,
            lambda t: half * np.ones(np.shape(np.asarray(t, dtype=float)) + (2,)),
            zero, zero,
        )
    if name == "v_shape":
        s = math.sqrt(2.0) / 2.0
        return _polyline_curve("v_shape", [(-s, s), (0.0, 0.0), (s, s)])
    if name == "w_shape":
        return _polyline_curve(
            "w_shape",
            [(-1.0, 0.5), (-0.5, 0.0), (0.0, 0.5), (0.5, 0.0), (1.0, 0.5)])
    if name == "circular_arc":
        r = float(params.get("radius", 1.0))
        cx, cy = params.get("center", (0.0, 0.0))
        phi_c = float(params.get("angle_center", math.pi))
        span = float(params.get("angle_span", 11.0 * math.pi / 6.0))

        def phi(t):
            return phi_c + np.asarray(t, dtype=float) * span / 2.0

        half = span / 2.0
        return ParamCurve(
            "circular_arc", False,
            _vec(lambda t: cx + r * np.cos(phi(t)), lambda t: cy + r * np.sin(phi(t))),
            _vec(lambda t: -r * half * np.sin(phi(t)),
                 lambda t: r * half * np.cos(phi(t))),
            _vec(lambda t: -r * half**2 * np.cos(phi(t)),
                 lambda t: -r * half**2 * np.sin(phi(t))),
            _vec(lambda t: r * half**3 * np.sin(phi(t)),
                 lambda t: -r * half**3 * np.cos(phi(t))),
        )
    raise ValueError(f"unknown shape {name!r}")


@dataclass
class SigmoidMap:
    """Kress sigmoid reparametrization of one segment [t0, t1], sigma > 2.

    Fixes both endpoints, is strictly increasing, and has derivatives 1..
    sigma-1 vanishing at the endpoints.
    """

    sigma: float
    t0: float
    t1: float

    def __post_init__(self):
        if self.sigma <= 2:
            raise ValueError("sigmoid sigma must exceed 2")
        if not self.t1 > self.t0:
            raise ValueError("empty sigmoid segment")

    def eval(self, s):
        """Return (w, w', w'', w''') at parameters s in [t0, t1]."""
        s = np.asarray(s, dtype=float)
        if np.any(s < self.t0 - 1e-12) or np.any(s > self.t1 + 1e-12):
            raise ValueError("sigmoid evaluated outside its segment")
        T0, T1, sg = self.t0, self.t1, self.sigma
        dT = T1 - T0
        r = (2.0 * s - T0 - T1) / dT
        c3 = 1.0 / sg - 0.5
        v = -c3 * r**3 + r / sg + 0.5
        v1 = (-3.0 * c3 * r**2 + 1.0 / sg) * (2.0 / dT)
        v2 = (-6.0 * c3 * r) * (2.0 / dT) ** 2
        v3 = (-6.0 * c3) * (2.0 / dT) ** 3 * np.ones_like(r)
        v = np.clip(v, 0.0, 1.0)
        N = T1 * v**sg + T0 * (1.0 - v) ** sg
        D = v**sg + (1.0 - v) ** sg
        Nu = sg * (T1 * v ** (sg - 1) - T0 * (1.0 - v) ** (sg - 1))
        Du = sg * (v ** (sg - 1) - (1.0 - v) ** (sg - 1))
        Nuu = sg * (sg - 1) * (T1 * v ** (sg - 2) + T0 * (1.0 - v) ** (sg - 2))
        Duu = sg * (sg - 1) * (v ** (sg - 2) + (1.0 - v) ** (sg - 2))
        Nuuu = sg * (sg - 1) * (sg - 2) * (
            T1 * v ** (sg - 3) - T0 * (1.0 - v) ** (sg - 3))
        Duuu = sg * (sg - 1) * (sg - 2) * (v ** (sg - 3) - (1.0 - v) ** (sg - 3))
        w = N / D
        wu = (Nu - w * Du) / D
        wuu = (Nuu - 2 * wu * Du - w * Duu) / D
        wuuu = (Nuuu - 3 * wuu * Du - 3 * wu * Duu - w * Duuu) / D
        # compose with v(s) (Faa di Bruno to third order)
        w1 = wu * v1
        w2 = wuu * v1**2 + wu * v2
        w3 = wuuu * v1**3 + 3 * wuu * v1 * v2 + wu * v3
        return w, w1, w2, w3


def sigmoid_eval(m: SigmoidMap, s):
    return m.eval(s)


class _GradingMap:
    """Piecewise sigmoid grading of [0, 2pi) split at corner parameters."""

    def __init__(self, corners, sigma):
        self.sigma = float(sigma)
        self.corners = sorted(float(c) % TWO_PI for c in corners)
        self.maps = []
        if self.corners:
            cs = self.corners
            for i in range(len(cs)):
                a = cs[i]
                b = cs[i + 1] if i + 1 < len(cs) else cs[0] + TWO_PI
                self.maps.append(SigmoidMap(self.sigma, a, b))

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        if not self.maps:
            return t, np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
        w = np.empty_like(t)
        w1 = np.empty_like(t)
        w2 = np.empty_like(t)
        w3 = np.empty_like(t)
        base = self.corners[0]
        ts = (t - base) % TWO_PI + base
        edges = [m.t1 for m in self.maps]
        seg = np.clip(np.searchsorted(edges, ts, side="left"), 0, len(self.maps) - 1)
        for i, m in enumerate(self.maps):
            sel = seg == i
            if np.any(sel):
                a, b, c, d = m.eval(ts[sel])
                w[sel], w1[sel], w2[sel], w3[sel] = a, b, c, d
        return w % TWO_PI, w1, w2, w3


@dataclass
class Panel:
    """One Chebyshev panel: curve-domain interval plus local node data.

    ``kind`` is "interior" (local variable x on [-1,1], nodes cos theta) or
    "end" (local variable v on [0,1], nodes (1+cos theta)/2, with the arc
    endpoint at v = 0).  ``sl`` slices this panel's nodes out of the global
    mesh arrays (which are stored in curve order).
    """

    kind: str
    dom: tuple
    n: int
    sl: slice
    theta: np.ndarray      # local Chebyshev angles of the stored nodes
    local: np.ndarray      # local variable values (x or v), stored order
    params: np.ndarray     # curve parameters, stored (ascending) order
    jac: float             # |d tau / d local|
    reversed: bool         # curve param decreases as local variable increases
    arc_both_ends: bool = False


@dataclass
class BoundaryMesh:
    kind: str                    # "graded" or "panels"
    curve: ParamCurve
    nodes: np.ndarray            # working-variable grid (t, theta, or local)
    params: np.ndarray           # physical curve parameters per node
    points: np.ndarray           # (n, 2)
    tangents: np.ndarray         # (n, 2) unit, along increasing working var
    normals: np.ndarray          # (n, 2) unit, rotate(tangent, -90 deg)
    speeds: np.ndarray           # |d position / d working var|
    h: float = 0.0               # grid step (graded meshes)
    doubled: bool = False        # arc traversed twice (graded arcs)
    n_half: int = 0              # unknown count for doubled meshes
    sigma: float = 0.0
    grading: object = None
    param_map: Callable = None   # working var -> (curve param, d param/d var)
    panels: list = field(default_factory=list)
    panel_index: np.ndarray = None

    @property
    def n_nodes(self) -> int:
        return len(self.params)

    @property
    def n_unknowns(self) -> int:
        return self.n_half if self.doubled else self.n_nodes


def _frame(curve: ParamCurve, params, speed_scale):
    pts = curve.position(params)
    der = curve.derivative(params)
    sp = np.linalg.norm(der, axis=-1)
    tan = der / sp[:, None]
    nor = np.stack([tan[:, 1], -tan[:, 0]], axis=-1)
    return pts, tan, nor, sp * speed_scale


def build_graded_mesh(curve: ParamCurve, N: int, sigma: float = 4.0) -> BoundaryMesh:
    """Equispaced half-offset mesh; sigmoid-graded at corners.

    Closed curves: t_j = (j-1/2) 2pi/N on the periodic parametrization.
    Open arcs: the doubled map tau = -cos(theta) on theta_j = (j-1/2) 2pi/N
    (N even), with any interior corners graded in theta; the unknowns live on
    the first N/2 nodes.
    """
    if N < 8:
        raise ValueError("graded mesh needs N >= 8")
    h = TWO_PI / N
    t = (np.arange(1, N + 1) - 0.5) * h
    if curve.closed:
        grading = _GradingMap(curve.corner_params, sigma) if curve.corner_params else None

        def param_map(tt):
            tt = np.asarray(tt, dtype=float) % TWO_PI
            if grading is None:
                return tt, np.ones_like(tt)
            w, w1, _, _ = grading.eval(tt)
            return w, w1

        w, w1 = param_map(t)
        if curve.corner_params:
            mind = np.min(np.abs((w[:, None] - np.asarray(curve.corner_params)[None, :] + np.pi) % TWO_PI - np.pi))
            if mind < 1e-13:
                raise ValueError("mesh node coincides with a corner")
        pts, tan, nor, sp = _frame(curve, w, w1)
        return BoundaryMesh("graded", curve, t, w, pts, tan, nor, sp, h=h,
                            sigma=sigma, grading=grading, param_map=param_map)
    # open arc, doubled parametrization
    if N % 2:
        raise ValueError("doubled arc mesh needs even N")
    corners = sorted(curve.corner_params)
    if corners:
        theta_c = [float(np.arccos(-c)) for c in corners]
        segs = [0.0] + theta_c + [math.pi]
        smaps = [SigmoidMap(sigma, segs[i], segs[i + 1]) for i in range(len(segs) - 1)]

        def wtheta(th):
            th = np.asarray(th, dtype=float)
            mirror = th > math.pi
            thm = np.where(mirror, TWO_PI - th, th)
            w = np.empty_like(thm)
            w1 = np.empty_like(thm)
            edges = [m.t1 for m in smaps]
            seg = np.clip(np.searchsorted(edges, thm, side="left"), 0, len(smaps) - 1)
            for i, m in enumerate(smaps):
                sel = seg == i
                if np.any(sel):
                    a, b, _, _ = m.eval(thm[sel])
                    w[sel], w1[sel] = a, b
            return np.where(mirror, TWO_PI - w, w), w1
    else:
        def wtheta(th):
            th = np.asarray(th, dtype=float)
            return th, np.ones_like(th)

    def param_map(th):
        th = np.asarray(th, dtype=float) % TWO_PI
        wth, wth1 = wtheta(th)
        return -np.cos(wth), np.sin(wth) * wth1

    tau, dtau = param_map(t)
    pts = curve.position(tau)
    der = curve.derivative(tau)
    sp_chain = np.linalg.norm(der, axis=-1)
    tan = der / sp_chain[:, None]
    sgn = np.where(dtau >= 0, 1.0, -1.0)
    tan = tan * sgn[:, None]           # along increasing theta
    nor = np.stack([tan[:, 1], -tan[:, 0]], axis=-1)
    sp = sp_chain * np.abs(dtau)
    return BoundaryMesh("graded", curve, t, tau, pts, tan, nor, sp, h=h,
                        doubled=True, n_half=N // 2, sigma=sigma,
                        param_map=param_map)


def _chebyshev_angles(n: int) -> np.ndarray:
    return (2.0 * np.arange(1, n + 1) - 1.0) * math.pi / (2.0 * n)


def build_chebyshev_panels(curve: ParamCurve, n_per_panel,
                           breaks: Sequence | None = None,
                           dyadic: dict | None = None,
                           endpoint_panels: bool | None = None) -> BoundaryMesh:
    """Panel mesh with per-panel Chebyshev-zero nodes.

    ``breaks`` defaults to the corner parameters (plus the arc endpoints for
    open curves).  For open arcs with more than one panel, the two panels
    touching the arc ends become [0,1]-parametrized "end" panels with the
    endpoint at local v = 0 unless ``endpoint_panels`` is False; a
    single-panel arc keeps the [-1,1] form whose weights absorb both ends.
    ``dyadic`` maps a break/end parameter to a refinement depth d, replacing
    the adjacent panel with d+1 dyadic subpanels toward that point.
    """
    lo, hi = curve.domain
    if breaks is None:
        breaks = list(curve.corner_params)
    breaks = sorted(float(b) for b in breaks)
    if curve.closed:
        if not breaks:
            intervals = [(lo, hi)]
        else:
            intervals = [(breaks[i], breaks[i + 1]) for i in range(len(breaks) - 1)]
            intervals.append((breaks[-1], breaks[0] + TWO_PI))
    else:
        edges = [lo] + [b for b in breaks if lo < b < hi] + [hi]
        intervals = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    for a, b in intervals:
        if not b > a:
            raise ValueError("panel breakpoints must be strictly increasing")
    if dyadic:
        refined = []
        for a, b in intervals:
            da = dyadic.get(a) or dyadic.get(round(a, 12))
            db = dyadic.get(b) or dyadic.get(round(b, 12))
            if da and db:
                raise ValueError("dyadic refinement at both panel ends unsupported")
            if da:
                L = b - a
                pts = [a] + [a + L / 2**j for j in range(int(da), -1, -1)]
                refined += [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
            elif db:
                L = b - a
                pts = [b - L / 2**j for j in range(0, int(db) + 1)] + [b]
                refined += [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
            else:
                refined.append((a, b))
        intervals = refined
    M = len(intervals)
    if np.isscalar(n_per_panel):
        ns = [int(n_per_panel)] * M
    else:
        ns = [int(v) for v in n_per_panel]
        if len(ns) != M:
            raise ValueError(f"need {M} panel sizes, got {len(ns)}")
    if any(n < 1 for n in ns):
        raise ValueError("panel sizes must be >= 1")

    if endpoint_panels is None:
        endpoint_panels = (not curve.closed) and M > 1

    panels = []
    all_params = []
    all_theta = []
    all_local = []
    pos = 0
    for (a, b), n in zip(intervals, ns):
        th = _chebyshev_angles(n)
        is_end0 = (not curve.closed) and endpoint_panels and math.isclose(a, lo)
        is_end1 = (not curve.closed) and endpoint_panels and math.isclose(b, hi)
        if is_end0 or is_end1:
            v = (1.0 + np.cos(th)) / 2.0
            if is_end0:
                params = a + (b - a) * v
                order = np.argsort(params)
                rev = False
            else:
                params = b - (b - a) * v
                order = np.argsort(params)
                rev = True
            panels.append(Panel("end", (a, b), n, slice(pos, pos + n),
                                th[order], v[order], params[order], abs(b - a), rev))
        else:
            x = np.cos(th)
            mid, half = (a + b) / 2.0, (b - a) / 2.0
            params = mid + half * x
            order = np.argsort(params)
            both = (not curve.closed) and M == 1
            panels.append(Panel("interior", (a, b), n, slice(pos, pos + n),
                                th[order], x[order], params[order], half, False,
                                arc_both_ends=both))
        all_params.append(panels[-1].params)
        all_theta.append(panels[-1].theta)
        all_local.append(panels[-1].local)
        pos += n

    params = np.concatenate(all_params)
    if curve.closed:
        params = params % TWO_PI
    pts = curve.position(params)
    der = curve.derivative(params)
    sp_chain = np.linalg.norm(der, axis=-1)
    tan = der / sp_chain[:, None]
    nor = np.stack([tan[:, 1], -tan[:, 0]], axis=-1)
    speeds = np.empty(pos)
    panel_index = np.empty(pos, dtype=int)
    nodes = np.empty(pos)
    for i, p in enumerate(panels):
        speeds[p.sl] = sp_chain[p.sl] * p.jac
        panel_index[p.sl] = i
        nodes[p.sl] = p.local
    mesh = BoundaryMesh("panels", curve, nodes, params, pts, tan, nor, speeds,
                        panels=panels, panel_index=panel_index)
    return mesh


def curve_length(curve: ParamCurve, tol: float = 1e-12) -> float:
    """Arc length by adaptive quadrature of |gamma'|."""
    from scipy.integrate import quad

    lo, hi = curve.domain
    brk = sorted([lo] + [c for c in curve.corner_params if lo < c < hi] + [hi])
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        val, _ = quad(lambda s: float(np.linalg.norm(curve.derivative(np.array([s]))[0])),
                      a, b, epsabs=tol, epsrel=tol, limit=200)
        total += val
    return total


@dataclass
class Body:
    """One scatterer plus its boundary condition tag."""

    curve: ParamCurve
    bc: str                      # "dirichlet" | "neumann"
    name: str = ""

    def __post_init__(self):
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")


@dataclass
class Scene:
    bodies: list

    def __post_init__(self):
        if not self.bodies:
            raise ValueError("scene needs at least one body")
