"""Discretized closed surfaces (and round n-spheres) with curvature and quadrature.

Three backends share one interface:

``ConformalTorus``
    Metrics ``g = exp(2 phi) * (dx^2 + dy^2)`` on the flat square torus of side
    ``2 pi``, sampled on an ``Nx x Ny`` periodic node grid (row-major, ``x`` index
    first).
``AxisymSphere2``
    Rotationally symmetric metrics ``g = exp(2 phi(theta)) * g_round`` on the
    2-sphere.  ``phi`` lives on ``N`` cell-centred latitudes
    ``theta_j = (j + 1/2) * pi / N``; the cells adjacent to the poles have a
    zero-area outer face, which is what enforces ``d/dtheta = 0`` there.
``RoundSphere``
    Round metrics ``g = r^2 * g_unit`` on ``S^n``; a single degree of freedom
    ``r^2`` and a single node (fields are constants).

Both grid backends are written as a weighted graph: node areas ``A_i`` of the
background metric and edge conductances ``c_ij`` such that the background
Dirichlet form is ``sum_edges c_ij (u_i - u_j)^2``.  In two dimensions the
Dirichlet energy is conformally invariant, so the same graph serves every
metric in the conformal class; only the node weights ``A_i exp(2 phi_i)``
change.  This keeps ``integrate``, ``laplace_beltrami`` and ``grad_norm_sq``
exactly compatible (summation by parts holds to rounding).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .errors import NonPositiveField


class Kind(str, enum.Enum):
    CONFORMAL_TORUS = "ConformalTorus"
    AXISYM_SPHERE2 = "AxisymSphere2"
    ROUND_SPHERE = "RoundSphere"


def unit_sphere_volume(n: int) -> float:
    """Volume of the unit round ``S^n``, ``2 pi^((n+1)/2) / Gamma((n+1)/2)``."""
    return math.exp(math.log(2.0) + 0.5 * (n + 1) * math.log(math.pi) - gammaln(0.5 * (n + 1)))


@dataclass(frozen=True)
class _Geometry:
    areas: np.ndarray          # background node areas
    stiffness: sp.csr_matrix   # background graph Laplacian, u.S.u = Dirichlet form
    edges: tuple[np.ndarray, np.ndarray, np.ndarray]  # (i, j, c_ij)
    background_curvature: float
    spacing: tuple[float, ...]


@dataclass(frozen=True)
class ManifoldSpec:
    """Backend identity, dimension and grid resolution.

    Use the ``torus``, ``axisym_sphere`` and ``round_sphere`` constructors rather
    than filling the fields by hand.
    """

    kind: Kind
    n: int = 2
    resolution: tuple[int, ...] = ()

    def __post_init__(self):
        kind = Kind(self.kind)
        res = tuple(int(r) for r in self.resolution)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "resolution", res)
        if kind is Kind.ROUND_SPHERE:
            if self.n < 2:
                raise ValueError("RoundSphere needs n >= 2")
            if res:
                raise ValueError("RoundSphere has no grid resolution")
            return
        if self.n != 2:
            raise ValueError(f"{kind.value} is two-dimensional (got n={self.n})")
        if kind is Kind.CONFORMAL_TORUS:
            if len(res) != 2 or min(res) < 8:
                raise ValueError("ConformalTorus needs resolution (Nx, Ny) with Nx, Ny >= 8")
        elif len(res) != 1 or res[0] < 16:
            raise ValueError("AxisymSphere2 needs resolution (Ntheta,) with Ntheta >= 16")

    @classmethod
    def torus(cls, nx: int = 32, ny: int | None = None) -> ManifoldSpec:
        return cls(Kind.CONFORMAL_TORUS, 2, (nx, nx if ny is None else ny))

    @classmethod
    def axisym_sphere(cls, n_theta: int = 64) -> ManifoldSpec:
        return cls(Kind.AXISYM_SPHERE2, 2, (n_theta,))

    @classmethod
    def round_sphere(cls, n: int = 2) -> ManifoldSpec:
        return cls(Kind.ROUND_SPHERE, n, ())

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.resolution)) if self.resolution else 1

    @property
    def is_conformal(self) -> bool:
        return self.kind is not Kind.ROUND_SPHERE

    @property
    def euler_characteristic(self) -> int:
        return 0 if self.kind is Kind.CONFORMAL_TORUS else 2

    def refined(self, levels: int = 1) -> ManifoldSpec:
        """Same backend with the mesh size halved ``levels`` times."""
        f = 2**levels
        return ManifoldSpec(self.kind, self.n, tuple(r * f for r in self.resolution))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "resolution": list(self.resolution)}

    @classmethod
    def from_dict(cls, d: dict) -> ManifoldSpec:
        return cls(Kind(d["kind"]), int(d.get("n", 2)), tuple(d.get("resolution", ())))

    @cached_property
    def geometry(self) -> _Geometry:
        if self.kind is Kind.CONFORMAL_TORUS:
            return _torus_geometry(*self.resolution)
        if self.kind is Kind.AXISYM_SPHERE2:
            return _axisym_geometry(self.resolution[0])
        return _Geometry(
            areas=np.array([unit_sphere_volume(self.n)]),
            stiffness=sp.csr_matrix((1, 1)),
            edges=(np.zeros(0, int), np.zeros(0, int), np.zeros(0)),
            background_curvature=float(self.n * (self.n - 1)),
            spacing=(),
        )


def _graph_laplacian(n_nodes, i, j, c):
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([c, c, -c, -c])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))


def _torus_geometry(nx, ny):
    hx, hy = 2 * np.pi / nx, 2 * np.pi / ny
    idx = np.arange(nx * ny).reshape(nx, ny)
    ix = np.concatenate([idx.ravel(), idx.ravel()])
    jx = np.concatenate([np.roll(idx, -1, axis=0).ravel(), np.roll(idx, -1, axis=1).ravel()])
    cx = np.concatenate([np.full(nx * ny, hy / hx), np.full(nx * ny, hx / hy)])
    return _Geometry(
        areas=np.full(nx * ny, hx * hy),
        stiffness=_graph_laplacian(nx * ny, ix, jx, cx),
        edges=(ix, jx, cx),
        background_curvature=0.0,
        spacing=(hx, hy),
    )


def _axisym_geometry(nt):
    h = np.pi / nt
    k = np.arange(nt + 1)
    faces = k * h
    # exact band areas: sum is 4 pi to rounding
    areas = 2 * np.pi * (np.cos(faces[:-1]) - np.cos(faces[1:]))
    i = np.arange(nt - 1)
    c = 2 * np.pi * np.sin(faces[1:-1]) / h
    return _Geometry(
        areas=areas,
        stiffness=_graph_laplacian(nt, i, i + 1, c),
        edges=(i, i + 1, c),
        background_curvature=2.0,
        spacing=(h,),
    )


def node_coordinates(spec: ManifoldSpec):
    """Background coordinates of the nodes.

    Returns ``(x, y)`` flat arrays for the torus, ``theta`` for the axisymmetric
    sphere and an empty array for the round sphere.
    """
    if spec.kind is Kind.CONFORMAL_TORUS:
        nx, ny = spec.resolution
        x, y = np.meshgrid(2 * np.pi * np.arange(nx) / nx, 2 * np.pi * np.arange(ny) / ny, indexing="ij")
        return x.ravel(), y.ravel()
    if spec.kind is Kind.AXISYM_SPHERE2:
        nt = spec.resolution[0]
        return (np.arange(nt) + 0.5) * np.pi / nt
    return np.zeros(0)


@dataclass(frozen=True, eq=False)
class MetricState:
    """Metric degrees of freedom at time ``t``.

    ``dof`` is the conformal factor ``phi`` (one value per node) on conformal
    backends, and the one-element array ``[r^2]`` on the round sphere.
    """

    spec: ManifoldSpec
    dof: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        dof = np.array(self.dof, dtype=float).ravel()
        if dof.size != self.spec.num_nodes:
            raise ValueError(f"dof has {dof.size} entries, spec has {self.spec.num_nodes} nodes")
        if not np.all(np.isfinite(dof)):
            raise ValueError("metric dof must be finite")
        if not self.spec.is_conformal and dof[0] <= 0:
            raise ValueError("RoundSphere needs r^2 > 0")
        dof.flags.writeable = False
        object.__setattr__(self, "dof", dof)
        object.__setattr__(self, "t", float(self.t))

    @property
    def phi(self) -> np.ndarray:
        if not self.spec.is_conformal:
            raise AttributeError("RoundSphere metrics have no conformal factor")
        return self.dof

    @property
    def r2(self) -> float:
        if self.spec.is_conformal:
            raise AttributeError("only RoundSphere metrics carry r^2")
        return float(self.dof[0])

    def with_dof(self, dof, t: float) -> MetricState:
        return MetricState(self.spec, dof, t)


def conformal_metric(spec: ManifoldSpec, phi=0.0, t: float = 0.0) -> MetricState:
    """``exp(2 phi) * background``; ``phi`` may be a scalar or a node array."""
    return MetricState(spec, np.broadcast_to(np.asarray(phi, float), (spec.num_nodes,)), t)


def round_metric(spec: ManifoldSpec, r2: float = 1.0, t: float = 0.0) -> MetricState:
    return MetricState(spec, [r2], t)


def check_field(metric: MetricState, u) -> np.ndarray:
    """Return ``u`` as a float node array bound to ``metric.spec`` (validated)."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = np.full(metric.spec.num_nodes, float(u))
    if u.shape != (metric.spec.num_nodes,):
        raise ValueError(f"field has shape {u.shape}, expected ({metric.spec.num_nodes},)")
    if not np.all(np.isfinite(u)):
        raise ValueError("field values must be finite")
    return u


def volume_weights(metric: MetricState) -> np.ndarray:
    """Quadrature weights of ``dvol``: ``A_i exp(2 phi_i)`` or ``|S^n| r^n``."""
    geo = metric.spec.geometry
    if metric.spec.is_conformal:
        return geo.areas * np.exp(2 * metric.phi)
    return geo.areas * metric.r2 ** (0.5 * metric.spec.n)


def integrate(metric: MetricState, values) -> float:
    """Quadrature of a node field over M with the metric volume element."""
    return float(np.dot(volume_weights(metric), check_field(metric, values)))


def volume(metric: MetricState) -> float:
    return float(np.sum(volume_weights(metric)))


def _background_laplacian(spec, u):
    geo = spec.geometry
    return -(geo.stiffness @ u) / geo.areas


def laplace_beltrami(metric: MetricState, u) -> np.ndarray:
    """``Delta_g u``; in two dimensions ``exp(-2 phi) * background Laplacian``."""
    u = check_field(metric, u)
    if not metric.spec.is_conformal:
        return np.zeros_like(u)
    return np.exp(-2 * metric.phi) * _background_laplacian(metric.spec, u)


def scalar_curvature(metric: MetricState) -> np.ndarray:
    """Scalar curvature at the nodes, ``exp(-2 phi)(R_bg - 2 Lap_bg phi)`` in 2-D."""
    spec = metric.spec
    rb = spec.geometry.background_curvature
    if not spec.is_conformal:
        return np.full(1, rb / metric.r2)
    return np.exp(-2 * metric.phi) * (rb - 2 * _background_laplacian(spec, metric.phi))


def dirichlet_form(metric: MetricState, u) -> float:
    """``int |grad u|^2 dvol`` as the graph quadratic form (metric-independent in 2-D)."""
    u = check_field(metric, u)
    return float(u @ (metric.spec.geometry.stiffness @ u))


def grad_norm_sq(metric: MetricState, u) -> np.ndarray:
    """Node values of ``|grad u|^2_g``.

    Each node averages the squared differences across its incident edges, so
    that ``integrate(metric, grad_norm_sq(metric, u)) == dirichlet_form(metric, u)``.
    """
    u = check_field(metric, u)
    spec = metric.spec
    if not spec.is_conformal:
        return np.zeros_like(u)
    i, j, c = spec.geometry.edges
    e = c * (u[i] - u[j]) ** 2
    acc = np.bincount(i, e, minlength=u.size) + np.bincount(j, e, minlength=u.size)
    return np.exp(-2 * metric.phi) * acc / (2 * spec.geometry.areas)


def stable_dt(metric: MetricState) -> float:
    """Largest explicit step keeping the discrete maximum principle.

    ``1 / max_i(exp(-2 phi_i) * S_ii / A_i)``; on the square torus this is
    ``h^2 exp(2 phi_min) / 4``.  Infinite on the round sphere (exact ODE).
    """
    if not metric.spec.is_conformal:
        return math.inf
    geo = metric.spec.geometry
    rate = np.exp(-2 * metric.phi) * geo.stiffness.diagonal() / geo.areas
    return float(1.0 / rate.max())


def min_negative_curvature(metric: MetricState) -> float:
    """``min over M of min(R, 0)``."""
    return float(min(scalar_curvature(metric).min(), 0.0))


# -- derivatives for tensor quantities ---------------------------------------


def _torus_derivs(spec, f):
    nx, ny = spec.resolution
    hx, hy = spec.geometry.spacing
    F = f.reshape(nx, ny)
    xp, xm = np.roll(F, -1, 0), np.roll(F, 1, 0)
    yp, ym = np.roll(F, -1, 1), np.roll(F, 1, 1)
    fx = (xp - xm) / (2 * hx)
    fy = (yp - ym) / (2 * hy)
    fxx = (xp - 2 * F + xm) / hx**2
    fyy = (yp - 2 * F + ym) / hy**2
    fxy = (np.roll(xp, -1, 1) - np.roll(xp, 1, 1) - np.roll(xm, -1, 1) + np.roll(xm, 1, 1)) / (4 * hx * hy)
    return [a.ravel() for a in (fx, fy, fxx, fxy, fyy)]


def _axisym_derivs(spec, f):
    (h,) = spec.geometry.spacing
    # mirror ghosts across the poles: even extension of a smooth axisymmetric function
    g = np.concatenate([f[:1], f, f[-1:]])
    ft = (g[2:] - g[:-2]) / (2 * h)
    ftt = (g[2:] - 2 * f + g[:-2]) / h**2
    return ft, ftt


def _defect_density(metric, u, c, form):
    """Pointwise ``|Ric + Hess f - c g|_g^2`` with ``f = -ln u^2``."""
    spec = metric.spec
    R = scalar_curvature(metric)
    if not spec.is_conformal:
        n = spec.n
        return np.full(1, n * ((n - 1) / metric.r2 - c) ** 2)
    phi = metric.phi
    shift = 0.5 * R - c  # orthonormal-frame diagonal of Ric - c g
    e2 = np.exp(-2 * phi)
    if spec.kind is Kind.CONFORMAL_TORUS:
        ux, uy, uxx, uxy, uyy = _torus_derivs(spec, u)
        px, py = _torus_derivs(spec, phi)[:2]
        if form == "u":
            # covariant Hessian of u, then -2 Hess u / u + 2 du du / u^2
            dphi_du = px * ux + py * uy
            hxx = uxx - (2 * px * ux - dphi_du)
            hyy = uyy - (2 * py * uy - dphi_du)
            hxy = uxy - (px * uy + py * ux)
            txx = -2 * hxx / u + 2 * ux * ux / u**2
            tyy = -2 * hyy / u + 2 * uy * uy / u**2
            txy = -2 * hxy / u + 2 * ux * uy / u**2
        else:
            fx, fy = -2 * ux / u, -2 * uy / u
            fxx = -2 * uxx / u + 2 * ux * ux / u**2
            fyy = -2 * uyy / u + 2 * uy * uy / u**2
            fxy = -2 * uxy / u + 2 * ux * uy / u**2
            dphi_df = px * fx + py * fy
            txx = fxx - (2 * px * fx - dphi_df)
            tyy = fyy - (2 * py * fy - dphi_df)
            txy = fxy - (px * fy + py * fx)
        a, b, d = e2 * txx + shift, e2 * txy, e2 * tyy + shift
        return a**2 + 2 * b**2 + d**2
    theta = node_coordinates(spec)
    cot = np.cos(theta) / np.sin(theta)
    ut, utt = _axisym_derivs(spec, u)
    pt = _axisym_derivs(spec, phi)[0]
    if form == "u":
        h_tt = utt - pt * ut
        h_pp = cot * ut + pt * ut  # (phi-phi component) / sin^2
        t1 = -2 * h_tt / u + 2 * ut**2 / u**2
        t2 = -2 * h_pp / u
    else:
        ft = -2 * ut / u
        ftt = -2 * utt / u + 2 * ut**2 / u**2
        t1 = ftt - pt * ft
        t2 = cot * ft + pt * ft
    return (e2 * t1 + shift) ** 2 + (e2 * t2 + shift) ** 2


def soliton_defect(metric: MetricState, u, c: float, form: str = "u") -> float:
    """``int |Ric - 2 Hess u / u + 2 du (x) du / u^2 - c g|^2 u^2 dvol``.

    With ``f = -ln u^2`` the tensor is ``Ric + Hess f - c g`` and the weight is
    ``exp(-f)``; ``form="f"`` evaluates it that way (derivatives of ``f`` taken
    through the chain rule from the node derivatives of ``u``), ``form="u"``
    uses the covariant Hessian of ``u`` directly.

    Raises:
        NonPositiveField: if any node of ``u`` is <= 0.
    """
    if form not in ("u", "f"):
        raise ValueError("form must be 'u' or 'f'")
    u = check_field(metric, u)
    if np.any(u <= 0):
        raise NonPositiveField("soliton_defect needs u > 0 at every node")
    dens = _defect_density(metric, u, float(c), form)
    weight = u**2 if form == "u" else np.exp(2 * np.log(u))  # exp(-f)
    return integrate(metric, dens * weight)
