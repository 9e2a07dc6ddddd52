"""Scalar functionals: energy, log entropy, Perelman's W, and the first eigenvalue.

All integrals use :func:`logentropy.manifold.integrate` weights so that the
algebraic identities between the functionals hold to rounding.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import xlogy

from .errors import DomainError, NoConvergence, NonPositiveField, NonPositiveTau, NotNormalized
from .manifold import (
    MetricState,
    check_field,
    dirichlet_form,
    grad_norm_sq,
    scalar_curvature,
    soliton_defect,
    volume_weights,
)

NORM_TOL = 1e-8
DENSE_LIMIT = 2000


def energy(metric: MetricState, u) -> float:
    """``int (|grad u|^2 + (R/4) u^2) dvol``."""
    u = check_field(metric, u)
    R = scalar_curvature(metric)
    return dirichlet_form(metric, u) + 0.25 * float(np.dot(volume_weights(metric), R * u * u))


def entropy(metric: MetricState, u) -> float:
    """``-int u^2 ln u^2 dvol`` with ``0 ln 0 = 0``."""
    u = check_field(metric, u)
    v = u * u
    return -float(np.dot(volume_weights(metric), xlogy(v, v)))


def operator_matrices(metric: MetricState):
    """Stiffness ``K`` and mass ``M`` of ``-Delta + R/4``: ``u.K.u = energy(u)``, ``M = diag(dvol)``."""
    spec = metric.spec
    w = volume_weights(metric)
    K = spec.geometry.stiffness + sp.diags(0.25 * w * scalar_curvature(metric))
    return sp.csr_matrix(K), w


def _check_normalized(metric, u):
    mass = float(np.dot(volume_weights(metric), u * u))
    if abs(mass - 1.0) > NORM_TOL:
        raise NotNormalized(f"int u^2 dvol = {mass!r}, expected 1")


def lambda0(metric: MetricState, method: str = "auto", rtol: float = 1e-10, max_iter: int = 2000) -> float:
    """Smallest eigenvalue of ``-Delta + R/4`` in the ``L^2(dvol)`` inner product.

    ``method="inverse"`` runs shifted inverse power iteration on the generalized
    problem ``K x = lambda M x`` with the Gershgorin shift ``min(R)/4 - delta``
    (strictly below the spectrum, so ``K - shift M`` is positive definite).
    ``method="dense"`` solves the symmetric problem directly; ``"auto"`` uses it
    below ``DENSE_LIMIT`` nodes.

    Raises:
        NoConvergence: inverse iteration did not settle within ``max_iter``.
    """
    spec = metric.spec
    if not spec.is_conformal:
        return float(0.25 * scalar_curvature(metric)[0])
    K, w = operator_matrices(metric)
    if method == "auto":
        method = "dense" if spec.num_nodes < DENSE_LIMIT else "inverse"
    if method == "dense":
        s = 1.0 / np.sqrt(w)
        A = (K.multiply(s[:, None]).multiply(s[None, :])).toarray()
        return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[0, 0])[0])
    if method != "inverse":
        raise ValueError(f"unknown method {method!r}")
    return _inverse_iteration(K, w, rtol, max_iter)


def _inverse_iteration(K, w, rtol, max_iter):
    diag_pot = K.diagonal() - np.asarray(abs(K - sp.diags(K.diagonal())).sum(axis=1)).ravel()
    lower = float(np.min(diag_pot / w))  # Gershgorin lower bound of M^-1/2 K M^-1/2
    scale = max(1.0, abs(lower))
    shift = lower - 1e-2 * scale
    lu = spla.splu(sp.csc_matrix(K - shift * sp.diags(w)))
    x = np.ones(K.shape[0])
    x /= math.sqrt(np.dot(w, x * x))
    rho = float(x @ (K @ x))
    for _ in range(max_iter):
        y = lu.solve(w * x)
        x = y / math.sqrt(np.dot(w, y * y))
        rho_new = float(x @ (K @ x))
        resid = K @ x - rho_new * w * x
        res_norm = math.sqrt(float(np.dot(resid / w, resid)))
        if abs(rho_new - rho) <= rtol * 1e-3 * max(1.0, abs(rho_new)) and res_norm <= math.sqrt(rtol) * max(1.0, abs(rho_new)):
            return rho_new
        rho = rho_new
    raise NoConvergence(f"inverse iteration stalled at rho={rho!r}")


def admissible(a: float, lam: float) -> bool:
    """``a > -lambda0`` with a rounding margin, so ``lambda0 = 0`` (computed as +-1e-15) rejects ``a = 0``."""
    return a + lam > 1e-12 * max(1.0, abs(a), abs(lam))


def log_entropy(metric: MetricState, u, a: float = 0.0) -> float:
    """``-int u^2 ln u^2 dvol + (n/2) ln(energy + a)`` for normalized ``u``.

    Raises:
        NotNormalized: ``|int u^2 dvol - 1| > 1e-8``.
        DomainError: ``energy + a <= 0``.
    """
    u = check_field(metric, u)
    _check_normalized(metric, u)
    omega = energy(metric, u) + a
    if omega <= 0:
        raise DomainError(f"energy + a = {omega!r} must be positive (needs a > -lambda0)")
    return entropy(metric, u) + 0.5 * metric.spec.n * math.log(omega)


def adjusted_log_entropy(metric: MetricState, u, a: float, t: float) -> float:
    return log_entropy(metric, u, a) + 4.0 * a * t


def perelman_W(metric: MetricState, u, tau: float, a: float = 0.0) -> tuple[float, float]:
    """Perelman's ``W(g, f, tau)`` with ``u = exp(-f/2) / (4 pi tau)^(n/4)``.

    Returns ``(W_f, W_u)``: the defining integral in terms of ``f``, and the
    rearranged expression

        -int u^2 ln u^2 + 4 tau (E + a) - (n/2) ln(4 tau) - (n/2) ln pi - n - 4 a tau

    in which ``a`` cancels.  Gradients of ``f`` are taken through ``u``
    (``|grad f|^2 = 4 |grad u|^2 / u^2``) so the discrete chain rule is exact.
    """
    if tau <= 0:
        raise NonPositiveTau(f"tau must be positive, got {tau!r}")
    u = check_field(metric, u)
    if np.any(u <= 0):
        raise NonPositiveField("W needs u > 0")
    _check_normalized(metric, u)
    n = metric.spec.n
    R = scalar_curvature(metric)
    f = -np.log(u * u) - 0.5 * n * math.log(tau) - 0.5 * n * math.log(4 * math.pi)
    grad_f_sq = 4.0 * grad_norm_sq(metric, u) / (u * u)
    weight = np.exp(-f) / (4 * math.pi * tau) ** (0.5 * n)
    w_f = float(np.dot(volume_weights(metric), (tau * (R + grad_f_sq) + f - n) * weight))
    omega = energy(metric, u) + a
    w_u = (entropy(metric, u) + 4 * tau * omega - 0.5 * n * math.log(4 * tau)
           - 0.5 * n * math.log(math.pi) - n - 4 * a * tau)
    return w_f, w_u


def h_minimize(A: float, n: int) -> tuple[float, float]:
    """Minimizer and minimum of ``h(s) = s A - (n/2) ln s`` over ``s > 0``."""
    if A <= 0:
        raise DomainError(f"h(s) is unbounded below for A={A!r} <= 0")
    return 0.5 * n / A, 0.5 * n * math.log(A) + 0.5 * n * (1 - math.log(0.5 * n))


def b_const(n: int) -> float:
    return -0.5 * n * math.log(math.pi) - 0.5 * n * (1 + math.log(0.5 * n))


def omega(metric: MetricState, u, a: float) -> float:
    return energy(metric, u) + a


def optimal_sigma(metric: MetricState, u, a: float) -> float:
    """``n / (8 omega)``, the scale at which the W lower bound is attained."""
    w = omega(metric, u, a)
    if w <= 0:
        raise DomainError(f"omega = {w!r} must be positive")
    return metric.spec.n / (8.0 * w)


def w_lower_bound(metric: MetricState, u, tau: float, a: float) -> float:
    """``-int u^2 ln u^2 + (n/2) ln omega - 4 a tau + b(n)``, a lower bound for W at any tau."""
    n = metric.spec.n
    return log_entropy(metric, u, a) - 4 * a * tau + b_const(n)


CSV_COLUMNS = ("t", "a", "E", "omega", "lambda0", "Y0", "Ya", "Ya_adj", "W_opt", "sigma",
               "defect", "dY_fd", "rhs_bound")


@dataclass
class EntropyReport:
    """Everything measured at one time of a coupled (g(t), u(t)) run."""

    t: float
    a: float
    E: float
    omega: float
    lambda0: float
    Y0: float
    Ya: float
    Ya_adj: float
    W_opt: float
    sigma: float
    defect: float
    dY_fd: float = math.nan
    rhs_bound: float = math.nan
    b_n: float = math.nan

    def as_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}


def entropy_report(metric: MetricState, u, a: float, with_lambda0: bool = True) -> EntropyReport:
    """Evaluate every functional at ``(metric, u)``.

    ``defect`` is the soliton defect at ``c = 4 omega / n`` and ``rhs_bound`` the
    corresponding lower bound ``(n / 4 omega) * defect`` for ``dY_a/dt``;
    ``dY_fd`` is left for the caller, which knows the neighbouring times.
    """
    n = metric.spec.n
    u = check_field(metric, u)
    E = energy(metric, u)
    om = E + a
    ent = entropy(metric, u)
    Y0 = ent + 0.5 * n * math.log(E) if E > 0 else math.nan
    Ya = log_entropy(metric, u, a)
    sigma = optimal_sigma(metric, u, a)
    W_opt = perelman_W(metric, u, sigma, a)[1] if np.all(u > 0) else math.nan
    defect = soliton_defect(metric, u, 4 * om / n) if np.all(u > 0) else math.nan
    return EntropyReport(
        t=metric.t, a=a, E=E, omega=om,
        lambda0=lambda0(metric) if with_lambda0 else math.nan,
        Y0=Y0, Ya=Ya, Ya_adj=Ya + 4.0 * a * metric.t, W_opt=W_opt, sigma=sigma,
        defect=defect, rhs_bound=n / (4 * om) * defect, b_n=b_const(n),
    )


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: repr(float(v)) for k, v in r.as_row().items()})
    return buf.getvalue()


def reports_from_csv(text: str) -> list[EntropyReport]:
    rows = csv.DictReader(io.StringIO(text))
    return [EntropyReport(**{k: float(v) for k, v in row.items()}) for row in rows]
