"""Backward solve of the conjugate heat equation along a stored Ricci flow.

``v = u^2`` solves ``dv/dt = -Delta v + R v``.  Writing ``m = v * dvol`` (node
mass ``v_i * W_i``) and using ``d(dvol)/dt = -R dvol`` the equation becomes the
pure flux law ``dm/dt = -W Delta_g v``: the potential term is carried entirely
by the shrinking volume weights.  In the reversed time ``s = t2 - t`` this is a
forward heat equation

    dm_i/ds = sum_j c_ij (v_j - v_i),    v = m / W(t),

which is solved explicitly on the trajectory's own time grid.  The flux form
conserves ``sum m = int v dvol`` to rounding, and with the flow's step bound
every Euler update is a convex combination, so ``v`` stays positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalized, PositivityLost, StepTooLarge, ZeroField
from .flow import Trajectory
from .manifold import (
    MetricState,
    check_field,
    grad_norm_sq,
    laplace_beltrami,
    scalar_curvature,
    stable_dt,
    volume_weights,
)

MASS_TOL = 1e-8


@dataclass(eq=False)
class BackwardSolution:
    """Normalized positive ``u(t)`` at every trajectory time in ``[t1, t2]``.

    ``u_fields[k]`` belongs to ``trajectory[first_index + k]``; ``drift[k]`` is
    the pre-renormalization mass error ``sum(m) - 1`` produced by the step that
    reached time index ``k`` (zero at ``t2``).
    """

    trajectory: Trajectory
    first_index: int
    u_fields: list[np.ndarray] = field(default_factory=list)
    drift: list[float] = field(default_factory=list)

    @property
    def t1(self) -> float:
        return float(self.times[0])

    @property
    def t2(self) -> float:
        return float(self.times[-1])

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times[self.first_index:self.first_index + len(self.u_fields)]

    @property
    def metrics(self) -> list[MetricState]:
        return self.trajectory.states[self.first_index:self.first_index + len(self.u_fields)]

    def __len__(self):
        return len(self.u_fields)

    def __iter__(self):
        return iter(zip(self.metrics, self.u_fields))

    def max_drift_rate(self) -> float:
        """Largest ``|drift|`` per unit time over the solve."""
        dt = self.trajectory.dt
        if len(self.drift) < 2 or dt == 0:
            return 0.0
        return float(np.max(np.abs(self.drift)) / dt)


def normalize(metric: MetricState, u) -> np.ndarray:
    """``u / sqrt(int u^2 dvol)``.

    Raises:
        ZeroField: if ``u`` vanishes identically.
    """
    u = check_field(metric, u)
    mass = float(np.dot(volume_weights(metric), u * u))
    if mass <= 0:
        raise ZeroField("cannot normalize an identically zero field")
    if mass == 1.0:
        return u.copy()
    return u / np.sqrt(mass)


def _flux(spec, v):
    return -(spec.geometry.stiffness @ v)


def backward_solve(traj: Trajectory, u_final, t1: float, scheme: str | None = None,
                   renormalize: bool = True) -> BackwardSolution:
    """Solve backward from ``u_final`` at ``traj.t_end`` down to ``t1``.

    ``scheme`` defaults to the trajectory's scheme ("euler" or "heun").

    Raises:
        TimeMisaligned: ``t1`` is not a node of the trajectory grid.
        NotNormalized: ``int u_final^2 dvol`` differs from 1 by more than 1e-8.
        StepTooLarge / PositivityLost: the step breaks the maximum principle.
    """
    scheme = scheme or traj.scheme
    k1 = traj.index_of(t1)
    k2 = len(traj) - 1
    spec = traj.spec
    g2 = traj[k2]
    u2 = check_field(g2, u_final)
    if np.any(u2 <= 0):
        raise PositivityLost("u_final must be strictly positive")
    w = volume_weights(g2)
    m = w * u2 * u2
    if abs(m.sum() - 1.0) > MASS_TOL:
        raise NotNormalized(f"int u_final^2 dvol = {m.sum()!r}")

    dt = traj.dt
    fields = [u2.copy()]
    drift = [0.0]
    for k in range(k2, k1, -1):
        g_hi, g_lo = traj[k], traj[k - 1]
        w_hi, w_lo = volume_weights(g_hi), volume_weights(g_lo)
        if spec.is_conformal and dt > min(stable_dt(g_hi), stable_dt(g_lo)):
            raise StepTooLarge(f"dt={dt:.3e} breaks the maximum principle near t={g_hi.t!r}")
        f1 = _flux(spec, m / w_hi)
        if scheme == "euler":
            m_new = m + dt * f1
        elif scheme == "heun":
            m_star = m + dt * f1
            m_new = m + 0.5 * dt * (f1 + _flux(spec, m_star / w_lo))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if np.any(m_new <= 0):
            raise PositivityLost(f"v lost positivity at t={g_lo.t!r}")
        total = m_new.sum()
        drift.append(float(total - 1.0))
        if renormalize:
            m_new = m_new / total
        m = m_new
        fields.append(np.sqrt(m / w_lo))
    fields.reverse()
    drift.reverse()
    return BackwardSolution(traj, k1, fields, drift)


def u_form_solve(traj: Trajectory, u_final, t1: float) -> list[np.ndarray]:
    """Explicit Euler on the quasilinear ``u`` equation (test oracle).

    ``du/dt = -Delta u - |grad u|^2/u + (R/2) u`` integrated backward on the
    trajectory grid; returns ``u`` at every time from ``t1`` to ``t2``.  No
    renormalization, so its mass drift exposes the discretization error.
    """
    k1 = traj.index_of(t1)
    u = check_field(traj[-1], u_final).copy()
    out = [u.copy()]
    for k in range(len(traj) - 1, k1, -1):
        g = traj[k]
        rate = laplace_beltrami(g, u) + grad_norm_sq(g, u) / u - 0.5 * scalar_curvature(g) * u
        u = u + traj.dt * rate
        out.append(u.copy())
    out.reverse()
    return out
