"""Forward Ricci flow ``dg/dt = -2 Ric`` with a store-every-step trajectory.

In two dimensions ``Ric = (R/2) g``, so the flow stays in the conformal class and
reduces to ``d phi/dt = -R/2``.  On the round ``S^n``, ``d(r^2)/dt = -2(n-1)`` and
the update is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularTime, StepTooLarge, TimeMisaligned
from .manifold import ManifoldSpec, MetricState, scalar_curvature, stable_dt

SCHEME_ORDER = {"euler": 1, "heun": 2}


@dataclass(frozen=True)
class FlowConfig:
    """Time window and step control.

    ``dt=None`` picks ``cfl_safety * stable_dt(metric0)``, shrunk so that the
    window is an integer number of steps.
    """

    t_start: float = 0.0
    t_end: float = 0.1
    dt: float | None = None
    cfl_safety: float = 0.5
    max_steps: int = 200_000
    scheme: str = "euler"

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.scheme not in SCHEME_ORDER:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def order(self) -> int:
        return SCHEME_ORDER[self.scheme]

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start, "t_end": self.t_end, "dt": self.dt,
            "cfl_safety": self.cfl_safety, "max_steps": self.max_steps, "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, d: dict) -> FlowConfig:
        return cls(**{k: d[k] for k in ("t_start", "t_end", "dt", "cfl_safety", "max_steps", "scheme") if k in d})


@dataclass(eq=False)
class Trajectory:
    """Metrics at the uniform times ``t_start + k * dt``, ``k = 0..K``."""

    spec: ManifoldSpec
    t_start: float
    dt: float
    states: list[MetricState] = field(default_factory=list)
    scheme: str = "euler"

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(len(self.states))

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (len(self.states) - 1)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k) -> MetricState:
        return self.states[k]

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time ``t``; raises ``TimeMisaligned`` when off-grid."""
        if self.dt == 0 or len(self.states) == 1:
            k = 0
        else:
            k = int(round((t - self.t_start) / self.dt))
        if not 0 <= k < len(self.states) or abs(self.t_start + k * self.dt - t) > tol * max(1.0, abs(t)):
            raise TimeMisaligned(f"t={t!r} is not on the trajectory grid")
        return k


def _phi_rate(metric: MetricState, phi=None) -> np.ndarray:
    if phi is not None:
        metric = MetricState(metric.spec, phi, metric.t)
    return -0.5 * scalar_curvature(metric)


def ricci_step(metric: MetricState, dt: float, scheme: str = "euler", cfl_safety: float = 1.0) -> MetricState:
    """Advance the metric by ``dt``.

    Raises:
        SingularTime: round sphere whose ``r^2`` would become non-positive.
        StepTooLarge: ``dt > cfl_safety * stable_dt(metric)`` on a grid backend.
    """
    spec = metric.spec
    if not spec.is_conformal:
        r2 = metric.r2 - 2.0 * (spec.n - 1) * dt
        if r2 <= 0:
            raise SingularTime(f"r^2 reaches zero before t={metric.t + dt!r}")
        return metric.with_dof([r2], metric.t + dt)
    limit = cfl_safety * stable_dt(metric)
    if dt > limit:
        raise StepTooLarge(f"dt={dt:.3e} exceeds the stable step {limit:.3e} at t={metric.t!r}")
    phi = metric.phi
    k1 = _phi_rate(metric)
    if scheme == "euler":
        new = phi + dt * k1
    elif scheme == "heun":
        k2 = _phi_rate(metric, phi + dt * k1)
        new = phi + 0.5 * dt * (k1 + k2)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return metric.with_dof(new, metric.t + dt)


def choose_dt(metric0: MetricState, cfg: FlowConfig) -> tuple[float, int]:
    """Step size and step count tiling ``[t_start, t_end]`` uniformly."""
    span = cfg.t_end - cfg.t_start
    if span == 0:
        return (cfg.dt or 0.0), 0
    target = cfg.dt
    if target is None:
        target = cfg.cfl_safety * stable_dt(metric0)
        if math.isinf(target):
            target = 1e-3
    steps = max(1, math.ceil(span / target - 1e-9))
    if steps > cfg.max_steps:
        raise StepTooLarge(f"{steps} steps needed, max_steps={cfg.max_steps}")
    return span / steps, steps


def evolve(metric0: MetricState, cfg: FlowConfig) -> Trajectory:
    """Run the flow over ``[cfg.t_start, cfg.t_end]`` storing every step.

    The stored times are exactly ``t_start + k * dt``.  Errors from
    :func:`ricci_step` propagate with the failing time in the message.
    """
    spec = metric0.spec
    if not spec.is_conformal:
        t_sing = cfg.t_start + metric0.r2 / (2.0 * (spec.n - 1))
        if cfg.t_end >= t_sing:
            raise SingularTime(f"t_end={cfg.t_end!r} is past the singular time {t_sing!r}")
    dt, steps = choose_dt(metric0, cfg)
    m = metric0.with_dof(metric0.dof, cfg.t_start)
    traj = Trajectory(spec, cfg.t_start, dt, [m], cfg.scheme)
    if not spec.is_conformal:
        # closed form, exact at every node of the time grid
        r0 = metric0.r2
        for k in range(1, steps + 1):
            traj.states.append(m.with_dof([r0 - 2.0 * (spec.n - 1) * k * dt], cfg.t_start + k * dt))
        return traj
    for k in range(1, steps + 1):
        m = ricci_step(m, dt, cfg.scheme)
        # pin the clock to the grid instead of accumulating rounding
        m = m.with_dof(m.dof, cfg.t_start + k * dt)
        traj.states.append(m)
    return traj
