"""End-to-end verification suites for the coupled (Ricci flow, conjugate heat) system.

A run evolves ``g`` forward over ``[t_start, t2]``, solves for ``u`` backward from
``u_final`` at ``t2`` down to ``t1`` and then measures the functionals along
the pair.  Each suite turns one family of statements into a list of
:class:`Claim` objects.  A claim passes when its margin is at least ``-tol``;
claims with ``asserted=False`` are diagnostics and never fail a report.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad, trapezoid

from . import functionals as fn
from .conjugate_heat import BackwardSolution, backward_solve, normalize
from .errors import HypothesisViolated
from .flow import FlowConfig, Trajectory, choose_dt, evolve
from .logsobolev import MinimizeConfig, estimate_constant, random_positive_field
from .manifold import (
    Kind,
    ManifoldSpec,
    MetricState,
    conformal_metric,
    node_coordinates,
    round_metric,
    scalar_curvature,
    soliton_defect,
    volume,
    volume_weights,
)

PRESETS = ("flat", "round", "perturbed", "random")
U_FINAL_KINDS = ("constant", "random-positive", "logsobolev-minimizer")


@dataclass(frozen=True)
class Tolerances:
    """``monotone=None`` means ``1e-6 * (1 + max |Y_a + 4at|)``."""

    monotone: float | None = None
    derivative: float = 1e-4
    mass: float = 1e-8
    drift_rate: float = 1e-6
    algebraic: float = 1e-9
    rate_identity: float = 5e-2
    telescoped: float = 1e-3
    soliton: float = 1e-6
    constant: float = 1e-4


@dataclass(frozen=True)
class ExperimentConfig:
    """One coupled run.

    ``initial`` is a recipe dict: ``preset`` (flat, round, perturbed, random),
    ``amplitude``, ``seed`` and ``r2``.  ``u_final`` is ``{"kind": ..., "seed":
    ..., "amplitude": ...}``.  The flow runs from ``flow.t_start`` to ``t2``;
    ``flow.t_end`` is ignored.
    """

    spec: ManifoldSpec
    a: float
    t1: float
    t2: float
    initial: dict = field(default_factory=lambda: {"preset": "flat"})
    flow: FlowConfig = FlowConfig()
    u_final: dict = field(default_factory=lambda: {"kind": "constant"})
    tolerances: Tolerances = Tolerances()
    minimize: MinimizeConfig = MinimizeConfig()
    output_dir: str | None = None
    name: str = "run"

    def __post_init__(self):
        if not self.flow.t_start <= self.t1 < self.t2:
            raise ValueError("need t_start <= t1 < t2")
        if self.initial.get("preset", "flat") not in PRESETS:
            raise ValueError(f"unknown preset {self.initial.get('preset')!r}")
        if self.u_final.get("kind", "constant") not in U_FINAL_KINDS:
            raise ValueError(f"unknown u_final kind {self.u_final.get('kind')!r}")

    @property
    def flow_config(self) -> FlowConfig:
        return replace(self.flow, t_end=self.t2)

    def refined(self, levels: int) -> ExperimentConfig:
        """Mesh halved ``levels`` times; a fixed ``dt`` shrinks by ``4^levels`` to keep the CFL ratio."""
        flow = self.flow if self.flow.dt is None else replace(self.flow, dt=self.flow.dt / 4**levels)
        return replace(self, spec=self.spec.refined(levels), flow=flow)

    def with_time_step(self, dt: float) -> ExperimentConfig:
        return replace(self, flow=replace(self.flow, dt=dt))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "spec": self.spec.to_dict(), "a": self.a, "t1": self.t1, "t2": self.t2,
            "initial": dict(self.initial), "flow": self.flow.to_dict(), "u_final": dict(self.u_final),
            "tolerances": asdict(self.tolerances), "minimize": asdict(self.minimize),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        return cls(
            spec=ManifoldSpec.from_dict(d["spec"]), a=float(d["a"]), t1=float(d["t1"]), t2=float(d["t2"]),
            initial=dict(d.get("initial", {"preset": "flat"})),
            flow=FlowConfig.from_dict(d.get("flow", {})),
            u_final=dict(d.get("u_final", {"kind": "constant"})),
            tolerances=Tolerances(**d.get("tolerances", {})),
            minimize=MinimizeConfig(**d.get("minimize", {})),
            output_dir=d.get("output_dir"), name=d.get("name", "run"),
        )

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


def initial_metric(spec: ManifoldSpec, recipe: dict, t: float = 0.0) -> MetricState:
    """Build ``g(t_start)`` from a preset recipe."""
    preset = recipe.get("preset", "flat")
    eps = float(recipe.get("amplitude", 0.05))
    r2 = float(recipe.get("r2", 1.0))
    if not spec.is_conformal:
        return round_metric(spec, r2, t)
    shift = 0.5 * math.log(r2)
    if preset in ("flat", "round"):
        return conformal_metric(spec, shift, t)
    if spec.kind is Kind.CONFORMAL_TORUS:
        x, y = node_coordinates(spec)
        if preset == "perturbed":
            phi = eps * np.cos(x)
        else:
            rng = np.random.default_rng(recipe.get("seed", 0))
            phi = sum(rng.normal() * np.cos(kx * x + ky * y + rng.uniform(0, 2 * np.pi))
                      for kx, ky in [(1, 0), (0, 1), (1, 1), (2, 1)])
            phi *= eps / np.max(np.abs(phi))
    else:
        th = node_coordinates(spec)
        if preset == "perturbed":
            phi = eps * np.cos(2 * th)
        else:
            rng = np.random.default_rng(recipe.get("seed", 0))
            phi = sum(rng.normal() * np.cos(k * th) for k in range(1, 5))
            phi *= eps / np.max(np.abs(phi))
    return conformal_metric(spec, shift + phi, t)


def final_field(cfg: ExperimentConfig, g2: MetricState) -> np.ndarray:
    """``u(t2)`` from the config recipe, normalized and strictly positive."""
    kind = cfg.u_final.get("kind", "constant")
    if kind == "constant":
        u = np.ones(cfg.spec.num_nodes)
    elif kind == "random-positive":
        rng = np.random.default_rng(cfg.u_final.get("seed", 0))
        u = random_positive_field(g2, rng, cfg.u_final.get("amplitude"))
    else:
        u = estimate_constant(g2, cfg.a, cfg.minimize).minimizer
        u = np.maximum(u, 1e-12 * u.max())
    return normalize(g2, u)


@dataclass(eq=False)
class CoupledRun:
    cfg: ExperimentConfig
    trajectory: Trajectory
    solution: BackwardSolution
    lambda0_start: float

    @property
    def dt(self) -> float:
        return self.trajectory.dt


def check_hypothesis(metric: MetricState, a: float) -> float:
    """Return ``lambda0(metric)``; raise ``HypothesisViolated`` unless ``a > -lambda0``."""
    lam = fn.lambda0(metric)
    if not fn.admissible(a, lam):
        raise HypothesisViolated(f"a={a!r} is not above -lambda0(g(t_start))={-lam!r}")
    return lam


def coupled_run(cfg: ExperimentConfig, u_final=None) -> CoupledRun:
    """Evolve, check ``a > -lambda0(g(t_start))`` and backward-solve."""
    g0 = initial_metric(cfg.spec, cfg.initial, cfg.flow.t_start)
    lam = check_hypothesis(g0, cfg.a)
    traj = evolve(g0, cfg.flow_config)
    u2 = final_field(cfg, traj[-1]) if u_final is None else normalize(traj[-1], u_final)
    sol = backward_solve(traj, u2, cfg.t1)
    return CoupledRun(cfg, traj, sol, lam)


def time_derivative(values, dt: float) -> np.ndarray:
    """Centered differences inside, one-sided second-order stencils at the ends."""
    y = np.asarray(values, float)
    if y.size < 3:
        return np.full(y.size, (y[-1] - y[0]) / (dt * max(y.size - 1, 1)))
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2 * dt)
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dt)
    d[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * dt)
    return d


@dataclass
class Claim:
    """``margin >= -tol`` is a pass.  Upper bounds ``q <= tol`` are stored as ``margin = -q``."""

    name: str
    margin: float
    tol: float
    asserted: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tol)

    def to_dict(self) -> dict:
        return {"name": self.name, "margin": self.margin, "tol": self.tol,
                "asserted": self.asserted, "passed": self.passed}


@dataclass
class VerificationReport:
    name: str
    rows: list[fn.EntropyReport] = field(default_factory=list)
    claims: list[Claim] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims if c.asserted)

    @property
    def worst_violation(self) -> float:
        """Smallest ``margin + tol`` over asserted claims (negative means failure)."""
        slack = [c.margin + c.tol for c in self.claims if c.asserted]
        return min(slack) if slack else math.inf

    def claim(self, name: str) -> Claim:
        for c in self.claims:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst_violation": self.worst_violation,
                "claims": [c.to_dict() for c in self.claims], "diagnostics": _jsonable(self.diagnostics)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        return fn.reports_to_csv(self.rows)

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pj, pc = out / f"{self.name}.json", out / f"{self.name}.csv"
        pj.write_text(self.to_json() + "\n")
        pc.write_text(self.to_csv())
        return pj, pc


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def entropy_rows(run: CoupledRun) -> list[fn.EntropyReport]:
    """EntropyReport at every time of the solution, with ``dY_fd`` filled in.

    ``lambda0`` is computed at every row up to 256 nodes, otherwise only at the ends.
    """
    sol = run.solution
    few = run.cfg.spec.num_nodes <= 256
    last = len(sol) - 1
    rows = [fn.entropy_report(g, u, run.cfg.a, with_lambda0=few or k in (0, last))
            for k, (g, u) in enumerate(sol)]
    dY = time_derivative([r.Ya_adj for r in rows], run.dt)
    for r, d in zip(rows, dY):
        r.dY_fd = float(d)
    return rows


def conservation_claims(run: CoupledRun, tol: Tolerances) -> list[Claim]:
    sol = run.solution
    mass_err = max(abs(float(np.dot(volume_weights(g), u * u)) - 1.0) for g, u in sol)
    step_drift = float(np.max(np.abs(sol.drift)))
    min_v = min(float(np.min(u * u)) for u in sol.u_fields)
    return [
        Claim("mass", -mass_err, tol.mass),
        Claim("mass_before_renormalization", -step_drift, tol.mass),
        Claim("drift_rate", -sol.max_drift_rate(), tol.drift_rate),
        Claim("positivity", min_v, 0.0),
    ]


def run_monotonicity_suite(cfg: ExperimentConfig, run: CoupledRun | None = None) -> VerificationReport:
    """``Y_a + 4at`` is nondecreasing and ``dY/dt >= (n / 4 omega) * defect``."""
    run = run or coupled_run(cfg)
    rows = entropy_rows(run)
    Y = np.array([r.Ya_adj for r in rows])
    tol_mono = cfg.tolerances.monotone
    if tol_mono is None:
        tol_mono = 1e-6 * (1 + float(np.max(np.abs(Y))))
    steps = np.diff(Y)
    gap = np.array([r.dY_fd - r.rhs_bound for r in rows])
    interior = gap[1:-1] if gap.size > 2 else gap
    rep = VerificationReport(f"{cfg.name}-monotonicity", rows)
    rep.claims = [
        Claim("monotone_step", float(steps.min()) if steps.size else 0.0, tol_mono),
        Claim("derivative_bound", float(interior.min()), cfg.tolerances.derivative),
        *conservation_claims(run, cfg.tolerances),
        Claim("strict_increase", float(steps.min()) if steps.size else 0.0, 0.0, asserted=False),
    ]
    rep.diagnostics = {
        "lambda0_start": run.lambda0_start, "dt": run.dt, "steps": len(rows) - 1,
        "min_step_rate": float(steps.min() / run.dt) if steps.size else 0.0,
        "max_equality_gap": float(np.max(np.abs(interior))),
        "derivative_margins": gap,
    }
    return rep


def run_soliton_check(cfg: ExperimentConfig, run: CoupledRun | None = None) -> VerificationReport:
    """Defect against a shrinking soliton with ``c(t) = 1 / (2 (t2 - t + sigma))``.

    The asserted claim is the implication "``|Y(t2) - Y(t1)| <= tol (t2 - t1)``
    implies ``max defect <= tol``"; it holds vacuously when Y moves.
    """
    run = run or coupled_run(cfg)
    sol = run.solution
    g2, u2 = sol.metrics[-1], sol.u_fields[-1]
    sigma = fn.optimal_sigma(g2, u2, cfg.a)
    defects = np.array([soliton_defect(g, u, 1.0 / (2 * (cfg.t2 - g.t + sigma))) for g, u in sol])
    g1, u1 = sol.metrics[0], sol.u_fields[0]
    dY = fn.adjusted_log_entropy(g2, u2, cfg.a, g2.t) - fn.adjusted_log_entropy(g1, u1, cfg.a, g1.t)
    tol = cfg.tolerances.soliton
    flat = abs(dY) <= tol * (cfg.t2 - cfg.t1)
    max_def = float(defects.max())
    rep = VerificationReport(f"{cfg.name}-soliton")
    rep.claims = [
        Claim("constant_implies_soliton", -max_def if flat else 0.0, tol),
        Claim("max_defect", -max_def, tol, asserted=False),
    ]
    rep.diagnostics = {"sigma": sigma, "delta_Y": dY, "near_constant": flat,
                       "max_defect": max_def, "defects": defects}
    return rep


def run_constant_monotonicity(cfg: ExperimentConfig, run: CoupledRun | None = None) -> VerificationReport:
    """``C(t) + 4at`` at ``t1`` and ``t2`` plus a link-by-link replay of the proof chain.

    The replay takes the minimizer ``u2`` at ``t2`` (so ``eps = Y(u2) - C(t2)``),
    flows it back to ``t1`` and checks

        C(t2) + eps + 4a t2 >= Y(t2 data) + 4a t2 >= Y(t1 data) + 4a t1 >= C(t1) + 4a t1.

    The backward-solved field is handed to the ``t1`` minimizer as an extra start.
    """
    run = run or coupled_run(cfg)
    traj, a = run.trajectory, cfg.a
    g1, g2 = traj[traj.index_of(cfg.t1)], traj[-1]
    est2 = estimate_constant(g2, a, cfg.minimize)
    u2 = normalize(g2, np.maximum(est2.minimizer, 1e-12 * est2.minimizer.max()))
    chain = backward_solve(traj, u2, cfg.t1)
    u1 = chain.u_fields[0]
    est1 = estimate_constant(g1, a, cfg.minimize, extra_starts=[u1])
    y2 = fn.log_entropy(g2, u2, a) + 4 * a * g2.t
    y1 = fn.log_entropy(g1, u1, a) + 4 * a * g1.t
    c2 = est2.C + 4 * a * g2.t
    c1 = est1.C + 4 * a * g1.t
    eps = y2 - c2
    tol = cfg.tolerances.constant
    rep = VerificationReport(f"{cfg.name}-constant")
    rep.claims = [
        Claim("constant_monotone", c2 - c1, tol),
        Claim("link_near_minimizer", c2 + eps - y2, tol),
        Claim("link_flow", y2 - y1, tol),
        Claim("link_infimum", y1 - c1, tol),
        Claim("eps_small", -abs(eps), tol, asserted=False),
        *conservation_claims(CoupledRun(cfg, traj, chain, run.lambda0_start), cfg.tolerances),
    ]
    rep.diagnostics = {"C_t1": est1.C, "C_t2": est2.C, "adjusted_t1": c1, "adjusted_t2": c2,
                       "eps": eps, "Y_t1_data": y1, "Y_t2_data": y2, "starts_t1": est1.values,
                       "starts_t2": est2.values}
    return rep


def run_identity_suite(cfg: ExperimentConfig, run: CoupledRun | None = None) -> VerificationReport:
    """W along the coupled system with ``tau(t) = t2 - t + sigma``.

    Checks the rate identity ``dW/dt = 2 tau * defect`` (finite differences, so to
    O(dt + h^2)), its telescoped trapezoid form, f-form = u-form, and
    ``W >= lower bound`` with equality at ``tau = sigma``.
    """
    run = run or coupled_run(cfg)
    sol, a, tol = run.solution, cfg.a, cfg.tolerances
    g2, u2 = sol.metrics[-1], sol.u_fields[-1]
    sigma = fn.optimal_sigma(g2, u2, a)
    times = sol.times
    taus = cfg.t2 - times + sigma
    W = np.array([fn.perelman_W(g, u, tau, a) for (g, u), tau in zip(sol, taus)])
    D = np.array([2 * tau * soliton_defect(g, u, 1.0 / (2 * tau), form="f") for (g, u), tau in zip(sol, taus)])
    D_u = np.array([2 * tau * soliton_defect(g, u, 1.0 / (2 * tau)) for (g, u), tau in zip(sol, taus)])
    lower = np.array([fn.w_lower_bound(g, u, tau, a) for (g, u), tau in zip(sol, taus)])
    dW = time_derivative(W[:, 1], run.dt)
    rate_err = np.abs(dW - D)[1:-1] if D.size > 2 else np.abs(dW - D)
    scale = 1.0 + float(np.max(np.abs(D)))
    telescoped = float(W[-1, 1] - W[0, 1] - trapezoid(D, dx=run.dt))
    rep = VerificationReport(f"{cfg.name}-identity")
    rep.claims = [
        Claim("rate_identity", -float(rate_err.max()) / scale, tol.rate_identity),
        Claim("telescoped", -abs(telescoped), tol.telescoped),
        Claim("f_form_equals_u_form", -float(np.max(np.abs(W[:, 0] - W[:, 1]))), tol.algebraic),
        Claim("lower_bound", float(np.min(W[:, 1] - lower)), tol.algebraic),
        Claim("equality_at_sigma", -abs(float(W[-1, 1] - lower[-1])), tol.algebraic),
        Claim("W_nondecreasing", float(np.min(np.diff(W[:, 1]))) if len(W) > 1 else 0.0, 0.0, asserted=False),
    ]
    rep.diagnostics = {"sigma": sigma, "telescoped_residual": telescoped,
                       "max_rate_error": float(rate_err.max()),
                       "defect_form_gap": float(np.max(np.abs(D - D_u))),
                       "W": W[:, 1], "rate": D}
    return rep


SUITES = {
    "monotonicity": run_monotonicity_suite,
    "soliton": run_soliton_check,
    "constant": run_constant_monotonicity,
    "identity": run_identity_suite,
}


def run_all(cfg: ExperimentConfig, suites=("monotonicity", "soliton", "identity")) -> list[VerificationReport]:
    """Run the chosen suites on one shared coupled run."""
    run = coupled_run(cfg)
    return [SUITES[s](cfg, run) for s in suites]


# -- refinement ---------------------------------------------------------------

def curvature_error(spec: ManifoldSpec, eps: float = 0.1) -> float:
    """Max nodal error of R against a closed form (``phi = eps cos x`` / ``eps cos 2 theta``)."""
    g = initial_metric(spec, {"preset": "perturbed", "amplitude": eps})
    if spec.kind is Kind.CONFORMAL_TORUS:
        x, _ = node_coordinates(spec)
        exact = np.exp(-2 * eps * np.cos(x)) * 2 * eps * np.cos(x)
    elif spec.kind is Kind.AXISYM_SPHERE2:
        th = node_coordinates(spec)
        exact = np.exp(-2 * eps * np.cos(2 * th)) * (2 + 4 * eps * (1 + 3 * np.cos(2 * th)))
    else:
        return 0.0
    return float(np.max(np.abs(scalar_curvature(g) - exact)))


def volume_error(spec: ManifoldSpec, eps: float = 0.1) -> float:
    """Error of the volume quadrature for the perturbed metric against adaptive quadrature."""
    g = initial_metric(spec, {"preset": "perturbed", "amplitude": eps})
    if spec.kind is Kind.CONFORMAL_TORUS:
        exact = 2 * np.pi * quad(lambda x: np.exp(2 * eps * np.cos(x)), 0, 2 * np.pi, epsabs=1e-14)[0]
    elif spec.kind is Kind.AXISYM_SPHERE2:
        exact = 2 * np.pi * quad(lambda t: np.exp(2 * eps * np.cos(2 * t)) * np.sin(t), 0, np.pi, epsabs=1e-14)[0]
    else:
        return 0.0
    return abs(volume(g) - exact)


def _ratios(errors):
    e = np.asarray(errors, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(r) for r in e[:-1] / e[1:]]


def refinement_study(cfg: ExperimentConfig, levels: int = 2) -> dict:
    """Halve ``h`` ``levels`` times with ``dt`` tracking ``h^2`` and collect error ratios.

    Under the diffusive scaling ``dt ~ h^2`` a first-order-in-time,
    second-order-in-space scheme has total error ``O(h^2)``, so every ratio
    should approach 4.
    """
    out = {"levels": [], "curvature_error": [], "volume_error": [], "telescoped_residual": [],
           "monotone_violation": [], "equality_gap": []}
    for k in range(levels + 1):
        c = cfg.refined(k)
        run = coupled_run(c)
        ident = run_identity_suite(c, run)
        mono = run_monotonicity_suite(c, run)
        out["levels"].append({"resolution": list(c.spec.resolution), "dt": run.dt})
        out["curvature_error"].append(curvature_error(c.spec))
        out["volume_error"].append(volume_error(c.spec))
        out["telescoped_residual"].append(abs(ident.diagnostics["telescoped_residual"]))
        out["monotone_violation"].append(max(0.0, -mono.claim("monotone_step").margin))
        out["equality_gap"].append(mono.diagnostics["max_equality_gap"])
    out["ratios"] = {k: _ratios(out[k]) for k in
                     ("curvature_error", "volume_error", "telescoped_residual", "equality_gap")}
    return out


def time_order_study(cfg: ExperimentConfig, levels: int = 2) -> dict:
    """Richardson estimate of the temporal order of the flow at fixed mesh.

    Runs ``dt, dt/2, ..., dt/2^(levels+1)`` and compares successive terminal
    conformal factors; ratios near ``2^order`` confirm the scheme order.
    """
    g0 = initial_metric(cfg.spec, cfg.initial, cfg.flow.t_start)
    base = cfg.flow_config
    if base.dt is None:
        base = replace(base, dt=choose_dt(g0, base)[0])
    finals = [evolve(g0, replace(base, dt=base.dt / 2**k))[-1].dof for k in range(levels + 2)]
    diffs = [float(np.max(np.abs(finals[k] - finals[k + 1]))) for k in range(levels + 1)]
    return {"dt": [base.dt / 2**k for k in range(levels + 2)], "differences": diffs,
            "ratios": _ratios(diffs), "scheme": base.scheme}
