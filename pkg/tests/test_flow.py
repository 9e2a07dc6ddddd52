import math

import numpy as np
import pytest

from logentropy.errors import SingularTime, StepTooLarge, TimeMisaligned
from logentropy.flow import FlowConfig, choose_dt, evolve, ricci_step
from logentropy.manifold import ManifoldSpec, integrate, round_metric, scalar_curvature, stable_dt, volume


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(t_start=1.0, t_end=0.5)
    with pytest.raises(ValueError):
        FlowConfig(dt=-1.0)
    with pytest.raises(ValueError):
        FlowConfig(cfl_safety=1.5)
    with pytest.raises(ValueError):
        FlowConfig(scheme="rk4")
    cfg = FlowConfig(0.0, 0.2, dt=1e-2, scheme="heun")
    assert FlowConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.order == 2


def test_round_sphere_is_exact():
    traj = evolve(round_metric(ManifoldSpec.round_sphere(2)), FlowConfig(0.0, 0.4, dt=1e-3))
    assert len(traj) == 401
    r2 = np.array([m.r2 for m in traj.states])
    assert np.max(np.abs(r2 - (1 - 2 * traj.times))) <= 1e-12
    assert traj[-1].t == pytest.approx(0.4, abs=1e-15)


@pytest.mark.parametrize("n", [3, 4])
def test_round_sphere_higher_dimension(n):
    traj = evolve(round_metric(ManifoldSpec.round_sphere(n), 2.0), FlowConfig(0.0, 0.1, dt=0.01))
    assert traj[-1].r2 == pytest.approx(2.0 - 2 * (n - 1) * 0.1, rel=1e-14)


def test_round_sphere_singular_time():
    g = round_metric(ManifoldSpec.round_sphere(2))
    with pytest.raises(SingularTime):
        evolve(g, FlowConfig(0.0, 0.5, dt=1e-3))
    with pytest.raises(SingularTime):
        ricci_step(round_metric(g.spec, 0.001), 0.01)


def test_flat_torus_is_stationary(flat_torus):
    traj = evolve(flat_torus, FlowConfig(0.0, 0.05))
    assert all(np.array_equal(m.phi, flat_torus.phi) for m in traj.states)


def test_step_too_large(bumpy_torus):
    with pytest.raises(StepTooLarge):
        ricci_step(bumpy_torus, 2 * stable_dt(bumpy_torus))
    with pytest.raises(StepTooLarge):
        evolve(bumpy_torus, FlowConfig(0.0, 1.0, dt=2 * stable_dt(bumpy_torus)))


def test_choose_dt_tiles_window(bumpy_sphere):
    cfg = FlowConfig(0.0, 0.013, cfl_safety=0.5)
    dt, steps = choose_dt(bumpy_sphere, cfg)
    assert dt <= 0.5 * stable_dt(bumpy_sphere)
    assert dt * steps == pytest.approx(0.013, rel=1e-14)


def test_times_are_pinned_to_grid(bumpy_sphere):
    traj = evolve(bumpy_sphere, FlowConfig(0.1, 0.12))
    assert np.array_equal([m.t for m in traj.states], traj.times)
    assert traj.index_of(traj.times[5]) == 5
    with pytest.raises(TimeMisaligned):
        traj.index_of(traj.times[5] + 0.3 * traj.dt)
    with pytest.raises(TimeMisaligned):
        traj.index_of(1.0)


@pytest.mark.parametrize("scheme", ["euler", "heun"])
def test_gauss_bonnet_preserved_and_area_shrinks(bumpy_sphere, scheme):
    traj = evolve(bumpy_sphere, FlowConfig(0.0, 0.05, scheme=scheme))
    for m in traj.states[::10]:
        assert integrate(m, scalar_curvature(m)) == pytest.approx(8 * math.pi, abs=1e-10)
    # d vol / dt = -int R = -8 pi on a 2-sphere
    tol = 2e-3 if scheme == "euler" else 1e-6
    assert volume(traj[-1]) - volume(traj[0]) == pytest.approx(-8 * math.pi * 0.05, abs=tol)


def test_perturbation_decays(bumpy_sphere):
    traj = evolve(bumpy_sphere, FlowConfig(0.0, 0.1))
    spread = [np.ptp(scalar_curvature(m)) for m in (traj[0], traj[-1])]
    assert spread[1] < spread[0]


@pytest.mark.parametrize("scheme, ratio", [("euler", 2.0), ("heun", 4.0)])
def test_temporal_order(bumpy_torus, scheme, ratio):
    dt0 = 0.4 * stable_dt(bumpy_torus)
    finals = [evolve(bumpy_torus, FlowConfig(0.0, 0.02, dt=dt0 / 2**k, scheme=scheme))[-1].phi for k in range(3)]
    d1, d2 = np.abs(finals[0] - finals[1]).max(), np.abs(finals[1] - finals[2]).max()
    assert d1 / d2 == pytest.approx(ratio, rel=0.1)
