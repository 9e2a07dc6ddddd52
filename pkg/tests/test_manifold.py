import math

import numpy as np
import pytest

from logentropy.errors import NonPositiveField
from logentropy.manifold import (
    Kind,
    ManifoldSpec,
    MetricState,
    conformal_metric,
    dirichlet_form,
    grad_norm_sq,
    integrate,
    laplace_beltrami,
    min_negative_curvature,
    node_coordinates,
    round_metric,
    scalar_curvature,
    soliton_defect,
    stable_dt,
    unit_sphere_volume,
    volume,
)


@pytest.mark.parametrize("kind, n, res", [
    (Kind.CONFORMAL_TORUS, 2, (4, 8)),
    (Kind.CONFORMAL_TORUS, 3, (8, 8)),
    (Kind.AXISYM_SPHERE2, 2, (8,)),
    (Kind.ROUND_SPHERE, 1, ()),
    (Kind.ROUND_SPHERE, 3, (4,)),
])
def test_invalid_specs_rejected(kind, n, res):
    with pytest.raises(ValueError):
        ManifoldSpec(kind, n, res)


def test_spec_roundtrip_and_refine():
    spec = ManifoldSpec.torus(16, 8)
    assert ManifoldSpec.from_dict(spec.to_dict()) == spec
    assert spec.refined(2).resolution == (64, 32)
    assert spec.num_nodes == 128
    assert ManifoldSpec.round_sphere(4).num_nodes == 1


@pytest.mark.parametrize("n, expected", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2)])
def test_unit_sphere_volume(n, expected):
    assert unit_sphere_volume(n) == pytest.approx(expected, rel=1e-14)


def test_metric_state_is_frozen():
    g = conformal_metric(ManifoldSpec.torus(8), 0.0)
    with pytest.raises(ValueError):
        g.dof[0] = 1.0
    with pytest.raises(ValueError):
        MetricState(g.spec, np.zeros(3))
    with pytest.raises(ValueError):
        round_metric(ManifoldSpec.round_sphere(2), -1.0)


def test_round_sphere_closed_forms():
    for n, r2 in [(2, 1.0), (3, 0.5), (5, 2.0)]:
        g = round_metric(ManifoldSpec.round_sphere(n), r2)
        assert scalar_curvature(g)[0] == pytest.approx(n * (n - 1) / r2, rel=1e-15)
        assert volume(g) == pytest.approx(unit_sphere_volume(n) * r2 ** (n / 2), rel=1e-15)


@pytest.mark.parametrize("metric", ["flat_torus", "bumpy_torus", "unit_sphere", "bumpy_sphere"])
def test_gauss_bonnet(metric, request):
    g = request.getfixturevalue(metric)
    expected = 4 * math.pi * g.spec.euler_characteristic  # R = 2K
    assert integrate(g, scalar_curvature(g)) == pytest.approx(expected, abs=1e-11)


def test_unit_sphere_area_is_exact(unit_sphere):
    assert volume(unit_sphere) == pytest.approx(4 * math.pi, rel=1e-14)
    assert np.allclose(scalar_curvature(unit_sphere), 2.0, atol=1e-13)


def test_torus_curvature_converges_at_second_order():
    errs = []
    for N in (16, 32, 64):
        spec = ManifoldSpec.torus(N)
        x, _ = node_coordinates(spec)
        phi = 0.1 * np.cos(x)
        exact = np.exp(-2 * phi) * 0.2 * np.cos(x)
        errs.append(np.abs(scalar_curvature(conformal_metric(spec, phi)) - exact).max())
    assert errs[0] / errs[1] > 3.8 and errs[1] / errs[2] > 3.8


def test_sphere_laplacian_of_height_function():
    errs = []
    for N in (32, 64, 128):
        g = conformal_metric(ManifoldSpec.axisym_sphere(N))
        th = node_coordinates(g.spec)
        errs.append(np.abs(laplace_beltrami(g, np.cos(th)) + 2 * np.cos(th)).max())
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@pytest.mark.parametrize("metric", ["bumpy_torus", "bumpy_sphere"])
def test_summation_by_parts(metric, request, rng):
    g = request.getfixturevalue(metric)
    u, v = rng.normal(size=(2, g.spec.num_nodes))
    S = g.spec.geometry.stiffness
    assert integrate(g, v * laplace_beltrami(g, u)) == pytest.approx(-(v @ S @ u), abs=1e-10)
    assert integrate(g, laplace_beltrami(g, u)) == pytest.approx(0.0, abs=1e-10)
    assert integrate(g, grad_norm_sq(g, u)) == pytest.approx(dirichlet_form(g, u), rel=1e-13)


def test_dirichlet_form_is_conformally_invariant(flat_torus, bumpy_torus, rng):
    u = rng.normal(size=flat_torus.spec.num_nodes)
    g2 = conformal_metric(flat_torus.spec, rng.normal(size=flat_torus.spec.num_nodes))
    assert dirichlet_form(flat_torus, u) == dirichlet_form(g2, u)


def test_stable_dt_on_flat_torus(flat_torus):
    h = 2 * math.pi / 16
    assert stable_dt(flat_torus) == pytest.approx(h * h / 4, rel=1e-13)
    assert stable_dt(round_metric(ManifoldSpec.round_sphere(2))) == math.inf


def test_min_negative_curvature(unit_sphere, bumpy_torus):
    assert min_negative_curvature(unit_sphere) == 0.0
    assert min_negative_curvature(bumpy_torus) < 0.0


class TestSolitonDefect:
    def test_round_sphere_is_einstein(self, unit_sphere, round2):
        u = np.full(unit_sphere.spec.num_nodes, 1 / math.sqrt(4 * math.pi))
        assert soliton_defect(unit_sphere, u, 1.0) == pytest.approx(0.0, abs=1e-20)
        assert soliton_defect(round2, [1 / math.sqrt(4 * math.pi)], 1.0) == 0.0

    def test_flat_torus_constant_field(self, flat_torus):
        u = np.full(flat_torus.spec.num_nodes, 1 / (2 * math.pi))
        # |-c g|^2 = 2 c^2 integrated against u^2 dvol = 1
        assert soliton_defect(flat_torus, u, 0.5) == pytest.approx(0.5, rel=1e-13)

    def test_round_sphere_density(self):
        g = round_metric(ManifoldSpec.round_sphere(2), 1.0)
        u = 1 / math.sqrt(4 * math.pi)
        assert soliton_defect(g, [u], 2.0) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("metric", ["bumpy_torus", "bumpy_sphere"])
    def test_u_and_f_forms_agree(self, metric, request):
        g = request.getfixturevalue(metric)
        if g.spec.kind is Kind.CONFORMAL_TORUS:
            x, y = node_coordinates(g.spec)
            u = np.exp(0.3 * np.sin(x) * np.cos(y))
        else:
            u = np.exp(0.3 * np.cos(node_coordinates(g.spec)))
        du, df = soliton_defect(g, u, 0.7, "u"), soliton_defect(g, u, 0.7, "f")
        assert du == pytest.approx(df, rel=5e-2)

    def test_needs_positive_field(self, flat_torus):
        u = np.ones(flat_torus.spec.num_nodes)
        u[3] = 0.0
        with pytest.raises(NonPositiveField):
            soliton_defect(flat_torus, u, 1.0)
        with pytest.raises(ValueError):
            soliton_defect(flat_torus, np.ones(flat_torus.spec.num_nodes), 1.0, form="g")
