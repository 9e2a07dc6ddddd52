import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from logentropy import functionals as fn
from logentropy.conjugate_heat import normalize
from logentropy.errors import DomainError, NonPositiveTau, NotNormalized
from logentropy.manifold import ManifoldSpec, conformal_metric, node_coordinates, round_metric, volume

from conftest import positive_field


def constant_field(g):
    return np.full(g.spec.num_nodes, 1 / math.sqrt(volume(g)))


class TestRoundSphere:
    @pytest.mark.parametrize("r2", [0.3, 1.0, 2.5])
    def test_y0_is_ln_2pi(self, r2):
        g = round_metric(ManifoldSpec.round_sphere(2), r2)
        assert fn.log_entropy(g, constant_field(g)) == pytest.approx(math.log(2 * math.pi), abs=1e-13)

    def test_lambda0(self):
        g = round_metric(ManifoldSpec.round_sphere(3), 2.0)
        assert fn.lambda0(g) == pytest.approx(0.25 * 6 / 2.0)

    def test_report_fields(self):
        g = round_metric(ManifoldSpec.round_sphere(2), 1.0)
        rep = fn.entropy_report(g, constant_field(g), 0.5)
        assert rep.omega == pytest.approx(1.0)
        assert rep.defect == pytest.approx(2.0)   # 8 a^2
        assert rep.rhs_bound == pytest.approx(1.0)
        assert rep.sigma == pytest.approx(0.25)


class TestLambda0:
    def test_flat_torus(self, flat_torus):
        assert abs(fn.lambda0(flat_torus)) <= 1e-10
        assert abs(fn.lambda0(flat_torus, method="inverse")) <= 1e-10

    @pytest.mark.parametrize("metric", ["bumpy_torus", "bumpy_sphere"])
    def test_inverse_iteration_matches_dense(self, metric, request):
        g = request.getfixturevalue(metric)
        assert fn.lambda0(g, "inverse") == pytest.approx(fn.lambda0(g, "dense"), abs=1e-9)

    def test_small_spec_against_generalized_eigh(self):
        spec = ManifoldSpec.axisym_sphere(16)
        g = conformal_metric(spec, 0.1 * np.cos(node_coordinates(spec)))
        K, w = fn.operator_matrices(g)
        ref = scipy.linalg.eigh(K.toarray(), np.diag(w), eigvals_only=True)[0]
        for method in ("dense", "inverse"):
            assert fn.lambda0(g, method) == pytest.approx(ref, abs=1e-9)

    def test_unit_sphere(self):
        g = conformal_metric(ManifoldSpec.axisym_sphere(128))
        assert fn.lambda0(g) == pytest.approx(0.5, abs=1e-6)

    def test_rayleigh_quotient_bound(self, bumpy_torus, rng):
        lam = fn.lambda0(bumpy_torus)
        for _ in range(5):
            u = normalize(bumpy_torus, positive_field(bumpy_torus, rng))
            assert fn.energy(bumpy_torus, u) >= lam - 1e-12

    def test_unknown_method(self, flat_torus):
        with pytest.raises(ValueError):
            fn.lambda0(flat_torus, "qr")


class TestLogEntropy:
    def test_requires_normalization(self, bumpy_sphere):
        with pytest.raises(NotNormalized):
            fn.log_entropy(bumpy_sphere, np.ones(bumpy_sphere.spec.num_nodes))

    def test_domain(self, flat_torus):
        with pytest.raises(DomainError):
            fn.log_entropy(flat_torus, constant_field(flat_torus), a=0.0)

    def test_adjusted(self, bumpy_sphere, rng):
        u = normalize(bumpy_sphere, positive_field(bumpy_sphere, rng))
        base = fn.log_entropy(bumpy_sphere, u, 0.3)
        assert fn.adjusted_log_entropy(bumpy_sphere, u, 0.3, 2.0) == pytest.approx(base + 2.4)

    def test_entropy_handles_zeros(self, flat_torus):
        u = np.zeros(flat_torus.spec.num_nodes)
        u[0] = 1.0
        assert math.isfinite(fn.entropy(flat_torus, u))


def test_h_minimize_matches_grid_search(rng):
    s = np.exp(np.linspace(-8, 8, 400001))
    for _ in range(100):
        A, n = rng.uniform(0.05, 20), int(rng.integers(2, 9))
        s_star, h_star = fn.h_minimize(A, n)
        brute = np.min(s * A - 0.5 * n * np.log(s))
        assert h_star == pytest.approx(brute, abs=1e-6)
        assert s_star * A - 0.5 * n * math.log(s_star) == pytest.approx(h_star, abs=1e-12)
    with pytest.raises(DomainError):
        fn.h_minimize(0.0, 2)


def test_b_const():
    assert fn.b_const(2) == pytest.approx(-math.log(math.pi) - 1)


class TestPerelmanW:
    @pytest.mark.parametrize("metric", ["bumpy_torus", "bumpy_sphere"])
    def test_forms_agree(self, metric, request, rng):
        g = request.getfixturevalue(metric)
        for _ in range(10):
            u = normalize(g, positive_field(g, rng))
            w_f, w_u = fn.perelman_W(g, u, rng.uniform(0.05, 3.0), rng.uniform(0, 2))
            assert w_f == pytest.approx(w_u, abs=1e-9)

    def test_u_form_independent_of_a(self, bumpy_sphere, rng):
        u = normalize(bumpy_sphere, positive_field(bumpy_sphere, rng))
        ref = fn.perelman_W(bumpy_sphere, u, 0.7, 0.0)[1]
        for a in (0.1, 1.0, 17.0):
            assert fn.perelman_W(bumpy_sphere, u, 0.7, a)[1] == pytest.approx(ref, abs=1e-12)

    def test_lower_bound_tight_at_sigma(self, bumpy_sphere, rng):
        u = normalize(bumpy_sphere, positive_field(bumpy_sphere, rng))
        a = 0.4
        sigma = fn.optimal_sigma(bumpy_sphere, u, a)
        for tau in (0.3 * sigma, sigma, 4 * sigma):
            gap = fn.perelman_W(bumpy_sphere, u, tau, a)[1] - fn.w_lower_bound(bumpy_sphere, u, tau, a)
            assert gap >= -1e-12
        assert fn.perelman_W(bumpy_sphere, u, sigma, a)[1] == pytest.approx(
            fn.w_lower_bound(bumpy_sphere, u, sigma, a), abs=1e-12)

    def test_round_sphere_closed_form(self):
        # constant u on the unit S^2: entropy ln 4pi, energy R/4 = 1/2
        g = round_metric(ManifoldSpec.round_sphere(2), 1.0)
        w_f, w_u = fn.perelman_W(g, constant_field(g), 0.5)
        expected = math.log(4 * math.pi) + 4 * 0.5 * 0.5 - math.log(2.0) - math.log(math.pi) - 2
        assert w_u == pytest.approx(expected, abs=1e-13)
        assert w_f == pytest.approx(expected, abs=1e-13)

    def test_bad_tau(self, bumpy_sphere):
        with pytest.raises(NonPositiveTau):
            fn.perelman_W(bumpy_sphere, constant_field(bumpy_sphere), 0.0)


def test_csv_roundtrip(bumpy_sphere, rng):
    u = normalize(bumpy_sphere, positive_field(bumpy_sphere, rng))
    reps = [fn.entropy_report(bumpy_sphere, u, a) for a in (0.1, 0.5)]
    reps[0].dY_fd = 0.25
    back = fn.reports_from_csv(fn.reports_to_csv(reps))
    for r, b in zip(reps, back):
        assert r.as_row() == pytest.approx(b.as_row(), nan_ok=True, rel=0, abs=0)


_SPHERE = conformal_metric(ManifoldSpec.axisym_sphere(32), 0.05 * np.cos(2 * node_coordinates(ManifoldSpec.axisym_sphere(32))))
_TH = node_coordinates(_SPHERE.spec)


@settings(max_examples=40, deadline=None)
@given(
    coeffs=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3),
    tau=st.floats(0.01, 5.0),
    a=st.floats(0.0, 3.0),
)
def test_w_properties(coeffs, tau, a):
    u = normalize(_SPHERE, np.exp(sum(c * np.cos(k * _TH) for k, c in enumerate(coeffs, 1))))
    w_f, w_u = fn.perelman_W(_SPHERE, u, tau, a)
    assert w_f == pytest.approx(w_u, abs=1e-9)
    assert w_u >= fn.w_lower_bound(_SPHERE, u, tau, a) - 1e-10
    assert fn.energy(_SPHERE, u) >= fn.lambda0(_SPHERE) - 1e-12
