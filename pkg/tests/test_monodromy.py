import csv

import numpy as np
import pytest

from germkit.errors import DivergenceError, LatticeError
from germkit.models import harmonic_spec, make_cyclic_model, pack, torus2_spec, zero_hessian_spec
from germkit.monodromy import (
    HamiltonianModel,
    Observable,
    compose_flows,
    flow,
    integrate_variational,
    involution_check,
    monodromy_matrices,
    period_lattice,
    reduced_monodromy,
    trajectory,
    write_trajectory_csv,
)
from germkit.samples import rotation
from germkit.symcore import symplectic_residual


def quadratic_observable(H, name="F"):
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    return Observable(
        value=lambda z: 0.5 * np.einsum("bi,ij,bj->b", z, H, z),
        gradient=lambda z: z @ H,
        hessian=lambda z: np.broadcast_to(H, (z.shape[0], d, d)),
        name=name,
    )


def oscillator_model(omega=1.0, constant=False):
    """n = 2, k = 1 with F = (omega/2)(q1^2 + p1^2); the second plane is inert."""
    H = np.diag([omega, 0.0, omega, 0.0])
    if constant:
        F = Observable(lambda z: np.full(z.shape[0], 3.0), lambda z: np.zeros_like(z),
                       lambda z: np.zeros((z.shape[0], 4, 4)))
    else:
        F = quadratic_observable(H)
    return HamiltonianModel(2, 1, [F], np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4, bool), default_step=1e-3)


def qp_block(Y):
    return Y[np.ix_([0, 2], [0, 2])]


class TestIntegrateVariational:
    def test_constant_function(self):
        m = oscillator_model(constant=True)
        z0 = np.array([0.3, -1.0, 2.0, 0.5])
        z, Y = integrate_variational(m, 0, 5.0, z0)
        assert np.array_equal(z, z0) and np.array_equal(Y, np.eye(4))

    @pytest.mark.parametrize("omega", [1.0, 2.5])
    def test_full_period(self, omega):
        m = oscillator_model(omega)
        z0 = np.array([0.4, 0.0, -0.2, 0.0])
        z, Y = integrate_variational(m, 0, 2 * np.pi / omega, z0, step=2 * np.pi / omega / 20000)
        assert np.linalg.norm(z - z0) <= 1e-9
        assert np.max(np.abs(Y - np.eye(4))) <= 1e-9

    def test_quarter_period(self):
        # q' = F_p = p, p' = -F_q = -q, so (q, p) -> (q cos t + p sin t, -q sin t + p cos t)
        m = oscillator_model(1.0)
        _, Y = integrate_variational(m, 0, np.pi / 2, step=1e-4)
        assert np.max(np.abs(qp_block(Y) - rotation(np.pi / 2).T)) <= 1e-9

    def test_symplectic_drift(self):
        for spec in (harmonic_spec(), torus2_spec()):
            model = make_cyclic_model(spec)
            lat = period_lattice(model)
            res = monodromy_matrices(model, lat)
            assert max(res.symplectic_residuals) <= 1e-9

    def test_group_property(self):
        m = make_cyclic_model(harmonic_spec())
        z0 = m.base_point + np.array([0, 0.1, 0, -0.2])
        za, Ya = integrate_variational(m, 0, 0.7, z0)
        zb, Yb = integrate_variational(m, 0, 1.1, za)
        zc, Yc = integrate_variational(m, 0, 1.8, z0)
        assert np.linalg.norm(zb - zc) <= 1e-9
        assert np.linalg.norm(Yb @ Ya - Yc) <= 1e-9

    def test_negative_time_inverts(self):
        m = make_cyclic_model(harmonic_spec())
        z1, Y1 = integrate_variational(m, 0, 0.9)
        z2, Y2 = integrate_variational(m, 0, -0.9, z1)
        assert np.linalg.norm(z2 - m.base_point) <= 1e-10
        assert np.linalg.norm(Y2 @ Y1 - np.eye(4)) <= 1e-10

    def test_divergence(self):
        # F = p1 q1^2 gives q1' = q1^2, which blows up at t = 1 / q1(0)
        F = Observable(
            lambda z: z[:, 2] * z[:, 0] ** 2,
            lambda z: np.stack([2 * z[:, 0] * z[:, 2], 0 * z[:, 0], z[:, 0] ** 2, 0 * z[:, 0]], axis=1),
            lambda z: np.zeros((z.shape[0], 4, 4)),
        )
        m = HamiltonianModel(2, 1, [F], np.array([1.0, 0, 1.0, 0]), np.zeros(4, bool), default_step=1e-3)
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergenceError) as err:
            integrate_variational(m, 0, 5.0)
        assert 0.9 < err.value.time <= 5.0


class TestPeriodLattice:
    def test_k1(self):
        lat = period_lattice(make_cyclic_model(harmonic_spec()))
        assert np.allclose(lat.generators, [[2 * np.pi]])
        assert lat.return_residuals.max() <= 1e-8

    def test_k2(self):
        lat = period_lattice(make_cyclic_model(torus2_spec()))
        expected = [[2 * np.pi, -2 * np.sqrt(2) * np.pi], [0, 2 * np.pi]]
        assert np.allclose(lat.generators, expected, atol=1e-14)
        assert lat.return_residuals.max() <= 1e-8

    def test_half_period_rejected(self):
        with pytest.raises(LatticeError, match="residual 3.14"):
            period_lattice(make_cyclic_model(harmonic_spec()), hints=[[np.pi]])

    def test_hint_accepted(self):
        lat = period_lattice(make_cyclic_model(harmonic_spec()), hints=[[-2 * np.pi]])
        assert lat.return_residuals[0] <= 1e-8


class TestMonodromy:
    def test_action_flows_are_identity(self):
        model = make_cyclic_model(torus2_spec())
        res = monodromy_matrices(model, period_lattice(model))
        assert np.allclose(res.G[1], np.eye(6), atol=1e-14)
        assert np.allclose(reduced_monodromy(model, res).Xi[1], np.eye(2), atol=1e-12)

    def test_zero_hessian_identity(self):
        model = make_cyclic_model(zero_hessian_spec())
        res = reduced_monodromy(model, monodromy_matrices(model, period_lattice(model)))
        assert np.max(np.abs(res.G[0] - np.eye(4))) <= 1e-12
        assert np.max(np.abs(res.Xi[0] - np.eye(2))) <= 1e-12

    def test_harmonic_reduced_is_rotation(self):
        w2 = np.sqrt(2)
        model = make_cyclic_model(harmonic_spec(w2))
        res = reduced_monodromy(model, monodromy_matrices(model, period_lattice(model)))
        assert np.max(np.abs(res.Xi[0] - rotation(2 * np.pi * w2).T)) <= 1e-8
        assert max(res.reduced_symplectic_residuals) <= 1e-8

    def test_commutation(self):
        model = make_cyclic_model(torus2_spec())
        res = monodromy_matrices(model, period_lattice(model))
        assert res.commutation_residuals.max() <= 1e-7

    def test_intertwining_on_sigma_vectors(self, rng):
        model = make_cyclic_model(torus2_spec())
        res = reduced_monodromy(model, monodromy_matrices(model, period_lattice(model)))
        fr = res.frame
        for _ in range(20):
            v = fr.sigma_basis @ rng.standard_normal(fr.sigma_basis.shape[1])
            for G, X in zip(res.G, res.Xi):
                assert np.linalg.norm(fr.project(G @ v) - X @ fr.project(v)) <= 1e-8

    def test_base_point_independence(self, rng):
        model = make_cyclic_model(torus2_spec())
        lat = period_lattice(model)
        ref = reduced_monodromy(model, monodromy_matrices(model, lat))
        for _ in range(3):
            t = rng.uniform(-2, 2, size=2)
            Z, _ = compose_flows(model, t, model.base_point[None, :], with_tangent=False)
            other = reduced_monodromy(model, monodromy_matrices(model, lat, base_point=Z[0]))
            for A, B in zip(ref.Xi, other.Xi):
                ea, eb = np.sort_complex(np.linalg.eigvals(A)), np.sort_complex(np.linalg.eigvals(B))
                assert np.max(np.abs(ea - eb)) <= 1e-7
                assert np.allclose(np.poly(A), np.poly(B), atol=1e-7)

    def test_resymplectize_keeps_result(self):
        model = make_cyclic_model(harmonic_spec())
        lat = period_lattice(model)
        a = monodromy_matrices(model, lat).G[0]
        b = monodromy_matrices(model, lat, resymplectize=True).G[0]
        assert np.max(np.abs(a - b)) <= 1e-10
        assert symplectic_residual(model.space, b) <= symplectic_residual(model.space, a) + 1e-15


class TestInvolution:
    def test_cyclic_pairs_vanish(self, rng):
        model = make_cyclic_model(torus2_spec())
        samples = model.torus_chart(rng.uniform(0, 2 * np.pi, (50, 2))) + 0.1 * rng.standard_normal((50, 6))
        assert involution_check(model, samples) <= 1e-12

    def test_theta_dependent_model(self):
        # adding 0.3 sin(theta_2) to H breaks involution with I_2: {H, I_2} = 0.3 cos(theta_2)
        model = make_cyclic_model(torus2_spec())
        H, I2 = model.functions

        def grad(z):
            g = H.gradient(z).copy()
            g[:, 1] += 0.3 * np.cos(z[:, 1])
            return g

        broken = Observable(lambda z: H.value(z) + 0.3 * np.sin(z[:, 1]), grad, H.hessian)
        pair = HamiltonianModel(3, 2, [broken, I2], model.base_point, model.angle_mask)
        samples = model.torus_chart(np.column_stack([np.zeros(5), np.linspace(0, 1, 5)]))
        assert involution_check(pair, samples) == pytest.approx(0.3)
        assert involution_check(model, samples) == 0.0


def _action(n, i):
    g = np.zeros(2 * n)
    g[n + i] = 1.0
    return Observable(lambda z: z @ g, lambda z: np.broadcast_to(g, z.shape), lambda z: np.zeros((z.shape[0],) + (2 * n,) * 2))


def test_action_pair_exact_zero():
    A, B = _action(3, 0), _action(3, 1)
    m = HamiltonianModel(3, 2, [A, B], np.zeros(6), np.zeros(6, bool))
    assert involution_check(m, np.random.default_rng(0).standard_normal((10, 6))) == 0.0


def test_trajectory_advances_angle_and_csv(tmp_path):
    spec = harmonic_spec()
    model = make_cyclic_model(spec)
    rows = trajectory(model, 0, 2.0, samples=8)
    assert rows.shape == (9, 5)
    assert np.allclose(rows[:, 1], rows[:, 0], atol=1e-12)  # theta = omega_1 t with omega_1 = 1
    assert np.allclose(rows[:, 2:], pack(spec)[1:], atol=1e-12)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, rows, model.n)
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["t", "q1", "q2", "p1", "p2"] and len(data) == 10
    assert float(data[-1][0]) == pytest.approx(2.0)


def test_flow_batches_match_single(rng):
    model = make_cyclic_model(harmonic_spec())
    Z = model.base_point + 0.1 * rng.standard_normal((4, 4))
    Zb, Yb = flow(model, 0, 1.3, Z)
    for i in range(4):
        z, Y = integrate_variational(model, 0, 1.3, Z[i])
        assert np.allclose(z, Zb[i], atol=1e-14) and np.allclose(Y, Yb[i], atol=1e-14)
