import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from germkit.errors import ConsistencyError, ContainmentError, DimensionError, InvarianceError, PreconditionError, RankError
from germkit.samples import embed_blocks, random_symplectic, rotation
from germkit.symcore import (
    Subspace,
    SymplecticSpace,
    Tolerances,
    classify_subspace,
    dissipativity_margin,
    form_matrix,
    form_value,
    is_dissipative,
    is_symplectic,
    krein_value,
    quotient_frame,
    reduce_operator,
    subspace_distance,
    symplectic_gram_schmidt,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def complex_vectors(dim):
    return st.tuples(arrays(float, dim, elements=finite), arrays(float, dim, elements=finite)).map(
        lambda t: t[0] + 1j * t[1]
    )


def e(space, name):
    """Standard basis vector such as 'q1' or 'p2'."""
    v = np.zeros(space.dim)
    i = int(name[1:]) - 1
    v[i if name[0] == "q" else space.n + i] = 1.0
    return v


class TestSymplecticSpace:
    def test_J_is_antisymmetric_and_inverts_the_form(self):
        sp = SymplecticSpace(3)
        assert np.allclose(sp.J.T, -sp.J)
        rng = np.random.default_rng(0)
        x, a = rng.standard_normal(6), rng.standard_normal(6)
        # omega(x, J a) = a(x)
        assert np.isclose(x @ sp.omega @ (sp.J @ a), a @ x)

    def test_form_matrix_full_rank(self):
        assert np.linalg.matrix_rank(SymplecticSpace(4).omega) == 8

    def test_rejects_bad_half_dimension(self):
        with pytest.raises(DimensionError):
            SymplecticSpace(0)


class TestFormValue:
    def test_standard_pair(self, space1):
        assert form_value(space1, [1, 0], [0, 1]) == 1

    def test_hand_expansion(self, space1):
        assert form_value(space1, [1, 1j], [2, 0]) == -2j

    def test_self_pairing_vanishes(self, space2, rng):
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert form_value(space2, x, x) == 0

    def test_dimension_mismatch(self, space1):
        with pytest.raises(DimensionError):
            form_value(space1, [1, 0, 0], [0, 1])

    @given(complex_vectors(4), complex_vectors(4))
    def test_antisymmetry(self, x, y):
        sp = SymplecticSpace(2)
        a, b = form_value(sp, x, y), form_value(sp, y, x)
        assert abs(a + b) <= 1e-12 * max(1.0, np.linalg.norm(x) * np.linalg.norm(y))

    @given(complex_vectors(4), complex_vectors(4), complex_vectors(4), finite, finite, finite, finite)
    def test_bilinearity(self, x, y, z, ar, ai, br, bi):
        sp = SymplecticSpace(2)
        a, b = complex(ar, ai), complex(br, bi)
        lhs = form_value(sp, a * x + b * y, z)
        rhs = a * form_value(sp, x, z) + b * form_value(sp, y, z)
        scale = (abs(a) * np.linalg.norm(x) + abs(b) * np.linalg.norm(y) + 1) * np.linalg.norm(z)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, scale)


class TestKreinValue:
    def test_real_vector(self, space2):
        assert krein_value(space2, [1.0, 2.0, -3.0, 0.5]) == 0

    def test_positive_line(self, space1):
        assert krein_value(space1, [1, -1j]) == pytest.approx(1.0)

    def test_negative_line(self, space1):
        assert krein_value(space1, [1, 1j]) == pytest.approx(-1.0)

    def test_zero_vector(self, space1):
        assert krein_value(space1, [0, 0]) == 0

    @given(complex_vectors(6))
    def test_always_real(self, x):
        sp = SymplecticSpace(3)
        v = form_value(sp, x, x.conj()) / 2j
        assert abs(v.imag) <= 1e-12 * max(1.0, np.linalg.norm(x) ** 2)
        krein_value(sp, x)


class TestClassifySubspace:
    def test_real_lagrangian(self):
        sp = SymplecticSpace(2)
        c = classify_subspace(sp, np.column_stack([e(sp, "q1"), e(sp, "q2")]))
        assert c.lagrangian and not c.positive

    def test_positive_line(self, space1):
        c = classify_subspace(space1, np.array([[1], [-1j]]))
        assert c.lagrangian and c.positive and not c.negative

    def test_full_space_not_isotropic(self, space2):
        assert not classify_subspace(space2, np.eye(4)).isotropic

    def test_negative_line(self, space1):
        c = classify_subspace(space1, np.array([[1], [1j]]))
        assert c.negative and not c.positive


class TestDissipative:
    def test_positive_completion(self, space2):
        sp = space2
        tangent = e(sp, "q1")[:, None]
        B = np.column_stack([e(sp, "q1"), e(sp, "q2") - 1j * e(sp, "p2")])
        assert is_dissipative(sp, B, tangent)
        # margins are measured on unit vectors: |q2 - i p2|^2 = 2
        assert dissipativity_margin(sp, B, tangent) == pytest.approx(0.5)

    def test_real_completion_is_not(self, space2):
        sp = space2
        B = np.column_stack([e(sp, "q1"), e(sp, "q2")])
        assert not is_dissipative(sp, B, e(sp, "q1")[:, None])

    def test_negative_completion_is_not(self, space2):
        sp = space2
        B = np.column_stack([e(sp, "q1"), e(sp, "q2") + 1j * e(sp, "p2")])
        assert not is_dissipative(sp, B, e(sp, "q1")[:, None])
        assert dissipativity_margin(sp, B, e(sp, "q1")[:, None]) == pytest.approx(-0.5)

    def test_tangent_outside_raises(self, space2):
        sp = space2
        with pytest.raises(ContainmentError):
            is_dissipative(sp, e(sp, "q2")[:, None], e(sp, "q1")[:, None])


class TestSubspace:
    def test_rejects_dependent_span(self):
        with pytest.raises(RankError):
            Subspace(np.array([[1, 2], [1, 2]]))

    def test_rank_and_conjugate(self):
        S = Subspace(np.array([[1], [-1j]]))
        assert S.rank == 1
        assert np.allclose(S.conjugate().basis, [[1], [1j]])

    def test_basis_is_read_only(self):
        S = Subspace(np.eye(2))
        with pytest.raises(ValueError):
            S.basis[0, 0] = 5


class TestSubspaceDistance:
    def test_equal(self):
        assert subspace_distance(np.eye(4)[:, :2], np.eye(4)[:, :2] @ np.array([[1, 2], [3, 4]])) < 1e-15

    def test_orthogonal_lines(self):
        assert subspace_distance(np.array([[1], [0]]), np.array([[0], [1]])) == pytest.approx(1.0)

    def test_conjugate_lines(self):
        assert subspace_distance(np.array([[1], [-1j]]), np.array([[1], [1j]])) == pytest.approx(1.0)

    @given(st.integers(0, 2**32 - 1))
    def test_pseudometric(self, seed):
        rng = np.random.default_rng(seed)
        A, B, C = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)) for _ in range(3))
        ab, ba = subspace_distance(A, B), subspace_distance(B, A)
        assert subspace_distance(A, A) < 1e-12
        assert abs(ab - ba) < 1e-12
        assert ab <= subspace_distance(A, C) + subspace_distance(C, B) + 1e-12


class TestIsSymplectic:
    def test_identity(self, space2):
        assert is_symplectic(space2, np.eye(4))

    def test_rotations(self, space2):
        assert is_symplectic(space2, embed_blocks([rotation(0.3), rotation(2.0)]))

    def test_scaling_fails(self, space1):
        assert not is_symplectic(space1, 2 * np.eye(2))


class TestGramSchmidt:
    def test_darboux_pairs(self, rng):
        sp = SymplecticSpace(3)
        a, b = symplectic_gram_schmidt(sp, rng.standard_normal((6, 6)))
        assert np.allclose(form_matrix(sp, a, b), np.eye(3), atol=1e-10)
        assert np.allclose(form_matrix(sp, a), 0, atol=1e-10)
        assert np.allclose(form_matrix(sp, b), 0, atol=1e-10)

    def test_isotropic_candidates_rejected(self):
        sp = SymplecticSpace(2)
        with pytest.raises(RankError):
            symplectic_gram_schmidt(sp, np.eye(4)[:, :2])


class TestQuotientFrame:
    def test_single_momentum(self, space2):
        sp = space2
        fr = quotient_frame(sp, [e(sp, "p1")])
        assert np.allclose(fr.lambda_basis[:, 0], e(sp, "q1"))
        assert subspace_distance(fr.sigma_basis, np.column_stack([e(sp, "q1"), e(sp, "q2"), e(sp, "p2")])) < 1e-12
        assert np.allclose(fr.complement_basis, np.column_stack([e(sp, "q2"), e(sp, "p2")]))
        assert np.allclose(fr.reduced_form, SymplecticSpace(1).omega)

    def test_two_momenta(self):
        sp = SymplecticSpace(3)
        fr = quotient_frame(sp, [e(sp, "p1"), e(sp, "p2")])
        assert np.allclose(fr.complement_basis, np.column_stack([e(sp, "q3"), e(sp, "p3")]))

    def test_k_equal_n_rejected(self, space1):
        with pytest.raises(PreconditionError):
            quotient_frame(space1, [[0, 1]])

    def test_dependent_gradients(self):
        sp = SymplecticSpace(3)
        with pytest.raises(RankError):
            quotient_frame(sp, [e(sp, "p1"), 2 * e(sp, "p1")])

    def test_non_involutive_gradients(self):
        sp = SymplecticSpace(3)
        with pytest.raises(ConsistencyError):
            quotient_frame(sp, [e(sp, "p1"), e(sp, "q1")])

    def test_kernel_of_form_on_sigma_is_lambda(self, rng):
        sp = SymplecticSpace(3)
        fr = quotient_frame(sp, [e(sp, "p1") + 0.3 * e(sp, "p2"), e(sp, "p2")])
        M = form_matrix(sp, fr.sigma_basis)
        _, s, Vh = np.linalg.svd(M)
        kernel = fr.sigma_basis @ Vh[np.sum(s > 1e-10):].conj().T
        assert subspace_distance(kernel, fr.lambda_basis) < 1e-10
        assert np.linalg.matrix_rank(fr.reduced_form) == 2


class TestReduceOperator:
    def setup_method(self):
        self.sp = SymplecticSpace(2)
        self.frame = quotient_frame(self.sp, [e(self.sp, "p1")])

    def test_identity(self):
        d = reduce_operator(self.sp, np.eye(4), self.frame)
        assert np.allclose(d.xi_matrix, np.eye(2)) and np.allclose(d.tangential_coupling, 0)

    def test_rotation_block(self):
        G = embed_blocks([np.eye(2), rotation(0.8)])
        d = reduce_operator(self.sp, G, self.frame)
        assert np.allclose(d.xi_matrix, rotation(0.8), atol=1e-14)

    def test_tangent_coupling_discarded(self):
        G = np.eye(4)
        G[0, 1] = 0.7  # image of e_q2 picks up e_q1
        d = reduce_operator(self.sp, G, self.frame)
        assert np.allclose(d.xi_matrix, np.eye(2))
        assert np.abs(d.tangential_coupling).max() == pytest.approx(0.7)
        assert d.residual_off_sigma < 1e-14

    def test_flag_violation(self):
        G = embed_blocks([rotation(0.5), np.eye(2)])
        d = reduce_operator(self.sp, G, self.frame)
        assert d.residual_off_sigma > 0.1
        with pytest.raises(InvarianceError):
            reduce_operator(self.sp, G, self.frame, strict=True)

    def test_homomorphism(self):
        G1 = embed_blocks([np.eye(2), rotation(0.8)])
        G1[0, 1] = 0.3
        G2 = embed_blocks([np.eye(2), np.diag([2.0, 0.5])])
        x = lambda G: reduce_operator(self.sp, G, self.frame).xi_matrix
        assert np.allclose(x(G1 @ G2), x(G1) @ x(G2), atol=1e-12)


def _flag_preserving(seed):
    """Random symplectic map fixing e_q1 and the hyperplane p1 = 0 in R^6 (n = 3, k = 1)."""
    rng = np.random.default_rng(seed)
    sp = SymplecticSpace(3)
    fr = quotient_frame(sp, [e(sp, "p1")])
    # exp of a Hamiltonian generated by a quadratic form independent of q1 and p1 plus a p1-linear coupling
    Sym = np.zeros((6, 6))
    idx = [1, 2, 4, 5]
    A = rng.standard_normal((4, 4))
    Sym[np.ix_(idx, idx)] = (A + A.T) / 4
    c = rng.standard_normal(4) * 0.3
    Sym[3, idx] = Sym[idx, 3] = c  # p1 * (linear form in transverse variables)
    from scipy.linalg import expm

    return sp, fr, expm(sp.omega @ Sym)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_quotient_well_defined_under_tangent_shifts(seed):
    sp, fr, G = _flag_preserving(seed)
    rng = np.random.default_rng(seed + 1)
    theta = fr.sigma_basis @ rng.standard_normal(fr.sigma_basis.shape[1])
    tau = fr.lambda_basis @ rng.standard_normal(fr.k)
    assert np.allclose(fr.project(theta + tau), fr.project(theta), atol=1e-10)
    xi = reduce_operator(sp, G, fr, strict=True).xi_matrix
    assert np.allclose(fr.project(G @ (theta + tau)), xi @ fr.project(theta), atol=1e-10 * np.linalg.norm(G, 2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reduced_operator_preserves_reduced_form(seed):
    sp, fr, G = _flag_preserving(seed)
    assert is_symplectic(sp, G)
    xi = reduce_operator(sp, G, fr, strict=True).xi_matrix
    assert np.allclose(xi.T @ fr.reduced_form @ xi, fr.reduced_form, atol=1e-9)


def test_tolerances_replace_ignores_none():
    t = Tolerances().replace(tol_circle=1e-6, tol_rank=None)
    assert t.tol_circle == 1e-6 and t.tol_rank == Tolerances().tol_rank


def test_random_symplectic_is_symplectic(rng):
    assert is_symplectic(SymplecticSpace(3), random_symplectic(3, rng))
