"""Complexified symplectic linear algebra on C^{2n}.

Coordinates are ordered ``(q_1..q_n, p_1..p_n)`` and the standard form is
``omega(x, y) = x^T Omega y`` with ``Omega = [[0, I], [-I, 0]]``, so that
``omega(e_q, e_p) = 1`` (the form ``dq ^ dp``).  The form is extended to complex
vectors bilinearly, never sesquilinearly.

The Krein form ``h(x, y) = (1/2i) [x, conj(y)]`` is Hermitian; its Gram matrix on
the columns of ``V`` is ``(i/2) V^H Omega V`` (see :func:`krein_gram`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConsistencyError,
    ContainmentError,
    DimensionError,
    InvarianceError,
    PreconditionError,
    RankError,
)

FORM_CONVENTION = "qp-dq^dp"


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package.

    ``tol_rank`` is relative to the largest singular value, ``tol_cluster`` is
    relative to the spectral radius, ``tol_circle`` is absolute on ``||s| - 1|``.
    """

    tol_circle: float = 1e-8
    tol_cluster: float = 1e-7
    tol_rank: float = 1e-10
    tol_krein: float = 1e-9
    tol_symplectic: float = 1e-8
    tol_commute: float = 1e-8
    tol_invariance: float = 1e-8
    tol_return: float = 1e-8
    tol_marginal: float = 1e-5

    def replace(self, **changes) -> "Tolerances":
        fields = {**self.__dict__, **{k: v for k, v in changes.items() if v is not None}}
        return Tolerances(**fields)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class SymplecticSpace:
    """The standard symplectic space R^{2n} (and its complexification)."""

    n: int
    form_sign_convention: str = FORM_CONVENTION

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DimensionError(f"half-dimension must be a positive integer, got {self.n}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def omega(self) -> np.ndarray:
        """Matrix of the form: ``omega(x, y) = x @ omega @ y``."""
        n = self.n
        out = np.zeros((2 * n, 2 * n))
        out[:n, n:] = np.eye(n)
        out[n:, :n] = -np.eye(n)
        return out

    @property
    def J(self) -> np.ndarray:
        """Covector-to-vector isomorphism with ``omega(x, J a) = a(x)``.

        This is ``Omega^{-1} = -Omega``.  The Hamiltonian field used by the
        integrators is ``Omega @ grad F = -J dF`` (q' = F_p, p' = -F_q); both span
        the same line, which is all the germ construction depends on.
        """
        return -self.omega

    def hamiltonian_field(self, grad: np.ndarray) -> np.ndarray:
        """``Omega @ grad`` along the last axis (works on batches)."""
        grad = np.asarray(grad)
        n = self.n
        return np.concatenate([grad[..., n:], -grad[..., :n]], axis=-1)

    def check_vector(self, x, name: str = "x") -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"{name} must have length {self.dim}, got shape {x.shape}")
        return x

    def check_matrix(self, S, name: str = "matrix") -> np.ndarray:
        S = np.asarray(S)
        if S.shape != (self.dim, self.dim):
            raise DimensionError(f"{name} must be {self.dim}x{self.dim}, got shape {S.shape}")
        return S


def _as_columns(vectors) -> np.ndarray:
    """Accept a 2-D array of columns or a sequence of 1-D vectors."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    arr = np.array([np.asarray(v) for v in vectors], dtype=complex)
    if arr.ndim != 2:
        raise DimensionError("vectors must be 1-D arrays of equal length")
    return arr.T


def numerical_rank(M: np.ndarray, tol_rank: float = DEFAULT_TOL.tol_rank) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol_rank * s[0]))


def orthonormal_span(M: np.ndarray, tol_rank: float = DEFAULT_TOL.tol_rank) -> np.ndarray:
    """Orthonormal basis (columns) of the column span of ``M``."""
    if M.size == 0 or M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0:
        return np.zeros((M.shape[0], 0), dtype=M.dtype)
    r = int(np.sum(s > tol_rank * s[0]))
    return U[:, :r]


def null_space(M: np.ndarray, cutoff: float) -> np.ndarray:
    """Orthonormal basis of vectors ``v`` with ``||M v|| <= cutoff`` (absolute)."""
    _, s, Vh = np.linalg.svd(M)
    rank = int(np.sum(s > cutoff))
    return Vh[rank:].conj().T


@dataclass(frozen=True, eq=False)
class Subspace:
    """A complex subspace of C^{2n} given by linearly independent columns."""

    basis: np.ndarray
    tol_rank: float = field(default=DEFAULT_TOL.tol_rank, repr=False)

    def __post_init__(self):
        B = np.array(self.basis, dtype=complex)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise DimensionError("basis must be a 2-D array of column vectors")
        if B.shape[1] and numerical_rank(B, self.tol_rank) != B.shape[1]:
            raise RankError(f"{B.shape[1]} basis vectors span a space of lower rank")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @classmethod
    def from_vectors(cls, vectors, tol_rank: float = DEFAULT_TOL.tol_rank) -> "Subspace":
        return cls(_as_columns(vectors), tol_rank)

    @classmethod
    def span(cls, M, tol_rank: float = DEFAULT_TOL.tol_rank) -> "Subspace":
        """Span of possibly dependent columns, stored with an orthonormal basis."""
        return cls(orthonormal_span(np.asarray(M, dtype=complex), tol_rank), tol_rank)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def conjugate(self) -> "Subspace":
        return Subspace(self.basis.conj(), self.tol_rank)

    def orthonormal(self) -> np.ndarray:
        if self.rank == 0:
            return self.basis.copy()
        Q, _ = np.linalg.qr(self.basis)
        return Q

    def projector(self) -> np.ndarray:
        Q = self.orthonormal()
        return Q @ Q.conj().T

    def residual(self, x: np.ndarray) -> float:
        """Relative distance of ``x`` from the subspace."""
        x = np.asarray(x, dtype=complex)
        nx = np.linalg.norm(x)
        if nx == 0:
            return 0.0
        Q = self.orthonormal()
        return float(np.linalg.norm(x - Q @ (Q.conj().T @ x)) / nx)

    def __len__(self) -> int:
        return self.rank


def _basis_of(A) -> np.ndarray:
    return A.basis if isinstance(A, Subspace) else np.asarray(A, dtype=complex)


# ---------------------------------------------------------------------------
# forms


def form_value(space: SymplecticSpace, x, y) -> complex:
    """Complex-bilinear extension ``[x, y]`` of the standard form."""
    x = space.check_vector(x, "x")
    y = space.check_vector(y, "y")
    n = space.n
    return complex(x[:n] @ y[n:] - x[n:] @ y[:n])


def form_matrix(space: SymplecticSpace, X, Y=None) -> np.ndarray:
    """Matrix ``[x_i, y_j]`` for the columns of ``X`` and ``Y``."""
    X = np.asarray(X)
    Y = X if Y is None else np.asarray(Y)
    if X.shape[0] != space.dim or Y.shape[0] != space.dim:
        raise DimensionError(f"column vectors must have length {space.dim}")
    n = space.n
    return X[:n].T @ Y[n:] - X[n:].T @ Y[:n]


def krein_value(space: SymplecticSpace, x) -> float:
    """``(1/2i) [x, conj(x)]``, which is real for every complex ``x``."""
    x = np.asarray(space.check_vector(x), dtype=complex)
    v = form_value(space, x, x.conj()) / 2j
    scale = max(1.0, float(np.vdot(x, x).real))
    assert abs(v.imag) <= 1e-12 * scale, f"Krein value has imaginary part {v.imag}"
    return float(v.real)


def krein_gram(space: SymplecticSpace, V) -> np.ndarray:
    """Hermitian Gram matrix ``K`` of the Krein form: ``h(Va, Vb) = b^H K a``."""
    V = np.asarray(V, dtype=complex)
    if V.shape[0] != space.dim:
        raise DimensionError(f"column vectors must have length {space.dim}")
    K = 0.5j * (V.conj().T @ (space.omega @ V))
    return 0.5 * (K + K.conj().T)


def is_symplectic(space: SymplecticSpace, S, tol: float = DEFAULT_TOL.tol_symplectic) -> bool:
    """``S^T Omega S == Omega`` up to ``tol * max(1, ||S||^2)``."""
    S = space.check_matrix(S, "S")
    return symplectic_residual(space, S) <= tol * max(1.0, np.linalg.norm(S, 2) ** 2)


def symplectic_residual(space: SymplecticSpace, S) -> float:
    Om = space.omega
    return float(np.linalg.norm(S.T @ Om @ S - Om, 2))


@dataclass(frozen=True)
class SubspaceClass:
    isotropic: bool
    lagrangian: bool
    positive: bool
    negative: bool
    isotropy_residual: float
    krein_min: float
    krein_max: float


def classify_subspace(space: SymplecticSpace, B, tol: float = DEFAULT_TOL.tol_krein) -> SubspaceClass:
    """Isotropy, Lagrangian property and Krein definiteness of a subspace.

    The tests run on an orthonormal basis of the span so that they do not
    depend on how the spanning vectors happen to be scaled.
    """
    sub = B if isinstance(B, Subspace) else Subspace.from_vectors(B)
    if sub.ambient_dim != space.dim:
        raise DimensionError(f"subspace lives in C^{sub.ambient_dim}, expected C^{space.dim}")
    if sub.rank == 0:
        raise PreconditionError("subspace must be nonempty")
    Q = sub.orthonormal()
    iso_res = float(np.max(np.abs(form_matrix(space, Q))))
    isotropic = iso_res <= tol
    ev = np.linalg.eigvalsh(krein_gram(space, Q))
    return SubspaceClass(
        isotropic=isotropic,
        lagrangian=isotropic and sub.rank == space.n,
        positive=bool(ev[0] > tol),
        negative=bool(ev[-1] < -tol),
        isotropy_residual=iso_res,
        krein_min=float(ev[0]),
        krein_max=float(ev[-1]),
    )


def dissipativity_margin(space: SymplecticSpace, B, tangent, tol: float = 1e-8) -> float:
    """Smallest Krein eigenvalue on ``B`` modulo ``tangent`` (``inf`` if B = tangent).

    The quotient is represented by the Euclidean-orthogonal complement of the
    tangent inside ``B``, orthonormalised, so the value is a scale-free margin.
    """
    Bm = _basis_of(B)
    Tm = _basis_of(tangent)
    Q = orthonormal_span(Bm)
    T = orthonormal_span(Tm) if Tm.size else np.zeros((space.dim, 0), dtype=complex)
    if T.shape[1]:
        outside = np.linalg.norm(T - Q @ (Q.conj().T @ T), axis=0)
        if np.max(outside) > tol:
            raise ContainmentError(
                f"tangent vector lies outside the subspace (residual {np.max(outside):.3e})"
            )
        W = Q - T @ (T.conj().T @ Q)
    else:
        W = Q
    W = orthonormal_span(W, 1e-8)
    if W.shape[1] == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(krein_gram(space, W))[0])


def is_dissipative(space: SymplecticSpace, B, tangent, tol: float = DEFAULT_TOL.tol_krein) -> bool:
    """Every vector of ``B`` with a component outside ``tangent`` is Krein-positive."""
    return dissipativity_margin(space, B, tangent) > tol


def subspace_distance(A, B) -> float:
    """Spectral norm of the difference of the orthogonal projectors onto A and B."""
    PA = Subspace.span(_basis_of(A)).projector()
    PB = Subspace.span(_basis_of(B)).projector()
    if PA.shape != PB.shape:
        raise DimensionError("subspaces live in different ambient spaces")
    return float(np.linalg.norm(PA - PB, 2))


# ---------------------------------------------------------------------------
# Darboux bases and symplectic quotients


def symplectic_gram_schmidt(space: SymplecticSpace, candidates: np.ndarray, tol: float = 1e-10):
    """Darboux basis ``(a_i, b_i)`` with ``[a_i, b_j] = delta_ij`` from candidate columns.

    Pivoting is deterministic: ``a`` is the remaining candidate of largest norm
    (earliest on ties) and ``b`` the one maximising ``|[a, c]|``.  Candidates
    must span a symplectic subspace.
    """
    C = [np.array(c, dtype=complex) for c in np.asarray(candidates).T]
    if len(C) % 2:
        raise RankError("a symplectic subspace has even dimension")
    A, Bv = [], []
    scale = max((np.linalg.norm(c) for c in C), default=1.0)
    while C:
        norms = [np.linalg.norm(c) for c in C]
        ia = int(np.argmax(norms))
        a = C.pop(ia)
        a = a / np.linalg.norm(a)
        pairings = [abs(form_value(space, a, c)) for c in C]
        if not pairings or max(pairings) <= tol * scale:
            raise RankError("candidates do not span a symplectic subspace")
        ib = int(np.argmax(pairings))
        b = C.pop(ib)
        b = b / form_value(space, a, b)
        C = [c - form_value(space, c, b) * a + form_value(space, c, a) * b for c in C]
        C = [c for c in C if np.linalg.norm(c) > tol * scale]
        A.append(a)
        Bv.append(b)
    return np.array(A).T, np.array(Bv).T


def _pivot_columns(M: np.ndarray, r: int) -> list[int]:
    """Indices of ``r`` well-conditioned columns (QR with column pivoting), sorted."""
    _, _, piv = sla.qr(M, mode="economic", pivoting=True)
    return sorted(int(i) for i in piv[:r])


@dataclass(frozen=True, eq=False)
class QuotientFrame:
    """Bases realising ``Gamma_m = T_m Sigma / T_m Lambda`` inside C^{2n}.

    ``complement_basis`` is ordered ``(a_1..a_m, b_1..b_m)`` (a Darboux basis), so
    ``reduced_form`` is the standard ``2m x 2m`` form up to rounding.
    """

    space: SymplecticSpace
    sigma_basis: np.ndarray
    lambda_basis: np.ndarray
    complement_basis: np.ndarray
    reduced_form: np.ndarray
    projection_coeffs: np.ndarray

    @property
    def k(self) -> int:
        return self.lambda_basis.shape[1]

    @property
    def reduced_space(self) -> SymplecticSpace:
        return SymplecticSpace(self.complement_basis.shape[1] // 2)

    def decompose(self, w: np.ndarray):
        """Split Sigma-vectors (columns) into tangent and complement coordinates."""
        c = self.projection_coeffs @ w
        return c[: self.k], c[self.k :]

    def project(self, w: np.ndarray) -> np.ndarray:
        """The canonical map ``Pi`` in complement coordinates."""
        return self.decompose(w)[1]

    def lift(self, coords: np.ndarray) -> np.ndarray:
        """Complement representatives of quotient coordinates."""
        return self.complement_basis @ coords

    def off_sigma(self, w: np.ndarray) -> np.ndarray:
        """Component of each column of ``w`` outside ``T_m Sigma``."""
        B = np.hstack([self.lambda_basis, self.complement_basis])
        return w - B @ (self.projection_coeffs @ w)


def quotient_frame(space: SymplecticSpace, gradients, tol: float = DEFAULT_TOL.tol_rank) -> QuotientFrame:
    """Build the quotient frame at a torus point from the k gradients ``dF_j``."""
    D = np.atleast_2d(np.asarray(gradients, dtype=float))
    k = D.shape[0]
    if D.shape[1] != space.dim:
        raise DimensionError(f"gradients must have length {space.dim}")
    if not 1 <= k < space.n:
        raise PreconditionError(f"need 1 <= k < n, got k={k}, n={space.n}")
    if numerical_rank(D, tol) != k:
        raise RankError(f"the {k} gradients are linearly dependent")

    Qd, _ = np.linalg.qr(D.T)
    P_sigma = np.eye(space.dim) - Qd @ Qd.T
    lam = space.hamiltonian_field(D).T
    brackets = D @ lam
    if np.max(np.abs(brackets)) > 1e-8 * max(1.0, np.linalg.norm(D) ** 2):
        raise ConsistencyError(
            f"Hamiltonian fields leave T Sigma: max bracket {np.max(np.abs(brackets)):.3e}"
        )

    sigma = P_sigma[:, _pivot_columns(P_sigma, space.dim - k)]
    Ql, _ = np.linalg.qr(lam)
    resid = sigma - Ql @ (Ql.T @ sigma)
    m2 = 2 * (space.n - k)
    cand = resid[:, _pivot_columns(resid, m2)]
    a, b = symplectic_gram_schmidt(space, cand)
    comp = np.hstack([a, b]).real
    red = form_matrix(space, comp).real

    B = np.hstack([lam, comp])
    if numerical_rank(B, tol) != space.dim - k:
        raise ConsistencyError("lambda and complement bases are not independent")
    coeffs = np.linalg.pinv(B)
    return QuotientFrame(space, sigma, lam, comp, red, coeffs)


@dataclass(frozen=True, eq=False)
class ReducedOperatorData:
    xi_matrix: np.ndarray
    tangential_coupling: np.ndarray
    residual_off_sigma: float


def reduce_operator(
    space: SymplecticSpace,
    G,
    frame: QuotientFrame,
    tol: float = DEFAULT_TOL.tol_invariance,
    strict: bool = False,
) -> ReducedOperatorData:
    """Matrix of the operator induced by ``G`` on the quotient, in complement coordinates."""
    G = space.check_matrix(G, "G")
    gscale = max(1.0, float(np.linalg.norm(G, 2)))
    GS = G @ frame.sigma_basis
    res_sigma = np.linalg.norm(frame.off_sigma(GS), axis=0) / np.linalg.norm(frame.sigma_basis, axis=0)
    GL = G @ frame.lambda_basis
    Ql, _ = np.linalg.qr(frame.lambda_basis)
    res_lambda = np.linalg.norm(GL - Ql @ (Ql.T @ GL), axis=0) / np.linalg.norm(frame.lambda_basis, axis=0)
    residual = float(max(res_sigma.max(), res_lambda.max()) / gscale)
    if strict and residual > tol:
        raise InvarianceError(f"G does not preserve T Lambda in T Sigma (residual {residual:.3e})")
    tangent, xi = frame.decompose(G @ frame.complement_basis)
    if np.isrealobj(G):
        xi, tangent = xi.real, tangent.real
    return ReducedOperatorData(xi, tangent, residual)
