"""Positive Lagrangian invariant (P.L.I.) subspaces of commuting stable families.

The family is split into joint eigenspaces by recursive refinement: cluster the
first operator, restrict the next one to each block (commutation keeps the
blocks invariant), cluster again, and so on.  A P.L.I. subspace is then
assembled cluster by cluster:

* a non-real joint eigenvalue tuple contributes the Krein-positive part of its
  eigenspace, and its conjugate partner the Krein-positive part of the partner;
* a tuple of +-1 entries contributes ``span{a_i - i b_i}`` for a Darboux basis
  ``(a_i, b_i)`` of the real points of its eigenspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CommutationError, DimensionError, KreinDegeneracyError, RefusalError, StabilityError
from .spectral import classify_stability, cluster_eigenspace, schur_clusters, sort_key
from .symcore import (
    DEFAULT_TOL,
    Subspace,
    SymplecticSpace,
    Tolerances,
    _pivot_columns,
    form_matrix,
    krein_gram,
    orthonormal_span,
    subspace_distance,
    symplectic_gram_schmidt,
)


@dataclass(frozen=True, eq=False)
class JointCluster:
    values: tuple[complex, ...]
    eigenbasis: Subspace
    is_self_conjugate: bool
    krein_signature: tuple[int, int, int]

    @property
    def dim(self) -> int:
        return self.eigenbasis.rank

    @property
    def definite(self) -> bool:
        pos, neg, zero = self.krein_signature
        return zero == 0 and (pos == 0 or neg == 0)

    def label(self) -> str:
        return "(" + ", ".join(f"{v.real:.6g}{v.imag:+.6g}j" for v in self.values) + ")"


@dataclass(frozen=True, eq=False)
class UniquenessCertificate:
    unique: bool
    strong_criterion: bool
    non_rigid: list[str]
    reasons: list[str]

    def __bool__(self) -> bool:
        return self.unique

    @property
    def discrepancy(self) -> bool:
        return self.unique != self.strong_criterion


@dataclass(frozen=True, eq=False)
class PLIResult:
    subspace: Subspace
    per_cluster_choice: list[dict]
    unique: bool
    certificate: UniquenessCertificate
    clusters: list[JointCluster] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subspace": self.subspace.basis,
            "per_cluster_choice": self.per_cluster_choice,
            "unique": self.unique,
            "strong_criterion": self.certificate.strong_criterion,
            "certificate": self.certificate.reasons,
        }


@dataclass(frozen=True)
class PLIVerification:
    isotropy_residual: float
    min_krein: float
    invariance_residuals: list[float]
    dimension: int
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _tuple_key(values) -> tuple:
    return tuple(sort_key(v) for v in values)


def _check_family(space: SymplecticSpace, ops, tol: Tolerances) -> list[np.ndarray]:
    if len(ops) == 0:
        raise DimensionError("empty operator family")
    mats = [space.check_matrix(np.asarray(A), f"operator {j}") for j, A in enumerate(ops)]
    for j, A in enumerate(mats):
        rep = classify_stability(space, A, tol)
        if not rep.is_stable:
            raise StabilityError(f"operator {j} is unstable: " + "; ".join(rep.reasons))
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            A, B = mats[i], mats[j]
            res = np.linalg.norm(A @ B - B @ A, 2)
            if res > tol.tol_commute * np.linalg.norm(A, 2) * np.linalg.norm(B, 2):
                raise CommutationError(f"operators {i} and {j} do not commute (||AB - BA|| = {res:.3e})")
    return mats


def joint_decompose(space: SymplecticSpace, ops, tol: Tolerances = DEFAULT_TOL) -> list[JointCluster]:
    """Joint eigenspaces of a commuting family of stable symplectic operators."""
    mats = _check_family(space, ops, tol)
    real_family = all(np.isrealobj(A) or not np.any(np.imag(A)) for A in mats)

    blocks = [((), np.eye(space.dim, dtype=complex))]
    for j, A in enumerate(mats):
        refined = []
        for values, V in blocks:
            M = V.conj().T @ A @ V
            leak = np.linalg.norm(A @ V - V @ M, 2)
            if leak > 1e-8 * max(1.0, np.linalg.norm(A, 2)):
                raise CommutationError(f"operator {j} does not preserve a joint eigenspace (leak {leak:.3e})")
            eig_scale = max(1.0, float(np.max(np.abs(np.linalg.eigvals(M)))))
            T, Z, eig, groups = schur_clusters(M, tol.tol_cluster * eig_scale)
            for g in groups:
                center, members, N, geo = cluster_eigenspace(T, Z, eig, g, tol.tol_rank, np.linalg.norm(M, 2))
                if geo != len(members):
                    raise StabilityError(f"operator {j} is not semisimple on a joint eigenspace")
                refined.append((values + (center,), V @ N))
        blocks = refined

    total = sum(V.shape[1] for _, V in blocks)
    if total != space.dim:
        raise DimensionError(f"joint eigenspaces have total dimension {total}, expected {space.dim}")

    radius = tol.tol_cluster * 10
    for i, (values, V) in enumerate(blocks):
        if all(abs(v.imag) <= radius for v in values):
            blocks[i] = (tuple(complex(v.real, 0.0) for v in values), V)

    if real_family:
        # the lower member of each conjugate pair is replaced by the conjugate of the upper
        pending: list[tuple] = []
        out = []
        for values, V in sorted(blocks, key=lambda b: _tuple_key(b[0])):
            if all(v.imag == 0 for v in values):
                out.append((values, V))
                continue
            match = next(
                (i for i, (pv, _) in enumerate(pending) if np.allclose(np.conj(pv), values, atol=radius)), None
            )
            if match is None:
                pending.append((values, V))
                continue
            pv, PV = pending.pop(match)
            if PV.shape[1] != V.shape[1]:
                raise DimensionError(f"conjugate joint eigenspaces differ in dimension at {values}")
            out.append((pv, PV))
            out.append((tuple(complex(v) for v in np.conj(pv)), PV.conj()))
        if pending:
            raise DimensionError("joint eigenvalue tuples without conjugate partners")
        blocks = out

    clusters = []
    for values, V in blocks:
        Q = orthonormal_span(V)
        ev = np.linalg.eigvalsh(krein_gram(space, Q))
        pos = int(np.sum(ev > tol.tol_krein))
        neg = int(np.sum(ev < -tol.tol_krein))
        clusters.append(
            JointCluster(
                values=tuple(values),
                eigenbasis=Subspace(Q),
                is_self_conjugate=all(v.imag == 0 for v in values),
                krein_signature=(pos, neg, len(ev) - pos - neg),
            )
        )
    clusters.sort(key=lambda c: _tuple_key(c.values))
    return clusters


def _conjugate_index(clusters, i, radius):
    target = np.conj(clusters[i].values)
    for j, c in enumerate(clusters):
        if j != i and np.allclose(c.values, target, atol=radius):
            return j
    raise DimensionError(f"no conjugate partner for joint eigenvalue {clusters[i].label()}")


def _krein_split(space, V, tol: float):
    """Krein-positive and Krein-negative parts of ``span(V)`` plus their eigenvalues."""
    Q = orthonormal_span(V)
    ev, U = np.linalg.eigh(krein_gram(space, Q))
    if np.any(np.abs(ev) <= tol):
        raise KreinDegeneracyError(
            f"degenerate Krein form on a non-real joint eigenspace (eigenvalues {ev}); tolerance breakdown"
        )
    pos = ev > 0
    return Q @ U[:, pos], Q @ U[:, ~pos], ev[pos], ev[~pos]


def _real_darboux(space, V):
    """Darboux basis of the real points of a conjugation-closed subspace."""
    Q = orthonormal_span(V)
    P = (Q @ Q.conj().T).real
    cand = P[:, _pivot_columns(P, Q.shape[1])]
    a, b = symplectic_gram_schmidt(space, cand)
    return a.real, b.real


def _assemble(space, ops, clusters, tol: Tolerances, witness: bool = False, squeeze: float = 1.25):
    radius = tol.tol_cluster * 10
    real_family = all(np.isrealobj(A) or not np.any(np.imag(A)) for A in ops)
    columns, choices = [], []
    done = set()
    perturbed = False
    for i, c in enumerate(clusters):
        if i in done:
            continue
        if c.is_self_conjugate:
            a, b = _real_darboux(space, c.eigenbasis.basis)
            if witness and not perturbed:
                a[:, 0] *= squeeze
                b[:, 0] /= squeeze
                perturbed = True
                kind = "darboux-squeezed"
            else:
                kind = "darboux"
            r = a - 1j * b
            h = np.diag(krein_gram(space, r)).real
            assert np.allclose(h, 1.0, atol=1e-8), f"Darboux recipe gave Krein values {h}"
            columns.append(r)
            choices.append({"values": list(c.values), "kind": kind, "dim": r.shape[1]})
            done.add(i)
            continue

        j = _conjugate_index(clusters, i, radius)
        done.update({i, j})
        P, N, lp, ln = _krein_split(space, c.eigenbasis.basis, tol.tol_krein)
        if witness and not perturbed and P.shape[1] and N.shape[1]:
            t = 0.5 * np.sqrt(lp[0] / -ln[0])
            s = t * (-ln[0]) / lp[0]
            p0, n0 = P[:, 0].copy(), N[:, 0].copy()
            P[:, 0] = p0 + t * n0
            N[:, 0] = n0 + s * p0
            perturbed = True
            kind = "krein-mixed"
        else:
            kind = "krein-positive"
        if real_family:
            Pc = N.conj()
        else:
            Pc, _, _, _ = _krein_split(space, clusters[j].eigenbasis.basis, tol.tol_krein)
        columns.extend([P, Pc])
        choices.append(
            {
                "values": list(c.values),
                "kind": kind,
                "dim": P.shape[1],
                "partner": list(clusters[j].values),
                "partner_dim": Pc.shape[1],
            }
        )
    R = np.hstack([col for col in columns if col.shape[1]])
    if R.shape[1] != space.n:
        raise DimensionError(f"assembled subspace has dimension {R.shape[1]}, expected {space.n}")
    return Subspace(R), choices, perturbed


def uniqueness_check(space: SymplecticSpace, ops, clusters=None, tol: Tolerances = DEFAULT_TOL) -> UniquenessCertificate:
    """Rigidity test for uniqueness of the common P.L.I. subspace.

    Rigid means: every non-real joint eigenspace is Krein-definite and there is
    no joint eigenspace with all eigenvalues +-1.  The sufficient operator-level
    criterion (some member strongly stable) is reported alongside.
    """
    if clusters is None:
        clusters = joint_decompose(space, ops, tol)
    non_rigid = []
    for c in clusters:
        if c.is_self_conjugate:
            non_rigid.append(f"self-conjugate joint eigenspace {c.label()} of dimension {c.dim}")
        elif not c.definite:
            non_rigid.append(f"indefinite Krein signature {c.krein_signature} at {c.label()}")
    strong = [
        j for j, A in enumerate(ops) if classify_stability(space, np.asarray(A), tol).stability.value == "StronglyStable"
    ]
    reasons = list(non_rigid)
    if strong:
        reasons.append(f"strongly stable operators: {strong}")
    else:
        reasons.append("no operator in the family is strongly stable")
    unique = not non_rigid
    if unique != bool(strong):
        reasons.append("rigidity and the strong-stability criterion disagree")
    return UniquenessCertificate(unique, bool(strong), non_rigid, reasons)


def pli_common(space: SymplecticSpace, ops, tol: Tolerances = DEFAULT_TOL) -> PLIResult:
    """A common positive Lagrangian invariant subspace of a commuting stable family."""
    clusters = joint_decompose(space, ops, tol)
    R, choices, _ = _assemble(space, ops, clusters, tol)
    cert = uniqueness_check(space, ops, clusters, tol)
    return PLIResult(R, choices, cert.unique, cert, clusters)


def pli_witness(space: SymplecticSpace, ops, tol: Tolerances = DEFAULT_TOL, squeeze: float = 1.25) -> PLIResult:
    """A second common P.L.I. subspace, different from :func:`pli_common`'s.

    The first non-rigid cluster is re-chosen: a +-1 block gets its first Darboux
    pair squeezed by ``squeeze`` (unitary rotations would give the same line),
    an indefinite block gets its first positive vector mixed with a negative one.
    """
    clusters = joint_decompose(space, ops, tol)
    cert = uniqueness_check(space, ops, clusters, tol)
    if cert.unique:
        raise RefusalError("the common P.L.I. subspace is unique; no second one exists")
    R, choices, perturbed = _assemble(space, ops, clusters, tol, witness=True, squeeze=squeeze)
    assert perturbed
    return PLIResult(R, choices, False, cert, clusters)


def verify_pli(space: SymplecticSpace, ops, R, tol: float = 1e-8) -> PLIVerification:
    """Residuals of the P.L.I. properties for a candidate subspace.

    Isotropy is measured on an orthonormal basis; the Krein eigenvalues are
    those of the Gram matrix of the basis as given.
    """
    sub = R if isinstance(R, Subspace) else Subspace.from_vectors(R)
    B = sub.basis
    Q = sub.orthonormal()
    iso = float(np.max(np.abs(form_matrix(space, Q))))
    kmin = float(np.linalg.eigvalsh(krein_gram(space, B))[0])
    inv = [subspace_distance(np.asarray(A) @ B, B) for A in ops]
    passed = iso <= tol and kmin > tol and all(r <= tol for r in inv) and sub.rank == space.n
    return PLIVerification(iso, kmin, inv, sub.rank, bool(passed))
