"""Spectral classification of symplectic matrices.

Eigenvalues are grouped into clusters, each cluster gets its eigenspace from a
reordered Schur form, and the Krein form restricted to that eigenspace decides
whether the eigenvalue is elliptic.  ``classify_stability`` turns this into
one of three verdicts: Unstable, Stable, StronglyStable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, SymplecticityError
from .symcore import (
    DEFAULT_TOL,
    Subspace,
    SymplecticSpace,
    Tolerances,
    is_symplectic,
    krein_gram,
    null_space,
    symplectic_residual,
)


class StabilityClass(str, enum.Enum):
    UNSTABLE = "Unstable"
    STABLE = "Stable"
    STRONGLY_STABLE = "StronglyStable"

    @property
    def is_stable(self) -> bool:
        return self is not StabilityClass.UNSTABLE


@dataclass(frozen=True, eq=False)
class EigenCluster:
    value: complex
    algebraic_multiplicity: int
    eigenbasis: Subspace
    geometric_multiplicity: int
    on_unit_circle: bool
    krein_signature: tuple[int, int, int]
    members: tuple[complex, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def diagonalizable(self) -> bool:
        return self.geometric_multiplicity == self.algebraic_multiplicity

    @property
    def definite(self) -> bool:
        pos, neg, zero = self.krein_signature
        return zero == 0 and (pos == 0 or neg == 0)

    @property
    def self_conjugate(self) -> bool:
        return self.value.imag == 0


@dataclass(frozen=True, eq=False)
class StabilityReport:
    stability: StabilityClass
    clusters: list[EigenCluster]
    reasons: list[str] = field(default_factory=list)

    @property
    def is_stable(self) -> bool:
        return self.stability.is_stable

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.asarray(c.members, dtype=complex) for c in self.clusters])

    def to_dict(self) -> dict:
        return {
            "class": self.stability.value,
            "clusters": [
                {
                    "value": c.value,
                    "algebraic_multiplicity": c.algebraic_multiplicity,
                    "geometric_multiplicity": c.geometric_multiplicity,
                    "on_unit_circle": c.on_unit_circle,
                    "krein_signature": list(c.krein_signature),
                    "eigenvalues": list(c.members),
                    "warnings": list(c.warnings),
                }
                for c in self.clusters
            ],
            "reasons": list(self.reasons),
        }


def cluster_values(values, radius: float) -> list[list[int]]:
    """Single-linkage groups of indices whose members lie within ``radius``."""
    values = np.asarray(values)
    parent = list(range(len(values)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if abs(values[i] - values[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(values)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def sort_key(value: complex) -> tuple[float, float]:
    return (round(float(np.angle(value)), 12), round(abs(value), 12))


def schur_clusters(M: np.ndarray, radius: float):
    """Complex Schur form of ``M`` and single-linkage clusters of its eigenvalues."""
    T, Z = sla.schur(np.asarray(M, dtype=complex), output="complex")
    eig = np.diag(T).copy()
    return T, Z, eig, cluster_values(eig, radius)


def invariant_block(T: np.ndarray, Z: np.ndarray, mask: np.ndarray):
    """Reorder a Schur form so the eigenvalues flagged in ``mask`` lead.

    Returns the leading triangular block and the matching Schur vectors.
    """
    d = int(np.sum(mask))
    Ts, Zs, _, m, _, _, info = sla.lapack.ztrsen(mask.astype(np.int32), T, Z, job="N")
    if info != 0 or m != d:
        raise SymplecticityError(f"Schur reordering failed (info={info}, m={m}, expected {d})")
    return Ts[:d, :d], Zs[:, :d]


def cluster_eigenspace(T, Z, eig, group, tol_rank: float, norm: float):
    """Center, members, eigenbasis and geometric multiplicity of one cluster.

    The rank of ``T11 - center*I`` on the deflated block decides
    diagonalizability; singular values below a few cluster diameters are the
    spread of distinct nearby eigenvalues and count as zero.
    """
    mask = np.zeros(len(eig), dtype=bool)
    mask[group] = True
    members = eig[group]
    center = complex(np.mean(members))
    T11, Z1 = invariant_block(T, Z, mask)
    d = len(group)
    diameter = max((abs(x - y) for x in members for y in members), default=0.0)
    cutoff = max(tol_rank * max(1.0, norm), 4.0 * diameter)
    N = null_space(T11 - center * np.eye(d), cutoff)
    return center, members, Z1 @ N, N.shape[1]


def krein_signature(space: SymplecticSpace, cluster_or_basis, tol: float = DEFAULT_TOL.tol_krein):
    """Counts ``(n_plus, n_minus, n_zero)`` of the Krein form on an eigenspace."""
    basis = cluster_or_basis.eigenbasis if isinstance(cluster_or_basis, EigenCluster) else cluster_or_basis
    V = basis.orthonormal() if isinstance(basis, Subspace) else np.asarray(basis)
    if V.shape[1] == 0:
        raise DimensionError("eigenbasis is empty")
    ev = np.linalg.eigvalsh(krein_gram(space, V))
    pos = int(np.sum(ev > tol))
    neg = int(np.sum(ev < -tol))
    return (pos, neg, len(ev) - pos - neg)


def _check_symplectic(space: SymplecticSpace, S, tol: Tolerances) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {S.shape}")
    space.check_matrix(S, "S")
    if not is_symplectic(space, S, tol.tol_symplectic):
        raise SymplecticityError(
            f"matrix is not symplectic: ||S^T Omega S - Omega|| = {symplectic_residual(space, S):.3e}"
        )
    det = np.linalg.det(S)
    if abs(det - 1) > 1e-8 * max(1.0, np.linalg.norm(S, 2) ** space.dim):
        raise SymplecticityError(f"symplectic matrix with det {det} != 1")
    return S


def spectral_decompose(space: SymplecticSpace, S, tol: Tolerances = DEFAULT_TOL) -> list[EigenCluster]:
    """Clustered spectrum of a symplectic matrix with eigenspaces and Krein signatures."""
    S = _check_symplectic(space, S, tol)
    real_input = np.isrealobj(S) or np.max(np.abs(np.imag(S))) == 0
    if real_input:
        S = np.real(S)
    gnorm = float(np.linalg.norm(S, 2))
    radius = tol.tol_cluster * max(1.0, float(np.max(np.abs(np.linalg.eigvals(S)))))
    T, Z, eig, groups = schur_clusters(S, radius)

    raw = [cluster_eigenspace(T, Z, eig, g, tol.tol_rank, gnorm) for g in groups]
    if real_input:
        # conjugate pairs are enforced: the lower half-plane mirrors the upper one
        paired = []
        for center, members, basis, geo in raw:
            if abs(center.imag) <= radius:
                paired.append((complex(center.real, 0.0), members, basis, geo))
            elif center.imag > 0:
                paired.append((center, members, basis, geo))
                paired.append((center.conjugate(), members.conj(), basis.conj(), geo))
        raw = paired

    clusters = []
    for center, members, basis, geo in raw:
        warnings = []
        if basis.shape[1]:
            res = np.linalg.norm(S @ basis - center * basis, 2)
            if res > 1e-6 * gnorm:
                warnings.append(f"ill-conditioned eigenproblem: residual {res:.2e}")
        sub = Subspace(basis)
        sig = krein_signature(space, sub, tol.tol_krein) if basis.shape[1] else (0, 0, 0)
        clusters.append(
            EigenCluster(
                value=center,
                algebraic_multiplicity=len(members),
                eigenbasis=sub,
                geometric_multiplicity=geo,
                on_unit_circle=abs(abs(center) - 1) <= tol.tol_circle,
                krein_signature=sig,
                members=tuple(complex(x) for x in sorted(members, key=sort_key)),
                warnings=tuple(warnings),
            )
        )
    clusters.sort(key=lambda c: sort_key(c.value))
    return clusters


def _fmt(z: complex) -> str:
    if z.imag == 0:
        return f"{z.real:.12g}"
    return f"{z.real:.12g}{z.imag:+.12g}j"


def classify_stability(space: SymplecticSpace, S, tol: Tolerances = DEFAULT_TOL) -> StabilityReport:
    """Unstable / Stable / StronglyStable verdict from the clustered spectrum."""
    clusters = spectral_decompose(space, S, tol)
    reasons: list[str] = []
    unstable = False
    for c in clusters:
        dev = max(abs(abs(x) - 1) for x in c.members)
        if dev > tol.tol_circle:
            unstable = True
            if dev <= tol.tol_marginal:
                reasons.append(f"marginal: eigenvalue {_fmt(c.value)} is {dev:.2e} off the unit circle")
            else:
                reasons.append(f"eigenvalue {_fmt(c.value)} off the unit circle (||s|-1| = {dev:.3e})")
        if not c.diagonalizable:
            unstable = True
            reasons.append(
                f"eigenvalue {_fmt(c.value)} not semisimple "
                f"(algebraic {c.algebraic_multiplicity}, geometric {c.geometric_multiplicity})"
            )
        for w in c.warnings:
            reasons.append(f"eigenvalue {_fmt(c.value)}: {w}")
    if unstable:
        return StabilityReport(StabilityClass.UNSTABLE, clusters, reasons)

    strong = True
    for c in clusters:
        if not c.definite:
            strong = False
            reasons.append(f"eigenvalue {_fmt(c.value)} has indefinite Krein signature {c.krein_signature}")
        elif c.value.imag == 0:
            reasons.append(f"definite Krein form at real eigenvalue {_fmt(c.value)}; treated as elliptic")
    if strong:
        reasons.append("all eigenvalues elliptic (Krein-definite eigenspaces)")
        return StabilityReport(StabilityClass.STRONGLY_STABLE, clusters, reasons)
    reasons.insert(0, "all eigenvalues on the unit circle and semisimple")
    return StabilityReport(StabilityClass.STABLE, clusters, reasons)
