"""Flows of commuting Hamiltonians, their tangent maps, return lattices and monodromy.

Every integration is classical fixed-step RK4 on the pair ``(z, Y)`` with
``z' = Omega grad F(z)`` and ``Y' = Omega Hess F(z) Y``.  States are batched:
``z`` has shape ``(B, 2n)`` and ``Y`` shape ``(B, 2n, 2n)`` so many sample
points travel together.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConsistencyError, DimensionError, DivergenceError, LatticeError, PreconditionError
from .symcore import (
    DEFAULT_TOL,
    QuotientFrame,
    SymplecticSpace,
    Tolerances,
    numerical_rank,
    quotient_frame,
    reduce_operator,
    symplectic_residual,
)


@dataclass(frozen=True, eq=False)
class Observable:
    """A smooth function on phase space with batched value, gradient and Hessian.

    Each callable takes points of shape ``(B, 2n)`` and returns shapes ``(B,)``,
    ``(B, 2n)`` and ``(B, 2n, 2n)``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str = "F"
    constant_hessian: np.ndarray | None = None
    linear: bool = False

    def at(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.value(z)[0], self.gradient(z)[0], self.hessian(z)[0]


def constant_gradient_observable(grad: np.ndarray, name: str = "F") -> Observable:
    """A linear function ``z -> grad . z``; its flow is a translation."""
    g = np.asarray(grad, dtype=float)
    d = g.size

    return Observable(
        value=lambda z: z @ g,
        gradient=lambda z: np.broadcast_to(g, z.shape),
        hessian=lambda z: np.zeros((z.shape[0], d, d)),
        name=name,
        constant_hessian=np.zeros((d, d)),
        linear=True,
    )


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """k functions in involution on R^{2n} with a base point on an invariant torus.

    ``angle_mask`` flags coordinates that live on a circle; they are compared
    modulo 2 pi when testing returns.  ``lattice`` optionally holds analytic
    period generators (rows).
    """

    n: int
    k: int
    functions: Sequence[Observable]
    base_point: np.ndarray
    angle_mask: np.ndarray
    name: str = "model"
    parameters: dict = field(default_factory=dict)
    torus_chart: Callable[[np.ndarray], np.ndarray] | None = None
    default_step: float = 1e-3
    lattice: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise PreconditionError(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        if len(self.functions) != self.k:
            raise DimensionError(f"expected {self.k} functions, got {len(self.functions)}")
        bp = np.asarray(self.base_point, dtype=float)
        if bp.shape != (2 * self.n,):
            raise DimensionError(f"base point must have length {2 * self.n}")
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "angle_mask", np.asarray(self.angle_mask, dtype=bool))

    @property
    def space(self) -> SymplecticSpace:
        return SymplecticSpace(self.n)

    def gradients(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.stack([F.gradient(z)[0] for F in self.functions])

    def phase_difference(self, a, b) -> np.ndarray:
        """``a - b`` with angle coordinates wrapped into ``(-pi, pi]``."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        wrapped = np.mod(d + np.pi, 2 * np.pi) - np.pi
        return np.where(self.angle_mask, wrapped, d)


@dataclass(frozen=True, eq=False)
class PeriodLattice:
    generators: np.ndarray
    return_residuals: np.ndarray

    def to_dict(self) -> dict:
        return {"generators": self.generators, "return_residuals": self.return_residuals}


@dataclass(frozen=True, eq=False)
class MonodromyResult:
    G: list[np.ndarray]
    commutation_residuals: np.ndarray
    symplectic_residuals: np.ndarray
    frame: QuotientFrame
    lattice: PeriodLattice
    base_point: np.ndarray
    step: float
    Xi: list[np.ndarray] = field(default_factory=list)
    tangential_coupling: list[np.ndarray] = field(default_factory=list)
    off_sigma_residuals: list[float] = field(default_factory=list)
    reduced_symplectic_residuals: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "G": self.G,
            "commutation_residuals": self.commutation_residuals,
            "symplectic_residuals": self.symplectic_residuals,
            "Xi": self.Xi,
            "tangential_coupling": self.tangential_coupling,
            "off_sigma_residuals": self.off_sigma_residuals,
            "reduced_symplectic_residuals": self.reduced_symplectic_residuals,
            "reduced_form": self.frame.reduced_form,
            "step": self.step,
        }


def _omega_rows(M: np.ndarray, n: int) -> np.ndarray:
    """``Omega @ M`` along the second-to-last axis (rows), without a matmul."""
    return np.concatenate([M[..., n:, :], -M[..., :n, :]], axis=-2)


def _resymplectize(Y: np.ndarray, n: int) -> np.ndarray:
    """One Newton step towards ``Y^T Omega Y = Omega``."""
    d = 2 * n
    Om = SymplecticSpace(n).omega
    E = np.swapaxes(Y, -1, -2) @ Om @ Y - Om
    return Y @ (np.eye(d) + 0.5 * (Om @ E))


def flow(
    model: HamiltonianModel,
    j: int,
    t: float,
    Z,
    Y=None,
    step: float | None = None,
    with_tangent: bool = True,
    resymplectize: bool = False,
):
    """Push batched points (and tangent maps) along the flow of ``F_j`` for time ``t``.

    ``t`` may be negative.  The number of RK4 steps is ``ceil(|t| / step)`` and
    the actual step is ``t`` divided by that count.
    """
    n = model.n
    F = model.functions[j]
    Z = np.array(np.atleast_2d(Z), dtype=float)
    B = Z.shape[0]
    if with_tangent:
        Y = np.broadcast_to(np.eye(2 * n), (B, 2 * n, 2 * n)).copy() if Y is None else np.array(Y, dtype=float)
    step = model.default_step if step is None else step
    if step <= 0:
        raise ValueError("step must be positive")
    if t == 0:
        return Z, Y
    # RK4 is exact for constant fields, so linear functions need one step
    N = 1 if F.linear else max(1, math.ceil(abs(t) / step - 1e-9))
    h = t / N

    if F.constant_hessian is not None:
        # with a constant Hessian the gradient is affine: grad(z) = grad(z0) + (z - z0) H
        A = _omega_rows(F.constant_hessian, n)
        At = A.T.copy()
        Z0 = Z.copy()
        g0 = F.gradient(Z0)
        c0 = np.concatenate([g0[:, n:], -g0[:, :n]], axis=1)

        def field_z(z):
            return c0 + (z - Z0) @ At

        def field_a(z):
            return A
    else:

        def field_z(z):
            g = F.gradient(z)
            return np.concatenate([g[:, n:], -g[:, :n]], axis=1)

        def field_a(z):
            return _omega_rows(F.hessian(z), n)

    for i in range(N):
        if with_tangent:
            k1 = field_z(Z)
            l1 = field_a(Z) @ Y
            Z2 = Z + 0.5 * h * k1
            k2 = field_z(Z2)
            l2 = field_a(Z2) @ (Y + 0.5 * h * l1)
            Z3 = Z + 0.5 * h * k2
            k3 = field_z(Z3)
            l3 = field_a(Z3) @ (Y + 0.5 * h * l2)
            Z4 = Z + h * k3
            k4 = field_z(Z4)
            l4 = field_a(Z4) @ (Y + h * l3)
            Y = Y + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        else:
            k1 = field_z(Z)
            k2 = field_z(Z + 0.5 * h * k1)
            k3 = field_z(Z + 0.5 * h * k2)
            k4 = field_z(Z + h * k3)
        Z = Z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i % 16 == 15 or i == N - 1) and not (
            np.isfinite(Z).all() and (not with_tangent or np.isfinite(Y).all())
        ):
            raise DivergenceError(f"non-finite state in flow {j + 1} at t = {(i + 1) * h:.6g}", (i + 1) * h)
    if with_tangent and resymplectize:
        Y = _resymplectize(Y, n)
    return Z, Y


def integrate_variational(model: HamiltonianModel, j: int, t_final: float, start=None, step: float | None = None,
                          resymplectize: bool = False):
    """End point and tangent map of the flow of ``F_j`` over ``[0, t_final]``."""
    z0 = model.base_point if start is None else np.asarray(start, dtype=float)
    if z0.shape != (2 * model.n,):
        raise DimensionError(f"start must have length {2 * model.n}")
    Z, Y = flow(model, j, t_final, z0[None, :], step=step, resymplectize=resymplectize)
    return Z[0], Y[0]


def compose_flows(model: HamiltonianModel, times, Z, Y=None, step: float | None = None, with_tangent: bool = True,
                  resymplectize: bool = False):
    """Apply the flows of ``F_1..F_k`` for the given times, in index order."""
    for j, t in enumerate(np.asarray(times, dtype=float)):
        Z, Y = flow(model, j, float(t), Z, Y, step=step, with_tangent=with_tangent, resymplectize=resymplectize)
    return Z, Y


def trajectory(model: HamiltonianModel, j: int, t_final: float, start=None, step: float | None = None,
               samples: int = 100) -> np.ndarray:
    """Rows ``(t, z_1..z_2n)`` along the flow of ``F_j`` at ``samples + 1`` equal times."""
    z = (model.base_point if start is None else np.asarray(start, dtype=float))[None, :]
    dt = t_final / samples
    rows = [np.concatenate([[0.0], z[0]])]
    for i in range(samples):
        z, _ = flow(model, j, dt, z, step=step, with_tangent=False)
        rows.append(np.concatenate([[(i + 1) * dt], z[0]]))
    return np.array(rows)


def write_trajectory_csv(path, rows: np.ndarray, n: int) -> None:
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def return_residual(model: HamiltonianModel, times, start=None, step: float | None = None) -> float:
    z0 = model.base_point if start is None else np.asarray(start, dtype=float)
    Z, _ = compose_flows(model, times, z0[None, :], step=step, with_tangent=False)
    return float(np.linalg.norm(model.phase_difference(Z[0], z0)))


def period_lattice(model: HamiltonianModel, hints=None, step: float | None = None,
                   tol: Tolerances = DEFAULT_TOL) -> PeriodLattice:
    """Verified generators of the return lattice at the base point.

    Generators come from ``hints`` when given, otherwise from the model's
    analytic lattice; each is integrated and must return within ``tol_return``.
    """
    if hints is None:
        if model.lattice is None:
            raise PreconditionError("no analytic lattice for this model; supply generator hints")
        gens = np.asarray(model.lattice, dtype=float)
    else:
        gens = np.atleast_2d(np.asarray(hints, dtype=float))
    if gens.shape != (model.k, model.k):
        raise DimensionError(f"expected {model.k} generators of length {model.k}, got shape {gens.shape}")
    if numerical_rank(gens) != model.k:
        raise LatticeError("lattice generators are linearly dependent")
    res = np.array([return_residual(model, T, step=step) for T in gens])
    bad = [f"T_{j + 1} = {gens[j].tolist()} (residual {r:.3e})" for j, r in enumerate(res) if r > tol.tol_return]
    if bad:
        raise LatticeError("generators do not return to the base point: " + "; ".join(bad))
    return PeriodLattice(gens, res)


def monodromy_matrices(model: HamiltonianModel, lattice: PeriodLattice, base_point=None, step: float | None = None,
                       tol: Tolerances = DEFAULT_TOL, resymplectize: bool = False) -> MonodromyResult:
    """Tangent maps of the return maps over each lattice generator.

    All generators are integrated together as one batch; the flows inside a
    generator are applied in index order.
    """
    space = model.space
    m = model.base_point if base_point is None else np.asarray(base_point, dtype=float)
    step = model.default_step if step is None else step
    k = model.k
    Z = np.repeat(m[None, :], k, axis=0)
    Y = np.repeat(np.eye(space.dim)[None], k, axis=0)
    for i in range(k):
        # flow i is applied for every generator at once; batches with zero time are held fixed
        times = lattice.generators[:, i]
        for t in np.unique(times):
            sel = times == t
            Zs, Ys = flow(model, i, float(t), Z[sel], Y[sel], step=step, resymplectize=resymplectize)
            Z[sel], Y[sel] = Zs, Ys
    G = [Y[j] for j in range(k)]
    comm = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            comm[a, b] = np.linalg.norm(G[a] @ G[b] - G[b] @ G[a], 2)
    sym = np.array([symplectic_residual(space, g) for g in G])
    frame = quotient_frame(space, model.gradients(m))
    return MonodromyResult(G, comm, sym, frame, lattice, m, step)


def reduced_monodromy(model: HamiltonianModel, result: MonodromyResult, tol: Tolerances = DEFAULT_TOL,
                      strict: bool = True) -> MonodromyResult:
    """Attach the reduced operators ``Xi_j`` (and their residuals) to ``result``."""
    space = model.space
    Xi, coup, off, rsym = [], [], [], []
    red = result.frame.reduced_form
    for j, G in enumerate(result.G):
        try:
            data = reduce_operator(space, G, result.frame, tol.tol_invariance, strict=strict)
        except Exception as exc:
            raise type(exc)(f"monodromy operator {j + 1}: {exc}") from exc
        Xi.append(data.xi_matrix)
        coup.append(data.tangential_coupling)
        off.append(data.residual_off_sigma)
        x = data.xi_matrix
        rsym.append(float(np.linalg.norm(x.T @ red @ x - red, 2)))
    return MonodromyResult(
        result.G, result.commutation_residuals, result.symplectic_residuals, result.frame, result.lattice,
        result.base_point, result.step, Xi, coup, off, rsym,
    )


def involution_check(model: HamiltonianModel, samples=None) -> float:
    """Largest ``|{F_i, F_j}|`` over sample points (rows) and pairs ``i < j``."""
    Z = np.atleast_2d(model.base_point if samples is None else np.asarray(samples, dtype=float))
    if Z.shape[1] != 2 * model.n:
        raise DimensionError(f"samples must have {2 * model.n} columns")
    n = model.n
    grads = [F.gradient(Z) for F in model.functions]
    worst = 0.0
    for i in range(model.k):
        for j in range(i + 1, model.k):
            gi, gj = grads[i], grads[j]
            br = np.sum(gi[:, :n] * gj[:, n:] - gi[:, n:] * gj[:, :n], axis=1)
            worst = max(worst, float(np.max(np.abs(br))))
    return worst


def check_model(model: HamiltonianModel, samples=None, tol: float = 1e-9) -> None:
    """Independent gradients at the base point and involution on the samples."""
    D = model.gradients(model.base_point)
    if numerical_rank(D) != model.k:
        raise ConsistencyError("gradients are dependent at the base point")
    br = involution_check(model, samples)
    if br > tol:
        raise ConsistencyError(f"functions are not in involution (max bracket {br:.3e})")
