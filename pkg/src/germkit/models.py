"""Hamiltonians with k cyclic variables, built from matrix data.

Phase space is packed as positions ``(theta_1..theta_k, q_1..q_m)`` and momenta
``(I_1..I_k, p_1..p_m)`` with ``m = n - k``.  The transverse vector is
``z = (p - p0, q - q0)`` and

    H = omega . I + 1/2 z^T S z + eps * Q[z, z, z, z] / 24,

with ``S`` the transverse Hessian (in ``(p, q)`` order) and ``Q`` a symmetric
4-tensor.  The commuting family is ``F_1 = H`` and ``F_j = I_j`` for ``j >= 2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, ModelSpecError, PreconditionError
from .io import locate
from .monodromy import HamiltonianModel, Observable, constant_gradient_observable
from .symcore import SymplecticSpace

MODEL_TYPES = ("cyclic_quadratic", "cyclic_anharmonic")
_KEYS = {"type", "n", "k", "frequencies", "transverse_hessian", "epsilon", "quartic", "base_point", "name"}
_BASE_KEYS = {"I", "theta", "p", "q"}


class RegularityError(ModelSpecError):
    """A frequency vanishes, so the torus is not made of regular points."""


def symmetrize_quartic(Q: np.ndarray) -> np.ndarray:
    """Average of a 4-tensor over all 24 index permutations."""
    return sum(np.transpose(Q, p) for p in itertools.permutations(range(4))) / 24.0


@dataclass(frozen=True, eq=False)
class CyclicModelSpec:
    n: int
    k: int
    frequencies: np.ndarray
    transverse_hessian: np.ndarray
    epsilon: float = 0.0
    quartic: np.ndarray | None = None
    I0: np.ndarray | None = None
    theta0: np.ndarray | None = None
    p0: np.ndarray | None = None
    q0: np.ndarray | None = None
    name: str = "cyclic"

    def __post_init__(self):
        m = self.n - self.k
        object.__setattr__(self, "frequencies", np.asarray(self.frequencies, dtype=float).ravel())
        object.__setattr__(self, "transverse_hessian", np.asarray(self.transverse_hessian, dtype=float))
        for attr, size in (("I0", self.k), ("theta0", self.k), ("p0", max(m, 0)), ("q0", max(m, 0))):
            v = getattr(self, attr)
            object.__setattr__(self, attr, np.zeros(size) if v is None else np.asarray(v, dtype=float).ravel())
        if self.quartic is not None:
            object.__setattr__(self, "quartic", symmetrize_quartic(np.asarray(self.quartic, dtype=float)))

    @property
    def m(self) -> int:
        return self.n - self.k

    @property
    def kind(self) -> str:
        return "cyclic_anharmonic" if self.quartic is not None else "cyclic_quadratic"

    def validate(self) -> None:
        """Structural checks; raises :class:`ModelSpecError` naming the field."""
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ModelSpecError("n must be an integer >= 2", "n")
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k < self.n:
            raise ModelSpecError(f"need 1 <= k < n, got k={self.k}, n={self.n}", "k")
        if self.frequencies.shape != (self.k,):
            raise ModelSpecError(f"expected {self.k} frequencies", "frequencies")
        for i, w in enumerate(self.frequencies):
            if not math.isfinite(w):
                raise ModelSpecError("non-finite frequency", f"frequencies[{i}]")
        if self.frequencies[0] == 0:
            raise RegularityError("the first frequency must be nonzero", "frequencies[0]")
        for i, w in enumerate(self.frequencies):
            if w == 0:
                raise RegularityError("zero frequency: the torus is not regular", f"frequencies[{i}]")
        S = self.transverse_hessian
        d = 2 * self.m
        if S.shape != (d, d):
            raise ModelSpecError(f"expected a {d}x{d} matrix, got shape {S.shape}", "transverse_hessian")
        if not np.all(np.isfinite(S)):
            raise ModelSpecError("non-finite entry", "transverse_hessian")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
            raise ModelSpecError("matrix is not symmetric", "transverse_hessian")
        if not math.isfinite(self.epsilon):
            raise ModelSpecError("non-finite epsilon", "epsilon")
        if self.quartic is None and self.epsilon != 0:
            raise ModelSpecError("nonzero epsilon needs a quartic tensor", "epsilon")
        if self.quartic is not None and self.quartic.shape != (d, d, d, d):
            raise ModelSpecError(f"expected a {d}^4 tensor, got shape {self.quartic.shape}", "quartic")
        for attr, size, path in (("I0", self.k, "I"), ("theta0", self.k, "theta"), ("p0", self.m, "p"),
                                 ("q0", self.m, "q")):
            v = getattr(self, attr)
            if v.shape != (size,):
                raise ModelSpecError(f"expected {size} entries", f"base_point.{path}")
            if not np.all(np.isfinite(v)):
                raise ModelSpecError("non-finite entry", f"base_point.{path}")

    @classmethod
    def from_dict(cls, data, text: str | None = None) -> "CyclicModelSpec":
        """Strictly validated spec; errors carry a field path and, given ``text``, a line."""
        try:
            return cls._from_dict(data)
        except ModelSpecError as exc:
            if exc.line is None and text is not None:
                line = locate(text, exc.path)
                raise type(exc)(str(exc).split(": ", 1)[-1], exc.path, line) from None
            raise

    @classmethod
    def _from_dict(cls, data) -> "CyclicModelSpec":
        if not isinstance(data, dict):
            raise ModelSpecError("model spec must be a JSON object")
        unknown = sorted(set(data) - _KEYS - {"schema"})
        if unknown:
            raise ModelSpecError(f"unknown key '{unknown[0]}'", unknown[0])
        for key in ("type", "n", "k", "frequencies", "transverse_hessian"):
            if key not in data:
                raise ModelSpecError("missing required field", key)
        kind = data["type"]
        if kind not in MODEL_TYPES:
            raise ModelSpecError(f"type must be one of {list(MODEL_TYPES)}", "type")
        n, k = data["n"], data["k"]
        for key, v in (("n", n), ("k", k)):
            if not isinstance(v, int) or isinstance(v, bool):
                raise ModelSpecError("expected an integer", key)
        freqs = _real_vector(data["frequencies"], "frequencies")
        S = _real_matrix(data["transverse_hessian"], "transverse_hessian")
        eps = data.get("epsilon", 0.0)
        if isinstance(eps, bool) or not isinstance(eps, (int, float)):
            raise ModelSpecError("expected a number", "epsilon")
        quartic = None
        if kind == "cyclic_anharmonic":
            if "quartic" not in data:
                raise ModelSpecError("missing required field", "quartic")
            quartic = _real_tensor(data["quartic"], "quartic")
        elif "quartic" in data and data["quartic"] is not None:
            raise ModelSpecError("quartic is only allowed for cyclic_anharmonic", "quartic")
        base = data.get("base_point", {})
        if not isinstance(base, dict):
            raise ModelSpecError("expected an object", "base_point")
        unknown = sorted(set(base) - _BASE_KEYS)
        if unknown:
            raise ModelSpecError(f"unknown key '{unknown[0]}'", f"base_point.{unknown[0]}")
        parts = {key: _real_vector(base[key], f"base_point.{key}", allow_empty=True) if key in base else None
                 for key in _BASE_KEYS}
        name = data.get("name", kind)
        if not isinstance(name, str):
            raise ModelSpecError("expected a string", "name")
        spec = cls(n, k, freqs, S, float(eps), quartic, parts["I"], parts["theta"], parts["p"], parts["q"], name)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        out = {
            "type": self.kind,
            "name": self.name,
            "n": int(self.n),
            "k": int(self.k),
            "frequencies": self.frequencies,
            "transverse_hessian": self.transverse_hessian,
            "epsilon": float(self.epsilon),
        }
        if self.quartic is not None:
            out["quartic"] = self.quartic
        out["base_point"] = {"I": self.I0, "theta": self.theta0, "p": self.p0, "q": self.q0}
        return out


def _real_vector(x, path: str, allow_empty: bool = False) -> np.ndarray:
    if not isinstance(x, list) or (not x and not allow_empty):
        raise ModelSpecError("expected a non-empty list of numbers", path)
    for i, v in enumerate(x):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelSpecError("expected a number", f"{path}[{i}]")
    return np.asarray(x, dtype=float)


def _real_matrix(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ModelSpecError("expected a non-empty list of rows", path)
    rows = [_real_vector(r, f"{path}[{i}]") for i, r in enumerate(x)]
    for i, r in enumerate(rows):
        if r.shape != rows[0].shape:
            raise ModelSpecError(f"row has {r.size} entries, expected {rows[0].size}", f"{path}[{i}]")
    return np.array(rows)


def _real_tensor(x, path: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise ModelSpecError("expected a nested list of numbers with a regular shape", path) from None
    if arr.ndim != 4:
        raise ModelSpecError(f"expected a 4-index tensor, got {arr.ndim} indices", path)
    return arr


def _indices(n: int, k: int):
    theta = np.arange(k)
    q = np.arange(k, n)
    I = n + np.arange(k)
    p = n + np.arange(k, n)
    return theta, q, I, p


def pack(spec: CyclicModelSpec, theta=None, q=None, I=None, p=None) -> np.ndarray:
    z = np.zeros(2 * spec.n)
    t_i, q_i, I_i, p_i = _indices(spec.n, spec.k)
    z[t_i] = spec.theta0 if theta is None else theta
    z[q_i] = spec.q0 if q is None else q
    z[I_i] = spec.I0 if I is None else I
    z[p_i] = spec.p0 if p is None else p
    return z


def _hamiltonian(spec: CyclicModelSpec) -> Observable:
    n, k = spec.n, spec.k
    d = 2 * n
    t_i, q_i, I_i, p_i = _indices(n, k)
    tr = np.concatenate([p_i, q_i])
    center = np.concatenate([spec.p0, spec.q0])
    S = spec.transverse_hessian
    w = spec.frequencies
    eps = spec.epsilon
    Q = spec.quartic if (spec.quartic is not None and eps != 0) else None
    H_const = np.zeros((d, d))
    H_const[np.ix_(tr, tr)] = S

    def transverse(z):
        return z[:, tr] - center

    def value(z):
        y = transverse(z)
        v = z[:, I_i] @ w + 0.5 * np.einsum("bi,ij,bj->b", y, S, y)
        if Q is not None:
            v = v + eps * np.einsum("ijkl,bi,bj,bk,bl->b", Q, y, y, y, y) / 24.0
        return v

    def gradient(z):
        y = transverse(z)
        g = np.zeros_like(z)
        g[:, I_i] = w
        gt = y @ S
        if Q is not None:
            gt = gt + eps * np.einsum("ijkl,bj,bk,bl->bi", Q, y, y, y) / 6.0
        g[:, tr] = gt
        return g

    def hessian(z):
        if Q is None:
            return np.broadcast_to(H_const, (z.shape[0], d, d))
        y = transverse(z)
        out = np.repeat(H_const[None], z.shape[0], axis=0)
        out[:, tr[:, None], tr[None, :]] += eps * np.einsum("ijkl,bk,bl->bij", Q, y, y) / 2.0
        return out

    return Observable(value, gradient, hessian, name="H", constant_hessian=H_const if Q is None else None)


def cyclic_lattice(frequencies) -> np.ndarray:
    """Return-lattice generators for the flows ``(H, I_2, .., I_k)``.

    ``T_1`` runs ``H`` for one turn of ``theta_1`` and undoes the drift of the
    other angles with the ``I_j`` flows; ``T_j = 2 pi e_j`` for ``j >= 2``.
    """
    w = np.asarray(frequencies, dtype=float)
    k = w.size
    T = 2 * np.pi * np.eye(k)
    T[0, 0] = 2 * np.pi / w[0]
    T[0, 1:] = -2 * np.pi * w[1:] / w[0]
    return T


def make_cyclic_model(spec: CyclicModelSpec) -> HamiltonianModel:
    """The commuting family ``(H, I_2, .., I_k)`` with base point on the torus through the spec's point."""
    if spec.k >= spec.n:
        raise DimensionError(f"need k < n, got k={spec.k}, n={spec.n}")
    spec.validate()
    n, k = spec.n, spec.k
    t_i, _, I_i, _ = _indices(n, k)
    funcs = [_hamiltonian(spec)]
    for j in range(1, k):
        g = np.zeros(2 * n)
        g[I_i[j]] = 1.0
        funcs.append(constant_gradient_observable(g, name=f"I{j + 1}"))
    base = pack(spec)
    mask = np.zeros(2 * n, dtype=bool)
    mask[t_i] = True

    def chart(angles):
        A = np.atleast_2d(np.asarray(angles, dtype=float))
        Z = np.repeat(base[None, :], A.shape[0], axis=0)
        Z[:, t_i] += A
        return Z

    return HamiltonianModel(
        n=n,
        k=k,
        functions=funcs,
        base_point=base,
        angle_mask=mask,
        name=spec.name,
        parameters=spec.to_dict(),
        torus_chart=chart,
        default_step=(2 * np.pi / abs(spec.frequencies[0])) / 20000,
        lattice=cyclic_lattice(spec.frequencies),
    )


@dataclass(frozen=True)
class CriticalCheck:
    hessian_det: float
    regular: bool
    gradient_norm: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def critical_manifold_check(spec: CyclicModelSpec, tol: float = 1e-12) -> CriticalCheck:
    """Determinant of the transverse Hessian at the base point and the regularity verdict."""
    obs = _hamiltonian(spec)
    z = pack(spec)[None, :]
    _, q_i, _, p_i = _indices(spec.n, spec.k)
    tr = np.concatenate([p_i, q_i])
    Hfull = obs.hessian(z)[0]
    det = float(np.linalg.det(Hfull[np.ix_(tr, tr)]))
    grad = float(np.linalg.norm(obs.gradient(z)[0][tr]))
    regular = abs(det) > tol and bool(np.all(spec.frequencies != 0)) and grad <= 1e-12
    return CriticalCheck(det, regular, grad)


def transverse_field_matrix(spec: CyclicModelSpec) -> np.ndarray:
    """Linear Hamiltonian field of the transverse quadratic form in ``(q, p)`` coordinates."""
    m = spec.m
    perm = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    S_qp = spec.transverse_hessian[np.ix_(perm, perm)]
    return SymplecticSpace(m).omega @ S_qp


def analytic_reduced_monodromy(spec: CyclicModelSpec) -> np.ndarray:
    """``exp((2 pi / omega_1) L)`` on the transverse ``(q, p)`` plane, L the linear field."""
    if spec.epsilon != 0:
        raise PreconditionError("no analytic reduced monodromy for a nonzero quartic coupling")
    return sla.expm((2 * np.pi / spec.frequencies[0]) * transverse_field_matrix(spec))


# built-in suite


def harmonic_spec(omega2: float = math.sqrt(2.0), omega1: float = 1.0) -> CyclicModelSpec:
    return CyclicModelSpec(2, 1, [omega1], np.diag([omega2, omega2]), name=f"harmonic(omega2={omega2:.6g})")


def resonant_spec(ratio: int = 1, omega1: float = 1.0) -> CyclicModelSpec:
    w2 = ratio * omega1
    return CyclicModelSpec(2, 1, [omega1], np.diag([w2, w2]), name=f"resonant(omega2/omega1={ratio})")


def zero_hessian_spec() -> CyclicModelSpec:
    return CyclicModelSpec(2, 1, [1.0], np.zeros((2, 2)), name="zero-hessian")


def hyperbolic_spec(lam: float) -> CyclicModelSpec:
    return CyclicModelSpec(2, 1, [1.0], np.array([[0.0, lam], [lam, 0.0]]), name=f"hyperbolic(lambda={lam:g})")


def torus2_spec(omega3: float = math.sqrt(3.0), frequencies=(1.0, math.sqrt(2.0))) -> CyclicModelSpec:
    """n = 3, k = 2 with a harmonic transverse plane."""
    return CyclicModelSpec(3, 2, list(frequencies), np.diag([omega3, omega3]), name=f"torus2(omega3={omega3:.6g})")


def anharmonic_spec(epsilon: float = 0.1, omega2: float = math.sqrt(2.0)) -> CyclicModelSpec:
    Q = np.zeros((2, 2, 2, 2))
    Q[0, 0, 0, 0] = Q[1, 1, 1, 1] = 6.0
    return CyclicModelSpec(2, 1, [1.0], np.diag([omega2, omega2]), epsilon, Q, name=f"anharmonic(eps={epsilon:g})")


def builtin_suite() -> dict[str, CyclicModelSpec]:
    return {
        "harmonic": harmonic_spec(),
        "resonant": resonant_spec(),
        "zero_hessian": zero_hessian_spec(),
        "hyperbolic_0.05": hyperbolic_spec(0.05),
        "hyperbolic_0.1": hyperbolic_spec(0.1),
        "hyperbolic_0.5": hyperbolic_spec(0.5),
    }
