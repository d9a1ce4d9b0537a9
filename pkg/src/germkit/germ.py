"""Existence, construction and verification of complex germs on invariant tori.

The germ at the base point is the lift of a common positive Lagrangian
invariant subspace of the reduced monodromy operators: the complexified
tangent of the torus plus complement representatives of that subspace.  Frames
at other torus points are pushforwards of the base frame along the commuting
flows, marched over a uniform grid in the lattice angles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GermkitError, ModelSpecError, RefusalError
from .monodromy import (
    HamiltonianModel,
    MonodromyResult,
    PeriodLattice,
    compose_flows,
    monodromy_matrices,
    period_lattice,
    reduced_monodromy,
)
from .pli import PLIResult, pli_common, pli_witness, uniqueness_check
from .spectral import StabilityReport, classify_stability
from .symcore import DEFAULT_TOL, SymplecticSpace, Tolerances, subspace_distance

MAX_SAMPLES = 4096


class PipelineError(GermkitError):
    """A stage of the analysis pipeline failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True, eq=False)
class Decision:
    exists: bool
    unique: bool | None
    reasons: list[str]
    strong_criterion: bool | None = None

    def to_dict(self) -> dict:
        out = {"exists": self.exists}
        if self.exists:
            out["unique"] = self.unique
            out["strong_criterion"] = self.strong_criterion
        out["reasons"] = self.reasons
        return out


@dataclass(frozen=True, eq=False)
class Analysis:
    model: HamiltonianModel
    lattice: PeriodLattice
    monodromy: MonodromyResult
    reports: list[StabilityReport]
    decision: Decision

    @property
    def reduced_space(self) -> SymplecticSpace:
        return self.monodromy.frame.reduced_space

    @property
    def Xi(self) -> list[np.ndarray]:
        return self.monodromy.Xi

    def to_dict(self) -> dict:
        return {
            "model": self.model.name,
            "lattice": self.lattice,
            "monodromy": self.monodromy,
            "reduced": [r.to_dict() for r in self.reports],
            "decision": self.decision,
        }


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (GermkitError, ValueError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, exc) from exc


def analyze(model: HamiltonianModel, hints=None, step: float | None = None, tol: Tolerances = DEFAULT_TOL,
            strict: bool = True) -> Analysis:
    """Lattice, monodromy, reduced operators, their stability and the germ decision."""
    lattice = _stage("lattice", period_lattice, model, hints, step, tol)
    mono = _stage("monodromy", monodromy_matrices, model, lattice, step=step, tol=tol)
    mono = _stage("reduction", reduced_monodromy, model, mono, tol, strict)
    space = mono.frame.reduced_space
    reports = [_stage("stability", classify_stability, space, X, tol) for X in mono.Xi]

    reasons = [f"Xi_{j + 1}: {r.stability.value}; " + "; ".join(r.reasons) for j, r in enumerate(reports)]
    exists = all(r.is_stable for r in reports)
    if exists:
        cert = _stage("uniqueness", uniqueness_check, space, mono.Xi, None, tol)
        reasons.extend(cert.reasons)
        decision = Decision(True, cert.unique, reasons, cert.strong_criterion)
    else:
        bad = [j + 1 for j, r in enumerate(reports) if not r.is_stable]
        reasons.append(f"no germ: reduced monodromy {bad} unstable")
        decision = Decision(False, None, reasons)
    return Analysis(model, lattice, mono, reports, decision)


def germ_exists(model: HamiltonianModel, **kwargs) -> Decision:
    return analyze(model, **kwargs).decision


@dataclass(frozen=True, eq=False)
class GermField:
    """Frames of the germ on a product grid of lattice angles.

    ``frames[s]`` is a ``2n x n`` matrix whose first ``k`` columns span the
    complexified torus tangent at ``points[s]``.  Samples are stored in C order
    of the grid index.
    """

    grid: tuple[int, ...]
    angles: np.ndarray
    points: np.ndarray
    frames: np.ndarray
    generators: np.ndarray
    base_subspace: np.ndarray
    step: float
    kind: str = "common"
    model_spec: dict | None = None

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    @property
    def base_frame(self) -> np.ndarray:
        return self.frames[0]

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "grid": list(self.grid),
            "step": self.step,
            "generators": self.generators,
            "base_subspace": self.base_subspace,
            "angles": self.angles,
            "points": self.points,
            "frames": self.frames,
        }
        if self.model_spec is not None:
            out = {"model": self.model_spec, **out}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GermField":
        try:
            grid = tuple(int(g) for g in data["grid"])
            angles = np.asarray(data["angles"], dtype=float)
            points = np.asarray(data["points"], dtype=float)
            frames = _complex_array(data["frames"])
            gens = np.asarray(data["generators"], dtype=float)
            base = _complex_array(data["base_subspace"])
            step = float(data["step"])
        except KeyError as exc:
            raise ModelSpecError("missing required field", str(exc.args[0])) from None
        except (TypeError, ValueError) as exc:
            raise ModelSpecError(f"malformed germ field: {exc}") from None
        S = int(np.prod(grid))
        if points.shape[0] != S or frames.shape[0] != S or angles.shape[0] != S:
            raise ModelSpecError(f"grid {grid} needs {S} samples", "frames")
        if frames.ndim != 3 or frames.shape[1] != points.shape[1]:
            raise ModelSpecError("frames must be a list of 2n x n matrices", "frames")
        return cls(grid, angles, points, frames, gens, base, step, data.get("kind", "common"), data.get("model"))


def _complex_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _grid_counts(model: HamiltonianModel, samples_per_angle) -> tuple[int, ...]:
    if samples_per_angle is None:
        samples_per_angle = 64
    counts = (samples_per_angle,) * model.k if np.isscalar(samples_per_angle) else tuple(samples_per_angle)
    counts = tuple(int(c) for c in counts)
    if len(counts) != model.k or min(counts) < 2:
        raise ValueError(f"need {model.k} grid counts, each >= 2, got {counts}")
    if math.prod(counts) > MAX_SAMPLES:
        raise ValueError(f"grid {counts} exceeds {MAX_SAMPLES} samples")
    return counts


def _orthonormal_frames(F: np.ndarray) -> np.ndarray:
    """QR of each frame; keeps the span of every leading block of columns."""
    Q, _ = np.linalg.qr(F)
    return Q


def lift_subspace(analysis: Analysis, R: np.ndarray) -> np.ndarray:
    """The base frame ``[lambda_basis | complement_basis @ R]`` for quotient coordinates ``R``."""
    fr = analysis.monodromy.frame
    return np.hstack([fr.lambda_basis.astype(complex), fr.complement_basis @ R])


def _march(model, F0, counts, generators, step):
    """Push the base frame over the product grid, one axis at a time."""
    Z = model.base_point[None, :].copy()
    Fr = F0[None].copy()
    for axis in range(model.k):
        N = counts[axis]
        delta = generators[axis] / N
        layers_z, layers_f = [Z], [Fr]
        for _ in range(N - 1):
            Z, Y = compose_flows(model, delta, Z, step=step)
            Fr = _orthonormal_frames(Y @ Fr)
            layers_z.append(Z)
            layers_f.append(Fr)
        # new axis becomes the last (fastest) index
        Z = np.stack(layers_z, axis=1).reshape(-1, Z.shape[1])
        Fr = np.stack(layers_f, axis=1).reshape(-1, *Fr.shape[1:])
    return Z, Fr


def build_germ(model: HamiltonianModel, samples_per_angle=None, analysis: Analysis | None = None,
               step: float | None = None, tol: Tolerances = DEFAULT_TOL, witness: bool = False,
               pli: PLIResult | None = None) -> GermField:
    """Construct the germ frames on a uniform grid of lattice angles."""
    if analysis is None:
        analysis = analyze(model, step=step, tol=tol)
    if not analysis.decision.exists:
        raise RefusalError("no germ exists: " + "; ".join(analysis.decision.reasons))
    counts = _grid_counts(model, samples_per_angle)
    step = model.default_step if step is None else step
    if pli is None:
        pli = (pli_witness if witness else pli_common)(analysis.reduced_space, analysis.Xi, tol)
    R = pli.subspace.basis
    F0 = _orthonormal_frames(lift_subspace(analysis, R))
    gens = analysis.lattice.generators
    Z, Fr = _march(model, F0, counts, gens, step)
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, model.k)
    angles = 2 * np.pi * idx / np.asarray(counts)
    spec = model.parameters if model.parameters else None
    return GermField(counts, angles, Z, Fr, gens, R, step, "witness" if witness else "common", spec)


def second_germ_witness(model: HamiltonianModel, samples_per_angle=None, analysis: Analysis | None = None,
                        step: float | None = None, tol: Tolerances = DEFAULT_TOL) -> GermField:
    """A second germ built from a different common P.L.I. subspace.

    Witness germs vary along the torus, so the default grid is the finest the
    sample cap allows.
    """
    if analysis is None:
        analysis = analyze(model, step=step, tol=tol)
    d = analysis.decision
    if not d.exists:
        raise RefusalError("no germ exists, so no second one either")
    if d.unique:
        raise RefusalError("the germ is unique: " + "; ".join(d.reasons))
    if samples_per_angle is None:
        samples_per_angle = int(math.floor(MAX_SAMPLES ** (1.0 / model.k) + 1e-9))
    return build_germ(model, samples_per_angle, analysis, step, tol, witness=True)


@dataclass(frozen=True)
class GermTolerances:
    lagrangian: float = 1e-8
    dissipativity: float = 1e-8
    invariance: float = 1e-6
    continuity: float = 1e-3
    tangent: float = 1e-8
    rank: float = 1e-8


@dataclass(frozen=True, eq=False)
class GermReport:
    lagrangian: np.ndarray
    dissipativity: np.ndarray
    invariance: np.ndarray
    continuity: np.ndarray
    tangent: np.ndarray
    rank: np.ndarray
    point_residual: np.ndarray
    lattice_invariance: np.ndarray
    tolerances: GermTolerances
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {
            "lagrangian": float(self.lagrangian.max()),
            "dissipativity_margin": float(self.dissipativity.min()),
            "invariance": float(self.invariance.max()),
            "lattice_invariance": float(self.lattice_invariance.max()),
            "continuity": float(self.continuity.max()),
            "tangent": float(self.tangent.max()),
            "point_residual": float(self.point_residual.max()),
        }

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "summary": self.summary(),
            "tolerances": dict(self.tolerances.__dict__),
            "failures": self.failures,
            "lattice_invariance": self.lattice_invariance,
        }

    def write_csv(self, path) -> None:
        k = self.invariance.shape[1]
        header = ["sample", "lagrangian", "dissipativity", "continuity", "tangent", "rank"]
        header += [f"invariance_{j + 1}" for j in range(k)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for s in range(self.lagrangian.size):
                row = [s, self.lagrangian[s], self.dissipativity[s], self.continuity[s], self.tangent[s],
                       self.rank[s]]
                row += list(self.invariance[s])
                w.writerow([r if isinstance(r, int) else repr(float(r)) for r in row])


def frame_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Batched projector distance between the column spans of frames ``A[s]`` and ``B[s]``."""
    QA, _ = np.linalg.qr(A)
    QB, _ = np.linalg.qr(B)
    P = QA @ np.conj(np.swapaxes(QA, -1, -2)) - QB @ np.conj(np.swapaxes(QB, -1, -2))
    return np.linalg.norm(P, ord=2, axis=(-2, -1))


def _neighbors(counts, axis):
    idx = np.arange(math.prod(counts)).reshape(counts)
    return np.roll(idx, -1, axis=axis).ravel()


def verify_germ(model: HamiltonianModel, fld: GermField, tolerances: GermTolerances = GermTolerances(),
                step: float | None = None, check_lattice: bool = True) -> GermReport:
    """Residuals of the germ axioms at every sample, plus grid continuity.

    Invariance is tested by pushing every sample one grid step along each
    lattice axis with an integrator step independent of the build step and
    comparing with the stored neighbor; ``check_lattice`` also transports the
    base frame once around every lattice generator.
    """
    space = model.space
    n, k = model.n, model.k
    F = fld.frames
    S = F.shape[0]
    Om = space.omega
    if F.shape[1:] != (2 * n, n):
        raise ValueError(f"frames must be {2 * n} x {n}, got {F.shape[1:]}")
    counts = tuple(fld.grid)
    step = (0.5 * (fld.step if fld.step else model.default_step)) if step is None else step

    sv = np.linalg.svd(F, compute_uv=False)
    rank_res = sv[:, -1] / sv[:, 0]
    Q, _ = np.linalg.qr(F)
    QT = np.swapaxes(Q, -1, -2)
    lag = np.linalg.norm(QT @ Om @ Q, ord=2, axis=(-2, -1))

    # tangent of the torus at each sample: the Hamiltonian fields of the F_j
    grads = np.stack([Fj.gradient(fld.points) for Fj in model.functions], axis=1)
    tang = np.concatenate([grads[..., n:], -grads[..., :n]], axis=-1).swapaxes(1, 2)
    QH = np.conj(QT)
    outside = tang - Q @ (QH @ tang)
    tan_res = np.max(np.linalg.norm(outside, axis=1) / np.linalg.norm(tang, axis=1), axis=1)

    # Krein form on the part of the frame orthogonal to the tangent
    Tq, _ = np.linalg.qr(tang.astype(complex))
    W = Q - Tq @ (np.conj(np.swapaxes(Tq, -1, -2)) @ Q)
    U, sw, _ = np.linalg.svd(W)
    Wc = U[:, :, : n - k]
    K = 0.5j * (np.conj(np.swapaxes(Wc, -1, -2)) @ Om @ Wc)
    K = 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))
    diss = np.linalg.eigvalsh(K)[:, 0]

    inv = np.zeros((S, k))
    point_res = np.zeros(S)
    cont = np.zeros(S)
    for axis in range(k):
        nb = _neighbors(counts, axis)
        delta = fld.generators[axis] / counts[axis]
        Z, Y = compose_flows(model, delta, fld.points, step=step)
        inv[:, axis] = frame_distances(Y @ F, F[nb])
        point_res = np.maximum(point_res, np.linalg.norm(model.phase_difference(Z, fld.points[nb]), axis=1))
        cont = np.maximum(cont, frame_distances(F, F[nb]))

    lat = np.zeros(k)
    if check_lattice:
        for j in range(k):
            _, Y = compose_flows(model, fld.generators[j], fld.points[:1], step=step)
            lat[j] = frame_distances(Y @ F[:1], F[:1])[0]

    t = tolerances
    failures = []
    checks = [
        ("lagrangian", lag, lag > t.lagrangian),
        ("dissipativity", diss, diss <= t.dissipativity),
        ("tangent", tan_res, tan_res > t.tangent),
        ("rank", rank_res, rank_res <= t.rank),
        ("invariance", inv.max(axis=1), inv.max(axis=1) > t.invariance),
        ("point", point_res, point_res > t.invariance),
        ("continuity", cont, cont > t.continuity),
    ]
    for name, vals, bad in checks:
        if np.any(bad):
            s = int(np.argmax(bad))
            failures.append(f"{name}: {int(np.sum(bad))} samples fail, first at sample {s} (value {vals[s]:.3e})")
    if np.any(lat > t.invariance):
        failures.append(f"lattice invariance: transported base frame off by {lat.max():.3e}")
    return GermReport(lag, diss, inv, cont, tan_res, rank_res, point_res, lat, t, failures)
