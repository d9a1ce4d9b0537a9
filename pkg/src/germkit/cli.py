"""Command-line front end: ``germkit {classify,pli,analyze,germ-build,germ-verify}``.

Exit codes: 0 success, 2 malformed input, 3 pipeline failure (or no germ to
build), 4 germ verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .errors import GermkitError, ModelSpecError
from .germ import GermField, GermTolerances, PipelineError, analyze, build_germ, second_germ_witness, verify_germ
from .io import SCHEMA, complex_matrix, dumps, load_json
from .models import CyclicModelSpec, make_cyclic_model
from .monodromy import trajectory, write_trajectory_csv
from .pli import pli_common
from .spectral import classify_stability
from .symcore import DEFAULT_TOL, SymplecticSpace, Tolerances

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE, EXIT_VERIFY = 0, 2, 3, 4
COMMANDS = ("classify", "pli", "analyze", "germ-build", "germ-verify")
_TOL_FLAGS = ("tol_circle", "tol_cluster", "tol_rank")


class InputError(Exception):
    """Malformed command-line input; maps to exit code 2."""


@dataclass
class RunConfig:
    command: str
    input_path: str = "-"
    output_path: str = "-"
    tol_circle: float | None = None
    tol_cluster: float | None = None
    tol_rank: float | None = None
    step: float | None = None
    grid: list[int] | None = None
    strict: bool = False
    seed: int | None = None
    witness: bool = False
    csv_path: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command '{self.command}'")
        for name in _TOL_FLAGS:
            v = getattr(self, name)
            if v is not None and not 0 < v < 1e-2:
                raise InputError(f"{name} must lie in (0, 1e-2), got {v}")
        if self.step is not None and not self.step > 0:
            raise InputError(f"step must be positive, got {self.step}")
        if self.grid is not None and (not self.grid or any(g < 2 for g in self.grid)):
            raise InputError(f"grid counts must be >= 2, got {self.grid}")

    @property
    def tolerances(self) -> Tolerances:
        return DEFAULT_TOL.replace(**{name: getattr(self, name) for name in _TOL_FLAGS})

    @classmethod
    def merged(cls, command: str, config: dict | None, overrides: dict) -> "RunConfig":
        """Config-file values overridden by explicit flags; unknown keys are rejected."""
        known = {f.name for f in fields(cls)} - {"command"}
        values = {}
        for key, v in (config or {}).items():
            k = key.replace("-", "_")
            if k not in known:
                raise InputError(f"unknown config key '{key}'")
            values[k] = v
        values.update({k: v for k, v in overrides.items() if v is not None})
        if values.get("grid") is not None and not isinstance(values["grid"], list):
            values["grid"] = [values["grid"]]
        try:
            return cls(command, **values)
        except TypeError as exc:
            raise InputError(str(exc)) from None


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(cfg: RunConfig, payload: dict) -> None:
    out = {"schema": SCHEMA, "command": cfg.command}
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    out.update(payload)
    _write(cfg.output_path, dumps(out))


def _matrix_list(data, key: str) -> list[np.ndarray]:
    if isinstance(data, dict):
        if key in data:
            items, path = data[key], key
        elif "matrix" in data:
            items, path = [data["matrix"]], "matrix"
        else:
            raise ModelSpecError("missing required field", key)
    else:
        items, path = data, ""
    if not isinstance(items, list) or not items:
        raise ModelSpecError("expected a non-empty list of matrices", path)
    mats = []
    for i, M in enumerate(items):
        p = f"{path}[{i}]"
        A = complex_matrix(M, p)
        if A.shape[0] != A.shape[1]:
            raise ModelSpecError(f"matrix {i} is not square (shape {A.shape})", p)
        if A.shape[0] % 2:
            raise ModelSpecError(f"matrix {i} has odd dimension {A.shape[0]}", p)
        mats.append(A.real if not np.any(A.imag) else A)
    return mats


def cmd_classify(cfg: RunConfig) -> int:
    mats = _matrix_list(load_json(_read(cfg.input_path)), "matrices")
    tol = cfg.tolerances
    reports = []
    for i, S in enumerate(mats):
        space = SymplecticSpace(S.shape[0] // 2)
        try:
            rep = classify_stability(space, S, tol)
        except GermkitError as exc:
            if cfg.strict:
                raise InputError(f"matrix {i}: {exc}") from None
            reports.append({"index": i, "error": str(exc)})
            continue
        reports.append({"index": i, **rep.to_dict()})
    _emit(cfg, {"reports": reports})
    return EXIT_OK


def cmd_pli(cfg: RunConfig) -> int:
    ops = _matrix_list(load_json(_read(cfg.input_path)), "operators")
    dims = {A.shape[0] for A in ops}
    if len(dims) != 1:
        raise ModelSpecError(f"operators have different dimensions {sorted(dims)}", "operators")
    space = SymplecticSpace(dims.pop() // 2)
    res = pli_common(space, ops, cfg.tolerances)
    _emit(cfg, {"pli": res})
    return EXIT_OK


def _load_model(cfg: RunConfig):
    text = _read(cfg.input_path)
    data = load_json(text)
    spec = CyclicModelSpec.from_dict(data, text)
    return spec, make_cyclic_model(spec)


def cmd_analyze(cfg: RunConfig) -> int:
    spec, model = _load_model(cfg)
    a = analyze(model, step=cfg.step, tol=cfg.tolerances, strict=cfg.strict)
    if cfg.csv_path:
        rows = trajectory(model, 0, float(a.lattice.generators[0, 0]), step=cfg.step)
        write_trajectory_csv(cfg.csv_path, rows, model.n)
    _emit(cfg, {"model": spec, **a.to_dict()})
    return EXIT_OK


def _grid(cfg: RunConfig, k: int):
    if cfg.grid is None:
        return None
    if len(cfg.grid) == 1:
        return cfg.grid[0]
    if len(cfg.grid) != k:
        raise InputError(f"--grid needs 1 or {k} counts, got {len(cfg.grid)}")
    return tuple(cfg.grid)


def cmd_germ_build(cfg: RunConfig) -> int:
    spec, model = _load_model(cfg)
    tol = cfg.tolerances
    a = analyze(model, step=cfg.step, tol=tol, strict=cfg.strict)
    if not a.decision.exists:
        _emit(cfg, {"model": spec, "decision": a.decision, "reduced": [r.to_dict() for r in a.reports]})
        print("germkit: no germ exists for this model (reduced monodromy unstable)", file=sys.stderr)
        return EXIT_PIPELINE
    grid = _grid(cfg, model.k)
    if cfg.witness:
        fld = second_germ_witness(model, grid, a, cfg.step, tol)
    else:
        fld = build_germ(model, grid, a, cfg.step, tol)
    report = verify_germ(model, fld)
    if cfg.csv_path:
        report.write_csv(cfg.csv_path)
    _emit(cfg, {"decision": a.decision, "summary": report, "field": fld})
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_germ_verify(cfg: RunConfig) -> int:
    text = _read(cfg.input_path)
    data = load_json(text)
    if isinstance(data, dict) and "field" in data:
        data = data["field"]
    if not isinstance(data, dict) or "model" not in data:
        raise ModelSpecError("germ field must embed its model spec", "model")
    spec = CyclicModelSpec.from_dict(data["model"])
    model = make_cyclic_model(spec)
    fld = GermField.from_dict(data)
    if fld.frames.shape[1:] != (2 * model.n, model.n) or fld.points.shape[1] != 2 * model.n:
        raise ModelSpecError("frame sizes do not match the model", "frames")
    report = verify_germ(model, fld, GermTolerances(), step=cfg.step)
    if cfg.csv_path:
        report.write_csv(cfg.csv_path)
    _emit(cfg, {"report": report})
    return EXIT_OK if report.passed else EXIT_VERIFY


HANDLERS = {
    "classify": cmd_classify,
    "pli": cmd_pli,
    "analyze": cmd_analyze,
    "germ-build": cmd_germ_build,
    "germ-verify": cmd_germ_verify,
}


def _grid_arg(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", dest="input_path", help="input JSON file, '-' for stdin (default)")
    common.add_argument("--output", "-o", dest="output_path", help="output JSON file, '-' for stdout (default)")
    common.add_argument("--config", help="JSON file with default values for these flags")
    common.add_argument("--tol-circle", type=float,
                        help=f"absolute tolerance on ||s| - 1| (default {DEFAULT_TOL.tol_circle:g})")
    common.add_argument("--tol-cluster", type=float,
                        help=f"relative eigenvalue clustering radius (default {DEFAULT_TOL.tol_cluster:g})")
    common.add_argument("--tol-rank", type=float,
                        help=f"relative singular-value cutoff (default {DEFAULT_TOL.tol_rank:g})")
    common.add_argument("--step", type=float, help="RK4 step (default: first period / 20000)")
    common.add_argument("--grid", type=_grid_arg, help="samples per torus angle, e.g. 64 or 16,16 (default 64)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="treat non-symplectic matrices and flag violations as input errors")
    common.add_argument("--seed", type=int, help="seed recorded in the output for randomized harnesses")
    common.add_argument("--csv", dest="csv_path", help="write per-sample residuals (germ) or a trajectory (analyze)")

    parser = argparse.ArgumentParser(prog="germkit", description="Complex germs on invariant isotropic tori.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="stability class of symplectic matrices")
    sub.add_parser("pli", parents=[common], help="common P.L.I. subspace of commuting operators")
    sub.add_parser("analyze", parents=[common], help="lattice, monodromy and germ decision for a model")
    b = sub.add_parser("germ-build", parents=[common], help="build and verify a germ field")
    b.add_argument("--witness", action="store_true", default=None, help="build the second (non-unique) germ")
    sub.add_parser("germ-verify", parents=[common], help="verify a stored germ field")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = None
        if args.config:
            try:
                config = json.loads(_read(args.config))
            except json.JSONDecodeError as exc:
                raise InputError(f"config {args.config}: invalid JSON at line {exc.lineno}") from None
            if not isinstance(config, dict):
                raise InputError("config must be a JSON object")
        cfg = RunConfig.merged(args.command, config, overrides)
        return HANDLERS[cfg.command](cfg)
    except (InputError, ModelSpecError) as exc:
        print(f"germkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PipelineError, GermkitError) as exc:
        print(f"germkit: pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
