"""Run the germ pipeline on every built-in model and print a decision table.

Optionally writes one JSON report per model into a directory.
"""

import argparse
import pathlib
import time

from germkit.germ import analyze, build_germ, second_germ_witness, verify_germ
from germkit.io import dumps
from germkit.models import builtin_suite, make_cyclic_model, torus2_spec


def verdict(rep):
    return "pass" if rep.passed else "fail:" + ",".join(f.split(":")[0] for f in rep.failures)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", type=int, default=64, help="samples per angle for k = 1 models")
    parser.add_argument("--out", type=pathlib.Path, help="directory for per-model JSON reports")
    args = parser.parse_args()

    specs = dict(builtin_suite())
    specs["torus2"] = torus2_spec()
    specs["torus2_resonant"] = torus2_spec(omega3=1.0)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)

    print(f"{'model':18s} {'exists':>6s} {'unique':>6s} {'germ':>6s} {'witness':>18s} {'seconds':>8s}")
    for name, spec in specs.items():
        t0 = time.perf_counter()
        model = make_cyclic_model(spec)
        a = analyze(model)
        d = a.decision
        germ = witness = "-"
        payload = {"model": spec, "analysis": a.to_dict()}
        if d.exists:
            grid = args.grid if model.k == 1 else 16
            rep = verify_germ(model, build_germ(model, grid, a))
            germ = verdict(rep)
            payload["germ"] = rep
            if not d.unique:
                wrep = verify_germ(model, second_germ_witness(model, analysis=a))
                witness = verdict(wrep)
                payload["witness"] = wrep
        dt = time.perf_counter() - t0
        unique = "-" if d.unique is None else str(d.unique)
        print(f"{name:18s} {str(d.exists):>6s} {unique:>6s} {germ:>6s} {witness:>18s} {dt:8.2f}")
        if args.out:
            (args.out / f"{name}.json").write_text(dumps(payload))


if __name__ == "__main__":
    main()
