"""Command line entry point ``robustmem``.

Exit codes: 0 success, 1 verification failure, 2 usage or precondition
error, 3 construction or search failure. Every command that writes an
artifact also writes ``<artifact>.manifest.json`` describing the run.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (RobustnessSpec, gen_random_separated, load_csv, parse_p, save_csv,
                       separation, validate_radius)
from .errors import (CoverFailure, GadgetRangeError, GenerationError, InfeasibleRadiusError,
                     InvalidWidthError, ParseError, SearchFailure, UndefinedSeparationError)
from .netcore import deserialize, jsonable, serialize
from .verifier import default_threads

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_BUILD = 0, 1, 2, 3


def derive_seed(seed: int, stream: str) -> int:
    """Independent per-stream seed derived from the global ``--seed``."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _dump(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def _write(path, text_or_bytes):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    mode = "wb" if isinstance(text_or_bytes, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(text_or_bytes)


class _Run:
    """Collects inputs/outputs of one invocation for the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.inputs, self.outputs = [], []
        self.t0 = time.perf_counter()

    def read(self, path):
        self.inputs.append(str(path))
        return path

    def wrote(self, path):
        self.outputs.append(str(path))

    def manifest(self, primary):
        flags = {k: v for k, v in vars(self.args).items() if k != "func"}
        doc = {
            "subcommand": self.args.command_path,
            "flags": flags,
            "seed": getattr(self.args, "seed", None),
            "threads": getattr(self.args, "threads", None),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "tool_version": __version__,
            "duration_s": round(time.perf_counter() - self.t0, 6),
        }
        _write(str(primary) + ".manifest.json", _dump(doc))


# ----------------------------------------------------------------------------
# commands

def _cmd_gadget(args, run):
    from . import gadgets as g
    name = args.name.replace("-", "_")
    if name == "square":
        net = g.build_square(args.epsilon)
    elif name == "mult":
        net = g.build_mult(args.epsilon)
    elif name == "power_nat":
        net = g.build_power_nat(args.epsilon, int(_need(args.p, "--p")))
    elif name == "power_frac":
        net = g.build_power_frac(args.epsilon, float(_need(args.p, "--p")))
    elif name == "poly":
        coeffs = np.loadtxt(run.read(_need(args.coeffs, "--coeffs")), delimiter=",", ndmin=1)
        net = g.build_poly(args.epsilon, coeffs.ravel())
    elif name == "step":
        net = g.build_step(int(_need(args.C, "--C")))
    elif name == "max":
        net = g.build_max_accumulator()
    elif name == "ball_indicator":
        centre = [float(v) for v in _need(args.center, "--center").split(",")]
        net = g.build_ball_indicator(centre, args.y0, _need(args.r, "--r"), _need(args.w, "--w"),
                                     parse_p(_need(args.p, "--p")))
    else:
        raise _Usage(f"unknown gadget {args.name!r}")
    _write(args.output, serialize(net))
    run.wrote(args.output)
    spec = g.gadget_spec(net)
    side = _sidecar(args.output, ".gadget.json")
    _write(side, _dump(spec.__dict__))
    run.wrote(side)
    run.manifest(args.output)
    print(_dump({"name": spec.name, "width": net.width, "depth": net.depth}), end="")
    return EXIT_OK


def _sidecar(path, suffix):
    p = str(path)
    return (p[:-5] if p.endswith(".json") else p) + suffix


def _cmd_dataset_gen(args, run):
    ds = gen_random_separated(args.n, args.d, args.c, args.delta, parse_p(args.q),
                              seed=derive_seed(args.seed, "datasets"))
    save_csv(ds, args.output)
    run.wrote(args.output)
    run.manifest(args.output)
    print(_dump({"n": ds.n, "d": ds.d, "separation": separation(ds, parse_p(args.q))}), end="")
    return EXIT_OK


def _cmd_dataset_check(args, run):
    ds = load_csv(run.read(args.dataset))
    q = parse_p(args.q)
    report = {"n": ds.n, "d": ds.d, "classes": int(np.unique(ds.labels).size)}
    code = EXIT_OK
    try:
        delta = separation(ds, q)
        report["separation"] = delta
    except UndefinedSeparationError:
        report["separation"] = None
        delta = None
    if args.sigma is not None and delta is not None:
        v = validate_radius(RobustnessSpec(parse_p(args.p), args.sigma, q), delta, ds.d)
        report.update(feasible=v.feasible, ratio=v.ratio, threshold=v.threshold)
        code = EXIT_OK if v.feasible else EXIT_VERIFY
    _emit(args, run, report)
    return code


def _emit(args, run, report):
    text = _dump(report)
    if getattr(args, "output", None):
        _write(args.output, text)
        run.wrote(args.output)
        run.manifest(args.output)
    print(text, end="")


def _cmd_bounds(args, run):
    from .memorizer import bounds_report
    rep = bounds_report(args.n, args.d, args.k, parse_p(args.p), parse_p(args.q),
                        args.delta, args.sigma)
    _emit(args, run, rep.to_json())
    return EXIT_OK


def _cmd_build(args, run):
    from .memorizer import build_fullwidth, build_smallwidth
    ds = load_csv(run.read(args.dataset))
    spec = RobustnessSpec(parse_p(args.p), args.sigma, parse_p(args.q))
    if args.kind == "fullwidth":
        net = build_fullwidth(ds, spec)
        if args.k is not None:
            from .netcore import pad_width
            net = pad_width(net, args.k)
    else:
        if args.k is None:
            raise _Usage("build smallwidth needs --k")
        net = build_smallwidth(ds, spec, args.k, max_draws=args.max_draws,
                               seed=derive_seed(args.seed, "projector"))
    _write(args.output, serialize(net))
    run.wrote(args.output)
    run.manifest(args.output)
    print(_dump({"name": net.meta.get("name"), "width": net.width, "depth": net.depth}), end="")
    return EXIT_OK


def _cmd_project_find(args, run):
    from .projector import find_preserving_projection
    ds = load_csv(run.read(args.dataset))
    cert = find_preserving_projection(ds, args.sigma, args.k, max_draws=args.max_draws,
                                      seed=derive_seed(args.seed, "projector"))
    _write(args.output, _dump(cert.to_json()))
    run.wrote(args.output)
    run.manifest(args.output)
    print(_dump({"epsilon": cert.epsilon, "draws_used": cert.draws_used,
                 "min_margin": float(cert.margins.min()),
                 "outside_guarantee": cert.outside_guarantee}), end="")
    return EXIT_OK


def _cmd_hard_build(args, run):
    from .hardness import build_hard_instance
    inst = build_hard_instance(args.n, args.d, args.k, args.delta, args.sigma,
                               seed=derive_seed(args.seed, "hardness"))
    stem = str(args.output)
    for suffix in (".csv", ".json"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    save_csv(inst.dataset, stem + ".csv")
    _write(stem + ".json", _dump(inst.to_json()))
    run.wrote(stem + ".csv")
    run.wrote(stem + ".json")
    run.manifest(stem + ".json")
    print(_dump({"n": inst.dataset.n, "r": inst.r,
                 "within_hypothesis": inst.within_hypothesis}), end="")
    return EXIT_OK


def _load_matrix(path):
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        for key in ("M", "P", "matrix"):
            if key in doc:
                return np.asarray(doc[key], dtype=float)
        raise _Usage(f"{path}: expected a key 'M', 'P' or 'matrix'")
    return np.asarray(doc, dtype=float)


def _cmd_hard_witness(args, run):
    from .hardness import HardInstance, witness_nonpreservation
    M = _load_matrix(run.read(args.matrix))
    with open(run.read(args.instance)) as fh:
        inst = HardInstance.from_json(json.load(fh))
    w = witness_nonpreservation(M, inst, tol=args.tol)
    _emit(args, run, w.to_json())
    return EXIT_OK if w.found else EXIT_VERIFY


def _cmd_verify(args, run):
    from .verifier import verify_robust
    with open(run.read(args.net), "rb") as fh:
        net = deserialize(fh.read())
    ds = load_csv(run.read(args.dataset))
    spec = RobustnessSpec(parse_p(args.p), args.sigma, parse_p(args.q))
    rep = verify_robust(net, ds, spec, n_interior=args.samples, n_boundary=args.boundary_samples,
                        seed=derive_seed(args.seed, "verifier"), threads=args.threads)
    _emit(args, run, rep.to_json())
    return EXIT_OK if rep.passed else EXIT_VERIFY


class _Usage(Exception):
    pass


def _need(value, flag):
    if value is None:
        raise _Usage(f"{flag} is required here")
    return value


# ----------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    common.add_argument("--threads", type=int, default=default_threads(),
                        help="worker cap; defaults to $ROBUSTMEM_THREADS or 1")

    ap = argparse.ArgumentParser(prog="robustmem", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gadget", parents=[common], help="build an elementary gadget network")
    g.add_argument("name", help="square, mult, power-nat, power-frac, poly, step, max, ball-indicator")
    g.add_argument("--epsilon", type=float, default=0.01, help="target uniform error")
    g.add_argument("--p", help="power / norm parameter")
    g.add_argument("--coeffs", help="CSV file of polynomial coefficients c0,...,cD")
    g.add_argument("--C", type=int, help="number of plateaus for the step gadget")
    g.add_argument("--center", help="ball-indicator center, comma separated")
    g.add_argument("--y0", type=float, default=1.0, help="ball-indicator value")
    g.add_argument("--r", type=float, help="ball-indicator radius")
    g.add_argument("--w", type=float, help="ball-indicator transition width")
    g.add_argument("-o", "--output", required=True, help="network JSON path")
    g.set_defaults(func=_cmd_gadget, command_path="gadget")

    d = sub.add_parser("dataset", help="generate or inspect datasets")
    dsub = d.add_subparsers(dest="action", required=True)
    dg = dsub.add_parser("gen", parents=[common], help="random separated dataset")
    dg.add_argument("--n", type=int, required=True, help="number of points")
    dg.add_argument("--d", type=int, required=True, help="dimension")
    dg.add_argument("--c", type=int, default=2, help="number of classes")
    dg.add_argument("--delta", type=float, default=1.0, help="minimum cross-class distance")
    dg.add_argument("--q", default="2", help="separation norm")
    dg.add_argument("-o", "--output", required=True, help="CSV path")
    dg.set_defaults(func=_cmd_dataset_gen, command_path="dataset gen")
    dc = dsub.add_parser("check", parents=[common], help="separation and radius feasibility")
    dc.add_argument("--dataset", required=True, help="CSV path")
    dc.add_argument("--q", default="2", help="separation norm")
    dc.add_argument("--sigma", type=float, help="robustness radius to check")
    dc.add_argument("--p", default="2", help="robustness norm")
    dc.add_argument("-o", "--output", help="write the report here as well")
    dc.set_defaults(func=_cmd_dataset_check, command_path="dataset check")

    b = sub.add_parser("bounds", parents=[common], help="width/radius bounds and regime")
    for flag, typ in (("--n", int), ("--d", int), ("--k", int)):
        b.add_argument(flag, type=typ, required=True)
    b.add_argument("--p", default="2", help="robustness norm")
    b.add_argument("--q", default="2", help="separation norm")
    b.add_argument("--delta", type=float, required=True, help="separation")
    b.add_argument("--sigma", type=float, required=True, help="robustness radius")
    b.add_argument("-o", "--output", help="write the report here as well")
    b.set_defaults(func=_cmd_bounds, command_path="bounds")

    bu = sub.add_parser("build", parents=[common], help="construct a robust memorizer")
    bu.add_argument("kind", choices=["fullwidth", "smallwidth"])
    bu.add_argument("--dataset", required=True, help="CSV path")
    bu.add_argument("--sigma", type=float, required=True, help="robustness radius")
    bu.add_argument("--p", default="2", help="robustness norm")
    bu.add_argument("--q", default="2", help="separation norm")
    bu.add_argument("--k", type=int, help="target width (required for smallwidth; pads fullwidth)")
    bu.add_argument("--max-draws", type=int, default=1000, help="projection draws (smallwidth)")
    bu.add_argument("-o", "--output", required=True, help="network JSON path")
    bu.set_defaults(func=_cmd_build, command_path="build")

    pr = sub.add_parser("project", help="preserving projections")
    psub = pr.add_subparsers(dest="action", required=True)
    pf = psub.add_parser("find", parents=[common], help="search a certified projection")
    pf.add_argument("--dataset", required=True, help="CSV path")
    pf.add_argument("--sigma", type=float, required=True, help="l_2 radius to preserve")
    pf.add_argument("--k", type=int, required=True, help="projection rank")
    pf.add_argument("--max-draws", type=int, default=1000, help="number of random draws")
    pf.add_argument("-o", "--output", required=True, help="certificate JSON path")
    pf.set_defaults(func=_cmd_project_find, command_path="project find")

    h = sub.add_parser("hard", help="hard instances")
    hsub = h.add_subparsers(dest="action", required=True)
    hb = hsub.add_parser("build", parents=[common], help="two-sphere hard instance")
    for flag, typ in (("--n", int), ("--d", int), ("--k", int)):
        hb.add_argument(flag, type=typ, required=True)
    hb.add_argument("--delta", type=float, default=1.0, help="separation")
    hb.add_argument("--sigma", type=float, required=True, help="robustness radius")
    hb.add_argument("-o", "--output", required=True, help="output stem (writes .csv and .json)")
    hb.set_defaults(func=_cmd_hard_build, command_path="hard build")
    hw = hsub.add_parser("witness", parents=[common], help="collision witness for a matrix")
    hw.add_argument("--matrix", required=True, help="JSON with key M (or P, or a bare list)")
    hw.add_argument("--instance", required=True, help="instance JSON from 'hard build'")
    hw.add_argument("--tol", type=float, default=1e-6, help="residual tolerance")
    hw.add_argument("-o", "--output", help="write the witness here as well")
    hw.set_defaults(func=_cmd_hard_witness, command_path="hard witness")

    v = sub.add_parser("verify", parents=[common], help="sample-check robust memorization")
    v.add_argument("--net", required=True, help="network JSON path")
    v.add_argument("--dataset", required=True, help="CSV path")
    v.add_argument("--sigma", type=float, required=True, help="robustness radius")
    v.add_argument("--p", default="2", help="robustness norm")
    v.add_argument("--q", default="2", help="separation norm")
    v.add_argument("--samples", type=int, default=1000, help="interior samples per point")
    v.add_argument("--boundary-samples", type=int, default=100, help="boundary samples per point")
    v.add_argument("-o", "--output", help="write the report here as well")
    v.set_defaults(func=_cmd_verify, command_path="verify")
    return ap


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = _Run(args, argv)
    try:
        return args.func(args, run)
    except (_Usage, InvalidWidthError, InfeasibleRadiusError, GadgetRangeError, ParseError,
            UndefinedSeparationError, FileNotFoundError, ValueError) as exc:
        print(f"robustmem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SearchFailure, CoverFailure, GenerationError) as exc:
        print(f"robustmem: construction failed: {exc}", file=sys.stderr)
        return EXIT_BUILD


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
