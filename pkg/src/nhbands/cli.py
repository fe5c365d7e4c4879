"""nhbands command-line front end.

Machine-readable output goes to stdout (or the ``--out`` file); diagnostics go
to stderr. Exit codes: 0 success, 2 usage or input error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import os
import sys
from dataclasses import dataclass, field

from . import __version__
from .algebra import Permutation, classification_group
from .braids import braid_along_loop
from .errors import InputError, NumericalError, RoundingResidue
from .models import axis_loop, kp_weyl_positions, parse_model
from .nodes import RESIDUE_TOL, Region, classify_all, find_nodes, sphere_flux
from .wilson import CylinderSpec, count_crossings, wilson_flow, write_flow_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("nhbands")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def number(text: str) -> float:
    """Float with optional ``pi`` arithmetic, e.g. ``-pi``, ``2*pi/3``, ``1.2``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError
    try:
        v = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def number_list(n):
    def parse(text):
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        return tuple(number(p) for p in parts)
    return parse


def bounded_int(lo, hi):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"{v} outside [{lo}, {hi}]")
        return v
    return parse


def positive(text):
    v = number(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def parse_loop(tokens):
    """``axis=<x|y|z> at=<a,b> [start=<s>]`` -> Loop."""
    opts = {}
    for tok in " ".join(tokens).split():
        key, eq, val = tok.partition("=")
        if not eq:
            raise InputError(f"bad loop option {tok!r}; expected key=value")
        opts[key] = val
    if opts.get("axis") not in ("x", "y", "z"):
        raise InputError("loop needs axis=x, axis=y or axis=z")
    if "at" not in opts:
        raise InputError("loop needs at=<a,b> for the two fixed coordinates")
    try:
        at = number_list(2)(opts["at"])
        start = number(opts.get("start", "0"))
    except argparse.ArgumentTypeError as exc:
        raise InputError(str(exc)) from None
    unknown = set(opts) - {"axis", "at", "start"}
    if unknown:
        raise InputError(f"unknown loop options {sorted(unknown)}")
    return axis_loop(opts["axis"], at, start=start)


def parse_region(text, dim=3, ball=None, tube=None):
    """``full`` (one Brillouin zone) or ``lo:hi,lo:hi,lo:hi``; a single value pins the axis."""
    if text.strip() == "full":
        bz = Region.brillouin_zone(dim)
        return Region(bz.lo, bz.hi, ball, tube)
    parts = text.split(",")
    if len(parts) != dim:
        raise InputError(f"region needs {dim} comma-separated ranges")
    lo, hi = [], []
    try:
        for p in parts:
            a, sep, b = p.partition(":")
            lo.append(number(a))
            hi.append(number(b) if sep else lo[-1])
    except argparse.ArgumentTypeError as exc:
        raise InputError(str(exc)) from None
    return Region(tuple(lo), tuple(hi), ball, tube)


@dataclass
class RunConfig:
    command: str
    model: object = None
    geometry: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)
    out: str = None
    threads: int = 1


def _dump(obj):
    return json.dumps(obj, indent=2)


def _model_number(text):
    try:
        return number(text)
    except argparse.ArgumentTypeError as exc:
        raise InputError(str(exc)) from None


def _default_threads():
    env = os.environ.get("NHB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer NHB_THREADS=%r", env)
    return 1


def build_parser():
    p = argparse.ArgumentParser(prog="nhbands", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=bounded_int(1, 256), default=None,
                   help="worker threads for slices/seeds (default: $NHB_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_model(sp):
        sp.add_argument("--model", required=True,
                        help="lattice-main:m=2 | lattice-supp:m=0.25 | kp:alpha=1.57 | kp-base | grid:FILE")

    b = sub.add_parser("braid", help="braid invariant along a straight Brillouin-zone loop")
    with_model(b)
    b.add_argument("--loop", nargs="+", required=True, metavar="KEY=VAL", help="axis=<x|y|z> at=<a,b> [start=s]")
    b.add_argument("--resolution", type=bounded_int(8, 10**6), default=401)

    w = sub.add_parser("wilson-flow", help="Wilson-loop phase flow on a cylinder and its crossing counts")
    with_model(w)
    w.add_argument("--center", type=number_list(2), required=True, metavar="CX,CY")
    w.add_argument("--radius", type=positive, required=True)
    w.add_argument("--loop-samples", type=bounded_int(32, 10**5), default=401)
    w.add_argument("--flow-samples", type=bounded_int(32, 10**5), default=401)
    w.add_argument("--theta0", type=number, default=0.0)
    w.add_argument("--kz0", type=number, default=-math.pi)
    w.add_argument("--out", required=True, help="CSV file for the flow")

    n = sub.add_parser("nodes", help="locate and classify band degeneracies")
    with_model(n)
    n.add_argument("--region", default="full", help="full | lo:hi,lo:hi,lo:hi (single value pins an axis)")
    n.add_argument("--coarse", type=bounded_int(8, 1024), default=32)
    n.add_argument("--tol", type=positive, default=1e-10)
    n.add_argument("--seed-threshold", type=positive, default=1e-2)
    n.add_argument("--ball", type=positive, default=None, help="keep only |k| <= BALL")
    n.add_argument("--exclude-tube", type=positive, default=None, help="drop nodes within this distance of the k_z axis")
    n.add_argument("--probe-radius", type=positive, default=0.3)
    n.add_argument("--no-classify", action="store_true")

    c = sub.add_parser("chern", help="per-band Chern numbers on a sphere")
    with_model(c)
    c.add_argument("--center", type=number_list(3), required=True, metavar="KX,KY,KZ")
    c.add_argument("--radius", type=positive, required=True)
    c.add_argument("--n-theta", type=bounded_int(3, 10**5), default=201)
    c.add_argument("--n-phi", type=bounded_int(8, 10**5), default=201)

    k = sub.add_parser("classify", help="classification group for a pair of permutations")
    k.add_argument("--n", type=bounded_int(2, 64), required=True)
    k.add_argument("--sigma1", required=True, help='cycle notation, e.g. "(1 2)(3 4)"; "" is the identity')
    k.add_argument("--sigma2", required=True)

    q = sub.add_parser("kp-weyl", help="in-plane Weyl points of the k.p model")
    q.add_argument("--alpha", type=number, required=True)
    return p


def cmd_braid(cfg, args):
    inv = braid_along_loop(cfg.model, cfg.geometry["loop"], cfg.resolution["loop"])
    print(_dump(inv.to_json()))


def cmd_wilson_flow(cfg, args):
    spec = CylinderSpec(center=cfg.geometry["center"], radius=cfg.geometry["radius"],
                        loop_samples=cfg.resolution["loop"], flow_samples=cfg.resolution["flow"],
                        theta0=cfg.geometry["theta0"], kz0=cfg.geometry["kz0"])
    flow = wilson_flow(cfg.model, spec, threads=cfg.threads)
    report = count_crossings(flow)
    write_flow_csv(flow, cfg.out)
    print(_dump(report.to_json()))


def cmd_nodes(cfg, args):
    failures = []
    nodes = find_nodes(cfg.model, cfg.geometry["region"], cfg.resolution["coarse"], args.tol,
                       seed_threshold=args.seed_threshold, failures=failures, threads=cfg.threads)
    for f in failures:
        print(f"warning: {f}", file=sys.stderr)
    if not args.no_classify:
        nodes = classify_all(cfg.model, nodes, cfg.geometry["probe_radius"], threads=cfg.threads)
    print(_dump([n.to_json() for n in nodes]))


def cmd_chern(cfg, args):
    g = cfg.geometry
    flux = sphere_flux(cfg.model, g["center"], g["radius"], cfg.resolution["theta"], cfg.resolution["phi"],
                       threads=cfg.threads)
    if flux.residue >= RESIDUE_TOL:
        raise RoundingResidue(
            f"Berry flux {flux.raw.tolist()} is {flux.residue:.3g} from an integer; raise --n-theta/--n-phi")
    print(_dump({"charges": list(flux.charges), "raw": [float(x) for x in flux.raw], "residue": flux.residue}))


def cmd_classify(cfg, args):
    try:
        s1 = Permutation.from_cycles(args.sigma1, args.n)
        s2 = Permutation.from_cycles(args.sigma2, args.n)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    group = classification_group(s1, s2)
    print(str(group))
    print(json.dumps({"group": str(group), **group.to_json()}))


def cmd_kp_weyl(cfg, args):
    pts = kp_weyl_positions(args.alpha)
    print(_dump({"alpha": args.alpha, "points": [[float(x) for x in p] for p in pts]}))


COMMANDS = {
    "braid": cmd_braid, "wilson-flow": cmd_wilson_flow, "nodes": cmd_nodes,
    "chern": cmd_chern, "classify": cmd_classify, "kp-weyl": cmd_kp_weyl,
}


def make_config(args) -> RunConfig:
    cfg = RunConfig(args.command, threads=args.threads or _default_threads())
    if hasattr(args, "model"):
        cfg.model = parse_model(args.model, _model_number)
    if args.command == "braid":
        cfg.geometry["loop"] = parse_loop(args.loop)
        cfg.resolution["loop"] = args.resolution
    elif args.command == "wilson-flow":
        cfg.geometry.update(center=args.center, radius=args.radius, theta0=args.theta0, kz0=args.kz0)
        cfg.resolution.update(loop=args.loop_samples, flow=args.flow_samples)
        cfg.out = args.out
    elif args.command == "nodes":
        cfg.geometry["region"] = parse_region(args.region, cfg.model.dim, args.ball, args.exclude_tube)
        cfg.geometry["probe_radius"] = args.probe_radius
        cfg.resolution["coarse"] = args.coarse
    elif args.command == "chern":
        cfg.geometry.update(center=args.center, radius=args.radius)
        cfg.resolution.update(theta=args.n_theta, phi=args.n_phi)
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(args)
        COMMANDS[args.command](cfg, args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    sys.stdout.flush()
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
