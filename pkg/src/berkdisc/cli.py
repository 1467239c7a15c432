"""Command-line interface: scene-file driven access to every library operation.

Output is line-oriented ``key = value`` text with exact rationals printed as
``p/q`` (or JSON with the same encoding under ``--json``).  Exit codes:
0 success, 1 scene or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import demailly as dem
from . import extension as extmod
from .norms import h_generator, h_membership, normalization_shift, plus_norm, sup_norm
from .divisor import log_norm_eval
from .qsh import eval_qsh, gamma_tree, laplacian, regularize_seq, validate_qsh
from .rationals import format_exact, parse_fraction
from .scene import (Scene, SceneError, load_scene, parse_point,
                    profile_expression, emit_profile)
from .tree import TreeError


class _Output:
    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.data = {}

    def put(self, key, value):
        self.data[key] = value
        if not self.as_json:
            print(f"{key} = {value}")

    def put_rows(self, key, rows):
        self.data[key] = rows
        if not self.as_json:
            for row in rows:
                print("  ".join(str(c) for c in row))

    def finish(self):
        if self.as_json:
            print(json.dumps(self.data, indent=2))


def _fmt(value) -> str:
    return format_exact(value)


def _poly_text(f) -> str:
    return str(f)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="berkdisc",
                                     description="exact potential theory on the disc tree")
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("scene", help="scene JSON file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    cmd("validate", help="check tree and function invariants")
    p = cmd("eval", help="evaluate a function at a point")
    p.add_argument("--phi", required=True)
    p.add_argument("--at", required=True, metavar="POINT")
    p = cmd("laplacian", help="atomic Laplacian of a function")
    p.add_argument("--phi", required=True)
    p = cmd("gamma", help="mass-threshold subtree")
    p.add_argument("--phi", required=True)
    p.add_argument("--n", required=True, help="positive integer or 'inf'")
    p = cmd("norm", help="twisted sup-norm at a given eps")
    p.add_argument("--f", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--eps", required=True)
    p = cmd("plus-norm", help="limit norm as the twist vanishes")
    p.add_argument("--f", required=True)
    p.add_argument("--phi", required=True)
    p = cmd("hgen", help="generator of the finite-norm ideal")
    p.add_argument("--phi", required=True)
    p = cmd("extend", help="produce and verify an extension certificate")
    p.add_argument("--phi", required=True)
    p.add_argument("--z", required=True, metavar="POINT")
    p.add_argument("--log-at-z", default=None, help="prescribe log|f(z)|")
    p = cmd("verify", help="verify a supplied (f, eps0) pair")
    p.add_argument("--phi", required=True)
    p.add_argument("--z", required=True, metavar="POINT")
    p.add_argument("--f", required=True)
    p.add_argument("--eps0", required=True)
    p = cmd("demailly-bounds", help="certified approximation sandwich at a point")
    p.add_argument("--phi", required=True)
    p.add_argument("--m", required=True, type=int)
    p.add_argument("--at", required=True, metavar="POINT")
    p = cmd("demailly-exact", help="exact approximant of a single-pole function")
    p.add_argument("--phi", required=True)
    p.add_argument("--m", required=True, type=int)
    p = cmd("multiplier", help="multiplier-ideal exponents")
    p.add_argument("--phi", required=True)
    p = cmd("subadd", help="subadditivity report for two functions")
    p.add_argument("--phi", required=True)
    p.add_argument("--psi", required=True)
    p = cmd("regularize", help="term of the decreasing exhaustion sequence")
    p.add_argument("--phi", required=True)
    p.add_argument("--n", required=True, type=int)
    p = cmd("profile", help="breakpoint table along a root path")
    p.add_argument("--expr", required=True,
                   help="A | alpha | phi:<fn> | logf:<poly> | F:<poly>:<fn>:<eps>")
    p.add_argument("--to", required=True, metavar="POINT")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (SceneError, TreeError, ValueError, ArithmeticError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    out = _Output(args.json)
    scene = load_scene(args.scene)
    tree = scene.tree

    if args.command == "validate":
        failures = []
        for name, phi in sorted(scene.functions.items()):
            report = validate_qsh(phi)
            if report.ok:
                out.put(f"mass[{name}]", _fmt(report.mass))
            else:
                failures.extend(f"{name}: {v}" for v in report.violations)
        if failures:
            for line in failures:
                print(f"violation: {line}", file=sys.stderr)
            return 1
        out.put("valid", "true")

    elif args.command == "eval":
        phi = scene.function(args.phi)
        out.put("value", _fmt(eval_qsh(phi, parse_point(tree, args.at))))

    elif args.command == "laplacian":
        measure = laplacian(scene.function(args.phi))
        for nid, atom in sorted(measure.atoms.items()):
            out.put(f"atom[{nid}]", _fmt(atom))
        out.put("total", _fmt(measure.total_mass()))

    elif args.command == "gamma":
        n = None if args.n == "inf" else int(args.n)
        sub2 = gamma_tree(scene.function(args.phi), n)
        if sub2.is_empty():
            out.put("subtree", "empty")
        else:
            out.put("subtree", "root" if not sub2.cuts else
                    ", ".join(f"{eid}:{_fmt(cut)}" for eid, cut in sorted(sub2.cuts.items())))

    elif args.command == "norm":
        value = sup_norm(scene.poly(args.f), scene.function(args.phi), parse_fraction(args.eps))
        out.put("log_norm", _fmt(value))

    elif args.command == "plus-norm":
        phi = scene.function(args.phi)
        out.put("log_norm", _fmt(plus_norm(scene.poly(args.f), phi)))
        out.put("shift", _fmt(normalization_shift(phi)))

    elif args.command == "hgen":
        out.put("h", _poly_text(h_generator(scene.function(args.phi))))

    elif args.command == "extend":
        phi = scene.function(args.phi)
        z = parse_point(tree, args.z)
        target = None if args.log_at_z is None else parse_fraction(args.log_at_z)
        cert = extmod.extend(phi, z, log_value_at_z=target)
        out.put("f", _poly_text(cert.f))
        out.put("eps0", _fmt(cert.eps0))
        out.put("verified", str(extmod.verify_certificate(phi, z, cert)).lower())
        out.put("steps", "|".join(step.kind for step in cert.trace))

    elif args.command == "verify":
        phi = scene.function(args.phi)
        z = parse_point(tree, args.z)
        cert = extmod.make_certificate(phi, z, scene.poly(args.f), parse_fraction(args.eps0))
        out.put("verified", str(extmod.verify_certificate(phi, z, cert)).lower())

    elif args.command == "demailly-bounds":
        bound = dem.demailly_bounds(scene.function(args.phi), args.m,
                                    parse_point(tree, args.at))
        out.put("lower", _fmt(bound.lower))
        out.put("upper", _fmt(bound.upper))
        out.put("witness", _poly_text(bound.witness) if bound.witness else "none")

    elif args.command == "demailly-exact":
        approx = dem.demailly_exact_single_pole(scene.function(args.phi), args.m)
        out.put("root_value", _fmt(approx.root_value))
        for eid, s in sorted(approx.slopes.items()):
            out.put(f"slope[{eid}]", _fmt(s))

    elif args.command == "multiplier":
        data = dem.multiplier_exponents(scene.function(args.phi))
        for nid, (c, j) in sorted(data.entries.items()):
            out.put(f"c[{nid}]", _fmt(c))
            out.put(f"exponent[{nid}]", j)

    elif args.command == "subadd":
        ok, rows = dem.subadditivity_check(scene.function(args.phi), scene.function(args.psi))
        out.put("subadditive", str(ok).lower())
        out.put_rows("rows", [(r.node, r.floor_sum, r.floor_left, r.floor_right) for r in rows])

    elif args.command == "regularize":
        approx = regularize_seq(scene.function(args.phi), args.n)
        out.put("root_value", _fmt(approx.root_value))
        for eid, s in sorted(approx.slopes.items()):
            out.put(f"slope[{eid}]", _fmt(s))

    elif args.command == "profile":
        endpoint = parse_point(tree, args.to)
        value_at = profile_expression(scene, args.expr)
        table = emit_profile(tree, endpoint, value_at)
        out.put_rows("rows", [(_fmt(r.alpha), _fmt(r.a), _fmt(r.value)) for r in table.rows])

    out.finish()
    return 0


if __name__ == "__main__":
    sys.exit(main())
