"""Formal polynomials as root divisors on the rigid (type-1) nodes.

A polynomial is tracked only through absolute values: a constant log-norm
plus an exponent at each type-1 node where it vanishes.  Each irreducible
factor is normalized to Gauss norm 1, which gives the exact evaluation rule

    log|f(y)| = const_log - sum_x e_x * m(x) * alpha(y join x)

and, by Poincare-Lelong, the Laplacian with atom ``e_x * m(x)`` at every root
and the balancing negative atom at the Gauss point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .qsh import AtomicMeasure, QshFunction
from .rationals import ExtendedRational, ext
from .tree import DiscTree, PointMap, T1, TreePoint


@dataclass(frozen=True)
class FormalPoly:
    tree: DiscTree
    const_log: Fraction = Fraction(0)
    roots: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "const_log", Fraction(self.const_log))
        clean = {}
        for nid, e in self.roots.items():
            e = int(e)
            if e < 0:
                raise ValueError(f"negative exponent at {nid!r}")
            if nid not in self.tree.nodes:
                raise ValueError(f"root at unknown node {nid!r}")
            if self.tree.node_type(nid) != T1:
                raise ValueError(f"roots may only sit at T1 nodes, not {nid!r}")
            if e:
                clean[nid] = e
        object.__setattr__(self, "roots", clean)

    def exponent(self, node_id: str) -> int:
        return self.roots.get(node_id, 0)

    def degree_sum(self) -> int:
        return sum(self.roots.values())

    def __mul__(self, other: "FormalPoly") -> "FormalPoly":
        return poly_multiply(self, other)

    def __pow__(self, k: int) -> "FormalPoly":
        return poly_power(self, k)

    def __eq__(self, other):
        return (isinstance(other, FormalPoly) and self.tree is other.tree
                and self.const_log == other.const_log and self.roots == other.roots)

    def __str__(self):
        factors = [f"g_{nid}^{e}" for nid, e in sorted(self.roots.items())]
        body = " * ".join(factors) if factors else "1"
        if self.const_log != 0:
            body += f" * exp({self.const_log})"
        return body


def poly_one(tree: DiscTree) -> FormalPoly:
    return FormalPoly(tree, Fraction(0), {})


def generator_at(tree: DiscTree, node_id: str) -> FormalPoly:
    """The normalized irreducible factor vanishing at one rigid node."""
    return FormalPoly(tree, Fraction(0), {node_id: 1})


def log_norm_eval(f: FormalPoly, p: TreePoint) -> ExtendedRational:
    """log|f(p)|; equals -inf exactly at the roots of f."""
    tree = f.tree
    total = ext(f.const_log)
    for nid, e in f.roots.items():
        alpha = tree.coords(tree.join(p, TreePoint.node(nid))).alpha
        total = total - alpha * (e * tree.mult(nid))
    return total


def pl_divisor_laplacian(f: FormalPoly) -> AtomicMeasure:
    """Divisor of zeros as an atomic measure, balanced at the Gauss point."""
    atoms: dict[str, Fraction] = {}
    total = Fraction(0)
    for nid, e in f.roots.items():
        w = Fraction(e * f.tree.mult(nid))
        atoms[nid] = atoms.get(nid, Fraction(0)) + w
        total += w
    if total:
        atoms[f.tree.root] = atoms.get(f.tree.root, Fraction(0)) - total
    return AtomicMeasure(atoms)


def poly_multiply(f: FormalPoly, g: FormalPoly) -> FormalPoly:
    if f.tree is not g.tree:
        raise ValueError("cannot multiply polynomials on different trees")
    roots = dict(f.roots)
    for nid, e in g.roots.items():
        roots[nid] = roots.get(nid, 0) + e
    return FormalPoly(f.tree, f.const_log + g.const_log, roots)


def poly_power(f: FormalPoly, k: int) -> FormalPoly:
    k = int(k)
    if k < 0:
        raise ValueError("negative powers are not representable")
    return FormalPoly(f.tree, f.const_log * k, {nid: e * k for nid, e in f.roots.items()})


def edge_root_weight(f: FormalPoly, edge_id: str) -> Fraction:
    """Total weighted exponent ``sum e_x m(x)`` of the roots below an edge.

    This is minus the alpha-slope of log|f| along the edge.
    """
    tree = f.tree
    total = Fraction(0)
    for nid, e in f.roots.items():
        if edge_id in tree.path_edges(nid):
            total += e * tree.mult(nid)
    return total


def as_qsh(f: FormalPoly) -> QshFunction:
    """log|f| as a piecewise-affine function on the tree."""
    slopes = {eid: -edge_root_weight(f, eid) for eid in f.tree.edges}
    return QshFunction(f.tree, f.const_log, slopes)


def poly_divides(g: FormalPoly, f: FormalPoly) -> bool:
    """Exponentwise divisibility (constants are units and carry no content)."""
    if g.tree is not f.tree:
        raise ValueError("polynomials live on different trees")
    return all(f.exponent(nid) >= e for nid, e in g.roots.items())


def transfer_poly(f: FormalPoly, tree2: DiscTree, pmap: PointMap) -> FormalPoly:
    """Carry f onto a refinement of its tree (root node ids are preserved)."""
    return FormalPoly(tree2, f.const_log, dict(f.roots))
