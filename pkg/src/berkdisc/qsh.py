"""Quasisubharmonic functions as piecewise-affine data on a disc tree.

A function is stored as its value at the root plus one slope per edge, the
slope being ``d(phi)/d(alpha)`` oriented away from the root.  The function is
affine in alpha on each edge and constant beyond its support, so the tree
Laplacian is the atomic measure of slope discrepancies at nodes:

    atom(y) = sum of child-edge slopes - parent-edge slope      (y != root)
    atom(root) = sum of root-child slopes

Validity means every non-root atom is >= 0; the minimal admissible root mass
is then ``-atom(root)``, a nonnegative rational.  Valid functions have all
slopes <= 0 and are nonincreasing away from the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .rationals import INF, NEG_INF, ExtendedRational, ext
from .tree import DiscTree, PointMap, Subtree, T1, TreePoint, hull, subdivide


@dataclass(frozen=True)
class QshFunction:
    tree: DiscTree
    root_value: Fraction
    slopes: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "root_value", Fraction(self.root_value))
        clean = {}
        for eid, s in self.slopes.items():
            s = Fraction(s)
            if eid not in self.tree.edges:
                raise ValueError(f"slope on unknown edge {eid!r}")
            if s != 0:
                clean[eid] = s
        object.__setattr__(self, "slopes", clean)

    def slope(self, edge_id: str) -> Fraction:
        return self.slopes.get(edge_id, Fraction(0))

    def with_slopes(self, updates: Mapping[str, Fraction]) -> "QshFunction":
        merged = dict(self.slopes)
        for eid, s in updates.items():
            merged[eid] = Fraction(s)
        return QshFunction(self.tree, self.root_value, merged)

    def shifted(self, delta) -> "QshFunction":
        return QshFunction(self.tree, self.root_value + Fraction(delta), self.slopes)

    def __add__(self, other: "QshFunction") -> "QshFunction":
        if not isinstance(other, QshFunction):
            return NotImplemented
        if self.tree is not other.tree:
            raise ValueError("cannot add functions on different trees")
        merged = dict(self.slopes)
        for eid, s in other.slopes.items():
            merged[eid] = merged.get(eid, Fraction(0)) + s
        return QshFunction(self.tree, self.root_value + other.root_value, merged)

    def __mul__(self, scalar) -> "QshFunction":
        c = Fraction(scalar)
        return QshFunction(self.tree, self.root_value * c,
                           {eid: s * c for eid, s in self.slopes.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, QshFunction) and self.tree is other.tree
                and self.root_value == other.root_value and self.slopes == other.slopes)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported signed measure, one atom per node."""

    atoms: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "atoms",
                           {nid: Fraction(v) for nid, v in self.atoms.items() if v != 0})

    def __getitem__(self, node_id: str) -> Fraction:
        return self.atoms.get(node_id, Fraction(0))

    def total_mass(self) -> Fraction:
        return sum(self.atoms.values(), Fraction(0))


@dataclass(frozen=True)
class QshValidation:
    ok: bool
    mass: Fraction | None
    violations: tuple[str, ...]


def constant_qsh(tree: DiscTree, value=0) -> QshFunction:
    return QshFunction(tree, Fraction(value), {})


def eval_qsh(phi: QshFunction, p: TreePoint) -> ExtendedRational:
    """phi(p): the root value plus slope * (alpha length) along the root path.

    Equals -inf exactly at type-1 poles (negative slope on an infinite edge).
    """
    tree = phi.tree
    edges, offset = tree._edge_path(p)
    total = ext(phi.root_value)
    for eid in edges[:-1] if offset is not None else edges:
        s = phi.slope(eid)
        if s != 0:
            e = tree.edges[eid]
            total = total + (e.a_length / e.mult) * s
    if offset is not None:
        eid = edges[-1]
        s = phi.slope(eid)
        if s != 0:
            total = total + ext(Fraction(offset, tree.edges[eid].mult)) * s
    return total


def node_atom(phi: QshFunction, node_id: str) -> Fraction:
    tree = phi.tree
    total = sum((phi.slope(c) for c in tree.children(node_id)), Fraction(0))
    if node_id != tree.root:
        total -= phi.slope(node_id)
    return total


def laplacian(phi: QshFunction) -> AtomicMeasure:
    """Atomic Laplacian of phi; its total mass is exactly zero."""
    atoms = {}
    for nid in phi.tree.nodes:
        a = node_atom(phi, nid)
        if a != 0:
            atoms[nid] = a
    return AtomicMeasure(atoms)


def validate_qsh(phi: QshFunction) -> QshValidation:
    """Check the subharmonicity atoms; violations are data, not exceptions."""
    violations = []
    for nid in sorted(phi.tree.nodes):
        if nid == phi.tree.root:
            continue
        a = node_atom(phi, nid)
        if a < 0:
            violations.append(f"negative atom {a} at node {nid!r}")
    if violations:
        return QshValidation(False, None, tuple(violations))
    return QshValidation(True, max(Fraction(0), -node_atom(phi, phi.tree.root)), ())


def minimal_mass(phi: QshFunction) -> Fraction:
    """Mass of the minimal admissible root measure; raises if phi is invalid."""
    report = validate_qsh(phi)
    if not report.ok:
        raise ValueError("not quasisubharmonic: " + "; ".join(report.violations))
    return report.mass


def below_mass(phi: QshFunction, edge_id: str) -> Fraction:
    """Mass of the atoms strictly below the top of the given edge.

    By telescoping this is just minus the edge slope; it is constant on the
    half-open edge (top excluded, bottom node included).
    """
    return -phi.slope(edge_id)


def transfer_qsh(phi: QshFunction, tree2: DiscTree, pmap: PointMap) -> QshFunction:
    """Carry phi onto a subdivision refinement of its tree (values unchanged)."""
    slopes = {}
    for eid, s in phi.slopes.items():
        for piece in pmap.edge_pieces(eid):
            slopes[piece] = s
    return QshFunction(tree2, phi.root_value, slopes)


def retract_pullback(phi: QshFunction, subtree: Subtree) -> QshFunction:
    """Compose phi with the retraction onto the subtree.

    Slopes outside the subtree are zeroed, so the result equals phi on the
    subtree and is constant beyond it.  Mid-edge subtree cuts become nodes of
    the result's (refined) tree, keeping every breakpoint at a node.
    """
    out, _ = pullback_with_map(phi, subtree)
    return out


def pullback_with_map(phi: QshFunction, subtree: Subtree) -> tuple[QshFunction, PointMap]:
    if subtree.tree is not phi.tree:
        raise ValueError("subtree and function live on different trees")
    if subtree.is_empty():
        raise ValueError("pullback requires a subtree containing the root")
    tree = phi.tree
    cut_offsets = {eid: [cut.as_fraction()] for eid, cut in subtree.cuts.items()
                   if cut != tree.edges[eid].a_length}
    tree2, pmap = subdivide(tree, cut_offsets)
    moved = transfer_qsh(phi, tree2, pmap)
    keep = set()
    for eid, cut in subtree.cuts.items():
        pieces = pmap.edge_pieces(eid)
        if cut == tree.edges[eid].a_length:
            keep.update(pieces)
        else:
            keep.update(pieces[:-1])
    slopes = {eid: s for eid, s in moved.slopes.items() if eid in keep}
    return QshFunction(tree2, moved.root_value, slopes), pmap


def gamma_tree(phi: QshFunction, n: int | None) -> Subtree:
    """The mass-threshold subtree driving the extension induction.

    For finite ``n`` the threshold is ``n/(n+1)`` times the multiplicity, for
    ``n = None`` (infinity) the multiplicity itself: a point x belongs when
    the measure carried by {y <= x} is at least the threshold at x.  The
    below mass and the multiplicity are constant on half-open edges, so the
    subtree is a union of whole edges (possibly just the root, or empty).
    """
    mass = minimal_mass(phi)
    if n is None:
        num, den = 1, 1
    else:
        if n < 1:
            raise ValueError("n must be a positive integer (or None for the limit tree)")
        num, den = n, n + 1
    tree = phi.tree
    if mass * den < num:  # root fails: the subtree is empty
        return Subtree.empty(tree)
    edge_ids = [eid for eid, e in tree.edges.items()
                if below_mass(phi, eid) * den >= num * e.mult]
    sub = Subtree.from_full_edges(tree, edge_ids)  # connectivity is validated here
    return sub


def regularize_subtree(phi: QshFunction, n: int) -> Subtree:
    """Exhaustion subtree: below mass >= 2^-n and distance from the root <= 2^n."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    minimal_mass(phi)
    tree = phi.tree
    threshold = Fraction(1, 2 ** n)
    radius = Fraction(2 ** n)
    cuts = {}
    for eid, e in tree.edges.items():
        if below_mass(phi, eid) < threshold:
            continue
        top_alpha = tree._coords[e.parent].alpha
        if not top_alpha.finite or top_alpha.as_fraction() >= radius:
            continue
        room = ext((radius - top_alpha.as_fraction()) * e.mult)
        cuts[eid] = min(room, e.a_length)
    return Subtree(tree, cuts)


def regularize_seq(phi: QshFunction, n: int) -> QshFunction:
    """n-th term of the decreasing exhaustion sequence converging to phi."""
    return retract_pullback(phi, regularize_subtree(phi, n))
