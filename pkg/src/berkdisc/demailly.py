"""Lelong numbers, multiplier-ideal exponents, and certified approximation bounds.

For a nonpositive quasisubharmonic ``phi`` and an integer ``m >= 1`` the m-th
approximant is the normalized supremum of ``log|f| - log-limit-norm(f, m phi)``
over the ideal of finite-norm functions.  No general closed form is exposed:
the single-pole case has the exact formula ``floor(m a)/m * log|g|``, and
everywhere else the library reports certified two-sided bounds

    phi(y)  <=  lower  <=  upper  =  phi(y) + A(y)/m ,

the lower bound witnessed by an explicit polynomial (the ideal generator, an
extension certificate at the query point, or a user-supplied candidate) and
the upper bound exact.  A brute-force search over bounded root divisors
serves as an independent oracle for the supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .divisor import FormalPoly, log_norm_eval
from .extension import extend
from .norms import h_generator, lelong_ratio, plus_norm
from .qsh import QshFunction, eval_qsh, minimal_mass, node_atom, transfer_qsh
from .rationals import INF, NEG_INF, ExtendedRational, ext
from .tree import T1, T2, T3, TreePoint, descend_multiplicity, subdivide


@dataclass(frozen=True)
class MultiplierData:
    """Per-rigid-node Lelong numbers and their integer parts (zeros omitted)."""

    entries: Mapping[str, tuple[Fraction, int]] = field(default_factory=dict)

    def exponent(self, node_id: str) -> int:
        return self.entries.get(node_id, (Fraction(0), 0))[1]

    def exponent_map(self) -> dict[str, int]:
        return {nid: j for nid, (_, j) in self.entries.items() if j > 0}


@dataclass(frozen=True)
class DemaillyBound:
    point: TreePoint
    m: int
    lower: ExtendedRational
    upper: ExtendedRational
    witness: FormalPoly | None


def lelong_number(phi: QshFunction, x: str) -> Fraction:
    """Mass-to-multiplicity ratio at a T1 node."""
    minimal_mass(phi)
    return lelong_ratio(phi, x)


def multiplier_exponents(phi: QshFunction) -> MultiplierData:
    """Integer parts of the Lelong numbers; trivial away from rigid nodes."""
    minimal_mass(phi)
    tree = phi.tree
    entries = {}
    for nid in tree.nodes:
        if tree.node_type(nid) != T1:
            continue
        c = lelong_ratio(phi, nid)
        if c > 0:
            entries[nid] = (c, math.floor(c))
    return MultiplierData(entries)


def _single_pole_shape(phi: QshFunction) -> tuple[str, Fraction]:
    """The (pole node, coefficient) of ``phi = a log|g|``; raises otherwise."""
    tree = phi.tree
    if phi.root_value != 0:
        raise ValueError("single-pole form requires root value 0")
    if not phi.slopes:
        raise ValueError("single-pole form requires a nonzero slope")
    poles = [nid for nid in tree.nodes
             if tree.node_type(nid) == T1 and node_atom(phi, nid) > 0]
    if len(poles) != 1:
        raise ValueError("single-pole form requires exactly one pole")
    pole = poles[0]
    path = set(tree.path_edges(pole))
    slope = -Fraction(node_atom(phi, pole))
    for eid in tree.edges:
        expected = slope if eid in path else Fraction(0)
        if phi.slope(eid) != expected:
            raise ValueError("slopes do not describe a single pole branch")
    return pole, -slope / tree.mult(pole)


def demailly_exact_single_pole(phi: QshFunction, m: int) -> QshFunction:
    """Exact m-th approximant of ``a log|g|``: ``floor(m a)/m * log|g|``."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    pole, a = _single_pole_shape(phi)
    tree = phi.tree
    coeff = Fraction(math.floor(m * a), m)
    slope = -coeff * tree.mult(pole)
    return QshFunction(tree, Fraction(0), {eid: slope for eid in tree.path_edges(pole)})


def _candidate_value(f: FormalPoly, mphi: QshFunction, y: TreePoint, m: int) -> ExtendedRational:
    norm = plus_norm(f, mphi)
    if not norm.finite:
        return NEG_INF
    return (log_norm_eval(f, y) - norm) / m


def demailly_bounds(phi: QshFunction, m: int, y: TreePoint,
                    extra_candidates: Sequence[FormalPoly] = ()) -> DemaillyBound:
    """Certified sandwich around the m-th approximant at a query point.

    Requires ``phi <= 0``.  The upper bound ``phi(y) + A(y)/m`` is exact; the
    lower bound is the best of the ideal generator, an extension certificate
    produced at ``y``, and any supplied candidates, and is guaranteed to be
    at least ``phi(y)``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    minimal_mass(phi)
    if phi.root_value > 0:
        raise ValueError("demailly_bounds requires phi <= 0; shift it down first")
    tree = phi.tree
    a_y = tree.coords(y).a
    phi_y = eval_qsh(phi, y)
    upper = INF if not a_y.finite else phi_y + a_y / m
    mphi = m * phi

    best: ExtendedRational = NEG_INF
    witness: FormalPoly | None = None
    for f in (h_generator(mphi), *extra_candidates):
        value = _candidate_value(f, mphi, y, m)
        if value > best:
            best, witness = value, f

    cert = extend(mphi, y)
    norm = plus_norm(cert.f, cert.phi)  # normalized m*phi carried on cert.tree
    if norm.finite:
        value = (log_norm_eval(cert.f, cert.z) - norm + m * cert.shift) / m
        if value > best:
            best, witness = value, cert.f

    return DemaillyBound(y, m, best, upper, witness)


def _exponent_vectors(nodes: Sequence[str], budget: int):
    if not nodes:
        yield {}
        return
    head, rest = nodes[0], nodes[1:]
    for e in range(budget + 1):
        for tail in _exponent_vectors(rest, budget - e):
            if e:
                tail = {head: e, **tail}
            yield tail


def demailly_bruteforce(phi: QshFunction, m: int, y: TreePoint, degree_bound: int,
                        extra_points: Sequence[TreePoint] = ()) -> ExtendedRational:
    """Brute-force lower oracle for the m-th approximant at ``y``.

    Maximizes ``(log|f(y)| - limit-norm(f, m phi)) / m`` over all root
    divisors of total degree at most ``degree_bound`` supported on the
    scene's T1 nodes; monotone in the bound and never above the certified
    upper bound.  ``extra_points`` plants additional rigid candidates by
    multiplicity descent below the given points (an enlargement the search
    does not perform by itself).
    """
    if m < 1 or degree_bound < 0:
        raise ValueError("m must be positive and the degree bound nonnegative")
    minimal_mass(phi)
    tree = phi.tree
    for p in extra_points:
        if p.kind == "edge":
            tree2, pmap = subdivide(tree, {p.id: [p.offset]})
            phi = transfer_qsh(phi, tree2, pmap)
            anchor = pmap.translate(p).id
            y = pmap.translate(y)
            tree = tree2
        else:
            if tree.node_type(p.id) not in (T2, T3):
                raise ValueError(f"extra point {p} must be a T2/T3 node or an edge point")
            anchor = p.id
        tree, _rig = descend_multiplicity(tree, anchor)
        phi = QshFunction(tree, phi.root_value, phi.slopes)
    mphi = m * phi
    nodes = sorted(nid for nid in tree.nodes if tree.node_type(nid) == T1)
    best: ExtendedRational = NEG_INF
    for roots in _exponent_vectors(nodes, degree_bound):
        value = _candidate_value(FormalPoly(tree, 0, roots), mphi, y, m)
        if value > best:
            best = value
    return best


@dataclass(frozen=True)
class SubadditivityRow:
    node: str
    floor_sum: int
    floor_left: int
    floor_right: int

    @property
    def ok(self) -> bool:
        return self.floor_sum >= self.floor_left + self.floor_right


def subadditivity_check(phi: QshFunction, psi: QshFunction) -> tuple[bool, list[SubadditivityRow]]:
    """Checks floor(c(phi+psi)) >= floor(c(phi)) + floor(c(psi)) at every pole.

    This is a theorem for valid inputs; a False verdict indicates an
    implementation defect, not a property of the data.
    """
    if phi.tree is not psi.tree:
        raise ValueError("functions live on different trees")
    minimal_mass(phi)
    minimal_mass(psi)
    total = phi + psi
    rows = []
    for nid in sorted(phi.tree.nodes):
        if phi.tree.node_type(nid) != T1:
            continue
        row = SubadditivityRow(nid,
                               math.floor(lelong_ratio(total, nid)),
                               math.floor(lelong_ratio(phi, nid)),
                               math.floor(lelong_ratio(psi, nid)))
        if row.floor_sum or row.floor_left or row.floor_right:
            rows.append(row)
    return all(r.ok for r in rows), rows
