"""Twisted sup-norms, their limit as the twist vanishes, and the ideal H.

For a formal polynomial f and a quasisubharmonic phi the twisted log-norm at
parameter eps >= 0 is the exact supremum over the disc minus the polar locus
of

    F_eps = log|f| - (1 + eps) * phi - A .

Every direction off the finite model tree strictly decreases F_eps (phi and
log|f| are constant there while A grows at speed m), so the supremum is
realized on the tree: F_eps is affine in alpha on each edge, the candidates
are the finite node values, and an infinite edge contributes +inf exactly
when its tail slope is positive.

The limit norm as eps -> 0+ exists because the sup-norm is monotone in the
twist; it is computed symbolically (every candidate is affine in eps), and it
is finite exactly when f is divisible by the generator of the ideal H(phi),
the product of g_x^floor(c_x) over the rigid poles, where c_x is the
Lelong-type mass-to-multiplicity ratio at x.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .divisor import FormalPoly, edge_root_weight, log_norm_eval
from .qsh import QshFunction, below_mass, eval_qsh, minimal_mass, node_atom
from .rationals import INF, ExtendedRational, ext
from .tree import T1, TreePoint

LogValue = ExtendedRational


def _require_shared_tree(f: FormalPoly, phi: QshFunction):
    if f.tree is not phi.tree:
        raise ValueError("polynomial and function live on different trees")


def sup_norm(f: FormalPoly, phi: QshFunction, eps) -> LogValue:
    """Exact log of the twisted sup-norm at parameter eps >= 0."""
    _require_shared_tree(f, phi)
    eps = Fraction(eps)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    tree = f.tree
    best: ExtendedRational | None = None
    for nid in tree.nodes:
        if tree.node_type(nid) == T1:
            continue  # A = +inf there; poles are excluded, the rest contribute -inf
        p = TreePoint.node(nid)
        value = log_norm_eval(f, p) - (1 + eps) * eval_qsh(phi, p) - tree.coords(p).a
        if best is None or best < value:
            best = value
    for eid, e in tree.edges.items():
        if e.a_length.finite:
            continue
        tail = -edge_root_weight(f, eid) + (1 + eps) * below_mass(phi, eid) - e.mult
        if tail > 0:
            return INF
    assert best is not None
    return best


def normalization_shift(phi: QshFunction) -> Fraction:
    """Shift making sup(phi) <= 0: for valid phi the sup sits at the root."""
    minimal_mass(phi)
    return max(Fraction(0), phi.root_value)


def plus_norm(f: FormalPoly, phi: QshFunction) -> LogValue:
    """Limit of the twisted sup-norms as the twist parameter goes to 0+.

    The limit is eliminated symbolically: node candidates are affine in eps
    with finite limits, and an infinite-edge tail survives the limit exactly
    when its untwisted slope is >= 0, i.e. when the pole order of phi exceeds
    the vanishing order of f by at least one.  Functions with positive sup
    are handled through the bounded-shift rule (shift by
    :func:`normalization_shift`, which changes the result by minus the
    shift); the formula below already agrees with that convention.
    """
    _require_shared_tree(f, phi)
    minimal_mass(phi)
    tree = f.tree
    for eid, e in tree.edges.items():
        if e.a_length.finite:
            continue
        if -edge_root_weight(f, eid) + below_mass(phi, eid) - e.mult >= 0:
            return INF
    best: ExtendedRational | None = None
    for nid in tree.nodes:
        if tree.node_type(nid) == T1:
            continue
        p = TreePoint.node(nid)
        value = log_norm_eval(f, p) - eval_qsh(phi, p) - tree.coords(p).a
        if best is None or best < value:
            best = value
    assert best is not None
    return best


def lelong_ratio(phi: QshFunction, node_id: str) -> Fraction:
    """Mass-to-multiplicity ratio at a T1 node (its non-Archimedean Lelong number)."""
    tree = phi.tree
    if tree.node_type(node_id) != T1:
        raise ValueError(f"node {node_id!r} is not of type T1")
    return node_atom(phi, node_id) / tree.mult(node_id)


def h_generator(phi: QshFunction) -> FormalPoly:
    """Generator of the ideal of finite-limit-norm functions.

    The product of the rigid-node factors raised to floor(c_x), over the
    poles with c_x >= 1; the generator of a bounded function's ideal is 1.
    """
    minimal_mass(phi)
    tree = phi.tree
    roots = {}
    for nid in tree.nodes:
        if tree.node_type(nid) != T1:
            continue
        c = lelong_ratio(phi, nid)
        if c >= 1:
            roots[nid] = math.floor(c)
    return FormalPoly(tree, Fraction(0), roots)


def h_membership(f: FormalPoly, phi: QshFunction) -> bool:
    """True iff the limit norm of f is finite: e_x >= floor(c_x) at every pole."""
    _require_shared_tree(f, phi)
    minimal_mass(phi)
    tree = phi.tree
    for nid in tree.nodes:
        if tree.node_type(nid) != T1:
            continue
        if f.exponent(nid) < math.floor(lelong_ratio(phi, nid)):
            return False
    return True


def finite_twist_threshold(f: FormalPoly, phi: QshFunction) -> ExtendedRational:
    """Largest eps with a finite twisted sup-norm (+inf when unconstrained).

    Negative when no positive twist keeps the norm finite.  Used for the
    openness property: membership in H(phi) is equivalent to a finite norm at
    some positive twist.
    """
    _require_shared_tree(f, phi)
    tree = f.tree
    best = INF
    for eid, e in tree.edges.items():
        if e.a_length.finite:
            continue
        mass = below_mass(phi, eid)
        if mass == 0:
            continue  # tail slope is -E - m < 0 for every eps
        bound = ext(Fraction(e.mult + edge_root_weight(f, eid), mass) - 1)
        if bound < best:
            best = bound
    return best
