"""Constructive extension certificates on the disc tree.

Given a quasisubharmonic ``phi`` (normalized so its root value is 0) and a
point ``z``, :func:`extend` produces a formal polynomial ``f`` and a rational
``eps0 > 0`` such that for every twist ``eps`` in ``[0, eps0]``

    sup over the disc of  log|f| - (1 + eps) phi - A   <=   log|f(z)| - phi(z)

(with the right-hand side replaced by plain finiteness when ``phi(z)`` is
``-inf``).  The construction runs the strong induction on the integer part of
the root mass: each round retracts ``phi`` onto the hull of the threshold
subtree and ``z``, straightens the below-threshold fringe onto linear
minorants, and then reduces one end of the subtree:

* a type-1 end is divided out (``f`` gains ``g_x^gamma`` and the mass drops
  by ``gamma >= 1``);
* a type-2/3 end is first replaced by a rigid point below it (multiplicity
  descent), which turns it into a type-1 end;
* a type-4 end (only in the multiplicity-one regime) is handled by planting a
  rigid point just above it;
* when only the segment ``[z, root]`` remains, the constant 1 works.

Every produced certificate is re-verified with the exact sup-norm before
being returned; a verification failure raises :class:`ExtensionDefect`, since
it would indicate a bug rather than a legitimate outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .divisor import FormalPoly, log_norm_eval, transfer_poly
from .norms import sup_norm
from .qsh import (QshFunction, below_mass, eval_qsh, gamma_tree, minimal_mass,
                  node_atom, pullback_with_map, transfer_qsh, validate_qsh)
from .rationals import ExtendedRational, ext
from .tree import (DiscTree, PointMap, Subtree, T1, T2, T3, T4, TreePoint,
                   descend_multiplicity, hull, subdivide)


class ExtensionDefect(RuntimeError):
    """The reduction ran past its budget or produced an unverifiable result."""


@dataclass(frozen=True)
class TraceStep:
    kind: str                  # base | type1 | type23 | type4 | segment
    node: str | None = None    # the end being reduced, if any
    n: int | None = None       # threshold index of the round
    c: Fraction | None = None  # mass-to-multiplicity ratio at the end
    gamma: int | None = None   # integer part removed by the step
    eps: Fraction | None = None


@dataclass(frozen=True)
class Certificate:
    """Extension witness: ``verify_certificate`` accepts it at eps0 and eps0/2.

    ``tree`` is the final tree (rigid descents may have grown it), ``phi``
    the input function normalized to root value 0 and carried onto that tree,
    and ``z`` the query point as a node of it.  ``shift`` records the
    normalization applied to the input.
    """

    f: FormalPoly
    eps0: Fraction
    trace: tuple[TraceStep, ...]
    tree: DiscTree
    phi: QshFunction
    z: TreePoint
    shift: Fraction
    pole_at_z: bool


@dataclass
class _State:
    tree: DiscTree
    ver: QshFunction          # normalized input, kept in sync with tree growth
    z: str                    # node id of the query point
    pole: bool
    mass0: int
    trace: list[TraceStep] = field(default_factory=list)


def _regraft(phi: QshFunction, tree: DiscTree) -> QshFunction:
    # Re-key a function onto a tree extended by new leaves (edge ids persist).
    return QshFunction(tree, phi.root_value, phi.slopes)


def _materialize(phi: QshFunction, z: TreePoint):
    tree = phi.tree
    if not tree.contains_point(z):
        raise ValueError(f"point {z} is not in the tree")
    if z.kind == "node":
        return tree, phi, z.id
    tree2, pmap = subdivide(tree, {z.id: [z.offset]})
    return tree2, transfer_qsh(phi, tree2, pmap), pmap.translate(z).id


# ---------------------------------------------------------------------------
# Round preparation: threshold index, retraction, fringe straightening
# ---------------------------------------------------------------------------

def _candidate_indices(work: QshFunction) -> list[int]:
    # The shape of the threshold subtree changes only when an edge's ratio
    # S/m crosses n/(n+1); collect the crossing indices.
    out = {1}
    for eid, e in work.tree.edges.items():
        s = below_mass(work, eid)
        if 0 < s < e.mult:
            r = Fraction(s, e.mult)
            out.add(math.floor(r / (1 - r)) + 1)
    return sorted(out)


def _try_round(st: _State, work: QshFunction, n: int):
    """Admissibility test for a threshold index; returns the prepared function.

    Requirements on the fringe (threshold subtree minus limit subtree): each
    connected component is a chain of constant edge multiplicity with a
    type-2/3 bottom end, attached strictly below the root, avoided by the
    retraction of z, and replaceable by its linear minorant without breaking
    subharmonicity.  For a large enough index the fringe is empty and every
    requirement is vacuous.
    """
    tree = st.tree
    zpt = TreePoint.node(st.z)
    gn = gamma_tree(work, n)
    gphi = gamma_tree(work, None)
    diff = set(gn.cuts) - set(gphi.cuts)

    if not gphi.contains(gn.retract(zpt)):
        return None

    comp_bottoms = []
    for eid in diff:
        kids = [c for c in tree.children(eid) if c in diff]
        if len(kids) > 1:
            return None  # branching inside the fringe
        if not kids:
            comp_bottoms.append(eid)
    for bottom in comp_bottoms:
        if tree.node_type(bottom) not in (T2, T3):
            return None
        mult = tree.edge_mult(bottom)
        eid = bottom
        while eid in diff:
            if tree.edge_mult(eid) != mult:
                return None  # multiplicity changes along the chain
            top = tree.edges[eid].parent
            eid = top
        if top == tree.root:
            return None  # straightening here would feed mass back to the root

    support = gn.union(hull(tree, [zpt]))
    work2, _ = pullback_with_map(work, support)  # no mid-edge cuts: same tree
    if work2.tree is not tree:
        raise ExtensionDefect("hull of whole edges produced a subdivision")
    straightened = {}
    for bottom in comp_bottoms:
        mult = tree.edge_mult(bottom)
        eid = bottom
        while eid in diff:
            straightened[eid] = -Fraction(mult)
            eid = tree.edges[eid].parent
    work2 = work2.with_slopes(straightened)
    if not validate_qsh(work2).ok:
        return None
    if eval_qsh(work2, zpt) != eval_qsh(work, zpt):
        return None
    return work2


def _prepare_round(st: _State, work: QshFunction):
    for n in _candidate_indices(work):
        work2 = _try_round(st, work, n)
        if work2 is not None:
            return n, gamma_tree(work2, n), work2
    raise ExtensionDefect("no admissible threshold index; the fringe never emptied")


# ---------------------------------------------------------------------------
# The reduction steps
# ---------------------------------------------------------------------------

def _solve(st: _State, work: QshFunction, depth: int, force=None):
    if len(st.trace) > st.mass0 + len(st.tree.nodes):
        raise ExtensionDefect("reduction trace exceeded floor(mass) + node count")
    report = validate_qsh(work)
    if not report.ok:
        raise ExtensionDefect("working function lost subharmonicity: " + "; ".join(report.violations))
    mass = report.mass

    if mass < 1:
        if force is not None and force[0] not in ("base", "segment"):
            raise ValueError("mass is below 1; only the base case applies")
        eps = Fraction(1) if mass == 0 else min(Fraction(1), (1 - mass) / mass)
        st.trace.append(TraceStep("base", eps=eps))
        return {}, eps

    if force is not None and force[0] == "base":
        raise ValueError("base step requires mass below 1")

    n, gn, work2 = _prepare_round(st, work)
    ends = gn.node_ends()
    zpt = TreePoint.node(st.z)
    zr = gn.retract(zpt)
    t1 = [x for x in ends if st.tree.node_type(x) == T1 and (st.pole or x != st.z)]
    t23 = [x for x in ends if st.tree.node_type(x) in (T2, T3)
           and not (zr.kind == "node" and zr.id == x)]
    t4 = [x for x in ends if st.tree.node_type(x) == T4 and x != st.z]

    if force is not None:
        kind, target = force
        if kind == "type1":
            if target not in t1:
                raise ValueError(f"node {target!r} is not a type-1 end of the limit subtree "
                                 "(its below mass stays under its multiplicity)")
            expo, eps = _step_type1(st, work2, n, gn, target, depth)
        elif kind == "type23":
            if zr.kind == "node" and zr.id == target:
                raise ValueError("z retracts onto this end; the type-2/3 reduction does not apply")
            if target not in t23:
                raise ValueError(f"node {target!r} is not a reducible type-2/3 end")
            expo, eps = _step_type23(st, work2, n, gn, target, depth)
        elif kind == "type4":
            if target not in t4:
                raise ValueError(f"node {target!r} is not a reducible type-4 end")
            _require_mult_one(st.tree)
            expo, eps = _step_type4(st, work2, n, gn, target, depth)
        elif kind == "segment":
            if t1 or t23 or t4:
                raise ValueError("a reducible end remains; the segment case applies only "
                                 "when the hull of the threshold subtree and z is [z, root]")
            expo, eps = _step_segment(st, work2, n, gn, depth)
        else:  # pragma: no cover
            raise ValueError(f"unknown step {kind!r}")
    elif t1:
        expo, eps = _step_type1(st, work2, n, gn, t1[0], depth)
    elif t23:
        expo, eps = _step_type23(st, work2, n, gn, t23[0], depth)
    elif t4:
        _require_mult_one(st.tree)
        expo, eps = _step_type4(st, work2, n, gn, t4[0], depth)
    else:
        expo, eps = _step_segment(st, work2, n, gn, depth)
    return expo, min(eps, Fraction(1, n))


def _require_mult_one(tree: DiscTree):
    if any(nd.mult != 1 for nd in tree.nodes.values()):
        raise ValueError("type-4 reduction applies only when every multiplicity is 1")


def _step_type1(st: _State, work2: QshFunction, n: int, gn: Subtree, x: str, depth: int):
    tree = st.tree
    m_x = tree.mult(x)
    c = node_atom(work2, x) / m_x
    if c < 1:
        raise ExtensionDefect(f"type-1 end {x!r} carries ratio {c} < 1 after straightening")
    gamma = math.floor(c)
    path = tree.path_edges(x)
    hat = work2.with_slopes({e: work2.slope(e) + gamma * m_x for e in path})

    z_bound = None
    zpt = TreePoint.node(st.z)
    zr = gn.retract(zpt)
    if not (zr.kind == "node" and zr.id == st.z):
        znodes = tree.path_nodes(st.z)
        v_z = znodes[znodes.index(zr.id) + 1]
        z_bound = Fraction(tree.edge_mult(v_z), n * tree.mult(zr.id))

    leg_bound = None
    if c == gamma:
        ghat = gamma_tree(hat, n)
        nodes_up = tree.path_nodes(x)
        xt = tree.root
        for nid in reversed(nodes_up[:-1]):
            if nid == tree.root or ghat.contains_node(nid):
                xt = nid
                break
        v_x = nodes_up[nodes_up.index(xt) + 1]
        leg_bound = Fraction(tree.edge_mult(v_x), (gamma * (n + 1) + n) * m_x)

    expo, eps1 = _solve(st, hat, depth + 1)
    if c == gamma:
        pool = [eps1, eps1 * Fraction(n, m_x * gamma * (n + 1) + n), leg_bound]
        if z_bound is not None:
            pool.append(z_bound)
        eps0 = min(pool)
    else:
        eps0 = eps1 * (c - gamma) / c
    expo[x] = expo.get(x, 0) + gamma
    st.trace.append(TraceStep("type1", x, n, c, gamma, eps0))
    return expo, eps0


def _step_type23(st: _State, work2: QshFunction, n: int, gn: Subtree, x: str, depth: int):
    m_x = st.tree.mult(x)
    c = node_atom(work2, x) / m_x
    if c < 1:
        raise ExtensionDefect(f"type-2/3 end {x!r} carries ratio {c} < 1 after straightening")
    st.tree, rig = descend_multiplicity(st.tree, x)
    st.ver = _regraft(st.ver, st.tree)
    work3 = _regraft(work2, st.tree).with_slopes({rig: -c * m_x})
    expo, eps1 = _solve(st, work3, depth + 1)
    st.trace.append(TraceStep("type23", x, n, c, None, eps1))
    return expo, eps1


def _step_type4(st: _State, work2: QshFunction, n: int, gn: Subtree, x: str, depth: int):
    tree = st.tree
    xpt = TreePoint.node(x)
    support = gn.union(hull(tree, [TreePoint.node(st.z)]))
    path = tree.path_nodes(x)
    xt = tree.root
    for nid in reversed(path[:-1]):
        branches = sum(1 for c in tree.children(nid) if c in support.cuts)
        if nid == tree.root or nid == st.z or branches >= 2:
            xt = nid
            break
    seg = path[path.index(xt) + 1:]
    c = below_mass(work2, seg[0])
    if c < 1:
        raise ExtensionDefect(f"type-4 end {x!r} carries slope {c} < 1 after straightening")
    gamma = math.floor(c)
    work3 = work2.with_slopes({e: -c for e in seg})
    phihat = work3.with_slopes({e: work3.slope(e) + gamma for e in path[1:]})

    alpha_x = tree.coords(xpt).alpha.as_fraction()
    a_x = tree.coords(xpt).a.as_fraction()
    alpha_xt = tree.coords(TreePoint.node(xt)).alpha.as_fraction()
    phihat_x = eval_qsh(phihat, xpt).as_fraction()
    work3_x = eval_qsh(work3, xpt).as_fraction()

    expo, eps1 = _solve(st, phihat, depth + 1)

    eta_cap = Fraction(a_x, c)
    if phihat_x < 0:
        eta_cap = min(eta_cap, -eps1 * phihat_x / c)
    eta = min(eta_cap, alpha_x - alpha_xt) / 2
    u = _plant_node(st, x, alpha_x - eta / 2)
    st.tree, rig = descend_multiplicity(st.tree, u)
    st.ver = _regraft(st.ver, st.tree)
    expo[rig] = expo.get(rig, 0) + gamma

    pool = [eps1]
    if c == gamma and phihat_x == 0:
        pool.append((a_x - c * eta) / (c * alpha_x))
    elif c == gamma:
        pool += [eps1 * Fraction(n, n + gamma * (n + 1)),
                 (-eps1 * phihat_x - c * eta) / (-phihat_x + c * alpha_x),
                 Fraction(1, (n + 1) * gamma + n)]
    else:
        pool += [eps1 * Fraction(n, gamma * (n + 1) + n),
                 Fraction(1, (n + 1) * gamma + n)]
        if phihat_x == 0:
            pool.append((a_x - gamma * eta) / (gamma * alpha_x))
        else:
            pool.append((-eps1 * phihat_x - gamma * eta) / (-work3_x))
    eps0 = min(pool)
    st.trace.append(TraceStep("type4", x, n, c, gamma, eps0))
    return expo, eps0


def _plant_node(st: _State, x: str, target_alpha: Fraction) -> str:
    """A T2/T3 node at the given alpha on the root path of ``x`` (inserting one
    if needed; multiplicity is 1 here, so A-offsets equal alpha offsets)."""
    tree = st.tree
    path = tree.path_nodes(x)
    for nid in path:
        alpha = tree.coords(TreePoint.node(nid)).alpha
        if alpha == ext(target_alpha):
            if tree.node_type(nid) in (T2, T3):
                return nid
            raise ExtensionDefect(f"target alpha {target_alpha} collides with node {nid!r}")
    for eid in tree.path_edges(x):
        top = tree.coords(TreePoint.node(tree.edges[eid].parent)).alpha.as_fraction()
        bottom = tree.coords(TreePoint.node(eid)).alpha.as_fraction()
        if top < target_alpha < bottom:
            tree2, pmap = subdivide(tree, {eid: [target_alpha - top]})
            st.tree = tree2
            st.ver = transfer_qsh(st.ver, tree2, pmap)
            return pmap.translate(TreePoint.edge(eid, target_alpha - top)).id
    raise ExtensionDefect(f"no edge on the path of {x!r} contains alpha {target_alpha}")


def _step_segment(st: _State, work2: QshFunction, n: int, gn: Subtree, depth: int):
    tree = st.tree
    zpt = TreePoint.node(st.z)
    zhull = hull(tree, [zpt])
    if not zhull.contains_subtree(gn):
        raise ExtensionDefect("segment case reached but the threshold subtree leaves [z, root]")
    if st.z == tree.root:
        eps0 = Fraction(1)
    else:
        first = tree.path_edges(st.z)[0]
        s = below_mass(work2, first)
        eps0 = Fraction(1) if s == 0 else Fraction(tree.edge_mult(first)) / s
    st.trace.append(TraceStep("segment", None, n, None, None, eps0))
    return {}, eps0


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def extend(phi: QshFunction, z: TreePoint, *, log_value_at_z=None) -> Certificate:
    """Produce and verify an extension certificate for ``phi`` at ``z``.

    The input is normalized so the root value is 0 (the certificate
    inequality refers to the normalized function; ``shift`` records the
    offset).  With ``log_value_at_z`` the constant of ``f`` is adjusted so
    that ``log|f(z)|`` takes the prescribed rational value.
    """
    return _run(phi, z, None, log_value_at_z)


def step_base(phi: QshFunction, z: TreePoint) -> Certificate:
    if minimal_mass(phi) >= 1:
        raise ValueError("base step requires mass below 1")
    return _run(phi, z, ("base", None), None)


def step_type1(phi: QshFunction, z: TreePoint, x: str) -> Certificate:
    _expect_type(phi.tree, x, (T1,), "type-1 reduction")
    return _run(phi, z, ("type1", x), None)


def step_type23(phi: QshFunction, z: TreePoint, x: str) -> Certificate:
    _expect_type(phi.tree, x, (T2, T3), "type-2/3 reduction")
    return _run(phi, z, ("type23", x), None)


def step_type4(phi: QshFunction, z: TreePoint, x: str) -> Certificate:
    _expect_type(phi.tree, x, (T4,), "type-4 reduction")
    if z.kind == "node" and z.id == x:
        raise ValueError("the type-4 reduction requires x != z")
    _require_mult_one(phi.tree)
    return _run(phi, z, ("type4", x), None)


def step_segment(phi: QshFunction, z: TreePoint) -> Certificate:
    return _run(phi, z, ("segment", None), None)


def _expect_type(tree: DiscTree, x: str, types, what: str):
    if x not in tree.nodes:
        raise ValueError(f"unknown node {x!r}")
    if tree.node_type(x) not in types:
        raise ValueError(f"node {x!r} has type {tree.node_type(x)}; wrong dispatcher for {what}")


def _run(phi: QshFunction, z: TreePoint, force, log_value_at_z) -> Certificate:
    minimal_mass(phi)
    tree, phi1, zid = _materialize(phi, z)
    shift = phi1.root_value
    ver = phi1.shifted(-shift)
    pole = not eval_qsh(ver, TreePoint.node(zid)).finite
    st = _State(tree=tree, ver=ver, z=zid, pole=pole,
                mass0=math.floor(minimal_mass(ver)))
    expo, eps0 = _solve(st, st.ver, 0, force)
    const = Fraction(0)
    f = FormalPoly(st.tree, const, expo)
    if log_value_at_z is not None:
        if pole:
            raise ValueError("cannot prescribe a value at a pole of phi")
        const = Fraction(log_value_at_z) - log_norm_eval(f, TreePoint.node(st.z)).as_fraction()
        f = FormalPoly(st.tree, const, expo)
    cert = Certificate(f=f, eps0=eps0, trace=tuple(st.trace), tree=st.tree,
                       phi=st.ver, z=TreePoint.node(st.z), shift=shift, pole_at_z=pole)
    if not _holds(cert.phi, cert.z, cert.f, eps0, pole):
        raise ExtensionDefect("produced certificate failed exact verification")
    return cert


def make_certificate(phi: QshFunction, z: TreePoint, f: FormalPoly, eps0) -> Certificate:
    """Package externally supplied ``(f, eps0)`` for verification (no checks run)."""
    if f.tree is not phi.tree:
        raise ValueError("polynomial and function live on different trees")
    tree, phi1, zid = _materialize(phi, z)
    if tree is not phi.tree:
        tree2, pmap = subdivide(phi.tree, {z.id: [z.offset]})
        assert tree2.nodes.keys() == tree.nodes.keys()
        f = transfer_poly(f, tree, pmap)
    shift = phi1.root_value
    ver = phi1.shifted(-shift)
    pole = not eval_qsh(ver, TreePoint.node(zid)).finite
    f = FormalPoly(tree, f.const_log, f.roots)
    return Certificate(f=f, eps0=Fraction(eps0), trace=(), tree=tree, phi=ver,
                       z=TreePoint.node(zid), shift=shift, pole_at_z=pole)


def verify_certificate(phi: QshFunction, z: TreePoint, cert: Certificate, *, eps=None) -> bool:
    """Exact check of the extension inequality (finiteness at poles of phi).

    The certificate's tree may extend ``phi``'s by rigid descents; the carried
    normalized copy is first checked against ``phi`` at every original node,
    so the verdict really is about the function that was supplied.
    """
    eps = Fraction(cert.eps0 if eps is None else eps)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    shift = Fraction(phi.root_value)
    for nid in phi.tree.nodes:
        if nid not in cert.tree.nodes:
            raise ValueError(f"certificate tree is missing node {nid!r} of phi's tree")
        p = TreePoint.node(nid)
        if phi.tree.coords(p) != cert.tree.coords(p):
            raise ValueError(f"certificate tree disagrees with phi's tree at node {nid!r}")
        if eval_qsh(cert.phi, p) != eval_qsh(phi, p) - shift:
            raise ValueError(f"certificate carries a different function (mismatch at node {nid!r})")
    if cert.shift != shift:
        raise ValueError("certificate was produced for a different normalization")
    return _holds(cert.phi, cert.z, cert.f, eps, cert.pole_at_z)


def _holds(phin: QshFunction, zpt: TreePoint, f: FormalPoly, eps: Fraction, pole: bool) -> bool:
    lhs = sup_norm(f, phin, eps)
    if pole:
        return lhs.finite
    rhs = log_norm_eval(f, zpt) - eval_qsh(phin, zpt)
    return lhs <= rhs
