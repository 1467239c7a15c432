"""Finite metric-tree model of the Berkovich closed unit disc.

The disc is modelled as a rooted tree whose root is the Gauss point.  Nodes
carry a point type (1 through 4) and a multiplicity; edges carry a length in
the Temkin coordinate ``A = -log r`` and a multiplicity.  The weighted
coordinate ``alpha`` accumulates ``a_length / edge_multiplicity`` along the
root path, so ``A/m <= alpha <= A`` holds everywhere.

Conventions baked into the data structure:

* an edge is keyed by its child node id (every non-root node has exactly one
  parent edge), so "edge ids" in scene files and slope maps are child ids;
* multiplicity is constant along a closed edge below its top: the
  multiplicity of a non-root node equals that of its parent edge, and a
  multiplicity jump is expressed on the child edges of a branch node;
* type-1 nodes sit at the end of edges of infinite A-length, type-4 nodes at
  the end of finite edges; both are leaves.

Trees are immutable after construction; every mutating operation returns a
new tree (plus a :class:`PointMap` when existing points need translating).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .rationals import INF, ExtendedRational, ext

T1 = "T1"
T2 = "T2"
T3 = "T3"
T4 = "T4"
POINT_TYPES = (T1, T2, T3, T4)


class TreeError(ValueError):
    """A scene violates the tree invariants; ``violations`` lists them all."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class NodeData:
    point_type: str
    mult: int


@dataclass(frozen=True)
class EdgeData:
    parent: str
    a_length: ExtendedRational  # > 0, +inf exactly for edges into type-1 nodes
    mult: int


@dataclass(frozen=True)
class TreePoint:
    """A node, or an interior point of an edge at an A-offset from its top."""

    kind: str  # "node" | "edge"
    id: str    # node id, or edge (= child node) id
    offset: Fraction | None = None

    @staticmethod
    def node(node_id: str) -> "TreePoint":
        return TreePoint("node", node_id, None)

    @staticmethod
    def edge(edge_id: str, offset) -> "TreePoint":
        offset = Fraction(offset)
        if offset <= 0:
            raise ValueError("edge-point offsets are strictly interior; use the node for an endpoint")
        return TreePoint("edge", edge_id, offset)

    def __str__(self):
        if self.kind == "node":
            return f"node:{self.id}"
        return f"edge:{self.id}:{self.offset}"


@dataclass(frozen=True)
class Coords:
    a: ExtendedRational
    alpha: ExtendedRational
    mult: int


class DiscTree:
    """Validated rooted tree; raises :class:`TreeError` on bad input."""

    def __init__(self, root: str, nodes: Mapping[str, NodeData], edges: Mapping[str, EdgeData]):
        violations = _check(root, nodes, edges)
        if violations:
            raise TreeError(violations)
        self.root = root
        self.nodes = dict(nodes)
        self.edges = dict(edges)
        self._children: dict[str, tuple[str, ...]] = {nid: () for nid in nodes}
        for child, e in sorted(edges.items()):
            self._children[e.parent] = self._children[e.parent] + (child,)
        self._coords: dict[str, Coords] = {root: Coords(ext(0), ext(0), 1)}
        stack = [root]
        while stack:
            nid = stack.pop()
            base = self._coords[nid]
            for child in self._children[nid]:
                e = edges[child]
                a = base.a + e.a_length
                alpha = base.alpha + e.a_length / e.mult
                self._coords[child] = Coords(a, alpha, nodes[child].mult)
                stack.append(child)

    # ----------------------------------------------------------- basic access

    def node_type(self, node_id: str) -> str:
        return self.nodes[node_id].point_type

    def mult(self, node_id: str) -> int:
        return self.nodes[node_id].mult

    def edge_mult(self, edge_id: str) -> int:
        return self.edges[edge_id].mult

    def children(self, node_id: str) -> tuple[str, ...]:
        return self._children[node_id]

    def parent(self, node_id: str) -> str | None:
        e = self.edges.get(node_id)
        return None if e is None else e.parent

    def node_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.nodes))

    def path_nodes(self, node_id: str) -> list[str]:
        """Node ids from the root down to ``node_id`` inclusive."""
        path = [node_id]
        while path[-1] != self.root:
            path.append(self.edges[path[-1]].parent)
        path.reverse()
        return path

    def path_edges(self, node_id: str) -> list[str]:
        """Edge ids (child ids) from the root down to ``node_id``."""
        return self.path_nodes(node_id)[1:]

    def fresh_id(self, prefix: str = "n") -> str:
        k = 1
        while f"_{prefix}{k}" in self.nodes:
            k += 1
        return f"_{prefix}{k}"

    def contains_point(self, p: TreePoint) -> bool:
        if p.kind == "node":
            return p.id in self.nodes
        e = self.edges.get(p.id)
        return e is not None and ext(p.offset) < e.a_length

    # --------------------------------------------------------------- geometry

    def coords(self, p: TreePoint) -> Coords:
        """Temkin coordinate A, weighted coordinate alpha, multiplicity at p."""
        if p.kind == "node":
            try:
                return self._coords[p.id]
            except KeyError:
                raise ValueError(f"unknown node {p.id!r}") from None
        e = self.edges.get(p.id)
        if e is None:
            raise ValueError(f"unknown edge {p.id!r}")
        if not ext(p.offset) < e.a_length:
            raise ValueError(f"offset {p.offset} not interior to edge {p.id!r}")
        base = self._coords[e.parent]
        return Coords(base.a + p.offset, base.alpha + Fraction(p.offset, e.mult), e.mult)

    def _edge_path(self, p: TreePoint) -> tuple[list[str], Fraction | None]:
        # Edge keys from the root to p; offset is None when p is a node.
        if p.kind == "node":
            return self.path_edges(p.id), None
        return self.path_edges(self.edges[p.id].parent) + [p.id], p.offset

    def join(self, p: TreePoint, q: TreePoint) -> TreePoint:
        """The deepest common ancestor of p and q (their least upper bound)."""
        pe, po = self._edge_path(p)
        qe, qo = self._edge_path(q)
        k = 0
        while k < len(pe) and k < len(qe) and pe[k] == qe[k]:
            k += 1
        if k < len(pe) and k < len(qe):
            # Paths diverge below a common node.
            top = self.root if k == 0 else pe[k - 1]
            return TreePoint.node(top)
        shorter, s_off, longer, l_off = (pe, po, qe, qo) if len(pe) <= len(qe) else (qe, qo, pe, po)
        if len(shorter) == len(longer):
            if s_off is None or l_off is None:
                return TreePoint.node(shorter[-1]) if shorter else TreePoint.node(self.root)
            return TreePoint.edge(shorter[-1], min(s_off, l_off))
        if not shorter:
            return TreePoint.node(self.root)
        if s_off is None:
            return TreePoint.node(shorter[-1])
        # The shorter path ends mid-edge on an edge the longer path runs through.
        return TreePoint.edge(shorter[-1], s_off)

    def is_ancestor(self, p: TreePoint, q: TreePoint) -> bool:
        """True when p lies on the root path of q (p closer to the root)."""
        return self.join(p, q) == p

    def segment_alpha(self, p: TreePoint, q: TreePoint) -> ExtendedRational:
        """Generalized-metric distance d(p, q) measured in alpha lengths."""
        cp, cq, cj = self.coords(p), self.coords(q), self.coords(self.join(p, q))
        return (cp.alpha - cj.alpha) + (cq.alpha - cj.alpha)


def build_tree(root: str,
               nodes: Iterable[tuple[str, str, int]],
               edges: Iterable[tuple[str, str, ExtendedRational | Fraction | int | str, int]]) -> DiscTree:
    """Build a validated tree from plain data.

    ``nodes`` rows are (id, point_type, multiplicity); ``edges`` rows are
    (parent, child, a_length, multiplicity).  Raises :class:`TreeError` with
    the full violation list on invalid scenes.
    """
    node_map: dict[str, NodeData] = {}
    violations = []
    for nid, ptype, mult in nodes:
        if nid in node_map:
            violations.append(f"duplicate node id {nid!r}")
        node_map[str(nid)] = NodeData(str(ptype), int(mult))
    edge_map: dict[str, EdgeData] = {}
    for parent, child, length, mult in edges:
        if child in edge_map:
            violations.append(f"node {child!r} has more than one parent edge")
        edge_map[str(child)] = EdgeData(str(parent), ext(length), int(mult))
    if violations:
        raise TreeError(violations + _check(root, node_map, edge_map))
    return DiscTree(root, node_map, edge_map)


def validate_tree_data(root, nodes, edges) -> list[str]:
    """Violation list for the same inputs as :func:`build_tree`; [] if valid."""
    try:
        build_tree(root, nodes, edges)
    except TreeError as err:
        return err.violations
    return []


def _check(root, nodes, edges) -> list[str]:
    out = []
    if root not in nodes:
        return [f"root {root!r} is not a node"]
    rn = nodes[root]
    if rn.point_type != T2 or rn.mult != 1:
        out.append("root must have type T2 and multiplicity 1")
    for nid, nd in nodes.items():
        if nd.point_type not in POINT_TYPES:
            out.append(f"node {nid!r}: unknown point type {nd.point_type!r}")
        if nd.mult < 1:
            out.append(f"node {nid!r}: multiplicity must be a positive integer")
    if root in edges:
        out.append("root cannot have a parent edge")
    children: dict[str, list[str]] = {nid: [] for nid in nodes}
    for child, e in edges.items():
        if child not in nodes:
            out.append(f"edge into unknown node {child!r}")
            continue
        if e.parent not in nodes:
            out.append(f"edge {child!r}: unknown parent {e.parent!r}")
            continue
        children[e.parent].append(child)
        if e.mult < 1:
            out.append(f"edge {child!r}: multiplicity must be a positive integer")
        if not ext(0) < e.a_length:
            out.append(f"edge {child!r}: nonpositive length")
        child_type = nodes[child].point_type
        if child_type == T1 and e.a_length.finite:
            out.append(f"edge {child!r}: T1 requires infinite edge")
        if child_type != T1 and not e.a_length.finite:
            out.append(f"edge {child!r}: infinite edge must end at a T1 node")
        if e.mult < nodes[e.parent].mult:
            out.append(f"edge {child!r}: multiplicity drops below its parent node")
        if nodes[child].mult != e.mult:
            out.append(f"node {child!r}: multiplicity must equal its parent edge's")
    if out:
        return out
    # Connectivity and acyclicity: walk from the root.
    seen = set()
    stack = [root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            return [f"cycle detected at node {nid!r}"]
        seen.add(nid)
        stack.extend(children[nid])
    missing = set(nodes) - seen
    if missing:
        out.append(f"nodes unreachable from the root: {sorted(missing)}")
    for nid in seen:
        if nodes[nid].point_type in (T1, T4) and children[nid]:
            out.append(f"node {nid!r}: type {nodes[nid].point_type} must be a leaf")
    return out


# --------------------------------------------------------------------------
# Subtrees (closed, connected, rooted) and retraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Subtree:
    """A closed connected subtree containing the root (or the empty set).

    ``cuts`` maps an edge id to the included A-length measured from the
    edge's top: the full ``a_length`` for a whole edge, anything smaller for
    an edge cut at an interior point.  The root alone is ``cuts == {}``.
    """

    tree: DiscTree
    cuts: Mapping[str, ExtendedRational] = field(default_factory=dict)
    contains_root: bool = True

    def __post_init__(self):
        object.__setattr__(self, "cuts", dict(self.cuts))
        if not self.contains_root and self.cuts:
            raise ValueError("a subtree without the root must be empty")
        for eid, cut in self.cuts.items():
            e = self.tree.edges.get(eid)
            if e is None:
                raise ValueError(f"subtree references unknown edge {eid!r}")
            if not (ext(0) < cut <= e.a_length):
                raise ValueError(f"subtree cut on edge {eid!r} out of range")
            parent = e.parent
            if parent != self.tree.root and not self._edge_full(parent):
                raise ValueError(f"subtree not connected at edge {eid!r}")

    @staticmethod
    def whole(tree: DiscTree) -> "Subtree":
        return Subtree(tree, {eid: e.a_length for eid, e in tree.edges.items()})

    @staticmethod
    def root_only(tree: DiscTree) -> "Subtree":
        return Subtree(tree, {})

    @staticmethod
    def empty(tree: DiscTree) -> "Subtree":
        return Subtree(tree, {}, contains_root=False)

    @staticmethod
    def from_full_edges(tree: DiscTree, edge_ids: Iterable[str]) -> "Subtree":
        return Subtree(tree, {eid: tree.edges[eid].a_length for eid in edge_ids})

    def is_empty(self) -> bool:
        return not self.contains_root

    def _edge_full(self, eid: str) -> bool:
        cut = self.cuts.get(eid)
        return cut is not None and cut == self.tree.edges[eid].a_length

    def contains_node(self, node_id: str) -> bool:
        if not self.contains_root:
            return False
        if node_id == self.tree.root:
            return True
        return self._edge_full(node_id)

    def contains(self, p: TreePoint) -> bool:
        if p.kind == "node":
            return self.contains_node(p.id)
        cut = self.cuts.get(p.id)
        return cut is not None and ext(p.offset) <= cut

    def retract(self, p: TreePoint) -> TreePoint:
        """The unique subtree point closest to p along the path p -> root."""
        if self.is_empty():
            raise ValueError("retraction onto the empty subtree is undefined")
        if self.contains(p):
            return p
        tree = self.tree
        eid = p.id if p.kind == "edge" else None
        node = tree.edges[p.id].parent if p.kind == "edge" else p.id
        # Check the partial inclusion of the edge p sits on.
        if eid is not None:
            cut = self.cuts.get(eid)
            if cut is not None:
                return TreePoint.edge(eid, cut.as_fraction())
        while node != tree.root:
            parent_edge = node
            cut = self.cuts.get(parent_edge)
            if cut is not None:
                if cut == tree.edges[parent_edge].a_length:
                    return TreePoint.node(node)
                return TreePoint.edge(parent_edge, cut.as_fraction())
            node = tree.edges[parent_edge].parent
        return TreePoint.node(tree.root)

    def ends(self) -> list[TreePoint]:
        """Deepest points of the subtree; [root] when it is the root alone."""
        if self.is_empty():
            return []
        out = []
        full_children: dict[str, int] = {}
        for eid in self.cuts:
            if self._edge_full(eid):
                full_children[self.tree.edges[eid].parent] = full_children.get(self.tree.edges[eid].parent, 0) + 1
        for eid, cut in sorted(self.cuts.items()):
            if self._edge_full(eid):
                if not any(self.cuts.get(c) is not None for c in self.tree.children(eid)):
                    out.append(TreePoint.node(eid))
            else:
                out.append(TreePoint.edge(eid, cut.as_fraction()))
        if not self.cuts:
            out.append(TreePoint.node(self.tree.root))
        return out

    def node_ends(self) -> list[str]:
        """Non-root node ends; requires every cut edge to be whole."""
        ends = []
        for p in self.ends():
            if p.kind != "node":
                raise ValueError("subtree has mid-edge ends")
            if p.id != self.tree.root:
                ends.append(p.id)
        return sorted(ends)

    def union(self, other: "Subtree") -> "Subtree":
        if self.tree is not other.tree:
            raise ValueError("subtree union requires a shared tree")
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        cuts = dict(self.cuts)
        for eid, cut in other.cuts.items():
            if eid not in cuts or cuts[eid] < cut:
                cuts[eid] = cut
        return Subtree(self.tree, cuts)

    def contains_subtree(self, other: "Subtree") -> bool:
        if other.is_empty():
            return True
        if self.is_empty():
            return False
        return all(eid in self.cuts and cut <= self.cuts[eid] for eid, cut in other.cuts.items())


def hull(tree: DiscTree, points: Iterable[TreePoint]) -> Subtree:
    """Convex hull of the root together with the given points."""
    cuts: dict[str, ExtendedRational] = {}
    for p in points:
        edges, offset = tree._edge_path(p)
        for eid in edges[:-1] if offset is not None else edges:
            cuts[eid] = tree.edges[eid].a_length
        if offset is not None:
            eid = edges[-1]
            cut = ext(offset)
            if eid not in cuts or cuts[eid] < cut:
                cuts[eid] = cut
    return Subtree(tree, cuts)


# --------------------------------------------------------------------------
# Refinement: subdividing edges while preserving all coordinates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PointMap:
    """Translates points and edge ids across an edge-subdivision refinement."""

    # original edge id -> ordered pieces [(lo, hi, new_edge_id)] with the
    # break node at offset `hi` being the new edge's child (ids of pre-existing
    # nodes and the final piece's child are unchanged).
    pieces: Mapping[str, Sequence[tuple[Fraction, ExtendedRational, str]]]

    def translate(self, p: TreePoint) -> TreePoint:
        if p.kind == "node" or p.id not in self.pieces:
            return p
        for lo, hi, eid in self.pieces[p.id]:
            off = ext(p.offset)
            if off == hi:
                return TreePoint.node(eid)
            if ext(lo) < off < hi:
                return TreePoint.edge(eid, p.offset - lo)
        raise ValueError(f"cannot translate {p}")

    def edge_pieces(self, eid: str) -> list[str]:
        if eid not in self.pieces:
            return [eid]
        return [piece for _, _, piece in self.pieces[eid]]


def subdivide(tree: DiscTree, cut_offsets: Mapping[str, Iterable[Fraction]],
              point_type: str = T2) -> tuple[DiscTree, PointMap]:
    """Split edges at interior A-offsets, inserting nodes of ``point_type``.

    Coordinates of all pre-existing points are unchanged; new node ids are
    generated.  Returns the refined tree and a :class:`PointMap`.
    """
    if point_type not in (T2, T3):
        raise ValueError("inserted points must be of type T2 or T3")
    nodes = dict(tree.nodes)
    edges = dict(tree.edges)
    pieces: dict[str, list[tuple[Fraction, ExtendedRational, str]]] = {}
    counter = 0

    def fresh() -> str:
        nonlocal counter
        counter += 1
        while f"_n{counter}" in nodes:
            counter += 1
        return f"_n{counter}"

    for eid, offsets in sorted(cut_offsets.items()):
        e = tree.edges.get(eid)
        if e is None:
            raise ValueError(f"unknown edge {eid!r}")
        offs = sorted(set(Fraction(t) for t in offsets))
        if not offs:
            continue
        if not (ext(0) < ext(offs[0]) and ext(offs[-1]) < e.a_length):
            raise ValueError(f"cut offsets must be interior to edge {eid!r}")
        new_pieces = []
        parent = e.parent
        lo = Fraction(0)
        for t in offs:
            nid = fresh()
            nodes[nid] = NodeData(point_type, e.mult)
            edges[nid] = EdgeData(parent, ext(t - lo), e.mult)
            new_pieces.append((lo, ext(t), nid))
            parent, lo = nid, t
        edges[eid] = EdgeData(parent, e.a_length - lo, e.mult)
        new_pieces.append((lo, e.a_length, eid))
        pieces[eid] = new_pieces
    return DiscTree(tree.root, nodes, edges), PointMap(pieces)


def insert_point(tree: DiscTree, p: TreePoint, point_type: str = T2) -> tuple[DiscTree, str]:
    """Subdivide one edge at ``p``; returns the new tree and the new node id."""
    if p.kind != "edge":
        raise ValueError(f"point {p} is already a node")
    if not tree.contains_point(p):
        raise ValueError(f"point {p} is not interior to an edge of the tree")
    tree2, pmap = subdivide(tree, {p.id: [p.offset]}, point_type)
    moved = pmap.translate(p)
    return tree2, moved.id


def descend_multiplicity(tree: DiscTree, node_id: str) -> tuple[DiscTree, str]:
    """Attach a rigid (type-1) leaf below a T2/T3 node along an infinite edge.

    The new edge and leaf carry the node's multiplicity, modelling the rigid
    point of the same multiplicity that exists below every type-2/3 point
    under the ambient field hypotheses.
    """
    nd = tree.nodes.get(node_id)
    if nd is None:
        raise ValueError(f"unknown node {node_id!r}")
    if nd.point_type not in (T2, T3):
        raise ValueError(f"node {node_id!r} has type {nd.point_type}; rigid descent needs T2 or T3")
    nodes = dict(tree.nodes)
    edges = dict(tree.edges)
    rig = tree.fresh_id("rig")
    nodes[rig] = NodeData(T1, nd.mult)
    edges[rig] = EdgeData(node_id, INF, nd.mult)
    return DiscTree(tree.root, nodes, edges), rig
