"""Label trees: the hierarchical search space over synsets and leaf classes.

A :class:`LabelTree` is a rooted hierarchy whose internal nodes are
category labels ("synsets") and whose leaves are classes. Trees are
immutable after construction; every mutating operation (``limit_depth``,
``remove_class``, ``insert_class``) returns a new tree, so instances can be
shared freely across threads.

Two on-disk formats are supported:

* JSON adjacency: a top-level array of ``{"id": int, "label": str,
  "children": [int, ...]}`` objects. Source ids may be arbitrary; they are
  renumbered densely on load (root becomes 0, the rest follow document
  order).
* Indented text: one label per line, one tab per level, for hand-authored
  small trees.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import TreeParseError, TreeStructureError, UnknownNodeError

NodeId = int

JSON_ADJACENCY = "json-adjacency"
INDENTED_TEXT = "indented-text"


@dataclass(frozen=True)
class LabelNode:
    """One node of a label tree.

    ``children`` is ordered (document order); a node is a leaf iff it has
    no children. ``parent`` is ``None`` only for the root.
    """

    id: NodeId
    label: str
    parent: NodeId | None
    children: tuple[NodeId, ...]

    @property
    def is_leaf(self) -> bool:
        return not self.children


class ChildErrorProbe(Protocol):
    """What greedy insertion needs: a mean scorer error per candidate label."""

    def mean_error(self, label: str) -> float: ...


class LabelTree:
    """Validated, immutable rooted label hierarchy.

    Node ids are dense integers with the root always at 0. ``depth`` is the
    maximum root-to-leaf edge count and ``leaf_count`` the number of
    classes.
    """

    def __init__(self, nodes: Mapping[NodeId, LabelNode]):
        self._nodes = dict(nodes)
        self._validate()
        self._index()

    # -- construction / validation ------------------------------------

    def _validate(self) -> None:
        nodes = self._nodes
        if not nodes:
            raise TreeStructureError("empty tree")
        if 0 not in nodes:
            raise TreeStructureError("root id 0 missing")
        if sorted(nodes) != list(range(len(nodes))):
            raise TreeStructureError("node ids must be dense integers starting at 0")

        seen_as_child: set[NodeId] = set()
        for node in nodes.values():
            if node.id != 0 and node.parent is None:
                raise TreeStructureError(f"non-root node {node.id} has no parent")
            if node.id == 0 and node.parent is not None:
                raise TreeStructureError("root must not have a parent")
            if not node.label or not node.label.strip():
                raise TreeStructureError(f"node {node.id} has an empty label")
            child_labels: set[str] = set()
            for c in node.children:
                if c not in nodes:
                    raise TreeStructureError(f"node {node.id} references unknown child {c}")
                if c in seen_as_child:
                    raise TreeStructureError(f"node {c} has more than one parent")
                seen_as_child.add(c)
                if nodes[c].parent != node.id:
                    raise TreeStructureError(
                        f"parent/children mismatch between {node.id} and {c}"
                    )
                lbl = nodes[c].label
                if lbl in child_labels:
                    raise TreeStructureError(
                        f"duplicate label {lbl!r} among children of node {node.id}"
                    )
                child_labels.add(lbl)

        # Reachability from the root catches cycles and disconnected parts.
        reached: set[NodeId] = set()
        stack = [0]
        while stack:
            nid = stack.pop()
            if nid in reached:
                raise TreeStructureError("cycle detected")
            reached.add(nid)
            stack.extend(nodes[nid].children)
        if len(reached) != len(nodes):
            orphans = sorted(set(nodes) - reached)
            raise TreeStructureError(f"nodes unreachable from root: {orphans}")

        # Leaf labels are class identities: globally unique, and never
        # reused by an internal node (prompt text must resolve to one class).
        leaf_labels: set[str] = set()
        internal_labels: set[str] = set()
        for node in nodes.values():
            (leaf_labels if node.is_leaf else internal_labels).add(node.label)
        counts: dict[str, int] = {}
        for node in nodes.values():
            if node.is_leaf:
                counts[node.label] = counts.get(node.label, 0) + 1
        dup = sorted(l for l, c in counts.items() if c > 1)
        if dup:
            raise TreeStructureError(f"duplicate leaf labels: {dup}")
        clash = sorted(leaf_labels & internal_labels)
        if clash:
            raise TreeStructureError(f"leaf labels reused by internal nodes: {clash}")

    def _index(self) -> None:
        nodes = self._nodes
        self._level: dict[NodeId, int] = {0: 0}
        order = [0]
        for nid in order:
            for c in nodes[nid].children:
                self._level[c] = self._level[nid] + 1
                order.append(c)

        self._leaves = tuple(nid for nid in sorted(nodes) if nodes[nid].is_leaf)
        self._leaf_by_label = {nodes[nid].label: nid for nid in self._leaves}
        by_label: dict[str, list[NodeId]] = {}
        for nid in sorted(nodes):
            by_label.setdefault(nodes[nid].label, []).append(nid)
        self._by_label = {l: tuple(ids) for l, ids in by_label.items()}

        self.depth = max(self._level[nid] for nid in self._leaves)
        if self.depth < 1:
            raise TreeStructureError("tree must have depth >= 1 (root alone is not a tree)")
        self.leaf_count = len(self._leaves)
        self.root: NodeId = 0

        # Minimum edge count from each node down to a leaf of its subtree.
        self._min_leaf_height: dict[NodeId, int] = {}
        for nid in reversed(order):
            node = nodes[nid]
            if node.is_leaf:
                self._min_leaf_height[nid] = 0
            else:
                self._min_leaf_height[nid] = 1 + min(
                    self._min_leaf_height[c] for c in node.children
                )

    # -- lookups --------------------------------------------------------

    def node(self, nid: NodeId) -> LabelNode:
        try:
            return self._nodes[nid]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {nid}") from None

    def __contains__(self, nid: NodeId) -> bool:
        return nid in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def ids(self) -> tuple[NodeId, ...]:
        return tuple(sorted(self._nodes))

    def level(self, nid: NodeId) -> int:
        """Edge count from the root (root is level 0)."""
        self.node(nid)
        return self._level[nid]

    def leaves(self) -> tuple[NodeId, ...]:
        return self._leaves

    def leaf_labels(self) -> tuple[str, ...]:
        return tuple(self._nodes[nid].label for nid in self._leaves)

    def leaf_by_label(self, label: str) -> NodeId:
        try:
            return self._leaf_by_label[label]
        except KeyError:
            raise UnknownNodeError(f"no leaf labelled {label!r}") from None

    def nodes_by_label(self, label: str) -> tuple[NodeId, ...]:
        """All nodes carrying this label (internal labels may repeat)."""
        return self._by_label.get(label, ())

    def path_to_root(self, nid: NodeId) -> tuple[NodeId, ...]:
        """(nid, parent, ..., root)."""
        node = self.node(nid)
        path = [nid]
        while node.parent is not None:
            path.append(node.parent)
            node = self._nodes[node.parent]
        return tuple(path)

    def is_ancestor_or_self(self, a: NodeId, b: NodeId) -> bool:
        """True iff ``a`` lies on the path from ``b`` to the root."""
        return a in self.path_to_root(b)

    def distance(self, a: NodeId, b: NodeId) -> int:
        """Edge count of the path between two nodes (through their LCA)."""
        pa, pb = self.path_to_root(a), self.path_to_root(b)
        sb = set(pb)
        for up, anc in enumerate(pa):
            if anc in sb:
                return up + pb.index(anc)
        raise TreeStructureError("nodes share no ancestor")  # unreachable on valid trees

    def leaves_under(self, nid: NodeId) -> tuple[NodeId, ...]:
        node = self.node(nid)
        if node.is_leaf:
            return (nid,)
        out: list[NodeId] = []
        stack = list(reversed(node.children))
        while stack:
            cur = stack.pop()
            if self._nodes[cur].is_leaf:
                out.append(cur)
            else:
                stack.extend(reversed(self._nodes[cur].children))
        return tuple(out)

    def min_leaf_height(self, nid: NodeId) -> int:
        self.node(nid)
        return self._min_leaf_height[nid]

    def branching_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for node in self._nodes.values():
            if not node.is_leaf:
                k = len(node.children)
                hist[k] = hist.get(k, 0) + 1
        return dict(sorted(hist.items()))

    # -- serialization ----------------------------------------------------

    def to_adjacency(self) -> list[dict]:
        return [
            {
                "id": nid,
                "label": self._nodes[nid].label,
                "children": list(self._nodes[nid].children),
            }
            for nid in sorted(self._nodes)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_adjacency(), indent=2, sort_keys=True) + "\n"

    def to_indented_text(self) -> str:
        lines: list[str] = []

        def walk(nid: NodeId, depth: int) -> None:
            lines.append("\t" * depth + self._nodes[nid].label)
            for c in self._nodes[nid].children:
                walk(c, depth + 1)

        walk(0, 0)
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return (
            f"LabelTree(nodes={len(self._nodes)}, depth={self.depth}, "
            f"leaves={self.leaf_count})"
        )


# -- assembly ------------------------------------------------------------


def _assemble(
    labels: Mapping[object, str],
    children: Mapping[object, Sequence[object]],
    root_key: object,
    order: Iterable[object],
) -> LabelTree:
    """Build a LabelTree from key-space structure, renumbering densely.

    The root gets id 0; remaining keys are numbered in ``order``.
    """
    ids: dict[object, NodeId] = {root_key: 0}
    for key in order:
        if key not in ids:
            ids[key] = len(ids)
    if set(ids) != set(labels):
        raise TreeStructureError("order does not cover all nodes")

    parent: dict[NodeId, NodeId | None] = {0: None}
    for key, kids in children.items():
        for kid in kids:
            parent[ids[kid]] = ids[key]

    nodes = {}
    for key, nid in ids.items():
        nodes[nid] = LabelNode(
            id=nid,
            label=labels[key],
            parent=parent.get(nid),
            children=tuple(ids[k] for k in children.get(key, ())),
        )
    return LabelTree(nodes)


def tree_from_nested(spec: Mapping[str, object] | str, _root: bool = True) -> LabelTree:
    """Convenience builder for tests and fixtures.

    ``spec`` is ``{label: {child_label: ..., leaf_label: None}}`` with
    exactly one root entry; ``None``/empty values mark leaves.
    """
    if not isinstance(spec, Mapping) or len(spec) != 1:
        raise TreeStructureError("nested spec must have exactly one root entry")

    labels: dict[int, str] = {}
    children: dict[int, list[int]] = {}
    counter = iter(range(10**9))

    def build(label: str, sub) -> int:
        key = next(counter)
        labels[key] = label
        kids = []
        if sub:
            for child_label, child_sub in sub.items():
                kids.append(build(child_label, child_sub))
        children[key] = kids
        return key

    (root_label, root_sub), = spec.items()
    root_key = build(root_label, root_sub)
    return _assemble(labels, children, root_key, sorted(labels))


# -- loading ---------------------------------------------------------------


def load_tree(source, format: str = JSON_ADJACENCY) -> LabelTree:
    """Parse and validate a label tree from bytes, text, or a file object."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if format == JSON_ADJACENCY:
        return _load_json_adjacency(source)
    if format == INDENTED_TEXT:
        return _load_indented_text(source)
    raise TreeParseError(f"unknown tree format {format!r}")


def _load_json_adjacency(text: str) -> LabelTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise TreeParseError("adjacency document must be a JSON array of nodes")

    labels: dict[object, str] = {}
    children: dict[object, list] = {}
    order: list[object] = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise TreeParseError(f"node #{i} is not an object")
        try:
            nid, label = entry["id"], entry["label"]
        except KeyError as exc:
            raise TreeParseError(f"node #{i} missing field {exc}") from None
        kids = entry.get("children", [])
        if not isinstance(label, str):
            raise TreeParseError(f"node #{i}: label must be a string")
        if not isinstance(kids, list):
            raise TreeParseError(f"node #{i}: children must be a list")
        if nid in labels:
            raise TreeStructureError(f"duplicate node id {nid!r}")
        labels[nid] = label
        children[nid] = kids
        order.append(nid)
    if not labels:
        raise TreeStructureError("empty tree")

    referenced: list[object] = [c for kids in children.values() for c in kids]
    for c in referenced:
        if c not in labels:
            raise TreeStructureError(f"child id {c!r} has no node entry")
    if len(referenced) != len(set(referenced)):
        seen, dups = set(), set()
        for c in referenced:
            (dups if c in seen else seen).add(c)
        raise TreeStructureError(f"nodes with multiple parents: {sorted(dups, key=str)}")
    roots = [k for k in order if k not in set(referenced)]
    if len(roots) != 1:
        raise TreeStructureError(f"expected exactly one root, found {len(roots)}")

    return _assemble(labels, children, roots[0], order)


def _load_indented_text(text: str) -> LabelTree:
    labels: dict[int, str] = {}
    children: dict[int, list[int]] = {}
    # stack[d] = key of the most recent node at indent depth d
    stack: list[int] = []
    order: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        depth = len(raw) - len(raw.lstrip("\t"))
        label = raw.strip()
        if depth > len(stack):
            raise TreeParseError(f"line {lineno}: indent jumps more than one level")
        if depth == 0 and stack:
            raise TreeStructureError(f"line {lineno}: multiple roots")
        key = len(order)
        labels[key] = label
        children[key] = []
        if depth > 0:
            children[stack[depth - 1]].append(key)
        stack[depth:] = [key]
        order.append(key)
    if not order:
        raise TreeStructureError("empty tree")
    return _assemble(labels, children, order[0], order)


def read_tree(path, format: str | None = None) -> LabelTree:
    """Load a tree file, inferring the format from the extension."""
    path = str(path)
    if format is None:
        format = JSON_ADJACENCY if path.endswith(".json") else INDENTED_TEXT
    with io.open(path, "r", encoding="utf-8") as fh:
        return load_tree(fh, format)


def write_tree(tree: LabelTree, path) -> None:
    path = str(path)
    text = tree.to_json() if path.endswith(".json") else tree.to_indented_text()
    with io.open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# -- operations -------------------------------------------------------------


def effective_children(tree: LabelTree, nid: NodeId) -> list[NodeId]:
    """Children of an internal node; a leaf stands in for itself.

    Mapping leaves to themselves lets traversal handle imbalanced trees
    where classes sit at different depths.
    """
    node = tree.node(nid)
    return [nid] if node.is_leaf else list(node.children)


def limit_depth(tree: LabelTree, max_depth: int) -> LabelTree:
    """Cap the tree depth, re-attaching deep leaves higher up.

    Leaves deeper than ``max_depth`` become direct children of their
    ancestor at depth ``max_depth - 1``; internal nodes at or below the cap
    (and any left childless) are dropped. The class set is preserved
    exactly.
    """
    if max_depth < 1:
        raise TreeStructureError("max_depth must be >= 1")
    if tree.depth <= max_depth:
        return tree

    keep = [
        nid
        for nid in tree.ids()
        if tree.node(nid).is_leaf or tree.level(nid) < max_depth
    ]
    parents: dict[NodeId, NodeId] = {}
    for nid in keep:
        node = tree.node(nid)
        if nid == tree.root:
            continue
        if node.is_leaf and tree.level(nid) > max_depth:
            path = tree.path_to_root(nid)  # nid .. root
            parents[nid] = path[tree.level(nid) - (max_depth - 1)]
        else:
            parents[nid] = node.parent

    children: dict[NodeId, list[NodeId]] = {nid: [] for nid in keep}
    for nid in keep:
        if nid in parents:
            children[parents[nid]].append(nid)

    # Drop internal nodes left childless (their leaves moved above them).
    changed = True
    while changed:
        changed = False
        for nid in list(children):
            if nid != tree.root and not children[nid] and not tree.node(nid).is_leaf:
                del children[nid]
                children[parents[nid]].remove(nid)
                changed = True

    labels = {nid: tree.node(nid).label for nid in children}
    return _assemble(labels, children, tree.root, sorted(children))


def descend_to_level(tree: LabelTree, level: int) -> list[NodeId]:
    """Nodes at exactly ``level - 1`` edges from the root, plus any leaves
    sitting shallower, so the returned set still covers every class."""
    if not 1 <= level <= tree.depth:
        raise TreeStructureError(
            f"level {level} out of range for tree of depth {tree.depth}"
        )
    target = level - 1
    out = []
    for nid in tree.ids():
        lv = tree.level(nid)
        if lv == target or (lv < target and tree.node(nid).is_leaf):
            out.append(nid)
    return out


def remove_class(tree: LabelTree, label: str) -> LabelTree:
    """Remove a leaf class; ancestors left childless are removed too."""
    if label not in tree.leaf_labels():
        if tree.nodes_by_label(label):
            raise TreeStructureError(f"{label!r} names an internal node, not a class")
        raise UnknownNodeError(f"no class labelled {label!r}")
    doomed = {tree.leaf_by_label(label)}
    children: dict[NodeId, list[NodeId]] = {
        nid: list(tree.node(nid).children) for nid in tree.ids()
    }
    cur = tree.node(tree.leaf_by_label(label)).parent
    children[cur].remove(tree.leaf_by_label(label))
    while cur is not None and not children[cur]:
        doomed.add(cur)
        parent = tree.node(cur).parent
        if parent is None:
            raise TreeStructureError("removing the last class would empty the tree")
        children[parent].remove(cur)
        cur = parent

    keep = [nid for nid in tree.ids() if nid not in doomed]
    labels = {nid: tree.node(nid).label for nid in keep}
    kids = {nid: children[nid] for nid in keep}
    return _assemble(labels, kids, tree.root, keep)


def insert_class(
    tree: LabelTree,
    label: str,
    mode: str = "under-root",
    probe: ChildErrorProbe | None = None,
) -> LabelTree:
    """Add a new leaf class, either under the root or greedily placed.

    Greedy placement descends from the root, at each step entering the
    internal child whose mean probe error is lowest (ties to the lowest
    node id), and attaches the new leaf under the last internal node
    reached, i.e. the first one whose children are all leaves.
    """
    if label in tree.leaf_labels():
        raise TreeStructureError(f"class {label!r} already present")
    if not label or not label.strip():
        raise TreeStructureError("class label must be non-empty")

    if mode == "under-root":
        target = tree.root
    elif mode == "greedy":
        if probe is None:
            raise TreeStructureError("greedy insertion requires a probe")
        target = tree.root
        while True:
            internal = [
                c for c in tree.node(target).children if not tree.node(c).is_leaf
            ]
            if not internal:
                break
            best, best_err = None, math.inf
            for c in internal:
                err = probe.mean_error(tree.node(c).label)
                if best is None or err < best_err or (err == best_err and c < best):
                    best, best_err = c, err
            target = best
    else:
        raise TreeStructureError(f"unknown insertion mode {mode!r}")

    new_key = "new-leaf"
    labels: dict[object, str] = {nid: tree.node(nid).label for nid in tree.ids()}
    labels[new_key] = label
    children: dict[object, list] = {nid: list(tree.node(nid).children) for nid in tree.ids()}
    children[target].append(new_key)
    children[new_key] = []
    return _assemble(labels, children, tree.root, list(tree.ids()) + [new_key])
