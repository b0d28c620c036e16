"""Typed property-graph store for food knowledge.

Nodes are upserted by (kind, normalized name) so an ingredient mentioned by
many recipes becomes a single node. Edges are validated against the ontology
table before they are stored. The store is safe for many concurrent readers
or one writer: every operation takes an internal reentrant lock, and
``batch()`` holds it across a group of mutations so readers never observe a
half-applied batch.

Snapshots are line-delimited JSON: a schema-version header record followed by
one record per node and per edge, in insertion order, so two identical graphs
export byte-identical files.
"""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .ontology import (
    ALLOWED_ENDPOINTS,
    EdgeKind,
    NodeKind,
    allergen_categories,
    diet_restrictions,
    is_legal,
    legal_triples,
    seasons,
    sfp_categories,
)

SNAPSHOT_SCHEMA = "foodkg.snapshot"
SNAPSHOT_VERSION = 1

Props = dict[str, Any]


class GraphError(Exception):
    pass


class UnknownNodeError(GraphError):
    pass


class UnknownEdgeError(GraphError):
    pass


class OntologyViolationError(GraphError):
    pass


class SnapshotError(GraphError):
    pass


@dataclass
class Node:
    id: str
    kind: NodeKind
    name: str
    props: Props = field(default_factory=dict)


@dataclass
class Edge:
    id: str
    src: str
    kind: EdgeKind
    dst: str
    props: Props = field(default_factory=dict)


@dataclass
class Triplet:
    """An edge together with both endpoint nodes; lossless view of one fact."""

    subject: Node
    predicate: EdgeKind
    predicate_props: Props
    object: Node


@dataclass
class GraphStats:
    """Node counts per kind and edge counts per legal (src, kind, dst) triple."""

    nodes: dict[NodeKind, int]
    edges: dict[tuple[NodeKind, EdgeKind, NodeKind], int]

    @property
    def total_nodes(self) -> int:
        return sum(self.nodes.values())

    @property
    def total_edges(self) -> int:
        return sum(self.edges.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": {kind.value: n for kind, n in self.nodes.items()},
            "edges": {
                f"{src.value} {kind.value} {dst.value}": n
                for (src, kind, dst), n in self.edges.items()
            },
            "total_nodes": self.total_nodes,
            "total_edges": self.total_edges,
        }


def normalize_name(name: str) -> str:
    """Collapse whitespace and lowercase; this is the node upsert key."""
    return " ".join(name.split()).lower()


def _scalar_props(props: Props) -> list[tuple[str, Any]]:
    return sorted(
        (k, v) for k, v in props.items() if isinstance(v, (str, int, float, bool))
    )


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if value != int(value) else str(int(value))
    return str(value)


def _format_props(items: list[tuple[str, Any]]) -> str:
    return ", ".join(f"{k}={_format_value(v)}" for k, v in items)


class FoodGraph:
    """In-memory typed property graph with snapshot import/export."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._nodes: dict[str, Node] = {}
        self._edges: dict[str, Edge] = {}
        self._by_key: dict[tuple[NodeKind, str], str] = {}
        self._out: dict[str, list[str]] = {}
        self._in: dict[str, list[str]] = {}
        self._node_seq = 0
        self._edge_seq = 0

    @classmethod
    def seeded(cls) -> "FoodGraph":
        """New graph pre-populated with the fixed category nodes."""
        g = cls()
        with g.batch():
            for cat in allergen_categories():
                g.add_node(
                    NodeKind.ALLERGEN_CATEGORY, cat.name, {"allergen_id": cat.id}
                )
            for sfp in sfp_categories():
                g.add_node(NodeKind.SFP_CATEGORY, sfp.name, {"sfp_id": sfp.id})
            for season in seasons():
                g.add_node(NodeKind.SEASON, season)
            for diet in diet_restrictions():
                g.add_node(
                    NodeKind.DIET_RESTRICTION, diet.id, {"diet_group": diet.group}
                )
        return g

    @contextmanager
    def batch(self) -> Iterator[None]:
        """Hold the write lock across several mutations (isolation, not rollback)."""
        with self._lock:
            yield

    # -- nodes --

    def add_node(self, kind: NodeKind, name: str, props: Props | None = None) -> str:
        """Store a node, or return the existing id for this (kind, name).

        On upsert the new props are merged over the existing ones.
        """
        if not name or not name.strip():
            raise GraphError("node name must be non-empty")
        kind = NodeKind(kind)
        with self._lock:
            key = (kind, normalize_name(name))
            existing = self._by_key.get(key)
            if existing is not None:
                if props:
                    self._nodes[existing].props.update(props)
                return existing
            self._node_seq += 1
            node_id = f"n{self._node_seq}"
            self._nodes[node_id] = Node(node_id, kind, name, dict(props or {}))
            self._by_key[key] = node_id
            self._out[node_id] = []
            self._in[node_id] = []
            return node_id

    def node(self, node_id: str) -> Node:
        with self._lock:
            try:
                return self._nodes[node_id]
            except KeyError:
                raise UnknownNodeError(f"unknown node id {node_id!r}") from None

    def find_node(self, kind: NodeKind, name: str) -> Node | None:
        with self._lock:
            node_id = self._by_key.get((NodeKind(kind), normalize_name(name)))
            return self._nodes[node_id] if node_id else None

    def nodes(self) -> list[Node]:
        with self._lock:
            return list(self._nodes.values())

    def nodes_of_kind(self, kind: NodeKind) -> list[Node]:
        kind = NodeKind(kind)
        with self._lock:
            return [n for n in self._nodes.values() if n.kind == kind]

    def has_node(self, node_id: str) -> bool:
        with self._lock:
            return node_id in self._nodes

    # -- edges --

    def add_edge(
        self, src: str, kind: EdgeKind, dst: str, props: Props | None = None
    ) -> str:
        kind = EdgeKind(kind)
        with self._lock:
            if src not in self._nodes:
                raise UnknownNodeError(f"unknown source node {src!r}")
            if dst not in self._nodes:
                raise UnknownNodeError(f"unknown target node {dst!r}")
            src_kind = self._nodes[src].kind
            dst_kind = self._nodes[dst].kind
            if not is_legal(src_kind, kind, dst_kind):
                raise OntologyViolationError(
                    f"{src_kind.value} -{kind.value}-> {dst_kind.value} is not allowed"
                )
            self._edge_seq += 1
            edge_id = f"e{self._edge_seq}"
            self._edges[edge_id] = Edge(edge_id, src, kind, dst, dict(props or {}))
            self._out[src].append(edge_id)
            self._in[dst].append(edge_id)
            return edge_id

    def edge(self, edge_id: str) -> Edge:
        with self._lock:
            try:
                return self._edges[edge_id]
            except KeyError:
                raise UnknownEdgeError(f"unknown edge id {edge_id!r}") from None

    def edges(self) -> list[Edge]:
        with self._lock:
            return list(self._edges.values())

    def find_edges(self, src: str, kind: EdgeKind, dst: str) -> list[Edge]:
        kind = EdgeKind(kind)
        with self._lock:
            return [
                self._edges[eid]
                for eid in self._out.get(src, [])
                if self._edges[eid].kind == kind and self._edges[eid].dst == dst
            ]

    def neighbors(
        self,
        node_id: str,
        kind_filter: EdgeKind | None = None,
        direction: str = "both",
    ) -> list[tuple[Edge, Node]]:
        """Incident edges with their far endpoints, in edge insertion order."""
        if direction not in ("in", "out", "both"):
            raise ValueError(f"direction must be in|out|both, got {direction!r}")
        if kind_filter is not None:
            kind_filter = EdgeKind(kind_filter)
        with self._lock:
            if node_id not in self._nodes:
                raise UnknownNodeError(f"unknown node id {node_id!r}")
            edge_ids: list[str] = []
            if direction in ("out", "both"):
                edge_ids.extend(self._out[node_id])
            if direction in ("in", "both"):
                edge_ids.extend(self._in[node_id])
            edge_ids = sorted(set(edge_ids), key=lambda eid: int(eid[1:]))
            result: list[tuple[Edge, Node]] = []
            for eid in edge_ids:
                edge = self._edges[eid]
                if kind_filter is not None and edge.kind != kind_filter:
                    continue
                far = edge.dst if edge.src == node_id else edge.src
                result.append((edge, self._nodes[far]))
            return result

    # -- queries --

    def stats(self) -> GraphStats:
        with self._lock:
            node_counts = {kind: 0 for kind in NodeKind}
            for node in self._nodes.values():
                node_counts[node.kind] += 1
            edge_counts = {triple: 0 for triple in legal_triples()}
            for edge in self._edges.values():
                triple = (
                    self._nodes[edge.src].kind,
                    edge.kind,
                    self._nodes[edge.dst].kind,
                )
                edge_counts[triple] += 1
            return GraphStats(nodes=node_counts, edges=edge_counts)

    def triplet(self, edge_id: str) -> Triplet:
        with self._lock:
            edge = self.edge(edge_id)
            return Triplet(
                subject=self._nodes[edge.src],
                predicate=edge.kind,
                predicate_props=dict(edge.props),
                object=self._nodes[edge.dst],
            )

    def serialize_fact(self, edge_id: str) -> str:
        """Deterministic natural-text rendering of one edge plus its endpoints.

        Format: ``<SubjKind> '<name>' <PREDICATE> [<edge props>] <ObjKind>
        '<name>' [subject: <props>] [object: <props>]`` with each bracket
        group omitted when empty and props sorted by key. Only scalar props
        are rendered.
        """
        with self._lock:
            edge = self.edge(edge_id)
            subj = self._nodes[edge.src]
            obj = self._nodes[edge.dst]
            parts = [f"{subj.kind.value} '{subj.name}'", edge.kind.value]
            edge_items = _scalar_props(edge.props)
            if edge_items:
                parts.append(f"[{_format_props(edge_items)}]")
            parts.append(f"{obj.kind.value} '{obj.name}'")
            subj_items = _scalar_props(subj.props)
            if subj_items:
                parts.append(f"[subject: {_format_props(subj_items)}]")
            obj_items = _scalar_props(obj.props)
            if obj_items:
                parts.append(f"[object: {_format_props(obj_items)}]")
            return " ".join(parts)

    # -- snapshots --

    def export_snapshot(self, path: str | Path) -> None:
        with self._lock:
            lines = [
                json.dumps(
                    {"schema": SNAPSHOT_SCHEMA, "version": SNAPSHOT_VERSION},
                    sort_keys=True,
                    separators=(",", ":"),
                )
            ]
            for node in self._nodes.values():
                lines.append(
                    json.dumps(
                        {
                            "t": "node",
                            "id": node.id,
                            "kind": node.kind.value,
                            "name": node.name,
                            "props": node.props,
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                )
            for edge in self._edges.values():
                lines.append(
                    json.dumps(
                        {
                            "t": "edge",
                            "id": edge.id,
                            "src": edge.src,
                            "kind": edge.kind.value,
                            "dst": edge.dst,
                            "props": edge.props,
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def import_snapshot(cls, path: str | Path) -> "FoodGraph":
        """Rebuild a graph from a snapshot file; ids, names and props survive."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SnapshotError(f"cannot read snapshot: {exc}") from exc
        lines = text.splitlines()
        if not lines:
            raise SnapshotError("snapshot file is empty")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"snapshot header is not valid JSON: {exc}") from exc
        if not isinstance(header, dict) or header.get("schema") != SNAPSHOT_SCHEMA:
            raise SnapshotError("not a graph snapshot file")
        if header.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"snapshot schema version {header.get('version')!r} is not supported"
            )
        graph = cls()
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SnapshotError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                if record["t"] == "node":
                    node = Node(
                        id=record["id"],
                        kind=NodeKind(record["kind"]),
                        name=record["name"],
                        props=record["props"],
                    )
                    graph._nodes[node.id] = node
                    graph._by_key[(node.kind, normalize_name(node.name))] = node.id
                    graph._out[node.id] = []
                    graph._in[node.id] = []
                    graph._node_seq = max(graph._node_seq, int(node.id[1:]))
                elif record["t"] == "edge":
                    edge = Edge(
                        id=record["id"],
                        src=record["src"],
                        kind=EdgeKind(record["kind"]),
                        dst=record["dst"],
                        props=record["props"],
                    )
                    if edge.src not in graph._nodes or edge.dst not in graph._nodes:
                        raise SnapshotError(
                            f"line {lineno}: edge references unknown node"
                        )
                    src_kind = graph._nodes[edge.src].kind
                    dst_kind = graph._nodes[edge.dst].kind
                    if not is_legal(src_kind, edge.kind, dst_kind):
                        raise SnapshotError(
                            f"line {lineno}: edge violates the ontology"
                        )
                    graph._edges[edge.id] = edge
                    graph._out[edge.src].append(edge.id)
                    graph._in[edge.dst].append(edge.id)
                    graph._edge_seq = max(graph._edge_seq, int(edge.id[1:]))
                else:
                    raise SnapshotError(
                        f"line {lineno}: unknown record type {record['t']!r}"
                    )
            except (KeyError, ValueError) as exc:
                raise SnapshotError(f"line {lineno}: malformed record: {exc}") from exc
        return graph


__all__ = [
    "ALLOWED_ENDPOINTS",
    "Edge",
    "FoodGraph",
    "GraphError",
    "GraphStats",
    "Node",
    "OntologyViolationError",
    "SnapshotError",
    "Triplet",
    "UnknownEdgeError",
    "UnknownNodeError",
    "normalize_name",
]
