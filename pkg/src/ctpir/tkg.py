"""Temporal knowledge graph model: yearly snapshots, loader, validator, stats.

A temporal KG is an ordered sequence of yearly snapshots over typed entities
(publications and attribute entities such as applicants, classifications,
keywords) connected by labelled, positioned edges. Snapshots are cumulative:
every entity and edge present in year t stays present in year t+1.

On disk each snapshot is one JSON document named ``snapshot_<year>.json``::

    {
      "year": 2015,
      "relations": ["citedBy", "relatedTo", "appliedBy", "belongTo"],
      "entities": [{"id": "p1", "kind": "publication", "attribute_class": null}, ...],
      "edges":    [{"src": "p1", "rel": "appliedBy", "dst": "a3", "pos": 0}, ...],
      "features": {"p1": [0.01, -0.02, ...], ...}
    }

Edge direction convention: an edge (src, rel, dst) is an assertion made by
``src``; for ``citedBy`` the source is the citing publication, so a
publication's citation count is its in-degree under ``citedBy``.
"""

from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphLookupError, GraphValidationError, ParseError

ENTITY_KINDS = ("publication", "attribute")


@dataclass(frozen=True)
class EntityRef:
    id: str
    kind: str
    attribute_class: str | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    rel: str
    dst: str
    pos: int


@dataclass
class Snapshot:
    year: int
    entities: list[EntityRef]
    edges: list[Edge]
    features: dict[str, np.ndarray]

    def __post_init__(self):
        self._by_id = {e.id: e for e in self.entities}

    @property
    def entity_ids(self) -> set[str]:
        return set(self._by_id)

    def has_entity(self, entity_id: str) -> bool:
        return entity_id in self._by_id

    def entity(self, entity_id: str) -> EntityRef:
        try:
            return self._by_id[entity_id]
        except KeyError:
            raise GraphLookupError(f"unknown entity {entity_id!r} in year {self.year}")

    def to_json_dict(self, relations) -> dict:
        return {
            "year": self.year,
            "relations": list(relations),
            "entities": [
                {"id": e.id, "kind": e.kind, "attribute_class": e.attribute_class}
                for e in self.entities
            ],
            "edges": [
                {"src": e.src, "rel": e.rel, "dst": e.dst, "pos": e.pos}
                for e in self.edges
            ],
            "features": {k: [float(v) for v in vec] for k, vec in self.features.items()},
        }


@dataclass
class TemporalKG:
    relations: list[str]
    snapshots: list[Snapshot]
    embedding_dim: int

    @property
    def years(self) -> list[int]:
        return [s.year for s in self.snapshots]

    def snapshot_at(self, year: int) -> Snapshot:
        for snap in self.snapshots:
            if snap.year == year:
                return snap
        raise GraphLookupError(f"no snapshot for year {year}; have {self.years}")

    def up_to_year(self, year: int) -> "TemporalKG":
        """View of this graph restricted to snapshots with year <= ``year``."""
        kept = [s for s in self.snapshots if s.year <= year]
        if not kept:
            raise GraphLookupError(f"no snapshots at or before year {year}")
        return TemporalKG(self.relations, kept, self.embedding_dim)

    def entity_order(self) -> list[str]:
        """All entity ids in first-appearance order (stable across years)."""
        order = []
        seen = set()
        for snap in self.snapshots:
            for ent in snap.entities:
                if ent.id not in seen:
                    seen.add(ent.id)
                    order.append(ent.id)
        return order

    def first_years(self) -> dict[str, int]:
        first = {}
        for snap in self.snapshots:
            for ent in snap.entities:
                first.setdefault(ent.id, snap.year)
        return first


@dataclass
class GraphStats:
    relation: str
    num_entities: int
    num_edges: int
    avg_degree: float = None

    def __post_init__(self):
        expected = 2.0 * self.num_edges / self.num_entities if self.num_entities else 0.0
        if self.avg_degree is None:
            self.avg_degree = expected
        elif abs(self.avg_degree - expected) > 1e-9:
            raise GraphValidationError(
                f"avg_degree {self.avg_degree} inconsistent with 2*{self.num_edges}/{self.num_entities}"
            )

    def to_json_dict(self) -> dict:
        return {
            "relation": self.relation,
            "num_entities": self.num_entities,
            "num_edges": self.num_edges,
            "avg_degree": self.avg_degree,
        }


@dataclass
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str):
        self.violations.append(Violation(code, message))

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [{"code": v.code, "message": v.message} for v in self.violations],
        }

    def __str__(self):
        if self.ok:
            return "valid"
        return "; ".join(f"[{v.code}] {v.message}" for v in self.violations)


# ---------------------------------------------------------------------------
# loading and saving

_SNAPSHOT_NAME = re.compile(r"snapshot_(-?\d+)\.json$")


def _seeded_feature(entity_id: str, dim: int, seed: int) -> np.ndarray:
    # stable per-id init so a rerun or re-ordered load produces the same vectors
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(entity_id.encode("utf-8"))])
    )
    return rng.uniform(-0.1, 0.1, size=dim)


def _parse_snapshot_file(path: Path) -> tuple[Snapshot, list[str]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}:{err.lineno}: {err.msg}") from err

    try:
        year = int(doc["year"])
        relations = [str(r) for r in doc["relations"]]
        entities = [
            EntityRef(str(e["id"]), str(e["kind"]), e.get("attribute_class"))
            for e in doc["entities"]
        ]
        edges = [
            Edge(str(e["src"]), str(e["rel"]), str(e["dst"]), int(e["pos"]))
            for e in doc["edges"]
        ]
        features = {
            str(k): np.asarray(v, dtype=np.float64)
            for k, v in doc.get("features", {}).items()
        }
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: malformed snapshot document: {err}") from err

    return Snapshot(year, entities, edges, features), relations


def load_snapshots(directory, embedding_dim: int | None = None,
                   feature_seed: int = 0) -> TemporalKG:
    """Load every ``snapshot_<year>.json`` under ``directory``.

    Missing feature vectors are filled with seeded uniform(-0.1, 0.1) draws,
    keyed by entity id so the fill is independent of load order. The loaded
    graph is validated; any invariant breach raises GraphValidationError.
    """
    directory = Path(directory)
    paths = []
    for path in sorted(directory.iterdir()):
        m = _SNAPSHOT_NAME.match(path.name)
        if m:
            paths.append((int(m.group(1)), path))
    if not paths:
        raise ParseError(f"{directory}: no snapshot_<year>.json files found")
    paths.sort()

    snapshots = []
    relations = None
    for year, path in paths:
        snap, rels = _parse_snapshot_file(path)
        if snap.year != year:
            raise ParseError(f"{path}: year field {snap.year} does not match filename")
        if relations is None:
            relations = rels
        elif relations != rels:
            raise ParseError(f"{path}: relation set {rels} differs from {relations}")
        snapshots.append(snap)

    dim = embedding_dim
    if dim is None:
        for snap in snapshots:
            for vec in snap.features.values():
                dim = int(vec.shape[0])
                break
            if dim is not None:
                break
    if dim is None:
        raise ParseError(
            f"{directory}: no feature vectors in any file; pass embedding_dim explicitly"
        )

    for snap in snapshots:
        for ent in snap.entities:
            if ent.id not in snap.features:
                snap.features[ent.id] = _seeded_feature(ent.id, dim, feature_seed)

    tkg = TemporalKG(relations, snapshots, dim)
    report = validate(tkg)
    if not report.ok:
        raise GraphValidationError(f"invalid graph in {directory}: {report}", report)
    return tkg


def save_snapshots(tkg: TemporalKG, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for snap in tkg.snapshots:
        path = directory / f"snapshot_{snap.year}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(snap.to_json_dict(tkg.relations), fh)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# validation


def validate(tkg: TemporalKG) -> ValidationReport:
    """Check every structural invariant; returns a report instead of raising."""
    report = ValidationReport()
    declared = set(tkg.relations)

    years = tkg.years
    for prev, curr in zip(years, years[1:]):
        if curr != prev + 1:
            report.add("years", f"years must be consecutive: {prev} then {curr}")

    for snap in tkg.snapshots:
        seen = set()
        for ent in snap.entities:
            if ent.id in seen:
                report.add("duplicate-entity", f"year {snap.year}: duplicated id {ent.id!r}")
            seen.add(ent.id)
            if ent.kind not in ENTITY_KINDS:
                report.add("entity-kind", f"year {snap.year}: {ent.id!r} has kind {ent.kind!r}")
            if ent.kind == "attribute" and not ent.attribute_class:
                report.add(
                    "attribute-class",
                    f"year {snap.year}: attribute {ent.id!r} lacks attribute_class",
                )

        positions = {}
        for edge in snap.edges:
            if edge.rel not in declared:
                report.add(
                    "relation",
                    f"year {snap.year}: edge ({edge.src},{edge.rel},{edge.dst}) uses undeclared relation",
                )
            for endpoint in (edge.src, edge.dst):
                if endpoint not in seen:
                    report.add(
                        "edge-endpoint",
                        f"year {snap.year}: edge ({edge.src},{edge.rel},{edge.dst}) references unknown entity {endpoint!r}",
                    )
            positions.setdefault((edge.src, edge.rel), []).append(edge.pos)
        for (src, rel), pos_list in positions.items():
            if sorted(pos_list) != list(range(len(pos_list))):
                report.add(
                    "edge-positions",
                    f"year {snap.year}: positions for ({src},{rel}) are {sorted(pos_list)}, expected 0..{len(pos_list) - 1}",
                )

        for ent in snap.entities:
            vec = snap.features.get(ent.id)
            if vec is None:
                report.add("features", f"year {snap.year}: {ent.id!r} has no feature vector")
            elif vec.shape != (tkg.embedding_dim,):
                report.add(
                    "features",
                    f"year {snap.year}: {ent.id!r} feature shape {vec.shape} != ({tkg.embedding_dim},)",
                )
            elif not np.all(np.isfinite(vec)):
                report.add("features", f"year {snap.year}: {ent.id!r} feature vector not finite")

    for prev, curr in zip(tkg.snapshots, tkg.snapshots[1:]):
        missing_entities = prev.entity_ids - curr.entity_ids
        if missing_entities:
            report.add(
                "cumulative-entities",
                f"year {curr.year} lost entities present in {prev.year}: {sorted(missing_entities)}",
            )
        missing_edges = set(prev.edges) - set(curr.edges)
        if missing_edges:
            sample = sorted((e.src, e.rel, e.dst) for e in missing_edges)
            report.add(
                "cumulative-edges",
                f"year {curr.year} lost edges present in {prev.year}: {sample}",
            )

    return report


# ---------------------------------------------------------------------------
# queries


def stats(tkg: TemporalKG, relation: str, year: int) -> GraphStats:
    """Entity/edge counts and mean degree of one relation's induced subgraph.

    Entities are counted only if incident to at least one edge of the
    relation; the mean degree is 2 * num_edges / num_entities.
    """
    if relation not in tkg.relations:
        raise GraphLookupError(f"unknown relation {relation!r}; declared: {tkg.relations}")
    snap = tkg.snapshot_at(year)
    incident = set()
    num_edges = 0
    for edge in snap.edges:
        if edge.rel == relation:
            num_edges += 1
            incident.add(edge.src)
            incident.add(edge.dst)
    return GraphStats(relation, len(incident), num_edges)


def neighbors(snapshot: Snapshot, node_id: str, relation: str) -> list[EntityRef]:
    """Targets of the node's outgoing edges under one relation.

    Ordered by the stored edge position, so index 0 is the first-listed
    target (for example the first applicant of a publication).
    """
    if not snapshot.has_entity(node_id):
        raise GraphLookupError(f"unknown entity {node_id!r} in year {snapshot.year}")
    hits = [e for e in snapshot.edges if e.src == node_id and e.rel == relation]
    hits.sort(key=lambda e: e.pos)
    return [snapshot.entity(e.dst) for e in hits]


def in_degree(snapshot: Snapshot, node_id: str, relation: str) -> int:
    """Number of edges of ``relation`` pointing at the node."""
    return sum(1 for e in snapshot.edges if e.dst == node_id and e.rel == relation)
