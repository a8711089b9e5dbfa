"""Deterministic synthetic temporal-KG generator with known citation histories.

Produces cumulative yearly snapshots shaped like a patent/paper knowledge
graph: publications linked to applicant, classification, and keyword
attributes, plus publication-to-publication citation edges. Citations are
drawn by preferential attachment, so accumulated counts follow the heavy
tail seen in real citation networks. Optionally each attribute carries a
latent quality, making a publication's future citations predictable from
its attributes; this gives trainable signal without copying real data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, GraphLookupError, RangeError
from .tkg import Edge, EntityRef, Snapshot, TemporalKG, in_degree
from .trajectory import CitationSeries

CITED_BY = "citedBy"
RELATED_TO = "relatedTo"
APPLIED_BY = "appliedBy"
BELONG_TO = "belongTo"

RELATIONS = [CITED_BY, RELATED_TO, APPLIED_BY, BELONG_TO]

# attribute class -> relation connecting a publication to it
CLASS_RELATIONS = {
    "applicant": APPLIED_BY,
    "classification": BELONG_TO,
    "keyword": RELATED_TO,
}


@dataclass
class SynthConfig:
    num_publications: int = 200
    num_attributes_per_class: int = 20
    attribute_classes: tuple = ("applicant", "classification", "keyword")
    years: int = 5
    pref_attachment_exponent: float = 1.0
    seed: int = 0
    embedding_dim: int = 16
    start_year: int = 2000
    growth_rate: float = 1.2  # yearly growth factor of new publications
    refs_mean: float = 3.0  # mean citations made by a new publication
    keywords_per_publication: int = 3
    fitness_spread: float = 0.0  # >0 ties citation odds to attribute quality

    def __post_init__(self):
        if self.num_publications <= 0 or self.num_attributes_per_class <= 0:
            raise ContractError("counts must be positive")
        if self.years < 2:
            raise ContractError("need at least 2 snapshot years")
        if self.embedding_dim <= 0:
            raise ContractError("embedding_dim must be positive")
        for cls in self.attribute_classes:
            if cls not in CLASS_RELATIONS:
                raise ContractError(f"unknown attribute class {cls!r}")

    def to_json_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SynthConfig":
        doc = dict(doc)
        if "attribute_classes" in doc:
            doc["attribute_classes"] = tuple(doc["attribute_classes"])
        return cls(**doc)


def sample_targets(rng, citation_counts, exponent, k, fitness=None):
    """Draw ``k`` distinct citation targets.

    Target weights are (count + 1)**exponent, optionally multiplied by a
    per-target fitness. exponent=0 with uniform fitness is a uniform draw.
    """
    counts = np.asarray(citation_counts, dtype=np.float64)
    weights = np.power(counts + 1.0, exponent)
    if fitness is not None:
        weights = weights * np.asarray(fitness, dtype=np.float64)
    k = min(k, counts.size)
    if k == 0:
        return np.array([], dtype=np.intp)
    p = weights / weights.sum()
    return rng.choice(counts.size, size=k, replace=False, p=p)


def _publications_per_year(config: SynthConfig) -> list[int]:
    raw = np.power(config.growth_rate, np.arange(config.years))
    counts = np.maximum(1, np.round(raw * config.num_publications / raw.sum())).astype(int)
    # adjust the last years so the total lands exactly on num_publications
    diff = config.num_publications - int(counts.sum())
    i = config.years - 1
    while diff != 0 and i >= 0:
        step = 1 if diff > 0 else -1
        if counts[i] + step >= 1:
            counts[i] += step
            diff -= step
        else:
            i -= 1
    return list(counts)


@dataclass
class _Builder:
    """Mutable growth state shared across years of one generation run."""

    config: SynthConfig
    rng: np.random.Generator
    entities: list[EntityRef] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    features: dict = field(default_factory=dict)
    quality: dict = field(default_factory=dict)  # attribute id -> latent quality
    pub_ids: list[str] = field(default_factory=list)
    citations: list[int] = field(default_factory=list)  # in-degree per pub index
    fitness: list[float] = field(default_factory=list)

    def add_entity(self, ref: EntityRef):
        self.entities.append(ref)
        self.features[ref.id] = self.rng.uniform(-0.1, 0.1, size=self.config.embedding_dim)

    def ensure_attribute(self, cls: str, index: int) -> str:
        aid = f"{cls}_{index:03d}"
        if aid not in self.features:
            self.add_entity(EntityRef(aid, "attribute", cls))
            self.quality[aid] = float(
                np.exp(self.config.fitness_spread * self.rng.standard_normal())
            )
        return aid


def generate(config: SynthConfig) -> TemporalKG:
    """Grow the graph year by year and emit cumulative snapshots.

    Deterministic for a given config: the same seed always produces
    byte-identical snapshot files.
    """
    rng = np.random.default_rng(config.seed)
    b = _Builder(config, rng)
    per_year = _publications_per_year(config)

    snapshots = []
    for step in range(config.years):
        year = config.start_year + step
        for _ in range(per_year[step]):
            pid = f"pub_{len(b.pub_ids):05d}"
            b.add_entity(EntityRef(pid, "publication"))

            attr_ids = []
            for cls in config.attribute_classes:
                rel = CLASS_RELATIONS[cls]
                if cls == "keyword":
                    n_pick = min(config.keywords_per_publication, config.num_attributes_per_class)
                    picks = rng.choice(config.num_attributes_per_class, size=n_pick, replace=False)
                else:
                    picks = [int(rng.integers(config.num_attributes_per_class))]
                for pos, idx in enumerate(picks):
                    aid = b.ensure_attribute(cls, int(idx))
                    b.edges.append(Edge(pid, rel, aid, pos))
                    attr_ids.append(aid)

            if b.pub_ids:
                n_refs = min(int(rng.poisson(config.refs_mean)), len(b.pub_ids))
                targets = sample_targets(
                    rng, b.citations, config.pref_attachment_exponent, n_refs,
                    fitness=b.fitness,
                )
                for pos, target in enumerate(sorted(int(t) for t in targets)):
                    b.edges.append(Edge(pid, CITED_BY, b.pub_ids[target], pos))
                    b.citations[target] += 1

            b.pub_ids.append(pid)
            b.citations.append(0)
            qualities = [b.quality[a] for a in attr_ids]
            b.fitness.append(float(np.exp(np.mean(np.log(qualities)))))

        snapshots.append(
            Snapshot(
                year,
                list(b.entities),
                list(b.edges),
                {e.id: b.features[e.id] for e in b.entities},
            )
        )

    return TemporalKG(RELATIONS, snapshots, config.embedding_dim)


def ground_truth(tkg: TemporalKG, publication_id: str, t_year: int, horizon: int) -> CitationSeries:
    """Observed cumulative citation counts for years t_year+1 .. t_year+horizon.

    The count at each year is the publication's in-degree under citedBy in
    that year's snapshot, so the series is non-decreasing by construction.
    """
    years = tkg.years
    if t_year not in years:
        raise RangeError(f"year {t_year} not covered; snapshots span {years[0]}..{years[-1]}")
    if not tkg.snapshot_at(t_year).has_entity(publication_id):
        raise GraphLookupError(f"unknown publication {publication_id!r} at year {t_year}")
    needed = [t_year + k for k in range(1, horizon + 1)]
    missing = [y for y in needed if y not in years]
    if missing:
        raise RangeError(
            f"snapshots missing for years {missing}; have {years[0]}..{years[-1]}"
        )
    values = [
        float(in_degree(tkg.snapshot_at(y), publication_id, CITED_BY)) for y in needed
    ]
    return CitationSeries(start_year=t_year, values=np.asarray(values))
