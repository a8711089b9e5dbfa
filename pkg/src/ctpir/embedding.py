"""Temporal relational graph convolution over yearly snapshots.

Each layer updates a node by combining four terms: relation-wise sums of
current-year neighbor features, a self transform, and the same two terms
recomputed from the previous year's features after passing them through a
learned year-to-year transform. When there is no previous snapshot the
temporal terms vanish and the layer reduces to a plain relational GCN layer.

Messages flow along edge direction (source to target), so attribute
entities accumulate features from the publications pointing at them and a
publication accumulates features from the publications citing it.

Neighbor sums are divided by the neighbor count when ``normalize`` is on
(the default); the unnormalized plain sum is available behind the flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError, GraphLookupError
from .tkg import Snapshot, TemporalKG

_ACTIVATIONS = {
    "relu": ad.relu,
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "identity": lambda t: t,
}


@dataclass
class RGCNLayerWeights:
    w_self: Tensor  # (d_in, d_out)
    w_rel: dict  # relation -> (d_in, d_out)
    w_time: Tensor  # (d_in, d_in), maps last year's features into this year's input space


@dataclass
class RGCNWeights:
    relations: list[str]
    layer_dims: tuple  # e.g. (128, 64, 128)
    layers: list[RGCNLayerWeights]
    activation: str = "relu"  # applied between layers; the final layer is linear
    normalize: bool = True

    @classmethod
    def init(cls, relations, layer_dims=(128, 64, 128), seed: int = 0,
             activation: str = "relu", normalize: bool = True) -> "RGCNWeights":
        if activation not in _ACTIVATIONS:
            raise ContractError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(seed)

        def uniform(shape):
            limit = 1.0 / math.sqrt(shape[0])
            return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)

        layers = []
        for d_in, d_out in zip(layer_dims, layer_dims[1:]):
            layers.append(
                RGCNLayerWeights(
                    w_self=uniform((d_in, d_out)),
                    w_rel={r: uniform((d_in, d_out)) for r in relations},
                    w_time=uniform((d_in, d_in)),
                )
            )
        return cls(list(relations), tuple(layer_dims), layers, activation, normalize)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def parameters(self):
        out = []
        for lw in self.layers:
            out.append(lw.w_self)
            out.extend(lw.w_rel[r] for r in self.relations)
            out.append(lw.w_time)
        return out

    def temporal_parameters(self):
        return [lw.w_time for lw in self.layers]


def _default_order(snapshot: Snapshot) -> list[str]:
    return [e.id for e in snapshot.entities]


def _prepared_edges(snapshot: Snapshot, relations, row_index, normalize):
    """Per-relation (take, put, coeff) arrays in a canonical edge order.

    Sorting by (target, source, position) makes aggregation independent of
    the order edges happen to be stored in.
    """
    by_rel = {}
    for rel in relations:
        rows = sorted(
            (row_index[e.dst], row_index[e.src], e.pos)
            for e in snapshot.edges
            if e.rel == rel
        )
        if not rows:
            continue
        put = np.array([r[0] for r in rows], dtype=np.intp)
        take = np.array([r[1] for r in rows], dtype=np.intp)
        coeff = None
        if normalize:
            counts = np.bincount(put, minlength=0)
            coeff = 1.0 / counts[put]
        by_rel[rel] = (take, put, coeff)
    return by_rel


def _message_sum(edges_by_rel, h: Tensor, lw: RGCNLayerWeights, relations, num_rows):
    acc = None
    for rel in relations:
        if rel not in edges_by_rel:
            continue
        take, put, coeff = edges_by_rel[rel]
        agg = ad.scatter_sum(h, take, put, num_rows, weights=coeff)
        term = ad.matmul(agg, lw.w_rel[rel])
        acc = term if acc is None else ad.add(acc, term)
    return acc


def _layer_core(curr_edges, prev_edges, h_curr, h_prev, weights, layer):
    lw = weights.layers[layer]
    num_rows = h_curr.shape[0]

    acc = _message_sum(curr_edges, h_curr, lw, weights.relations, num_rows)
    self_term = ad.matmul(h_curr, lw.w_self)
    acc = self_term if acc is None else ad.add(acc, self_term)

    if h_prev is not None:
        carried = ad.matmul(h_prev, lw.w_time)
        prev_msg = _message_sum(prev_edges, carried, lw, weights.relations, num_rows)
        if prev_msg is not None:
            acc = ad.add(acc, prev_msg)
        acc = ad.add(acc, ad.matmul(carried, lw.w_self))

    if layer != weights.num_layers - 1:
        acc = _ACTIVATIONS[weights.activation](acc)
    return acc


def _check_layer_input(h, weights, layer, num_rows, name):
    d_in = weights.layer_dims[layer]
    if h.shape != (num_rows, d_in):
        raise DimensionError(
            f"{name} must have shape ({num_rows}, {d_in}), got {h.shape}"
        )


def rgcn_diff_layer(curr: Snapshot, prev: Snapshot | None, h_curr: Tensor,
                    h_prev: Tensor | None, weights: RGCNWeights, layer: int,
                    entity_order=None) -> Tensor:
    """One difference-preserving layer update.

    ``h_curr`` and ``h_prev`` share the row indexing given by
    ``entity_order`` (default: the current snapshot's entity order); the
    previous snapshot's entities must be a subset of that row space.
    """
    if (prev is None) != (h_prev is None):
        raise ContractError("prev snapshot and h_prev must be supplied together")
    order = list(entity_order) if entity_order is not None else _default_order(curr)
    row_index = {eid: i for i, eid in enumerate(order)}
    _check_layer_input(h_curr, weights, layer, len(order), "h_curr")
    if h_prev is not None:
        _check_layer_input(h_prev, weights, layer, len(order), "h_prev")

    curr_edges = _prepared_edges(curr, weights.relations, row_index, weights.normalize)
    prev_edges = (
        _prepared_edges(prev, weights.relations, row_index, weights.normalize)
        if prev is not None
        else {}
    )
    return _layer_core(curr_edges, prev_edges, h_curr, h_prev, weights, layer)


def rgcn_static_layer(snapshot: Snapshot, h: Tensor, weights: RGCNWeights,
                      layer: int, entity_order=None) -> Tensor:
    """Plain relational GCN layer: neighbor sums plus self transform only."""
    order = list(entity_order) if entity_order is not None else _default_order(snapshot)
    row_index = {eid: i for i, eid in enumerate(order)}
    _check_layer_input(h, weights, layer, len(order), "h")
    edges = _prepared_edges(snapshot, weights.relations, row_index, weights.normalize)
    return _layer_core(edges, {}, h, None, weights, layer)


# ---------------------------------------------------------------------------
# full-sequence embedding


@dataclass
class EmbeddingTable:
    """Final-layer feature vectors for every entity alive at each year."""

    entity_order: list[str]
    row_index: dict
    years: list[int]
    tensors: dict  # year -> (num_entities, dim) Tensor
    first_year: dict
    dim: int

    def get(self, entity_id: str, year: int) -> np.ndarray:
        if entity_id not in self.row_index:
            raise GraphLookupError(f"unknown entity {entity_id!r}")
        if year not in self.tensors:
            raise GraphLookupError(f"year {year} not embedded; have {self.years}")
        if self.first_year[entity_id] > year:
            raise GraphLookupError(f"{entity_id!r} does not exist yet in {year}")
        return self.tensors[year].data[self.row_index[entity_id]]

    def tensor(self, year: int) -> Tensor:
        return self.tensors[year]

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "years": self.years,
            "entities": {
                eid: {
                    str(year): [float(v) for v in self.get(eid, year)]
                    for year in self.years
                    if self.first_year[eid] <= year
                }
                for eid in self.entity_order
            },
        }


def embed_sequence(tkg: TemporalKG, weights: RGCNWeights, last_year: int | None = None,
                   temporal: bool = True) -> EmbeddingTable:
    """Run every layer over every snapshot year in order.

    Each year's layer inputs are paired with the previous year's inputs at
    the same depth, so the temporal terms always see last year's features.
    Rows of entities not yet alive are held at zero. ``temporal=False``
    drops the year-to-year terms entirely (plain R-GCN per year).
    """
    if weights.layer_dims[0] != tkg.embedding_dim:
        raise DimensionError(
            f"layer input dim {weights.layer_dims[0]} != graph feature dim {tkg.embedding_dim}"
        )
    order = tkg.entity_order()
    row_index = {eid: i for i, eid in enumerate(order)}
    first_year = tkg.first_years()
    n = len(order)

    snapshots = [s for s in tkg.snapshots if last_year is None or s.year <= last_year]
    if not snapshots:
        raise GraphLookupError(f"no snapshots at or before {last_year}")

    tensors = {}
    prev_snap = None
    prev_layers = None
    for snap in snapshots:
        feats = np.zeros((n, tkg.embedding_dim))
        alive = np.zeros((n, 1))
        for ent in snap.entities:
            row = row_index[ent.id]
            feats[row] = snap.features[ent.id]
            alive[row, 0] = 1.0
        any_dead = len(snap.entities) < n

        curr_edges = _prepared_edges(snap, weights.relations, row_index, weights.normalize)
        prev_edges = (
            _prepared_edges(prev_snap, weights.relations, row_index, weights.normalize)
            if (temporal and prev_snap is not None)
            else {}
        )

        layers = [Tensor(feats)]
        mask = Tensor(alive)
        for layer in range(weights.num_layers):
            h_prev = prev_layers[layer] if (temporal and prev_layers is not None) else None
            h = _layer_core(curr_edges, prev_edges, layers[layer], h_prev, weights, layer)
            if any_dead:
                h = ad.mul(h, mask)
            layers.append(h)

        tensors[snap.year] = layers[-1]
        prev_snap = snap
        prev_layers = layers

    return EmbeddingTable(
        entity_order=order,
        row_index=row_index,
        years=[s.year for s in snapshots],
        tensors=tensors,
        first_year=first_year,
        dim=weights.layer_dims[-1],
    )
