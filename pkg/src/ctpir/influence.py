"""Publication influence from attribute feature histories.

Every relation type gets its own bidirectional LSTM encoder. An attribute's
yearly embedding sequence (from its first appearance up to the reference
year) runs through both directions; the two final hidden states are
concatenated and projected by a relation-specific linear layer, giving that
attribute's influence vector. A publication's influence is the weighted sum
of its attributes' vectors: a learned scalar per relation, with the
first-positioned attribute of each relation (for example the first
applicant) weighted by ``w_high`` and the rest by ``w_low``.

``position_weighting=False`` switches the per-attribute factor to the flat
(w_high + w_low) form, which ignores positions entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .embedding import EmbeddingTable
from .errors import ContractError, DimensionError

from .tkg import Snapshot


@dataclass
class LSTMCellParams:
    """Gate weights, each (input_dim + hidden_dim, hidden_dim) plus bias."""

    w_i: Tensor
    b_i: Tensor
    w_f: Tensor
    b_f: Tensor
    w_g: Tensor
    b_g: Tensor
    w_o: Tensor
    b_o: Tensor

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng) -> "LSTMCellParams":
        limit = 1.0 / math.sqrt(input_dim + hidden_dim)

        def w():
            return Tensor(
                rng.uniform(-limit, limit, size=(input_dim + hidden_dim, hidden_dim)),
                requires_grad=True,
            )

        def b(value=0.0):
            return Tensor(np.full(hidden_dim, value), requires_grad=True)

        # forget bias starts at 1 so early training does not wipe the cell state
        return cls(w(), b(), w(), b(1.0), w(), b(), w(), b())

    @property
    def hidden_dim(self) -> int:
        return self.w_i.shape[1]

    def parameters(self):
        return [self.w_i, self.b_i, self.w_f, self.b_f,
                self.w_g, self.b_g, self.w_o, self.b_o]


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, params: LSTMCellParams):
    """One step: gates from [x; h], then c' = f*c + i*g and h' = o*tanh(c').

    Accepts single vectors (d,) or batches (B, d); the batch dimension is
    carried through unchanged.
    """
    axis = x.ndim - 1
    if x.shape[axis] + h.shape[axis] != params.w_i.shape[0]:
        raise ContractError(
            f"input {x.shape} + hidden {h.shape} incompatible with gate weights {params.w_i.shape}"
        )
    z = ad.concat(x, h, axis=axis)
    gate_i = ad.sigmoid(ad.add(ad.matmul(z, params.w_i), params.b_i))
    gate_f = ad.sigmoid(ad.add(ad.matmul(z, params.w_f), params.b_f))
    gate_g = ad.tanh(ad.add(ad.matmul(z, params.w_g), params.b_g))
    gate_o = ad.sigmoid(ad.add(ad.matmul(z, params.w_o), params.b_o))
    c_next = ad.add(ad.mul(gate_f, c), ad.mul(gate_i, gate_g))
    h_next = ad.mul(gate_o, ad.tanh(c_next))
    return h_next, c_next


@dataclass
class RelationEncoderParams:
    """Bidirectional encoder for one relation type."""

    forward: LSTMCellParams
    backward: LSTMCellParams
    fc_w: Tensor  # (2 * hidden_dim, out_dim)
    fc_b: Tensor  # (out_dim,)

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, out_dim: int, rng) -> "RelationEncoderParams":
        limit = 1.0 / math.sqrt(2 * hidden_dim)
        return cls(
            forward=LSTMCellParams.init(input_dim, hidden_dim, rng),
            backward=LSTMCellParams.init(input_dim, hidden_dim, rng),
            fc_w=Tensor(rng.uniform(-limit, limit, size=(2 * hidden_dim, out_dim)),
                        requires_grad=True),
            fc_b=Tensor(np.zeros(out_dim), requires_grad=True),
        )

    def parameters(self):
        return self.forward.parameters() + self.backward.parameters() + [self.fc_w, self.fc_b]


def _run_direction(seq, params: LSTMCellParams) -> Tensor:
    first = seq[0]
    if first.ndim == 1:
        state_shape = (params.hidden_dim,)
    else:
        state_shape = (first.shape[0], params.hidden_dim)
    h = Tensor(np.zeros(state_shape))
    c = Tensor(np.zeros(state_shape))
    for x in seq:
        h, c = lstm_cell(x, h, c, params)
    return h


def bilstm_last_states(seq, params: RelationEncoderParams):
    """Final hidden states of the forward pass and of the reversed pass."""
    if not seq:
        raise ContractError("attribute history must be non-empty")
    return _run_direction(seq, params.forward), _run_direction(seq[::-1], params.backward)


def attribute_influence(seq, params: RelationEncoderParams) -> Tensor:
    """Influence vector of one attribute from its embedding history.

    ``seq`` lists the attribute's feature vectors year by year, oldest
    first, covering only years the attribute exists.
    """
    h_fwd, h_bwd = bilstm_last_states(seq, params)
    both = ad.concat(h_fwd, h_bwd, axis=h_fwd.ndim - 1)
    return ad.add(ad.matmul(both, params.fc_w), params.fc_b)


def encode_histories(table: EmbeddingTable, entity_ids, params: RelationEncoderParams,
                     t_year: int):
    """Batched influence vectors for many attributes of one relation.

    Entities are grouped by history length so each group runs the encoder
    as a single batch. Returns an (n, out_dim) tensor and id -> row map.
    """
    if not entity_ids:
        raise ContractError("entity_ids must be non-empty")
    groups = {}
    for eid in entity_ids:
        first = table.first_year[eid]
        if first > t_year:
            raise ContractError(f"{eid!r} does not exist yet in {t_year}")
        groups.setdefault(first, []).append(eid)

    pieces = []
    row_map = {}
    offset = 0
    for first in sorted(groups):
        members = groups[first]
        rows = np.array([table.row_index[e] for e in members], dtype=np.intp)
        seq = [ad.gather_rows(table.tensor(y), rows)
               for y in range(first, t_year + 1)]
        pieces.append(attribute_influence(seq, params))
        for i, eid in enumerate(members):
            row_map[eid] = offset + i
        offset += len(members)

    matrix = pieces[0]
    for piece in pieces[1:]:
        matrix = ad.concat(matrix, piece, axis=0)
    return matrix, row_map


@dataclass
class AggregationWeights:
    """Learned scalars combining attribute influences into one vector."""

    relations: list[str]
    w_rel: dict  # relation -> scalar Tensor
    w_high: Tensor
    w_low: Tensor
    position_weighting: bool = True

    @classmethod
    def init(cls, relations, position_weighting: bool = True) -> "AggregationWeights":
        return cls(
            relations=list(relations),
            w_rel={r: Tensor(1.0, requires_grad=True) for r in relations},
            w_high=Tensor(1.0, requires_grad=True),
            w_low=Tensor(1.0, requires_grad=True),
            position_weighting=position_weighting,
        )

    def parameters(self):
        return [self.w_rel[r] for r in self.relations] + [self.w_high, self.w_low]


@dataclass
class InfluenceVector:
    values: np.ndarray
    owner: str
    as_of_year: int
    cold: bool = False


def combine_attribute_influences(by_relation, weights: AggregationWeights) -> Tensor | None:
    """Differentiable weighted sum of per-attribute influence vectors.

    ``by_relation`` maps relation -> influence tensors ordered by edge
    position. Returns None when every relation list is empty.
    """
    total = None
    for rel in weights.relations:
        vecs = by_relation.get(rel, [])
        if not vecs:
            continue
        if weights.position_weighting:
            inner = ad.mul(weights.w_high, vecs[0])
            for v in vecs[1:]:
                inner = ad.add(inner, ad.mul(weights.w_low, v))
        else:
            flat = ad.add(weights.w_high, weights.w_low)
            inner = ad.mul(flat, vecs[0])
            for v in vecs[1:]:
                inner = ad.add(inner, ad.mul(flat, v))
        term = ad.mul(weights.w_rel[rel], inner)
        total = term if total is None else ad.add(total, term)
    return total


def publication_influence(publication_id: str, snapshot: Snapshot, by_relation,
                          weights: AggregationWeights, dim: int | None = None) -> InfluenceVector:
    """Aggregate a publication's attribute influences at the snapshot year.

    A publication with no attributes at all yields a zero vector flagged
    as cold rather than an error.
    """
    combined = combine_attribute_influences(by_relation, weights)
    if combined is None:
        if dim is None:
            raise DimensionError(
                f"{publication_id!r} has no attributes; pass dim to size the zero vector"
            )
        return InfluenceVector(np.zeros(dim), publication_id, snapshot.year, cold=True)
    return InfluenceVector(np.array(combined.data, copy=True), publication_id,
                           snapshot.year, cold=False)
