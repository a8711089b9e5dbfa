"""End-to-end model: training loop, prediction, subtask evaluation.

The pipeline per batch of target publications:

  snapshots (years 1..T) -> temporal R-GCN embeddings
                         -> per-attribute history encoders -> influence M
                         -> four curve-parameter heads -> predicted series
                         -> mean absolute log1p error against observed counts

Graph embeddings are recomputed once per epoch and shared by that epoch's
minibatches; minibatch gradients flow through the shared embedding graph
into every weight tier. Runs are deterministic given (seed, config, data).

Ablation variants swap one component:
  no_diff      temporal carry terms removed (plain per-year R-GCN)
  no_influence influence module replaced by the mean of the publication's
               attributes' final-year embeddings
  lognormal    Richards curve replaced by a log-normal CDF curve
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import trajectory as tj
from .autodiff import Tensor
from .embedding import EmbeddingTable, RGCNWeights, embed_sequence
from .errors import ContractError, DimensionError, GraphLookupError, NumericError
from .influence import (
    AggregationWeights,
    LSTMCellParams,
    RelationEncoderParams,
    encode_histories,
)
from .synthgen import CITED_BY, ground_truth
from .tkg import TemporalKG
from .trajectory import CitationSeries, ParamHeads, heads_forward

ABLATIONS = ("none", "no_diff", "no_influence", "lognormal")
OPTIMIZERS = ("sgd", "adam")
SUBTASKS = ("mix", "newborn", "grown")

# citation-count bounds at the cutoff year; a dataset profile can override
DEFAULT_THRESHOLDS = {"newborn": 5, "grown": 12}


@dataclass
class HyperParams:
    batch_size: int = 512
    learning_rate: float = 0.05
    epochs: int = 20
    optimizer: str = "sgd"
    seed: int = 0
    embed_years: int = 10  # T: leading snapshots used for embedding
    horizon: int = 10  # N: years predicted past the cutoff
    ablation: str = "none"

    def __post_init__(self):
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.epochs < 0:
            raise ContractError("batch_size/learning_rate must be positive, epochs >= 0")
        if self.embed_years <= 0 or self.horizon <= 0:
            raise ContractError("embed_years and horizon must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"optimizer must be one of {OPTIMIZERS}")
        if self.ablation not in ABLATIONS:
            raise ContractError(f"ablation must be one of {ABLATIONS}")

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "HyperParams":
        return cls(**doc)


@dataclass
class ModelConfig:
    relations: list[str]
    feature_dim: int = 128
    hidden_dim: int = 64
    embed_dim: int = 128
    lstm_hidden: int = 128
    head_hidden: tuple = (64, 32)
    activation: str = "relu"
    normalize: bool = True
    position_weighting: bool = True

    @property
    def layer_dims(self) -> tuple:
        return (self.feature_dim, self.hidden_dim, self.embed_dim)

    @property
    def influence_dim(self) -> int:
        # the attribute-mean ablation feeds embeddings straight into the
        # heads, so the encoder output must share the embedding width
        return self.embed_dim

    def to_json_dict(self) -> dict:
        doc = dict(self.__dict__)
        doc["head_hidden"] = list(self.head_hidden)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        doc["head_hidden"] = tuple(doc["head_hidden"])
        return cls(**doc)


@dataclass
class SubtaskSpec:
    """Cohort filter on cumulative citations at the cutoff year.

    newborn keeps counts strictly below the threshold, grown strictly
    above it, mix keeps everything.
    """

    name: str
    threshold: int | None = None

    def __post_init__(self):
        if self.name not in SUBTASKS:
            raise ContractError(f"subtask must be one of {SUBTASKS}")
        if self.name == "mix":
            self.threshold = None
        elif self.threshold is None:
            self.threshold = DEFAULT_THRESHOLDS[self.name]

    def selects(self, count: float) -> bool:
        if self.name == "mix":
            return True
        if self.name == "newborn":
            return count < self.threshold
        return count > self.threshold


@dataclass
class EvalResult:
    male: float | None
    rmsle: float | None
    n_selected: int

    def to_json_dict(self) -> dict:
        return {"male": self.male, "rmsle": self.rmsle, "n_selected": self.n_selected}


# ---------------------------------------------------------------------------
# model container


@dataclass
class Model:
    config: ModelConfig
    hyperparams: HyperParams
    rgcn: RGCNWeights
    encoders: dict  # relation -> RelationEncoderParams
    aggregation: AggregationWeights
    heads: ParamHeads
    history: list = field(default_factory=list)  # per-epoch {"male", "rmsle"}

    @classmethod
    def init(cls, config: ModelConfig, hp: HyperParams) -> "Model":
        root = np.random.SeedSequence(hp.seed)
        rgcn_seed, enc_seed, head_seed = root.spawn(3)
        rgcn = RGCNWeights.init(
            config.relations,
            layer_dims=config.layer_dims,
            seed=rgcn_seed,
            activation=config.activation,
            normalize=config.normalize,
        )
        enc_rng = np.random.default_rng(enc_seed)
        encoders = {
            rel: RelationEncoderParams.init(
                config.embed_dim, config.lstm_hidden, config.influence_dim, enc_rng
            )
            for rel in config.relations
        }
        aggregation = AggregationWeights.init(
            config.relations, position_weighting=config.position_weighting
        )
        heads = ParamHeads.init(config.influence_dim, hidden=config.head_hidden,
                                seed=head_seed)
        return cls(config, hp, rgcn, encoders, aggregation, heads)

    def parameters(self):
        out = list(self.rgcn.parameters())
        for rel in self.config.relations:
            out.extend(self.encoders[rel].parameters())
        out.extend(self.aggregation.parameters())
        out.extend(self.heads.parameters())
        return out

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        def arr(t: Tensor):
            return t.data.tolist()

        def cell(p: LSTMCellParams):
            return {k: arr(getattr(p, k)) for k in
                    ("w_i", "b_i", "w_f", "b_f", "w_g", "b_g", "w_o", "b_o")}

        return {
            "config": self.config.to_json_dict(),
            "hyperparams": self.hyperparams.to_json_dict(),
            "rgcn": [
                {
                    "w_self": arr(lw.w_self),
                    "w_rel": {r: arr(lw.w_rel[r]) for r in self.config.relations},
                    "w_time": arr(lw.w_time),
                }
                for lw in self.rgcn.layers
            ],
            "encoders": {
                rel: {
                    "forward": cell(enc.forward),
                    "backward": cell(enc.backward),
                    "fc_w": arr(enc.fc_w),
                    "fc_b": arr(enc.fc_b),
                }
                for rel, enc in self.encoders.items()
            },
            "aggregation": {
                "w_rel": {r: float(self.aggregation.w_rel[r].data) for r in self.config.relations},
                "w_high": float(self.aggregation.w_high.data),
                "w_low": float(self.aggregation.w_low.data),
            },
            "heads": {
                name: [[arr(w), arr(b)] for w, b in getattr(self.heads, name).layers]
                for name in ("theta1", "theta2", "theta3", "xi")
            },
            "history": self.history,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Model":
        config = ModelConfig.from_json_dict(doc["config"])
        hp = HyperParams.from_json_dict(doc["hyperparams"])
        model = cls.init(config, hp)

        def load_into(t: Tensor, values):
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != t.data.shape:
                raise DimensionError(f"stored shape {arr.shape} != expected {t.data.shape}")
            t.data[...] = arr

        for lw, stored in zip(model.rgcn.layers, doc["rgcn"]):
            load_into(lw.w_self, stored["w_self"])
            load_into(lw.w_time, stored["w_time"])
            for r in config.relations:
                load_into(lw.w_rel[r], stored["w_rel"][r])
        for rel, stored in doc["encoders"].items():
            enc = model.encoders[rel]
            for direction in ("forward", "backward"):
                p = getattr(enc, direction)
                for k, values in stored[direction].items():
                    load_into(getattr(p, k), values)
            load_into(enc.fc_w, stored["fc_w"])
            load_into(enc.fc_b, stored["fc_b"])
        agg = doc["aggregation"]
        for r in config.relations:
            model.aggregation.w_rel[r].data[()] = agg["w_rel"][r]
        model.aggregation.w_high.data[()] = agg["w_high"]
        model.aggregation.w_low.data[()] = agg["w_low"]
        for name in ("theta1", "theta2", "theta3", "xi"):
            for (w, b), (sw, sb) in zip(getattr(model.heads, name).layers,
                                        doc["heads"][name]):
                load_into(w, sw)
                load_into(b, sb)
        model.history = list(doc.get("history", []))
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# optimizers


class SGD:
    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad

    def zero_grad(self):
        ad.zero_grads(self.params)


class Adam:
    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * p.grad
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * p.grad * p.grad
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        ad.zero_grads(self.params)


def _make_optimizer(hp: HyperParams, params):
    if hp.optimizer == "adam":
        return Adam(params, hp.learning_rate)
    return SGD(params, hp.learning_rate)


# ---------------------------------------------------------------------------
# shared forward machinery


def _out_edge_index(snapshot) -> dict:
    """src id -> relation -> target ids ordered by edge position."""
    raw = {}
    for e in snapshot.edges:
        raw.setdefault(e.src, {}).setdefault(e.rel, []).append((e.pos, e.dst))
    return {
        src: {rel: [dst for _, dst in sorted(pairs)] for rel, pairs in rels.items()}
        for src, rels in raw.items()
    }


def _citation_counts(snapshot, pubs) -> np.ndarray:
    wanted = {p: i for i, p in enumerate(pubs)}
    counts = np.zeros(len(pubs))
    for e in snapshot.edges:
        if e.rel == CITED_BY and e.dst in wanted:
            counts[wanted[e.dst]] += 1
    return counts


def _observed_matrix(tkg: TemporalKG, pubs, cutoff: int, horizon: int) -> np.ndarray:
    """Cumulative citedBy in-degrees, one row per publication, one column
    per year cutoff+1 .. cutoff+horizon."""
    years = tkg.years
    missing = [cutoff + k for k in range(1, horizon + 1) if cutoff + k not in years]
    if missing:
        raise ContractError(f"observed series needs snapshots for years {missing}")
    obs = np.zeros((len(pubs), horizon))
    for k in range(1, horizon + 1):
        obs[:, k - 1] = _citation_counts(tkg.snapshot_at(cutoff + k), pubs)
    return obs


def _influence_matrix(model: Model, table: EmbeddingTable, snapshot, pubs) -> Tensor:
    """Batched influence vectors, one row per publication in ``pubs``."""
    out_edges = _out_edge_index(snapshot)
    n = len(pubs)
    cutoff = snapshot.year

    if model.hyperparams.ablation == "no_influence":
        # plain mean of the publication's attributes' final-year embeddings
        take, put, weights = [], [], []
        for i, pub in enumerate(pubs):
            attrs = [a for rel in model.config.relations
                     for a in out_edges.get(pub, {}).get(rel, [])]
            for a in attrs:
                take.append(table.row_index[a])
                put.append(i)
                weights.append(1.0 / len(attrs))
        if not take:
            return Tensor(np.zeros((n, model.config.influence_dim)))
        return ad.scatter_sum(table.tensor(cutoff), take, put, n, weights=weights)

    agg = model.aggregation
    total = None
    for rel in model.config.relations:
        per_pub = [out_edges.get(pub, {}).get(rel, []) for pub in pubs]
        unique = sorted({a for attrs in per_pub for a in attrs})
        if not unique:
            continue
        enc_matrix, rows = encode_histories(table, unique, model.encoders[rel], cutoff)

        first_take, first_put, rest_take, rest_put = [], [], [], []
        for i, attrs in enumerate(per_pub):
            for k, a in enumerate(attrs):
                if k == 0:
                    first_take.append(rows[a])
                    first_put.append(i)
                else:
                    rest_take.append(rows[a])
                    rest_put.append(i)

        s_first = ad.scatter_sum(enc_matrix, first_take, first_put, n)
        s_rest = (
            ad.scatter_sum(enc_matrix, rest_take, rest_put, n) if rest_take else None
        )
        if agg.position_weighting:
            inner = ad.mul(agg.w_high, s_first)
            if s_rest is not None:
                inner = ad.add(inner, ad.mul(agg.w_low, s_rest))
        else:
            flat = ad.add(agg.w_high, agg.w_low)
            both = s_first if s_rest is None else ad.add(s_first, s_rest)
            inner = ad.mul(flat, both)
        term = ad.mul(agg.w_rel[rel], inner)
        total = term if total is None else ad.add(total, term)

    if total is None:
        return Tensor(np.zeros((n, model.config.influence_dim)))
    return total


def _prediction_columns(model: Model, m_matrix: Tensor, horizon: int):
    """Per-year predicted counts as (B,) tensors for t = 1..horizon."""
    t1, t2, t3, xi = heads_forward(m_matrix, model.heads)
    if model.hyperparams.ablation == "lognormal":
        # reuse three heads: ceiling, unconstrained center, positive spread
        return [tj.lognormal_tensor(t1, t3, xi, t=float(k))
                for k in range(1, horizon + 1)]
    return [tj.richards_tensor(t1, t2, t3, xi, t=float(k))
            for k in range(1, horizon + 1)]


def _check_pubs_exist(snapshot, pubs):
    missing = [p for p in pubs if not snapshot.has_entity(p)]
    if missing:
        raise GraphLookupError(
            f"publications not present at year {snapshot.year}: {missing[:5]}"
        )


def _resolve_cutoff(tkg: TemporalKG, embed_years: int, horizon: int) -> int:
    years = tkg.years
    if embed_years > len(years):
        raise ContractError(f"embed_years {embed_years} exceeds {len(years)} snapshots")
    if embed_years + horizon > len(years):
        raise ContractError(
            f"embed_years + horizon = {embed_years + horizon} exceeds {len(years)} snapshots"
        )
    return years[embed_years - 1]


# ---------------------------------------------------------------------------
# training


def train(tkg: TemporalKG, targets, hp: HyperParams, config: ModelConfig | None = None,
          initial_model: Model | None = None, freeze=()) -> Model:
    """Fit the full pipeline on the target publications by minibatch descent.

    ``targets`` are publication ids alive at the cutoff year whose observed
    series cover the horizon. The mean absolute log1p error is minimized;
    ``history`` records per-epoch batch-averaged MALE and RMSLE. ``freeze``
    lists tensors excluded from updates. Divergence raises NumericError
    naming the epoch.
    """
    targets = list(targets)
    if not targets:
        raise ContractError("train requires at least one target publication")
    if config is None:
        config = ModelConfig(relations=list(tkg.relations), feature_dim=tkg.embedding_dim)
    if config.feature_dim != tkg.embedding_dim:
        raise DimensionError(
            f"config.feature_dim {config.feature_dim} != graph feature dim {tkg.embedding_dim}"
        )

    cutoff = _resolve_cutoff(tkg, hp.embed_years, hp.horizon)
    snapshot = tkg.snapshot_at(cutoff)
    _check_pubs_exist(snapshot, targets)
    observed = _observed_matrix(tkg, targets, cutoff, hp.horizon)

    model = initial_model if initial_model is not None else Model.init(config, hp)
    frozen = {id(t) for t in freeze}
    params = [p for p in model.parameters() if id(p) not in frozen]
    optimizer = _make_optimizer(hp, params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([hp.seed, 1]))

    embed_view = tkg.up_to_year(cutoff)
    temporal = hp.ablation != "no_diff"

    for epoch in range(hp.epochs):
        try:
            table = embed_sequence(embed_view, model.rgcn, temporal=temporal)
            order = shuffle_rng.permutation(len(targets))
            batch_male, batch_rmsle, batch_sizes = [], [], []
            for start in range(0, len(targets), hp.batch_size):
                chunk = order[start:start + hp.batch_size]
                pubs = [targets[i] for i in chunk]
                m_matrix = _influence_matrix(model, table, snapshot, pubs)
                cols = _prediction_columns(model, m_matrix, hp.horizon)
                obs = observed[chunk]
                loss = tj.male_loss(cols, obs)

                optimizer.zero_grad()
                ad.backward(loss)
                optimizer.step()

                pred = np.stack([c.data for c in cols], axis=1)
                batch_male.append(loss.item())
                batch_rmsle.append(tj.rmsle(pred, obs))
                batch_sizes.append(len(pubs))
        except NumericError as err:
            raise NumericError(f"training diverged at epoch {epoch}: {err}") from err

        sizes = np.asarray(batch_sizes, dtype=np.float64)
        model.history.append({
            "male": float(np.average(batch_male, weights=sizes)),
            "rmsle": float(np.average(batch_rmsle, weights=sizes)),
        })

    return model


def train_test_split(ids, seed: int, train_fraction: float = 2 / 3):
    """Seeded shuffle split; the first fraction becomes the training set."""
    ids = list(ids)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    order = rng.permutation(len(ids))
    cut = int(round(len(ids) * train_fraction))
    return [ids[i] for i in order[:cut]], [ids[i] for i in order[cut:]]


def train_multi_seed(tkg: TemporalKG, targets, hp: HyperParams,
                     config: ModelConfig | None = None, attempts: int = 1):
    """Train with seeds hp.seed .. hp.seed+attempts-1; best final MALE wins.

    Returns (best_model, [per-seed {"seed", "male", "rmsle"}]).
    """
    if attempts < 1:
        raise ContractError("attempts must be >= 1")
    best = None
    results = []
    for k in range(attempts):
        hp_k = HyperParams.from_json_dict({**hp.to_json_dict(), "seed": hp.seed + k})
        model = train(tkg, targets, hp_k, config)
        final = model.history[-1] if model.history else {"male": None, "rmsle": None}
        results.append({"seed": hp_k.seed, **final})
        if best is None or (
            final["male"] is not None and final["male"] < best[0]
        ):
            best = (final["male"] if final["male"] is not None else np.inf, model)
    return best[1], results


# ---------------------------------------------------------------------------
# inference and evaluation


def predict(model: Model, tkg: TemporalKG, ids, embed_years: int | None = None,
            horizon: int | None = None) -> dict:
    """Predicted citation series per publication id.

    Influence is computed in one batch (rows are independent), then each
    publication's curve is evaluated with the exact scalar curve path.
    """
    ids = list(ids)
    if not ids:
        return {}
    t_years = embed_years if embed_years is not None else model.hyperparams.embed_years
    n_years = horizon if horizon is not None else model.hyperparams.horizon
    years = tkg.years
    if t_years > len(years):
        raise ContractError(f"embed_years {t_years} exceeds {len(years)} snapshots")
    cutoff = years[t_years - 1]
    snapshot = tkg.snapshot_at(cutoff)
    _check_pubs_exist(snapshot, ids)

    embed_view = tkg.up_to_year(cutoff)
    table = embed_sequence(embed_view, model.rgcn,
                           temporal=model.hyperparams.ablation != "no_diff")
    m_matrix = _influence_matrix(model, table, snapshot, ids)
    t1, t2, t3, xi = heads_forward(m_matrix, model.heads)

    # softplus outputs can underflow to exactly 0.0 for extreme head values;
    # keep the strict-positivity contract with a denormal-scale floor
    tiny = 1e-300
    out = {}
    for i, pub in enumerate(ids):
        if model.hyperparams.ablation == "lognormal":
            series = tj.lognormal_trajectory(
                (max(float(t1.data[i]), tiny), float(t3.data[i]),
                 max(float(xi.data[i]), tj.XI_FLOOR)),
                cutoff, n_years,
            )
        else:
            params = tj.TrajectoryParams(
                theta1=max(float(t1.data[i]), tiny),
                theta2=max(float(t2.data[i]), tiny),
                theta3=float(t3.data[i]), xi=float(xi.data[i]),
            )
            series = tj.trajectory(params, cutoff, n_years)
        out[pub] = series
    return out


def citations_at(tkg: TemporalKG, publication_id: str, year: int) -> int:
    """Cumulative citedBy in-degree of the publication at the given year."""
    snap = tkg.snapshot_at(year)
    if not snap.has_entity(publication_id):
        raise GraphLookupError(f"unknown publication {publication_id!r} at year {year}")
    return int(_citation_counts(snap, [publication_id])[0])


def evaluate(model: Model, tkg: TemporalKG, ids, task: SubtaskSpec,
             embed_years: int | None = None, horizon: int | None = None) -> EvalResult:
    """Filter ids by the subtask's citation bound at the cutoff year, then
    score predictions against observed series."""
    ids = list(ids)
    t_years = embed_years if embed_years is not None else model.hyperparams.embed_years
    n_years = horizon if horizon is not None else model.hyperparams.horizon
    cutoff = _resolve_cutoff(tkg, t_years, n_years)
    snapshot = tkg.snapshot_at(cutoff)
    _check_pubs_exist(snapshot, ids)

    counts = _citation_counts(snapshot, ids)
    selected = [pub for pub, c in zip(ids, counts) if task.selects(c)]
    if not selected:
        return EvalResult(None, None, 0)

    series = predict(model, tkg, selected, t_years, n_years)
    pred = np.stack([series[p].values for p in selected])
    obs = _observed_matrix(tkg, selected, cutoff, n_years)
    return EvalResult(tj.male(pred, obs), tj.rmsle(pred, obs), len(selected))


def time_distance_eval(model: Model, tkg: TemporalKG, ids,
                       embed_years: int | None = None,
                       n_max: int | None = None) -> list:
    """Per-year metrics: entry k scores only predictions for year cutoff+k+1."""
    ids = list(ids)
    if not ids:
        raise ContractError("time_distance_eval requires publication ids")
    t_years = embed_years if embed_years is not None else model.hyperparams.embed_years
    n_years = n_max if n_max is not None else model.hyperparams.horizon
    cutoff = _resolve_cutoff(tkg, t_years, n_years)

    series = predict(model, tkg, ids, t_years, n_years)
    pred = np.stack([series[p].values for p in ids])
    obs = _observed_matrix(tkg, ids, cutoff, n_years)
    return [
        {
            "year_distance": k + 1,
            "male": tj.male(pred[:, [k]], obs[:, [k]]),
            "rmsle": tj.rmsle(pred[:, [k]], obs[:, [k]]),
        }
        for k in range(n_years)
    ]


# ---------------------------------------------------------------------------
# exports


def write_history_csv(model: Model, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "male", "rmsle"])
        for i, entry in enumerate(model.history):
            writer.writerow([i, entry["male"], entry["rmsle"]])


def write_prediction_csv(path, predictions: dict, observed: dict | None = None) -> None:
    """CSV rows: year, publication_id, predicted, observed (blank if unknown)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "publication_id", "predicted", "observed"])
        for pub in predictions:
            series = predictions[pub]
            obs = observed.get(pub) if observed else None
            for i, year in enumerate(series.years()):
                writer.writerow([
                    year, pub, repr(float(series.values[i])),
                    repr(float(obs.values[i])) if obs is not None else "",
                ])
