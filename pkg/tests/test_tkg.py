import json

import numpy as np
import pytest

from ctpir import synthgen, tkg
from ctpir.errors import GraphLookupError, GraphValidationError, ParseError
from ctpir.tkg import Edge, EntityRef, GraphStats, Snapshot, TemporalKG


def _tiny_tkg(years=2):
    snaps = []
    entities = [
        EntityRef("p1", "publication"),
        EntityRef("a1", "attribute", "applicant"),
    ]
    edges = [Edge("p1", "appliedBy", "a1", 0)]
    for k in range(years):
        if k == 1:
            entities = entities + [EntityRef("p2", "publication")]
            edges = edges + [Edge("p2", "citedBy", "p1", 0)]
        feats = {e.id: np.zeros(4) for e in entities}
        snaps.append(Snapshot(2000 + k, list(entities), list(edges), feats))
    return TemporalKG(["citedBy", "relatedTo", "appliedBy", "belongTo"], snaps, 4)


def test_load_three_year_directory(tmp_path):
    cfg = synthgen.SynthConfig(num_publications=12, num_attributes_per_class=5,
                               years=3, seed=1, embedding_dim=6)
    tkg.save_snapshots(synthgen.generate(cfg), tmp_path)
    loaded = tkg.load_snapshots(tmp_path)
    assert len(loaded.snapshots) == 3
    years = loaded.years
    assert years == list(range(years[0], years[0] + 3))


def test_load_rejects_unknown_edge_endpoint(tmp_path):
    doc = {
        "year": 2000,
        "relations": ["citedBy"],
        "entities": [{"id": "p1", "kind": "publication", "attribute_class": None}],
        "edges": [{"src": "p1", "rel": "citedBy", "dst": "ghost", "pos": 0}],
        "features": {"p1": [0.0, 0.0]},
    }
    (tmp_path / "snapshot_2000.json").write_text(json.dumps(doc))
    with pytest.raises(GraphValidationError) as err:
        tkg.load_snapshots(tmp_path)
    assert "ghost" in str(err.value)


def test_load_parse_error_names_file(tmp_path):
    (tmp_path / "snapshot_2000.json").write_text("{not json")
    with pytest.raises(ParseError) as err:
        tkg.load_snapshots(tmp_path)
    assert "snapshot_2000.json" in str(err.value)


def test_round_trip_is_field_identical(tmp_path):
    cfg = synthgen.SynthConfig(num_publications=15, num_attributes_per_class=6,
                               years=3, seed=5, embedding_dim=5)
    src = tmp_path / "a"
    dst = tmp_path / "b"
    tkg.save_snapshots(synthgen.generate(cfg), src)
    first = tkg.load_snapshots(src)
    tkg.save_snapshots(first, dst)
    second = tkg.load_snapshots(dst)
    assert first.relations == second.relations
    assert first.embedding_dim == second.embedding_dim
    for s1, s2 in zip(first.snapshots, second.snapshots):
        assert s1.to_json_dict(first.relations) == s2.to_json_dict(second.relations)


def test_missing_features_filled_deterministically(tmp_path):
    doc = {
        "year": 2000,
        "relations": ["citedBy"],
        "entities": [
            {"id": "p1", "kind": "publication", "attribute_class": None},
            {"id": "p2", "kind": "publication", "attribute_class": None},
        ],
        "edges": [],
        "features": {"p1": [0.5, 0.5, 0.5]},
    }
    (tmp_path / "snapshot_2000.json").write_text(json.dumps(doc))
    one = tkg.load_snapshots(tmp_path, feature_seed=7)
    two = tkg.load_snapshots(tmp_path, feature_seed=7)
    filled = one.snapshots[0].features["p2"]
    assert filled.shape == (3,)
    assert np.all(np.abs(filled) <= 0.1)
    np.testing.assert_array_equal(filled, two.snapshots[0].features["p2"])


def test_validate_clean_graph():
    assert tkg.validate(_tiny_tkg()).ok


def test_validate_flags_lost_entity():
    g = _tiny_tkg()
    g.snapshots[1].entities = [e for e in g.snapshots[1].entities if e.id != "a1"]
    g.snapshots[1].__post_init__()
    g.snapshots[1].edges = [e for e in g.snapshots[1].edges if e.dst != "a1"]
    report = tkg.validate(g)
    assert any(v.code == "cumulative-entities" and "a1" in v.message
               for v in report.violations)


def test_validate_flags_duplicate_id():
    g = _tiny_tkg()
    g.snapshots[0].entities.append(EntityRef("p1", "publication"))
    report = tkg.validate(g)
    assert any(v.code == "duplicate-entity" for v in report.violations)


def test_validate_flags_position_gap():
    g = _tiny_tkg()
    for snap in g.snapshots:
        snap.edges.append(Edge("p1", "appliedBy", "a1", 2))  # skips pos 1
    report = tkg.validate(g)
    assert any(v.code == "edge-positions" for v in report.violations)


def test_stats_published_degree_convention():
    # reference degree rows used to pin the 2|R|/|E| convention
    cited = GraphStats("citedBy", num_entities=156684, num_edges=560958)
    assert abs(cited.avg_degree - 7.1603) < 5e-4
    belong = GraphStats("belongTo", num_entities=309520, num_edges=309451)
    assert abs(belong.avg_degree - 1.9995) < 5e-4


def test_stats_single_edge():
    g = _tiny_tkg()
    st = tkg.stats(g, "appliedBy", 2000)
    assert (st.num_entities, st.num_edges, st.avg_degree) == (2, 1, 1.0)


def test_stats_unknown_relation_and_year():
    g = _tiny_tkg()
    with pytest.raises(GraphLookupError):
        tkg.stats(g, "nope", 2000)
    with pytest.raises(GraphLookupError):
        tkg.stats(g, "citedBy", 1990)


def test_stats_matches_brute_force_degree_sum():
    cfg = synthgen.SynthConfig(num_publications=40, num_attributes_per_class=8,
                               years=3, seed=9, embedding_dim=4)
    g = synthgen.generate(cfg)
    for rel in g.relations:
        for year in g.years:
            st = tkg.stats(g, rel, year)
            degree = {}
            for e in g.snapshot_at(year).edges:
                if e.rel == rel:
                    degree[e.src] = degree.get(e.src, 0) + 1
                    degree[e.dst] = degree.get(e.dst, 0) + 1
            if degree:
                assert st.avg_degree == sum(degree.values()) / len(degree)
            else:
                assert st.avg_degree == 0.0


def test_neighbors_empty_and_sorted():
    snap = Snapshot(
        2000,
        [EntityRef("p", "publication")] + [
            EntityRef(f"a{i}", "attribute", "keyword") for i in range(3)
        ],
        [
            Edge("p", "relatedTo", "a2", 2),
            Edge("p", "relatedTo", "a0", 0),
            Edge("p", "relatedTo", "a1", 1),
        ],
        {},
    )
    assert tkg.neighbors(snap, "a0", "relatedTo") == []
    ordered = tkg.neighbors(snap, "p", "relatedTo")
    assert [e.id for e in ordered] == ["a0", "a1", "a2"]
    with pytest.raises(GraphLookupError):
        tkg.neighbors(snap, "ghost", "relatedTo")


def test_neighbors_matches_linear_scan_and_ignores_storage_order():
    rng = np.random.default_rng(21)
    cfg = synthgen.SynthConfig(num_publications=25, num_attributes_per_class=6,
                               years=3, seed=13, embedding_dim=4)
    g = synthgen.generate(cfg)
    snap = g.snapshots[-1]
    shuffled = Snapshot(snap.year, snap.entities,
                        [snap.edges[i] for i in rng.permutation(len(snap.edges))],
                        snap.features)
    for node in ["pub_00000", "pub_00003", "applicant_000"]:
        if not snap.has_entity(node):
            continue
        for rel in g.relations:
            expected = sorted(
                ((e.pos, e.dst) for e in snap.edges if e.src == node and e.rel == rel)
            )
            got = [e.id for e in tkg.neighbors(shuffled, node, rel)]
            assert got == [dst for _, dst in expected]
