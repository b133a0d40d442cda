import pytest

from kgc.kg import build_graph
from kgc.synthetic import make_synthetic_graph


def test_sizes():
    ts = make_synthetic_graph(200, 20, 1000, seed=0)
    g = build_graph(ts)
    assert len(ts) == len(g) == 1000
    assert g.n_entities == 200 and g.n_relations == 20


def test_deterministic():
    assert make_synthetic_graph(seed=3) == make_synthetic_graph(seed=3)
    assert make_synthetic_graph(seed=3) != make_synthetic_graph(seed=4)


def test_community_structure():
    ts = make_synthetic_graph(200, 20, 1000, n_communities=40, p_intra=1.0, seed=0)
    assert all(int(t.head[1:]) % 40 == int(t.tail[1:]) % 40 for t in ts)
    assert all(t.head != t.tail for t in ts)


def test_relation_skew():
    ts = make_synthetic_graph(seed=0)
    counts = sorted((sum(t.relation == r for t in ts) for r in {t.relation for t in ts}), reverse=True)
    assert counts[0] > len(ts) / 2


@pytest.mark.parametrize("kw", [{"n_entities": 1}, {"n_triples": 10}, {"n_entities": 3, "n_relations": 1, "n_triples": 7}])
def test_invalid(kw):
    with pytest.raises(ValueError):
        make_synthetic_graph(**kw)
