import pytest

from kgc.contexts import split_holdout
from kgc.kg import build_graph
from kgc.synthetic import make_synthetic_graph


@pytest.fixture(scope="session")
def synth_graph():
    return build_graph(make_synthetic_graph(seed=0))


@pytest.fixture(scope="session")
def synth_split(synth_graph):
    return split_holdout(synth_graph, 0.2, 0)
