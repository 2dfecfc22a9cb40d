import numpy as np
import pytest

from nmplab.model import build_graph_model, build_torus, build_zonal_sphere3, complete_graph, cycle_graph


@pytest.fixture(scope="session")
def torus3():
    return build_torus(3, 8, 1.0)


@pytest.fixture(scope="session")
def sphere64():
    return build_zonal_sphere3(64)


@pytest.fixture(scope="session")
def sphere256():
    return build_zonal_sphere3(256)


@pytest.fixture(scope="session")
def k4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def c8():
    return cycle_graph(8)


@pytest.fixture(scope="session")
def fleet(torus3, sphere64, k4, c8):
    return {"torus": torus3, "sphere": sphere64, "k4": k4, "c8": c8}


def random_connected_graph(N, seed, extra=None):
    """Random spanning tree plus extra random edges, random masses and conductances."""
    rng = np.random.default_rng(seed)
    edges = {}
    for v in range(1, N):
        edges[(int(rng.integers(v)), v)] = rng.uniform(0.2, 2.0)
    extra = N if extra is None else extra
    for _ in range(extra):
        a, b = sorted(rng.choice(N, 2, replace=False).tolist())
        edges[(a, b)] = rng.uniform(0.2, 2.0)
    masses = rng.uniform(0.5, 2.0, N)
    return build_graph_model(masses, [(a, b, c) for (a, b), c in edges.items()], 3, name=f"random:{N}:{seed}")
