import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spfit.exceptions import InvalidMeshError
from spfit.mesh import (Mesh, graded_mesh, load_mesh, make_mesh, random_quasi_uniform_mesh,
                        require_valid, uniform_mesh, validate)


def test_uniform_examples():
    assert np.array_equal(uniform_mesh(4, 1.0).nodes, [0, 0.25, 0.5, 0.75, 1])
    assert np.array_equal(uniform_mesh(1, 2.0).nodes, [0, 2])
    assert np.allclose(uniform_mesh(10, 0.5).widths, 0.05, rtol=1e-13, atol=0)


def test_random_examples():
    assert np.array_equal(random_quasi_uniform_mesh(16, 1.0, 5, 0.0).nodes,
                          uniform_mesh(16, 1.0).nodes)
    m = random_quasi_uniform_mesh(8, 1.0, 42, 0.5)
    h = m.widths
    assert np.all(h >= 0.5 / 8 / 1.5) and np.all(h <= 1.5 / 8 / 0.5)
    assert abs(h.sum() - 1.0) <= 1e-12
    again = random_quasi_uniform_mesh(8, 1.0, 42, 0.5)
    assert m.nodes.tobytes() == again.nodes.tobytes()
    assert m.c_mesh == 3.0
    with pytest.raises(ValueError):
        random_quasi_uniform_mesh(8, 1.0, 0, 1.0)


def test_graded_examples():
    assert np.array_equal(graded_mesh(8, 1.0, 1.0).nodes, uniform_mesh(8).nodes)
    m = graded_mesh(4, 1.0, 2.0)
    assert m.widths.max() <= 0.5 and np.all(np.diff(m.widths) >= 0)
    m = graded_mesh(64, 1.0, 2.0)
    assert m.widths[0] < 1 / 64
    assert np.isclose(m.widths[-1], 2 / 64, rtol=1e-10)
    assert m.c_mesh == 2.0
    with pytest.raises(ValueError):
        graded_mesh(8, 1.0, 0.5)


def test_validate_examples():
    assert validate(uniform_mesh(4, 1.0)).passed
    r = validate(Mesh([0, 0.5, 0.4, 1]))
    assert not r.passed
    assert ("monotone", 2) in [(c, j) for c, j, _ in r.failures]
    assert "j=2" in r.message()
    r = validate(Mesh([0, 0.9, 1], c_mesh=1.0))
    assert [(c, j) for c, j, _ in r.failures] == [("width", 1)]
    assert "0.9" in r.message() and "0.5" in r.message()
    assert not validate(Mesh([0.1, 0.5, 1], c_mesh=5)).passed
    assert not validate(uniform_mesh(4, 1.0), T=2.0).passed
    with pytest.raises(InvalidMeshError):
        require_valid(Mesh([0, 0.5, 0.4, 1]))


def test_nodes_read_only():
    m = uniform_mesh(4)
    with pytest.raises(ValueError):
        m.nodes[1] = 0.3


def test_load_mesh(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# nodes\n0\n0.3\n\n0.7\n1\n")
    m = load_mesh(path, c_mesh=2.0)
    assert m.N == 3 and m.kind == "custom" and validate(m, 1.0).passed
    with pytest.raises(ValueError):
        make_mesh("hexagonal", 4)


@settings(max_examples=150, deadline=None)
@given(kind=st.sampled_from(["uniform", "random", "graded"]), N=st.integers(1, 3000),
       T=st.floats(1e-3, 1e3), seed=st.integers(0, 2 ** 32), spread=st.floats(0.0, 0.95),
       grading=st.floats(1.0, 20.0))
def test_generators_are_valid(kind, N, T, seed, spread, grading):
    m = make_mesh(kind, N, T, seed=seed, spread=spread, grading=grading)
    assert m.N == N and len(m.nodes) == N + 1
    assert validate(m, T).passed
    assert abs(m.widths.sum() - T) <= 1e-12 * T


@settings(max_examples=100, deadline=None)
@given(N=st.integers(2, 500), seed=st.integers(0, 2 ** 32), spread=st.floats(0.01, 0.9))
def test_random_mesh_seeding(N, seed, spread):
    a = random_quasi_uniform_mesh(N, 1.0, seed, spread)
    b = random_quasi_uniform_mesh(N, 1.0, seed, spread)
    c = random_quasi_uniform_mesh(N, 1.0, seed + 1, spread)
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert not np.array_equal(a.nodes, c.nodes)
