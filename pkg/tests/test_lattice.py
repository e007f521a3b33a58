import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dmsolitons.lattice import (GridFunction, SupportOverflowError, inner, laplacian_apply, norm_p, read_csv, rows,
                                shift, support, support_distance, write_csv)

from oracles import dense_laplacian

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def complex_field(dim=1, radius=4):
    side = 2 * radius + 1
    return st.tuples(arrays(float, (side,) * dim, elements=finite),
                     arrays(float, (side,) * dim, elements=finite)).map(lambda ri: GridFunction(ri[0] + 1j * ri[1]))


def interior(f: GridFunction) -> GridFunction:
    v = np.array(f.values)
    edge = np.zeros(v.shape, bool)
    for ax in range(v.ndim):
        idx = [slice(None)] * v.ndim
        for k in (0, -1):
            idx[ax] = k
            edge[tuple(idx)] = True
    v[edge] = 0
    return GridFunction(v)


# norms

@pytest.mark.parametrize("p", [1, 2, 3, 4, math.inf])
def test_norm_of_delta_is_one(p):
    assert norm_p(GridFunction.delta(1, 3), p) == 1.0


def test_norm_two_point_values():
    f = GridFunction.from_points(1, 2, {0: 1, 1: 1})
    assert norm_p(f, 2) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert norm_p(f, 4) == pytest.approx(2 ** 0.25, abs=1e-15)
    assert norm_p(f, 4) <= norm_p(f, 2)


@pytest.mark.parametrize("p", [1, 2, 7.5, math.inf])
def test_norm_of_zero(p):
    assert norm_p(GridFunction.zeros(2, 3), p) == 0.0


def test_norm_rejects_small_exponent():
    with pytest.raises(ValueError):
        norm_p(GridFunction.delta(1, 1), 0.5)


@given(complex_field(), st.floats(1, 8), st.floats(0, 8))
def test_lp_embedding(f, p, dq):
    assert norm_p(f, p + dq) <= norm_p(f, p) * (1 + 1e-13) + 1e-300


# inner product

def test_inner_examples():
    d0, d1 = GridFunction.delta(1, 2), GridFunction.delta(1, 2, 1)
    assert inner(d0, d0) == 1
    assert inner(d0, d1) == 0
    assert inner(d0 * 1j, d0) == -1j


@given(complex_field(), complex_field())
def test_inner_conjugate_symmetric_and_cauchy_schwarz(f, g):
    assert inner(g, f) == pytest.approx(np.conj(inner(f, g)), rel=1e-12, abs=1e-9)
    assert abs(inner(g, f)) <= norm_p(g, 2) * norm_p(f, 2) * (1 + 1e-12) + 1e-12


def test_inner_box_mismatch():
    with pytest.raises(ValueError):
        inner(GridFunction.delta(1, 2), GridFunction.delta(1, 3))


# Laplacian

def test_laplacian_of_delta():
    out = laplacian_apply(GridFunction.delta(1, 3))
    expect = GridFunction.from_points(1, 3, {-1: 1, 0: -2, 1: 1})
    assert np.array_equal(out.values, expect.values)


def test_laplacian_stencil_value():
    f = GridFunction(np.array([0, 1, 2, 1, 0], dtype=complex))
    assert laplacian_apply(f)[0] == -2


@pytest.mark.parametrize("dim,radius", [(1, 6), (2, 3), (3, 2)])
def test_laplacian_matches_dense_matrix(dim, radius, rng):
    v = rng.normal(size=(2 * radius + 1,) * dim) + 1j * rng.normal(size=(2 * radius + 1,) * dim)
    dense = dense_laplacian(dim, radius) @ v.ravel()
    assert np.allclose(laplacian_apply(GridFunction(v)).values.ravel(), dense, atol=1e-12)


@pytest.mark.parametrize("dim,radius", [(1, 60), (2, 12)])
def test_laplacian_norm_approaches_4d(dim, radius):
    w = np.linalg.eigvalsh(dense_laplacian(dim, radius))
    assert w.max() <= 0 and -w.min() <= 4 * dim
    assert -w.min() > 4 * dim * 0.99


@given(complex_field(dim=2, radius=3), complex_field(dim=2, radius=3))
def test_laplacian_symmetric_and_bounded(f, g):
    f, g = interior(f), interior(g)
    lhs = inner(g, laplacian_apply(f))
    rhs = inner(laplacian_apply(g), f)
    scale = 1 + norm_p(f, 2) * norm_p(g, 2)
    assert abs(lhs - rhs) <= 1e-12 * scale
    q = -inner(f, laplacian_apply(f)).real
    n2 = norm_p(f, 2) ** 2
    assert -1e-9 * (1 + n2) <= q <= 4 * 2 * n2 * (1 + 1e-12) + 1e-9


# shift, support

def test_shift_examples():
    assert np.array_equal(shift(GridFunction.delta(1, 4), 3).values, GridFunction.delta(1, 4, 3).values)
    f = GridFunction(np.arange(9, dtype=complex))
    assert shift(f, 0).values is not None and np.array_equal(shift(f, 0).values, f.values)


def test_shift_overflow():
    with pytest.raises(SupportOverflowError):
        shift(GridFunction.delta(1, 4, 3), 2)


@given(st.integers(-3, 3), st.integers(-3, 3), st.data())
def test_shift_preserves_norms(a, b, data):
    v = data.draw(arrays(float, (5, 5), elements=finite))
    f = GridFunction(np.pad(v, 4))
    g = shift(f, (a, b))
    for p in (1, 2, 3, math.inf):
        assert norm_p(g, p) == pytest.approx(norm_p(f, p), rel=1e-14, abs=1e-300)


def test_support_distance_examples():
    assert support_distance(GridFunction.delta(1, 6), GridFunction.delta(1, 6, 5)) == 5
    f = GridFunction.from_points(1, 3, {0: 1, 1: 1})
    assert support_distance(f, GridFunction.delta(1, 3, 1)) == 0
    assert support_distance(GridFunction.delta(2, 2), GridFunction.delta(2, 2, (1, 1))) == 2


def test_support_distance_empty():
    with pytest.raises(ValueError):
        support_distance(GridFunction.zeros(1, 2), GridFunction.delta(1, 2))


def test_relative_support_threshold():
    f = GridFunction.from_points(1, 3, {0: 1.0, 2: 1e-16})
    assert len(support(f)) == 2
    assert support(f, relative=True).tolist() == [[0]]


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(np.array([0, np.nan, 0]))
    f = GridFunction.delta(1, 1)
    with pytest.raises(ValueError):
        f.values[0] = 1


def test_csv_round_trip(tmp_path, rng):
    v = rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7))
    f = GridFunction(v)
    write_csv(f, tmp_path / "f.csv")
    g = read_csv(tmp_path / "f.csv")
    assert np.array_equal(f.values, g.values)
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header == "x_1,x_2,re,im"
    assert len(list(rows(f))) == 49
