"""Core math: matrix exponential against an independent Taylor oracle,
grids, quadrature, and the small validation wrappers."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin import DataError, DimensionError, NumericalError, TimeGrid
from timebin.linalg import (
    eig_values,
    frobenius_distance,
    hermitize,
    integrate,
    matrix_exp,
)


def taylor_expm(a, terms=30):
    """Scaling-and-squaring Taylor series; independent of scipy's Pade core."""
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, ord=np.inf)
    squarings = max(0, int(math.ceil(math.log2(max(norm, 1e-30)))) + 1)
    b = a / (2.0 ** squarings)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ b / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def test_matrix_exp_identity():
    assert np.allclose(matrix_exp(np.zeros((4, 4))), np.eye(4), atol=1e-15)


def test_matrix_exp_matches_taylor_oracle(rng):
    for dim in (1, 2, 3, 4, 9):
        for _ in range(5):
            a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            got = matrix_exp(a)
            want = taylor_expm(a)
            assert np.max(np.abs(got - want)) < 1e-10 * max(1.0, np.max(np.abs(want)))


def test_matrix_exp_inverse_property(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    prod = matrix_exp(a) @ matrix_exp(-a)
    assert np.max(np.abs(prod - np.eye(5))) < 1e-10


def test_matrix_exp_rejects_bad_input():
    with pytest.raises(DimensionError):
        matrix_exp(np.zeros((17, 17)))
    with pytest.raises(DimensionError):
        matrix_exp(np.zeros((2, 3)))
    with pytest.raises(NumericalError):
        matrix_exp(np.array([[np.nan, 0.0], [0.0, 0.0]]))
    with pytest.raises(DataError):
        matrix_exp(np.eye(2), tol=0.0)


def test_eig_values_known_spectrum():
    vals = sorted(eig_values(np.array([[2.0, 1.0], [0.0, 3.0]])).real)
    assert np.allclose(vals, [2.0, 3.0], atol=1e-12)


def test_eig_values_dimension_cap():
    with pytest.raises(DimensionError):
        eig_values(np.eye(5))


def test_time_grid_nodes_and_lookup():
    grid = TimeGrid(0.0, 10.0, 11)
    assert grid.spacing == 1.0
    assert grid.times[0] == 0.0 and grid.times[-1] == 10.0
    assert grid.index_of(4.0) == 4
    with pytest.raises(DataError):
        grid.index_of(4.5)
    with pytest.raises(DataError):
        TimeGrid(1.0, 1.0, 5)
    with pytest.raises(DataError):
        TimeGrid(0.0, 1.0, 1)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
    n=st.integers(2, 50),
)
def test_integrate_exact_for_linear(a, b, n):
    # trapezoid rule integrates a + b t exactly on any uniform grid
    grid = TimeGrid(0.0, 3.0, n)
    vals = a + b * grid.times
    want = a * 3.0 + b * 4.5
    assert abs(integrate(vals, grid) - want) < 1e-10 * max(1.0, abs(want))


def test_integrate_rejects_mismatch():
    grid = TimeGrid(0.0, 1.0, 4)
    with pytest.raises(DimensionError):
        integrate(np.zeros(5), grid)
    with pytest.raises(DimensionError):
        integrate(np.zeros((4, 1)), grid)


def test_hermitize_and_distance(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = hermitize(a)
    assert np.max(np.abs(h - h.conj().T)) < 1e-14
    assert np.max(np.abs(hermitize(h) - h)) < 1e-14
    b = rng.normal(size=(4, 4))
    assert frobenius_distance(a, b) == pytest.approx(frobenius_distance(b, a))
    assert frobenius_distance(a, a) == 0.0
