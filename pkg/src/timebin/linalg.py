"""Dense complex linear algebra and quadrature helpers.

Everything here operates on small dense matrices (Liouville space of a
three-level emitter is 9x9, two-qubit states are 4x4), so we lean on
numpy/scipy for the heavy lifting and keep thin validation wrappers with
uniform error types.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

# type aliases -- everything is a plain ndarray under the hood
ComplexMatrix = np.ndarray
ComplexVector = np.ndarray

MAX_EXP_DIM = 16  # Liouville space of a 4-dim Hilbert space
MAX_EIG_DIM = 4


class DimensionError(ValueError):
    """Shape mismatch or unsupported dimension."""


class DataError(ValueError):
    """Invalid values (non-physical state, bad ordering, bad config...)."""


class NumericalError(ArithmeticError):
    """NaN/Inf contamination or failed convergence."""


def as_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name}: expected a square matrix, got shape {a.shape}")
    return a


def _check_finite(a: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(a.view(float) if a.dtype == complex else a)):
        raise NumericalError(f"{where}: non-finite entries encountered")
    return a


def matrix_exp(a: ComplexMatrix, tol: float = 1e-12) -> ComplexMatrix:
    """e^A for a square matrix of dimension <= 16.

    `tol` is the requested relative accuracy; the scaling-and-squaring Pade
    core we defer to sits far below 1e-12 for matrices of this size, so the
    parameter only participates in validation.
    """
    a = as_square(a, "matrix_exp")
    if a.shape[0] > MAX_EXP_DIM:
        raise DimensionError(
            f"matrix_exp: dimension {a.shape[0]} exceeds supported maximum {MAX_EXP_DIM}"
        )
    if not (tol > 0):
        raise DataError("matrix_exp: tol must be positive")
    _check_finite(a, "matrix_exp input")
    return _check_finite(scipy.linalg.expm(a), "matrix_exp result")


def eig_values(a: ComplexMatrix, tol: float = 1e-9) -> np.ndarray:
    """All eigenvalues of a square matrix of dimension <= 4.

    For the spin-flipped products arising in concurrence the spectrum is
    real non-negative up to `tol`; callers rely on that postcondition.
    """
    a = as_square(a, "eig_values")
    if a.shape[0] > MAX_EIG_DIM:
        raise DimensionError(
            f"eig_values: dimension {a.shape[0]} exceeds supported maximum {MAX_EIG_DIM}"
        )
    if not (tol > 0):
        raise DataError("eig_values: tol must be positive")
    _check_finite(a, "eig_values input")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger at dim<=4
        raise NumericalError(f"eig_values: iteration failed to converge ({exc})") from exc
    return _check_finite(vals, "eig_values result")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with `n_steps` nodes including both endpoints."""

    t_start: float
    t_end: float
    n_steps: int
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.t_end > self.t_start):
            raise DataError(f"TimeGrid: t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.n_steps < 2:
            raise DataError(f"TimeGrid: n_steps must be >= 2, got {self.n_steps}")
        object.__setattr__(self, "times", np.linspace(self.t_start, self.t_end, self.n_steps))

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / (self.n_steps - 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        k = int(round((t - self.t_start) / self.spacing))
        if k < 0 or k >= self.n_steps or abs(self.times[k] - t) > tol:
            raise DataError(f"TimeGrid: time {t} is not a grid node")
        return k


def integrate(values, grid: TimeGrid) -> complex:
    """Trapezoidal quadrature of samples taken on `grid` (exact for linear)."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise DimensionError(f"integrate: expected a 1-d sample array, got shape {values.shape}")
    if values.shape[0] != grid.n_steps:
        raise DimensionError(
            f"integrate: {values.shape[0]} samples for a grid of {grid.n_steps} nodes"
        )
    return complex(np.trapezoid(values, dx=grid.spacing))


def hermitize(a: ComplexMatrix) -> ComplexMatrix:
    a = as_square(a, "hermitize")
    return 0.5 * (a + a.conj().T)


def frobenius_distance(a: ComplexMatrix, b: ComplexMatrix) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
