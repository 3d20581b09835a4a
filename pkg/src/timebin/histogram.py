"""Two-time coincidence histograms and their single-axis projections.

The coincidence rate behind the two unbalanced interferometers is a
phase-weighted sum of time-shifted fourth-order correlators. On the
observation square [0, 3T]^2, split into one-bin blocks, only the shifted
terms whose pulled-back operator times land in an emission bin survive
(1/4/16 of them in corner/side/center blocks). Cells accumulate integrated
masses with the same cell rules the coherence integrals use — fully
upper/lower cells average their four corners, cells straddling a block's
ordering diagonal average three corners per half — so summing a block's
cells reproduces the peak table assembled from the ten coherence entries to
rounding when both use the same per-bin node count.

`build_histogram(source, settings=None, ...)` skips the interferometers
entirely and histograms the source's own coincidence rate (all operator
shifts zero, every block evaluated); with a PhaseSetting the supported-term
sum is used per block. Projections rebin cell masses by index sum
(t = t_B + t_X) or index difference (t_B - t_X); both conserve total mass
exactly because every cell lands in exactly one projection bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import AxisEvent, evaluate_axis_grid, order_axis_events
from .emitter import EmitterModel, ModelContext
from .interferometer import DelayTerm, PhaseSetting, expand_pair, term_support
from .linalg import DataError, NumericalError
from .tomography_pair import _default_threads
from .wavepacket import WavepacketMixture, WavepacketState

N_BINS = 3  # observed window [0, 3T] on each detection axis


@dataclass(frozen=True)
class TwoTimeHistogram:
    """Cell-averaged coincidence intensity over (t_B, t_X) in [0, 3T]^2.

    grid[i, j] is the mean intensity of the cell [i*r, (i+1)*r] x
    [j*r, (j+1)*r] (axis 0 = biexciton-channel detection time), so a cell's
    integrated mass is grid[i, j] * r^2.
    """

    grid: np.ndarray
    resolution: float
    bin_separation: float = 10.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if self.resolution <= 0.0 or self.bin_separation <= 0.0:
            raise DataError("resolution and bin separation must be positive")
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise DataError(f"histogram grid must be square, got {grid.shape}")
        if grid.shape[0] % N_BINS != 0:
            raise DataError(
                f"grid side {grid.shape[0]} does not split into {N_BINS} bins"
            )
        if grid.size and grid.min() < -1e-9:
            raise DataError(f"negative intensity {grid.min()} in histogram")

    @property
    def n_per_bin(self) -> int:
        return self.grid.shape[0] // N_BINS

    @property
    def axis(self) -> np.ndarray:
        """Cell-center times, shared by both axes."""
        n = self.grid.shape[0]
        return (np.arange(n) + 0.5) * self.resolution

    def total_mass(self) -> float:
        return float(self.grid.sum() * self.resolution**2)

    def block_sums(self) -> np.ndarray:
        """3x3 integrated masses over the one-bin blocks [k1*T, (k1+1)*T] x
        [k2*T, (k2+1)*T]; matches the assembled peak table."""
        m = self.n_per_bin
        r2 = self.resolution**2
        out = np.zeros((N_BINS, N_BINS))
        for k1 in range(N_BINS):
            for k2 in range(N_BINS):
                out[k1, k2] = (
                    self.grid[k1 * m:(k1 + 1) * m, k2 * m:(k2 + 1) * m].sum() * r2
                )
        return out


@dataclass(frozen=True)
class ProjectedHistogram:
    """Histogram mass rebinned onto a single time axis.

    axis holds bin-center times, intensities the mass per bin (bin width is
    the two-time grid resolution).
    """

    axis: np.ndarray
    intensities: np.ndarray
    resolution: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        vals = np.asarray(self.intensities, dtype=float)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "intensities", vals)
        if axis.shape != vals.shape or axis.ndim != 1:
            raise DataError("projection axis and intensities must match 1-d")

    def total_mass(self) -> float:
        return float(self.intensities.sum())

    def peak_indices(self, min_fraction: float = 0.05) -> list:
        """Indices of local maxima above min_fraction of the global max."""
        v = self.intensities
        if v.size < 3 or v.max() <= 0.0:
            return []
        floor = min_fraction * v.max()
        idx = []
        for i in range(1, v.size - 1):
            if v[i] >= v[i - 1] and v[i] > v[i + 1] and v[i] >= floor:
                idx.append(i)
        return idx

    def peak_times(self, min_fraction: float = 0.05) -> np.ndarray:
        return self.axis[self.peak_indices(min_fraction)]


# ---------------------------------------------------------------------------
# construction


def _bare_term() -> DelayTerm:
    return DelayTerm(1.0 + 0.0j, (0, 0, 0, 0))


def _block_terms(settings, window_b, window_x):
    if settings is None:
        return [_bare_term()]
    terms = expand_pair(settings)
    return [t for t in terms if term_support(t, (window_b, window_x))]


def _term_events(term: DelayTerm, k1: int, k2: int, T: float):
    """Axis events of one shifted term on block (k1, k2), local (u, v) axes."""
    s_bdag, s_xdag, s_x, s_b = term.shifts
    return [
        AxisEvent(axis=0, offset=(k1 - s_bdag) * T, side="right",
                  operator="B_dag", string_index=0),
        AxisEvent(axis=1, offset=(k2 - s_xdag) * T, side="right",
                  operator="X_dag", string_index=1),
        AxisEvent(axis=1, offset=(k2 - s_x) * T, side="left",
                  operator="X", string_index=2),
        AxisEvent(axis=0, offset=(k1 - s_b) * T, side="left",
                  operator="B", string_index=3),
    ]


def _cell_masses_split(upper: np.ndarray, lower: np.ndarray,
                       r: float) -> np.ndarray:
    """Per-cell masses from branch node values on an (m+1)x(m+1) grid.

    upper/lower hold the correlator computed with the frozen order valid
    above/below the block diagonal (each including its one-sided diagonal
    limit). Cells strictly on one side average the four corners of their
    branch; diagonal cells take three corners per half — the cell picture of
    the triangle weights the coherence integrals use.
    """
    u00, u10 = upper[:-1, :-1], upper[1:, :-1]
    u01, u11 = upper[:-1, 1:], upper[1:, 1:]
    l00, l10 = lower[:-1, :-1], lower[1:, :-1]
    l01, l11 = lower[:-1, 1:], lower[1:, 1:]
    above = 0.25 * (u00 + u10 + u01 + u11)
    below = 0.25 * (l00 + l10 + l01 + l11)
    diag = ((u00 + u01 + u11) / 3.0 + (l00 + l10 + l11) / 3.0) * 0.5
    m = above.shape[0]
    ci, cj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    cells = np.where(ci < cj, above, np.where(ci > cj, below, diag))
    return cells * r * r


def _cell_masses_full(values: np.ndarray, r: float) -> np.ndarray:
    """Four-corner cell masses for an integrand continuous on the block
    (the wavepacket route needs no ordering split)."""
    cells = 0.25 * (values[:-1, :-1] + values[1:, :-1]
                    + values[:-1, 1:] + values[1:, 1:])
    return cells * r * r


def _emitter_block(ctx, terms, k1, k2, T, nodes, masks, threads):
    upper = np.zeros((nodes.size, nodes.size), dtype=complex)
    lower = np.zeros_like(upper)
    mask_up, mask_lo = masks
    for term in terms:
        events = _term_events(term, k1, k2, T)
        ord_a = order_axis_events(events, 0.3 * T, 0.7 * T)
        ord_b = order_axis_events(events, 0.7 * T, 0.3 * T)
        upper += term.phase_factor * evaluate_axis_grid(
            ctx, ord_a, nodes, nodes, mask=mask_up, threads=threads)
        lower += term.phase_factor * evaluate_axis_grid(
            ctx, ord_b, nodes, nodes, mask=mask_lo, threads=threads)
    return upper, lower


def _wavepacket_block(state, terms, k1, k2, T, nodes):
    u, v = np.meshgrid(nodes, nodes, indexing="ij")
    total = np.zeros(u.shape, dtype=complex)
    for term in terms:
        s_bdag, s_xdag, s_x, s_b = term.shifts
        amp_cre = state.pair_amplitude(u + (k1 - s_bdag) * T,
                                       v + (k2 - s_xdag) * T)
        amp_ann = state.pair_amplitude(u + (k1 - s_b) * T,
                                       v + (k2 - s_x) * T)
        total += term.phase_factor * np.conj(amp_cre) * amp_ann
    return total


def build_histogram(source, settings=None, resolution=None, *,
                    grid_density: int = 600, threads=None,
                    bin_separation=None) -> TwoTimeHistogram:
    """Coincidence histogram of `source` on [0, 3T]^2.

    settings: PhaseSetting applies the interferometer pair (supported-term
    sum per block); None histograms the bare source coincidence rate.
    resolution must divide the bin separation (default T/60).
    """
    if bin_separation is not None:
        T = float(bin_separation)
    else:
        T = float(getattr(source, "bin_separation", 10.0))
    if T <= 0.0:
        raise DataError("bin separation must be positive")
    if resolution is None:
        resolution = T / 60.0
    r = float(resolution)
    if r <= 0.0:
        raise DataError("resolution must be positive")
    m_f = T / r
    m = int(round(m_f))
    if m < 1 or abs(m_f - m) > 1e-9 * max(1.0, m_f):
        raise DataError(
            f"resolution {r} does not divide the bin separation {T}"
        )

    eps = 1e-7 * T
    nodes = np.linspace(eps, T - eps, m + 1)
    windows = [(k * T, (k + 1) * T) for k in range(N_BINS)]
    n_side = N_BINS * m
    mass = np.zeros((n_side, n_side))

    is_emitter = isinstance(source, EmitterModel)
    if isinstance(source, WavepacketMixture):
        components = tuple(source.components)
    elif isinstance(source, WavepacketState):
        components = ((1.0, source),)
    elif is_emitter:
        components = ()
    else:
        raise DataError(
            f"cannot histogram source type {type(source).__name__}"
        )

    if is_emitter:
        ctx = ModelContext(source, dt_fine=T / grid_density)
        n_threads = _default_threads() if threads is None else max(1, int(threads))
        idx = np.arange(m + 1)
        mask_up = idx[:, None] <= idx[None, :]
        mask_lo = idx[:, None] >= idx[None, :]

    for k1 in range(N_BINS):
        for k2 in range(N_BINS):
            terms = _block_terms(settings, windows[k1], windows[k2])
            if not terms:
                continue
            if is_emitter:
                upper, lower = _emitter_block(
                    ctx, terms, k1, k2, T, nodes, (mask_up, mask_lo), n_threads)
                scale = max(np.abs(upper).max(), np.abs(lower).max(), 1e-300)
                worst = max(np.abs(upper.imag).max(), np.abs(lower.imag).max())
            else:
                total = np.zeros((m + 1, m + 1), dtype=complex)
                for weight, state in components:
                    total += weight * _wavepacket_block(
                        state, terms, k1, k2, T, nodes)
                scale = max(np.abs(total).max(), 1e-300)
                worst = np.abs(total.imag).max()
            if worst > 1e-8 * scale:
                raise NumericalError(
                    f"histogram block ({k1},{k2}) has imaginary intensity "
                    f"{worst} (scale {scale})"
                )
            # quadrature scale is the actual node spacing (the grid is pulled
            # off the window edges), so block sums match the coherence-integral
            # route to rounding at equal node count
            h = nodes[1] - nodes[0]
            if is_emitter:
                cells = _cell_masses_split(upper.real, lower.real, h)
            else:
                cells = _cell_masses_full(total.real, h)
            mass[k1 * m:(k1 + 1) * m, k2 * m:(k2 + 1) * m] = cells

    grid = mass / (r * r)
    grid[np.abs(grid) < 1e-300] = 0.0
    return TwoTimeHistogram(grid=grid, resolution=r, bin_separation=T)


# ---------------------------------------------------------------------------
# projections


def project_diagonal(h: TwoTimeHistogram) -> ProjectedHistogram:
    """Rebin cell masses by constant t_B + t_X (index sum).

    The middle projected peak then stacks the two-time center block together
    with the (0,2) and (2,0) corner blocks — the double counting that makes
    this projection misleading for |EL>/|LE> mixtures.
    """
    n = h.grid.shape[0]
    r2 = h.resolution**2
    masses = h.grid * r2
    out = np.zeros(2 * n - 1)
    for i in range(n):
        for j in range(n):
            out[i + j] += masses[i, j]
    axis = (np.arange(2 * n - 1) + 1.0) * h.resolution
    return ProjectedHistogram(axis=axis, intensities=out,
                              resolution=h.resolution)


def project_antidiagonal(h: TwoTimeHistogram) -> ProjectedHistogram:
    """Rebin cell masses by constant t_B - t_X (index difference)."""
    n = h.grid.shape[0]
    r2 = h.resolution**2
    masses = h.grid * r2
    out = np.zeros(2 * n - 1)
    for i in range(n):
        for j in range(n):
            out[i - j + n - 1] += masses[i, j]
    axis = (np.arange(2 * n - 1) - (n - 1)) * h.resolution
    return ProjectedHistogram(axis=axis, intensities=out,
                              resolution=h.resolution)
