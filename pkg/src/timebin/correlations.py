"""Multi-time correlation engine for the cascade emitter.

Implements the quantum regression recipe: events are sorted by time; at each
event time the operator is applied to the evolving matrix on its side (left
operators multiply from the left, right ones from the right), with Lindblad
propagation in between, and the trace at the end is the correlator value.

Equal-time ordering matters because the transition operators do not commute.
Two rules are used:

* `evaluate` (ad-hoc requests): among same-side same-time events the one
  closer to the density matrix in the written operator string applies first —
  left events in descending `string_index`, right events in ascending.
* the grid evaluators (`evaluate_axis_grid`): events arrive pre-ordered for
  the region being integrated and are applied in exactly that order, so
  boundary points inherit the ordering of the region's interior (this is what
  makes the "second photon first" branch vanish on the equal-time diagonal,
  via sigma_B sigma_X = 0).

Any event at a negative time short-circuits the whole correlator to exactly
zero: a detection window reaching before the experiment starts sees nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .emitter import (
    LEFT_SUPER,
    RIGHT_SUPER,
    TRACE_IDX,
    TRANSITION_OPS,
    EmitterModel,
    ModelContext,
    left_super,
    right_super,
)
from .linalg import DataError, NumericalError, TimeGrid
from .wavepacket import SinglePhotonState, analytic_correlator


@dataclass(frozen=True)
class CorrelationEvent:
    """One operator insertion: (time, operator, side, string_index).

    operator is a transition label ("B", "X", "B_dag", "X_dag") or an explicit
    3x3 matrix. string_index is the operator's position in the written
    correlator string, used only to break equal-time ties.
    """

    time: float
    operator: object
    side: str
    string_index: int = 0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise DataError(f"event side must be 'left' or 'right', got {self.side!r}")
        if isinstance(self.operator, str):
            if self.operator not in TRANSITION_OPS:
                raise DataError(f"unknown operator label {self.operator!r}")
        else:
            op = np.asarray(self.operator, dtype=complex)
            if op.shape != (3, 3):
                raise DataError("matrix operators must be 3x3")


@dataclass(frozen=True)
class CorrelationRequest:
    """A full correlator: the event list plus the time the initial state is
    prepared. Events must not precede initial_time (ordering error)."""

    events: tuple
    initial_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise DataError("a correlation request needs at least one event")
        for ev in self.events:
            if ev.time < self.initial_time - 1e-12:
                raise DataError(
                    f"event at t={ev.time} precedes initial_time={self.initial_time}"
                )


def _super_for(event: CorrelationEvent) -> np.ndarray:
    if isinstance(event.operator, str):
        table = LEFT_SUPER if event.side == "left" else RIGHT_SUPER
        return table[event.operator]
    op = np.asarray(event.operator, dtype=complex)
    return left_super(op) if event.side == "left" else right_super(op)


def _canonical_order(events):
    """Sort by time; ties: left before right, then closest-to-rho first."""

    def key(ev):
        tie = -ev.string_index if ev.side == "left" else ev.string_index
        return (ev.time, 0 if ev.side == "left" else 1, tie)

    return sorted(events, key=key)


def evaluate(
    request,
    model: EmitterModel,
    *,
    grid_density: int = 600,
    bin_width: float | None = None,
    context: ModelContext | None = None,
) -> complex:
    """Evaluate one multi-time correlator on an emitter model.

    Accepts a CorrelationRequest (events checked against initial_time at
    construction) or a bare event iterable, in which case events at negative
    times short-circuit the value to exactly 0 — a detection window reaching
    before the experiment starts sees nothing.
    """
    if isinstance(request, CorrelationRequest):
        events = request.events
        t_init = request.initial_time
    else:
        events = tuple(request)
        t_init = 0.0
        for ev in events:
            if ev.time < 0.0:
                return 0.0 + 0.0j
    if not events:
        raise DataError("no events to evaluate")
    for ev in events:
        if ev.time < t_init - 1e-12:
            raise DataError(f"event at t={ev.time} precedes initial_time={t_init}")
    ordered = _canonical_order(events)
    if context is None:
        ref = bin_width if bin_width is not None else max(ev.time for ev in ordered) or 1.0
        context = ModelContext(model, dt_fine=ref / grid_density)
    scale = _label_scale(model, ordered)
    if t_init != 0.0:
        from .emitter import vec

        v0 = vec(model.initial_density())
        return scale * _walk(context, ordered, start_time=t_init, start_vec=v0)
    return scale * _walk(context, ordered)


def _label_scale(model: EmitterModel, events) -> float:
    """Product of sqrt(channel rate) over label events (a = sqrt(rate) sigma).

    Explicit matrix operators are applied exactly as given.
    """
    scale = 1.0
    for ev in events:
        if isinstance(ev.operator, str):
            scale *= math.sqrt(model.label_rate(ev.operator))
    return scale


def _walk(ctx: ModelContext, ordered_events, start_time: float = 0.0,
          start_vec=None) -> complex:
    """Apply pre-ordered events with propagation between them; final trace.

    With the default start the cached trajectory from t=0 is reused; an
    explicit (start_time, start_vec) pins the initial state elsewhere.
    """
    t = ordered_events[0].time
    if start_vec is None:
        v = ctx.state_at(t).copy()
    else:
        v = ctx.advance(np.asarray(start_vec, dtype=complex).reshape(9, 1),
                        start_time, t).reshape(9)
    for ev in ordered_events:
        if ev.time < t - 1e-9:
            raise NumericalError(
                f"events not in application order: {ev.time} after {t}"
            )
        if ev.time > t:
            v = ctx.advance(v.reshape(9, 1), t, ev.time).reshape(9)
            t = ev.time
        v = _super_for(ev) @ v
    return complex(v[TRACE_IDX].sum())


# ---------------------------------------------------------------------------
# Two-axis grids: correlators whose event times are offsets of two sweep
# variables (t1, t2). Used for the pair-coherence integrals and histograms.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisEvent:
    """Event at time (t1 if axis == 0 else t2) + offset."""

    axis: int
    offset: float
    side: str
    operator: str
    string_index: int = 0

    def at(self, t1: float, t2: float) -> float:
        return (t1 if self.axis == 0 else t2) + self.offset


def order_axis_events(events, t1_rep: float, t2_rep: float):
    """Freeze the application order valid in the region containing the
    representative point (ties at the representative point: left/right pairs
    commute; same-side ties keep the written-string rule)."""

    def key(ev: AxisEvent):
        tie = -ev.string_index if ev.side == "left" else ev.string_index
        return (ev.at(t1_rep, t2_rep), 0 if ev.side == "left" else 1, tie)

    return tuple(sorted(events, key=key))


def evaluate_axis_grid(ctx: ModelContext, ordered_events, grid1, grid2,
                       mask=None, threads: int = 1) -> np.ndarray:
    """Correlator values on the (t1, t2) rectangle, applying events in the
    given (region-interior) order at every node. Nodes where any event time
    is negative give exactly 0; a boolean mask restricts which nodes are
    evaluated (others stay 0). Rows are independent, so threads > 1 spreads
    them over a pool; the output array is filled by row index either way."""
    grid1 = np.asarray(grid1, dtype=float)
    grid2 = np.asarray(grid2, dtype=float)
    supers = [_axis_super(ev) for ev in ordered_events]
    scale = _label_scale(ctx.model, ordered_events)
    out = np.zeros((grid1.size, grid2.size), dtype=complex)

    # Warm the trajectory cache serially in ascending time order: every walk
    # below then starts from an exact cache hit, which keeps results
    # independent of row execution order (and avoids repeated backtracking).
    first = ordered_events[0]
    starts = set()
    for i, t1 in enumerate(grid1):
        for j, t2 in enumerate(grid2):
            if mask is not None and not mask[i, j]:
                continue
            t0 = first.at(t1, t2)
            if t0 >= 0.0:
                starts.add(t0)
    for t0 in sorted(starts):
        ctx.state_at(t0)

    def fill_row(i):
        t1 = grid1[i]
        for j, t2 in enumerate(grid2):
            if mask is not None and not mask[i, j]:
                continue
            times = [ev.at(t1, t2) for ev in ordered_events]
            if any(tt < 0.0 for tt in times):
                continue
            t = times[0]
            v = ctx.state_at(t).copy()
            for s, tt in zip(supers, times):
                if tt < t - 1e-9:
                    raise NumericalError(
                        "axis events out of order at "
                        f"(t1={t1}, t2={t2}): {tt} after {t}"
                    )
                if tt > t:
                    v = ctx.advance(v.reshape(9, 1), t, tt).reshape(9)
                    t = tt
                v = s @ v
            out[i, j] = scale * v[TRACE_IDX].sum()

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for done in pool.map(fill_row, range(grid1.size)):
                pass  # propagate exceptions in row order
    else:
        for i in range(grid1.size):
            fill_row(i)
    return out


def _axis_super(ev: AxisEvent) -> np.ndarray:
    table = LEFT_SUPER if ev.side == "left" else RIGHT_SUPER
    return table[ev.operator]


def triangle_weights(n_nodes: int, h: float) -> np.ndarray:
    """Node weights W[i, j] for the closed triangle t1 <= t2 on an (n x n)
    uniform node grid, assembled cell by cell: a cell fully above the
    diagonal spreads h^2 over its four corners, a diagonal cell's upper half
    spreads h^2/2 over its three upper corners. Summing the same node values
    against these weights therefore equals summing per-cell masses, which a
    histogram built on the identical grid decomposes into — the two agree to
    rounding, not just to quadrature order. Exact for functions linear on
    each cell; O(h^2) overall. The transpose is the matching lower-triangle
    rule, and W + W.T covers the full square."""
    n = n_nodes
    weights = np.zeros((n, n))
    quarter = 0.25 * h * h
    sixth = h * h / 6.0
    for ci in range(n - 1):
        for cj in range(ci, n - 1):
            if ci < cj:
                weights[ci, cj] += quarter
                weights[ci + 1, cj] += quarter
                weights[ci, cj + 1] += quarter
                weights[ci + 1, cj + 1] += quarter
            else:
                weights[ci, ci] += sixth
                weights[ci, ci + 1] += sixth
                weights[ci + 1, ci + 1] += sixth
    return weights


def rect_weights(n1: int, h1: float, n2: int, h2: float) -> np.ndarray:
    w1 = np.full(n1, h1)
    w1[0] = w1[-1] = 0.5 * h1
    w2 = np.full(n2, h2)
    w2[0] = w2[-1] = 0.5 * h2
    return np.outer(w1, w2)


# ---------------------------------------------------------------------------
# First-order coherence on a time grid.
# ---------------------------------------------------------------------------


def g1_grid(
    source,
    window,
    shift: float = 0.0,
    conjugate_shift: float = 0.0,
    *,
    points_per_bin: int = 60,
    grid_density: int = 600,
    context: ModelContext | None = None,
    bin_width: float | None = None,
) -> np.ndarray:
    """<a^dag(t - conjugate_shift) a(t - shift)> sampled on the window.

    window is a TimeGrid (values are returned at its nodes), an explicit
    ascending array of sample times, or a (lo, hi) pair, which gets
    points_per_bin sampling. The source is either an EmitterModel (the
    photon channel is the X transition) or a SinglePhotonState. Nodes where
    any operator time is negative give exactly 0.
    """
    if isinstance(window, TimeGrid):
        times = window.times
        lo, hi = window.t_start, window.t_end
    elif isinstance(window, np.ndarray):
        times = window
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise DataError("sample times must be ascending")
        lo, hi = float(times[0]), float(times[-1])
    else:
        lo, hi = window
        if hi <= lo:
            raise DataError("window must have positive length")
        times = np.linspace(lo, hi, points_per_bin + 1)

    if isinstance(source, SinglePhotonState):
        amp_ann = source.amplitude_at(times - shift)
        amp_cre = source.amplitude_at(times - conjugate_shift)
        return np.conj(amp_cre) * amp_ann

    if not isinstance(source, EmitterModel):
        raise DataError(f"g1_grid cannot use source type {type(source).__name__}")

    if context is None:
        ref = bin_width if bin_width is not None else (hi - lo)
        context = ModelContext(source, dt_fine=ref / grid_density)
    values = np.zeros(times.size, dtype=complex)
    for k, t in enumerate(times):
        t_ann, t_cre = t - shift, t - conjugate_shift
        if t_ann < 0.0 or t_cre < 0.0:
            continue
        # written string a^dag(t - cs) a(t - s): creator index 0, annihilator 1
        events = _canonical_order(
            [
                CorrelationEvent(t_cre, "X_dag", "right", 0),
                CorrelationEvent(t_ann, "X", "left", 1),
            ]
        )
        values[k] = _walk(context, events)
    return source.gamma_x * values
