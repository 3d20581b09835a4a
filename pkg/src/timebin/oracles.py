"""Brute-force Heisenberg-picture oracle for dissipation-free dynamics.

For a closed system, every multi-time correlator reduces to a single trace

    Tr[ rho0 * (right ops, application order) * (left ops, reverse order) ]

with each operator taken at its Heisenberg time O_H(t) = U(t)^dag O U(t),
U(t) = exp(-i H t). This is an independent check of the regression engine:
no vectorization, no piecewise propagation, just matrix exponentials.
"""
from __future__ import annotations

import numpy as np

from .emitter import TRANSITION_OPS, EmitterModel
from .linalg import DataError, matrix_exp


def _static_h(model: EmitterModel) -> np.ndarray:
    if not model.dissipation_free():
        raise DataError("the Heisenberg oracle only handles dissipation-free models")
    if model.pulses:
        raise DataError("the Heisenberg oracle only handles static Hamiltonians")
    return model.hamiltonian(0.0)


def heisenberg_correlator(model: EmitterModel, events) -> complex:
    """Evaluate a correlation request on a closed system by brute force.

    Events follow the engine's conventions, including the equal-time
    tie-break (left descending string_index, right ascending) and the
    negative-time short-circuit to zero.
    """
    events = tuple(events)
    if not events:
        raise DataError("no events")
    for ev in events:
        if ev.time < 0.0:
            return 0.0 + 0.0j
    h = _static_h(model)
    rho0 = model.initial_density()

    def heis(ev):
        op = TRANSITION_OPS[ev.operator] if isinstance(ev.operator, str) else np.asarray(
            ev.operator, dtype=complex
        )
        u = matrix_exp(-1j * h * ev.time)
        return u.conj().T @ op @ u

    def key(ev):
        tie = -ev.string_index if ev.side == "left" else ev.string_index
        return (ev.time, 0 if ev.side == "left" else 1, tie)

    ordered = sorted(events, key=key)
    rights = [heis(ev) for ev in ordered if ev.side == "right"]
    lefts = [heis(ev) for ev in ordered if ev.side == "left"]

    prod = rho0
    for op in rights:  # application order: earliest right op closest to rho
        prod = prod @ op
    for op in reversed(lefts):  # latest left op applied last -> outermost
        prod = prod @ op
    return complex(np.trace(prod))
