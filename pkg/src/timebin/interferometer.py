"""Unbalanced-interferometer measurement model as a formal delay expansion.

The analyzer maps each detected field onto a superposition of the bare field
and a one-bin delayed copy carrying the interferometer phase,

    a(t)  ->  a(t) + exp(i phi) a(t - T).

Substituting this into a normally ordered correlator turns one physical
correlator into a sum of shifted copies of the source correlator.  Each
summand is a DelayTerm: a unit-modulus phase factor plus, per operator, the
number of bin steps (0 or 1) by which that operator's time argument is pulled
back.  Phases enter through the annihilators; daggered operators contribute
the conjugate phase, so the net factor of a term is

    exp(i phi_channel * (shift_annihilator - shift_creation))

per channel.  A single-channel intensity expands into 4 terms, a two-channel
coincidence into 16.

Peak windows select which terms survive: an operator delayed by s bins only
contributes inside window k (covering [kT, (k+1)T)) when the pulled-back time
still lands in an emission bin, i.e. k - s in {0, 1}.  That leaves exactly
one term in a corner window, four on a side window, and all sixteen in the
center window of the coincidence map.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

from .linalg import DataError

# Operator order conventions for the `shifts` tuples (slots are positional):
#   single channel:  (creation, annihilator)
#   pair:            (B_dag, X_dag, X, B)  -- normally ordered string
SINGLE_SLOTS = ("cre", "ann")
PAIR_SLOTS = ("B_dag", "X_dag", "X", "B")


@dataclass(frozen=True)
class PhaseSetting:
    """Analyzer phases for a measurement run.

    For single-photon runs only phi_x is used (the X channel carries the
    photon); pair runs use both.
    """

    phi_b: float = 0.0
    phi_x: float = 0.0


@dataclass(frozen=True)
class DelayTerm:
    """One summand of the delay expansion.

    shifts[i] is the number of bin steps operator slot i is pulled back;
    phase_factor is the accumulated interferometer phase of this term.
    """

    phase_factor: complex
    shifts: tuple

    def __post_init__(self):
        if len(self.shifts) not in (2, 4):
            raise DataError(f"shifts must have 2 (single) or 4 (pair) slots, got {len(self.shifts)}")
        if any(s not in (0, 1) for s in self.shifts):
            raise DataError(f"per-operator shifts must be 0 or 1 bin steps, got {self.shifts}")
        if abs(abs(self.phase_factor) - 1.0) > 1e-12:
            raise DataError(f"phase factor must be unit modulus, got {self.phase_factor}")

    @property
    def n_slots(self) -> int:
        return len(self.shifts)


def _phase(phi: float, s_ann: int, s_cre: int) -> complex:
    """exp(i phi (s_ann - s_cre)) without spurious roundoff for the trivial case."""
    k = s_ann - s_cre
    if k == 0:
        return 1.0 + 0.0j
    return cmath.exp(1j * phi * k)


def expand_single(phi: float) -> list:
    """Four-term expansion of <a_out^dag(t) a_out(t)>.

    Slot order (cre, ann).  Term order: unshifted, shifted creation, shifted
    annihilator, both shifted.  The cross terms carry exp(-i phi) and
    exp(+i phi); the diagonal ones are phase free.
    """
    return [
        DelayTerm(1.0 + 0.0j, (0, 0)),
        DelayTerm(_phase(phi, 0, 1), (1, 0)),
        DelayTerm(_phase(phi, 1, 0), (0, 1)),
        DelayTerm(1.0 + 0.0j, (1, 1)),
    ]


# Frozen enumeration order for the 16 coincidence terms, as tuples
# (s_Bdag, s_Xdag, s_X, s_B).  The order groups terms by their net phase,
# from exp(+i(phi_B + phi_X)) down to exp(-i(phi_B + phi_X)); the tenth term
# is the all-shifted one and is phase free.
_PAIR_SHIFT_TABLE = (
    (0, 0, 1, 1),
    (0, 0, 0, 1),
    (0, 1, 1, 1),
    (0, 1, 0, 1),
    (0, 0, 1, 0),
    (1, 0, 1, 1),
    (0, 0, 0, 0),
    (0, 1, 1, 0),
    (1, 0, 0, 1),
    (1, 1, 1, 1),
    (0, 1, 0, 0),
    (1, 1, 0, 1),
    (1, 0, 1, 0),
    (1, 0, 0, 0),
    (1, 1, 1, 0),
    (1, 1, 0, 0),
)


def expand_pair(setting: PhaseSetting) -> list:
    """Sixteen-term expansion of the normally ordered coincidence correlator.

    Slot order (B_dag, X_dag, X, B).  Each channel contributes
    exp(i phi (s_ann - s_cre)) with its own phase and shifts.
    """
    terms = []
    for s_bdag, s_xdag, s_x, s_b in _PAIR_SHIFT_TABLE:
        factor = _phase(setting.phi_b, s_b, s_bdag) * _phase(setting.phi_x, s_x, s_xdag)
        terms.append(DelayTerm(factor, (s_bdag, s_xdag, s_x, s_b)))
    return terms


# Which shifts tuple slot rides on which detection-time axis.  The B-side
# operators follow the first detection time, the X-side ones the second; a
# single-channel term has both slots on its one axis.
_PAIR_SLOT_AXIS = (0, 1, 1, 0)


def _window_index(lo: float, hi: float) -> int:
    """Map a window (lo, hi) of width T to its bin index k, validating shape."""
    width = hi - lo
    if width <= 0.0:
        raise DataError(f"window ({lo}, {hi}) must have positive width")
    k = lo / width
    k_int = round(k)
    if abs(k - k_int) > 1e-9 or k_int not in (0, 1, 2):
        raise DataError(
            f"window ({lo}, {hi}) must start on a bin boundary within the first three bins"
        )
    return k_int


def term_support(term: DelayTerm, window) -> bool:
    """Does `term` contribute to detection times inside `window`?

    `window` is a tuple of (lo, hi) ranges, one per detection-time axis
    (one for a single-channel term, two for a coincidence term).  Each range
    must span exactly one bin width starting on a bin boundary.  A term
    survives when every operator's pulled-back time still lies in an
    emission bin: k_axis - shift in {0, 1}.
    """
    ranges = tuple(window)
    if ranges and not hasattr(ranges[0], "__len__"):
        ranges = (ranges,)  # single (lo, hi) pair for a single-channel term
    if term.n_slots == 2:
        if len(ranges) != 1:
            raise DataError("single-channel terms take one window range")
        ks = (_window_index(*ranges[0]),)
        axes = (0, 0)
    else:
        if len(ranges) != 2:
            raise DataError("coincidence terms take two window ranges")
        ks = (_window_index(*ranges[0]), _window_index(*ranges[1]))
        axes = _PAIR_SLOT_AXIS
    for shift, axis in zip(term.shifts, axes):
        if ks[axis] - shift not in (0, 1):
            return False
    return True


def supported_terms(terms, window) -> list:
    """Filter an expansion down to the terms that survive in `window`."""
    return [t for t in terms if term_support(t, window)]
