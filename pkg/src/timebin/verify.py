"""On-demand consistency suite: cheap cross-checks of the whole pipeline.

Each check pits two independent routes to the same number against each
other (regression engine vs closed-system brute force, assembled peak
table vs the closed-form cell expressions, projections vs their source
histogram, ...).  They run in seconds and catch the classic silent
breakages: a flipped sign in the delay-term table, a wrong conjugation,
a normalization drift.  `run_checks` returns structured results; the
command-line `verify` subcommand prints one line per check and exits
nonzero if any fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlations import CorrelationEvent, evaluate
from .emitter import EmitterModel
from .histogram import build_histogram, project_antidiagonal, project_diagonal
from .interferometer import PhaseSetting, expand_pair, expand_single, term_support
from .oracles import heisenberg_correlator
from .tomography_pair import (
    DensityMatrix2Q,
    GbarEntries,
    center_peak,
    compute_gbar,
    concurrence,
    peak_table_from_entries,
    reconstruct_pair,
    rho_from_stokes,
    side_peak,
    stokes_pair,
)
from .tomography_single import (
    integrate_peaks,
    reconstruct_from_peaks,
    rho_from_stokes_single,
    stokes_single,
    visibility,
)
from .wavepacket import SinglePhotonState, WavepacketState


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float  # the measured deviation / figure of merit
    threshold: float
    detail: str = ""

    def as_record(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


def _random_hermitian(rng, scale=1.0) -> np.ndarray:
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return scale * 0.5 * (a + a.conj().T)


def _random_density(rng) -> np.ndarray:
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _random_density4(rng) -> np.ndarray:
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def check_oracle_equivalence(n_instances: int = 100, seed: int = 0,
                             tol: float = 1e-8) -> CheckResult:
    """Engine vs Heisenberg brute force on random closed-system instances.

    Dissipation-free means the emission labels carry zero rate, so the
    random correlator strings use explicit matrix insertions (the labels
    would all be scaled to zero — correctly: nothing decays, nothing is
    emitted).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        model = EmitterModel(
            hamiltonian_static=_random_hermitian(rng),
            collapse_channels=(),
            initial_state=_random_density(rng),
        )
        n_ops = int(rng.integers(1, 5))
        events = []
        for idx in range(n_ops):
            op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            events.append(
                CorrelationEvent(
                    time=float(rng.uniform(0.0, 3.0)),
                    operator=op,
                    side="left" if rng.uniform() < 0.5 else "right",
                    string_index=idx,
                )
            )
        got = evaluate(events, model, grid_density=40)
        want = heisenberg_correlator(model, events)
        worst = max(worst, abs(got - want))
    return CheckResult(
        name="oracle_equivalence",
        passed=worst < tol,
        value=worst,
        threshold=tol,
        detail=f"max |engine - closed-system| over {n_instances} random instances",
    )


def check_support_counts() -> CheckResult:
    """1/4/16 delay terms survive on corner/side/center windows."""
    T = 10.0
    windows = [(k * T, (k + 1) * T) for k in range(3)]
    pair_counts = np.zeros((3, 3), dtype=int)
    terms = expand_pair(PhaseSetting(0.4, -1.1))
    for k1 in range(3):
        for k2 in range(3):
            pair_counts[k1, k2] = sum(
                term_support(t, (windows[k1], windows[k2])) for t in terms
            )
    expected = np.array([[1, 4, 1], [4, 16, 4], [1, 4, 1]])
    single_counts = [
        sum(term_support(t, (w,)) for t in expand_single(0.7)) for w in windows
    ]
    ok = bool(np.array_equal(pair_counts, expected) and single_counts == [1, 4, 1])
    return CheckResult(
        name="support_counts",
        passed=ok,
        value=float(np.abs(pair_counts - expected).max()),
        threshold=0.0,
        detail=f"pair windows {pair_counts.tolist()}, single windows {single_counts}",
    )


def check_peak_formulas(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Delay-term assembly vs the closed-form peak-cell expressions.

    The assembled table sums phase-weighted window integrals term by term;
    the cell formulas are direct sums over the density-matrix entries.  A
    sign or conjugation slip in the term table breaks this equality for a
    generic state.
    """
    rng = np.random.default_rng(seed)
    rho = _random_density4(rng)
    basis = ("EE", "EL", "LE", "LL")
    entries = {}
    for i, r in enumerate(basis):
        for j in range(i + 1):
            entries[(r, basis[j])] = complex(rho[i, j])
    gbar = GbarEntries(entries)  # trace 1, so the table is already normalized
    worst = 0.0
    for setting in (PhaseSetting(0.0, 0.0), PhaseSetting(0.9, -2.1), PhaseSetting(-0.4, 0.4)):
        table = peak_table_from_entries(gbar, setting)
        # side cells carry POVM weight 2 relative to the projector formula
        # (two delay paths land in a middle window, one in a corner)
        want = np.array(
            [
                [rho[0, 0].real, 2 * side_peak(rho, setting.phi_x, "EM"), rho[1, 1].real],
                [
                    2 * side_peak(rho, setting.phi_b, "ME"),
                    center_peak(rho, setting.phi_b, setting.phi_x),
                    2 * side_peak(rho, setting.phi_b, "ML"),
                ],
                [rho[2, 2].real, 2 * side_peak(rho, setting.phi_x, "LM"), rho[3, 3].real],
            ]
        )
        worst = max(worst, float(np.abs(table - want).max()))
    return CheckResult(
        name="peak_formula_consistency",
        passed=worst < tol,
        value=worst,
        threshold=tol,
        detail="assembled 3x3 peak table vs closed-form cells, random state",
    )


def check_projection_mass(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Both histogram projections conserve the total event mass exactly."""
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    amps /= np.linalg.norm(amps)
    state = WavepacketState(tuple(amps))
    h = build_histogram(state, PhaseSetting(0.3, 1.2), resolution=0.5)
    total = h.total_mass()
    dev = max(
        abs(project_diagonal(h).total_mass() - total),
        abs(project_antidiagonal(h).total_mass() - total),
    )
    rel = dev / max(total, 1e-300)
    return CheckResult(
        name="projection_mass_conservation",
        passed=rel < tol,
        value=rel,
        threshold=tol,
        detail="relative mass defect of the diagonal/anti-diagonal rebinnings",
    )


def check_stokes_round_trip(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """rho -> measurement-combination table -> rho is the identity."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        rho = DensityMatrix2Q(_random_density4(rng))
        back = rho_from_stokes(stokes_pair(rho))
        worst = max(worst, float(np.abs(back.entries - rho.entries).max()))
    return CheckResult(
        name="stokes_round_trip",
        passed=worst < tol,
        value=worst,
        threshold=tol,
        detail="pair density matrix through the 16-parameter table and back",
    )


def check_single_visibility(tol: float = 1e-3) -> CheckResult:
    """Even single-photon superposition: unit fringe visibility."""
    s = 1.0 / math.sqrt(2.0)
    state = SinglePhotonState((s, s))
    peaks = integrate_peaks(state)
    v = visibility(peaks)
    rho = reconstruct_from_peaks(peaks)
    dev = max(abs(v - 1.0), abs(2.0 * abs(rho.coherence) - 1.0))
    return CheckResult(
        name="single_ideal_visibility",
        passed=dev < tol,
        value=dev,
        threshold=tol,
        detail=f"V = {v!r}, |coherence| = {abs(rho.coherence)!r}",
    )


def check_bell_concurrence(tol: float = 1e-2) -> CheckResult:
    """Even pair superposition reconstructs to a unit-concurrence state."""
    s = 1.0 / math.sqrt(2.0)
    state = WavepacketState((s, 0.0, 0.0, s))
    rho = reconstruct_pair(compute_gbar(state))
    c = concurrence(rho)
    return CheckResult(
        name="bell_pair_concurrence",
        passed=abs(c - 1.0) < tol,
        value=abs(c - 1.0),
        threshold=tol,
        detail=f"concurrence = {c!r}",
    )


def check_stokes_single_round_trip(seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        from .tomography_single import DensityMatrix1Q

        dm = DensityMatrix1Q(rho)
        back = rho_from_stokes_single(dm.stokes())
        worst = max(worst, float(np.abs(back.entries - dm.entries).max()))
    return CheckResult(
        name="stokes_single_round_trip",
        passed=worst < tol,
        value=worst,
        threshold=tol,
        detail="single-photon density matrix through the 4-parameter vector and back",
    )


def run_checks(seed: int = 0, n_oracle: int = 100) -> list:
    """Run every consistency check; order is fixed (stable report lines)."""
    return [
        check_oracle_equivalence(n_instances=n_oracle, seed=seed),
        check_support_counts(),
        check_peak_formulas(seed=seed),
        check_projection_mass(seed=seed),
        check_stokes_round_trip(seed=seed),
        check_stokes_single_round_trip(seed=seed),
        check_single_visibility(),
        check_bell_concurrence(),
    ]
