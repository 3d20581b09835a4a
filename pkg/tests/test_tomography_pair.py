"""Pair tomography: window integrals, reconstruction, fringes, concurrence."""
import math

import numpy as np
import pytest

from conftest import random_density, random_pure_amplitudes
from timebin import (
    DataError,
    DensityMatrix2Q,
    GbarEntries,
    NumericalError,
    PhaseSetting,
    WavepacketState,
    center_scan,
    center_visibility,
    compute_gbar,
    concurrence,
    concurrence_approx,
    fidelity,
    fit_center_scan,
    peak_table_from_entries,
    reconstruct_pair,
    two_pulse_pair,
)
from timebin.tomography_pair import (
    BASIS,
    ENTRY_KEYS,
    rho_from_stokes,
    stokes_pair,
    two_pulse_pair as _tpp,  # noqa: F401  (import parity with public name)
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
T = 10.0


def _entries_from_density(rho):
    """Lower-triangle GbarEntries mirroring a normalized 4x4 matrix."""
    entries = {}
    for i, r in enumerate(BASIS):
        for j in range(i + 1):
            entries[(r, BASIS[j])] = rho[i, j]
    return GbarEntries(entries, bin_separation=T)


# ---------------------------------------------------------------------------
# GbarEntries bookkeeping


def test_gbar_entries_conjugate_lookup(rng):
    rho = random_density(rng, 4)
    g = _entries_from_density(rho)
    # the upper triangle is derived by conjugation
    assert g.value("EE", "LL") == pytest.approx(np.conj(rho[3, 0]))
    assert np.allclose(g.matrix(), rho, atol=1e-14)
    assert g.trace() == pytest.approx(1.0)


def test_gbar_entries_validation():
    with pytest.raises(DataError):
        GbarEntries({("EE", "EE"): 1.0})  # missing the other nine
    rho = np.eye(4) / 4.0
    entries = {}
    for i, r in enumerate(BASIS):
        for j in range(i + 1):
            entries[(r, BASIS[j])] = rho[i, j]
    entries[("EE", "EE")] = 0.25 + 0.2j  # complex diagonal
    with pytest.raises(DataError):
        GbarEntries(entries)
    with pytest.raises(DataError):
        GbarEntries({("ZZ", "EE"): 1.0})
    g = _entries_from_density(np.eye(4) / 4.0)
    with pytest.raises(DataError):
        g.value("EE", "XY")


# ---------------------------------------------------------------------------
# ideal Bell pair through the full pipeline


def test_bell_pair_reconstruction(bell_state):
    rho = reconstruct_pair(compute_gbar(bell_state))
    assert rho.entry("EE", "EE").real == pytest.approx(0.5, abs=5e-3)
    assert rho.entry("LL", "LL").real == pytest.approx(0.5, abs=5e-3)
    assert abs(rho.entry("EE", "LL")) == pytest.approx(0.5, abs=5e-3)
    assert concurrence(rho) == pytest.approx(1.0, abs=1e-2)
    assert concurrence_approx(rho) == pytest.approx(1.0, abs=1e-2)


def test_center_fringe_tracks_state_phase():
    # pair (|EE> + e^{i alpha} |LL>)/sqrt2: the center fringe peaks where
    # phi_B + phi_X compensates the state phase -- an end-to-end sign anchor
    alpha = 0.8
    state = WavepacketState((INV_SQRT2, 0.0, 0.0, INV_SQRT2 * np.exp(1j * alpha)))
    gbar = compute_gbar(state)
    v, phase = center_visibility(gbar)
    assert v == pytest.approx(1.0, abs=1e-3)
    assert phase == pytest.approx(alpha, abs=1e-3)


# ---------------------------------------------------------------------------
# peak table against an independent projector oracle


def _analyzer_vector(phi):
    return np.array([1.0, np.exp(1j * phi)]) / math.sqrt(2.0)


def test_peak_table_matches_projector_oracle(rng):
    # raw table cell = POVM weight x projector expectation, weights
    # [[1,2,1],[2,4,2],[1,2,1]] (middle windows collect two delay paths
    # per analyzed photon)
    rho = random_density(rng, 4)
    gbar = _entries_from_density(rho)
    setting = PhaseSetting(phi_b=0.7, phi_x=-0.4)
    table = peak_table_from_entries(gbar, setting)

    e_vec = np.array([1.0, 0.0])
    l_vec = np.array([0.0, 1.0])
    psi_b = _analyzer_vector(setting.phi_b)
    psi_x = _analyzer_vector(setting.phi_x)
    b_states = (e_vec, psi_b, l_vec)
    x_states = (e_vec, psi_x, l_vec)
    weights = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=float)
    want = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            v = np.kron(b_states[i], x_states[j])
            want[i, j] = weights[i, j] * (v.conj() @ rho @ v).real
    assert np.allclose(table, want, atol=1e-12)


def test_peak_table_total_for_diagonal_states(rng):
    # the weighted window POVM per photon is 2*I plus coherence cross terms,
    # so for a diagonal state the table total is exactly 4x the trace at any
    # analyzer setting (and the corners never depend on the phases)
    rho = np.diag(rng.uniform(0.1, 1.0, size=4)).astype(complex)
    rho /= np.trace(rho).real
    gbar = _entries_from_density(rho)
    for setting in (PhaseSetting(0.0, 0.0), PhaseSetting(0.3, 1.1)):
        table = peak_table_from_entries(gbar, setting)
        assert np.sum(table) == pytest.approx(4.0, abs=1e-12)


def test_corner_cells_are_phase_free(rng):
    rho = random_density(rng, 4)
    gbar = _entries_from_density(rho)
    tables = [
        peak_table_from_entries(gbar, PhaseSetting(pb, px))
        for pb, px in ((0.0, 0.0), (1.0, -0.5), (2.7, 0.9))
    ]
    for t in tables[1:]:
        for i, j in ((0, 0), (0, 2), (2, 0), (2, 2)):
            assert t[i, j] == pytest.approx(tables[0][i, j], abs=1e-14)


def test_bell_corner_cells_empty(bell_state):
    table = peak_table_from_entries(compute_gbar(bell_state), PhaseSetting())
    total = np.sum(table)
    assert table[0, 2] / total < 1e-3  # EL corner
    assert table[2, 0] / total < 1e-3  # LE corner


# ---------------------------------------------------------------------------
# center-peak scan algebra


def test_center_scan_fit_exact_x_state():
    phi = 0.7
    entries = {
        ("EE", "EE"): 0.3,
        ("EL", "EL"): 0.2,
        ("LE", "LE"): 0.2,
        ("LL", "LL"): 0.3,
        ("EL", "EE"): 0.0,
        ("LE", "EE"): 0.0,
        ("LL", "EL"): 0.0,
        ("LL", "LE"): 0.0,
        ("LE", "EL"): 0.0,
        ("LL", "EE"): 0.3 * np.exp(-1j * phi),  # rho_EE,LL = 0.3 e^{i phi}
    }
    gbar = GbarEntries(entries, bin_separation=T)
    phis = [2 * math.pi * k / 12 for k in range(12)]
    grid = center_scan(gbar, phis, phis)
    amplitude, offset, phase, rms = fit_center_scan(phis, phis, grid)
    # scan = 1 + 0.6 cos(phi_B + phi_X + phi): amplitude 2|rho_EE,LL|
    assert amplitude == pytest.approx(0.6, abs=1e-12)
    assert offset == pytest.approx(0.4, abs=1e-12)
    assert phase == pytest.approx(-phi, abs=1e-12)
    assert rms < 1e-12


def test_center_visibility_rejects_cross_coherence():
    entries = {
        ("EE", "EE"): 0.3,
        ("EL", "EL"): 0.2,
        ("LE", "LE"): 0.2,
        ("LL", "LL"): 0.3,
        ("EL", "EE"): 0.0,
        ("LE", "EE"): 0.0,
        ("LL", "EL"): 0.0,
        ("LL", "LE"): 0.0,
        ("LE", "EL"): 0.15,  # difference-phase fringe
        ("LL", "EE"): 0.0,
    }
    gbar = GbarEntries(entries, bin_separation=T)
    with pytest.raises(NumericalError):
        center_visibility(gbar)


# ---------------------------------------------------------------------------
# emitter protocols against closed forms


def test_biexciton_initialized_first_window_closed_form():
    # from |B> with no drive, the (EE, EE) window integral is
    #   (1 - e^{-gB T}) - gB e^{-gX T} (1 - e^{-(gB-gX) T})/(gB - gX)
    from timebin import EmitterModel

    gb, gx = 2.0, 1.0
    model = EmitterModel.cascade(gamma_b=gb, gamma_x=gx, initial_state="B")
    gbar = compute_gbar(model, grid_density=300, quad_points_per_bin=60)
    want = (1.0 - math.exp(-gb * T)) - gb * math.exp(-gx * T) * (
        1.0 - math.exp(-(gb - gx) * T)
    ) / (gb - gx)
    assert gbar.value("EE", "EE").real == pytest.approx(want, rel=2e-2)
    # everything else is negligible: no drive, so no late-bin pair
    assert gbar.value("LL", "LL").real < 1e-3
    assert abs(gbar.value("EE", "LL")) < 1e-3


def test_two_pulse_pair_against_reexcitation_oracle():
    # ideal pi/2-pulse algebra: populations (1/3, 1/6, 1/6, 1/3) and
    # |rho_EE,LL| = 1/6 once the re-excited component is accounted for
    model = two_pulse_pair(pulse_width=0.02)
    rho = reconstruct_pair(compute_gbar(model, grid_density=300,
                                        quad_points_per_bin=40))
    tol = 8e-3  # O(sigma) pulse-width and O(h^2) quadrature corrections
    assert rho.entry("EE", "EE").real == pytest.approx(1 / 3, abs=tol)
    assert rho.entry("EL", "EL").real == pytest.approx(1 / 6, abs=tol)
    assert rho.entry("LE", "LE").real == pytest.approx(1 / 6, abs=tol)
    assert rho.entry("LL", "LL").real == pytest.approx(1 / 3, abs=tol)
    assert abs(rho.entry("EE", "LL")) == pytest.approx(1 / 6, abs=tol)
    # the EL/LE admixture exactly cancels the coherence in both measures
    assert concurrence(rho) == pytest.approx(0.0, abs=2e-2)
    assert concurrence_approx(rho) == pytest.approx(0.0, abs=2e-2)


# ---------------------------------------------------------------------------
# entanglement measures


def test_werner_state_concurrence():
    bell = np.zeros((4, 4), dtype=complex)
    bell[0, 0] = bell[3, 3] = bell[0, 3] = bell[3, 0] = 0.5
    for p, want in ((0.8, 0.7), (1.0, 1.0), (1 / 3, 0.0), (0.2, 0.0)):
        rho = p * bell + (1 - p) * np.eye(4) / 4.0
        assert concurrence(rho) == pytest.approx(want, abs=1e-12)


def test_concurrence_approx_matches_exact_on_symmetric_x_states(rng):
    # family with vanishing single-flip coherences and rho_EL,EL = rho_LE,LE:
    # exact = 2 max(0, |rho_EE,LL| - q) = approx there
    for _ in range(20):
        q = rng.uniform(0.0, 0.25)
        c = rng.uniform(0.0, 0.5 - q)
        ph = rng.uniform(0, 2 * math.pi)
        p = (1.0 - 2 * q) / 2.0
        rho = np.diag([p, q, q, p]).astype(complex)
        rho[0, 3] = c * np.exp(1j * ph)
        rho[3, 0] = np.conj(rho[0, 3])
        assert concurrence_approx(rho) == pytest.approx(concurrence(rho), abs=1e-12)


def test_fidelity_properties(rng):
    rho = random_density(rng, 4)
    sig = random_density(rng, 4)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)
    assert fidelity(rho, sig) == pytest.approx(fidelity(sig, rho), abs=1e-9)
    psi = random_pure_amplitudes(rng, 4)
    pure = np.outer(psi, psi.conj())
    # the eigendecomposition route carries ~1e-8 noise near zero eigenvalues
    assert fidelity(rho, pure) == pytest.approx((psi.conj() @ rho @ psi).real, abs=1e-7)
    # orthogonal Bell states
    minus = np.zeros((4, 4), dtype=complex)
    minus[0, 0] = minus[3, 3] = 0.5
    minus[0, 3] = minus[3, 0] = -0.5
    plus = np.abs(minus)
    assert fidelity(plus, minus) == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------------------
# physicality projection and round trips


def test_unphysical_inversion_is_projected():
    entries = {
        ("EE", "EE"): 0.5,
        ("EL", "EL"): 0.0,
        ("LE", "LE"): 0.0,
        ("LL", "LL"): 0.5,
        ("EL", "EE"): 0.0,
        ("LE", "EE"): 0.0,
        ("LL", "EL"): 0.0,
        ("LL", "LE"): 0.0,
        ("LE", "EL"): 0.0,
        ("LL", "EE"): 0.55,  # beyond the sqrt(p_EE p_LL) bound
    }
    rho = reconstruct_pair(GbarEntries(entries, bin_separation=T))
    assert rho.projection_distance > 0.0
    assert np.linalg.eigvalsh(rho.entries).min() >= -1e-12
    assert np.trace(rho.entries).real == pytest.approx(1.0)


def test_reconstruct_pair_keeps_physical_input(rng):
    rho_in = random_density(rng, 4)
    rho = reconstruct_pair(_entries_from_density(rho_in))
    assert rho.projection_distance == 0.0
    assert np.allclose(rho.entries, rho_in, atol=1e-12)


def test_round_trip_fidelity_random_pure_states(rng):
    for _ in range(5):
        amps = random_pure_amplitudes(rng, 4)
        state = WavepacketState(tuple(amps))
        rec = reconstruct_pair(compute_gbar(state))
        target = np.outer(amps, amps.conj())
        assert fidelity(rec, target) >= 0.999


def test_stokes_pair_round_trip(rng):
    rho = random_density(rng, 4)
    s = stokes_pair(DensityMatrix2Q(rho))
    assert s[0, 0] == pytest.approx(1.0, abs=1e-12)
    back = rho_from_stokes(s)
    assert np.allclose(back.entries, rho, atol=1e-12)
    with pytest.raises(DataError):
        rho_from_stokes(np.zeros((3, 3)))
