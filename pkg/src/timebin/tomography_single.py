"""Single-photon time-bin tomography.

Pipeline: window integrals of the first-order correlator -> per-phase peak
counts -> Stokes parameters or direct 2x2 reconstruction -> visibility.

The unnormalized matrix of window integrals ("gbar") follows the slicing of
the three-peak signal: diagonal entries are the early-window and late-window
intensities, the EL coherence is the middle-window integral of the one-bin
shifted correlator,

    gbar_EE = int_0^T   <a^dag(t)     a(t)>     dt
    gbar_EL = int_T^2T  <a^dag(t)     a(t - T)> dt
    gbar_LE = int_T^2T  <a^dag(t - T) a(t)>     dt
    gbar_LL = int_T^2T  <a^dag(t)     a(t)>     dt ,

and rho = gbar / Tr gbar after Hermitization.  The middle interference peak
at analyzer phase phi is

    P_mid(phi) = gbar_EE + gbar_LL + 2 Re[e^{i phi} gbar_EL],

so a cosine fit over phi has amplitude 2|rho_EL| relative to its offset and
peaks at phi = -arg(rho_EL).  Both reconstruction routes (direct window
integrals, and Stokes parameters from the phase scan) are provided and must
agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emitter import EmitterModel, ModelContext, Pulse
from .interferometer import expand_single, supported_terms
from .linalg import DataError, NumericalError, TimeGrid, hermitize, integrate
from .wavepacket import SinglePhotonState

PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# Phase-scan default: overdetermined 12-point grid for the cosine fit.
DEFAULT_PHASES = tuple(2.0 * math.pi * k / 12 for k in range(12))

_PHASE_KEY_SCALE = 1e12  # dict key quantization for phase lookup


def _phase_key(phi: float) -> int:
    return round((phi % (2.0 * math.pi)) * _PHASE_KEY_SCALE)


@dataclass(frozen=True)
class PeakTable1:
    """Integrated counts of the three-peak single-photon signal.

    p_mid maps analyzer phase -> middle-peak counts; the outer peaks carry no
    phase dependence (no cross terms survive there).
    """

    p_early: float
    p_mid: dict
    p_late: float

    def __post_init__(self):
        for name, val in (("p_early", self.p_early), ("p_late", self.p_late)):
            if val < -1e-9:
                raise DataError(f"{name} must be nonnegative counts, got {val}")
        mids = {}
        for phi, val in dict(self.p_mid).items():
            if val < -1e-9:
                raise DataError(f"p_mid[{phi}] must be nonnegative counts, got {val}")
            mids[float(phi)] = float(val)
        object.__setattr__(self, "p_mid", mids)

    def mid_at(self, phi: float) -> float:
        """Middle-peak counts at phase phi (lookup is 2pi-periodic)."""
        want = _phase_key(phi)
        for stored, val in self.p_mid.items():
            if _phase_key(stored) == want:
                return val
        raise DataError(f"no middle-peak sample at phase {phi}")

    @property
    def phases(self) -> tuple:
        return tuple(sorted(self.p_mid))

    def as_record(self) -> dict:
        return {
            "p_early": self.p_early,
            "p_late": self.p_late,
            "p_mid": [[phi, val] for phi, val in sorted(self.p_mid.items())],
        }


@dataclass(frozen=True, eq=False)
class DensityMatrix1Q:
    """Normalized 2x2 time-bin density matrix, basis order (E, L)."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (2, 2):
            raise DataError(f"expected a 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise DataError("density matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-9:
            raise DataError(f"density matrix trace must be 1, got {np.trace(m)}")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise DataError("density matrix must be positive semidefinite")
        object.__setattr__(self, "entries", m)

    @property
    def coherence(self) -> complex:
        return complex(self.entries[0, 1])

    def stokes(self) -> np.ndarray:
        """(S0, S1, S2, S3) view: S_j = Tr(sigma_j rho)."""
        return np.array([np.trace(p @ self.entries).real for p in PAULI_1Q])

    def as_record(self) -> dict:
        return {
            "basis": ["E", "L"],
            "entries": [[[v.real, v.imag] for v in row] for row in self.entries],
            "stokes": list(self.stokes()),
        }


# ---------------------------------------------------------------------------
# window integrals


def _window_integral(source, lo, hi, shift, conjugate_shift, *, points_per_bin,
                     grid_density, context):
    from .correlations import g1_grid  # local import; correlations pulls in wavepacket

    # Pull the endpoint nodes just inside the window so the quadrature sees
    # the one-sided limits belonging to THIS window (wavepacket modes switch
    # on exactly at bin boundaries; a node on the edge must not pick up the
    # neighboring bin's value).
    eps = 1e-7 * (hi - lo)
    times = np.linspace(lo + eps, hi - eps, points_per_bin + 1)

    # The correlator rises on the pulse-width scale wherever an operator time
    # crosses a pulse support, which the per-bin grid cannot resolve; lay a
    # fine ladder (half-width steps) across each such stretch.
    extra = []
    for pulse in getattr(source, "pulses", ()):
        plo, phi = pulse.support()
        n_fine = max(2, math.ceil((phi - plo) / (0.5 * pulse.width)))
        for off in (shift, conjugate_shift):
            ladder = np.linspace(plo + off, phi + off, n_fine + 1)
            inside = ladder[(ladder > lo + eps) & (ladder < hi - eps)]
            if inside.size:
                extra.append(inside)
    if extra:
        times = np.unique(np.concatenate([times, *extra]))

    vals = g1_grid(
        source,
        times,
        shift=shift,
        conjugate_shift=conjugate_shift,
        grid_density=grid_density,
        context=context,
    )
    return complex(np.trapezoid(vals, times))


def _quad_points(source, points_per_bin):
    if points_per_bin is not None:
        return points_per_bin
    # analytic sources are cheap; spend points freely there
    return 400 if isinstance(source, SinglePhotonState) else 60


def _bin_separation(source) -> float:
    for attr in ("bin_separation",):
        if hasattr(source, attr):
            return float(getattr(source, attr))
    return 10.0


def single_gbar(source, *, points_per_bin=None, grid_density=600, context=None) -> np.ndarray:
    """Direct route: the 2x2 matrix of window integrals (unnormalized)."""
    T = _bin_separation(source)
    npts = _quad_points(source, points_per_bin)
    if context is None and isinstance(source, EmitterModel):
        context = ModelContext(source, dt_fine=T / grid_density)
    kw = dict(points_per_bin=npts, grid_density=grid_density, context=context)
    g_ee = _window_integral(source, 0.0, T, 0.0, 0.0, **kw)
    g_ll = _window_integral(source, T, 2 * T, 0.0, 0.0, **kw)
    g_el = _window_integral(source, T, 2 * T, T, 0.0, **kw)
    return np.array([[g_ee, g_el], [np.conj(g_el), g_ll]])


def integrate_peaks(source, phases=DEFAULT_PHASES, *, points_per_bin=None,
                    grid_density=600, context=None) -> PeakTable1:
    """Integrate the interferometer output over the three peak windows.

    Each window keeps only the delay terms with support there; the shifted
    correlator integrals are computed once and reused across phases (only the
    phase factors change).
    """
    T = _bin_separation(source)
    npts = _quad_points(source, points_per_bin)
    if context is None and isinstance(source, EmitterModel):
        context = ModelContext(source, dt_fine=T / grid_density)
    kw = dict(points_per_bin=npts, grid_density=grid_density, context=context)

    windows = [(0.0, T), (T, 2 * T), (2 * T, 3 * T)]
    # per-window cache of shift-pattern integrals, keyed (k, s_cre, s_ann)
    cache = {}

    def window_counts(k, phi):
        total = 0.0j
        lo, hi = windows[k]
        for term in supported_terms(expand_single(phi), (windows[k],)):
            s_cre, s_ann = term.shifts
            key = (k, s_cre, s_ann)
            if key not in cache:
                cache[key] = _window_integral(source, lo, hi, s_ann * T, s_cre * T, **kw)
            total += term.phase_factor * cache[key]
        if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
            raise NumericalError(f"peak integral not real: {total}")
        return total.real

    p_early = window_counts(0, 0.0)
    p_late = window_counts(2, 0.0)
    p_mid = {float(phi): window_counts(1, float(phi)) for phi in phases}
    return PeakTable1(p_early=p_early, p_mid=p_mid, p_late=p_late)


# ---------------------------------------------------------------------------
# reconstruction


def reconstruct(gbar) -> DensityMatrix1Q:
    """rho = gbar / Tr(gbar), Hermitized first.  Tr <= 0 means no signal."""
    m = np.asarray(gbar, dtype=complex)
    if m.shape != (2, 2):
        raise DataError(f"expected a 2x2 window-integral matrix, got shape {m.shape}")
    m = hermitize(m)
    tr = np.trace(m).real
    if tr <= 0.0:
        raise DataError(f"no signal: window integrals have trace {tr}")
    return DensityMatrix1Q(m / tr)


def stokes_single(peaks: PeakTable1) -> np.ndarray:
    """(S0..S3) from the count combinations of the three-peak table.

    Needs middle-peak samples at phases 0 and pi/2.  The middle peak at
    phi=0 projects on (|E>+|L>)/sqrt2, at phi=pi/2 on (|E>+i|L>)/sqrt2; the
    outer peaks give the population imbalance.
    """
    n = peaks.p_early + peaks.p_late
    if n <= 0.0:
        raise DataError(f"no signal: outer peaks sum to {n}")
    s1 = peaks.mid_at(0.0) / n - 1.0
    s2 = peaks.mid_at(0.5 * math.pi) / n - 1.0
    s3 = (peaks.p_early - peaks.p_late) / n
    return np.array([1.0, s1, s2, s3])


def rho_from_stokes_single(stokes) -> DensityMatrix1Q:
    s = np.asarray(stokes, dtype=float).reshape(-1)
    if s.size != 4:
        raise DataError(f"expected 4 Stokes parameters, got {s.size}")
    m = 0.5 * sum(s[j] * PAULI_1Q[j] for j in range(4))
    return DensityMatrix1Q(m / np.trace(m).real)


def reconstruct_from_peaks(peaks: PeakTable1) -> DensityMatrix1Q:
    """Stokes route end to end (the scan-based alternative to single_gbar)."""
    return rho_from_stokes_single(stokes_single(peaks))


# ---------------------------------------------------------------------------
# visibility


def visibility_fit(samples):
    """Least-squares cosine fit P(phi) = c0 + c1 cos(phi - phase).

    samples: mapping phase -> counts, or iterable of (phase, counts) pairs,
    or a PeakTable1 (its middle peak is used).  Returns (c0, c1, phase) with
    c1 >= 0.  Needs at least 3 distinct phases.
    """
    if isinstance(samples, PeakTable1):
        samples = samples.p_mid
    pairs = samples.items() if hasattr(samples, "items") else samples
    phis, vals = [], []
    for phi, val in pairs:
        phis.append(float(phi))
        vals.append(float(val))
    if len(set(_phase_key(p) for p in phis)) < 3:
        raise DataError("cosine fit needs at least 3 distinct phases")
    phis = np.asarray(phis)
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    (c0, a, b), *_ = np.linalg.lstsq(design, np.asarray(vals), rcond=None)
    # c0 + a cos + b sin = c0 + c1 cos(phi - phase)
    return float(c0), float(math.hypot(a, b)), float(math.atan2(b, a))


def visibility(samples) -> float:
    """Fringe visibility of the middle peak: amplitude / offset of the fit."""
    c0, c1, _ = visibility_fit(samples)
    if c0 <= 1e-12 * max(1.0, c1):
        raise DataError(f"no counts: fitted offset {c0}")
    v = c1 / c0
    if v > 1.0 + 1e-6:
        raise NumericalError(f"visibility {v} exceeds 1 beyond tolerance")
    return v


# ---------------------------------------------------------------------------
# trigger correlation


def trigger_correlate(g1_samples, envelope, tau_grid, *, time_step=None):
    """Correlate a sampled signal with a trigger envelope.

    out(tau) = int dt |envelope(t)| g1(t + tau), with g1_samples and envelope
    sampled on the same uniform grid starting at t=0.  time_step defaults to
    1 sample.  tau values are aligned to the sample grid by rounding.
    """
    g1 = np.asarray(g1_samples, dtype=float)
    env = np.abs(np.asarray(envelope, dtype=float))
    dt = 1.0 if time_step is None else float(time_step)
    if dt <= 0.0:
        raise DataError(f"time_step must be positive, got {dt}")
    if env.size > g1.size:
        env = env[: g1.size]
    out = np.zeros(len(tau_grid))
    for k, tau in enumerate(np.asarray(tau_grid, dtype=float)):
        j0 = round(tau / dt)
        acc = 0.0
        for i in range(env.size):
            j = i + j0
            if 0 <= j < g1.size and env[i] != 0.0:
                acc += env[i] * g1[j]
        out[k] = acc * dt
    return out


def triggered_signal(source, phi, *, resolution=None, trigger_width=None,
                     grid_density=600, context=None):
    """Simulated trigger-coincidence trace over the three-peak span [0, 3T].

    Returns (tau_grid, counts).  The trigger is a narrow rectangle at t=0
    (width defaults to one resolution step), so the trace is close to the
    interferometer-expanded intensity itself.
    """
    from .correlations import g1_grid

    T = _bin_separation(source)
    step = (T / 60 if resolution is None else float(resolution))
    n = int(round(3 * T / step))
    times = np.linspace(0.0, 3 * T, n + 1)
    grid = TimeGrid(0.0, 3 * T, n + 1)
    if context is None and isinstance(source, EmitterModel):
        context = ModelContext(source, dt_fine=T / grid_density)

    signal = np.zeros(times.size)
    for term in expand_single(phi):
        s_cre, s_ann = term.shifts
        vals = g1_grid(source, grid, shift=s_ann * T, conjugate_shift=s_cre * T,
                       grid_density=grid_density, context=context)
        signal += (term.phase_factor * vals).real

    width = step if trigger_width is None else float(trigger_width)
    n_env = max(1, int(round(width / step)))
    env = np.ones(n_env)
    return times, trigger_correlate(signal, env, times, time_step=step)


# ---------------------------------------------------------------------------
# emitter protocol


def two_pulse_single_photon(*, bin_separation=10.0, gamma_x=1.0, gamma_b=2.0,
                            areas=(0.5 * math.pi, 0.5 * math.pi),
                            phases=(0.0, 0.0), pulse_width=0.05,
                            envelope="gaussian") -> EmitterModel:
    """Two-pulse exciton protocol: one photon split over two time bins.

    Drives G<->X once per bin.  For pi/2 areas and short pulses the emitted
    photon approaches the equal superposition with relative phase
    phases[1] - phases[0]; the second pulse also acts on the not-yet-decayed
    excited component, which caps the middle-peak visibility at 1/2.
    """
    from .emitter import GAUSS_CUT

    # keep the full pulse support inside its bin (and after t=0)
    lead = GAUSS_CUT * pulse_width if envelope == "gaussian" else 0.5 * pulse_width
    pulses = tuple(
        Pulse(center=k * bin_separation + lead, area=areas[k], width=pulse_width,
              envelope=envelope, phase=phases[k], target_transition="GX")
        for k in range(2)
    )
    return EmitterModel.cascade(gamma_b=gamma_b, gamma_x=gamma_x, pulses=pulses)
