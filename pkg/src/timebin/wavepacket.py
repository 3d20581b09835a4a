"""Idealized wavepacket sources: photons in product single-sided exponential
modes tied to the early/late time bins.

These states are the analytic reference for the tomography pipelines. A pair
state carries one photon on the B channel and one on the X channel,

    |psi> = sum_ij alpha_ij |phi_i^B> |phi_j^X>,   i,j in {E, L},

with phi_E(t) = sqrt(gamma) exp(-gamma t/2) theta(t) and phi_L(t) =
phi_E(t - T). Early and late modes overlap only through the exp(-gamma T/2)
tail, which the correlators keep exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import DataError

BASIS_PAIR = ("EE", "EL", "LE", "LL")
BASIS_SINGLE = ("E", "L")


def mode_value(gamma: float, shift: float, t):
    """Single-sided exponential mode amplitude at time(s) t."""
    t = np.asarray(t, dtype=float)
    tau = t - shift
    out = np.where(tau >= 0.0, np.sqrt(gamma) * np.exp(-0.5 * gamma * np.clip(tau, 0.0, None)), 0.0)
    return out if out.ndim else complex(out)


def mode_overlap(gamma: float, bin_separation: float) -> float:
    """<phi_E|phi_L> for one channel: the late mode rides on the early tail."""
    return math.exp(-0.5 * gamma * bin_separation)


def mode_norm(gamma: float, horizon: float) -> float:
    """Integral of |phi_E|^2 over [0, horizon] (analytic)."""
    return 1.0 - math.exp(-gamma * horizon)


def _check_norm(amps: np.ndarray, what: str):
    s = float(np.sum(np.abs(amps) ** 2))
    if abs(s - 1.0) > 1e-9:
        raise DataError(f"{what} amplitudes must satisfy sum |alpha|^2 = 1, got {s}")


@dataclass(frozen=True)
class SinglePhotonState:
    """One photon split over the early/late bins of a single channel."""

    amplitudes: tuple  # (alpha_E, alpha_L)
    gamma: float = 1.0
    bin_separation: float = 10.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2:
            raise DataError("single-photon state needs exactly (alpha_E, alpha_L)")
        _check_norm(amps, "single-photon")
        if self.gamma <= 0 or self.bin_separation <= 0:
            raise DataError("gamma and bin_separation must be positive")
        object.__setattr__(self, "amplitudes", tuple(amps))

    def amplitude_at(self, t):
        """Field amplitude A(t) = alpha_E phi_E(t) + alpha_L phi_L(t)."""
        a_e, a_l = self.amplitudes
        return a_e * mode_value(self.gamma, 0.0, t) + a_l * mode_value(
            self.gamma, self.bin_separation, t
        )


@dataclass(frozen=True)
class WavepacketState:
    """Photon pair in product early/late modes of the B and X channels."""

    amplitudes: tuple  # (alpha_EE, alpha_EL, alpha_LE, alpha_LL)
    gamma_b: float = 2.0
    gamma_x: float = 1.0
    bin_separation: float = 10.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 4:
            raise DataError("pair state needs the four bin amplitudes (EE, EL, LE, LL)")
        _check_norm(amps, "pair")
        if self.gamma_b <= 0 or self.gamma_x <= 0 or self.bin_separation <= 0:
            raise DataError("rates and bin_separation must be positive")
        object.__setattr__(self, "amplitudes", tuple(amps))
        # Bin confinement: exp(-gamma T) of the mode mass leaks out of its bin.
        if min(self.gamma_b, self.gamma_x) * self.bin_separation < 10.0:
            import warnings

            warnings.warn(
                "gamma*T < 10: early/late modes leak more than ~5e-5 out of "
                "their bins; tomography tolerances may degrade",
                stacklevel=2,
            )

    def pair_amplitude(self, t_b, t_x):
        """A(t_b, t_x) = sum_ij alpha_ij phi_i^B(t_b) phi_j^X(t_x)."""
        t_b = np.asarray(t_b, dtype=float)
        t_x = np.asarray(t_x, dtype=float)
        phi_b = [mode_value(self.gamma_b, 0.0, t_b), mode_value(self.gamma_b, self.bin_separation, t_b)]
        phi_x = [mode_value(self.gamma_x, 0.0, t_x), mode_value(self.gamma_x, self.bin_separation, t_x)]
        out = 0.0
        for idx, a in enumerate(self.amplitudes):
            if a == 0:
                continue
            out = out + a * phi_b[idx // 2] * phi_x[idx % 2]
        return out

    def density_matrix(self) -> np.ndarray:
        """The ideal 4x4 time-bin density matrix |alpha><alpha| (modes taken
        orthonormal)."""
        v = np.asarray(self.amplitudes, dtype=complex)
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class WavepacketMixture:
    """Statistical mixture of pure wavepacket pair states.

    Correlation functions are linear in the density operator, so every
    pipeline quantity of the mixture is the weighted sum over components.
    """

    components: tuple  # ((weight, WavepacketState), ...)

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise DataError("mixture needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise DataError("mixture weights must be non-negative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"mixture weights must sum to 1, got {total}")
        for _, s in comps:
            if not isinstance(s, WavepacketState):
                raise DataError("mixture components must be WavepacketState")
        object.__setattr__(self, "components", comps)

    def density_matrix(self) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        for w, s in self.components:
            out += w * s.density_matrix()
        return out


def _split_normal_order(events):
    """Split events into annihilator times (left side) and creator times
    (right side), keyed by channel. Rejects non-normally-ordered requests."""
    ann: dict[str, list[float]] = {}
    cre: dict[str, list[float]] = {}
    for ev in events:
        op = ev.operator
        if not isinstance(op, str):
            raise DataError("analytic correlators need labeled operators")
        dagger = op.endswith("_dag")
        channel = op[:-4] if dagger else op
        if channel not in ("B", "X", "A"):
            raise DataError(f"unknown channel label {op!r}")
        if ev.side == "left":
            if dagger:
                raise DataError("daggered operator on the left: not normally ordered")
            ann.setdefault(channel, []).append(ev.time)
        elif ev.side == "right":
            if not dagger:
                raise DataError("undaggered operator on the right: not normally ordered")
            cre.setdefault(channel, []).append(ev.time)
        else:
            raise DataError(f"unknown side {ev.side!r}")
    return ann, cre


def analytic_correlator(state, events) -> complex:
    """Normally-ordered field correlator for a wavepacket source.

    events is an iterable of correlation events (time, operator label, side);
    left-side events are annihilators a(t), right-side ones creators a^dag(t).
    Returns <prod a^dag(v) prod a(u)> on the given state. Channels with a
    different number of creators and annihilators give 0 (photon number is
    conserved mode by mode), as do two annihilators on a single-photon
    channel.
    """
    ann, cre = _split_normal_order(events)
    if isinstance(state, WavepacketMixture):
        return sum(w * analytic_correlator(s, events) for w, s in state.components)
    if isinstance(state, SinglePhotonState):
        return _single_correlator(state, ann, cre)
    if isinstance(state, WavepacketState):
        return _pair_correlator(state, ann, cre)
    raise DataError(f"unsupported state type {type(state).__name__}")


def _channel_factor(amps_by_mode, gamma, bin_separation, ann_times, cre_times):
    """Per-channel contraction matrix M[i', i] between bra mode i' and ket
    mode i, for 0 or 1 annihilators on each side."""
    if len(ann_times) != len(cre_times):
        return None  # photon number mismatch -> correlator vanishes
    if len(ann_times) > 1:
        return 0.0  # two annihilators on a one-photon channel
    if len(ann_times) == 0:
        ov = mode_overlap(gamma, bin_separation)
        return np.array([[1.0, ov], [ov, 1.0]], dtype=complex)
    u, v = ann_times[0], cre_times[0]
    phi_u = np.array([mode_value(gamma, 0.0, u), mode_value(gamma, bin_separation, u)])
    phi_v = np.array([mode_value(gamma, 0.0, v), mode_value(gamma, bin_separation, v)])
    return np.outer(phi_v.conj(), phi_u)


def _single_correlator(state, ann, cre) -> complex:
    if "B" in ann or "B" in cre or "X" in ann or "X" in cre:
        raise DataError("single-photon states only carry the A channel")
    m = _channel_factor(
        state.amplitudes, state.gamma, state.bin_separation, ann.get("A", []), cre.get("A", [])
    )
    if m is None:
        return 0.0
    if isinstance(m, float):
        return 0.0
    a = np.asarray(state.amplitudes)
    return complex(a.conj() @ m @ a)


def _pair_correlator(state, ann, cre) -> complex:
    if "A" in ann or "A" in cre:
        raise DataError("pair states carry B and X channels, not A")
    m_b = _channel_factor(None, state.gamma_b, state.bin_separation, ann.get("B", []), cre.get("B", []))
    m_x = _channel_factor(None, state.gamma_x, state.bin_separation, ann.get("X", []), cre.get("X", []))
    if m_b is None or m_x is None:
        return 0.0
    if isinstance(m_b, float) or isinstance(m_x, float):
        return 0.0
    amps = np.asarray(state.amplitudes).reshape(2, 2)
    # <psi| (i'j') ... |psi (ij)>: contract bra/ket bin indices per channel.
    return complex(np.einsum("pq,pi,qj,ij->", amps.conj(), m_b, m_x, amps))
