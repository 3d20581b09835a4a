"""Three-level cascade emitter: Hamiltonian drive, Lindblad dissipators,
vectorized Liouvillian and fast piecewise-exponential propagation.

Level ordering is (G, X, B) = (ground, single exciton, biexciton). The two
decay channels are

    sigma_b = |X><B|   (upper transition, emits the first photon, rate gamma_b)
    sigma_x = |G><X|   (lower transition, emits the second photon, rate gamma_x)

Density matrices are vectorized row-major, vec(rho)[3i+j] = rho_ij, so
vec(A rho B) = (A kron B^T) vec(rho).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import ComplexMatrix, DataError, DimensionError, matrix_exp

DIM = 3  # G, X, B

G, X, B = 0, 1, 2

SIGMA_X = np.zeros((3, 3), dtype=complex)
SIGMA_X[G, X] = 1.0  # |G><X|
SIGMA_B = np.zeros((3, 3), dtype=complex)
SIGMA_B[X, B] = 1.0  # |X><B|

IDENT = np.eye(3, dtype=complex)

# Transition operators by label; "dag" marks the raising partner.
TRANSITION_OPS = {
    "B": SIGMA_B,
    "X": SIGMA_X,
    "B_dag": SIGMA_B.conj().T,
    "X_dag": SIGMA_X.conj().T,
}

# Gaussian envelopes are treated as strictly zero beyond +-GAUSS_CUT sigma.
GAUSS_CUT = 6.0


@dataclass(frozen=True)
class Pulse:
    """One excitation pulse of the drive laser.

    area is the pulse area (time integral of the Rabi envelope);
    target_transition picks the driven pair: "GB" is the effective two-photon
    biexciton drive, "GX" drives the exciton directly. phase is the drive
    phase phi_p entering as exp(+i phi_p)|G><upper|.
    """

    center: float
    area: float
    width: float
    envelope: str = "rectangular"
    phase: float = 0.0
    target_transition: str = "GB"

    def __post_init__(self):
        if self.width <= 0:
            raise DataError(f"pulse width must be positive, got {self.width}")
        if self.envelope not in ("rectangular", "gaussian"):
            raise DataError(f"unknown pulse envelope {self.envelope!r}")
        if self.target_transition not in ("GB", "GX"):
            raise DataError(f"unknown pulse target_transition {self.target_transition!r}")

    def support(self) -> tuple[float, float]:
        if self.envelope == "rectangular":
            half = 0.5 * self.width
        else:
            half = GAUSS_CUT * self.width
        return (self.center - half, self.center + half)

    def amplitude(self, t: float) -> float:
        lo, hi = self.support()
        if t < lo or t >= hi:
            return 0.0
        if self.envelope == "rectangular":
            return self.area / self.width
        z = (t - self.center) / self.width
        return self.area / (self.width * math.sqrt(2 * math.pi)) * math.exp(-0.5 * z * z)


@dataclass(frozen=True)
class TimeBinConfig:
    """Time-bin layout: bins of width T starting at t=0, no dead time between
    them, and a fixed number of observed detection windows."""

    bin_separation: float = 10.0
    n_bins_observed: int = 3

    def __post_init__(self):
        if self.bin_separation <= 0:
            raise DataError("bin_separation must be positive")
        if self.n_bins_observed < 2:
            raise DataError("need at least the early and late bins")

    @property
    def horizon(self) -> float:
        return self.n_bins_observed * self.bin_separation

    def window(self, k: int) -> tuple[float, float]:
        if not 0 <= k < self.n_bins_observed:
            raise DimensionError(f"window index {k} out of range")
        return (k * self.bin_separation, (k + 1) * self.bin_separation)


@dataclass(frozen=True)
class EmitterModel:
    """Emitter description: statics, drive pulses and decay channels.

    collapse_channels is a tuple of (lowering operator, rate) pairs; the
    classmethod `cascade` builds the standard two-channel decay chain.
    initial_state may be "G", "X", "B" or a 3x3 density matrix. An optional
    static Hamiltonian term (rotating frame) supports detuned/toy dynamics.
    """

    hamiltonian_static: object = None
    pulses: tuple[Pulse, ...] = ()
    collapse_channels: tuple = ()
    initial_state: object = "G"
    dim: int = DIM

    def __post_init__(self):
        if self.dim != DIM:
            raise DimensionError(f"only dim={DIM} emitters are supported")
        object.__setattr__(self, "pulses", tuple(self.pulses))
        channels = []
        for op, rate in self.collapse_channels:
            op = np.asarray(op, dtype=complex)
            if op.shape != (DIM, DIM):
                raise DimensionError("collapse operators must be 3x3")
            if rate < 0:
                raise DataError("decay rates must be non-negative")
            channels.append((op, float(rate)))
        object.__setattr__(self, "collapse_channels", tuple(channels))
        if self.hamiltonian_static is not None:
            h = np.asarray(self.hamiltonian_static, dtype=complex)
            if h.shape != (3, 3):
                raise DimensionError("hamiltonian_static must be 3x3")
            if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
                raise DataError("hamiltonian_static must be Hermitian")
            object.__setattr__(self, "hamiltonian_static", h)
        self.initial_density()  # validate eagerly

    @classmethod
    def cascade(cls, gamma_b: float = 2.0, gamma_x: float = 1.0, pulses=(),
                initial_state="G", hamiltonian_static=None) -> "EmitterModel":
        """Radiative cascade: the doubly-excited level decays at gamma_b into
        the single-excited one, which decays at gamma_x into the ground state."""
        return cls(
            hamiltonian_static=hamiltonian_static,
            pulses=tuple(pulses),
            collapse_channels=((SIGMA_B, gamma_b), (SIGMA_X, gamma_x)),
            initial_state=initial_state,
        )

    def _rate_of(self, ref: np.ndarray) -> float:
        total = 0.0
        for op, rate in self.collapse_channels:
            if np.array_equal(op, ref):
                total += rate
        return total

    @property
    def gamma_b(self) -> float:
        return self._rate_of(SIGMA_B)

    @property
    def gamma_x(self) -> float:
        return self._rate_of(SIGMA_X)

    def label_rate(self, label: str) -> float:
        """Decay rate of the channel a transition label belongs to.

        Emission operators are a = sqrt(rate) * sigma, so correlators built
        from labels carry one sqrt(rate) per operator; a zero-rate channel
        emits nothing.
        """
        if label in ("B", "B_dag"):
            return self.gamma_b
        if label in ("X", "X_dag"):
            return self.gamma_x
        raise DataError(f"unknown transition label {label!r}")

    def dissipation_free(self) -> bool:
        return all(rate == 0.0 for _, rate in self.collapse_channels)

    def initial_density(self) -> ComplexMatrix:
        if isinstance(self.initial_state, str):
            try:
                k = {"G": G, "X": X, "B": B}[self.initial_state]
            except KeyError:
                raise DataError(f"unknown initial state {self.initial_state!r}") from None
            rho = np.zeros((3, 3), dtype=complex)
            rho[k, k] = 1.0
            return rho
        rho = np.asarray(self.initial_state, dtype=complex)
        if rho.shape != (3, 3):
            raise DimensionError("initial density matrix must be 3x3")
        if abs(np.trace(rho) - 1.0) > 1e-9:
            raise DataError(f"initial state trace {np.trace(rho)} != 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise DataError("initial state must be Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -1e-9:
            raise DataError("initial state must be positive semidefinite")
        return rho

    def hamiltonian(self, t: float) -> ComplexMatrix:
        h = np.zeros((3, 3), dtype=complex)
        if self.hamiltonian_static is not None:
            h = h + self.hamiltonian_static
        for p in self.pulses:
            amp = p.amplitude(t)
            if amp == 0.0:
                continue
            upper = B if p.target_transition == "GB" else X
            h[G, upper] += 0.5 * amp * np.exp(1j * p.phase)
            h[upper, G] += 0.5 * amp * np.exp(-1j * p.phase)
        return h

    def pulse_supports(self) -> list[tuple[float, float]]:
        return [p.support() for p in self.pulses]

    def is_pulse_free(self, a: float, b: float) -> bool:
        """True if the drive vanishes on the whole interval [a, b]."""
        for lo, hi in self.pulse_supports():
            if a < hi and b > lo:
                return False
        return True


def _dissipator_super(c: np.ndarray, rate: float) -> np.ndarray:
    cdc = c.conj().T @ c
    return rate * (
        np.kron(c, c.conj())
        - 0.5 * (np.kron(cdc, IDENT) + np.kron(IDENT, cdc.T))
    )


def build_liouvillian(model: EmitterModel, t: float) -> ComplexMatrix:
    """9x9 generator L(t) with vec(drho/dt) = L vec(rho)."""
    h = model.hamiltonian(t)
    lv = -1j * (np.kron(h, IDENT) - np.kron(IDENT, h.T))
    for c, rate in model.collapse_channels:
        if rate > 0.0:
            lv = lv + _dissipator_super(c, rate)
    return lv


def vec(rho: ComplexMatrix) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(9)


def unvec(v: np.ndarray) -> ComplexMatrix:
    return np.asarray(v, dtype=complex).reshape(3, 3)


# Left/right multiplication superoperators for the transition ops.
LEFT_SUPER = {name: np.kron(op, IDENT) for name, op in TRANSITION_OPS.items()}
RIGHT_SUPER = {name: np.kron(IDENT, op.T) for name, op in TRANSITION_OPS.items()}

TRACE_IDX = np.array([0, 4, 8])  # diagonal positions in the vec layout


def left_super(op: ComplexMatrix) -> np.ndarray:
    return np.kron(np.asarray(op, dtype=complex), IDENT)


def right_super(op: ComplexMatrix) -> np.ndarray:
    return np.kron(IDENT, np.asarray(op, dtype=complex).T)


class ModelContext:
    """Cached piecewise-exponential propagation for one emitter model.

    Outside pulse supports the Liouvillian is constant, so the transfer
    operator over a gap is a single matrix exponential; inside a pulse we
    substep with the exponential midpoint rule at resolution dt_fine. Transfer
    matrices are cached keyed on the (rounded) interval, which makes repeated
    sweeps over the same quadrature grid cheap.
    """

    def __init__(self, model: EmitterModel, dt_fine: float):
        if dt_fine <= 0:
            raise DataError("dt_fine must be positive")
        self.model = model
        self.dt_fine = dt_fine
        self.l_free = build_liouvillian(model, _free_probe_time(model))
        self._gap_cache: dict[int, np.ndarray] = {}
        self._interval_cache: dict[tuple[int, int], np.ndarray] = {}
        self._traj_cache: dict[int, tuple[float, np.ndarray]] = {}

    def _key(self, t: float) -> int:
        return round(t / self.dt_fine * 4096)

    def _free_transfer(self, delta: float) -> np.ndarray:
        k = self._key(delta)
        got = self._gap_cache.get(k)
        if got is None:
            got = matrix_exp(self.l_free * delta)
            self._gap_cache[k] = got
        return got

    def _pulsed_transfer(self, a: float, b: float) -> np.ndarray:
        key = (self._key(a), self._key(b))
        got = self._interval_cache.get(key)
        if got is None:
            # resolve the envelope even when a pulse is narrower than dt_fine
            widths = [p.width for p in self.model.pulses
                      if p.support()[1] > a and p.support()[0] < b]
            step_cap = min([self.dt_fine] + [w / 8.0 for w in widths])
            n = max(1, math.ceil((b - a) / step_cap - 1e-9))
            edges = np.linspace(a, b, n + 1)
            got = np.eye(9, dtype=complex)
            for k in range(n):
                mid = 0.5 * (edges[k] + edges[k + 1])
                step = matrix_exp(build_liouvillian(self.model, mid) * (edges[k + 1] - edges[k]))
                got = step @ got
            self._interval_cache[key] = got
        return got

    def _segments(self, a: float, b: float):
        """Split [a, b] at pulse-support edges, tagging pulsed pieces."""
        cuts = {a, b}
        for lo, hi in self.model.pulse_supports():
            if lo > a and lo < b:
                cuts.add(lo)
            if hi > a and hi < b:
                cuts.add(hi)
        edges = sorted(cuts)
        for lo, hi in zip(edges[:-1], edges[1:]):
            yield lo, hi, not self.model.is_pulse_free(lo, hi)

    def advance(self, states: np.ndarray, a: float, b: float) -> np.ndarray:
        """Propagate vec-state columns from time a to b (a <= b)."""
        if b < a - 1e-12:
            raise DataError(f"cannot propagate backwards from {a} to {b}")
        out = states
        for lo, hi, pulsed in self._segments(a, b):
            if hi - lo <= 1e-15:
                continue
            tr = self._pulsed_transfer(lo, hi) if pulsed else self._free_transfer(hi - lo)
            out = tr @ out
        return out

    def state_at(self, t: float) -> np.ndarray:
        """vec of rho(t) evolved from the model's initial state at t=0."""
        key = self._key(t)
        hit = self._traj_cache.get(key)
        if hit is None:
            earlier = [k for k in self._traj_cache if k <= key]
            if earlier:
                t0, v0 = self._traj_cache[max(earlier)]
            else:
                t0, v0 = 0.0, vec(self.model.initial_density())
            got = self.advance(v0.reshape(9, 1), t0, t).reshape(9)
            self._traj_cache[key] = (t, got)
            return got
        return hit[1]

    def population(self, t: float, op_name: str) -> float:
        """<op^dag op>(t) for a transition operator label ("B" or "X")."""
        op = TRANSITION_OPS[op_name]
        rho = unvec(self.state_at(t))
        return float(np.real(np.trace(op.conj().T @ op @ rho)))


def _free_probe_time(model: EmitterModel) -> float:
    """A time safely outside every pulse support."""
    t = 0.0
    supports = model.pulse_supports()
    for _ in range(len(supports) + 1):
        if all(not (lo <= t < hi) for lo, hi in supports):
            return t
        t = max(hi for _, hi in supports) + 1.0
    return t


def propagate(
    state: ComplexMatrix,
    model: EmitterModel,
    t0: float,
    t1: float,
    grid_density: int = 600,
    bin_width: float | None = None,
) -> ComplexMatrix:
    """Evolve a 3x3 density matrix from t0 to t1 under the model's master
    equation. grid_density counts substeps per bin_width (default: per unit
    of the interval if bin_width is not given).
    """
    ref = bin_width if bin_width is not None else max(t1 - t0, 1e-12)
    ctx = ModelContext(model, dt_fine=ref / grid_density)
    out = ctx.advance(vec(np.asarray(state, dtype=complex)).reshape(9, 1), t0, t1)
    return unvec(out.reshape(9))


def cascade_populations(model: EmitterModel, t: float) -> tuple[float, float]:
    """Closed-form (P_B, P_X) for free decay from |B> — the textbook cascade.

    Used as an oracle in tests; assumes no pulses and gamma_b != gamma_x.
    """
    gb, gx = model.gamma_b, model.gamma_x
    pb = math.exp(-gb * t)
    px = gb / (gx - gb) * (math.exp(-gb * t) - math.exp(-gx * t))
    return pb, px
