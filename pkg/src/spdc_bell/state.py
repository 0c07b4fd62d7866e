"""Two-photon polarization-frequency state of collinear type-II SPDC.

The biphoton is stored as a 2x2 complex matrix A_pq(Omega) per sample of a
symmetric frequency-offset grid: entry (p, q) is the amplitude for a photon
with polarization p at w0 + Omega and a photon with polarization q at
w0 - Omega (index 0 = H, 1 = V). The vacuum term never contributes to
coincidences and is not represented.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import bisect

H, V = 0, 1

# Default degenerate wavelength and e-o delay (63 fs puts the singlet
# points at ~695.5 / 708.6 nm around 702 nm).
DEFAULT_LAMBDA0 = 702e-9
DEFAULT_TAU0 = 63e-15
DEFAULT_N_POINTS = 2049
DEFAULT_HALF_EXTENT = 2.0 * np.pi

# Pair rates below this (relative to the source peak) count as spectral zeros.
ZERO_RATE = 1e-24

_SQRT_HALF = np.sqrt(0.5)


class OutOfGridError(ValueError):
    """Frequency offset outside the sampled grid (or not on a grid node)."""


@dataclass(frozen=True)
class SourceParams:
    """Source configuration.

    Either ``tau0`` is given directly, or the crystal's inverse-group-velocity
    difference ``D`` (s/m) and length ``L`` (m), from which tau0 = D*L/2.
    """

    lambda0: float = DEFAULT_LAMBDA0
    tau0: Optional[float] = None
    D: Optional[float] = None
    L: Optional[float] = None

    def __post_init__(self):
        if (self.D is None) != (self.L is None):
            raise ValueError("D and L must be given together")
        if self.D is not None:
            derived = self.D * self.L / 2.0
            if self.tau0 is None:
                object.__setattr__(self, "tau0", derived)
            elif self.tau0 != derived:
                raise ValueError(f"tau0={self.tau0!r} inconsistent with D*L/2={derived!r}")
        if self.tau0 is None:
            object.__setattr__(self, "tau0", DEFAULT_TAU0)
        if not (np.isfinite(self.lambda0) and self.lambda0 > 0):
            raise ValueError("lambda0 must be positive")
        if not (np.isfinite(self.tau0) and self.tau0 > 0):
            raise ValueError("tau0 must be positive")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform offset grid symmetric about zero.

    ``half_extent`` is the largest |Omega * tau0| covered; ``n_points`` must be
    odd so that Omega = 0 is a node. Negative nodes are exact negations of the
    positive ones.
    """

    n_points: int = DEFAULT_N_POINTS
    half_extent: float = DEFAULT_HALF_EXTENT
    tau0: float = DEFAULT_TAU0
    omega: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be an odd positive integer, got {self.n_points!r}")
        if not (self.half_extent > 0 and self.tau0 > 0):
            raise ValueError("half_extent and tau0 must be positive")
        m = self.n_points // 2
        pos = np.arange(1, m + 1) * self.step
        omega = np.concatenate([-pos[::-1], [0.0], pos])
        omega.flags.writeable = False
        object.__setattr__(self, "omega", omega)

    @property
    def step(self) -> float:
        m = self.n_points // 2
        return self.half_extent / self.tau0 / m if m else 0.0

    @property
    def center(self) -> int:
        return self.n_points // 2

    @property
    def x(self) -> np.ndarray:
        """Samples in units of Omega * tau0."""
        return self.omega * self.tau0

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n_points, self.step)
        w[0] = w[-1] = self.step / 2.0
        return w

    def contains(self, omega: float) -> bool:
        lim = self.omega[-1]
        return bool(-lim * (1 + 1e-12) <= omega <= lim * (1 + 1e-12))

    def index_of(self, omega: float, rtol: float = 1e-6) -> int:
        """Index of the node at ``omega``; raises if off-grid by more than rtol*step."""
        if not np.isfinite(omega) or not self.contains(omega):
            raise OutOfGridError(f"omega={omega!r} outside grid range +-{self.omega[-1]!r}")
        k = int(np.rint(omega / self.step)) + self.center
        k = min(max(k, 0), self.n_points - 1)
        if abs(self.omega[k] - omega) > rtol * self.step:
            raise OutOfGridError(f"omega={omega!r} is not a grid node (nearest {self.omega[k]!r})")
        return k

    def nearest_index(self, omega: float) -> int:
        if not np.isfinite(omega) or not self.contains(omega):
            raise OutOfGridError(f"omega={omega!r} outside grid range +-{self.omega[-1]!r}")
        k = int(np.rint(omega / self.step)) + self.center
        return min(max(k, 0), self.n_points - 1)


@dataclass(frozen=True)
class BiphotonAmplitude:
    """Sampled two-photon amplitude, shape (n_points, 2, 2).

    ``ref_density`` is sum_pq |A_pq(0)|^2 of the uncompensated source this
    state was built from; rates are quoted relative to it.
    """

    grid: FrequencyGrid
    amps: np.ndarray = field(repr=False)
    lambda0: float = DEFAULT_LAMBDA0
    ref_density: float = 2.0

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.grid.n_points, 2, 2):
            raise ValueError(f"amps shape {amps.shape} does not match grid")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def tau0(self) -> float:
        return self.grid.tau0

    def density(self) -> np.ndarray:
        """sum_pq |A_pq(Omega)|^2 at every node."""
        return np.sum(np.abs(self.amps) ** 2, axis=(1, 2))

    def replace(self, amps: np.ndarray) -> "BiphotonAmplitude":
        return BiphotonAmplitude(self.grid, amps, self.lambda0, self.ref_density)

    def at(self, omega: float) -> np.ndarray:
        """2x2 amplitude at ``omega``, linearly interpolated between nodes."""
        g = self.grid
        if not np.isfinite(omega) or not g.contains(omega):
            raise OutOfGridError(f"omega={omega!r} outside grid range +-{g.omega[-1]!r}")
        pos = omega / g.step + g.center
        k = int(np.floor(pos))
        if k >= g.n_points - 1:
            return self.amps[-1].copy()
        k = max(k, 0)
        t = pos - k
        if t == 0.0:
            return self.amps[k].copy()
        return (1.0 - t) * self.amps[k] + t * self.amps[k + 1]

    def exchange_asymmetry(self) -> float:
        """max |A(Omega) - A(-Omega)^T| over the grid."""
        mirrored = self.amps[::-1].transpose(0, 2, 1)
        return float(np.max(np.abs(self.amps - mirrored)))


@dataclass(frozen=True)
class BellWeights:
    """Bell-basis fractions at one offset.

    Fractions are None at spectral zeros, where they are undefined.
    """

    w_phi_plus: Optional[float]
    w_phi_minus: Optional[float]
    w_psi_plus: Optional[float]
    w_psi_minus: Optional[float]
    pair_rate: float

    @property
    def defined(self) -> bool:
        return self.w_psi_minus is not None


@dataclass(frozen=True)
class CoincidenceCurve:
    """Sampled (abscissa, rate) series.

    kind is one of 'omega', 'lambda', 'theta', 'tau'.
    """

    kind: str
    x: np.ndarray
    rate: np.ndarray
    label: str = ""
    note: str = ""

    def __post_init__(self):
        if self.kind not in ("omega", "lambda", "theta", "tau"):
            raise ValueError(f"unknown abscissa kind {self.kind!r}")
        x = np.asarray(self.x, dtype=float)
        rate = np.asarray(self.rate, dtype=float)
        if x.shape != rate.shape or x.ndim != 1:
            raise ValueError("x and rate must be 1-d arrays of equal length")
        d = np.diff(x)
        if x.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("abscissa must be strictly monotone")
        if np.any(rate < 0):
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "rate", rate)


def sinc_amplitude(x):
    """sin(x)/x with the value 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0.0, 1.0, x)
    out = np.where(x == 0.0, 1.0, np.sin(safe) / safe)
    return out[()] if out.ndim == 0 else out


def sinc2_half_max(xtol: float = 1e-14) -> float:
    """Positive x where sinc^2(x) = 1/2, by bisection on (0, pi/2)."""
    return bisect(lambda x: sinc_amplitude(x) ** 2 - 0.5, 0.5, np.pi / 2, xtol=xtol)


def make_spdc_state(src: SourceParams, grid: FrequencyGrid | None = None,
                    normalize: bool = True) -> BiphotonAmplitude:
    """Build the uncompensated type-II amplitude.

    A_HV = F e^{+i Omega tau0}, A_VH = F e^{-i Omega tau0}, A_HH = A_VV = 0,
    with F = sinc(Omega tau0). With ``normalize`` the trapezoidal norm is 1.
    """
    if grid is None:
        grid = FrequencyGrid(tau0=src.tau0)
    if grid.n_points < 3:
        raise ValueError("state needs at least 3 grid points")
    if grid.tau0 != src.tau0:
        raise ValueError("grid was built for a different tau0")
    x = grid.x
    F = sinc_amplitude(x)
    phase = np.exp(1j * x)
    amps = np.zeros((grid.n_points, 2, 2), dtype=complex)
    amps[:, H, V] = F * phase
    amps[:, V, H] = F * np.conj(phase)
    ref = 2.0
    if normalize:
        norm = np.sum(grid.weights * np.sum(np.abs(amps) ** 2, axis=(1, 2)))
        amps /= np.sqrt(norm)
        ref = float(2.0 / norm)
    return BiphotonAmplitude(grid, amps, src.lambda0, ref)


def total_pair_rate(state: BiphotonAmplitude) -> float:
    """Trapezoidal integral of sum_pq |A_pq|^2 over the grid."""
    return float(np.sum(state.grid.weights * state.density()))


def pair_rate_spectrum(state: BiphotonAmplitude) -> CoincidenceCurve:
    """Pair density versus Omega, normalized to its maximum."""
    s = state.density()
    peak = s.max()
    rate = s / peak if peak > 0 else s
    return CoincidenceCurve("omega", state.omega.copy(), rate, "pair_rate", "peak-normalized")


def bell_fractions(amp: np.ndarray, ref_density: float) -> BellWeights:
    """Bell content of one 2x2 amplitude matrix."""
    phi_p = (amp[H, H] + amp[V, V]) * _SQRT_HALF
    phi_m = (amp[H, H] - amp[V, V]) * _SQRT_HALF
    psi_p = (amp[H, V] + amp[V, H]) * _SQRT_HALF
    psi_m = (amp[H, V] - amp[V, H]) * _SQRT_HALF
    w = np.abs(np.array([phi_p, phi_m, psi_p, psi_m])) ** 2
    total = float(np.sum(np.abs(amp) ** 2))
    pair_rate = total / float(ref_density)
    if pair_rate <= ZERO_RATE:
        return BellWeights(None, None, None, None, pair_rate)
    w = w / w.sum()
    return BellWeights(float(w[0]), float(w[1]), float(w[2]), float(w[3]), pair_rate)


def bell_decompose(state: BiphotonAmplitude, omega: float) -> BellWeights:
    """Bell fractions and relative pair rate at offset ``omega`` (rad/s).

    Off-node offsets use linear interpolation of the complex amplitudes.
    """
    return bell_fractions(state.at(omega), state.ref_density)


def bell_spectrum(state: BiphotonAmplitude) -> dict[str, np.ndarray]:
    """Bell fractions at every grid node (NaN-free: zeros get fraction 0 and
    are flagged in the 'defined' mask)."""
    a = state.amps
    comps = np.stack([
        a[:, H, H] + a[:, V, V],
        a[:, H, H] - a[:, V, V],
        a[:, H, V] + a[:, V, H],
        a[:, H, V] - a[:, V, H],
    ]) * _SQRT_HALF
    w = np.abs(comps) ** 2
    total = state.density()
    rate = total / state.ref_density
    defined = rate > ZERO_RATE
    w = np.divide(w, w.sum(axis=0), out=np.zeros_like(w), where=defined)
    return {
        "w_phi_plus": w[0], "w_phi_minus": w[1],
        "w_psi_plus": w[2], "w_psi_minus": w[3],
        "pair_rate": rate, "defined": defined,
    }


def singlet_offset(tau0: float) -> float:
    """Offset pi / (2 tau0) at which the source is a pure singlet."""
    return np.pi / (2.0 * tau0)


def write_state_csv(state: BiphotonAmplitude, fh) -> None:
    """Dump the amplitude as CSV (omega plus re/im of HH, HV, VH, VV)."""
    fh.write(f"# lambda0_m = {state.lambda0!r}\n# tau0_s = {state.tau0!r}\n")
    fh.write("omega_rad_s,re_hh,im_hh,re_hv,im_hv,re_vh,im_vh,re_vv,im_vv\n")
    for w, a in zip(state.omega, state.amps):
        vals = [w]
        for p, q in ((H, H), (H, V), (V, H), (V, V)):
            vals += [a[p, q].real, a[p, q].imag]
        fh.write(",".join(f"{v:.9g}" for v in vals) + "\n")
