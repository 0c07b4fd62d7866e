"""Polarization optics and fibre propagation acting on a BiphotonAmplitude."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .state import H, V, BiphotonAmplitude, OutOfGridError  # noqa: F401


class FibreRegimeWarning(UserWarning):
    """The dispersive time map is not well resolved by the detectors."""


@dataclass(frozen=True)
class JonesElement:
    m: np.ndarray
    kind: str = "unitary"

    def __post_init__(self):
        m = np.array(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("Jones matrix must be 2x2")
        if self.kind not in ("unitary", "projector"):
            raise ValueError(f"unknown kind {self.kind!r}")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def __matmul__(self, other: "JonesElement") -> "JonesElement":
        kind = "unitary" if self.kind == other.kind == "unitary" else "projector"
        return JonesElement(self.m @ other.m, kind)


def rotation(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def analyzer_vector(theta) -> np.ndarray:
    """Unit transmission vector(s) (cos theta, sin theta)."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def polarizer(theta: float) -> JonesElement:
    v = analyzer_vector(theta)
    return JonesElement(np.outer(v, v), "projector")


def hwp(alpha: float) -> JonesElement:
    """Half-wave plate, fast axis at alpha: R(a) diag(1, -1) R(-a)."""
    return JonesElement(rotation(alpha) @ np.diag([1.0, -1.0]) @ rotation(-alpha))


def qwp(alpha: float) -> JonesElement:
    """Quarter-wave plate, fast axis at alpha: R(a) diag(1, i) R(-a)."""
    return JonesElement(rotation(alpha) @ np.diag([1.0, 1j]) @ rotation(-alpha))


def random_su2(rng: np.random.Generator) -> JonesElement:
    """Haar-random SU(2) element."""
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    m = np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])
    return JonesElement(m)


def apply_common_path(state: BiphotonAmplitude, u: JonesElement) -> BiphotonAmplitude:
    """Same element on both photons (shared spatial mode): A -> u A u^T."""
    if u.kind != "unitary":
        raise ValueError("only unitary elements can act before the beamsplitter")
    amps = np.einsum("ij,kjl,ml->kim", u.m, state.amps, u.m)
    return state.replace(amps)


def compensator(state: BiphotonAmplitude, tau_c: float) -> BiphotonAmplitude:
    """Birefringent plate adding a signed delay tau_c between the cross terms.

    A_HV picks up e^{+i Omega tau_c}, A_VH picks up e^{-i Omega tau_c};
    tau_c = -tau0 is the usual e-o compensation, +tau0 doubles the delay.
    """
    phase = np.exp(1j * state.omega * tau_c)
    amps = state.amps.copy()
    amps[:, H, V] *= phase
    amps[:, V, H] *= np.conj(phase)
    return state.replace(amps)


def _projection_amp(amp: np.ndarray, theta1, theta2) -> np.ndarray:
    v1 = analyzer_vector(theta1)
    v2 = analyzer_vector(theta2)
    return np.einsum("...p,...pq,...q->...", v1, amp, v2)


def coincidence_projection(state: BiphotonAmplitude, theta1, theta2, omega: float):
    """Coincidence rate behind the 50/50 beamsplitter with analyzers theta1
    (port 1, photon at w0 + omega) and theta2 (port 2).

    |v1^T A(omega) v2|^2, scaled so the uncompensated source at omega = 0 and
    45/45 degrees gives 1. theta1 and theta2 broadcast.
    """
    k = state.grid.index_of(omega)
    amp = _projection_amp(state.amps[k], theta1, theta2)
    out = np.abs(amp) ** 2 / (state.ref_density / 2.0)
    return out[()] if np.ndim(out) == 0 else out


def projection_spectrum(state: BiphotonAmplitude, theta1: float, theta2: float) -> np.ndarray:
    """coincidence_projection at every grid node."""
    v1 = analyzer_vector(theta1)
    v2 = analyzer_vector(theta2)
    amp = np.einsum("p,kpq,q->k", v1, state.amps, v2)
    return np.abs(amp) ** 2 / (state.ref_density / 2.0)


def outcome_probabilities(state: BiphotonAmplitude, theta1: float, theta2: float) -> np.ndarray:
    """Joint analyzer outcome probabilities per node, shape (n, 4).

    Columns: (pass, pass), (pass, block), (block, pass), (block, block).
    Rows where the pair density vanishes are NaN.
    """
    v1, v2 = analyzer_vector(theta1), analyzer_vector(theta2)
    w1, w2 = analyzer_vector(theta1 + np.pi / 2), analyzer_vector(theta2 + np.pi / 2)
    a = state.amps
    cols = [np.abs(np.einsum("p,kpq,q->k", x, a, y)) ** 2
            for x, y in ((v1, v2), (v1, w2), (w1, v2), (w1, w2))]
    p = np.stack(cols, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return p / state.density()[:, None]


@dataclass(frozen=True)
class FibreParams:
    """Fibre GVD coefficient k2 (s^2/m) and length z (m)."""

    k2: float
    z: float

    @property
    def scale(self) -> float:
        """Time-map factor 2 k2 z (s^2): tau = scale * Omega."""
        return 2.0 * self.k2 * self.z

    @classmethod
    def from_lab_units(cls, k2_s2_per_cm: float, z_km: float) -> "FibreParams":
        return cls(k2_s2_per_cm * 100.0, z_km * 1e3)


def singlet_delay(fibre: FibreParams, tau0: float) -> float:
    """Arrival-time difference pi k2 z / tau0 that selects the singlet."""
    return np.pi * abs(fibre.k2 * fibre.z) / tau0


@dataclass(frozen=True)
class TimeAmplitudeCurve:
    """Delay density P(tau) on the mapped grid, with trapezoid weights."""

    tau: np.ndarray
    density: np.ndarray
    weights: np.ndarray = field(repr=False)
    singlet_delays: tuple
    anomalous: bool = False

    def integral(self) -> float:
        return float(np.sum(self.weights * self.density))


def fibre_time_density(state: BiphotonAmplitude, fibre: FibreParams,
                       jitter_sigma: float = 0.0) -> TimeAmplitudeCurve:
    """Arrival-time-difference density after dispersive propagation.

    Uses the far-field map tau = 2 k2 z Omega, P(tau) = S(tau / 2k2z) / |2k2z|.
    Negative k2*z (anomalous dispersion) mirrors the axis and sets ``anomalous``.
    """
    scale = fibre.scale
    if not np.isfinite(scale) or scale == 0.0:
        raise ValueError("fibre k2*z must be non-zero")
    td = singlet_delay(fibre, state.tau0)
    spread = abs(scale) * np.pi / state.tau0
    if jitter_sigma > 0 and spread < 10.0 * jitter_sigma:
        warnings.warn(f"mapped spread {spread:.3g} s is below 10x jitter {jitter_sigma:.3g} s",
                      FibreRegimeWarning, stacklevel=2)
    tau = scale * state.omega
    density = state.density() / abs(scale)
    weights = state.grid.weights * abs(scale)
    if scale < 0:
        tau, density, weights = tau[::-1], density[::-1], weights[::-1]
    return TimeAmplitudeCurve(tau, density, weights, (-td, td), scale < 0)


def coincidence_projection_polarized_time(state: BiphotonAmplitude, theta1, theta2,
                                          fibre: FibreParams, tau: float):
    """Polarization-resolved coincidence rate at arrival delay tau (t2 - t1)."""
    if fibre.scale == 0.0:
        raise ValueError("fibre k2*z must be non-zero")
    return coincidence_projection(state, theta1, theta2, tau / fibre.scale)
