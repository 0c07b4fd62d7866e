"""Closed-form coincidence curves, monochromator convolution and visibility."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .optics import apply_common_path, coincidence_projection, hwp, projection_spectrum
from .state import BiphotonAmplitude, CoincidenceCurve, sinc_amplitude, singlet_offset

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
# Gaussian passbands are truncated at +-2 FWHM (~4.7 sigma).
GAUSS_TRUNCATION = 2.0


def rc_closed_form(omega_tau0, theta1, theta2):
    """sinc^2(x) [sin^2(t1 + t2) cos^2(x) + sin^2(t1 - t2) sin^2(x)]."""
    x = np.asarray(omega_tau0, dtype=float)
    return sinc_amplitude(x) ** 2 * (np.sin(theta1 + theta2) ** 2 * np.cos(x) ** 2
                                     + np.sin(theta1 - theta2) ** 2 * np.sin(x) ** 2)


def wavelength_to_offset(lam, lambda0: float):
    """Angular-frequency offset 2 pi c (1/lam - 1/lambda0) in rad/s."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or lambda0 <= 0:
        raise ValueError("wavelengths must be positive")
    out = 2.0 * np.pi * SPEED_OF_LIGHT * (1.0 / lam - 1.0 / lambda0)
    return out[()] if out.ndim == 0 else out


def offset_to_wavelength(omega, lambda0: float):
    if lambda0 <= 0:
        raise ValueError("wavelengths must be positive")
    inv = np.asarray(omega, dtype=float) / (2.0 * np.pi * SPEED_OF_LIGHT) + 1.0 / lambda0
    if np.any(inv <= 0):
        raise ValueError("offset beyond the optical frequency")
    out = 1.0 / inv
    return out[()] if out.ndim == 0 else out


def singlet_wavelengths(lambda0: float, tau0: float) -> tuple[float, float]:
    """(blue, red) wavelengths of the port-1 photon where the source is a singlet."""
    w = singlet_offset(tau0)
    return offset_to_wavelength(w, lambda0), offset_to_wavelength(-w, lambda0)


@dataclass(frozen=True)
class SpectralFilter:
    center_lambda: float
    fwhm_lambda: float
    shape: str = "rectangular"

    def __post_init__(self):
        if not self.fwhm_lambda > 0:
            raise ValueError("fwhm_lambda must be positive")
        if self.shape not in ("rectangular", "gaussian"):
            raise ValueError(f"unknown filter shape {self.shape!r}")

    @property
    def half_span(self) -> float:
        """Half-width (in wavelength) of the modeled passband support."""
        if self.shape == "rectangular":
            return self.fwhm_lambda / 2.0
        return GAUSS_TRUNCATION * self.fwhm_lambda

    def transmission(self, lam):
        lam = np.asarray(lam, dtype=float)
        d = lam - self.center_lambda
        if self.shape == "rectangular":
            return (np.abs(d) <= self.fwhm_lambda / 2.0).astype(float)
        sigma = self.fwhm_lambda * FWHM_TO_SIGMA
        t = np.exp(-0.5 * (d / sigma) ** 2)
        return np.where(np.abs(d) <= self.half_span, t, 0.0)

    def passband(self, lambda0: float, center: Optional[float] = None) -> tuple[float, float]:
        """(low, high) offset interval of the support around ``center``."""
        lc = self.center_lambda if center is None else center
        hi = wavelength_to_offset(lc - self.half_span, lambda0)
        lo = wavelength_to_offset(lc + self.half_span, lambda0)
        return lo, hi


def _cumulative(omega: np.ndarray, r: np.ndarray, a: np.ndarray) -> np.ndarray:
    # Exact integral of the piecewise-linear interpolant of r from omega[0] to a.
    h = omega[1] - omega[0]
    cum = np.concatenate([[0.0], np.cumsum(h * (r[:-1] + r[1:]) / 2.0)])
    pos = (a - omega[0]) / h
    k = np.clip(np.floor(pos).astype(int), 0, len(omega) - 2)
    t = pos - k
    return cum[k] + h * (t * r[k] + 0.5 * t * t * (r[k + 1] - r[k]))


def filtered_rates(state: BiphotonAmplitude, rates: np.ndarray, filt: SpectralFilter):
    """Integrate per-node rates through the passband swept across the grid.

    Returns (centre offsets, integrated rates); only centres whose whole
    passband lies inside the grid are kept.
    """
    omega = state.omega
    lo_lim, hi_lim = omega[0], omega[-1]
    lo, hi = filt.passband(state.lambda0)
    if lo < lo_lim or hi > hi_lim:
        raise ValueError("filter passband lies outside the frequency grid")
    lam_c = offset_to_wavelength(omega, state.lambda0)
    hi_c = wavelength_to_offset(lam_c - filt.half_span, state.lambda0)
    lo_c = wavelength_to_offset(lam_c + filt.half_span, state.lambda0)
    ok = (lo_c >= lo_lim) & (hi_c <= hi_lim)
    if not np.any(ok):
        raise ValueError("filter is wider than the frequency grid")
    centres = omega[ok]
    if filt.shape == "rectangular":
        vals = _cumulative(omega, rates, hi_c[ok]) - _cumulative(omega, rates, lo_c[ok])
    else:
        lam = offset_to_wavelength(omega, state.lambda0)
        w = state.grid.weights
        vals = np.array([
            np.sum(w * rates * SpectralFilter(lc, filt.fwhm_lambda, "gaussian").transmission(lam))
            for lc in lam_c[ok]
        ])
    return centres, np.maximum(vals, 0.0)


def _lambda_curve(state, omega, rates, label, note) -> CoincidenceCurve:
    lam = offset_to_wavelength(omega, state.lambda0)
    order = np.argsort(lam)
    return CoincidenceCurve("lambda", lam[order], rates[order], label, note)


def coincidence_spectrum(state: BiphotonAmplitude, theta1: float, theta2: float,
                         filt: Optional[SpectralFilter] = None,
                         normalize=True) -> CoincidenceCurve:
    """Coincidence rate versus monochromator wavelength (port-1 photon).

    ``filt=None`` gives the unconvolved oracle rate at every node.
    ``normalize``: True divides by the curve's own maximum, a float divides by
    that value, False leaves the raw integrated rate.
    """
    rates = projection_spectrum(state, theta1, theta2)
    omega = state.omega
    if filt is not None:
        omega, rates = filtered_rates(state, rates, filt)
    if normalize is True:
        peak = rates.max()
        rates = rates / peak if peak > 0 else rates
        note = "peak-normalized"
    elif normalize is False:
        note = "raw"
    else:
        rates = rates / float(normalize)
        note = "family-normalized"
    return _lambda_curve(state, omega, rates,
                         f"theta1={np.degrees(theta1):g},theta2={np.degrees(theta2):g}", note)


def polarization_fringe(state: BiphotonAmplitude, theta1_fixed: float,
                        theta2_sweep: Sequence[float], omega: float) -> CoincidenceCurve:
    """Rate versus theta2 at fixed theta1 and offset (relative to the source peak)."""
    th2 = np.asarray(theta2_sweep, dtype=float)
    rates = coincidence_projection(state, theta1_fixed, th2, omega)
    return CoincidenceCurve("theta", th2, np.atleast_1d(rates),
                            f"theta1={np.degrees(theta1_fixed):g}", "relative to source peak")


def visibility(curve: CoincidenceCurve) -> Optional[float]:
    """(max - min) / (max + min); None for an all-zero curve."""
    if curve.rate.size < 2:
        raise ValueError("visibility needs at least two samples")
    hi, lo = curve.rate.max(), curve.rate.min()
    if hi + lo == 0:
        return None
    return float((hi - lo) / (hi + lo))


def hwp_scan_family(state: BiphotonAmplitude, alphas: Sequence[float], theta1: float,
                    theta2: float, filt: Optional[SpectralFilter] = None) -> list[CoincidenceCurve]:
    """One spectrum per HWP angle, all divided by the family maximum."""
    raw = [coincidence_spectrum(apply_common_path(state, hwp(a)), theta1, theta2, filt,
                                normalize=False) for a in alphas]
    peak = max(c.rate.max() for c in raw)
    peak = peak if peak > 0 else 1.0
    return [CoincidenceCurve(c.kind, c.x, c.rate / peak,
                             f"alpha={np.degrees(a):g},{c.label}", "family-normalized")
            for a, c in zip(alphas, raw)]


def singlet_spread(state: BiphotonAmplitude, alphas: Sequence[float], theta1: float,
                   theta2: float) -> float:
    """Largest change across HWP angles of the unfiltered rate at +-pi/(2 tau0)."""
    w = singlet_offset(state.tau0)
    vals = np.array([[coincidence_projection(apply_common_path(state, hwp(a)), theta1, theta2, s * w)
                      for s in (-1, 1)] for a in alphas])
    return float(np.max(vals.max(axis=0) - vals.min(axis=0)))


def curve_fwhm(curve: CoincidenceCurve) -> float:
    """Full width at half maximum of a single-peaked curve (linear crossing)."""
    x, y = curve.x, curve.rate
    if x[0] > x[-1]:
        x, y = x[::-1], y[::-1]
    half = y.max() / 2.0
    above = np.nonzero(y >= half)[0]
    i, j = above[0], above[-1]
    if i == 0 or j == len(y) - 1:
        raise ValueError("curve does not fall below half maximum on both sides")
    left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
    right = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    return float(right - left)


def local_extrema(curve: CoincidenceCurve, kind: str = "max") -> np.ndarray:
    """Abscissae of interior local maxima (or minima) of a sampled curve."""
    y = curve.rate if kind == "max" else -curve.rate
    mid = (y[1:-1] >= y[:-2]) & (y[1:-1] > y[2:]) | (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return curve.x[1:-1][mid]
