"""Event-level Monte Carlo of the coincidence experiment.

Pairs are drawn from the sampled spectrum, split on an ideal 50/50
beamsplitter, analysed with the exact joint polarizer statistics of the
two-photon amplitude, detected with finite efficiency and jitter, and mixed
with delay-uniform accidental coincidences. Generation runs in fixed-size
chunks; chunk ``i`` uses ``SeedSequence(seed, spawn_key=(i,))`` with PCG64,
so results do not depend on the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analytics import SpectralFilter, offset_to_wavelength
from .optics import FibreParams, analyzer_vector, outcome_probabilities
from .state import ZERO_RATE, BiphotonAmplitude

RNG_ALGORITHM = "numpy PCG64 via SeedSequence(seed, spawn_key=(chunk,))"
DEFAULT_CHUNK = 1 << 16
MIN_EVENTS = 100


class LowStatisticsError(RuntimeError):
    pass


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class DetectionParams:
    eta1: float = 1.0
    eta2: float = 1.0
    jitter_sigma: float = 0.0
    # Accidentals relative to true coincidences at the fringe maximum.
    accidental_fraction: float = 0.0
    coincidence_window: float = 20e-9

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.jitter_sigma < 0 or self.accidental_fraction < 0 or self.coincidence_window <= 0:
            raise ValueError("detection parameters must be non-negative")


@dataclass(frozen=True)
class Setup:
    """Analyzer angles plus optional monochromator, fibre, or fixed offset.

    ``omega`` selects a single grid node (an infinitely narrow monochromator).
    """

    theta1: float
    theta2: float
    filter: Optional[SpectralFilter] = None
    fibre: Optional[FibreParams] = None
    omega: Optional[float] = None


@dataclass
class Events:
    """Columnar event records.

    ``pass1``/``pass2`` are true when the photon got through its analyzer (and
    the monochromator, port 1) and was registered by the detector. ``omega``
    and ``accidental`` are latent truth for diagnostics only.
    """

    t1: np.ndarray
    t2: np.ndarray
    pass1: np.ndarray
    pass2: np.ndarray
    omega: np.ndarray
    accidental: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t1)

    @property
    def delay(self) -> np.ndarray:
        return self.t2 - self.t1

    @property
    def coincident(self) -> np.ndarray:
        return self.pass1 & self.pass2

    def subset(self, mask) -> "Events":
        return Events(self.t1[mask], self.t2[mask], self.pass1[mask], self.pass2[mask],
                      self.omega[mask], self.accidental[mask], dict(self.meta))

    @classmethod
    def concat(cls, parts: Sequence["Events"], meta: dict) -> "Events":
        cols = [np.concatenate([getattr(p, n) for p in parts])
                for n in ("t1", "t2", "pass1", "pass2", "omega", "accidental")]
        return cls(*cols, meta=meta)


@dataclass(frozen=True)
class MCAHistogram:
    bin_width: float
    origin: float
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(len(self.counts)) + 0.5) * self.bin_width

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __iter__(self):
        return iter((self.value, self.stderr))


class _Tables:
    """Per-node lookup tables shared by all chunks."""

    def __init__(self, state: BiphotonAmplitude, setup: Setup, det: DetectionParams):
        g = state.grid
        dens = state.density()
        probs = outcome_probabilities(state, setup.theta1, setup.theta2)
        if setup.omega is not None:
            k = g.index_of(setup.omega)
            if not dens[k] / state.ref_density > ZERO_RATE:
                raise SamplingError(f"pair density vanishes at omega={setup.omega!r}")
            cdf = np.zeros(g.n_points)
            cdf[k:] = 1.0
        else:
            w = g.weights * dens
            cdf = np.cumsum(w)
            if not (np.isfinite(cdf[-1]) and cdf[-1] > 0):
                raise SamplingError("spectrum has no weight")
            cdf /= cdf[-1]
        live = cdf > np.concatenate([[0.0], cdf[:-1]])
        p = probs[live]
        if not (np.all(np.isfinite(p)) and np.all(p >= -1e-12)
                and np.allclose(p.sum(axis=1), 1.0, atol=1e-9)):
            raise SamplingError("invalid joint outcome probabilities (underflow?)")
        self.cdf = cdf
        self.joint_cdf = np.cumsum(np.nan_to_num(probs), axis=1)
        # single-photon marginals for accidentals
        v1, v2 = analyzer_vector(setup.theta1), analyzer_vector(setup.theta2)
        with np.errstate(invalid="ignore", divide="ignore"):
            m1 = np.sum(np.abs(np.einsum("p,kpq->kq", v1, state.amps)) ** 2, axis=1) / dens
            m2 = np.sum(np.abs(np.einsum("kpq,q->kp", state.amps, v2)) ** 2, axis=1) / dens
        self.marg1 = np.nan_to_num(m1)
        self.marg2 = np.nan_to_num(m2)
        if setup.filter is not None:
            lam = offset_to_wavelength(g.omega, state.lambda0)
            self.trans1 = setup.filter.transmission(lam)
        else:
            self.trans1 = np.ones(g.n_points)
        self.omega = g.omega
        self.delay_scale = setup.fibre.scale if setup.fibre is not None else 0.0


def _chunk(tables: _Tables, det: DetectionParams, seed: int, index: int, n: int,
           chunk_size: int, pair_rate: float) -> Events:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))
    start = index * chunk_size / pair_rate
    span = n / pair_rate
    t0 = start + np.sort(rng.random(n)) * span
    k = np.searchsorted(tables.cdf, rng.random(n), side="right")
    k = np.minimum(k, len(tables.cdf) - 1)
    split = rng.random(n) < 0.5
    k, t0 = k[split], t0[split]
    m = len(k)
    outcome = (rng.random(m)[:, None] >= tables.joint_cdf[k]).sum(axis=1)
    outcome = np.minimum(outcome, 3)
    pol1 = outcome < 2
    pol2 = (outcome % 2) == 0
    filt = rng.random(m) < tables.trans1[k]
    d1 = rng.random(m) < det.eta1
    d2 = rng.random(m) < det.eta2
    omega = tables.omega[k]
    t1 = t0 + det.jitter_sigma * rng.standard_normal(m)
    t2 = t0 + tables.delay_scale * omega + det.jitter_sigma * rng.standard_normal(m)
    true = Events(t1, t2, pol1 & filt & d1, pol2 & d2, omega, np.zeros(m, dtype=bool))

    # Accidentals: photon 1 from one pair, photon 2 from an unrelated pair,
    # each analysed with its own single-photon marginal. 2*f candidates per
    # split pair puts f times the maximal true coincidence count on top.
    n_acc = rng.poisson(2.0 * det.accidental_fraction * m) if m else 0
    if n_acc == 0:
        return true
    i = k[rng.integers(0, m, n_acc)]
    j = k[rng.integers(0, m, n_acc)]
    p1 = ((rng.random(n_acc) < tables.marg1[i]) & (rng.random(n_acc) < tables.trans1[i])
          & (rng.random(n_acc) < det.eta1))
    p2 = (rng.random(n_acc) < tables.marg2[j]) & (rng.random(n_acc) < det.eta2)
    ta = start + rng.random(n_acc) * span
    tb = ta + (rng.random(n_acc) - 0.5) * det.coincidence_window
    acc = Events(ta, tb, p1, p2, tables.omega[i], np.ones(n_acc, dtype=bool))
    return Events.concat([true, acc], {})


def sample_pairs(state: BiphotonAmplitude, n: int, setup: Setup,
                 det: DetectionParams = DetectionParams(), seed: int = 0, *,
                 workers: int = 1, chunk_size: int = DEFAULT_CHUNK,
                 pair_rate: float = 1e5) -> Events:
    """Simulate ``n`` emitted pairs; returns split-pair records plus accidentals.

    Pairs that leave through the same beamsplitter port are discarded.
    In fibre mode t2 - t1 = 2 k2 z Omega (plus jitter), Omega being the offset
    of the port-1 photon.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tables = _Tables(state, setup, det)
    sizes = [min(chunk_size, n - s) for s in range(0, n, chunk_size)]
    jobs = [(tables, det, seed, i, size, chunk_size, pair_rate) for i, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _chunk(*a), jobs))
    else:
        parts = [_chunk(*a) for a in jobs]
    meta = {"rng": RNG_ALGORITHM, "seed": seed, "chunk_size": chunk_size, "n_pairs": n}
    return Events.concat(parts, meta)


def tac_histogram(events: Events, bin_width: float, range_: float) -> MCAHistogram:
    """Histogram of t2 - t1 for coincident events with |t2 - t1| <= range_.

    Bins are centred on integer multiples of ``bin_width``.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    half = int(np.ceil(range_ / bin_width - 0.5 - 1e-9)) if range_ > 0 else 0
    half = max(half, 0)
    origin = -(half + 0.5) * bin_width
    d = events.delay[events.coincident]
    d = d[np.abs(d) <= range_]
    idx = np.floor((d - origin) / bin_width).astype(int)
    idx = np.clip(idx, 0, 2 * half)
    counts = np.bincount(idx, minlength=2 * half + 1)
    return MCAHistogram(bin_width, origin, counts)


def post_select_window(events: Events, tau_center: float, width: float) -> Events:
    """Keep events whose delay lies within width/2 of tau_center."""
    if not width > 0:
        raise ValueError("width must be positive")
    return events.subset(np.abs(events.delay - tau_center) <= width / 2.0)


def _check_counts(*sets: Events) -> None:
    for ev in sets:
        if len(ev) < MIN_EVENTS:
            raise LowStatisticsError(f"only {len(ev)} events in a setting (need {MIN_EVENTS})")


def coincidence_fraction(events: Events, n_pairs: int) -> Estimate:
    """Coincidences per emitted pair, binomial standard error."""
    p = np.count_nonzero(events.coincident) / n_pairs
    return Estimate(p, float(np.sqrt(p * (1 - p) / n_pairs)))


def estimate_visibility(event_sets: Sequence[Events],
                        theta2_values: Optional[Sequence[float]] = None) -> Estimate:
    """Fringe visibility (Nmax - Nmin)/(Nmax + Nmin) from one event set per
    analyzer setting, Poisson errors propagated."""
    if theta2_values is not None and len(theta2_values) != len(event_sets):
        raise ValueError("one event set per theta2 value")
    if len(event_sets) < 2:
        raise ValueError("need at least two settings")
    _check_counts(*event_sets)
    counts = np.array([np.count_nonzero(e.coincident) for e in event_sets], dtype=float)
    hi, lo = counts.max(), counts.min()
    s = hi + lo
    if s == 0:
        raise LowStatisticsError("no coincidences in any setting")
    v = (hi - lo) / s
    err = 2.0 * np.sqrt(lo * hi * hi + hi * lo * lo) / s ** 2
    if err == 0:
        err = 2.0 * hi / s ** 2  # one-count resolution when the minimum is empty
    return Estimate(float(v), float(err))


def estimate_singlet_fraction(events_pp: Events, events_pm: Events) -> Estimate:
    """Singlet fraction N(45,-45) / (N(45,45) + N(45,-45)), binomial error."""
    _check_counts(events_pp, events_pm)
    a = np.count_nonzero(events_pp.coincident)
    b = np.count_nonzero(events_pm.coincident)
    n = a + b
    if n == 0:
        raise LowStatisticsError("no coincidences in either setting")
    f = b / n
    err = np.sqrt(f * (1 - f) / n)
    if err == 0:
        err = 1.0 / n
    return Estimate(float(f), float(err))


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k} = {meta[k]}\n" for k in sorted(meta))


def write_events_csv(events: Events, fh, meta: Optional[dict] = None) -> None:
    fh.write(_meta_lines({**events.meta, **(meta or {})}))
    fh.write("t1_s,t2_s,pass1,pass2,accidental\n")
    for row in zip(events.t1, events.t2, events.pass1, events.pass2, events.accidental):
        fh.write(f"{row[0]:.9g},{row[1]:.9g},{int(row[2])},{int(row[3])},{int(row[4])}\n")


def write_histogram_csv(hist: MCAHistogram, fh, meta: Optional[dict] = None) -> None:
    fh.write(_meta_lines(meta or {}))
    fh.write("bin_center_s,count\n")
    for c, n in zip(hist.centers, hist.counts):
        fh.write(f"{c:.9g},{int(n)}\n")
