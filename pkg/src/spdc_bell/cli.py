"""spdc-bell command line: analytic curves and Monte Carlo runs as CSV.

Config files are flat ``section.key = value`` lines; '#' starts a comment.
Exit codes: 0 ok, 2 usage/config, 3 domain/numeric, 4 statistics.
"""
from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analytics as an
from . import montecarlo as mc
from . import optics as op
from .state import (BiphotonAmplitude, FrequencyGrid, SourceParams, make_spdc_state,
                    singlet_offset, write_state_csv)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_STATS = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _pos_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _shape(s: str) -> str:
    if s not in ("rectangular", "gaussian"):
        raise ValueError("expected rectangular or gaussian")
    return s


def _elements(s: str) -> str:
    _parse_elements(s)
    return s


# key -> (parser, default); None default means "absent unless given".
KEYS = {
    "source.lambda0_nm": (float, 702.0),
    "source.tau0_fs": (float, None),
    "source.D_fs_per_mm": (float, None),
    "source.L_mm": (float, None),
    "grid.n_points": (_pos_int, 2049),
    "grid.half_extent_pi_units": (float, 2.0),
    "elements": (_elements, ""),
    "analyzers.theta1_deg": (float, 45.0),
    "analyzers.theta2_deg": (float, -45.0),
    "filter.center_nm": (float, 702.0),
    "filter.fwhm_nm": (float, 0.8),
    "filter.shape": (_shape, "rectangular"),
    "fibre.k2_s2_per_cm": (float, 3.2e-28),
    "fibre.z_km": (float, 1.0),
    "fringe.lambda_nm": (float, None),
    "mc.n_pairs": (_pos_int, 1_000_000),
    "mc.seed": (int, 0),
    "mc.eta1": (float, 1.0),
    "mc.eta2": (float, 1.0),
    "mc.jitter_ps": (float, 0.0),
    "mc.accidental_fraction": (float, 0.0),
    "mc.window_ns": (float, 20.0),
    "mc.bin_ns": (float, 0.1),
    "mc.range_ns": (float, 10.0),
    "mc.fibre": (lambda s: {"true": True, "false": False}[s.lower()], False),
    "mc.select_center_ns": (float, None),
    "mc.select_width_ns": (float, None),
    "mc.workers": (_pos_int, 1),
}


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values.get(key)

    @property
    def has_mc(self) -> bool:
        return any(k.startswith("mc.") for k in self.values)

    def echo(self) -> list[str]:
        return [f"{k} = {_fmt_value(self.values[k])}" for k in sorted(self.values)]


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> ScenarioConfig:
    """Parse config text; unknown keys and malformed lines raise ConfigError."""
    given = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in given:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            given[key] = KEYS[key][0](val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    dl = [k in given for k in ("source.D_fs_per_mm", "source.L_mm")]
    if any(dl) and not all(dl):
        raise ConfigError("source.D_fs_per_mm and source.L_mm must be given together")
    if all(dl) and "source.tau0_fs" in given:
        raise ConfigError("give either source.tau0_fs or (source.D_fs_per_mm, source.L_mm), not both")
    values = {}
    has_mc = any(k.startswith("mc.") for k in given)
    for key, (_, default) in KEYS.items():
        if key in given:
            values[key] = given[key]
        elif default is not None and (has_mc or not key.startswith("mc.")):
            values[key] = default
    if not all(dl) and "source.tau0_fs" not in values:
        values["source.tau0_fs"] = 63.0
    return ScenarioConfig(values)


def config_from_echo(text: str) -> ScenarioConfig:
    """Re-parse the '# config:' lines of an emitted CSV."""
    lines = [ln[len("# config: "):] for ln in text.splitlines() if ln.startswith("# config: ")]
    return parse_config("\n".join(lines))


def _parse_elements(s: str) -> list[tuple[str, float]]:
    out = []
    for item in filter(None, (p.strip() for p in s.split(","))):
        name, _, val = item.partition(":")
        if name not in ("hwp_deg", "qwp_deg", "compensator_fs") or not val:
            raise ValueError(f"bad element {item!r}")
        out.append((name, float(val)))
    return out


def build_source(cfg: ScenarioConfig) -> SourceParams:
    lam0 = cfg["source.lambda0_nm"] * 1e-9
    if cfg["source.D_fs_per_mm"] is not None:
        return SourceParams(lam0, D=cfg["source.D_fs_per_mm"] * 1e-15 / 1e-3, L=cfg["source.L_mm"] * 1e-3)
    return SourceParams(lam0, tau0=cfg["source.tau0_fs"] * 1e-15)


def build_state(cfg: ScenarioConfig) -> BiphotonAmplitude:
    src = build_source(cfg)
    grid = FrequencyGrid(cfg["grid.n_points"], cfg["grid.half_extent_pi_units"] * np.pi, src.tau0)
    state = make_spdc_state(src, grid)
    for name, val in _parse_elements(cfg["elements"]):
        if name == "hwp_deg":
            state = op.apply_common_path(state, op.hwp(np.radians(val)))
        elif name == "qwp_deg":
            state = op.apply_common_path(state, op.qwp(np.radians(val)))
        else:
            state = op.compensator(state, val * 1e-15)
    return state


def build_filter(cfg: ScenarioConfig) -> an.SpectralFilter:
    return an.SpectralFilter(cfg["filter.center_nm"] * 1e-9, cfg["filter.fwhm_nm"] * 1e-9,
                             cfg["filter.shape"])


def build_fibre(cfg: ScenarioConfig) -> op.FibreParams:
    return op.FibreParams.from_lab_units(cfg["fibre.k2_s2_per_cm"], cfg["fibre.z_km"])


def _thetas(cfg: ScenarioConfig) -> tuple[float, float]:
    return np.radians(cfg["analyzers.theta1_deg"]), np.radians(cfg["analyzers.theta2_deg"])


def _g(v: float) -> str:
    return f"{v:.9g}"


class _Out:
    def __init__(self, command: str, cfg: ScenarioConfig):
        self.buf = io.StringIO()
        self.buf.write(f"# command: {command}\n")
        for line in cfg.echo():
            self.buf.write(f"# config: {line}\n")
        self.rows: list[str] = []
        self.header = "x_value,x_unit,rate_normalized,curve_label"

    def summary(self, key: str, value) -> None:
        val = _g(value) if isinstance(value, (float, np.floating)) else str(value)
        self.buf.write(f"# summary: {key} = {val}\n")

    def curve(self, x, unit: str, rate, label: str) -> None:
        self.rows.extend(f"{_g(a)},{unit},{_g(b)},{label}" for a, b in zip(x, rate))

    def text(self) -> str:
        return self.buf.getvalue() + self.header + "\n" + "".join(r + "\n" for r in self.rows)


def cmd_spectrum(cfg: ScenarioConfig, thetas: list[tuple[float, float]]) -> str:
    if not thetas:
        raise ConfigError("spectrum needs at least one --theta pair")
    state = build_state(cfg)
    filt = build_filter(cfg)
    raw = [an.coincidence_spectrum(state, np.radians(a), np.radians(b), filt, normalize=False)
           for a, b in thetas]
    peak = max(c.rate.max() for c in raw) or 1.0
    out = _Out("spectrum", cfg)
    blue, red = an.singlet_wavelengths(state.lambda0, state.tau0)
    pair = an.offset_to_wavelength(state.omega, state.lambda0)
    order = np.argsort(pair)
    envelope = an.CoincidenceCurve("lambda", pair[order], (state.density() / state.density().max())[order])
    out.summary("singlet_wavelengths_nm", f"{_g(blue * 1e9)};{_g(red * 1e9)}")
    out.summary("envelope_fwhm_nm", an.curve_fwhm(envelope) * 1e9)
    for (a, b), c in zip(thetas, raw):
        out.curve(c.x * 1e9, "nm", c.rate / peak, f"theta1={_g(a)};theta2={_g(b)}")
    return out.text()


def _fringe_offset(cfg: ScenarioConfig, state: BiphotonAmplitude) -> float:
    lam = cfg["fringe.lambda_nm"]
    if lam is None:
        return -singlet_offset(state.tau0)
    k = state.grid.nearest_index(an.wavelength_to_offset(lam * 1e-9, state.lambda0))
    return state.omega[k]


def cmd_fringe(cfg: ScenarioConfig, step_deg: float = 1.0) -> str:
    state = build_state(cfg)
    th1, _ = _thetas(cfg)
    omega = _fringe_offset(cfg, state)
    th2 = np.radians(np.arange(-90.0, 90.0 + step_deg / 2, step_deg))
    curve = an.polarization_fringe(state, th1, th2, omega)
    out = _Out("fringe", cfg)
    out.summary("lambda_nm", an.offset_to_wavelength(omega, state.lambda0) * 1e9)
    out.summary("omega_tau0", omega * state.tau0)
    vis = an.visibility(curve)
    out.summary("visibility", "undefined" if vis is None else vis)
    peak = curve.rate.max() or 1.0
    out.curve(np.degrees(curve.x), "deg", curve.rate / peak, f"theta1={_g(cfg['analyzers.theta1_deg'])}")
    return out.text()


def cmd_hwpscan(cfg: ScenarioConfig, alphas_deg: list[float]) -> str:
    if not alphas_deg:
        raise ConfigError("hwpscan needs at least one --alpha")
    state = build_state(cfg)
    th1, th2 = _thetas(cfg)
    alphas = np.radians(alphas_deg)
    curves = an.hwp_scan_family(state, alphas, th1, th2, build_filter(cfg))
    out = _Out("hwpscan", cfg)
    out.summary("singlet_spread", an.singlet_spread(state, alphas, th1, th2))
    for a, c in zip(alphas_deg, curves):
        out.curve(c.x * 1e9, "nm", c.rate, f"alpha={_g(a)}")
    return out.text()


def cmd_fibre(cfg: ScenarioConfig) -> str:
    state = build_state(cfg)
    fibre = build_fibre(cfg)
    th1, th2 = _thetas(cfg)
    dens = op.fibre_time_density(state, fibre)
    out = _Out("fibre", cfg)
    td = op.singlet_delay(fibre, state.tau0)
    out.summary("singlet_delay_ns", td * 1e9)
    alt = 3.0e-9
    out.summary("note", f"tau0_fs={_g(np.pi * abs(fibre.k2 * fibre.z) / alt * 1e15)} gives singlet_delay_ns=3")
    out.summary("anomalous", str(dens.anomalous).lower())
    out.summary("integral", dens.integral())
    out.curve(dens.tau * 1e9, "ns", dens.density / dens.density.max(), "all")
    pol = op.projection_spectrum(state, th1, th2)
    if fibre.scale < 0:
        pol = pol[::-1]
    out.curve(dens.tau * 1e9, "ns", pol / (pol.max() or 1.0),
              f"theta1={_g(cfg['analyzers.theta1_deg'])};theta2={_g(cfg['analyzers.theta2_deg'])}")
    return out.text()


def _run_mc(cfg, state, th1, th2, seed):
    det = mc.DetectionParams(cfg["mc.eta1"], cfg["mc.eta2"], cfg["mc.jitter_ps"] * 1e-12,
                             cfg["mc.accidental_fraction"], cfg["mc.window_ns"] * 1e-9)
    if cfg["mc.fibre"]:
        setup = mc.Setup(th1, th2, fibre=build_fibre(cfg))
    else:
        setup = mc.Setup(th1, th2, filter=build_filter(cfg))
    ev = mc.sample_pairs(state, cfg["mc.n_pairs"], setup, det, seed, workers=cfg["mc.workers"])
    if cfg["mc.select_center_ns"] is not None:
        width = cfg["mc.select_width_ns"]
        if width is None:
            raise ConfigError("mc.select_center_ns needs mc.select_width_ns")
        ev = mc.post_select_window(ev, cfg["mc.select_center_ns"] * 1e-9, width * 1e-9)
    return ev


def cmd_mc(cfg: ScenarioConfig) -> str:
    if not cfg.has_mc:
        raise ConfigError("mc needs an mc section in the config")
    state = build_state(cfg)
    th1, th2 = _thetas(cfg)
    seed = cfg["mc.seed"]
    ev = _run_mc(cfg, state, th1, th2, seed)
    ev_orth = _run_mc(cfg, state, th1, th2 + np.pi / 2, seed + 1)
    ev_pp = _run_mc(cfg, state, np.pi / 4, np.pi / 4, seed + 2)
    ev_pm = _run_mc(cfg, state, np.pi / 4, -np.pi / 4, seed + 3)
    frac = mc.coincidence_fraction(ev, cfg["mc.n_pairs"])
    vis = mc.estimate_visibility([ev, ev_orth])
    sf = mc.estimate_singlet_fraction(ev_pp, ev_pm)
    hist = mc.tac_histogram(ev, cfg["mc.bin_ns"] * 1e-9, cfg["mc.range_ns"] * 1e-9)
    out = _Out("mc", cfg)
    out.summary("rng", mc.RNG_ALGORITHM)
    out.summary("coincidence_fraction", f"{_g(frac.value)} +- {_g(frac.stderr)}")
    out.summary("visibility", f"{_g(vis.value)} +- {_g(vis.stderr)}")
    out.summary("singlet_fraction", f"{_g(sf.value)} +- {_g(sf.stderr)}")
    out.header = "bin_center_s,count"
    out.rows = [f"{_g(c)},{int(n)}" for c, n in zip(hist.centers, hist.counts)]
    return out.text()


def cmd_state(cfg: ScenarioConfig) -> str:
    buf = io.StringIO()
    write_state_csv(build_state(cfg), buf)
    return buf.getvalue()


def _theta_pair(s: str) -> tuple[float, float]:
    try:
        a, b = s.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected THETA1,THETA2 in degrees, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spdc-bell", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="scenario config file")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--seed", type=int, help="override mc.seed")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", help="coincidence spectra for analyzer pairs")
    sp.add_argument("--theta", action="append", type=_theta_pair, default=[],
                    metavar="T1,T2", help="analyzer angles in degrees (repeatable)")
    fr = sub.add_parser("fringe", help="polarization fringe at fixed wavelength")
    fr.add_argument("--step-deg", type=float, default=1.0)
    hs = sub.add_parser("hwpscan", help="spectra for several HWP orientations")
    hs.add_argument("--alpha", action="append", type=float, default=[], metavar="DEG")
    sub.add_parser("fibre", help="delay distribution after a dispersive fibre")
    sub.add_parser("mc", help="Monte Carlo run with estimates")
    sub.add_parser("state", help="dump the two-photon amplitude")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.values["mc.seed"] = args.seed
        if args.command == "spectrum":
            result = cmd_spectrum(cfg, args.theta)
        elif args.command == "fringe":
            result = cmd_fringe(cfg, args.step_deg)
        elif args.command == "hwpscan":
            result = cmd_hwpscan(cfg, args.alpha)
        elif args.command == "fibre":
            result = cmd_fibre(cfg)
        elif args.command == "mc":
            result = cmd_mc(cfg)
        else:
            result = cmd_state(cfg)
    except (ConfigError, OSError) as exc:
        print(f"spdc-bell: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except mc.LowStatisticsError as exc:
        print(f"spdc-bell: low statistics: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (ValueError, ArithmeticError, mc.SamplingError) as exc:
        print(f"spdc-bell: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(result)
    else:
        sys.stdout.write(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
