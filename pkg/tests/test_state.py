import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdc_bell.state import (FrequencyGrid, OutOfGridError, SourceParams, bell_decompose,
                             bell_spectrum, make_spdc_state, pair_rate_spectrum, sinc2_half_max,
                             sinc_amplitude, singlet_offset, total_pair_rate, write_state_csv)


def newton_half_max():
    # independent route: Newton on sin(x) - x/sqrt(2) with Taylor-series start
    x = np.sqrt(6 * (1 - 1 / np.sqrt(2)))
    for _ in range(50):
        x -= (np.sin(x) - x / np.sqrt(2)) / (np.cos(x) - 1 / np.sqrt(2))
    return x


class TestSinc:
    def test_values(self):
        assert sinc_amplitude(0.0) == 1.0
        assert sinc_amplitude(np.pi / 2) == pytest.approx(2 / np.pi, abs=1e-15)
        assert sinc_amplitude(np.pi / 2) ** 2 == pytest.approx(0.4053, abs=1e-4)
        assert abs(sinc_amplitude(np.pi)) < 1e-15

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 10])
    def test_zeros(self, m):
        assert abs(sinc_amplitude(m * np.pi)) < 1e-15

    @given(st.floats(-1e3, 1e3, allow_nan=False))
    def test_even(self, x):
        assert sinc_amplitude(x) == sinc_amplitude(-x)

    def test_half_max_bisection_vs_newton(self):
        assert sinc2_half_max() == pytest.approx(newton_half_max(), abs=1e-10)
        assert 2 * sinc2_half_max() == pytest.approx(2.7831, abs=1e-4)


class TestParams:
    def test_tau0_from_crystal(self):
        s = SourceParams(702e-9, D=2.0e-13 / 1e-3, L=0.5e-3)
        assert s.tau0 == 2.0e-13 / 1e-3 * 0.5e-3 / 2

    def test_inconsistent(self):
        with pytest.raises(ValueError):
            SourceParams(702e-9, tau0=1e-13, D=1e-10, L=1e-3)
        with pytest.raises(ValueError):
            SourceParams(702e-9, D=1e-10)
        with pytest.raises(ValueError):
            SourceParams(-1.0, tau0=1e-13)

    def test_grid_symmetry(self):
        g = FrequencyGrid(2049, 2 * np.pi, 63e-15)
        assert g.omega[g.center] == 0.0
        assert np.array_equal(g.omega, -g.omega[::-1])

    @pytest.mark.parametrize("n", [0, 2, 1024, -3])
    def test_grid_rejects(self, n):
        with pytest.raises(ValueError):
            FrequencyGrid(n, 2 * np.pi, 63e-15)

    def test_state_rejects_tiny_grid(self, src):
        with pytest.raises(ValueError):
            make_spdc_state(src, FrequencyGrid(1, 1.0, src.tau0))


class TestState:
    def test_construction_values(self, raw_state):
        k0 = raw_state.grid.center
        assert np.array_equal(raw_state.amps[k0], [[0, 1], [1, 0]])
        k = raw_state.grid.index_of(singlet_offset(raw_state.tau0))
        assert raw_state.amps[k, 0, 1] == pytest.approx(2j / np.pi, abs=1e-15)
        assert raw_state.amps[k, 1, 0] == pytest.approx(-2j / np.pi, abs=1e-15)
        kz = raw_state.grid.index_of(np.pi / raw_state.tau0)
        assert np.all(np.abs(raw_state.amps[kz]) < 1e-15)

    def test_exchange_symmetry(self, state):
        assert state.exchange_asymmetry() == 0.0

    def test_normalized(self, state):
        assert total_pair_rate(state) == pytest.approx(1.0, abs=1e-12)

    def test_pair_rate_spectrum_is_sinc2(self, state):
        curve = pair_rate_spectrum(state)
        assert np.max(np.abs(curve.rate - sinc_amplitude(state.grid.x) ** 2)) < 1e-12

    def test_spectrum_fwhm_in_x(self, state):
        curve = pair_rate_spectrum(state)
        from spdc_bell.analytics import curve_fwhm
        x_curve = type(curve)("omega", curve.x * state.tau0, curve.rate)
        assert curve_fwhm(x_curve) == pytest.approx(2 * 1.39156, abs=1e-3)

    def test_grid_refinement_is_second_order(self, src):
        rates = [total_pair_rate(make_spdc_state(src, FrequencyGrid(n, 2 * np.pi, src.tau0), False))
                 for n in (257, 513, 1025)]
        d1, d2 = rates[0] - rates[1], rates[1] - rates[2]
        # at least second order (endpoint derivatives vanish here, so it is faster)
        assert 0 < d2 / d1 <= 0.25 + 0.02


class TestBell:
    def test_degenerate_point(self, state):
        w = bell_decompose(state, 0.0)
        assert w.w_psi_plus == pytest.approx(1.0, abs=1e-12)
        assert w.w_psi_minus == pytest.approx(0.0, abs=1e-12)
        assert w.pair_rate == pytest.approx(1.0, abs=1e-12)

    def test_singlet_point(self, state):
        w = bell_decompose(state, singlet_offset(state.tau0))
        assert w.w_psi_minus == pytest.approx(1.0, abs=1e-12)
        assert w.pair_rate == pytest.approx(4 / np.pi ** 2, abs=1e-12)
        assert round(w.pair_rate, 2) == 0.41

    def test_quarter_point(self, state):
        w = bell_decompose(state, np.pi / 4 / state.tau0)
        assert w.w_psi_plus == pytest.approx(0.5, abs=1e-12)
        assert w.w_psi_minus == pytest.approx(0.5, abs=1e-12)
        assert w.pair_rate == pytest.approx(sinc_amplitude(np.pi / 4) ** 2, abs=1e-12)
        assert w.pair_rate == pytest.approx(0.8106, abs=1e-4)

    def test_phi_absent_and_fractions_sum(self, state):
        b = bell_spectrum(state)
        d = b["defined"]
        assert np.all(b["w_phi_plus"] == 0) and np.all(b["w_phi_minus"] == 0)
        total = b["w_phi_plus"] + b["w_phi_minus"] + b["w_psi_plus"] + b["w_psi_minus"]
        assert np.max(np.abs(total[d] - 1)) < 1e-12
        x = state.grid.x
        assert np.max(np.abs(b["w_psi_minus"][d] - np.sin(x[d]) ** 2)) < 1e-12
        assert np.max(np.abs(b["w_psi_plus"][d] + b["w_psi_minus"][d] - 1)) < 1e-12

    def test_spectral_zero_is_undefined(self, src):
        # exact zero amplitude
        s = make_spdc_state(src, FrequencyGrid(5, 1.0, src.tau0))
        z = s.replace(np.zeros_like(s.amps))
        w = bell_decompose(z, 0.0)
        assert not w.defined and w.w_psi_minus is None and w.pair_rate == 0.0

    def test_out_of_range(self, state):
        with pytest.raises(OutOfGridError):
            bell_decompose(state, 3 * np.pi / state.tau0)

    def test_interpolation_between_nodes(self, state):
        g = state.grid
        mid = 0.5 * (g.omega[1200] + g.omega[1201])
        w = bell_decompose(state, mid)
        assert abs(w.w_psi_minus - np.sin(mid * g.tau0) ** 2) < 1e-5

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                    min_size=4, max_size=4))
    def test_fractions_sum_for_arbitrary_amplitudes(self, entries):
        from spdc_bell.state import bell_fractions
        amp = np.array(entries).reshape(2, 2)
        w = bell_fractions(amp, 2.0)
        if w.defined:
            s = w.w_phi_plus + w.w_phi_minus + w.w_psi_plus + w.w_psi_minus
            assert s == pytest.approx(1.0, abs=1e-12)
            assert min(w.w_phi_plus, w.w_phi_minus, w.w_psi_plus, w.w_psi_minus) >= 0


def test_state_csv(small_state, tmp_path):
    import io
    buf = io.StringIO()
    write_state_csv(small_state, buf)
    lines = buf.getvalue().splitlines()
    assert lines[2].startswith("omega_rad_s,re_hh")
    assert len(lines) == 3 + small_state.grid.n_points
    row = lines[3 + small_state.grid.center].split(",")
    assert float(row[0]) == 0.0
