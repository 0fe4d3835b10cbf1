import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import zeta

from scottshift.channel import (
    CRITICAL_COUPLING,
    ChannelSpec,
    KineticKind,
    RadialTable,
    assemble,
    default_scale,
    kinetic_diagonal,
)
from scottshift.errors import CouplingTooLarge, InvalidArgument, NumericalFailure
from scottshift.numerics import build_momentum_grid, hurwitz_tail, trigamma_int
from scottshift.shift import (
    ShiftOptions,
    ShiftSeries,
    _hf_state_shifts,
    channel_shift,
    rydberg_tail,
    scott_coefficient,
    scott_scan,
    screened_channel_shift,
    shift_from_pair,
    shift_series,
    solve_channel_pair,
    tail_fit,
)
from scottshift.thomasfermi import chi_table, solve_majorana, tf_density


def _oracle_d0(kappa):
    return kappa**4 / 8.0 * (8.0 * zeta(3) - 3.0 * zeta(4))


class TestChannelShift:
    def test_zero_coupling(self):
        for l in (0, 3):
            assert channel_shift(l, 0.0) == 0.0

    def test_supercritical(self):
        with pytest.raises(CouplingTooLarge):
            channel_shift(0, 0.7)

    def test_negative_mu(self):
        with pytest.raises(InvalidArgument):
            channel_shift(0, 0.3, mu=-1.0)

    def test_small_kappa_approaches_perturbative_value(self):
        # the deviation from the kappa^4 oracle is O(kappa): it roughly halves with kappa
        dev = {k: channel_shift(0, k) / _oracle_d0(k) - 1.0 for k in (0.05, 0.025, 0.0125)}
        assert dev[0.0125] < 0 and abs(dev[0.0125]) < 0.02
        assert 0.4 < dev[0.025] / dev[0.05] < 0.7
        assert 0.4 < dev[0.0125] / dev[0.025] < 0.7

    def test_higher_l_matches_perturbation(self):
        # for l >= 1 the p^4 expectation is the full leading term:
        # kappa^4 sum_n (8/(n^3 (2l+1)) - 3/n^4) / 8, n >= l+1, times (2l+1)
        kappa, l = 0.05, 2
        per_state = (8.0 / (2 * l + 1) * hurwitz_tail(3, l + 1) - 3.0 * hurwitz_tail(4, l + 1)) / 8.0
        oracle = (2 * l + 1) * kappa**4 * per_state
        assert abs(channel_shift(l, kappa) / oracle - 1.0) < 0.01

    def test_critical_s_wave_finite_and_stable(self):
        d = {}
        for n in (400, 800):
            grid = build_momentum_grid(n, default_scale(CRITICAL_COUPLING, 0))
            d[n] = channel_shift(0, CRITICAL_COUPLING, grid=grid)
        assert 0 < d[400] < math.inf
        assert abs(d[800] / d[400] - 1.0) < 0.02

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.01, CRITICAL_COUPLING), st.integers(0, 12), st.sampled_from([0.0, 0.01, 0.1]))
    def test_non_negative_exactly(self, kappa, l, mu):
        grid = build_momentum_grid(120, default_scale(kappa, l))
        pair = solve_channel_pair(l, kappa, grid)
        assert np.all(pair.state_shifts >= 0)
        assert shift_from_pair(pair, mu).value >= 0

    def test_hf_agrees_with_direct_differences(self):
        kappa, l = 0.4, 1
        grid = build_momentum_grid(200, default_scale(kappa, l))
        pair = solve_channel_pair(l, kappa, grid)
        s_mat = assemble(ChannelSpec(KineticKind.SCHROEDINGER, l, kappa, grid))
        p = grid.nodes
        delta = np.maximum(kinetic_diagonal("schroedinger", p) - kinetic_diagonal("chandrasekhar", p), 0.0)
        idx = np.arange(4)
        hf = _hf_state_shifts(s_mat, delta, idx, ShiftOptions(hf_nodes=16))
        direct = pair.schroedinger[idx] - pair.chandrasekhar[idx]
        assert np.allclose(hf, direct, rtol=1e-5)

    def test_mu_positive_counts_only_deep_states(self):
        kappa, l = 0.5, 0
        grid = build_momentum_grid(200, default_scale(kappa, l))
        pair = solve_channel_pair(l, kappa, grid)
        mu = 0.01
        expected = -np.sum(pair.chandrasekhar[pair.chandrasekhar < -mu] + mu) + np.sum(
            pair.schroedinger[pair.schroedinger < -mu] + mu)
        assert shift_from_pair(pair, mu).value == pytest.approx(expected, rel=1e-8)

    def test_shift_decreases_with_mu(self):
        pair = solve_channel_pair(1, 0.5, build_momentum_grid(200, default_scale(0.5, 1)))
        values = [shift_from_pair(pair, mu).value for mu in (0.0, 0.001, 0.01, 0.1)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestRydbergTail:
    def test_recovers_model(self):
        n = np.arange(3, 15, dtype=float)
        a, b = 0.02, -0.01
        a_fit, b_fit, tail = rydberg_tail(n, a / n**3 + b / n**4, 8)
        assert a_fit == pytest.approx(a, rel=1e-10) and b_fit == pytest.approx(b, rel=1e-8)
        assert tail == pytest.approx(a * hurwitz_tail(3, 15) + b * hurwitz_tail(4, 15), rel=1e-10)

    def test_too_few_states(self):
        assert rydberg_tail([1.0], [0.1], 8) == (0.0, 0.0, 0.0)


class TestTailFit:
    def test_pure_square_law(self):
        shifts = [(l, 1.0 / (l + 1) ** 2) for l in range(12)]
        a, b, tail = tail_fit(shifts, 4)
        assert abs(a - 1.0) < 1e-10 and abs(b) < 1e-10
        assert tail == pytest.approx(trigamma_int(13), rel=1e-10)

    def test_two_term(self):
        shifts = [(l, 2.0 / (l + 1) ** 2 + 3.0 / (l + 1) ** 3) for l in range(20)]
        a, b, tail = tail_fit(shifts, 8)
        assert abs(a - 2.0) < 1e-8 and abs(b - 3.0) < 1e-8
        assert tail == pytest.approx(2 * trigamma_int(21) + 3 * hurwitz_tail(3, 21), rel=1e-9)

    def test_all_zero(self):
        assert tail_fit([(l, 0.0) for l in range(10)], 8) == (0.0, 0.0, 0.0)

    def test_too_few_points(self):
        with pytest.raises(InvalidArgument):
            tail_fit([(0, 1.0), (1, 0.5)], 4)

    def test_window_minimum(self):
        with pytest.raises(InvalidArgument):
            tail_fit([(l, 1.0) for l in range(10)], 2)

    def test_gap_in_top_window(self):
        with pytest.raises(InvalidArgument):
            tail_fit([(0, 1.0), (1, 0.5), (2, 0.3), (4, 0.1)], 3)

    @given(st.lists(st.floats(0, 1), min_size=10, max_size=30))
    def test_tail_never_negative(self, values):
        a, b, tail = tail_fit(list(enumerate(values)), 8)
        assert a >= 0 and tail >= 0


class TestScreened:
    def test_zero_screening_is_exact(self):
        r = np.geomspace(1e-3, 1e3, 40)
        zero = RadialTable(r, np.zeros(40))
        for l in (0, 2):
            assert screened_channel_shift(l, 0.4, zero) == channel_shift(l, 0.4)

    def test_short_range_majorant_has_no_shift(self):
        # chi = kappa (1 - exp(-r/a)) / r leaves a potential of range a, far too weak to bind
        kappa, a = 0.5, 1e-3
        r = np.geomspace(a * 1e-2, a * 1e3, 81)
        chi = RadialTable(r, kappa * -np.expm1(-r / a) / r, tail_charge=kappa)
        for l in (0, 1, 3):
            # zero up to eigensolver rounding
            assert 0 <= screened_channel_shift(l, kappa, chi) < 1e-14

    def test_thomas_fermi_screening_lowers_shift(self):
        sol = solve_majorana()
        chi = chi_table(tf_density(sol, 100.0), 0.5, 100.0)
        for l in (0, 1, 10):
            assert screened_channel_shift(l, 0.5, chi) <= channel_shift(l, 0.5)

    def test_rejects_non_table(self):
        with pytest.raises(InvalidArgument):
            screened_channel_shift(0, 0.5, lambda r: 0 * r)


class TestSeries:
    def test_json_round_trip(self):
        series = scott_coefficient(0.3, l_max=8, grid_size=100)
        data = json.loads(series.to_json())
        assert set(data) == {"kappa", "mu", "shifts", "tail", "s", "error"}
        assert set(data["tail"]) == {"a", "b", "sum"}
        back = ShiftSeries.from_dict(data)
        assert back.s_value == series.s_value and back.shifts == series.shifts

    def test_s_assembly(self):
        series = scott_coefficient(0.3, l_max=8, grid_size=100)
        total = math.fsum(d for _, d in series.shifts) + series.tail_sum
        assert series.s_value == total / 0.3**2
        assert series.s_value > 0 and series.error_estimate >= 0
        assert all(d >= 0 for _, d in series.shifts)

    def test_tolerance_breach(self):
        with pytest.raises(NumericalFailure) as info:
            scott_coefficient(0.3, l_max=8, grid_size=60, tolerance=1e-12)
        assert "s_coarse" in info.value.diagnostics

    def test_l_max_minimum(self):
        with pytest.raises(InvalidArgument):
            scott_coefficient(0.3, l_max=7)

    def test_workers_bit_identical(self):
        one = shift_series(0.4, 9, 80, workers=1)
        two = shift_series(0.4, 9, 80, workers=3)
        assert one == two


class TestScan:
    def test_empty(self):
        result = scott_scan([])
        assert result.rows == [] and result.monotone

    def test_single(self):
        result = scott_scan([0.3], l_max=8, grid_size=100)
        assert len(result.rows) == 1 and result.rows[0][0] == 0.3

    def test_not_ascending(self):
        with pytest.raises(InvalidArgument):
            scott_scan([0.3, 0.2])

    def test_small_scan_monotone(self):
        result = scott_scan([0.2, 0.4], l_max=8, grid_size=100)
        assert result.monotone and result.rows[1][1] > result.rows[0][1]

    def test_violation_is_flagged_not_raised(self):
        # a fake solver whose shifts do not grow with kappa
        def flat(l, kappa, grid, screening=None, options=ShiftOptions()):
            return solve_channel_pair(l, 0.3, grid, screening, options)

        result = scott_scan([0.3, 0.31], l_max=8, grid_size=60, solver=flat)
        assert not result.monotone and result.violations == [(0.3, 0.31)]
