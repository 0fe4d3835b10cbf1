import json
import math

import numpy as np
import pytest
from scipy import special

from scottshift.channel import CRITICAL_COUPLING
from scottshift.errors import InvalidArgument
from scottshift.numerics import build_momentum_grid
from scottshift.verify import (
    SUITES,
    CheckReport,
    ambi_constant,
    ambi_scalar_check,
    banff_identity_check,
    box_channel_eigenvalues,
    decay_bound_check,
    hardy_margin,
    hardy_near_optimizer,
    hardy_trial_check,
    kato_check,
    lt_ratio_report,
    run_suite,
    spherical_bessel_zeros,
)


class TestBanff:
    def test_grid(self):
        report = banff_identity_check(build_momentum_grid(400, 1.0))
        assert report.passed and abs(report.worst_margin) < 1e-13

    def test_extreme_momenta(self):
        report = banff_identity_check(build_momentum_grid(400, 1e-4))
        assert report.passed
        report = banff_identity_check(build_momentum_grid(400, 1e4))
        assert report.passed


class TestHardy:
    def test_closed_form_trial(self):
        # u = r e^{-r}: int u'^2 = 1/4, int u^2/r^2 = 1/2, so the slack is (1/4 - 1/8)/(1/8)
        assert hardy_margin([1.0], [1.0], [1.0], 0) == pytest.approx(1.0, rel=1e-10)

    @pytest.mark.parametrize("eps", [0.3, 0.1, 0.02])
    def test_near_optimizer_against_gamma_integrals(self, eps):
        a = 0.5 + eps
        inv2 = special.gamma(2 * a - 1) / 2 ** (2 * a - 1)
        kin = a * a * inv2 - 2 * a * special.gamma(2 * a) / 2 ** (2 * a) + special.gamma(2 * a + 1) / 2 ** (2 * a + 1)
        expected = (kin - 0.25 * inv2) / (0.25 * inv2)
        assert hardy_near_optimizer(eps) == pytest.approx(expected, rel=1e-8)

    def test_near_optimizer_slack_vanishes(self):
        slacks = [hardy_near_optimizer(e) for e in (0.2, 0.1, 0.05, 0.01)]
        assert all(b < a for a, b in zip(slacks, slacks[1:]))
        assert 0 < slacks[-1] < 0.05

    @pytest.mark.parametrize("l", [0, 1, 3])
    def test_random_trials(self, l):
        report = hardy_trial_check(l, trials=40, seed=7)
        assert report.passed and report.worst_margin >= 0 and len(report.details) == 40

    def test_reproducible(self):
        a = hardy_trial_check(1, trials=5, seed=3)
        b = hardy_trial_check(1, trials=5, seed=3)
        assert a.to_json() == b.to_json()

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgument):
            hardy_trial_check(-1)
        with pytest.raises(InvalidArgument):
            hardy_trial_check(0, trials=0)


class TestKato:
    def test_critical(self):
        report = kato_check(build_momentum_grid(400, 1.0), 0)
        assert report.passed and report.worst_margin >= -1e-3

    def test_subcritical(self):
        assert kato_check(build_momentum_grid(400, 1.0), 0, coupling=0.5).worst_margin >= -1e-6

    def test_higher_l(self):
        assert kato_check(build_momentum_grid(200, 1.0), 2).passed

    def test_supercritical_unbounded(self):
        # past 2/pi the lowest eigenvalue is negative and runs away with resolution
        lows = [kato_check(build_momentum_grid(n, 1.0), 0, coupling=1.2).worst_margin for n in (100, 200, 400)]
        assert lows[0] < 0 and lows[1] < lows[0] and lows[2] < lows[1]


class TestAmbi:
    def test_constant_limits(self):
        assert ambi_constant(0, 1e-12) == pytest.approx(0.5, rel=1e-10)
        assert abs(ambi_constant(1, 0.25) - 1.27069) < 1e-5
        assert ambi_constant(1, 0.25) >= 1.25
        assert ambi_constant(0, 1e8) == pytest.approx(0.25 / 2e8, rel=1e-10)

    @pytest.mark.parametrize("l", [0, 2, 5])
    @pytest.mark.parametrize("R", [0.01, 1.0, 100.0])
    def test_scalar_inequality_and_equality(self, l, R):
        report = ambi_scalar_check(l, R)
        assert report.passed and report.worst_margin >= -1e-12
        assert report.info["equality_residual"] <= 1e-12

    def test_bad_radius(self):
        with pytest.raises(InvalidArgument):
            ambi_constant(0, 0.0)


class TestDecay:
    def test_passes_below_critical(self):
        report = decay_bound_check(0.2, l_max=10, grid_size=150)
        crit = decay_bound_check(CRITICAL_COUPLING, l_max=10, grid_size=150)
        assert report.passed and crit.passed
        assert report.info["M_hat"] < crit.info["M_hat"]

    def test_zero_coupling(self):
        report = decay_bound_check(0.0, l_max=6)
        assert report.passed and report.info["M_hat"] == 0.0
        assert all(v == 0.0 for _, v in report.info["scaled"])

    def test_l_max_minimum(self):
        with pytest.raises(InvalidArgument):
            decay_bound_check(0.3, l_max=4)


class TestBoxBasis:
    def test_bessel_zeros(self):
        assert np.allclose(spherical_bessel_zeros(0, 4), np.pi * np.arange(1, 5), rtol=1e-13)
        z = spherical_bessel_zeros(3, 5)
        assert np.max(np.abs(special.spherical_jn(3, z))) < 1e-13

    def test_free_box(self):
        eigs, _ = box_channel_eigenvalues(0, lambda r: 0.0 * r, 0.0, 10.0, 20, kind="schroedinger")
        assert np.allclose(eigs, 0.5 * (np.pi * np.arange(1, 21) / 10.0) ** 2, rtol=1e-12)

    def test_hydrogen_in_large_box(self):
        eigs, _ = box_channel_eigenvalues(1, lambda r: 1.0 / r, 0.0, 60.0, 400, kind="schroedinger")
        assert np.allclose(eigs[:2], [-1 / 8, -1 / 18], rtol=1e-5)


class TestLtRatio:
    def test_small_run(self):
        report = lt_ratio_report(2.0, l_max=5, box_extra=60.0)
        ratios = [q for _, q in report.details]
        assert len(ratios) == 5 and all(0 < q < 1 for q in ratios)
        assert all(d["resolved"] for d, _ in report.details)
        assert report.passed == (report.info["growth_l4_to_lmax"] <= 0.1)

    @pytest.mark.slow
    def test_default_run_is_reported_faithfully(self):
        report = lt_ratio_report(2.0)
        growth = report.info["growth_l4_to_lmax"]
        assert report.passed == (growth <= 0.1)
        assert report.worst_margin == pytest.approx(0.1 - growth)
        assert report.info["sup"] < 1.0

    @pytest.mark.parametrize("gamma", [0.5, 0.2])
    def test_gamma_range(self, gamma):
        with pytest.raises(InvalidArgument):
            lt_ratio_report(gamma)

    def test_l_max_minimum(self):
        with pytest.raises(InvalidArgument):
            lt_ratio_report(2.0, l_max=3)


class TestSuite:
    def test_order_and_names(self):
        reports = run_suite(["ambi", "banff"], grid_size=100)
        assert reports[0].name == "banff"
        assert all(r.name.startswith("ambi") for r in reports[1:])
        assert len(reports) == 1 + 18

    def test_unknown(self):
        with pytest.raises(InvalidArgument):
            run_suite(["banff", "nope"])

    def test_suites_declared(self):
        assert SUITES == ("banff", "hardy", "kato", "ambi", "decay", "lt")

    def test_report_json(self):
        report = hardy_trial_check(0, trials=2, seed=1)
        data = json.loads(report.to_json())
        assert set(data) == {"name", "passed", "worst_margin", "tolerance", "details", "info"}
        assert isinstance(data["passed"], bool) and len(data["details"]) == 2

    def test_report_defaults(self):
        report = CheckReport("x", True, 0.0)
        assert report.details == [] and report.info == {}
        assert math.isfinite(report.worst_margin)
