import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsqam.errors import InvalidInputError, InvalidParameterError, ModelDomainError
from gsqam.gmi import ChannelSnr
from gsqam.link import (
    LinkParams,
    NliCoefficients,
    db_to_linear,
    dbm_to_watt,
    effective_snr,
    effective_snr_curve,
    eta_tot,
    kurtosis_coupled_snr,
    linear_to_db,
    optimal_launch_power,
    optimal_launch_power_closed_form,
    snr_opt_ratio,
    watt_to_dbm,
)

K_UNIFORM_256 = -257 / 425
# plug-in values with the exact kurtosis above
ETA_TOT_UNIFORM = 0.6674117647058824
RATIO_UNIFORM = 1.144288097864701
COUPLED_DB_UNIFORM = 18.585353807165305


def brute_force_optimum(link, kurtosis, points=200_001):
    p_guess, _ = optimal_launch_power_closed_form(link.p_ase, eta_tot(link.nli, kurtosis))
    grid = p_guess * np.logspace(-1, 1, points)
    snr = effective_snr_curve(link, kurtosis, grid)
    i = int(np.argmax(snr))
    return grid[i], snr[i]


class TestUnits:
    @settings(max_examples=200)
    @given(st.floats(-60.0, 60.0))
    def test_dbm_round_trip(self, dbm):
        assert watt_to_dbm(dbm_to_watt(dbm)) == pytest.approx(dbm, abs=1e-12)

    @settings(max_examples=200)
    @given(st.floats(-80.0, 80.0))
    def test_db_round_trip(self, db):
        assert linear_to_db(db_to_linear(db)) == pytest.approx(db, abs=1e-12)

    def test_reference_points(self):
        assert dbm_to_watt(0.0) == pytest.approx(1e-3, rel=1e-15)
        assert dbm_to_watt(30.0) == pytest.approx(1.0, rel=1e-15)
        assert db_to_linear(27.61) == pytest.approx(576.77, abs=0.01)

    def test_array_input_returns_array(self):
        out = dbm_to_watt([0.0, 10.0])
        assert isinstance(out, np.ndarray)
        np.testing.assert_allclose(out, [1e-3, 1e-2])


class TestEtaTot:
    def test_gaussian_gives_eta1(self):
        assert eta_tot(NliCoefficients.from_ratio(3.0, 0.55), 0.0) == 3.0

    def test_uniform_256qam_plug_in(self):
        assert eta_tot(NliCoefficients.from_ratio(1.0, 0.55), K_UNIFORM_256) == pytest.approx(ETA_TOT_UNIFORM, abs=1e-15)
        assert eta_tot(NliCoefficients.from_ratio(1.0, 0.55), -0.6048) == pytest.approx(0.6674, abs=1e-4)

    def test_constant_modulus(self):
        assert eta_tot(NliCoefficients(2.0, 0.7), -1.0) == pytest.approx(1.3, abs=1e-15)

    def test_ratio_exact(self):
        nli = NliCoefficients.from_ratio(4.0, 0.25)
        assert nli.c == 0.25

    def test_validity_violation(self):
        with pytest.raises(ModelDomainError):
            eta_tot(NliCoefficients.from_ratio(1.0, 2.0), -0.6)

    def test_negative_eta1_rejected(self):
        with pytest.raises(InvalidParameterError):
            NliCoefficients(-1.0, 0.0)

    @settings(max_examples=200)
    @given(st.floats(0.1, 1e3), st.floats(-0.9, 0.9), st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
    def test_affine_in_kurtosis(self, eta1, c, ks):
        nli = NliCoefficients.from_ratio(eta1, c)
        k0, k1, k2 = ks
        v0, v1, v2 = (eta_tot(nli, k) for k in ks)
        # three-point collinearity
        assert (v1 - v0) * (k2 - k0) == pytest.approx((v2 - v0) * (k1 - k0), abs=1e-9 * eta1)


class TestSnrOptRatio:
    def test_identical(self):
        assert snr_opt_ratio(0.55, -0.3, -0.3) == 1.0

    def test_zero_c(self):
        assert snr_opt_ratio(0.0, -0.9, 0.7) == 1.0

    def test_uniform_256qam(self):
        assert snr_opt_ratio(0.55, K_UNIFORM_256, 0.0) == pytest.approx(RATIO_UNIFORM, rel=1e-14)
        assert linear_to_db(RATIO_UNIFORM) == pytest.approx(0.586, abs=1e-3)

    def test_outside_validity(self):
        with pytest.raises(ModelDomainError):
            snr_opt_ratio(2.0, -0.6, 0.0)


class TestCoupledSnr:
    def test_gaussian_unchanged(self):
        assert kurtosis_coupled_snr(ChannelSnr.from_db(18), 0.55, 0.0).db == pytest.approx(18.0, abs=1e-12)

    def test_uniform_256qam(self):
        got = kurtosis_coupled_snr(ChannelSnr.from_db(18), 0.55, K_UNIFORM_256).db
        assert got == pytest.approx(COUPLED_DB_UNIFORM, abs=1e-10)
        assert got == pytest.approx(18.586, abs=1e-3)

    @given(st.floats(0.01, 5.0), st.floats(0.01, 3.0))
    def test_positive_kurtosis_reduces(self, c, k):
        assert kurtosis_coupled_snr(100.0, c, k).snr_linear < 100.0


class TestEffectiveSnr:
    def test_ase_only(self):
        link = LinkParams(1e-5, NliCoefficients(0.0))
        assert effective_snr(link, 0.0, 2e-3).snr_linear == pytest.approx(200.0, rel=1e-14)

    def test_btb_limit(self):
        link = LinkParams(1e-30, NliCoefficients(0.0), snr_btb_linear=190.0)
        assert effective_snr(link, 0.0, 1.0).snr_linear == pytest.approx(190.0, rel=1e-12)

    def test_decreasing_beyond_optimum(self):
        link = LinkParams(1e-5, NliCoefficients(500.0), 200.0)
        p_opt, _ = optimal_launch_power(link, 0.0)
        snr = effective_snr_curve(link, 0.0, p_opt * np.logspace(0.01, 3, 400))
        assert np.all(np.diff(snr) < 0)
        assert snr[-1] < 1e-3 * snr[0]

    def test_rejects_non_positive_power(self):
        link = LinkParams(1e-5, NliCoefficients(1.0))
        with pytest.raises(InvalidParameterError):
            effective_snr(link, 0.0, 0.0)
        with pytest.raises(InvalidParameterError):
            effective_snr_curve(link, 0.0, [1e-3, -1e-3])

    def test_table1_uniform_peak_in_range(self):
        link = LinkParams(dbm_to_watt(-18.46), NliCoefficients.fixed(db_to_linear(27.61)), db_to_linear(22.78))
        _, snr = optimal_launch_power(link, 0.0)
        assert 16.0 <= snr.db <= 19.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-30.0, -10.0), st.floats(15.0, 40.0), st.one_of(st.none(), st.floats(15.0, 35.0)))
    def test_unimodal(self, p_ase_dbm, eta_db, btb_db):
        link = LinkParams.from_db(p_ase_dbm, eta_tot_db=eta_db, snr_btb_db=btb_db)
        p_star, _ = optimal_launch_power_closed_form(link.p_ase, link.nli.eta1)
        grid = p_star * np.logspace(-3, 3, 1000)
        d = np.diff(effective_snr_curve(link, 0.0, grid))
        signs = np.sign(d[d != 0])
        assert signs[0] > 0 and signs[-1] < 0
        assert np.count_nonzero(np.diff(signs)) == 1


class TestOptimalLaunchPower:
    def test_closed_form_example(self):
        p, snr = optimal_launch_power_closed_form(1.0, 0.5)
        assert p == pytest.approx(1.0, rel=1e-15)
        assert snr.snr_linear == pytest.approx(2 / 3, rel=1e-15)

    def test_scaling_law(self):
        p1, _ = optimal_launch_power_closed_form(1e-5, 300.0)
        p2, _ = optimal_launch_power_closed_form(1e-5, 600.0)
        assert p2 / p1 == pytest.approx(2 ** (-1 / 3), rel=1e-14)

    def test_numeric_matches_closed_form_without_transceiver(self):
        link = LinkParams(1e-5, NliCoefficients(500.0))
        p, snr = optimal_launch_power(link, 0.0)
        pc, snrc = optimal_launch_power_closed_form(1e-5, 500.0)
        assert isinstance(p, float)
        assert p == pytest.approx(pc, rel=1e-9)
        assert snr.snr_linear == pytest.approx(snrc.snr_linear, rel=1e-12)

    @pytest.mark.parametrize("btb_db", [15.0, 20.0, 25.0])
    def test_with_transceiver_matches_brute_force(self, btb_db):
        link = LinkParams(dbm_to_watt(-18.0), NliCoefficients(700.0), db_to_linear(btb_db))
        p, snr = optimal_launch_power(link, 0.0)
        pb, snrb = brute_force_optimum(link, 0.0)
        assert snr.snr_linear >= snrb * (1 - 1e-12)
        assert p == pytest.approx(pb, rel=1e-4)
        _, snrc = optimal_launch_power_closed_form(link.p_ase, 700.0)
        assert snr.snr_linear <= snrc.snr_linear

    def test_zero_eta_has_no_optimum(self):
        with pytest.raises(InvalidParameterError):
            optimal_launch_power(LinkParams(1e-5, NliCoefficients(0.0)), 0.0)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(0.0, 0.95),
        st.floats(-1.0, 1.0),
        st.floats(-1.0, 1.0),
        st.floats(1e-7, 1e-3),
        st.floats(10.0, 1e4),
    )
    def test_ratio_consistency(self, c, k_a, k_b, p_ase, eta1):
        link = LinkParams(p_ase, NliCoefficients.from_ratio(eta1, c))
        _, snr_a = optimal_launch_power(link, k_a)
        _, snr_b = optimal_launch_power(link, k_b)
        assert snr_a.snr_linear / snr_b.snr_linear == pytest.approx(snr_opt_ratio(c, k_a, k_b), rel=1e-9)


class TestLinkJson:
    def test_round_trip_total(self):
        link = LinkParams.from_db(-18.5, eta_tot_db=27.61, snr_btb_db=22.78)
        back = LinkParams.from_dict(link.to_dict())
        assert back.p_ase == pytest.approx(link.p_ase, rel=1e-12)
        assert back.nli.eta1 == pytest.approx(link.nli.eta1, rel=1e-12)
        assert back.snr_btb_linear == pytest.approx(link.snr_btb_linear, rel=1e-12)

    def test_round_trip_split_and_infinite_btb(self):
        link = LinkParams.from_db(-20.0, eta1_db=29.4, c=0.55)
        d = link.to_dict()
        assert d["snr_btb_db"] is None and d["c"] == pytest.approx(0.55, abs=1e-15)
        back = LinkParams.from_dict(d)
        assert math.isinf(back.snr_btb_linear)
        assert back.nli.c == pytest.approx(0.55, abs=1e-15)

    @pytest.mark.parametrize(
        "data",
        [
            {"eta_tot_db_per_w2": 27.0},
            {"p_ase_dbm": -18.0},
            {"p_ase_dbm": -18.0, "eta_tot_db_per_w2": 27.0, "c": 0.5},
            {"p_ase_dbm": -18.0, "eta1_db_per_w2": 27.0},
            [1, 2],
        ],
    )
    def test_malformed(self, data):
        with pytest.raises(InvalidInputError):
            LinkParams.from_dict(data)

    def test_from_db_requires_one_form(self):
        with pytest.raises(InvalidInputError):
            LinkParams.from_db(-18.0)
        with pytest.raises(InvalidInputError):
            LinkParams.from_db(-18.0, eta_tot_db=27.0, eta1_db=27.0, c=0.5)

    def test_invalid_values(self):
        with pytest.raises(InvalidParameterError):
            LinkParams(0.0, NliCoefficients(1.0))
        with pytest.raises(InvalidParameterError):
            LinkParams(1e-5, NliCoefficients(1.0), -1.0)
