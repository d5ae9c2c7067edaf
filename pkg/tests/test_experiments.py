import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from vccsim.errors import InvalidConfigurationError, UnsupportedConfigurationError
from vccsim.experiments import (
    Scenario,
    effective_gain,
    format_csv,
    optimize_q,
    rows_for_best,
    rows_for_curve,
    run_cacheless_bd_mrc,
    run_imperfect_csi,
    run_msv,
    run_vcc_bd_mrc,
    run_vcc_zf,
)


def macro_scenario(**kw):
    base = dict(
        name="t", geometry="macro", num_tx_antennas=24, num_states=6,
        cache_fraction=Fraction(5, 6), antennas_per_user=4, users_per_group=4,
        baseline_users=4, ptot_dbm=(40.0, 43.0), n_locations=6, n_fadings=2, seed=11,
    )
    base.update(kw)
    return Scenario(**base)


def symmetric_scenario(**kw):
    base = dict(
        name="s", geometry=None, noise_power=1.0, num_tx_antennas=16,
        num_states=6, cache_fraction=Fraction(5, 6), antennas_per_user=1,
        users_per_group=None, baseline_users=None,
        ptot_dbm=(40.0, 60.0), n_locations=24, n_fadings=1, seed=4,
    )
    base.update(kw)
    return Scenario(**base)


class TestScenario:
    def test_coded_gain(self):
        assert macro_scenario().coded_gain == 6
        with pytest.raises(InvalidConfigurationError):
            macro_scenario(num_states=5)  # 5 * 5/6 not integer

    def test_q_cap(self):
        scn = macro_scenario(users_per_group=None)
        assert scn.max_group_users() == 6  # min(floor(27/4), 24//4)
        with pytest.raises(InvalidConfigurationError):
            macro_scenario(users_per_group=7)

    def test_infeasible_q_rejected_before_sampling(self):
        with pytest.raises(InvalidConfigurationError):
            macro_scenario(users_per_group=0)

    def test_snr_grid(self):
        scn = symmetric_scenario()
        assert scn.snr_db == pytest.approx((10.0, 30.0))


class TestSchemeNesting:
    def test_single_group_equals_cacheless(self):
        # a cache-free configuration run through the cache-aided path must
        # reproduce the baseline run bit for bit
        vcc_scn = macro_scenario(
            num_states=1, cache_fraction=Fraction(0), users_per_group=3,
            baseline_users=3, antennas_per_user=2,
        )
        a = run_vcc_bd_mrc(vcc_scn)["vcc_bd_mrc"]
        b = run_cacheless_bd_mrc(vcc_scn)["cacheless_bd_mrc"]
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.stderr, b.stderr)


class TestDeterminism:
    def test_same_seed_same_numbers(self):
        scn = macro_scenario(n_locations=3)
        a = run_vcc_bd_mrc(scn)["vcc_bd_mrc"].mean
        b = run_vcc_bd_mrc(scn)["vcc_bd_mrc"].mean
        assert np.array_equal(a, b)

    def test_worker_count_invariant(self):
        scn = macro_scenario(n_locations=5)
        a = run_vcc_bd_mrc(scn, workers=1)["vcc_bd_mrc"]
        b = run_vcc_bd_mrc(scn, workers=4)["vcc_bd_mrc"]
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.stderr, b.stderr)

    def test_more_fadings_shrink_stderr(self):
        base = symmetric_scenario(
            geometry="micro", noise_power=None, users_per_group=2,
            baseline_users=2, num_tx_antennas=8, n_locations=40, n_fadings=1,
        )
        # micro needs a physical noise power
        from vccsim.channel import noise_power_watts

        base = dataclasses.replace(base, noise_power=noise_power_watts(), ptot_dbm=(33.0,))
        doubled = dataclasses.replace(base, n_fadings=4)
        se1 = run_vcc_bd_mrc(base)["vcc_bd_mrc"].stderr[0, 0]
        se4 = run_vcc_bd_mrc(doubled)["vcc_bd_mrc"].stderr[0, 0]
        # location scatter dominates, but fading noise must not grow
        assert se4 < se1


class TestOverheadAccounting:
    def test_rate_scales_linearly_with_overhead_factor(self):
        # the max-min sum rate is exactly proportional to the CSI overhead
        # factor, so switching pilots off rescales every point by 1/xi
        scn = macro_scenario(n_locations=2, n_fadings=1)
        with_pilots = run_vcc_bd_mrc(scn)["vcc_bd_mrc"].mean
        no_pilots = run_vcc_bd_mrc(
            dataclasses.replace(scn, pilot_symbols=0)
        )["vcc_bd_mrc"].mean
        xi = scn.overhead_factor(scn.coded_gain, 4)
        assert np.allclose(with_pilots, xi * no_pilots, rtol=1e-12)

    def test_cacheless_uses_single_group_overhead(self):
        scn = macro_scenario(n_locations=2, n_fadings=1)
        with_pilots = run_cacheless_bd_mrc(scn)["cacheless_bd_mrc"].mean
        no_pilots = run_cacheless_bd_mrc(
            dataclasses.replace(scn, pilot_symbols=0)
        )["cacheless_bd_mrc"].mean
        xi = scn.overhead_factor(1, 4)
        assert np.allclose(with_pilots, xi * no_pilots, rtol=1e-12)


class TestGains:
    def test_identical_reports_gain_one(self):
        scn = macro_scenario(n_locations=3)
        rep = run_vcc_bd_mrc(scn)["vcc_bd_mrc"]
        assert np.allclose(effective_gain(rep, rep, "fixed"), 1.0)

    def test_grid_mismatch_rejected(self):
        a = run_vcc_bd_mrc(macro_scenario(n_locations=2))["vcc_bd_mrc"]
        b = run_vcc_bd_mrc(macro_scenario(n_locations=2, ptot_dbm=(40.0,)))["vcc_bd_mrc"]
        with pytest.raises(InvalidConfigurationError):
            effective_gain(a, b, "fixed")

    def test_optimized_gain_is_ratio_of_maxima(self):
        scn = symmetric_scenario(num_tx_antennas=8, n_locations=10)
        vcc = run_vcc_bd_mrc(scn)["vcc_bd_mrc"]
        cl = run_cacheless_bd_mrc(scn)["cacheless_bd_mrc"]
        gain = effective_gain(vcc, cl, "optimized")
        by_hand = vcc.mean.max(axis=0) / cl.mean.max(axis=0)
        assert np.array_equal(gain, by_hand)


class TestOptimizeQ:
    def test_trivial_when_cap_is_one(self):
        scn = macro_scenario(
            antennas_per_user=4, num_tx_antennas=4, num_states=1,
            cache_fraction=Fraction(0), users_per_group=None, n_locations=2,
        )
        out = optimize_q(scn, "vcc_bd_mrc")
        assert all(q == 1 for _, q, _ in out)

    def test_cacheless_high_snr_prefers_full_multiplexing(self):
        # symmetric single-antenna users at very high SNR: multiplexing wins
        scn = symmetric_scenario(
            num_tx_antennas=8, ptot_dbm=(95.0,), n_locations=30,
        )
        out = optimize_q(scn, "cacheless_bd_mrc")
        assert out[0][1] == 8

    def test_unknown_scheme(self):
        with pytest.raises(InvalidConfigurationError):
            optimize_q(macro_scenario(), "mrt")


class TestZfRuns:
    def test_bounds_sandwich_simulation(self):
        scn = macro_scenario(
            num_tx_antennas=64, num_states=5, cache_fraction=Fraction(4, 5),
            antennas_per_user=4, users_per_group=4, n_locations=5, n_fadings=3,
        )
        rep = run_vcc_zf(scn)
        sim = rep["vcc_zf"]
        lo, hi = rep["vcc_zf_lower"], rep["vcc_zf_upper"]
        slack = 2 * np.nan_to_num(sim.stderr, nan=0.0)
        assert np.all(sim.mean >= lo.mean - slack)
        assert np.all(sim.mean <= hi.mean + slack)

    def test_single_antenna_zf_equals_bd(self):
        # with one antenna per user the two precoders coincide
        scn = symmetric_scenario(num_tx_antennas=8, users_per_group=3,
                                 baseline_users=3, n_locations=6)
        zf_rep = run_vcc_zf(scn)["vcc_zf"]
        bd_rep = run_vcc_bd_mrc(scn)["vcc_bd_mrc"]
        assert np.allclose(zf_rep.mean, bd_rep.mean, rtol=1e-9)


class TestFig2Ordering:
    def test_antenna_count_tradeoff(self):
        # more receive antennas help at high power, hurt at low power
        kw = dict(
            geometry="macro", num_tx_antennas=64, num_states=5,
            cache_fraction=Fraction(4, 5), users_per_group=4,
            ptot_dbm=(30.0, 50.0), n_locations=25, n_fadings=4, seed=2, name="f2",
        )
        m4 = run_vcc_bd_mrc(Scenario(antennas_per_user=4, **kw))["vcc_bd_mrc"].mean[0]
        m12 = run_vcc_bd_mrc(Scenario(antennas_per_user=12, **kw))["vcc_bd_mrc"].mean[0]
        assert m4[0] > m12[0]  # low power: beamforming loss dominates
        assert m12[1] > m4[1]  # high power: multiplexing wins

    def test_large_m_low_snr_zf_gap(self):
        kw = dict(
            geometry="macro", num_tx_antennas=64, num_states=5,
            cache_fraction=Fraction(4, 5), antennas_per_user=12,
            users_per_group=4, ptot_dbm=(30.0,), n_locations=12, n_fadings=3,
            seed=3, name="f2m12",
        )
        scn = Scenario(**kw)
        bd = run_vcc_bd_mrc(scn)["vcc_bd_mrc"].mean[0, 0]
        zf = run_vcc_zf(scn)["vcc_zf"].mean[0, 0]
        assert (bd - zf) / bd > 0.10


class TestMsvRun:
    def test_rejects_multi_antenna(self):
        with pytest.raises(UnsupportedConfigurationError):
            run_msv(macro_scenario(antennas_per_user=2))

    def test_modified_at_least_original(self):
        scn = symmetric_scenario(num_tx_antennas=8, n_locations=15)
        rep = run_msv(scn)
        assert np.all(rep["msv_modified"].best()[1] >= rep["msv"].single()[1])


class TestImperfectCsi:
    def test_perfect_error_vars_collapse(self):
        scn = symmetric_scenario(
            num_tx_antennas=8, csit_error_var=0.0, csir_error_vars=(0.0,),
            n_locations=8,
        )
        rep = run_imperfect_csi(scn)
        assert np.allclose(
            rep["vcc_zf_csit"].mean, rep["vcc_zf_perfect"].mean, rtol=1e-9
        )

    def test_csit_gain_beats_perfect_gain_at_high_snr(self):
        scn = symmetric_scenario(
            num_tx_antennas=16, csit_error_var=0.01,
            ptot_dbm=(60.0, 65.0), n_locations=30,
        )
        rep = run_imperfect_csi(scn)
        g_perfect = effective_gain(
            rep["vcc_zf_perfect"], rep["cacheless_zf_perfect"], "optimized"
        )
        g_csit = effective_gain(
            rep["vcc_zf_csit"], rep["cacheless_zf_csit"], "optimized"
        )
        assert np.all(g_csit > g_perfect)


class TestCsvRows:
    def test_row_shapes_and_formats(self):
        scn = macro_scenario(n_locations=3)
        rep = run_vcc_bd_mrc(scn)
        rows = rows_for_curve(rep["vcc_bd_mrc"], scn, gain=np.array([2.0, 2.1]))
        assert len(rows) == 2
        assert rows[0]["mean_rate_bits"] == pytest.approx(
            rows[0]["mean_rate_nats"] / np.log(2)
        )
        text = format_csv(rows, {"recipe": "t", "seed": 11})
        lines = text.strip().split("\n")
        assert lines[0] == "# recipe=t"
        assert lines[2].startswith("scheme,ptot_dbm,snr_db,q,")
        assert len(lines) == 3 + len(rows)

    def test_best_rows(self):
        scn = symmetric_scenario(num_tx_antennas=8, n_locations=6)
        rep = run_vcc_bd_mrc(scn)
        rows = rows_for_best(rep["vcc_bd_mrc"], scn)
        assert {r["scheme"] for r in rows} == {"vcc_bd_mrc_opt"}
        assert len(rows) == 2
