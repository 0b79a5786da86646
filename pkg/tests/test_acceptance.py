"""Acceptance suite: one test per criterion sub-check, one printed line per
criterion (visible with ``pytest -s`` and via ``geoest bench``).

Three sub-checks fail by design of the measurements, not by bugs, and are
asserted at their pinned windows anyway so the failures stay visible:
criterion 3's fitted slope and criterion 5's noiseless fitted slope land
below the [-0.6, -0.4] window (the estimators beat the guaranteed m^{-1/2}
rate at these scales), and criterion 8's two-sided low-rank width exceeds
the closed-form constant sqrt(2r(d1+d2)) (valid only for the one-sided
width).  See notes in the repository docs and the companion checks that pass
with the corrected quantities.
"""

from geoest import acceptance as acc


def _checks(report):
    print(report.line())
    return {c.label: c for c in report.checks}


# -- criterion 1: exact MSE identity of the linear estimator ----------------


def test_criterion_1_mse_identity():
    checks = _checks(acc.criterion_1())
    for variant in ("identity", "noisy", "sign"):
        assert checks[variant].passed, checks[variant].detail


# -- criterion 2: one-bit mu by quadrature ----------------------------------


def test_criterion_2_one_bit_mu():
    checks = _checks(acc.criterion_2())
    assert checks["mu"].passed, checks["mu"].detail


# -- criterion 3: one-bit sparse recovery rate ------------------------------


def test_criterion_3_binary_bound():
    checks = _checks(acc.criterion_3())
    assert checks["binary_bound"].passed, checks["binary_bound"].detail


def test_criterion_3_slope_window():
    # Known red: the measured slope is ~ -0.66, steeper (better) than the
    # pinned [-0.6, -0.4] window derived from the m^{-1/2} guarantee.
    checks = _checks(acc.criterion_3())
    assert checks["slope"].passed, checks["slope"].detail


# -- criterion 4: projection dominance ---------------------------------------


def test_criterion_4_projection_dominance():
    checks = _checks(acc.criterion_4())
    assert checks["dominance"].passed, checks["dominance"].detail


# -- criterion 5: matrix completion ------------------------------------------


def test_criterion_5_bounds():
    checks = _checks(acc.criterion_5())
    assert checks["noiseless_bound"].passed, checks["noiseless_bound"].detail
    assert checks["noisy_bound"].passed, checks["noisy_bound"].detail


def test_criterion_5_noisy_slope_window():
    checks = _checks(acc.criterion_5())
    assert checks["noisy_slope"].passed, checks["noisy_slope"].detail


def test_criterion_5_noiseless_slope_window():
    # Known red: the noiseless masked error vanishes as p -> 1, so its decay
    # (~ -0.92) is steeper than the pinned window.
    checks = _checks(acc.criterion_5())
    assert checks["noiseless_slope"].passed, checks["noiseless_slope"].detail


# -- criterion 6: l1-ball bound satisfaction ---------------------------------


def test_criterion_6_l1_bounds():
    checks = _checks(acc.criterion_6())
    assert checks["two_step"].passed, checks["two_step"].detail
    assert checks["global_width"].passed, checks["global_width"].detail


# -- criterion 7: projection oracles -----------------------------------------


def test_criterion_7_projection_oracles():
    checks = _checks(acc.criterion_7())
    assert checks["l1_vs_kkt"].passed, checks["l1_vs_kkt"].detail
    assert checks["hard_threshold_vs_enumeration"].passed
    assert checks["svd_vs_eckart_young"].passed, checks["svd_vs_eckart_young"].detail


# -- criterion 8: geometry invariants -----------------------------------------


def test_criterion_8_cone_invariants():
    checks = _checks(acc.criterion_8())
    assert checks["cone_homogeneity"].passed, checks["cone_homogeneity"].detail
    assert checks["w_t_le_t_sqrt_n"].passed, checks["w_t_le_t_sqrt_n"].detail
    assert checks["cone_floor"].passed, checks["cone_floor"].detail


def test_criterion_8_width_windows_and_alpha():
    checks = _checks(acc.criterion_8())
    assert checks["sparse_width_window"].passed, checks["sparse_width_window"].detail
    assert checks["alpha_at_scale"].passed, checks["alpha_at_scale"].detail
    assert checks["low_rank_width_difference_rank_form"].passed


def test_criterion_8_low_rank_width_formula():
    # Known red: the measured two-sided width (~25.6) exceeds the closed-form
    # constant sqrt(2r(d1+d2)) = 20, which bounds only the one-sided width.
    checks = _checks(acc.criterion_8())
    assert checks["low_rank_width_formula"].passed, checks["low_rank_width_formula"].detail


# -- criterion 9: link-constant rescaling inequality --------------------------


def test_criterion_9_rescaling_inequality():
    checks = _checks(acc.criterion_9())
    for label in ("sign", "identity", "cubic"):
        assert checks[label].passed, checks[label].detail


# -- criterion 10: determinism -------------------------------------------------


def test_criterion_10_determinism(monkeypatch):
    monkeypatch.delenv("GEOEST_THREADS", raising=False)
    checks = _checks(acc.criterion_10())
    assert checks["rerun"].passed, checks["rerun"].detail
    assert checks["threads"].passed, checks["threads"].detail


# -- extra: high-probability quantile bound -----------------------------------


def test_whp_quantile_bound():
    checks = _checks(acc.whp_quantile_check())
    assert checks["q95"].passed, checks["q95"].detail
