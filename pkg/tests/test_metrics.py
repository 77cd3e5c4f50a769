import numpy as np
import pytest
from numpy.testing import assert_allclose

from cvhiding.gauss import (
    NotBonaFideError,
    ansatz_measurement,
    heterodyne_measurement,
    local_homodyne_measurement,
    nonlocal_epr_measurement,
    random_bona_fide_cov,
    tmsv_cov,
)
from cvhiding.metrics import (
    PriorSpec,
    QuadratureError,
    TVEstimate,
    error_probability,
    gaussian_kl,
    linear_combination_basis,
    mutual_information,
    mutual_information_projected,
    outcome_covariance,
    pinsker_bound,
    sign_scheme_marginal,
    tv_gaussian_pair_mc,
    tv_monte_carlo_oracle,
    tv_multi_copy,
    tv_sign_scheme,
)

# frozen from the 1D adaptive-quadrature oracle:
# E[(1 - erf(|Q|/sqrt(2)))]^2 with Q ~ N(0, 2)
HETERODYNE_S0_TV = 0.15352804687619426


def test_outcome_covariance_sums():
    assert_allclose(outcome_covariance(np.eye(4), np.eye(4)).data, 2 * np.eye(4))


def test_outcome_covariance_shared_eigenvectors():
    s, delta = 1.0, 1e-3
    v = outcome_covariance(tmsv_cov(s), nonlocal_epr_measurement(delta))
    lam = np.sort(np.linalg.eigvalsh(v.data))
    expected = np.sort([np.exp(2 * s) + 1 / delta] * 2 + [np.exp(-2 * s) + delta] * 2)
    assert_allclose(lam, expected, rtol=1e-9)


def test_outcome_covariance_commutes_and_checks_dims():
    a, b = tmsv_cov(0.5), heterodyne_measurement()
    assert_allclose(outcome_covariance(a, b).data, outcome_covariance(b, a).data)
    with pytest.raises(ValueError):
        outcome_covariance(np.eye(4), np.eye(6))


def test_mutual_information_closed_form():
    assert mutual_information(2 * np.eye(4), 1.0) == pytest.approx(2 * np.log(1.5))


def test_mutual_information_epr_scaling():
    s = 5.0
    v = outcome_covariance(tmsv_cov(s), nonlocal_epr_measurement(1e-8))
    mi = mutual_information(v, 1.0)
    assert abs(mi - 2 * s) / (2 * s) < 0.02


def test_mutual_information_increases_with_sigma():
    v = tmsv_cov(1.0).data + np.eye(4)
    values = [mutual_information(v, sig) for sig in (0.5, 1.0, 2.0, 4.0)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_mutual_information_orthogonal_invariance():
    rng = np.random.default_rng(7)
    v = random_bona_fide_cov(rng).data
    base = mutual_information(v, 1.0)
    for _ in range(20):
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        assert abs(mutual_information(q @ v @ q.T, 1.0) - base) <= 1e-10


def test_mutual_information_rejects_singular():
    with pytest.raises(ValueError):
        mutual_information(np.zeros((4, 4)), 1.0)


def test_linear_combination_basis_orthonormal():
    for t1, t2 in [(1 / np.sqrt(2), 0.0), (0.5, 0.5), (0.0, 1 / np.sqrt(2))]:
        w = linear_combination_basis(t1, t2)
        assert_allclose(w @ w.T, np.eye(4), atol=1e-14)


def test_linear_combination_basis_rejects_bad_normalisation():
    with pytest.raises(ValueError):
        linear_combination_basis(1.0, 1.0)


def test_projected_mi_diagonal_case():
    s, sigma = 4.0, 1.0
    t1, t2 = 0.5, 0.5
    w = linear_combination_basis(t1, t2)
    v = w.T @ np.diag([np.exp(-2 * s), 3.0, 5.0, 7.0]) @ w
    got = mutual_information_projected(v, t1, t2, sigma)
    assert got == pytest.approx(0.5 * np.log1p(sigma**2 * np.exp(2 * s)), rel=1e-12)
    assert got == pytest.approx(s, rel=0.01)


@pytest.mark.parametrize("t1,t2", [(1 / np.sqrt(2), 0.0), (0.5, 0.5), (0.0, 1 / np.sqrt(2))])
def test_projected_mi_local_homodyne_matches_nonlocal(t1, t2):
    s, delta = 4.0, 1e-8
    local = local_homodyne_measurement(delta, (t1, t2), (-t1, t2))
    v_local = outcome_covariance(tmsv_cov(s), local).data
    v_nonlocal = outcome_covariance(tmsv_cov(s), nonlocal_epr_measurement(delta)).data
    mi_local = mutual_information_projected(v_local, t1, t2, 1.0)
    mi_nonlocal = mutual_information_projected(v_nonlocal, t1, t2, 1.0)
    assert abs(mi_local - mi_nonlocal) / mi_nonlocal < 0.01


def test_projected_mi_vanishes_with_prior():
    v = tmsv_cov(2.0).data + np.eye(4)
    assert mutual_information_projected(v, 0.5, 0.5, 1e-8) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_kl_zero_for_equal():
    v = random_bona_fide_cov(np.random.default_rng(3)).data
    assert gaussian_kl(v, v) == 0.0


def test_gaussian_kl_closed_form():
    # 0.5 * (tr(2 I_2) - 2 + ln(1 / det(2 I_2))) = 1 - ln 2
    assert gaussian_kl(2 * np.eye(2), np.eye(2)) == pytest.approx(1 - np.log(2))
    # per-dimension additivity
    assert gaussian_kl(2 * np.eye(2), np.eye(2)) == pytest.approx(
        2 * gaussian_kl(2 * np.eye(1), np.eye(1))
    )


def test_gaussian_kl_mean_term():
    mu = np.array([0.3, -0.4])
    assert gaussian_kl(np.eye(2), np.eye(2), mu1=mu, mu2=None) == pytest.approx(
        0.5 * mu @ mu
    )


def test_gaussian_kl_thermal_heterodyne_small_eps():
    eps = 0.01
    s_plus = np.diag([1.0, 1 + 2 * eps, 1.0, 1 + 2 * eps]) + np.eye(4)
    s_minus = np.diag([1 + 2 * eps, 1.0, 1 + 2 * eps, 1.0]) + np.eye(4)
    kl = gaussian_kl(s_plus, s_minus)
    assert abs(kl - eps**2) < 2 * eps**3


def test_gaussian_kl_nonnegative_random():
    rng = np.random.default_rng(17)
    for _ in range(50):
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))
        s1 = a @ a.T + 0.1 * np.eye(4)
        s2 = b @ b.T + 0.1 * np.eye(4)
        assert gaussian_kl(s1, s2, rng.normal(size=4), rng.normal(size=4)) >= 0.0


def test_gaussian_kl_rejects_singular():
    with pytest.raises(ValueError):
        gaussian_kl(np.eye(2), np.zeros((2, 2)))


def test_pinsker_bound_values():
    assert pinsker_bound(0.0) == 0.0
    n, eps = 50, 0.02
    assert pinsker_bound(4 * eps**2 * n) == pytest.approx(np.sqrt(2 * n) * eps)
    assert pinsker_bound(2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pinsker_bound(-0.1)


def test_error_probability():
    assert error_probability(1.0) == 0.0
    assert error_probability(0.0) == 0.5
    assert error_probability(0.6) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        error_probability(1.5)


def test_tv_estimate_validation():
    with pytest.raises(ValueError):
        TVEstimate(1.5, 0.0, "analytic")
    with pytest.raises(ValueError):
        TVEstimate(0.5, 0.1, "analytic")
    with pytest.raises(ValueError):
        TVEstimate(0.5, 0.0, "quadrature")
    est = TVEstimate(0.5, 0.0, "analytic", params={"eps": 0.1})
    assert est.as_dict()["eps"] == 0.1


def test_tv_sign_scheme_heterodyne_matches_1d_oracle():
    est = tv_sign_scheme(heterodyne_measurement(), 0.0, 1.0)
    assert est.value == pytest.approx(HETERODYNE_S0_TV, abs=1e-9)
    assert est.method == "quadrature"


def test_tv_sign_scheme_quadrature_vs_monte_carlo():
    quad = tv_sign_scheme(heterodyne_measurement(), 0.0, 1.0)
    mc = tv_sign_scheme(heterodyne_measurement(), 0.0, 1.0, method="monte-carlo",
                        n_samples=200_000, seed=2)
    combined = np.hypot(quad.std_error, mc.std_error)
    assert abs(quad.value - mc.value) <= 3 * combined


def test_tv_sign_scheme_nonlocal_large_squeezing():
    est = tv_sign_scheme(nonlocal_epr_measurement(1e-8), 5.0, 1.0)
    assert est.value >= 0.98


def test_tv_sign_scheme_saturates_with_wide_prior():
    v = heterodyne_measurement()
    values = [tv_sign_scheme(v, 1.0, sigma).value for sigma in (1.0, 10.0, 100.0)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] > 0.98


def test_tv_sign_scheme_monotone_in_marginal_variances():
    # grow one squeezed-pair eigenvalue at a time; TV must not increase
    s = 2.0
    for slot in (2, 3):
        lams = [4.0, 4.0, 0.5, 0.5]
        values = []
        for scale in (0.5, 1.0, 2.0, 4.0):
            lams_mod = list(lams)
            lams_mod[slot] = lams[slot] * scale
            v = ansatz_measurement(*lams_mod)
            values.append(tv_sign_scheme(v, s, 1.0).value)
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_tv_sign_scheme_nonlocal_monotone_in_squeezing():
    values = [tv_sign_scheme(nonlocal_epr_measurement(1e-8), s, 1.0).value
              for s in (1, 2, 3, 4, 5)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_tv_sign_scheme_ppt_dominance():
    rng = np.random.default_rng(29)
    feasible = [
        heterodyne_measurement().data,
        local_homodyne_measurement(1e-6).data,
        local_homodyne_measurement(1e-6, (0, 1), (0, 1)).data,
        ansatz_measurement(2.0, 2.0, 1.0, 1.0).data,
    ] + [random_bona_fide_cov(rng, local=True).data for _ in range(6)]
    for s in (3.0, 4.0, 5.0):
        ceiling = tv_sign_scheme(nonlocal_epr_measurement(1e-8), s, 1.0).value
        for v in feasible:
            assert tv_sign_scheme(v, s, 1.0).value <= ceiling


def test_tv_sign_scheme_rejects_unphysical():
    with pytest.raises(NotBonaFideError):
        tv_sign_scheme(0.01 * np.eye(4), 1.0, 1.0)


def test_tv_sign_scheme_rejects_unknown_method():
    with pytest.raises(ValueError):
        tv_sign_scheme(heterodyne_measurement(), 1.0, 1.0, method="nope")


def test_tv_sign_scheme_mc_needs_enough_samples():
    with pytest.raises(ValueError):
        tv_sign_scheme(heterodyne_measurement(), 1.0, 1.0, method="monte-carlo", n_samples=10)


def test_sign_scheme_marginal_nonlocal_diagonal():
    # accuracy limited by cancellation against the 1/delta entries
    s, delta = 3.0, 1e-8
    m = sign_scheme_marginal(nonlocal_epr_measurement(delta), s)
    assert m[0, 1] == pytest.approx(0.0, abs=1e-7)
    assert m[0, 0] == pytest.approx(np.exp(-2 * s) + delta, rel=1e-4)


def test_tv_multi_copy():
    assert tv_multi_copy(1.0, 5) == 1.0
    assert tv_multi_copy(0.9, 3) == pytest.approx(0.9**3)
    assert tv_multi_copy([0.9, 0.8, 0.7], 3) == pytest.approx(0.9 * 0.8 * 0.7)
    assert tv_multi_copy(0.91, 50) < 0.01
    with pytest.raises(ValueError):
        tv_multi_copy([0.9, 0.8], 3)
    with pytest.raises(ValueError):
        tv_multi_copy(1.2, 3)
    with pytest.raises(ValueError):
        tv_multi_copy(0.5, 0)


def test_tv_multi_copy_nonlocal_five_copies():
    factor = tv_sign_scheme(nonlocal_epr_measurement(1e-8), 5.0, 1.0).value
    assert tv_multi_copy(factor, 5) >= 0.90


def test_mc_oracle_matches_quadrature_on_random_measurements():
    rng = np.random.default_rng(41)
    pulls = []
    for i in range(20):
        v = random_bona_fide_cov(rng)
        s = float(rng.uniform(0.0, 2.0))
        quad = tv_sign_scheme(v, s, 1.0)
        mc = tv_monte_carlo_oracle(v, s, 1.0, n_samples=100_000, seed=100 + i)
        pulls.append(abs(quad.value - mc.value) / max(mc.std_error, 1e-12))
    # per-instance contract is 3 sigma; over 20 draws allow one mild excursion
    assert sum(p > 3.0 for p in pulls) <= 1
    assert max(pulls) < 5.0


def test_mc_oracle_heterodyne_matches_1d_oracle():
    mc = tv_monte_carlo_oracle(heterodyne_measurement(), 0.0, 1.0,
                               n_samples=400_000, seed=9)
    assert abs(mc.value - HETERODYNE_S0_TV) <= 3 * mc.std_error


def test_mc_oracle_seed_reproducible():
    a = tv_monte_carlo_oracle(heterodyne_measurement(), 1.0, 1.0, n_samples=10_000, seed=5)
    b = tv_monte_carlo_oracle(heterodyne_measurement(), 1.0, 1.0, n_samples=10_000, seed=5)
    assert a.value == b.value
    assert a.std_error == b.std_error


def test_mc_oracle_rejects_small_sample_counts():
    with pytest.raises(ValueError):
        tv_monte_carlo_oracle(heterodyne_measurement(), 1.0, 1.0, n_samples=100)


def test_pinsker_dominates_empirical_tv_on_random_pairs():
    rng = np.random.default_rng(59)
    for i in range(50):
        a = rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3))
        s1 = a @ a.T + 0.5 * np.eye(3)
        s2 = b @ b.T + 0.5 * np.eye(3)
        mu1, mu2 = rng.normal(size=3, scale=0.2), rng.normal(size=3, scale=0.2)
        bound = pinsker_bound(gaussian_kl(s1, s2, mu1, mu2))
        est = tv_gaussian_pair_mc(s1, s2, mu1, mu2, n_samples=4_000, seed=i)
        assert est.value <= bound + 3 * est.std_error


def test_tv_gaussian_pair_mc_diagonal_path_consistent_with_dense():
    var1 = np.array([1.0, 2.0, 0.5, 1.5])
    var2 = np.array([1.5, 1.0, 1.0, 0.7])
    diag = tv_gaussian_pair_mc(np.diag(var1), np.diag(var2), n_samples=50_000, seed=4)
    # negligible off-diagonal entry forces the dense code path
    dense1 = np.diag(var1)
    dense1[0, 1] = dense1[1, 0] = 1e-12
    dense = tv_gaussian_pair_mc(dense1, np.diag(var2), n_samples=50_000, seed=4)
    assert abs(diag.value - dense.value) <= 3 * np.hypot(diag.std_error, dense.std_error)


def test_prior_spec_validation():
    PriorSpec(1.0)
    PriorSpec(0.5, np.eye(4))
    with pytest.raises(ValueError):
        PriorSpec(-1.0)
    with pytest.raises(ValueError):
        PriorSpec(1.0, -np.eye(4))


def test_quadrature_doubling_guard_exists():
    # healthy inputs converge; the guard only trips on drifting estimates
    est = tv_sign_scheme(heterodyne_measurement(), 2.0, 1.0, n_nodes=64)
    assert est.std_error < 1e-10
    assert isinstance(QuadratureError("x"), RuntimeError)
