import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, covariance_brute
from pmindex.cfa import (
    CfaFit,
    CfaParams,
    ManifestVector,
    SampleCovariance,
    anderson_rubin_scores,
    discrepancy_f,
    draw_manifest,
    fit,
    fit_statistics,
    gradient_f,
    hessian_f,
    implied_covariance,
    log_likelihood,
    manifest_vector,
    sample_covariance,
    standard_errors,
)
from pmindex.config import RunConfig
from pmindex.errors import InsufficientSampleError, NotAtMinimumError, SingularCovarianceError
from pmindex.indices import IndexBundle
from pmindex.synth import REFERENCE_ERROR_VARIANCES, REFERENCE_LOADINGS

TRUE_LAM = np.array([8.0, 17.0, 3.5, 7.0, 4.0, 18.0])
TRUE_THETA = np.full(6, 10.0)


def random_params(rng, p=6):
    return CfaParams(rng.normal(0, 3, size=p), rng.uniform(0.5, 5.0, size=p))


def random_s(rng, p=6, n=40):
    x = rng.normal(size=(n, p)) @ rng.normal(size=(p, p))
    return sample_covariance(x)


def synthetic_sample(n, seed, lam=REFERENCE_LOADINGS, theta=REFERENCE_ERROR_VARIANCES):
    return draw_manifest(lam, theta, n, np.random.default_rng(seed))


# ---- manifest vectors and sample covariance


def test_manifest_vector_published_row():
    b = IndexBundle(h=52, g=129, h_i=25.75, ar_sum=1733.49, sqrt_ar=math.sqrt(1733.49),
                    n_papers=581, n_citations=17213)
    v = manifest_vector(b).as_array()
    assert v == pytest.approx([52, 86, 25.75, 41.64, 24.10, 92.77], abs=0.01)


def test_manifest_vector_trivial():
    assert manifest_vector(IndexBundle()).as_array().tolist() == [0.0] * 6
    v = manifest_vector(IndexBundle(n_papers=100, n_citations=200)).as_array()
    assert v.tolist() == [0, 0, 0, 0, 10, 10]


def test_manifest_vector_round_trip():
    v = ManifestVector.from_array([1, 2, 3, 4, 5, 6])
    assert ManifestVector.from_array(v.as_array()) == v


def test_sample_covariance_examples():
    assert np.all(sample_covariance([[1.0] * 6, [1.0] * 6]).matrix == 0)
    s = sample_covariance([[0.0] * 6, [2.0] + [0.0] * 5]).matrix
    expected = np.zeros((6, 6))
    expected[0, 0] = 2.0
    assert np.array_equal(s, expected)


def test_sample_covariance_matches_oracle():
    x = np.random.default_rng(3).normal(5, 2, size=(50, 6))
    s = sample_covariance(x)
    assert s.n == 50
    assert np.max(np.abs(s.matrix - covariance_brute(x))) < 1e-10


def test_sample_covariance_accepts_manifest_vectors():
    x = np.random.default_rng(4).normal(size=(5, 6))
    vecs = [ManifestVector.from_array(r) for r in x]
    assert np.allclose(sample_covariance(vecs).matrix, sample_covariance(x).matrix)


@pytest.mark.parametrize("rows", [[], [[1.0] * 6]])
def test_sample_covariance_needs_two_vectors(rows):
    with pytest.raises(InsufficientSampleError, match="insufficient sample"):
        sample_covariance(rows)


# ---- implied covariance and discrepancy


def test_implied_covariance_examples():
    assert np.array_equal(implied_covariance(CfaParams(np.zeros(6), np.ones(6))), np.eye(6))
    sigma = implied_covariance(CfaParams([1, 2, 3, 0, 0, 0], np.ones(6)))
    assert sigma[0, 1] == 2 and sigma[1, 2] == 6 and sigma[0, 0] == 2
    assert np.array_equal(sigma, sigma.T)


def test_discrepancy_scalar_case():
    assert discrepancy_f(CfaParams([0.0], [1.0]), np.array([[2.0]])) == pytest.approx(1 - math.log(2), abs=1e-15)


def test_discrepancy_is_zero_at_implied():
    rng = np.random.default_rng(11)
    for _ in range(100):
        params = random_params(rng)
        assert abs(discrepancy_f(params, implied_covariance(params))) < 1e-12


def test_discrepancy_nonnegative():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        assert discrepancy_f(random_params(rng), random_s(rng)) >= -1e-12


def test_discrepancy_singular_inputs():
    params = CfaParams(np.ones(6), np.ones(6))
    with pytest.raises(SingularCovarianceError, match="singular covariance"):
        discrepancy_f(params, np.ones((6, 6)))
    with pytest.raises(SingularCovarianceError):
        discrepancy_f(CfaParams(np.ones(6), np.zeros(6)), np.eye(6))


def test_joreskog_equivalence():
    rng = np.random.default_rng(13)
    s = random_s(rng)
    n = 238
    for _ in range(100):
        a, b = random_params(rng), random_params(rng)
        df = discrepancy_f(a, s) - discrepancy_f(b, s)
        dl = -(2.0 / n) * (log_likelihood(a, s, n) - log_likelihood(b, s, n))
        assert abs(df - dl) < 1e-10


# ---- derivatives


def test_gradient_zero_at_exact_fit():
    params = CfaParams(TRUE_LAM, TRUE_THETA)
    g = gradient_f(params, implied_covariance(params))
    assert np.max(np.abs(g)) < 1e-12


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    s = random_s(rng)
    worst = 0.0
    for _ in range(50):
        params = random_params(rng)
        analytic = gradient_f(params, s)
        numeric = central_difference(lambda z: discrepancy_f(CfaParams.from_vector(z), s), params.vector())
        rel = np.max(np.abs(analytic - numeric)) / max(1.0, np.max(np.abs(analytic)))
        worst = max(worst, rel)
    assert worst < 1e-6


def test_hessian_matches_finite_differences_of_gradient():
    rng = np.random.default_rng(15)
    s = random_s(rng)
    for _ in range(10):
        params = random_params(rng)
        h = hessian_f(params, s)
        z = params.vector()
        cols = [central_difference(lambda zz: gradient_f(CfaParams.from_vector(zz), s)[k], z)
                for k in range(len(z))]
        numeric = np.array(cols)
        assert np.array_equal(h, h.T)
        assert np.max(np.abs(h - numeric)) / max(1.0, np.max(np.abs(h))) < 1e-6


# ---- fitting


def test_fit_recovers_exact_structure():
    s = SampleCovariance(implied_covariance(CfaParams(TRUE_LAM, TRUE_THETA)), 238)
    f = fit(s)
    assert f.converged
    assert np.max(np.abs(f.loadings - TRUE_LAM)) < 1e-4
    assert np.max(np.abs(f.params.error_variances - TRUE_THETA)) < 1e-4
    assert f.f_min < 1e-10
    assert f.chi_square == pytest.approx(0.0, abs=1e-7)


def test_fit_identity_has_no_common_variance():
    with pytest.warns(RuntimeWarning, match="baseline"):
        f = fit(SampleCovariance(np.eye(6), 100))
    assert f.statistics.degenerate_baseline
    assert np.max(np.abs(f.loadings)) < 1e-3
    assert f.params.error_variances == pytest.approx(np.ones(6), abs=1e-5)


def test_fit_rejects_non_pd():
    with pytest.raises(SingularCovarianceError):
        fit(SampleCovariance(np.ones((6, 6)), 50))


def test_fit_reports_non_convergence():
    s = sample_covariance(synthetic_sample(200, 1))
    f = fit(s, RunConfig(max_iter=2))
    assert not f.converged
    assert f.iterations == 2


def test_fit_within_three_se_at_n500():
    f = fit(sample_covariance(synthetic_sample(500, 21)))
    assert f.converged
    assert np.all(np.abs(f.loadings - np.array(REFERENCE_LOADINGS)) <= 3 * f.standard_errors)
    assert np.all(f.standard_errors > 0)
    assert f.r_squared == pytest.approx(f.standardized_loadings ** 2, rel=0, abs=0)


def test_fit_is_order_invariant():
    x = synthetic_sample(300, 22)
    a = fit(sample_covariance(x))
    b = fit(sample_covariance(x[np.random.default_rng(0).permutation(len(x))]))
    assert a.loadings == pytest.approx(b.loadings, rel=1e-6)


@pytest.mark.parametrize("j, c", [(0, 3.0), (3, 0.25), (5, 10.0)])
def test_scaling_a_variable_scales_its_loading(j, c):
    x = synthetic_sample(500, 23)
    base = fit(sample_covariance(x))
    y = x.copy()
    y[:, j] *= c
    scaled = fit(sample_covariance(y))
    assert scaled.loadings[j] == pytest.approx(c * base.loadings[j], rel=1e-6)
    assert scaled.standardized_loadings == pytest.approx(base.standardized_loadings, abs=1e-6)


def test_fit_round_trips_through_dict():
    f = fit(sample_covariance(synthetic_sample(100, 24)))
    g = CfaFit.from_dict(f.to_dict())
    assert g.to_dict() == f.to_dict()


# ---- standard errors


def test_se_scale_with_sample_size():
    s = sample_covariance(synthetic_sample(500, 25))
    a = fit(s)
    b = fit(SampleCovariance(s.matrix, 2 * s.n))
    ratio = b.standard_errors / a.standard_errors
    assert ratio == pytest.approx(np.full(6, 1 / math.sqrt(2)), rel=0.02)


def test_se_multiplier_convention():
    s = sample_covariance(synthetic_sample(200, 26))
    a = fit(s, RunConfig(chi_square_multiplier="n-1"))
    b = fit(s, RunConfig(chi_square_multiplier="n"))
    assert b.standard_errors == pytest.approx(a.standard_errors * math.sqrt(199 / 200), rel=1e-9)
    assert b.chi_square == pytest.approx(a.chi_square * 200 / 199, rel=1e-9)


def test_se_monte_carlo_calibration():
    est, ses = [], []
    for r in range(200):
        f = fit(sample_covariance(synthetic_sample(500, 1000 + r)))
        assert f.converged
        est.append(f.loadings[0])
        ses.append(f.standard_errors[0])
    assert np.std(est, ddof=1) == pytest.approx(np.mean(ses), rel=0.15)


def test_se_rejects_non_minimum():
    # the zero-loading point of a one-factor population is a saddle of F
    s = implied_covariance(CfaParams(TRUE_LAM, TRUE_THETA))
    with pytest.raises(NotAtMinimumError, match="not at a minimum"):
        standard_errors(CfaParams(np.zeros(6), np.diag(s)), s, 237)


# ---- fit statistics


def test_perfect_fit_statistics():
    s = implied_covariance(CfaParams(TRUE_LAM, TRUE_THETA))
    st_ = fit_statistics(0.0, 100, s, s)
    assert (st_.chi_square, st_.gfi, st_.nfi, st_.cfi) == (0.0, pytest.approx(1.0), 1.0, 1.0)
    assert st_.df == 9 and st_.baseline_df == 15


def test_chi_square_grows_with_n():
    s = random_s(np.random.default_rng(27))
    sigma = np.diag(np.diag(s.matrix))
    values = [fit_statistics(0.3, n, s, sigma).chi_square for n in (10, 50, 51, 500)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(499 * 0.3)


def test_degenerate_baseline_warns():
    with pytest.warns(RuntimeWarning):
        st_ = fit_statistics(0.0, 50, np.eye(6), np.eye(6))
    assert st_.degenerate_baseline and st_.nfi == st_.nnfi == st_.cfi == 1.0


def test_well_specified_model_fits_well():
    f = fit(sample_covariance(synthetic_sample(500, 28)))
    assert f.cfi > 0.95
    assert f.chi_square == (f.n - 1) * f.f_min


def test_fit_indices_formulas():
    f = fit(sample_covariance(synthetic_sample(120, 29)))
    st_ = f.statistics
    assert st_.nfi == pytest.approx((st_.baseline_chi_square - st_.chi_square) / st_.baseline_chi_square)
    lhs = st_.baseline_chi_square / 15
    assert st_.nnfi == pytest.approx((lhs - st_.chi_square / 9) / (lhs - 1))
    assert 0 <= st_.cfi <= 1 and st_.gfi <= 1


# ---- Anderson-Rubin scores


@given(st.integers(0, 10_000), st.integers(20, 400))
@settings(max_examples=25, deadline=None)
def test_anderson_rubin_moments(seed, n):
    x = synthetic_sample(n, seed)
    f = fit(sample_covariance(x))
    if not f.converged:
        return
    scores = anderson_rubin_scores(f, x)
    assert abs(scores.mean()) < 1e-6
    assert abs(scores.var(ddof=1) - 1.0) < 1e-6


def test_anderson_rubin_monotone():
    x = synthetic_sample(200, 30)
    f = fit(sample_covariance(x))
    assert np.all(f.loadings > 0)
    base = anderson_rubin_scores(f, x)
    for j in range(6):
        y = x.copy()
        y[7, j] += 5.0
        bumped = anderson_rubin_scores(f, y)
        # centring moves everyone by the same amount; compare relative to a peer
        assert bumped[7] - bumped[8] >= base[7] - base[8]


def test_anderson_rubin_rejects_singular_theta():
    f = fit(sample_covariance(synthetic_sample(50, 31)))
    bad = CfaFit.from_dict({**f.to_dict(), "error_variances": [0.0] * 6})
    with pytest.raises(SingularCovarianceError):
        anderson_rubin_scores(bad, synthetic_sample(50, 31))
