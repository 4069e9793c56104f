import numpy as np
import pytest

from kgard.core import (
    Dataset,
    KgardConfig,
    KgardSolver,
    NumericalError,
    RegularizerKind,
    build_design,
    chol_extend,
    chol_init,
    kgard_fit,
    predict,
    regularized_ls_solve,
    select_index,
    _cholesky,
)
from kgard.kernel import KernelParams, gram_matrix


def _random_gram(rng, n, d=1, sigma=0.4):
    pts = rng.uniform(0, 1, size=(n, d))
    return gram_matrix(pts, KernelParams(sigma)), pts


def _dense_solution(system, y, lam, weights=None):
    # independent oracle: explicit normal equations via numpy solve
    x = system.design_matrix()
    b = system.b_matrix(weights)
    return np.linalg.solve(x.T @ x + lam * b, x.T @ y)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros(3), np.zeros(4))
    data = Dataset([0.0, 1.0], [1.0, 2.0])
    assert data.size == 2
    assert data.inputs.shape == (2, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        KgardConfig(lam=0.0, epsilon=1.0)
    with pytest.raises(ValueError):
        KgardConfig(lam=1.0, epsilon=-1.0)
    with pytest.raises(ValueError):
        KgardConfig(lam=1.0, epsilon=1.0, stop_norm="l1")
    with pytest.raises(ValueError):
        KgardConfig(lam=1.0, epsilon=1.0, tikhonov_weights=[1.0, 0.0])


def test_regularized_ls_matches_dense_oracle():
    rng = np.random.default_rng(0)
    # narrow kernel keeps the Gram well conditioned so the RKHS-norm
    # variant (whose penalty vanishes along near-null directions of K)
    # stays factorizable
    gram, _ = _random_gram(rng, 20, sigma=0.05)
    y = rng.normal(size=20)
    for kind in RegularizerKind:
        system = build_design(gram, kind)
        z = regularized_ls_solve(system, y, lam=0.5)
        expected = _dense_solution(system, y, 0.5)
        assert np.allclose(z, expected, atol=1e-10)


def test_selected_identity_column_zeroes_its_residual():
    # an unregularized identity column lets the solve drive that
    # coordinate's residual to exactly zero
    rng = np.random.default_rng(1)
    gram, _ = _random_gram(rng, 15)
    y = rng.normal(size=15)
    y[7] += 50.0
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    factor, _ = chol_init(system, 0.5, y)
    _, z = chol_extend(factor, system, 7, 0.5, y)
    r = y - system.apply(z)
    assert abs(r[7]) < 1e-9
    assert np.linalg.norm(r) > 1e-3  # other coordinates still misfit


def test_chol_extend_matches_from_scratch():
    rng = np.random.default_rng(2)
    gram, _ = _random_gram(rng, 25)
    y = rng.normal(size=25)
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    factor, z = chol_init(system, 0.3, y)
    for j in (3, 11, 19):
        factor, z = chol_extend(factor, system, j, 0.3, y)
        expected = _dense_solution(system, y, 0.3)
        assert np.allclose(z, expected, atol=1e-9)


def test_chol_extend_rejects_bad_columns():
    rng = np.random.default_rng(3)
    gram, _ = _random_gram(rng, 10)
    y = rng.normal(size=10)
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    factor, _ = chol_init(system, 1.0, y)
    with pytest.raises(ValueError):
        chol_extend(factor, system, 10, 1.0, y)
    factor, _ = chol_extend(factor, system, 4, 1.0, y)
    with pytest.raises(ValueError):
        chol_extend(factor, system, 4, 1.0, y)


def test_cholesky_failure_reports_pivot():
    with pytest.raises(NumericalError) as err:
        _cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))
    assert err.value.pivot == 1


def test_select_index_max_and_tie_rule():
    r = np.array([1.0, -3.0, 3.0, 0.5])
    assert select_index(r, [0, 1, 2, 3]) == 1  # tie -> smallest index
    assert select_index(r, [0, 2, 3]) == 2
    with pytest.raises(ValueError):
        select_index(r, [])


def test_fit_recovers_planted_outliers():
    rng = np.random.default_rng(4)
    n = 60
    gram, pts = _random_gram(rng, n)
    alpha = rng.normal(0, 0.5, size=n)
    truth = gram @ alpha + 2.0
    y = truth.copy()
    planted = [5, 23, 48]
    y[planted] += np.array([30.0, -25.0, 40.0])
    solver = KgardSolver(gram, lam=1.0)
    sol = solver.fit(y, epsilon=0.0, max_selections=3)
    assert sorted(sol.support) == planted
    for j in planted:
        assert sol.outliers[j] == pytest.approx(y[j] - truth[j], abs=2.0)


def test_fit_residual_history_decreases():
    rng = np.random.default_rng(5)
    gram, _ = _random_gram(rng, 40)
    y = rng.normal(size=40)
    y[[3, 17]] += 20.0
    sol = KgardSolver(gram, lam=0.5).fit(y, epsilon=0.0, max_selections=5)
    hist = sol.residual_history
    assert all(b < a for a, b in zip(hist, hist[1:]))
    assert len(hist) == sol.iterations + 1


def test_fit_truncation_flag_and_epsilon_stop():
    rng = np.random.default_rng(6)
    gram, _ = _random_gram(rng, 30)
    y = rng.normal(size=30)
    capped = KgardSolver(gram, lam=1.0).fit(y, epsilon=0.0, max_selections=2)
    assert capped.truncated and capped.iterations == 2
    loose = KgardSolver(gram, lam=1.0).fit(y, epsilon=1e6)
    assert not loose.truncated and loose.iterations == 0


def test_fit_linf_stop_norm():
    rng = np.random.default_rng(7)
    gram, _ = _random_gram(rng, 30)
    y = rng.normal(size=30)
    y[12] += 15.0
    sol = KgardSolver(gram, lam=1.0).fit(y, epsilon=3.0, stop_norm="linf")
    fitted = gram @ sol.alpha + sol.bias
    for j, u in sol.outliers.items():
        fitted[j] += u
    assert np.max(np.abs(y - fitted)) <= 3.0


def test_fit_epsilon_fn_overrides_epsilon():
    rng = np.random.default_rng(8)
    gram, _ = _random_gram(rng, 30)
    y = rng.normal(size=30)
    calls = []

    def eps_fn(abs_r):
        calls.append(abs_r.copy())
        return float(np.max(abs_r)) + 1.0  # always satisfied

    sol = KgardSolver(gram, lam=1.0).fit(
        y, epsilon=0.0, stop_norm="linf", epsilon_fn=eps_fn
    )
    assert sol.iterations == 0
    assert len(calls) == 1 and calls[0].shape == (30,)


def test_solver_matches_functional_path():
    rng = np.random.default_rng(9)
    gram, _ = _random_gram(rng, 35)
    y = rng.normal(size=35)
    y[[4, 20]] += np.array([25.0, -30.0])
    sol = KgardSolver(gram, lam=0.7).fit(y, epsilon=0.0, max_selections=2)
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    system.outlier_support.extend(sol.support)
    z = regularized_ls_solve(system, y, 0.7)
    assert np.allclose(sol.alpha, z[:35], atol=1e-9)
    assert sol.bias == pytest.approx(z[35], abs=1e-9)


def test_tikhonov_weights_scale_effective_penalty():
    rng = np.random.default_rng(10)
    n = 20
    gram, _ = _random_gram(rng, n)
    y = rng.normal(size=n)
    w = np.ones(n + 1)
    w[:5] = np.sqrt(5.0)
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    z_w = regularized_ls_solve(system, y, lam=0.4, weights=w)
    # oracle: plain identity regularizer with the diagonal scaled by w^2
    x = system.design_matrix()
    expected = np.linalg.solve(x.T @ x + 0.4 * np.diag(w**2), x.T @ y)
    assert np.allclose(z_w, expected, atol=1e-10)


def test_rkhs_regularizer_uses_gram_penalty():
    rng = np.random.default_rng(11)
    gram, _ = _random_gram(rng, 15)
    system = build_design(gram, RegularizerKind.RKHS_NORM)
    b = system.b_matrix()
    assert np.array_equal(b[:15, :15], gram)
    assert np.all(b[15:, :] == 0) and np.all(b[:, 15:] == 0)


def test_b_matrix_zero_padding_for_selected_columns():
    rng = np.random.default_rng(12)
    gram, _ = _random_gram(rng, 8)
    system = build_design(gram, RegularizerKind.COEFFICIENT_NORM)
    system.outlier_support.extend([2, 5])
    b = system.b_matrix()
    assert b.shape == (11, 11)
    assert np.array_equal(b[:9, :9], np.eye(9))
    assert np.all(b[9:, :] == 0) and np.all(b[:, 9:] == 0)


def test_kgard_fit_and_predict_end_to_end():
    rng = np.random.default_rng(13)
    x = np.linspace(0, 1, 50)
    params = KernelParams(0.2)
    gram = gram_matrix(x, params)
    truth = gram @ rng.normal(0, 0.5, size=50) + 1.0
    y = truth.copy()
    y[10] += 40.0
    config = KgardConfig(lam=0.1, epsilon=0.0, max_selections=1)
    sol = kgard_fit(Dataset(x, y), params, config)
    assert sol.support == [10]
    pred = predict(sol, x, x, params)
    assert np.sqrt(np.mean((pred - truth) ** 2)) < 0.5


def test_predict_rejects_mismatched_coefficients():
    sol = KgardSolver(np.eye(3) * 0.5 + 0.5, lam=1.0).fit(np.zeros(3), epsilon=1.0)
    with pytest.raises(ValueError):
        predict(sol, np.zeros((4, 1)), np.zeros((2, 1)), KernelParams(1.0))
