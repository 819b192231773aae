import numpy as np
import pytest
from sklearn.svm import OneClassSVM

from edog.errors import DomainError
from edog.ocsvm import fit_ocsvm, rbf_kernel


def gaussian(n=200, d=3, seed=0):
    return np.random.default_rng(seed).standard_normal((n, d))


def assert_feasible(m):
    bound = 1.0 / (m.nu * len(m.alpha))
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= bound)
    assert abs(m.alpha.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("nu", [0.1, 0.3, 0.5, 0.8])
def test_nu_property(nu):
    x = gaussian(seed=int(nu * 10))
    m = fit_ocsvm(x, nu=nu)
    assert m.converged
    assert_feasible(m)
    assert abs(np.mean(m.decision_function(x) < 0) - nu) <= 0.15


def test_matches_sklearn():
    # sklearn scales the dual by nu * l, so its decision values are ours times nu * l
    x = gaussian(150, 4, seed=3)
    m = fit_ocsvm(x, nu=0.4, tol=1e-8)
    sk = OneClassSVM(nu=0.4, gamma=m.gamma, tol=1e-8).fit(m.transform(x))
    ours = m.decision_function(x) * 0.4 * 150
    assert np.allclose(ours, sk.decision_function(m.transform(x)), atol=1e-4)


def test_far_point_is_most_negative():
    x = np.vstack([gaussian(100, 2, seed=1), [[10.0, 0.0]]])
    m = fit_ocsvm(x, nu=0.1)
    d = m.decision_function(x)
    assert np.argmin(d) == 100


def test_identical_points():
    x = np.ones((10, 3))
    m = fit_ocsvm(x, nu=0.5)
    d = m.decision_function(x)
    assert np.allclose(d, d[0], atol=1e-14)
    assert_feasible(m)


def test_two_decision_forms_agree():
    x = gaussian(120, 5, seed=7)
    m = fit_ocsvm(x, nu=0.3)
    probe = gaussian(40, 5, seed=8) * 2
    assert np.max(np.abs(m.decision_function(probe) - m.decision_function_full(probe))) <= 1e-10


def test_deterministic_and_errors():
    x = gaussian(80, 2, seed=2)
    a, b = fit_ocsvm(x, seed=4), fit_ocsvm(x, seed=4)
    assert np.array_equal(a.alpha, b.alpha) and a.rho == b.rho
    with pytest.raises(DomainError):
        fit_ocsvm(x, nu=0.0)
    with pytest.raises(DomainError):
        fit_ocsvm(x, nu=1.5)
    with pytest.raises(DomainError):
        fit_ocsvm(x[:1])


def test_nonconvergence_warns():
    x = gaussian(60, 2, seed=5)
    with pytest.warns(RuntimeWarning):
        m = fit_ocsvm(x, nu=0.5, max_iter=1)
    assert not m.converged
    assert_feasible(m)


def test_rbf_kernel():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    k = rbf_kernel(a, a, 0.5)
    assert np.allclose(k, [[1, np.exp(-1)], [np.exp(-1), 1]], atol=1e-15)
