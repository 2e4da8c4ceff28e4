import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from spotlier import robust_coding as rc
from spotlier.robust_coding import AdmmState, RobustCodingProblem, robust_sparse_code


def scalar_problem(alpha=1e-5, beta=0.3):
    return RobustCodingProblem(np.array([[1.0]]), np.array([[1.0]]), alpha, beta)


def random_problem(seed, p=12, k=4, n=3, planted=True):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(p, k))
    d /= np.linalg.norm(d, axis=0)
    if planted:
        psi = np.where(rng.random((k, n)) < 0.5, rng.normal(size=(k, n)), 0.0)
        r = np.where(rng.random((p, n)) < 0.15, rng.normal(scale=2.0, size=(p, n)), 0.0)
        y = d @ psi + r + 0.01 * rng.normal(size=(p, n))
    else:
        y = rng.normal(size=(p, n))
    return RobustCodingProblem(y, d, alpha=float(rng.uniform(0.01, 0.3)),
                               beta=float(rng.uniform(0.05, 0.8)))


@pytest.mark.parametrize("x,tau,expected", [(0.5, 0.2, 0.3), (-0.05, 0.1, 0.0), (-2.0, 0.5, -1.5),
                                            (0.7, 0.0, 0.7)])
def test_soft_scalar(x, tau, expected):
    assert rc.soft(x, tau) == pytest.approx(expected, abs=1e-15)


def test_soft_rejects_negative_threshold():
    with pytest.raises(ValueError):
        rc.soft(1.0, -0.1)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1e3, 1e3), tau=st.floats(0, 1e2))
def test_soft_is_the_l1_prox(x, tau):
    # soft(x, tau) minimizes 0.5 (u - x)^2 + tau |u|; compare against nearby points
    u = rc.soft(x, tau)
    f = lambda v: 0.5 * (v - x) ** 2 + tau * abs(v)  # noqa: E731
    for v in (u - 1e-3, u + 1e-3, 0.0, x):
        assert f(u) <= f(v) + 1e-9 * (1 + abs(x))
    assert abs(u) <= abs(x) and (u == 0 or np.sign(u) == np.sign(x))


def test_objective_examples():
    prob = RobustCodingProblem(np.array([[1.0]]), np.array([[1.0]]), 0.1, 0.1)
    assert rc.objective(prob, np.array([[0.5]]), np.array([[0.25]])) == pytest.approx(0.10625, abs=1e-15)
    p = random_problem(0)
    zero_k, zero_p = np.zeros((4, 3)), np.zeros((12, 3))
    assert rc.objective(p, zero_k, zero_p) == pytest.approx(0.5 * np.sum(p.y ** 2))
    psi, r = np.ones((4, 3)), np.full((12, 3), 0.5)
    exact = RobustCodingProblem(p.d @ psi + r, p.d, p.alpha, p.beta)
    assert rc.objective(exact, psi, r) == pytest.approx(p.alpha * 12 + p.beta * 18)


def test_psi_update_scalar():
    prob = RobustCodingProblem(np.array([[2.0]]), np.array([[1.0]]))
    state = AdmmState.zeros(prob, 1.0)
    assert rc.psi_update(state, prob)[0, 0] == pytest.approx(1.0)


def test_psi_update_orthonormal_closed_form():
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 3)))
    prob = RobustCodingProblem(np.random.default_rng(2).normal(size=(6, 2)), q)
    state = AdmmState.zeros(prob, 1.0)
    state.z = np.random.default_rng(3).normal(size=(3, 2))
    np.testing.assert_allclose(rc.psi_update(state, prob), (q.T @ prob.y + state.z) / 2, atol=1e-12)


def test_psi_update_matches_dense_solve():
    prob = random_problem(4, p=6, k=3, n=2)
    rng = np.random.default_rng(5)
    state = AdmmState(np.zeros((3, 2)), rng.normal(size=(6, 2)), rng.normal(size=(3, 2)),
                      rng.normal(size=(3, 2)), 0.7)
    a = prob.d.T @ prob.d + 0.7 * np.eye(3)
    ref = np.linalg.solve(a, prob.d.T @ (prob.y - state.r) + 0.7 * (state.z + state.m))
    np.testing.assert_allclose(rc.psi_update(state, prob), ref, atol=1e-10)


def test_r_update_examples():
    prob = RobustCodingProblem(np.array([[0.5]]), np.array([[1.0]]), beta=0.2)
    state = AdmmState.zeros(prob, 1.0)
    assert rc.r_update(state, prob)[0, 0] == pytest.approx(0.3)
    p = random_problem(6)
    s = AdmmState.zeros(p, 1.0)
    p.beta = float(np.abs(p.y).max())
    assert np.all(rc.r_update(s, p) == 0)
    p.beta = 0.0
    np.testing.assert_array_equal(rc.r_update(s, p), p.y)


def test_z_update_examples():
    prob = RobustCodingProblem(np.zeros((1, 1)), np.ones((1, 1)), alpha=0.1)
    st_ = AdmmState(np.array([[-0.05]]), np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), 1.0)
    assert rc.z_update(st_, prob)[0, 0] == 0
    prob.alpha = 1e-5
    st_.psi = np.array([[1.0]])
    assert rc.z_update(st_, prob)[0, 0] == pytest.approx(0.99999, abs=1e-15)
    prob.alpha = 0.0
    st_.m = np.array([[0.25]])
    assert rc.z_update(st_, prob)[0, 0] == 0.75


def test_m_update_sign():
    psi = np.array([[1.0, 2.0]])
    state = AdmmState(psi, None, psi.copy(), np.array([[0.3, -0.1]]), 1.0)
    np.testing.assert_array_equal(rc.m_update(state), state.m)
    state = AdmmState(psi, None, psi + 0.5, np.zeros((1, 2)), 1.0)
    # accumulates the split violation Z - Psi with a plus sign
    np.testing.assert_array_equal(rc.m_update(state), [[0.5, 0.5]])


def test_three_iteration_hand_trace():
    prob = scalar_problem()
    y, a, b = 1.0, 1e-5, 0.3
    psi = r = z = m = 0.0
    mu = 1.0
    expected = []
    for _ in range(3):
        psi = (y - r + mu * (z + m)) / (1 + mu)
        r = float(oracles.soft(y - psi, b))
        z_old, z = z, float(oracles.soft(psi - m, a / mu))
        m = m + (z - psi)
        pr, du = abs(z - psi), mu * abs(z - z_old)
        expected.append((psi, r, z, m, mu))
        if pr > 10 * du:
            mu, m = 2 * mu, m / 2
        elif du > 10 * pr:
            mu, m = mu / 2, m * 2
    res = robust_sparse_code(prob, max_iters=3, trace=True)
    got_psi, got_r = res.psi[0, 0], res.r[0, 0]
    assert got_psi == pytest.approx(expected[-1][0], abs=1e-15)
    assert got_r == pytest.approx(expected[-1][1], abs=1e-15)
    assert [row[4] for row in res.trace] == [e[4] for e in expected]


def test_residuals_and_adaptation():
    a = AdmmState(None, None, np.zeros((2, 1)), None, 0.5)
    b = AdmmState(np.zeros((2, 1)), None, np.array([[2.0], [0.0]]), None, 0.5)
    assert rc.residuals(a, b) == (2.0, 1.0)
    same = AdmmState(np.ones((2, 1)), None, np.ones((2, 1)), None, 1.0)
    assert rc.residuals(same, same) == (0.0, 0.0)
    m = np.ones(3)
    mu, m2 = rc.adapt_mu(1.0, 100.0, 1.0, m)
    assert mu == 2.0 and np.all(m2 == 0.5)
    mu, m2 = rc.adapt_mu(1.0, 1.0, 100.0, m)
    assert mu == 0.5 and np.all(m2 == 2.0)
    assert rc.adapt_mu(1.0, 3.0, 3.0, m)[0] == 1.0


def test_zero_data_is_fixed_point():
    prob = RobustCodingProblem(np.zeros((5, 3)), np.eye(5)[:, :2])
    res = robust_sparse_code(prob)
    assert res.iterations == 1 and res.converged
    assert not res.psi.any() and not res.r.any()


def test_scalar_instance_matches_grid_search():
    res = robust_sparse_code(scalar_problem())
    assert res.psi[0, 0] == pytest.approx(1 - 1e-5, abs=1e-4)
    assert abs(res.r[0, 0]) < 1e-4
    best, _ = oracles.scalar_grid(1.0, 1e-5, 0.3)
    assert res.objective - best <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_matches_proximal_gradient(seed):
    prob = random_problem(seed)
    res = robust_sparse_code(prob)
    assert res.converged
    psi, r = oracles.proximal_gradient(prob.y, prob.d, prob.alpha, prob.beta)
    ref = oracles.objective(prob.y, prob.d, psi, r, prob.alpha, prob.beta)
    assert abs(res.objective - ref) <= 1e-4 * abs(ref)


def test_converged_runs_meet_epsilon():
    for seed in range(10):
        prob = random_problem(seed, planted=False)
        res = robust_sparse_code(prob)
        if res.converged:
            assert res.primal_residual + res.dual_residual <= np.sqrt(prob.y.size) * 1e-6


def test_large_beta_shrinks_everything():
    prob = random_problem(7)
    prob.beta = 10.0
    assert not robust_sparse_code(prob).r.any()


def test_deterministic():
    a = robust_sparse_code(random_problem(8))
    b = robust_sparse_code(random_problem(8))
    assert a.psi.tobytes() == b.psi.tobytes() and a.r.tobytes() == b.r.tobytes()


def test_problem_validation():
    with pytest.raises(ValueError):
        RobustCodingProblem(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        RobustCodingProblem(np.zeros((3, 2)), np.zeros((3, 2)), beta=-1)
    with pytest.raises(ValueError):
        robust_sparse_code(random_problem(0), mu0=0)


def test_non_finite_state_raises():
    prob = random_problem(0)
    state = AdmmState.zeros(prob, 1.0)
    state.m[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        rc.psi_update(state, prob)


def test_trace_file(tmp_path):
    res = robust_sparse_code(random_problem(1), trace=True)
    rc.write_trace(tmp_path / "t.csv", res.trace)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iter,objective,primal,dual,mu"
    assert len(lines) == res.iterations + 1
