import json
import math

import numpy as np
import pytest

from dvsgt import problems

from conftest import DESK_EIG_RANGE, DESK_N, DESK_NOISE_SD


def test_make_regression_default_x_star_unit_norm():
    inst = problems.make_regression(4, 10, (1.0, 2.0), noise_sd=0.1,
                                    rng=np.random.default_rng(0))
    assert abs(np.linalg.norm(inst.x_star) - 1.0) < 1e-12
    assert np.abs(inst.x_star - 1 / math.sqrt(10)).max() < 1e-12


def test_zero_spectrum_gives_zero_gradients():
    inst = problems.make_regression(3, 4, (0.0, 0.0), noise_sd=0.0,
                                    rng=np.random.default_rng(1))
    rng = np.random.default_rng(2)
    X = rng.standard_normal((3, 4))
    assert np.abs(inst.exact_gradients(X)).max() == 0.0
    assert np.abs(inst.batch_gradients(X, 5, rng)).max() == 0.0
    assert np.abs(inst.sample_gradient(0, X[0], rng)).max() == 0.0


def test_make_regression_rejects_negative_eigenvalues():
    with pytest.raises(ValueError):
        problems.make_regression(2, 3, (-1.0, 2.0), noise_sd=0.1,
                                 rng=np.random.default_rng(0))


def test_eta_matches_eigen_oracle_rank_deficient():
    # two zero eigenvalues per agent in d=3 leaves the averaged
    # covariance rank-deficient for n=2, so eta must come out ~0
    inst = problems.make_regression(2, 3, (2.0, 3.0), noise_sd=0.1,
                                    zero_eigs=2, rng=np.random.default_rng(77))
    Rbar = inst.covariances.mean(axis=0)
    # independent oracle: smallest root of the characteristic cubic of Rbar
    from dvsgt.theory import spectral_radius_3x3
    shift = 10.0
    lam_min_oracle = shift - spectral_radius_3x3(shift * np.eye(3) - Rbar)
    assert abs(inst.eta - lam_min_oracle) < 1e-10
    assert inst.eta < 1e-10


def test_instance_constants(desk_problem):
    evs = np.linalg.eigvalsh(desk_problem.covariances)
    assert evs.min() > DESK_EIG_RANGE[0] - 1e-9
    assert abs(desk_problem.lip - evs[:, -1].max()) < 1e-12
    assert 0 < desk_problem.eta <= desk_problem.lip


def test_gradient_is_linear_in_error(desk_problem):
    rng = np.random.default_rng(5)
    X = rng.standard_normal((DESK_N, desk_problem.d))
    G = desk_problem.exact_gradients(X)
    for i in (0, 7, 19):
        expected = desk_problem.covariances[i] @ (X[i] - desk_problem.x_star)
        assert np.abs(G[i] - expected).max() < 1e-12
    # gradient vanishes at the optimum
    Xstar = np.tile(desk_problem.x_star, (DESK_N, 1))
    assert np.abs(desk_problem.exact_gradients(Xstar)).max() == 0.0


def test_lipschitz_on_random_pairs(desk_problem):
    rng = np.random.default_rng(6)
    L = desk_problem.lip
    for _ in range(100):
        i = int(rng.integers(DESK_N))
        x1, x2 = rng.standard_normal((2, desk_problem.d))
        g1 = desk_problem.exact_gradient(i, x1)
        g2 = desk_problem.exact_gradient(i, x2)
        assert np.linalg.norm(g1 - g2) <= L * np.linalg.norm(x1 - x2) + 1e-12


def test_strong_convexity_inner_product(desk_problem):
    rng = np.random.default_rng(8)
    eta = desk_problem.eta
    Rbar = desk_problem.covariances.mean(axis=0)
    for _ in range(50):
        x1, x2 = rng.standard_normal((2, desk_problem.d))
        lhs = (Rbar @ (x1 - x2)) @ (x1 - x2)
        assert lhs >= eta * np.linalg.norm(x1 - x2) ** 2 - 1e-10


def test_sample_gradient_at_optimum_no_noise():
    inst = problems.make_regression(3, 4, (1.0, 2.0), noise_sd=0.0,
                                    rng=np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = inst.sample_gradient(1, inst.x_star, rng)
        assert np.abs(g).max() < 1e-12


def test_sample_gradient_monte_carlo_mean(desk_problem):
    rng = np.random.default_rng(9)
    M = 100_000
    i = 3
    x = desk_problem.x_star + rng.uniform(-0.5, 0.5, desk_problem.d)
    draws = np.empty((M, desk_problem.d))
    for m in range(M):
        draws[m] = desk_problem.sample_gradient(i, x, rng)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(M)
    assert (np.abs(mean - desk_problem.exact_gradient(i, x)) <= 4 * se).all()


def test_minibatch_single_draw_matches_oracle(desk_problem):
    x = desk_problem.x_star + 0.3
    g1 = desk_problem.minibatch_gradient(2, x, 1, np.random.default_rng(123))
    g2 = desk_problem.sample_gradient(2, x, np.random.default_rng(123))
    assert np.abs(g1 - g2).max() < 1e-12


def test_minibatch_rejects_empty_batch(desk_problem):
    with pytest.raises(ValueError):
        desk_problem.minibatch_gradient(0, desk_problem.x_star, 0,
                                        np.random.default_rng(0))
    with pytest.raises(ValueError):
        desk_problem.batch_gradients(
            np.zeros((DESK_N, desk_problem.d)), 0, np.random.default_rng(0))


def test_minibatch_variance_scales_inversely(desk_problem):
    rng = np.random.default_rng(10)
    i, N, reps = 1, 16, 10_000
    x = desk_problem.x_star + 0.4
    g_exact = desk_problem.exact_gradient(i, x)
    sq = 0.0
    for _ in range(reps):
        w = desk_problem.minibatch_gradient(i, x, N, rng) - g_exact
        sq += w @ w
    per_sample = _persample_second_moment(desk_problem, i, x)
    assert sq / reps <= per_sample / N * 1.1


def _persample_second_moment(inst, i, x):
    # E||w||^2 = e'Re tr(R) + ||Re||^2 + sd^2 tr(R) for Gaussian regressors
    R = inst.covariances[i]
    e = x - inst.x_star
    return float(e @ R @ e * np.trace(R) + (R @ e) @ (R @ e)
                 + inst.noise_sd[i] ** 2 * np.trace(R))


def test_batch_paths_share_one_distribution(desk_problem):
    # the sample-by-sample path and the Wishart sufficient-statistic path
    # must agree in mean and second moment (checked at compatible N)
    reps = 4000
    X = np.tile(desk_problem.x_star + 0.4, (DESK_N, 1))
    exact = desk_problem.exact_gradients(X)
    stats = {}
    for N, seed in ((64, 1), (65, 2)):
        rng = np.random.default_rng(seed)
        acc = np.zeros_like(X)
        sq = 0.0
        for _ in range(reps):
            g = desk_problem.batch_gradients(X, N, rng)
            acc += g
            sq += ((g - exact) ** 2).sum()
        stats[N] = (acc / reps, sq / reps * N)
    se_scale = 4.0 / math.sqrt(reps)
    assert np.abs(stats[64][0] - exact).max() < se_scale * 3.0
    assert np.abs(stats[65][0] - exact).max() < se_scale * 3.0
    # N-scaled noise energies match within Monte Carlo slack
    assert abs(stats[64][1] - stats[65][1]) / stats[64][1] < 0.1


def test_batch_gradients_huge_batch_is_nearly_exact(desk_problem):
    rng = np.random.default_rng(12)
    X = np.tile(desk_problem.x_star + 0.5, (DESK_N, 1))
    G = desk_problem.batch_gradients(X, 10 ** 30, rng)
    exact = desk_problem.exact_gradients(X)
    assert np.abs(G - exact).max() < 1e-10


def test_noise_norm_bound_values(desk_problem):
    class Tiny:
        n = 4
        nu = 1.0
    assert problems.noise_norm_bound(Tiny, 1) == 2.0
    Tiny.nu = 0.0
    assert problems.noise_norm_bound(Tiny, 7) == 0.0
    Tiny.n, Tiny.nu = 20, 0.5
    assert abs(problems.noise_norm_bound(Tiny, 25) - 0.447213595499958) < 1e-15
    with pytest.raises(ValueError):
        problems.noise_norm_bound(Tiny, 0)


def test_json_roundtrip(tmp_path, desk_problem):
    path = tmp_path / "inst.json"
    desk_problem.save(path)
    with open(path) as fh:
        doc = json.load(fh)
    assert {"n", "d", "x_star", "covariances", "noise_sd"} <= set(doc)
    back = problems.RegressionInstance.load(path)
    assert np.array_equal(back.covariances, desk_problem.covariances)
    assert back.eta == desk_problem.eta
    assert back.nu == desk_problem.nu


def test_noise_sd_broadcast_and_per_agent():
    per_agent = np.linspace(0.1, 1.0, 5)
    inst = problems.make_regression(5, 3, (1.0, 2.0), noise_sd=per_agent,
                                    rng=np.random.default_rng(2))
    assert np.array_equal(inst.noise_sd, per_agent)
    inst2 = problems.make_regression(5, 3, (1.0, 2.0), noise_sd=0.2,
                                     rng=np.random.default_rng(2))
    assert np.array_equal(inst2.noise_sd, np.full(5, 0.2))
