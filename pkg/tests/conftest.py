"""Shared fixtures: the pinned desk-scale setup and test oracles."""

import math

import numpy as np
import pytest

from dvsgt import graphs, problems

# Desk scale, pinned: 20 agents, dimension 5, 10 Erdos-Renyi graphs at
# p = 0.3, fixed seeds. The strongly convex instance has per-agent
# eigenvalues in [4.5, 5.5] and unit measurement noise.
DESK_N = 20
DESK_D = 5
DESK_GRAPH_SEED = 25
DESK_PROBLEM_SEED = 202
DESK_CONVEX_SEED = 404
DESK_EIG_RANGE = (4.5, 5.5)
DESK_NOISE_SD = 1.0


@pytest.fixture(scope="session")
def desk_process():
    rng = np.random.default_rng(DESK_GRAPH_SEED)
    return graphs.erdos_renyi_support(DESK_N, 0.3, 10, rng)


@pytest.fixture(scope="session")
def desk_problem():
    return problems.make_regression(
        DESK_N, DESK_D, DESK_EIG_RANGE, noise_sd=DESK_NOISE_SD,
        rng=np.random.default_rng(DESK_PROBLEM_SEED))


@pytest.fixture(scope="session")
def desk_convex_problem():
    return problems.make_regression(
        DESK_N, DESK_D, DESK_EIG_RANGE, noise_sd=DESK_NOISE_SD,
        zero_eigs=2, rng=np.random.default_rng(DESK_CONVEX_SEED))


class ExactOracleProblem:
    """Noiseless stand-in: every oracle returns the exact gradient."""

    def __init__(self, inst):
        self._inst = inst
        self.n = inst.n
        self.d = inst.d
        self.x_star = inst.x_star
        self.eta = inst.eta
        self.lip = inst.lip
        self.nu = 0.0

    def exact_gradient(self, i, x):
        return self._inst.exact_gradient(i, x)

    def exact_gradients(self, X):
        return self._inst.exact_gradients(X)

    def value_gap(self, xbar):
        return self._inst.value_gap(xbar)

    def sample_gradient(self, i, x, rng):
        return self._inst.exact_gradient(i, x)

    def minibatch_gradient(self, i, x, N, rng):
        return self._inst.exact_gradient(i, x)

    def batch_gradients(self, X, N, rng):
        return self._inst.exact_gradients(X)


@pytest.fixture(scope="session")
def noiseless_desk_problem(desk_problem):
    return ExactOracleProblem(desk_problem)


def power_spectrum(S, top=1, iters=20000, seed=0):
    """Top |eigenvalue|s of a symmetric matrix by power iteration with
    deflation. Independent of any library eigen-solver."""
    S = np.array(S, dtype=float)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(top):
        x = rng.standard_normal(S.shape[0])
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(iters):
            y = S @ x
            ny = np.linalg.norm(y)
            if ny == 0.0:
                lam = 0.0
                break
            x = y / ny
            lam = float(x @ S @ x)
        out.append(abs(lam))
        S = S - lam * np.outer(x, x)
    return out


def power_radius(M, iters=20000):
    """Spectral radius of a (possibly nonsymmetric) matrix by power
    iteration on the original matrix; assumes a dominant real eigenvalue,
    which holds for the nonnegative matrices it is used on."""
    M = np.asarray(M, dtype=float)
    x = np.ones(M.shape[0]) / math.sqrt(M.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        lam = float(x @ M @ x)
    return abs(lam)
