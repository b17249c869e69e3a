"""Local expectation-valued quadratic objectives with stochastic
first-order oracles.

The shipped instance is the distributed parameter-estimation problem:
agent i observes scalar measurements d = u'x* + noise with Gaussian
regressors u ~ N(0, R_i), giving

    f_i(x) = 0.5 (x - x*)' R_i (x - x*) + const,
    grad f_i(x) = R_i (x - x*),

and the sampled gradient u(u'x) - d u, an unbiased estimate whose
per-sample variance is bounded on any ball around x*.

Batch means of N samples are simulated exactly: small N draws the N
samples, large N draws the sufficient statistic (the empirical second
moment of the regressors has a Wishart law, sampled via its Bartlett
factor). Both paths produce the same distribution, so geometric batch
schedules with astronomically large N stay cheap.

Any object with the same attributes and methods can stand in for a
problem instance (the simulation engine only calls `batch_gradients`,
`exact_gradients`, and the scalar constants), which is how noiseless
test problems are plugged in.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# Largest batch simulated sample-by-sample; above this the Wishart
# sufficient-statistic path takes over (requires N >= rank).
DIRECT_BATCH_MAX = 64


@dataclass
class RegressionInstance:
    """Distributed linear-regression estimation problem.

    Attributes
    ----------
    x_star : ndarray, shape (d,)
        True parameter (the common minimizer).
    covariances : ndarray, shape (n, d, d)
        Per-agent regressor covariances R_i (symmetric PSD).
    noise_sd : ndarray, shape (n,)
        Per-agent measurement-noise standard deviations.
    reference_radius : float
        Radius of the ball around x* on which the per-sample noise
        bound `nu` is evaluated (quadratic problems have no uniform
        bound on all of R^d).
    """

    x_star: np.ndarray
    covariances: np.ndarray
    noise_sd: np.ndarray
    reference_radius: float = 2.0
    factors: np.ndarray = field(init=False)      # R_i = F_i F_i'
    rank: int = field(init=False)
    eta: float = field(init=False)
    lip: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self):
        self.x_star = np.asarray(self.x_star, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        self.noise_sd = np.broadcast_to(
            np.asarray(self.noise_sd, dtype=float), (self.n,)).copy()
        if self.covariances.shape != (self.n, self.d, self.d):
            raise ValueError("covariances must have shape (n, d, d)")
        if (self.noise_sd < 0).any():
            raise ValueError("noise sd must be nonnegative")

        evals = np.linalg.eigvalsh(self.covariances)
        if evals.min() < -1e-12:
            raise ValueError("covariances must be positive semidefinite")

        # Common column count across agents keeps the factors stackable;
        # rank-deficient instances use the eigen square root.
        self.rank = int((evals > 1e-12).sum(axis=1).max()) if self.d else 0
        F = np.zeros((self.n, self.d, max(self.rank, 1)))
        for i in range(self.n):
            w, Q = np.linalg.eigh(self.covariances[i])
            w = np.clip(w, 0.0, None)
            order = np.argsort(w)[::-1][:max(self.rank, 1)]
            F[i] = Q[:, order] * np.sqrt(w[order])
        self.factors = F

        mean_cov = self.covariances.mean(axis=0)
        self.eta = float(np.linalg.eigvalsh(mean_cov)[0])
        lam_max = evals[:, -1] if self.d else np.zeros(self.n)
        self.lip = float(lam_max.max()) if self.n else 0.0
        # Per-sample noise bound on ||x - x*|| <= reference_radius:
        # E||w||^2 = e'Re tr(R) + ||Re||^2 + sd^2 tr(R)
        #         <= lmax R^2 tr(R) + lmax^2 R^2 + sd^2 tr(R).
        tr = np.trace(self.covariances, axis1=1, axis2=2)
        rr = self.reference_radius ** 2
        per_agent = lam_max * rr * tr + lam_max ** 2 * rr + self.noise_sd ** 2 * tr
        self.nu = float(np.sqrt(per_agent.max())) if self.n else 0.0

    @property
    def n(self):
        return self.covariances.shape[0] if self.covariances.ndim == 3 else len(self.covariances)

    @property
    def d(self):
        return self.x_star.shape[0]

    # -- exact oracles ---------------------------------------------------

    def exact_gradient(self, i, x):
        return self.covariances[i] @ (np.asarray(x) - self.x_star)

    def exact_gradients(self, X):
        """Stacked exact gradients at per-agent points X (n, d)."""
        return np.einsum("nij,nj->ni", self.covariances, X - self.x_star)

    def value_gap(self, xbar):
        """F(xbar) - F*, with F the network-average objective."""
        e = np.asarray(xbar) - self.x_star
        return 0.5 * float(e @ self.covariances.mean(axis=0) @ e)

    # -- stochastic oracles ----------------------------------------------

    def sample_gradient(self, i, x, rng):
        """One sampled gradient u(u'x) - d_obs u at point x for agent i."""
        z = rng.standard_normal(self.factors.shape[2])
        u = self.factors[i] @ z
        eps = self.noise_sd[i] * rng.standard_normal()
        d_obs = u @ self.x_star + eps
        return u * (u @ x) - d_obs * u

    def minibatch_gradient(self, i, x, N, rng):
        """Arithmetic mean of N independent sampled gradients at x."""
        if N < 1:
            raise ValueError("batch size must be >= 1")
        r = self.factors.shape[2]
        Z = rng.standard_normal((N, r))
        Eps = self.noise_sd[i] * rng.standard_normal(N)
        U = Z @ self.factors[i].T
        e = np.asarray(x) - self.x_star
        t = U @ e - Eps
        return (t @ U) / N

    def batch_gradients(self, X, N, rng):
        """Batch-mean gradients for all agents at their own points.

        X has one row per agent. N <= DIRECT_BATCH_MAX averages N actual
        samples; larger N samples the exact minibatch-mean distribution
        through the Bartlett factor of the regressor second moment.
        """
        if N < 1:
            raise ValueError("batch size must be >= 1")
        E = np.asarray(X) - self.x_star
        r = self.rank
        if r == 0:
            return np.zeros((self.n, self.d))
        if N <= max(DIRECT_BATCH_MAX, r):  # Bartlett needs N >= rank
            Z = rng.standard_normal((self.n, int(N), r))
            Eps = rng.standard_normal((self.n, int(N)))
            return kernels.direct_batch(self.factors, E, self.noise_sd, Z, Eps)
        Nf = float(N)
        dof = Nf - np.arange(r)
        C = rng.chisquare(dof, size=(self.n, r))
        T = rng.standard_normal((self.n, r * (r - 1) // 2))
        W = rng.standard_normal((self.n, r))
        return kernels.bartlett_batch(self.factors, E, self.noise_sd, Nf, C, T, W)

    # -- serialization ----------------------------------------------------

    def to_json(self):
        return {
            "n": int(self.n),
            "d": int(self.d),
            "x_star": self.x_star.tolist(),
            "covariances": self.covariances.tolist(),
            "noise_sd": self.noise_sd.tolist(),
            "reference_radius": self.reference_radius,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            x_star=np.asarray(doc["x_star"], dtype=float),
            covariances=np.asarray(doc["covariances"], dtype=float),
            noise_sd=np.asarray(doc["noise_sd"], dtype=float),
            reference_radius=float(doc.get("reference_radius", 2.0)),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def random_orthogonal(d, rng):
    """Haar-distributed orthogonal matrix (QR with sign fix)."""
    M = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(M)
    return Q * np.sign(np.diag(R))


def make_regression(n, d, eig_range, noise_sd, x_star=None, zero_eigs=0,
                    reference_radius=2.0, rng=None):
    """Random regression instance with controlled per-agent spectra.

    Each R_i = Q diag(lam) Q' with Q Haar-orthogonal and d - zero_eigs
    eigenvalues uniform in `eig_range` (the rest exactly zero). Use
    zero_eigs > 0 for merely convex local objectives. Reported eta is
    the exact smallest eigenvalue of the averaged covariance, lip the
    largest per-agent eigenvalue.
    """
    if rng is None:
        rng = np.random.default_rng()
    lo, hi = float(eig_range[0]), float(eig_range[1])
    if lo < 0 or hi < lo:
        raise ValueError("eigenvalue range must satisfy 0 <= lo <= hi")
    if not (0 <= zero_eigs <= d):
        raise ValueError("zero_eigs must lie in [0, d]")
    if x_star is None:
        x_star = np.full(d, 1.0 / np.sqrt(d))
    covs = np.empty((n, d, d))
    for i in range(n):
        lam = np.zeros(d)
        lam[:d - zero_eigs] = rng.uniform(lo, hi, size=d - zero_eigs)
        Q = random_orthogonal(d, rng)
        covs[i] = (Q * lam) @ Q.T
        covs[i] = 0.5 * (covs[i] + covs[i].T)
    return RegressionInstance(
        x_star=np.asarray(x_star, dtype=float),
        covariances=covs,
        noise_sd=noise_sd,
        reference_radius=reference_radius,
    )


def noise_norm_bound(problem, N):
    """Bound on E||stacked noise|| for batch size N: sqrt(n) nu / sqrt(N)."""
    if N < 1:
        raise ValueError("batch size must be >= 1")
    return np.sqrt(problem.n) * problem.nu / np.sqrt(float(N))
