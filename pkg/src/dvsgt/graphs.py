"""Random communication topologies with doubly stochastic Metropolis weights.

A :class:`GraphProcess` is a finite distribution over doubly stochastic
weight matrices; one matrix is drawn independently per iteration. The
module also computes the mixing contraction parameter ``rho1``, the
per-round contraction factor of the expected consensus error (smaller
means better connectivity).
"""

import json
from dataclasses import dataclass, field

import numpy as np

DS_TOL = 1e-12


class GraphConnectivityError(RuntimeError):
    """Mean graph of the process is not connected."""


def check_doubly_stochastic(A, tol=DS_TOL):
    """Raise ValueError unless A is entrywise nonnegative with unit row
    and column sums (within tol)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.min() < -tol:
        raise ValueError("negative weight entry")
    r = np.abs(A.sum(axis=1) - 1.0).max()
    c = np.abs(A.sum(axis=0) - 1.0).max()
    if r > tol or c > tol:
        raise ValueError(f"row/column sums deviate from 1 by {max(r, c):.3e}")


@dataclass
class GraphProcess:
    """Finite support of doubly stochastic weight matrices with sampling
    probabilities.

    Attributes
    ----------
    matrices : ndarray, shape (m, n, n)
        Support of the distribution.
    probabilities : ndarray, shape (m,)
        Sampling probabilities, nonnegative, summing to one.
    require_connected : bool
        Reject a disconnected mean graph at construction time (every
        convergence statement assumes it). Disable only for diagnostics
        such as evaluating rho1 of a degenerate process.
    """

    matrices: np.ndarray
    probabilities: np.ndarray
    require_connected: bool = True
    comm_rounds: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.matrices.ndim != 3:
            raise ValueError("matrices must be a (m, n, n) array")
        m = self.matrices.shape[0]
        if self.probabilities.shape != (m,):
            raise ValueError("one probability per support matrix required")
        if self.probabilities.min() < 0:
            raise ValueError("negative probability")
        if abs(self.probabilities.sum() - 1.0) > DS_TOL:
            raise ValueError("probabilities must sum to 1")
        for A in self.matrices:
            check_doubly_stochastic(A)
        if self.require_connected and not mean_graph_connected(self.mean_matrix()):
            raise GraphConnectivityError("mean graph is not connected")
        # Directed messages per round: x and y to each in-neighbor, i.e.
        # two per positive off-diagonal entry of the sampled matrix.
        offdiag = np.array([
            int(np.count_nonzero(A) - np.count_nonzero(np.diag(A)))
            for A in self.matrices
        ])
        self.comm_rounds = 2 * offdiag

    @property
    def n(self):
        return self.matrices.shape[1]

    @property
    def size(self):
        return self.matrices.shape[0]

    def mean_matrix(self):
        return np.einsum("m,mij->ij", self.probabilities, self.matrices)

    def mean_comm_rounds(self):
        return float(self.probabilities @ self.comm_rounds)

    def to_json(self):
        return {
            "n": int(self.n),
            "probabilities": self.probabilities.tolist(),
            "matrices": self.matrices.tolist(),
        }

    @classmethod
    def from_json(cls, doc):
        mats = np.asarray(doc["matrices"], dtype=float)
        if mats.shape[1] != doc["n"]:
            raise ValueError("matrix dimension does not match 'n'")
        return cls(mats, np.asarray(doc["probabilities"], dtype=float))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def mean_graph_connected(A_bar, tol=0.0):
    """Reachability check on the positive entries of the mean matrix.

    Metropolis weights are symmetric, so strong connectivity of the
    induced digraph reduces to connectivity of the undirected support.
    A general directed check (forward and backward reachability from
    node 0) is used so asymmetric inputs are handled too.
    """
    A = np.asarray(A_bar)
    n = A.shape[0]
    pos = A > tol
    np.fill_diagonal(pos, False)

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            nxt = np.nonzero(adj[v] & ~seen)[0]
            seen[nxt] = True
            stack.extend(nxt.tolist())
        return seen.all()

    return reach(pos) and reach(pos.T)


def metropolis_weights(n, edges):
    """Doubly stochastic weights for an undirected simple graph.

    Each edge {i, j} gets weight 1 / (1 + max(deg_i, deg_j)); the
    remaining mass goes to the self-loop. The result is symmetric,
    nonnegative, and doubly stochastic.

    Parameters
    ----------
    n : int
        Number of nodes (> 0).
    edges : iterable of (int, int)
        Undirected edges; self-loops and duplicates are rejected.
    """
    if n <= 0:
        raise ValueError("need at least one node")
    deg = np.zeros(n, dtype=int)
    seen = set()
    pairs = []
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop on node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i},{j}) out of range")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        pairs.append(key)
        deg[i] += 1
        deg[j] += 1
    A = np.zeros((n, n))
    for i, j in pairs:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        A[i, j] = w
        A[j, i] = w
    np.fill_diagonal(A, 1.0 - A.sum(axis=1))
    return A


def erdos_renyi_edges(n, p, rng):
    """Edge list of one Erdos-Renyi graph G(n, p)."""
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.shape[0]) < p
    return list(zip(iu[mask].tolist(), ju[mask].tolist()))


def erdos_renyi_support(n, p, count, rng, max_retries=50):
    """Build a GraphProcess from `count` independent Erdos-Renyi graphs.

    Each graph is converted to Metropolis weights; the process samples
    uniformly. If the mean graph of a drawn set is disconnected the whole
    set is redrawn, up to `max_retries` times.

    Raises
    ------
    GraphConnectivityError
        If no connected mean graph is found within the retry budget
        (a sign that p is too small for this n).
    """
    if not (0 < p <= 1):
        raise ValueError("edge probability must be in (0, 1]")
    if count < 1:
        raise ValueError("need at least one support graph")
    for _ in range(max_retries):
        mats = np.stack([
            metropolis_weights(n, erdos_renyi_edges(n, p, rng))
            for _ in range(count)
        ])
        mean = mats.mean(axis=0)
        if n == 1 or mean_graph_connected(mean):
            return GraphProcess(mats, np.full(count, 1.0 / count))
    raise GraphConnectivityError(
        f"no connected mean graph after {max_retries} draws "
        f"(n={n}, p={p}, count={count})")


def sample_index(process, rng):
    """Index of an independently drawn support matrix."""
    if process.size == 1:
        return 0
    return int(rng.choice(process.size, p=process.probabilities))


def sample(process, rng):
    """One independently drawn weight matrix from the process."""
    return process.matrices[sample_index(process, rng)]


def rho1(process):
    """Mixing contraction parameter of the process, in [0, 1].

    Computes M = E[A'A] - 11'/n exactly from the finite support and
    returns sqrt of its spectral radius. M is symmetric, so the largest
    absolute eigenvalue is used.
    """
    n = process.n
    M = np.einsum("m,mji,mjk->ik", process.probabilities,
                  process.matrices, process.matrices)
    M -= np.full((n, n), 1.0 / n)
    ev = np.linalg.eigvalsh(M)
    radius = max(abs(ev[0]), abs(ev[-1]))
    return float(np.sqrt(max(radius, 0.0)))
