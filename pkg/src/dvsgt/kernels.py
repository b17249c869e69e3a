"""Hot per-iteration kernels, with numba-compiled and pure-numpy twins.

All random draws happen outside these functions (bulk numpy Generator
calls), so both implementations consume identical random streams. The
two paths compute the same quantities; results agree to float round-off
(reduction order differs), not bit-for-bit.

Set ``DVSGT_PURE_NUMPY=1`` in the environment to force the numpy path.
The active path is fixed at import time and reported by ``backend()``.
"""

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("DVSGT_PURE_NUMPY", "0") not in ("", "0")


# ---------------------------------------------------------------------------
# numpy implementations

def _gt_mix_np(A, X, Y, alphas):
    # x_i <- sum_j a_ij x_j - alpha_i y_i
    return A @ X - alphas[:, None] * Y


def _gt_track_np(A, Y, G_new, G_old):
    # y_i <- sum_j a_ij y_j + g_i(new) - g_i(old)
    return A @ Y + G_new - G_old


def _direct_batch_np(F, E, sig, Z, Eps):
    # Mean of N per-sample gradients u(u'e) - eps*u, u = F z.
    # F: (n,d,r), E: (n,d), sig: (n,), Z: (n,N,r), Eps: (n,N).
    N = Z.shape[1]
    U = np.einsum("ndr,npr->npd", F, Z)
    t = np.einsum("npd,nd->np", U, E) - sig[:, None] * Eps
    return np.einsum("np,npd->nd", t, U) / N


def _bartlett_batch_np(F, E, sig, N, C, T, W):
    # Batch-mean gradient from the sufficient statistic of N Gaussian
    # samples: S = M M', M = F A_L / sqrt(N) with A_L the Bartlett factor.
    # C: (n,r) chi-square draws, T: (n,r(r-1)/2) lower normals, W: (n,r).
    n, d, r = F.shape
    A_L = np.zeros((n, r, r))
    idx = np.arange(r)
    A_L[:, idx, idx] = np.sqrt(C)
    if r > 1:
        rows, cols = np.tril_indices(r, k=-1)
        A_L[:, rows, cols] = T
    M = (F @ A_L) / np.sqrt(N)
    Me = np.einsum("ndr,nd->nr", M, E)
    G = np.einsum("ndr,nr->nd", M, Me)
    G -= (sig / np.sqrt(N))[:, None] * np.einsum("ndr,nr->nd", M, W)
    return G


# ---------------------------------------------------------------------------
# numba implementations

def _build_numba():
    import numba as nb

    @nb.njit(cache=True)
    def gt_mix(A, X, Y, alphas):
        n, d = X.shape
        out = np.empty((n, d))
        for i in range(n):
            for c in range(d):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * X[j, c]
                out[i, c] = acc - alphas[i] * Y[i, c]
        return out

    @nb.njit(cache=True)
    def gt_track(A, Y, G_new, G_old):
        n, d = Y.shape
        out = np.empty((n, d))
        for i in range(n):
            for c in range(d):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * Y[j, c]
                out[i, c] = acc + G_new[i, c] - G_old[i, c]
        return out

    @nb.njit(cache=True)
    def direct_batch(F, E, sig, Z, Eps):
        n, d, r = F.shape
        N = Z.shape[1]
        out = np.zeros((n, d))
        u = np.empty(d)
        for i in range(n):
            for p in range(N):
                ue = 0.0
                for c in range(d):
                    acc = 0.0
                    for a in range(r):
                        acc += F[i, c, a] * Z[i, p, a]
                    u[c] = acc
                    ue += acc * E[i, c]
                t = ue - sig[i] * Eps[i, p]
                for c in range(d):
                    out[i, c] += t * u[c]
        return out / N

    @nb.njit(cache=True)
    def bartlett_batch(F, E, sig, N, C, T, W):
        n, d, r = F.shape
        sqN = np.sqrt(N)
        out = np.empty((n, d))
        A_L = np.empty((r, r))
        M = np.empty((d, r))
        Me = np.empty(r)
        for i in range(n):
            A_L[:, :] = 0.0
            pos = 0
            for a in range(r):
                A_L[a, a] = np.sqrt(C[i, a])
                for b in range(a):
                    A_L[a, b] = T[i, pos]
                    pos += 1
            for c in range(d):
                for b in range(r):
                    acc = 0.0
                    for a in range(b, r):
                        acc += F[i, c, a] * A_L[a, b]
                    M[c, b] = acc / sqN
            for b in range(r):
                acc = 0.0
                for c in range(d):
                    acc += M[c, b] * E[i, c]
                Me[b] = acc
            s = sig[i] / sqN
            for c in range(d):
                acc = 0.0
                for b in range(r):
                    acc += M[c, b] * (Me[b] - s * W[i, b])
                out[i, c] = acc
        return out

    return gt_mix, gt_track, direct_batch, bartlett_batch


if _FORCE_NUMPY:
    _BACKEND = "numpy"
    gt_mix, gt_track, direct_batch, bartlett_batch = (
        _gt_mix_np, _gt_track_np, _direct_batch_np, _bartlett_batch_np)
else:
    try:
        gt_mix, gt_track, direct_batch, bartlett_batch = _build_numba()
        _BACKEND = "numba"
    except ImportError:  # pragma: no cover
        _BACKEND = "numpy"
        gt_mix, gt_track, direct_batch, bartlett_batch = (
            _gt_mix_np, _gt_track_np, _direct_batch_np, _bartlett_batch_np)

numpy_impls = {
    "gt_mix": _gt_mix_np,
    "gt_track": _gt_track_np,
    "direct_batch": _direct_batch_np,
    "bartlett_batch": _bartlett_batch_np,
}


def backend():
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _BACKEND
