"""Independent Monte-Carlo oracles shared by the test modules."""

import math
from collections import Counter

import numpy as np


def gamma_rejection_oracle(d, rho, n_accept, rng, chunk=2_000_000):
    """Placement frequencies by rejection sampling.

    Draws x uniform in voxel 0 and y uniform in voxel ``d``, keeps pairs
    closer than ``rho``, and bins the midpoint by voxel. Returns
    ``{r: (frequency, binomial std error)}`` over exactly ``n_accept`` pairs.
    """
    counts = Counter()
    got = 0
    while got < n_accept:
        u = rng.random((4, chunk)) - 0.5
        dx = u[2] + d[0] - u[0]
        dy = u[3] + d[1] - u[1]
        keep = dx * dx + dy * dy < rho * rho
        mx = (u[0][keep] + u[2][keep] + d[0]) / 2.0
        my = (u[1][keep] + u[3][keep] + d[1]) / 2.0
        take = min(n_accept - got, mx.size)
        rx = np.floor(mx[:take] + 0.5).astype(np.int64)
        ry = np.floor(my[:take] + 0.5).astype(np.int64)
        pairs, cnt = np.unique(np.stack([rx, ry], axis=1), axis=0, return_counts=True)
        for (a, b), c in zip(pairs, cnt):
            counts[(int(a), int(b))] += int(c)
        got += take
    out = {}
    for r, c in counts.items():
        p = c / n_accept
        out[r] = (p, math.sqrt(p * (1 - p) / n_accept))
    return out


def exact_pair_mean(N, L, D_A, D_B, rate_of_offset):
    """Mean first-reaction time of the pair jump process from a uniform start.

    Solves ``(H + diag(r)) T = 1`` over all ``N^4`` (A voxel, B voxel)
    states, where ``H`` is the reflecting hop generator and ``r`` the
    reaction rate as a function of the offset ``(dx, dy)``; the matrix is
    symmetric positive definite, so preconditioned CG applies.
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import cg

    h = L / N
    if N > 1:
        main = np.full(N, -2.0)
        main[[0, -1]] = -1.0
        lap = sp.diags([np.ones(N - 1), main, np.ones(N - 1)], [-1, 0, 1])
    else:
        lap = sp.csr_matrix((1, 1))
    eye = sp.identity(N)
    lap2 = sp.kron(lap, eye) + sp.kron(eye, lap)
    eye2 = sp.identity(N * N)
    hops = -(D_A * sp.kron(lap2, eye2) + D_B * sp.kron(eye2, lap2)) / h**2
    v = np.arange(N * N)
    x, y = v // N, v % N
    rates = np.vectorize(rate_of_offset, otypes=[float])(x[None, :] - x[:, None], y[None, :] - y[:, None])
    A = (hops + sp.diags(rates.ravel())).tocsr()
    T, info = cg(A, np.ones(A.shape[0]), M=sp.diags(1.0 / A.diagonal()), rtol=1e-11, maxiter=50_000)
    if info != 0:
        raise RuntimeError(f"CG did not converge ({info})")
    return float(T.mean())
