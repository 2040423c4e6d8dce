"""Slow, literal reference computations used to check the production paths.

Nothing here imports the package's numerical modules.
"""

import math

import numpy as np


def epan(u):
    return 0.75 * (1 - u * u) if abs(u) <= 1 else 0.0


def dense_smoother(w, h):
    """Explicit N*T x N*T smoother: row r = e0' [W'K_r W]^{-1} W'K_r."""
    w = np.asarray(w, dtype=float)
    n, d = w.shape
    S = np.zeros((n, n))
    for r in range(n):
        W = np.hstack([np.ones((n, 1)), w - w[r]])
        K = np.diag([np.prod([epan(v / hl) for v, hl in zip(row, h)]) for row in w - w[r]])
        M = W.T @ K @ W
        assert np.linalg.cond(M) < 1e8, "oracle needs a well-conditioned local design"
        S[r] = (np.linalg.inv(M) @ W.T @ K)[0]
    return S


def dense_beta(y, x, w, h):
    """[X'(I-S)'(I-S)X]^{-1} X'(I-S)'(I-S)Y with S built explicitly."""
    S = dense_smoother(w, h)
    M = np.eye(len(y)) - S
    A = x.T @ M.T @ M @ x
    b = x.T @ M.T @ M @ y
    return np.linalg.solve(A, b)


def quadruple_loop(e, chi, h, n_units, n_periods):
    """Literal i != j, t, s sums for V and upsilon^2 (exactly rounded with fsum)."""
    chi = np.asarray(chi, dtype=float)
    v_terms, s_terms = [], []
    T = n_periods
    for i in range(n_units):
        for j in range(n_units):
            if i == j:
                continue
            for t in range(T):
                for s in range(T):
                    a, b = i * T + t, j * T + s
                    k = 1.0
                    for l in range(chi.shape[1]):
                        k *= epan((chi[a, l] - chi[b, l]) / h[l])
                    v_terms.append(k * e[a] * e[b])
                    s_terms.append(k * k * e[a] ** 2 * e[b] ** 2)
    norm = n_units ** 2 * T ** 2 * float(np.prod(h))
    return math.fsum(v_terms) / norm, 2 * math.fsum(s_terms) / norm


def normal_equations(design, y):
    return np.linalg.solve(design.T @ design, design.T @ y)
