"""Independent dense oracles used to cross-check the library's linear algebra.

Everything here is deliberately written with explicit loops and Kronecker
products, sharing no code path with the package internals.
"""
from __future__ import annotations

import numpy as np


def incidence_dense(n: int, edges) -> np.ndarray:
    H = np.zeros((len(edges), n))
    for k, (i, j) in enumerate(edges):
        H[k, i - 1] = -1.0
        H[k, j - 1] = 1.0
    return H


def relative_positions_dense(n: int, edges, dim: int, p: np.ndarray) -> np.ndarray:
    """z = (H kron I_d) p, stacked edge-major."""
    Hbar = np.kron(incidence_dense(n, edges), np.eye(dim))
    return Hbar @ np.asarray(p, dtype=float).ravel()


def rigidity_dense(n: int, edges, dim: int, p: np.ndarray) -> np.ndarray:
    """R = Z^T (H kron I_d) built from a block-diagonal Z."""
    m = len(edges)
    z = relative_positions_dense(n, edges, dim, p)
    Zblock = np.zeros((dim * m, m))
    for k in range(m):
        Zblock[dim * k : dim * (k + 1), k] = z[dim * k : dim * (k + 1)]
    Hbar = np.kron(incidence_dense(n, edges), np.eye(dim))
    return Zblock.T @ Hbar


def errors_dense(edges, targets, dim: int, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    out = np.zeros(len(edges))
    for k, (i, j) in enumerate(edges):
        pi = p[dim * (i - 1) : dim * i]
        pj = p[dim * (j - 1) : dim * j]
        diff = pi - pj
        out[k] = float(diff @ diff) - targets[k] ** 2
    return out


def gradient_dense(n: int, edges, targets, dim: int, p: np.ndarray) -> np.ndarray:
    """R^T e via the dense rigidity matrix."""
    R = rigidity_dense(n, edges, dim, p)
    e = errors_dense(edges, targets, dim, p)
    return R.T @ e


def rigidity_function_dense(edges, dim: int, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    out = np.zeros(len(edges))
    for k, (i, j) in enumerate(edges):
        diff = p[dim * (i - 1) : dim * i] - p[dim * (j - 1) : dim * j]
        out[k] = 0.5 * float(diff @ diff)
    return out


def central_difference_jacobian(fn, p: np.ndarray, h: float) -> np.ndarray:
    """Columnwise central differences of a vector-valued function of p."""
    p = np.asarray(p, dtype=float).ravel()
    cols = []
    for idx in range(p.size):
        dp = np.zeros_like(p)
        dp[idx] = h
        cols.append((fn(p + dp) - fn(p - dp)) / (2.0 * h))
    return np.stack(cols, axis=1)


def random_framework(rng: np.random.Generator, n=None, dim=None, complete=False):
    """A random graph plus a generic placement; edges are canonical (i < j)."""
    if n is None:
        n = int(rng.integers(2, 7))
    if dim is None:
        dim = int(rng.integers(2, 4))
    all_pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    if complete:
        edges = all_pairs
    else:
        m = int(rng.integers(1, len(all_pairs) + 1))
        idx = sorted(rng.choice(len(all_pairs), size=m, replace=False))
        edges = [all_pairs[i] for i in idx]
    targets = rng.uniform(0.5, 3.0, size=len(edges))
    positions = rng.normal(scale=2.0, size=n * dim)
    return n, tuple(edges), tuple(targets), dim, positions


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    A = rng.normal(size=(dim, dim))
    Q, _ = np.linalg.qr(A)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q
