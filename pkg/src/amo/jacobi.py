"""Dense symmetric eigenvalues by Jacobi rotations with parallel ordering.

Self-contained so that band-edge candidates never depend on BLAS threading
(results must be bit-reproducible across thread counts). Each sweep runs the
round-robin tournament ordering: n-1 rounds of n/2 mutually disjoint pivot
pairs, each round rotated in one vectorized step, over a whole stack of
same-size symmetric matrices at once.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sym_eigvals", "sym_eigvals_stack"]

_MAX_SWEEPS = 60


def _round_robin_pairs(n: int):
    """Rounds of disjoint index pairs covering every (p, q) once per sweep."""
    players = list(range(n)) + ([n] if n % 2 else [])  # n is a dummy slot
    m = len(players)
    rounds = []
    arr = players[:]
    for _ in range(m - 1):
        pairs = [(arr[i], arr[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        arr = [arr[0]] + [arr[-1]] + arr[1:-1]
    return rounds


def sym_eigvals_stack(mats: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Sorted eigenvalues of a stack (s, n, n) of symmetric matrices."""
    a = np.array(mats, dtype=float, copy=True)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError("expected a stack of square matrices")
    s, n, _ = a.shape
    if n == 1:
        return a[:, :, 0].copy()
    rounds = _round_robin_pairs(n)
    scale = np.maximum(np.sqrt(np.sum(a * a, axis=(1, 2))), 1e-300)
    for _ in range(_MAX_SWEEPS):
        diag = np.einsum("sii->si", a)
        off_sq = np.sum(a * a, axis=(1, 2)) - np.sum(diag * diag, axis=1)
        if np.all(off_sq <= (tol * scale) ** 2):
            break
        for p_idx, q_idx in rounds:
            apq = a[:, p_idx, q_idx]
            if not np.any(np.abs(apq) > 1e-18 * scale[:, None]):
                continue
            app = a[:, p_idx, p_idx]
            aqq = a[:, q_idx, q_idx]
            theta = 0.5 * np.arctan2(2.0 * apq, aqq - app)
            c = np.cos(theta)
            sn = np.sin(theta)
            rp = a[:, p_idx, :]
            rq = a[:, q_idx, :]
            a[:, p_idx, :] = c[:, :, None] * rp - sn[:, :, None] * rq
            a[:, q_idx, :] = sn[:, :, None] * rp + c[:, :, None] * rq
            cp = a[:, :, p_idx]
            cq = a[:, :, q_idx]
            a[:, :, p_idx] = c[:, None, :] * cp - sn[:, None, :] * cq
            a[:, :, q_idx] = sn[:, None, :] * cp + c[:, None, :] * cq
            a[:, p_idx, q_idx] = 0.0
            a[:, q_idx, p_idx] = 0.0
        # guard against asymmetry creep from the one-sided updates
        a += a.transpose(0, 2, 1)
        a *= 0.5
    return np.sort(np.einsum("sii->si", a), axis=1)


def sym_eigvals(mat: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Sorted eigenvalues of one symmetric matrix."""
    return sym_eigvals_stack(np.asarray(mat, dtype=float)[None, :, :], tol)[0]
