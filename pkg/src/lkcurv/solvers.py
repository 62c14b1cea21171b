"""Vectorized multi-start Newton iteration and root deduplication."""

from __future__ import annotations

from typing import Callable

import numpy as np


def _newton_step(F, DF, u):
    with np.errstate(all="ignore"):
        f = F(u)
        J = DF(u)
        if J.shape[1] == J.shape[2]:
            try:
                return f, np.linalg.solve(J, f[..., None])[..., 0]
            except np.linalg.LinAlgError:
                pass
        step = np.einsum("pij,pj->pi", np.linalg.pinv(J), f)
    return f, step


def newton_multistart(
    F: Callable[[np.ndarray], np.ndarray],
    DF: Callable[[np.ndarray], np.ndarray],
    seeds: np.ndarray,
    tol: float,
    max_iter: int = 60,
    max_step: float = np.inf,
    bound: float = np.inf,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run Newton (Gauss-Newton when non-square) from every seed at once.

    A seed has converged once its Newton step is shorter than ``tol``, which
    is a distance and so does not depend on how F is scaled.  Returns
    (points, residual_norm, converged); callers still check the residual,
    because Gauss-Newton also stalls at least-squares minima.  Iterates
    leaving the ball of radius ``bound`` are abandoned as unconverged.
    """
    u = np.array(seeds, dtype=float, copy=True)
    done = np.zeros(len(u), dtype=bool)
    lost = np.zeros(len(u), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(~done)
        if not len(idx):
            break
        _, step = _newton_step(F, DF, u[idx])
        n = np.linalg.norm(step, axis=1)
        bad = ~np.isfinite(n)
        small = n <= tol
        done[idx[bad]] = True
        mv = ~bad
        scale = np.where(n > max_step, max_step / np.maximum(n, 1e-300), 1.0)
        u[idx[mv]] -= (step * scale[:, None])[mv]
        done[idx[small]] = True
        far = np.linalg.norm(u[idx], axis=1) > bound
        lost[idx[far]] = True
        done[idx[far]] = True
    f, step = _newton_step(F, DF, u)
    res = np.linalg.norm(f, axis=1)
    conv = np.isfinite(res) & (np.linalg.norm(step, axis=1) <= 10 * tol) & ~lost
    return u, res, conv


def dedupe(points: np.ndarray, radius: float) -> list[int]:
    """Indices of a greedy set of representatives at mutual distance > radius.

    The first remaining point becomes a representative and absorbs its
    neighbours, so the cost scales with the number of clusters.
    """
    pts = np.asarray(points, dtype=float)
    free = np.ones(len(pts), dtype=bool)
    keep: list[int] = []
    while free.any():
        i = int(np.argmax(free))
        keep.append(i)
        free &= np.linalg.norm(pts - pts[i], axis=1) > radius
    return keep
