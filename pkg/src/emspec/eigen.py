"""Dense symmetric eigensolver.

Householder reduction to tridiagonal form followed by the implicit QL
algorithm with Wilkinson-type shifts (the EISPACK ``tred2``/``tql2`` pair).
Everything is sequential and deterministic; the kernels are compiled with
numba and release the GIL so epochs can be decomposed in threads.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from emspec.errors import ConvergenceError, InputError

MAX_SWEEPS = 30
_EPS = 2.0**-52


@numba.njit(cache=True, nogil=True)
def _tred2(V, d, e, vectors):
    n = V.shape[0]
    for j in range(n):
        d[j] = V[n - 1, j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
                V[j, i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = math.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                V[j, i] = f
                g = e[j] + V[j, j] * f
                for k in range(j + 1, i):
                    g += V[k, j] * d[k]
                    e[k] += V[k, j] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    V[k, j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
        d[i] = h

    if vectors:
        for i in range(n - 1):
            V[n - 1, i] = V[i, i]
            V[i, i] = 1.0
            h = d[i + 1]
            if h != 0.0:
                for k in range(i + 1):
                    d[k] = V[k, i + 1] / h
                for j in range(i + 1):
                    g = 0.0
                    for k in range(i + 1):
                        g += V[k, i + 1] * V[k, j]
                    for k in range(i + 1):
                        V[k, j] -= g * d[k]
            for k in range(i + 1):
                V[k, i + 1] = 0.0
        for j in range(n):
            d[j] = V[n - 1, j]
            V[n - 1, j] = 0.0
        V[n - 1, n - 1] = 1.0
    else:
        for j in range(n):
            d[j] = V[j, j]
    e[0] = 0.0


@numba.njit(cache=True, nogil=True)
def _tql2(V, d, e, vectors, max_iter):
    """Implicit QL on the tridiagonal (d, e). Returns 0 or the failing index + 1."""
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= _EPS * tst1:
                break
            m += 1
        if m > l:
            it = 0
            while True:
                it += 1
                if it > max_iter:
                    return l + 1
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    if vectors:
                        for k in range(n):
                            h = V[k, i + 1]
                            V[k, i + 1] = s * V[k, i] + c * h
                            V[k, i] = c * V[k, i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if abs(e[l]) <= _EPS * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return 0


def _check_symmetric(a: np.ndarray, tol: float) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > tol * scale:
        raise InputError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")


def _solve(a: np.ndarray, vectors: bool):
    a = np.asarray(a, dtype=float)
    _check_symmetric(a, 1e-12)
    n = a.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if n == 1:
        return a[0].copy(), np.ones((1, 1))
    # tred2 reads the lower triangle; symmetrize so tiny asymmetries cannot bias it
    V = np.ascontiguousarray(0.5 * (a + a.T))
    d = np.empty(n)
    e = np.empty(n)
    _tred2(V, d, e, vectors)
    fail = _tql2(V, d, e, vectors, MAX_SWEEPS)
    if fail:
        raise ConvergenceError(
            f"QL iteration did not converge for eigenvalue {fail - 1} of {n} "
            f"after {MAX_SWEEPS} iterations; off-diagonal residual {abs(e[fail - 1]):.3e}"
        )
    order = np.argsort(d, kind="stable")
    return d[order], V[:, order]


def eigvalsh(a) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending."""
    return _solve(a, vectors=False)[0]


def eig_symmetric(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    Raises
    ------
    InputError
        If ``a`` is not square and symmetric to 1e-12 (relative to its
        largest entry).
    ConvergenceError
        If any eigenvalue needs more than ``MAX_SWEEPS`` QL iterations.
    """
    return _solve(a, vectors=True)
