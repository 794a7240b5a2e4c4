"""Dense linear algebra helpers and the check-loss quantile regression solver.

The solver is a primal-dual (Frisch-Newton) interior point method with a
Mehrotra predictor-corrector step.  The interior solution is rounded to a
vertex of the feasible polytope and then polished by exact simplex pivots,
so that residuals of basic observations are exactly zero.  Exact zeros
matter downstream: the quantile score counts ``u == 0`` as ``u <= 0``.

For a grid of quantile levels :func:`quantile_path` solves the first level
by interior point and warm-starts each following level from the previous
optimal basis, which typically needs only a handful of pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError, DimensionError, DomainError, SingularityError

GAP_TOL = 1e-9
MAX_IP_ITER = 100
MAX_PIVOTS = 100_000
# Relative tolerance below which residuals are set to exactly zero.
ZERO_RTOL = 1e-10


# --------------------------------------------------------------------------
# scalar losses
# --------------------------------------------------------------------------


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {tau!r}")
    return tau


def check_loss(u, tau: float):
    """Koenker-Bassett check loss ``u * (tau - 1{u < 0})``.

    Works elementwise on arrays. Nonnegative, zero only at ``u == 0``.
    """
    tau = _check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return float(out) if out.ndim == 0 else out


def psi(u, tau: float):
    """Quantile score ``1{u <= 0} - tau``; the boundary ``u == 0`` counts as ``<= 0``."""
    tau = _check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = (u <= 0).astype(float) - tau
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# dense linear algebra
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor, ``lower @ lower.T == matrix``."""

    lower: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(M) -> CholFactor:
    """Cholesky-Banachiewicz factorization with an explicit pivot check.

    Raises
    ------
    SingularityError
        If a pivot falls below ``1e-12 * trace(M)``; the error carries the
        pivot index.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    scale = max(abs(np.trace(A)), np.finfo(float).tiny)
    if np.max(np.abs(A - A.T)) > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise DomainError("matrix is not symmetric")
    m = A.shape[0]
    L = np.zeros_like(A)
    for j in range(m):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= 1e-12 * scale:
            raise SingularityError(
                f"matrix is not positive definite (pivot {j} = {d:.3e})", pivot=j
            )
        L[j, j] = math.sqrt(d)
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return CholFactor(L)


def inv_sqrt(M) -> np.ndarray:
    """Upper-triangular ``C`` with ``C.T @ C == inv(M)``.

    ``C`` is the transpose of the lower Cholesky factor of ``inv(M)``.
    """
    L = cholesky(M).lower
    m = L.shape[0]
    # inv(M) = inv(L).T @ inv(L)
    Linv = np.linalg.solve(L, np.eye(m))
    Minv = Linv.T @ Linv
    Minv = 0.5 * (Minv + Minv.T)
    return cholesky(Minv).lower.T.copy()


def sqrt_upper(M) -> np.ndarray:
    """Upper-triangular square root ``A`` with ``A.T @ A == M`` (transposed lower Cholesky)."""
    return cholesky(M).lower.T.copy()


def _validate_design(y, X) -> tuple[np.ndarray, np.ndarray]:
    y = np.ascontiguousarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = np.ascontiguousarray(X)
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
    n, m = X.shape
    if n <= m:
        raise DimensionError(f"need more observations ({n}) than regressors ({m})")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite values in y or X")
    # rank check through the Gram matrix
    cholesky(X.T @ X)
    return y, X


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _ip_solve(X, y, tau, tol, max_iter):
    """Frisch-Newton interior point on the bounded dual LP.

    max y'a  s.t.  X'a = (1-tau) X'1,  0 <= a <= 1.
    Returns (beta, relative gap, iterations, converged flag).
    """
    n, m = X.shape
    c = -y
    rhs = (1.0 - tau) * X.sum(axis=0)
    a = np.full(n, 1.0 - tau)
    s = np.full(n, tau)
    XtX = X.T @ X
    b = np.linalg.solve(XtX, X.T @ y)
    lam = -b
    r = y - X @ b
    delta = max(np.mean(np.abs(r)), 1e-6 * (1.0 + np.max(np.abs(y))))
    w = np.maximum(r, 0.0) + delta
    z = np.maximum(-r, 0.0) + delta
    rhs_norm = 1.0 + np.sqrt(np.sum(rhs * rhs))
    y_norm = 1.0 + np.sqrt(np.sum(y * y))
    rel_gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        rp = rhs - X.T @ a
        rd = c - X @ lam - z + w
        gap = a @ z + s @ w
        pobj = c @ a
        rel_gap = gap / (1.0 + abs(pobj))
        if (
            rel_gap < tol
            and np.sqrt(np.sum(rp * rp)) / rhs_norm < tol
            and np.sqrt(np.sum(rd * rd)) / y_norm < tol
        ):
            converged = True
            break
        it += 1
        theta = 1.0 / (z / a + w / s)
        M = (X.T * theta) @ X
        # predictor (mu = 0)
        comp_z = -a * z
        comp_w = -s * w
        q = rd - comp_z / a + comp_w / s
        dlam = np.linalg.solve(M, rp + X.T @ (theta * q))
        da = theta * (X @ dlam - q)
        dz = (comp_z - z * da) / a
        dw = (comp_w + w * da) / s
        ap = 1.0
        ad = 1.0
        for i in range(n):
            if da[i] < 0.0:
                ap = min(ap, -a[i] / da[i])
            elif da[i] > 0.0:
                ap = min(ap, s[i] / da[i])
            if dz[i] < 0.0:
                ad = min(ad, -z[i] / dz[i])
            if dw[i] < 0.0:
                ad = min(ad, -w[i] / dw[i])
        mu = gap / (2.0 * n)
        mu_aff = (
            np.sum((a + ap * da) * (z + ad * dz)) + np.sum((s - ap * da) * (w + ad * dw))
        ) / (2.0 * n)
        sigma = (mu_aff / mu) ** 3
        # corrector
        comp_z = sigma * mu - a * z - da * dz
        comp_w = sigma * mu - s * w + da * dw
        q = rd - comp_z / a + comp_w / s
        dlam = np.linalg.solve(M, rp + X.T @ (theta * q))
        da = theta * (X @ dlam - q)
        dz = (comp_z - z * da) / a
        dw = (comp_w + w * da) / s
        ap = 1.0
        ad = 1.0
        for i in range(n):
            if da[i] < 0.0:
                ap = min(ap, -a[i] / da[i])
            elif da[i] > 0.0:
                ap = min(ap, s[i] / da[i])
            if dz[i] < 0.0:
                ad = min(ad, -z[i] / dz[i])
            if dw[i] < 0.0:
                ad = min(ad, -w[i] / dw[i])
        ap = min(1.0, 0.99995 * ap)
        ad = min(1.0, 0.99995 * ad)
        a = a + ap * da
        s = 1.0 - a
        # keep strictly interior after rounding
        for i in range(n):
            if a[i] <= 0.0 or s[i] <= 0.0:
                a[i] = min(max(a[i], 1e-14), 1.0 - 1e-14)
                s[i] = 1.0 - a[i]
        lam = lam + ad * dlam
        z = z + ad * dz
        w = w + ad * dw
    return -lam, rel_gap, it, converged


@njit(cache=True)
def _zero_tol(y):
    return ZERO_RTOL * max(1.0, np.max(np.abs(y)))


@njit(cache=True)
def _greedy_basis(X, r):
    """Pick m linearly independent rows of X with the smallest |residual|."""
    n, m = X.shape
    order = np.argsort(np.abs(r))
    basis = np.empty(m, dtype=np.int64)
    Q = np.zeros((m, m))
    nb = 0
    for idx in range(n):
        i = order[idx]
        v = X[i].copy()
        nrm0 = np.sqrt(np.sum(v * v))
        if nrm0 == 0.0:
            continue
        for _ in range(2):
            for j in range(nb):
                v -= (Q[j] @ v) * Q[j]
        nrm = np.sqrt(np.sum(v * v))
        if nrm > 1e-9 * nrm0:
            Q[nb] = v / nrm
            basis[nb] = i
            nb += 1
            if nb == m:
                break
    return basis, nb


@njit(cache=True)
def _residuals_into(X, y, basis, ztol, r):
    """Solve the basic system and write exact-zero-clamped residuals into r."""
    n, m = X.shape
    Xh = np.empty((m, m))
    yh = np.empty(m)
    for j in range(m):
        Xh[j] = X[basis[j]]
        yh[j] = y[basis[j]]
    b = np.linalg.solve(Xh, yh)
    for i in range(n):
        acc = y[i]
        for j in range(m):
            acc -= X[i, j] * b[j]
        r[i] = 0.0 if abs(acc) <= ztol else acc
    for j in range(m):
        r[basis[j]] = 0.0
    return b, Xh


@njit(cache=True)
def _weighted_select(t, w, idx, nc, need):
    """Smallest breakpoint at which the cumulative weight reaches ``need``.

    Expected linear time (quickselect on the breakpoints); permutes the
    first ``nc`` entries of the three arrays in place.  Returns the
    observation index, or -1 if the total weight is insufficient.
    """
    lo = 0
    hi = nc
    while hi > lo:
        # median of three pivot
        a = t[lo]
        b = t[(lo + hi - 1) // 2]
        c = t[hi - 1]
        if a > b:
            a, b = b, a
        if b > c:
            b = c
        piv = a if a > b else b
        # three-way partition: [lo, lt) < piv, [lt, gt) == piv, [gt, hi) > piv
        lt = lo
        gt = hi
        i = lo
        while i < gt:
            ti = t[i]
            if ti < piv:
                t[i], t[lt] = t[lt], t[i]
                w[i], w[lt] = w[lt], w[i]
                idx[i], idx[lt] = idx[lt], idx[i]
                lt += 1
                i += 1
            elif ti > piv:
                gt -= 1
                t[i], t[gt] = t[gt], t[i]
                w[i], w[gt] = w[gt], w[i]
                idx[i], idx[gt] = idx[gt], idx[i]
            else:
                i += 1
        wl = 0.0
        for k in range(lo, lt):
            wl += w[k]
        if wl >= need:
            hi = lt
            continue
        we = 0.0
        for k in range(lt, gt):
            we += w[k]
        if wl + we >= need:
            return idx[lt]
        need -= wl + we
        lo = gt
    return -1


@njit(cache=True)
def _heap_push(ht, hk, size, cap, t, k):
    """Bounded max-heap keeping the ``cap`` smallest keys; returns new size."""
    if size < cap:
        i = size
        size += 1
        ht[i] = t
        hk[i] = k
        while i > 0:
            par = (i - 1) // 2
            if ht[par] >= ht[i]:
                break
            ht[par], ht[i] = ht[i], ht[par]
            hk[par], hk[i] = hk[i], hk[par]
            i = par
        return size
    if t >= ht[0]:
        return size
    ht[0] = t
    hk[0] = k
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        big = left
        if left + 1 < size and ht[left + 1] > ht[left]:
            big = left + 1
        if ht[i] >= ht[big]:
            break
        ht[i], ht[big] = ht[big], ht[i]
        hk[i], hk[big] = hk[big], hk[i]
        i = big
    return size


HEAP_CAP = 32


@njit(cache=True)
def _init_state(X, y, basis, ztol, r, in_basis, Gp, Gn, zero_idx):
    """Residuals, sign-class gradient sums and the degenerate set for a basis.

    Returns (beta, basis matrix, number of zero nonbasic observations).
    """
    n, m = X.shape
    b, Xh = _residuals_into(X, y, basis, ztol, r)
    in_basis[:] = False
    for j in range(m):
        in_basis[basis[j]] = True
    Gp[:] = 0.0
    Gn[:] = 0.0
    nz = 0
    for i in range(n):
        ri = r[i]
        if ri > 0.0:
            for j in range(m):
                Gp[j] += X[i, j]
        elif ri < 0.0:
            for j in range(m):
                Gn[j] += X[i, j]
        elif not in_basis[i]:
            zero_idx[nz] = i
            nz += 1
    return b, Xh, nz


@njit(cache=True)
def _pivot(X, XT, tau, ztol, max_pivots, basis, in_basis, b, Xh, r, Gp, Gn,
           zero_idx, nz, work_t, work_w, work_i, av):
    """Exact simplex pivots from a vertex until the optimality conditions hold.

    Each pivot frees one basic observation in a descent direction and does
    an exact line search on the piecewise-linear objective (weighted-median
    step).  All state arrays are updated in place.  The gradient of the
    smooth part is ``tau * Gp + (tau - 1) * Gn`` where ``Gp``/``Gn`` sum the
    rows with positive/negative residuals.  Returns (pivots, nz, ok).
    """
    n, m = X.shape
    g = np.empty(m)
    d = np.empty(m)
    ht = np.empty(HEAP_CAP)
    hk = np.empty(HEAP_CAP, dtype=np.int64)
    pivots = 0
    while pivots < max_pivots:
        Xinv = np.linalg.inv(Xh)
        for l in range(m):
            g[l] = tau * Gp[l] + (tau - 1.0) * Gn[l]
        best = -1e-9
        best_j = -1
        best_sig = 0.0
        for j in range(m):
            vj = 0.0
            for l in range(m):
                vj += Xinv[l, j] * g[l]
            for sgn in (1.0, -1.0):
                D = -sgn * vj + ((1.0 - tau) if sgn > 0 else tau)
                for kk in range(nz):
                    xi = zero_idx[kk]
                    ai = 0.0
                    for l in range(m):
                        ai += X[xi, l] * Xinv[l, j]
                    ai *= sgn
                    # rho_tau(-ai)
                    D += -ai * (tau - (1.0 if ai > 0.0 else 0.0))
                if D < best:
                    best = D
                    best_j = j
                    best_sig = sgn
        if best_j < 0:
            return pivots, nz, True
        for l in range(m):
            d[l] = best_sig * Xinv[l, best_j]
        need = -best
        for i in range(n):
            av[i] = XT[0, i] * d[0]
        for l in range(1, m):
            dl = d[l]
            for i in range(n):
                av[i] += XT[l, i] * dl
        nc = 0
        hsize = 0
        thr = np.inf
        for i in range(n):
            ai = av[i]
            ri = r[i]
            # branch-free append; only rows moving toward zero are kept
            ti = ri / ai if ai != 0.0 else -1.0
            work_t[nc] = ti
            work_w[nc] = abs(ai)
            work_i[nc] = i
            keep = ti > 0.0
            if keep and ti < thr:
                hsize = _heap_push(ht, hk, hsize, HEAP_CAP, ti, nc)
                if hsize == HEAP_CAP:
                    thr = ht[0]
            nc += keep
        if nc == 0:
            return pivots, nz, False
        # fast path: the heap holds the smallest breakpoints
        enter = -1
        tstar = 0.0
        order = np.argsort(ht[:hsize])
        acc = 0.0
        for kk in range(hsize):
            c = hk[order[kk]]
            acc += work_w[c]
            if acc >= need:
                enter = work_i[c]
                tstar = work_t[c]
                break
        if enter < 0:
            if nc <= HEAP_CAP:
                return pivots, nz, False
            enter = _weighted_select(work_t, work_w, work_i, nc, need)
            if enter < 0:
                return pivots, nz, False
            tstar = r[enter] / av[enter]
        leave = basis[best_j]
        in_basis[leave] = False
        in_basis[enter] = True
        basis[best_j] = enter
        for l in range(m):
            b[l] += tstar * d[l]
            Xh[best_j, l] = X[enter, l]
        # residual update; the sums change only where a sign class changes
        nz = 0
        for i in range(n):
            r_old = r[i]
            ri = r_old - tstar * av[i]
            if abs(ri) <= ztol or in_basis[i]:
                ri = 0.0
            r[i] = ri
            if ri * r_old > 0.0:
                continue
            if ri == 0.0 and not in_basis[i]:
                zero_idx[nz] = i
                nz += 1
            if r_old > 0.0:
                for l in range(m):
                    Gp[l] -= X[i, l]
            elif r_old < 0.0:
                for l in range(m):
                    Gn[l] -= X[i, l]
            if ri > 0.0:
                for l in range(m):
                    Gp[l] += X[i, l]
            elif ri < 0.0:
                for l in range(m):
                    Gn[l] += X[i, l]
        pivots += 1
    return pivots, nz, False


@njit(cache=True)
def _simplex(X, y, tau, basis, ztol, max_pivots):
    """Polish a vertex into an exact optimum at one level.

    Returns (beta, residuals, basis, pivots, ok).
    """
    n, m = X.shape
    XT = np.ascontiguousarray(X.T)
    basis = basis.copy()
    r = np.empty(n)
    in_basis = np.zeros(n, dtype=np.bool_)
    Gp = np.zeros(m)
    Gn = np.zeros(m)
    zero_idx = np.empty(n, dtype=np.int64)
    b, Xh, nz = _init_state(X, y, basis, ztol, r, in_basis, Gp, Gn, zero_idx)
    piv, nz, ok = _pivot(X, XT, tau, ztol, max_pivots, basis, in_basis, b, Xh, r,
                         Gp, Gn, zero_idx, nz, np.empty(n), np.empty(n),
                         np.empty(n, dtype=np.int64), np.empty(n))
    return b, r, basis, piv, ok


# exact residuals are refreshed every this many levels along a path
REFRESH_EVERY = 10


@njit(cache=True)
def _path_kernel(X, y, taus, tol, max_iter, max_pivots):
    """Exact fits along an increasing grid of quantile levels.

    Returns (betas (T, m), nonpositive-residual indicators (T, n) as uint8,
    objectives (T,), status code).  Status: 0 ok, 1 IP not converged,
    2 simplex failure.
    """
    n, m = X.shape
    T = taus.shape[0]
    betas = np.empty((T, m))
    nonpos = np.empty((T, n), dtype=np.uint8)
    objs = np.empty(T)
    ztol = _zero_tol(y)
    XT = np.ascontiguousarray(X.T)
    b0, gap, it, conv = _ip_solve(X, y, taus[0], tol, max_iter)
    if not conv:
        return betas, nonpos, objs, 1
    r = y - X @ b0
    basis, nb = _greedy_basis(X, r)
    if nb < m:
        return betas, nonpos, objs, 2
    in_basis = np.zeros(n, dtype=np.bool_)
    Gp = np.zeros(m)
    Gn = np.zeros(m)
    zero_idx = np.empty(n, dtype=np.int64)
    work_t = np.empty(n)
    work_w = np.empty(n)
    work_i = np.empty(n, dtype=np.int64)
    av = np.empty(n)
    b = np.empty(m)
    Xh = np.empty((m, m))
    nz = 0
    for t in range(T):
        tau = taus[t]
        if t % REFRESH_EVERY == 0:
            b, Xh, nz = _init_state(X, y, basis, ztol, r, in_basis, Gp, Gn, zero_idx)
        piv, nz, ok = _pivot(X, XT, tau, ztol, max_pivots, basis, in_basis, b, Xh, r,
                             Gp, Gn, zero_idx, nz, work_t, work_w, work_i, av)
        if not ok:
            return betas, nonpos, objs, 2
        betas[t] = b
        obj = 0.0
        for i in range(n):
            ri = r[i]
            if ri <= 0.0:
                nonpos[t, i] = 1
                obj -= ri * (1.0 - tau)
            else:
                nonpos[t, i] = 0
                obj += ri * tau
        objs[t] = obj
    return betas, nonpos, objs, 0


# --------------------------------------------------------------------------
# public fitting API
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantileFit:
    """Result of one check-loss minimization.

    ``beta`` has length m; for restricted fits it is ``(0_p, alpha)`` and
    ``alpha`` holds the k free coefficients.
    """

    tau: float
    beta: np.ndarray
    objective: float
    residuals: np.ndarray
    alpha: np.ndarray | None = None
    p: int = 0

    @property
    def nonpositive(self) -> np.ndarray:
        return self.residuals <= 0


def _is_constant_column(X: np.ndarray) -> bool:
    return X.shape[1] == 1 and np.all(X[:, 0] == X[0, 0]) and X[0, 0] > 0


def _constant_fit(y, X, tau):
    # lower endpoint of the solution interval: the ceil(n*tau)-th order statistic
    n = y.shape[0]
    k = max(int(math.ceil(n * tau - 1e-12)), 1)
    q = np.partition(y, k - 1)[k - 1]
    return np.array([q / X[0, 0]])


def _solve(y: np.ndarray, X: np.ndarray, tau: float) -> np.ndarray:
    if _is_constant_column(X):
        return _constant_fit(y, X, tau)
    b, gap, it, conv = _ip_solve(X, y, tau, GAP_TOL, MAX_IP_ITER)
    if not conv:
        raise ConvergenceError(
            f"interior point did not converge in {MAX_IP_ITER} iterations (gap {gap:.2e})",
            gap=float(gap),
        )
    basis, nb = _greedy_basis(X, y - X @ b)
    if nb < X.shape[1]:
        raise SingularityError("could not extract a nonsingular basis")
    b, r, basis, piv, ok = _simplex(X, y, tau, basis, _zero_tol(y), MAX_PIVOTS)
    if not ok:
        raise ConvergenceError("simplex polishing failed", gap=float(gap))
    return b


def _exact_residuals(y, X, beta):
    r = y - X @ beta
    r[np.abs(r) <= _zero_tol(y)] = 0.0
    return r


def fit_unrestricted(y, X, tau: float) -> QuantileFit:
    """Quantile regression of ``y`` on all columns of ``X`` at level ``tau``."""
    tau = _check_tau(tau)
    y, X = _validate_design(y, X)
    beta = _solve(y, X, tau)
    r = _exact_residuals(y, X, beta)
    return QuantileFit(tau, beta, float(np.sum(check_loss(r, tau))), r)


def fit_restricted(y, W, tau: float, p: int = 0) -> QuantileFit:
    """Quantile regression on the control block ``W`` only.

    ``alpha`` holds the k coefficients; ``beta`` is zero-padded to
    ``(0_p, alpha)``.  With ``p == 0`` this is the unrestricted fit.
    """
    tau = _check_tau(tau)
    y, W = _validate_design(y, W)
    alpha = _solve(y, W, tau)
    r = _exact_residuals(y, W, alpha)
    beta = np.concatenate([np.zeros(p), alpha])
    return QuantileFit(tau, beta, float(np.sum(check_loss(r, tau))), r, alpha=alpha, p=p)


@dataclass(frozen=True)
class QuantilePath:
    """Fits along a grid of quantile levels.

    ``nonpositive[t, i]`` is True when the residual of observation i at
    ``taus[t]`` is ``<= 0``; this is all the score process needs.
    """

    taus: np.ndarray
    coef: np.ndarray
    nonpositive: np.ndarray
    objectives: np.ndarray


def quantile_path(y, X, taus, *, validate: bool = True) -> QuantilePath:
    """Exact fits at every level of an increasing grid (warm-started simplex)."""
    taus = np.ascontiguousarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise DimensionError("taus must be a non-empty 1-d array")
    if np.any(np.diff(taus) <= 0):
        raise DomainError("taus must be strictly increasing")
    for t in (taus[0], taus[-1]):
        _check_tau(t)
    if validate:
        y, X = _validate_design(y, X)
    else:
        y = np.ascontiguousarray(y, dtype=float)
        X = np.ascontiguousarray(X, dtype=float)
    if _is_constant_column(X):
        coef = np.array([_constant_fit(y, X, t) for t in taus])
        nonpos = y[None, :] <= (coef * X[0, 0])
        objs = np.array([np.sum(check_loss(y - c[0] * X[0, 0], t)) for c, t in zip(coef, taus)])
        return QuantilePath(taus, coef, nonpos, objs)
    betas, nonpos, objs, status = _path_kernel(X, y, taus, GAP_TOL, MAX_IP_ITER, MAX_PIVOTS)
    if status == 1:
        raise ConvergenceError("interior point did not converge on the first level", gap=np.nan)
    if status == 2:
        raise SingularityError("simplex path failed (degenerate or rank-deficient design)")
    return QuantilePath(taus, betas, nonpos.astype(bool), objs)
