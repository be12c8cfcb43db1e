"""Projections solving the three block subproblems."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .netmodel import ANGLE_LIMIT

THETA_TOL = 1e-10
THETA_MAX_ITER = 50_000


class InfeasibleBoxError(ValueError):
    pass


def project_gamma(u, K):
    """Nearest binary vector with exactly ``K`` zeros.

    The ``K`` smallest entries of ``u`` are set to 0 and the rest to 1.
    Ties at the threshold remove the lowest-index lines first.
    """
    u = np.asarray(u, dtype=float)
    m = u.size
    if not 0 <= K <= m:
        raise ValueError(f"K={K} outside [0, {m}]")
    gamma = np.ones(m)
    gamma[np.argsort(u, kind="stable")[:K]] = 0.0
    return gamma


def project_z(v, lower, upper):
    """Euclidean projection onto ``{lower <= z <= upper, sum(z) = 0}``.

    Solution has the form ``clip(v - lam, lower, upper)``; ``lam`` is the root
    of the nonincreasing piecewise-linear ``g(lam) = sum(clip(v - lam, L, U))``,
    located by bisection over the sorted breakpoints and then interpolated.
    """
    v = np.asarray(v, dtype=float)
    L = np.asarray(lower, dtype=float)
    U = np.asarray(upper, dtype=float)
    if np.any(L > U):
        raise InfeasibleBoxError("lower bound exceeds upper bound")
    if U.sum() < 0 or L.sum() > 0:
        raise InfeasibleBoxError(f"box cannot meet sum(z) = 0: sum(L)={L.sum():.3e}, sum(U)={U.sum():.3e}")
    z = L.copy()
    free = L < U
    if not np.any(free):
        return z
    vf, Lf, Uf = v[free], L[free], U[free]
    rhs = -L[~free].sum()

    def g(lam):
        return np.clip(vf - lam, Lf, Uf).sum() - rhs

    bp = np.sort(np.concatenate([vf - Uf, vf - Lf]))
    # g(bp[0]) = sum(U) >= 0 >= sum(L) = g(bp[-1])
    lo, hi = 0, bp.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g(bp[mid]) >= 0:
            lo = mid
        else:
            hi = mid
    glo, ghi = g(bp[lo]), g(bp[hi])
    if glo == ghi:
        lam = bp[lo]
    else:
        lam = bp[lo] + glo * (bp[hi] - bp[lo]) / (glo - ghi)
    zf = np.clip(vf - lam, Lf, Uf)
    # spread the rounding error over coordinates strictly inside the box
    inner = (zf > Lf) & (zf < Uf)
    if np.any(inner):
        zf[inner] -= (zf.sum() - rhs) / inner.sum()
        zf = np.clip(zf, Lf, Uf)
    z[free] = zf
    return z


@dataclass
class ThetaProjection:
    theta: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    iterations: int
    kkt: float
    converged: bool


def theta_kkt(net, w, theta, mu_plus, mu_minus, limit=ANGLE_LIMIT):
    """KKT residual of ``min ||theta - w||^2 / 2 s.t. |E^T theta| <= limit``.

    Max of stationarity ``||theta - w + E (mu+ - mu-)||``, primal violation,
    dual sign violation and complementary slackness.
    """
    y = net.angle_diff(theta)
    stat = np.linalg.norm(theta - w + net.scatter(mu_plus - mu_minus))
    primal = max(np.max(np.abs(y), initial=0.0) - limit, 0.0)
    dual = max(-np.min(mu_plus, initial=0.0), -np.min(mu_minus, initial=0.0), 0.0)
    comp = max(np.max(np.abs(mu_plus * (limit - y)), initial=0.0),
               np.max(np.abs(mu_minus * (limit + y)), initial=0.0))
    return float(max(stat, primal, dual, comp))


def _restore_feasibility(net, theta, limit):
    # constant vectors are strictly feasible, so shrinking toward the mean
    # restores |E^T theta| <= limit with the smallest move
    peak = np.max(np.abs(net.angle_diff(theta)), initial=0.0)
    if peak <= limit:
        return theta
    c = theta.mean()
    t = limit / peak
    while np.max(np.abs(net.angle_diff(c + t * (theta - c)))) > limit:
        t = np.nextafter(t, 0.0)
    return c + t * (theta - c)


def project_theta(w, net, tol=THETA_TOL, max_iter=THETA_MAX_ITER,
                  warm_start: Optional[tuple] = None, limit=ANGLE_LIMIT):
    """Project ``w`` onto ``{theta : |E^T theta| <= limit}``.

    Solves the dual over ``mu+, mu- >= 0`` (one pair per line) with FISTA
    and gradient-based restarts; the primal point is ``w - E (mu+ - mu-)``.
    ``warm_start`` is a previous ``(mu_plus, mu_minus)`` pair.

    Returns a :class:`ThetaProjection`; ``converged`` is False when
    ``max_iter`` was hit, in which case the best iterate found is returned.
    """
    w = np.asarray(w, dtype=float)
    m = net.m
    zeros = np.zeros(m)
    if np.max(np.abs(net.angle_diff(w)), initial=0.0) <= limit:
        return ThetaProjection(w.copy(), zeros, zeros.copy(), 0, 0.0, True)

    step = 1.0 / (2.0 * net.norm_E ** 2)
    if warm_start is not None:
        mp, mm = (np.maximum(np.asarray(a, dtype=float), 0.0) for a in warm_start)
    else:
        mp, mm = zeros.copy(), zeros.copy()
    yp, ym = mp.copy(), mm.copy()
    t = 1.0

    def primal(ap, am):
        return w - net.scatter(ap - am)

    best = None
    for it in range(1, max_iter + 1):
        y = net.angle_diff(primal(yp, ym))
        # dual objective gradient: d/dmu+ = limit - E^T theta, d/dmu- = limit + E^T theta
        np_ = np.maximum(yp - step * (limit - y), 0.0)
        nm_ = np.maximum(ym - step * (limit + y), 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        # restart momentum when it points uphill
        if np.dot(yp - np_, np_ - mp) + np.dot(ym - nm_, nm_ - mm) > 0:
            t_new, beta = 1.0, 0.0
        yp = np_ + beta * (np_ - mp)
        ym = nm_ + beta * (nm_ - mm)
        mp, mm, t = np_, nm_, t_new
        if it % 10 == 0 or it == max_iter:
            theta = _restore_feasibility(net, primal(mp, mm), limit)
            kkt = theta_kkt(net, w, theta, mp, mm, limit)
            if best is None or kkt < best[1]:
                best = (theta, kkt, mp.copy(), mm.copy())
            if kkt <= tol:
                break
    theta, kkt, mp, mm = best
    return ThetaProjection(theta, mp, mm, it, kkt, kkt <= tol)
