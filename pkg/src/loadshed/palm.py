"""Proximal alternating linearized minimization for worst-case load shedding.

One PALM sweep updates the three blocks Gauss-Seidel style::

    gamma <- project_gamma(gamma - grad_gamma(gamma, z, theta) / a)
    z     <- project_z(z - grad_z(gamma+, z, theta) / b)
    theta <- project_theta(theta - grad_theta(gamma+, z+, theta) / c)

with ``a = r1 L1``, ``b = r2 rho``, ``c = r3 L3`` recomputed every sweep.
"""

import itertools
import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from .netmodel import (ANGLE_LIMIT, DecisionState, FeasibilityReport, flow_residual,
                       is_feasible, load_shed_mw)
from .objective import (LIPSCHITZ_FLOOR, eval_H, grad_gamma, grad_theta, grad_z,
                        lipschitz_gamma, lipschitz_theta)
from .projections import THETA_MAX_ITER, project_gamma, project_theta, project_z

log = logging.getLogger(__name__)

INIT_POLICIES = ("flat", "powerflow")
MONOTONE_SLACK = 1e-9


class NonMonotoneError(RuntimeError):
    """The objective increased between sweeps, which PALM rules out."""

    def __init__(self, iteration, previous, current):
        super().__init__(
            f"objective increased at iteration {iteration}: {previous!r} -> {current!r}")
        self.iteration = iteration
        self.previous = previous
        self.current = current


@dataclass
class SolverConfig:
    K: int
    rho: float = 1e5
    r1: float = 1.1
    r2: float = 1.1
    r3: float = 1.1
    max_iters: int = 1000
    primal_tol: float = 0.0
    dual_tol: float = 0.0
    inner_tol: float = 1e-10
    inner_max_iter: int = THETA_MAX_ITER
    init: str = "flat"
    rebalance: str = "proportional"
    trace_every: int = 1
    # enumerate every outage set for comparison when m <= this (0 disables)
    brute_force_max_lines: int = 10

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        for r in ("r1", "r2", "r3"):
            if not getattr(self, r) > 1:
                raise ValueError(f"{r} must exceed 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.primal_tol < 0 or self.dual_tol < 0 or not self.inner_tol > 0:
            raise ValueError("tolerances must be nonnegative (inner_tol positive)")
        if self.init not in INIT_POLICIES:
            raise ValueError(f"init must be one of {INIT_POLICIES}")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    obj: float
    theta_res: float
    z_res: float
    gam_res: float
    prim_res: float

    @property
    def dual_res(self):
        return max(self.theta_res, self.z_res, self.gam_res)


@dataclass
class BruteForceComparison:
    sets_evaluated: int
    best_removed: List[int]
    best_obj: float
    palm_obj: float

    @property
    def gap(self):
        """PALM objective minus the best enumerated objective."""
        return self.palm_obj - self.best_obj


@dataclass
class SolveReport:
    removed_lines: List[int]
    shed_mw: float
    shed_pct: Optional[float]
    final_state: DecisionState
    trace: List[IterationRecord]
    feasibility: FeasibilityReport
    config: SolverConfig
    iterations: int
    stopped_on_tolerance: bool
    critical_residual: float
    inner_failures: int = 0
    brute_force: Optional[BruteForceComparison] = None

    @property
    def final(self):
        return self.trace[-1]

    def to_dict(self):
        s = self.final_state
        d = {
            "case": None,
            "K": self.config.K,
            "removed_lines": list(self.removed_lines),
            "shed_mw": self.shed_mw,
            "shed_pct": self.shed_pct,
            "iterations": self.iterations,
            "stopped_on_tolerance": self.stopped_on_tolerance,
            "final": asdict(self.final),
            "critical_residual": self.critical_residual,
            "inner_failures": self.inner_failures,
            "feasible": self.feasibility.ok,
            "violations": dict(self.feasibility.violations),
            "config": asdict(self.config),
            "state": {"gamma": s.gamma.tolist(), "z": s.z.tolist(), "theta": s.theta.tolist()},
            "brute_force": None,
        }
        if self.brute_force is not None:
            d["brute_force"] = dict(asdict(self.brute_force), gap=self.brute_force.gap)
        return d


def _u(net, state, rho, a):
    return state.gamma - grad_gamma(net, state, rho) / a


def _v(net, state, gamma_next, rho, b):
    return state.z - grad_z(net, state.replace(gamma=gamma_next), rho) / b


def _w(net, state, gamma_next, z_next, rho, c):
    staged = state.replace(gamma=gamma_next, z=z_next)
    return state.theta - grad_theta(net, staged, rho) / c


def linearization_points(net, state, rho, coeffs, gamma_next, z_next):
    """Gradient-step points ``(u, v, w)`` at their staged arguments.

    ``u`` uses ``(gamma^k, z^k, theta^k)``, ``v`` uses
    ``(gamma^{k+1}, z^k, theta^k)`` and ``w`` uses
    ``(gamma^{k+1}, z^{k+1}, theta^k)``.
    """
    a, b, c = coeffs
    if min(a, b, c) <= 0:
        raise ValueError("step coefficients must be positive")
    return (_u(net, state, rho, a), _v(net, state, gamma_next, rho, b),
            _w(net, state, gamma_next, z_next, rho, c))


def _step(net, state, config, k=0, duals=None, freeze_gamma=False):
    rho = config.rho
    floor = LIPSCHITZ_FLOOR * rho
    if freeze_gamma:
        gamma = state.gamma
    else:
        a = config.r1 * max(lipschitz_gamma(net, state.theta, rho), floor)
        gamma = project_gamma(_u(net, state, rho, a), config.K)
    b = config.r2 * rho
    z = project_z(_v(net, state, gamma, rho, b), net.z_lower, net.z_upper)
    c = config.r3 * max(lipschitz_theta(net, gamma, z, rho), floor)
    proj = project_theta(_w(net, state, gamma, z, rho, c), net, tol=config.inner_tol,
                         max_iter=config.inner_max_iter, warm_start=duals)
    if not proj.converged:
        log.warning("theta projection hit %d iterations (kkt %.2e) at sweep %d",
                    proj.iterations, proj.kkt, k)
    new = DecisionState(gamma, z, proj.theta)
    rec = IterationRecord(
        iter=k + 1,
        obj=eval_H(net, new, rho),
        theta_res=float(np.linalg.norm(new.theta - state.theta)),
        z_res=float(np.linalg.norm(new.z - state.z)),
        gam_res=float(np.linalg.norm(new.gamma - state.gamma)),
        prim_res=float(np.linalg.norm(flow_residual(net, new))),
    )
    return new, rec, proj


def palm_step(net, state, config, k=0, duals=None):
    """One Gauss-Seidel sweep; returns ``(new_state, IterationRecord)``."""
    new, rec, _ = _step(net, state, config, k=k, duals=duals)
    return new, rec


def _lossless_angles(net, newton_iters=50):
    # DC angles, then Newton on E D sin(E^T theta) = P with bus 0 as reference
    E, d, P = net.incidence, net.admittance, net.injection
    B = E @ (d[:, None] * E.T)
    theta = np.linalg.lstsq(B, P, rcond=None)[0]
    dc = theta.copy()
    for _ in range(newton_iters):
        y = net.angle_diff(theta)
        f = net.scatter(d * np.sin(y)) - P
        if np.linalg.norm(f) < 1e-13:
            break
        J = E @ ((d * np.cos(y))[:, None] * E.T)
        try:
            theta[1:] -= np.linalg.solve(J[1:, 1:], f[1:])
        except np.linalg.LinAlgError:
            return dc
    if not np.all(np.isfinite(theta)) or np.max(np.abs(net.angle_diff(theta)), initial=0) >= ANGLE_LIMIT:
        return dc
    return theta - theta.mean()


def initial_state(net, policy="flat"):
    """Starting point for PALM.

    ``flat`` is gamma=1, z=0, theta=0. ``powerflow`` keeps gamma=1, z=0 and
    takes theta solving the lossless flow equations of the intact network
    (falling back to DC angles), scaled into the angle limits if needed.
    """
    state = DecisionState.flat(net)
    if policy == "flat":
        return state
    if policy != "powerflow":
        raise ValueError(f"unknown init policy {policy!r}")
    theta = _lossless_angles(net)
    peak = np.max(np.abs(net.angle_diff(theta)), initial=0.0)
    if peak > ANGLE_LIMIT:
        theta *= ANGLE_LIMIT / peak * (1 - 1e-12)
    return state.replace(theta=theta)


def _stop(rec, config):
    if config.primal_tol <= 0 and config.dual_tol <= 0:
        return False
    ok = True
    if config.primal_tol > 0:
        ok &= rec.prim_res <= config.primal_tol
    if config.dual_tol > 0:
        ok &= rec.dual_res <= config.dual_tol
    return ok


def _run(net, config, state, freeze_gamma=False):
    K = config.K
    obj = eval_H(net, state, config.rho)
    card_ok = abs(net.m - state.gamma.sum() - K) < 0.5
    trace, duals, failures = [], None, 0
    stopped = False
    rec = None
    for k in range(config.max_iters):
        state, rec, proj = _step(net, state, config, k=k, duals=duals, freeze_gamma=freeze_gamma)
        duals = (proj.mu_plus, proj.mu_minus)
        failures += not proj.converged
        # descent is only guaranteed once the previous iterate is feasible
        if card_ok and rec.obj > obj + MONOTONE_SLACK * (1.0 + abs(obj)):
            raise NonMonotoneError(rec.iter, obj, rec.obj)
        obj, card_ok = rec.obj, True
        if k % config.trace_every == 0:
            trace.append(rec)
        if _stop(rec, config):
            stopped = True
            break
    if not trace or trace[-1] is not rec:
        trace.append(rec)
    return state, trace, stopped, failures


def critical_point_residual(net, state, rho, scale=1.0):
    """Largest block fixed-point gap of the prox-linearized map.

    Each block is stepped with coefficient ``scale * L_i`` (floored as in the
    solver) and projected; the gap is the norm of the resulting change.
    """
    floor = LIPSCHITZ_FLOOR * rho
    K = int(round(net.m - state.gamma.sum()))
    a = scale * max(lipschitz_gamma(net, state.theta, rho), floor)
    b = scale * rho
    c = scale * max(lipschitz_theta(net, state.gamma, state.z, rho), floor)
    g = project_gamma(state.gamma - grad_gamma(net, state, rho) / a, K)
    z = project_z(state.z - grad_z(net, state, rho) / b, net.z_lower, net.z_upper)
    th = project_theta(state.theta - grad_theta(net, state, rho) / c, net).theta
    return float(max(np.linalg.norm(state.gamma - g), np.linalg.norm(state.z - z),
                     np.linalg.norm(state.theta - th)))


def solve_fixed_outage(net, removed, config):
    """Run PALM on ``(z, theta)`` with the outage set ``removed`` (0-based) held fixed."""
    gamma = np.ones(net.m)
    gamma[list(removed)] = 0.0
    state = initial_state(net, config.init).replace(gamma=gamma)
    cfg = SolverConfig(**dict(asdict(config), K=len(removed)))
    state, trace, _, _ = _run(net, cfg, state, freeze_gamma=True)
    return state, trace[-1].obj


def enumerate_outages(net, config):
    """Evaluate every ``C(m, K)`` outage set with gamma frozen.

    Returns ``(results, best)`` where ``results`` is a list of
    ``(removed_line_ids, objective)`` and ``best`` the minimizing entry.
    """
    results = []
    for removed in itertools.combinations(range(net.m), config.K):
        _, obj = solve_fixed_outage(net, removed, config)
        results.append(([int(net.line_ids[i]) for i in removed], obj))
    best = min(results, key=lambda r: r[1])
    return results, best


def solve(net, config, init=None):
    """Run PALM from ``init`` (or the configured init policy) and build a report."""
    if config.K > net.m:
        raise ValueError(f"K={config.K} exceeds the number of lines {net.m}")
    state = init if init is not None else initial_state(net, config.init)
    state, trace, stopped, failures = _run(net, config, state)
    shed = load_shed_mw(net, state)
    removed = sorted(int(i) for i in net.line_ids[state.gamma < 0.5])
    report = SolveReport(
        removed_lines=removed,
        shed_mw=shed.mw,
        shed_pct=shed.pct,
        final_state=state,
        trace=trace,
        feasibility=is_feasible(net, state, config.K, tol=1e-12),
        config=config,
        iterations=trace[-1].iter,
        stopped_on_tolerance=stopped,
        critical_residual=critical_point_residual(net, state, config.rho),
        inner_failures=failures,
    )
    if 0 < net.m <= config.brute_force_max_lines and math.comb(net.m, config.K) > 0:
        _, (best_removed, best_obj) = enumerate_outages(net, config)
        report.brute_force = BruteForceComparison(
            sets_evaluated=math.comb(net.m, config.K), best_removed=best_removed,
            best_obj=best_obj, palm_obj=trace[-1].obj)
    return report
