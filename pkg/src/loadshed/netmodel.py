"""Lossless AC network in incidence form and the load-shedding constraints.

A network with ``n`` buses and ``m`` lines is stored as two index arrays
(``from_bus``, ``to_bus``) describing the signed incidence matrix ``E``:
column ``l`` has ``+1`` at ``from_bus[l]`` and ``-1`` at ``to_bus[l]``.
All power quantities are per-unit on ``base_mva``.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .linalg import spectral_norm

BALANCE_TOL = 1e-9
ANGLE_LIMIT = np.pi / 2


class DimensionError(ValueError):
    """Array sizes do not match the network."""


def _frozen(x, dtype=float):
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PowerNetwork:
    from_bus: np.ndarray
    to_bus: np.ndarray
    admittance: np.ndarray
    injection: np.ndarray
    base_mva: float = 100.0
    bus_ids: Optional[np.ndarray] = None
    line_ids: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        f = _frozen(self.from_bus, int)
        t = _frozen(self.to_bus, int)
        d = _frozen(self.admittance)
        P = _frozen(self.injection)
        n, m = P.size, d.size
        if f.shape != (m,) or t.shape != (m,):
            raise DimensionError("from_bus/to_bus must have one entry per line")
        if m and (f.min() < 0 or t.min() < 0 or f.max() >= n or t.max() >= n):
            raise ValueError("line endpoint outside bus range")
        if np.any(f == t):
            raise ValueError("line with identical endpoints")
        if np.any(d <= 0):
            raise ValueError("admittances must be strictly positive")
        if abs(P.sum()) > BALANCE_TOL:
            raise ValueError(f"injections not balanced: 1^T P = {P.sum():.3e}")
        if self.base_mva <= 0:
            raise ValueError("base_mva must be positive")
        bus_ids = _frozen(np.arange(1, n + 1) if self.bus_ids is None else self.bus_ids, int)
        line_ids = _frozen(np.arange(1, m + 1) if self.line_ids is None else self.line_ids, int)
        if bus_ids.shape != (n,) or line_ids.shape != (m,):
            raise DimensionError("bus_ids/line_ids length mismatch")
        for k, v in dict(from_bus=f, to_bus=t, admittance=d, injection=P,
                         bus_ids=bus_ids, line_ids=line_ids).items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "base_mva", float(self.base_mva))

    @property
    def n(self):
        return self.injection.size

    @property
    def m(self):
        return self.admittance.size

    @cached_property
    def load_mask(self):
        # zero-injection buses are load buses with a degenerate [0, 0] box
        m = self.injection <= 0
        m.setflags(write=False)
        return m

    @property
    def gen_mask(self):
        return ~self.load_mask

    @property
    def load_buses(self):
        return np.flatnonzero(self.load_mask)

    @property
    def gen_buses(self):
        return np.flatnonzero(self.gen_mask)

    @cached_property
    def z_lower(self):
        """``L = -[0; P_g]``."""
        lo = np.where(self.load_mask, 0.0, -self.injection)
        lo.setflags(write=False)
        return lo

    @cached_property
    def z_upper(self):
        """``U = -[P_d; 0]``."""
        hi = np.where(self.load_mask, -self.injection, 0.0)
        hi.setflags(write=False)
        return hi

    @property
    def total_load(self):
        return float(-self.injection[self.load_mask].sum())

    def angle_diff(self, theta):
        """``E^T theta``."""
        return theta[self.from_bus] - theta[self.to_bus]

    def scatter(self, x):
        """``E x`` for a length-m vector ``x``."""
        return (np.bincount(self.from_bus, x, self.n)
                - np.bincount(self.to_bus, x, self.n))

    @cached_property
    def incidence(self):
        """Dense ``E`` (n x m); only used where spectral norms are needed."""
        E = np.zeros((self.n, self.m))
        cols = np.arange(self.m)
        E[self.from_bus, cols] = 1.0
        E[self.to_bus, cols] = -1.0
        E.setflags(write=False)
        return E

    @cached_property
    def weighted_incidence(self):
        """Dense ``E D``."""
        ED = self.incidence * self.admittance
        ED.setflags(write=False)
        return ED

    @cached_property
    def norm_E(self):
        return spectral_norm(self.incidence)

    @cached_property
    def norm_ED(self):
        return spectral_norm(self.weighted_incidence)


@dataclass(frozen=True, eq=False)
class DecisionState:
    gamma: np.ndarray
    z: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        for k in ("gamma", "z", "theta"):
            object.__setattr__(self, k, _frozen(getattr(self, k)))

    @classmethod
    def flat(cls, net):
        """All lines in service, no shedding, zero angles."""
        return cls(np.ones(net.m), np.zeros(net.n), np.zeros(net.n))

    def replace(self, **kw):
        return DecisionState(kw.get("gamma", self.gamma), kw.get("z", self.z),
                             kw.get("theta", self.theta))


def _check_dims(net, state):
    if state.gamma.shape != (net.m,):
        raise DimensionError(f"gamma has shape {state.gamma.shape}, expected ({net.m},)")
    if state.z.shape != (net.n,):
        raise DimensionError(f"z has shape {state.z.shape}, expected ({net.n},)")
    if state.theta.shape != (net.n,):
        raise DimensionError(f"theta has shape {state.theta.shape}, expected ({net.n},)")


def line_flow(net, state):
    """Per-line active power ``D diag(gamma) sin(E^T theta)``."""
    _check_dims(net, state)
    return net.admittance * state.gamma * np.sin(net.angle_diff(state.theta))


def flow_residual(net, state):
    """Coupling residual ``E D diag(gamma) sin(E^T theta) - (P + z)``."""
    return net.scatter(line_flow(net, state)) - (net.injection + state.z)


@dataclass
class FeasibilityReport:
    violations: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "feasible"
        return "; ".join(f"{k}: {v:.3e}" for k, v in self.violations.items())


def is_feasible(net, state, K, tol=1e-9):
    """Check the cardinality, balance, box and angle constraints.

    Returns a :class:`FeasibilityReport` that is truthy when every
    constraint holds within ``tol``; otherwise it maps each violated
    constraint to the size of the violation.
    """
    _check_dims(net, state)
    g, z = state.gamma, state.z
    out = {}
    binary = float(np.max(np.minimum(np.abs(g), np.abs(g - 1.0)), initial=0.0))
    if binary > tol:
        out["binary"] = binary
    card = abs(net.m - g.sum() - K)
    if card > tol:
        out["cardinality"] = float(card)
    bal = abs(z.sum())
    if bal > tol:
        out["balance"] = float(bal)
    box = float(max(np.max(net.z_lower - z, initial=0.0), np.max(z - net.z_upper, initial=0.0)))
    if box > tol:
        out["box"] = box
    ang = float(np.max(np.abs(net.angle_diff(state.theta)), initial=0.0) - ANGLE_LIMIT)
    if ang > tol:
        out["angle"] = ang
    return FeasibilityReport(out)


class LoadShed(NamedTuple):
    mw: float
    pct: Optional[float]


def load_shed_mw(net, state):
    """Shed load in MW and as a percentage of total load.

    ``pct`` is ``None`` when the network carries no load.
    """
    _check_dims(net, state)
    shed = float(state.z[net.load_mask].sum())
    total = net.total_load
    pct = 100.0 * shed / total if total > 0 else None
    return LoadShed(net.base_mva * shed, pct)
