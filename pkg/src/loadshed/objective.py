"""Penalized load-shedding objective, its block gradients and step constants.

The objective is

    H(gamma, z, theta) = -1^T z_d + rho/2 * ||c(gamma, z, theta)||^2

with ``c`` the power-flow residual from :func:`loadshed.netmodel.flow_residual`.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import spectral_norm
from .netmodel import flow_residual, _check_dims

# a_k, c_k use max(L, LIPSCHITZ_FLOOR * rho) so theta = 0 never divides by zero
LIPSCHITZ_FLOOR = 1e-8


def _check_rho(rho):
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")


@dataclass(frozen=True)
class LipschitzEstimates:
    L1: float
    L2: float
    L3: float
    s1: float
    s2: float
    s3: float


def eval_H(net, state, rho):
    _check_rho(rho)
    c = flow_residual(net, state)
    return float(-state.z[net.load_mask].sum() + 0.5 * rho * (c @ c))


def grad_gamma(net, state, rho):
    """Gradient in the line statuses.

    Evaluated as the two-term form
    ``rho ((D E^T E D) o (s s^T)) gamma - rho diag(s (P+z)^T E D)`` with
    ``s = sin(E^T theta)``, both terms applied through the sparse incidence.
    """
    _check_dims(net, state)
    d = net.admittance
    s = np.sin(net.angle_diff(state.theta))
    Ed = net.scatter(d * s * state.gamma)  # E D diag(s) gamma
    quad = s * d * net.angle_diff(Ed)
    lin = s * d * net.angle_diff(net.injection + state.z)
    return rho * (quad - lin)


def grad_z(net, state, rho):
    c = flow_residual(net, state)
    return -net.load_mask.astype(float) - rho * c


def grad_theta(net, state, rho):
    c = flow_residual(net, state)
    cos = np.cos(net.angle_diff(state.theta))
    return rho * net.scatter(cos * state.gamma * net.admittance * net.angle_diff(c))


def lipschitz_gamma(net, theta, rho):
    """``rho ||(D E^T E D) o (s s^T)||``, computed as ``rho ||E D diag(s)||^2``."""
    s = np.sin(net.angle_diff(theta))
    return rho * spectral_norm(net.weighted_incidence * s) ** 2


def lipschitz_theta(net, gamma, z, rho):
    """``rho ||E||^2 (2 ||Q|| + ||R||)`` with ``Q = G D E^T E D G``, ``R = G D E^T (P+z)``."""
    EDG = net.weighted_incidence * gamma
    normQ = spectral_norm(EDG) ** 2
    R = gamma * net.admittance * net.angle_diff(net.injection + z)
    return rho * net.norm_E ** 2 * (2.0 * normQ + np.linalg.norm(R))


def lipschitz_bounds(net, rho):
    """State-independent bounds ``(s1, s2, s3)`` on the block constants."""
    nED2 = net.norm_ED ** 2
    s1 = rho * net.m * nED2
    s3 = rho * net.norm_E ** 2 * nED2 * (2.0 + np.linalg.norm(net.injection))
    return s1, rho, s3


def lipschitz(net, state, rho):
    _check_rho(rho)
    _check_dims(net, state)
    s1, s2, s3 = lipschitz_bounds(net, rho)
    return LipschitzEstimates(
        L1=lipschitz_gamma(net, state.theta, rho),
        L2=float(rho),
        L3=lipschitz_theta(net, state.gamma, state.z, rho),
        s1=s1, s2=s2, s3=s3,
    )
