"""Spectral norm by power iteration."""

import numpy as np

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
# power iteration runs on G^(2^SQUARINGS) so near-tied top singular values separate
SQUARINGS = 10


class SpectralNormError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, iterations, estimate):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last estimate {estimate:.6e})"
        )
        self.iterations = iterations
        self.estimate = estimate


def _start_vector(k):
    # Fixed-seed start: a constant vector is orthogonal to the top
    # eigenvector of any graph Laplacian Gram, so avoid it.
    v = np.random.default_rng(0x5EED).standard_normal(k)
    return v / np.linalg.norm(v)


def _closed_form(A):
    if A.size == 1:
        return abs(float(A.flat[0]))
    # 2x2: largest root of the characteristic polynomial of A^T A
    G = A.T @ A
    tr = G[0, 0] + G[1, 1]
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    disc = max(tr * tr / 4.0 - det, 0.0)
    return float(np.sqrt(max(tr / 2.0 + np.sqrt(disc), 0.0)))


def spectral_norm(A, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Largest singular value of a dense matrix.

    Runs power iteration on whichever Gram matrix ``G`` (``A^T A`` or
    ``A A^T``) is smaller, stepping with a normalized ``G^1024`` built by
    repeated squaring, and stops when the Rayleigh quotient of ``G``
    changes by less than ``tol`` relative to its value. 1x1 and 2x2
    inputs use closed forms.

    Raises
    ------
    SpectralNormError
        If ``max_iter`` iterations pass without meeting ``tol``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0 or not np.any(A):
        return 0.0
    if A.shape == (1, 1) or A.shape == (2, 2):
        return _closed_form(A)
    # rescale so tiny entries do not underflow in the Gram matrix
    scale = float(np.max(np.abs(A)))
    return scale * _power_norm(A / scale, tol, max_iter)


def _power_norm(A, tol, max_iter):
    G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    S = G / np.linalg.norm(G)
    for _ in range(SQUARINGS):
        S = S @ S
        S /= np.linalg.norm(S)
    v = _start_vector(G.shape[0])
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = S @ v
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        v = y / ny
        lam_new = float(v @ (G @ v))
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise SpectralNormError(max_iter, float(np.sqrt(max(lam, 0.0))))
