"""su(N) matrix algebra used by every other module.

Conventions:

* Lie element: anti-Hermitian traceless complex (N, N) ndarray.
* Group element: special-unitary complex (N, N) ndarray.
* Fiber map: arbitrary complex (N, N) ndarray (endomorphism of a fiber);
  derivatives of transports live here.

Everything broadcasts over leading axes, so a batch of M elements is an
(M, N, N) array. The N = 2 exponential is a closed form (Pauli route) and
is fully vectorized; N > 2 falls back to scaling-and-squaring Pade.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def commutator(x, y):
    """[x, y] = xy - yx."""
    return x @ y - y @ x


def anticommutator(x, y):
    return x @ y + y @ x


def dagger(u):
    """Conjugate transpose over the trailing two axes."""
    return np.conjugate(np.swapaxes(u, -1, -2))


def trace(m):
    return np.trace(m, axis1=-2, axis2=-1)


def maxabs(m):
    """Max-norm of the entries, the residual norm used everywhere."""
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def fiber_metric(phi, psi):
    """Inner product -Re tr(phi psi) on fiber maps.

    Restricted to Lie elements this is positive definite.
    """
    return -np.real(np.einsum("...ij,...ji->...", phi, psi))


def project_lie(m):
    """Nearest anti-Hermitian traceless matrix (orthogonal projection)."""
    a = 0.5 * (m - dagger(m))
    n = m.shape[-1]
    tr = trace(a) / n
    return a - tr[..., None, None] * np.eye(n)


def _sinhc(s):
    # sinh(s)/s, stable near 0
    small = np.abs(s) < 1e-5
    safe = np.where(small, 1.0, s)
    out = np.sinh(safe) / safe
    s2 = s * s
    return np.where(small, 1.0 + s2 / 6.0 + s2 * s2 / 120.0, out)


def _expm2(x):
    # closed form for 2x2: split off the trace, use m0^2 = -det(m0) I
    half_tr = 0.5 * trace(x)
    m0 = x - half_tr[..., None, None] * np.eye(2)
    det0 = m0[..., 0, 0] * m0[..., 1, 1] - m0[..., 0, 1] * m0[..., 1, 0]
    s = np.sqrt(-det0.astype(np.complex128))
    cosh = np.cosh(s)[..., None, None]
    shc = _sinhc(s)[..., None, None]
    out = cosh * np.eye(2) + shc * m0
    return np.exp(half_tr)[..., None, None] * out


def expm(x):
    """Matrix exponential, vectorized over leading axes.

    N = 2 uses the closed form (exact special-unitary output for Lie
    element input); other N loop over scaling-and-squaring Pade.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] == 2:
        return _expm2(x)
    flat = x.reshape((-1,) + x.shape[-2:])
    out = np.stack([scipy.linalg.expm(m) for m in flat])
    return out.reshape(x.shape)


def unitarize(u, steps=2):
    """Project a near-unitary matrix back onto the unitary group.

    Newton iteration for the polar factor; quadratic, so two steps take a
    1e-6 defect to roundoff. Input must already be close to unitary.
    """
    n = u.shape[-1]
    eye = np.eye(n)
    for _ in range(steps):
        u = 0.5 * (3.0 * u - u @ dagger(u) @ u)
    # remove the residual determinant phase mod the center
    det = np.linalg.det(u)
    phase = det ** (-1.0 / n)
    return phase[..., None, None] * u, maxabs(dagger(u) @ u - eye)


def lie_defect(x):
    """How far x is from anti-Hermitian traceless."""
    herm = maxabs(x + dagger(x))
    tr = maxabs(trace(x))
    return max(herm, tr)


def group_defect(u):
    """How far u is from special-unitary."""
    n = u.shape[-1]
    uni = maxabs(dagger(u) @ u - np.eye(n))
    det = maxabs(np.linalg.det(u) - 1.0)
    return max(uni, det)


PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=np.complex128,
)


def su_basis(n):
    """Orthogonal anti-Hermitian traceless basis; for n = 2, -i sigma_a / 2."""
    if n == 2:
        return -0.5j * PAULI
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = 1.0
            m[j, i] = -1.0
            basis.append(0.5 * m)
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = 1.0j
            m[j, i] = 1.0j
            basis.append(0.5 * m)
    for k in range(1, n):
        m = np.zeros((n, n), dtype=np.complex128)
        m[:k, :k] = np.eye(k) * 1.0j
        m[k, k] = -1.0j * k
        basis.append(m / np.sqrt(2.0 * k * (k + 1)))
    return np.stack(basis)


def random_lie(rng, n, scale=1.0, shape=()):
    """Seeded random Lie element(s) with entries O(scale)."""
    size = shape + (n, n)
    g = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return project_lie(scale * g)


def random_group(rng, n, scale=1.0, shape=()):
    return expm(random_lie(rng, n, scale=scale, shape=shape))


def random_fiber(rng, n, scale=1.0, shape=()):
    size = shape + (n, n)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
