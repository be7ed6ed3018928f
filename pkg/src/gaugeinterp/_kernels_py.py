"""Pure numpy implementation of the batched SU(2) kernels.

Quaternions are stored as ``(..., 4)`` float64 arrays ``(a, b, c, d)`` for the
matrix ``[[a+ib, c+id], [-c+id, a-ib]]``; the product is the Hamilton product.
"""
import numpy as np

#: tr U <= -2 + DEGENERATE_TOL marks the branch cut of the principal root
DEGENERATE_TOL = 1e-8


def qmul(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    out = np.stack([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ], axis=-1)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def qconj(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def _axis_angle(q):
    q = np.asarray(q, dtype=np.float64)
    a = np.clip(q[..., 0], -1.0, 1.0)
    vec = q[..., 1:]
    vnorm = np.linalg.norm(vec, axis=-1)
    phi = np.arccos(a)
    cut = a <= -1.0 + 0.5 * DEGENERATE_TOL
    phi = np.where(cut, np.pi, phi)
    safe = vnorm > 1e-300
    axis = np.where(safe[..., None], vec / np.where(safe, vnorm, 1.0)[..., None],
                    np.array([1.0, 0.0, 0.0]))
    return phi, axis


def qpow(q, t):
    """Principal power ``q**t``: eigenphases ``phi`` in [0, pi] scaled by ``t``."""
    phi, axis = _axis_angle(q)
    t = np.asarray(t, dtype=np.float64)
    ang = phi * t
    return np.concatenate([np.cos(ang)[..., None], np.sin(ang)[..., None] * axis], axis=-1)


def slerp_mid(u, v):
    """``U (U^dag V)^(1/2)`` for batches of quaternions."""
    return qmul(u, qpow(qmul(qconj(u), v), 0.5))


def qflux(q):
    q = np.asarray(q, dtype=np.float64)
    return np.arccos(np.clip(q[..., 0], -1.0, 1.0))


def eigenframe(q):
    """Return ``(eta, phi)`` with ``eta^dag q eta = exp(i phi sigma_z)``."""
    phi, axis = _axis_angle(q)
    nx, ny, nz = np.moveaxis(axis, -1, 0)
    # minimal rotation taking the i-axis onto ``axis``; antipodal case uses j
    w = 1.0 + nx
    eta = np.stack([w, np.zeros_like(w), -nz, ny], axis=-1)
    norm = np.linalg.norm(eta, axis=-1, keepdims=True)
    flip = norm[..., 0] < 1e-12
    eta = np.where(flip[..., None], np.array([0.0, 0.0, 1.0, 0.0]),
                   eta / np.where(flip[..., None], 1.0, norm))
    trivial = np.abs(q[..., 0]) >= 1.0 - 1e-15
    trivial &= np.linalg.norm(q[..., 1:], axis=-1) < 1e-14
    eta = np.where(trivial[..., None], np.array([1.0, 0.0, 0.0, 0.0]), eta)
    return eta, phi
