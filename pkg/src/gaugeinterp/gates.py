"""Controlled gates on truncated link spaces, assembled by Haar quadrature.

A controlled gate acts as ``sum_q w_q |U_q><U_q| (x) G(U_q)``.  When ``G``
depends polynomially on the control (plain transport) a rule of sufficient
degree reproduces the exact gate.  The interpolating gate uses a principal
square root, which is not polynomial, so its quadrature error is measured
against a reference instead.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .group import Group, haar_quadrature
from .link import Side, TruncatedLinkBasis, position_table, rotation_batch


def apply_local(tensor: np.ndarray, op: np.ndarray, axes) -> np.ndarray:
    """Apply ``op`` (acting on the listed tensor axes, in order) to a dense tensor."""
    axes = list(axes)
    k = len(axes)
    dims = [tensor.shape[a] for a in axes]
    t = op.reshape(dims + dims)
    out = np.tensordot(t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def two_l_max(basis: TruncatedLinkBasis) -> int:
    """Twice the largest irrep magnitude, in the units of :func:`haar_quadrature`."""
    return 2 * basis.cutoff if basis.variant is Group.U1 else basis.cutoff


def transport_degree(basis: TruncatedLinkBasis) -> int:
    """Degree at which controlled transport gates are reproduced exactly."""
    return max(1, (3 * two_l_max(basis) + 1) // 2 + 1)


def default_ci_degree(basis: TruncatedLinkBasis) -> int:
    return 2 * two_l_max(basis) + 1


def _dense_rotations(basis, side, nodes) -> np.ndarray:
    """Full ``(batch, dim, dim)`` rotation matrices for raw group elements."""
    blocks = rotation_batch(basis, side, nodes)
    if basis.variant is Group.U1:
        diag = blocks[0][3]
        out = np.zeros(diag.shape + (basis.dim,), dtype=complex)
        idx = np.arange(basis.dim)
        out[..., idx, idx] = diag
        return out
    batch = np.asarray(nodes).shape[:-1]
    out = np.zeros(batch + (basis.dim, basis.dim), dtype=complex)
    for _, off, d, m in blocks:
        out[..., off:off + d * d, off:off + d * d] = m
    return out


def _inverse_nodes(basis, nodes):
    nodes = np.asarray(nodes, dtype=np.float64)
    return -nodes if basis.variant is Group.U1 else kernels.qconj(nodes)


def controlled_rotation(basis: TruncatedLinkBasis, side, dagger: bool,
                        degree: int | None = None) -> np.ndarray:
    """Two-link gate ``|U>|V> -> |U> (x) Rot_side(U or U^dag)|V>``.

    Returns a ``(dim^2, dim^2)`` matrix with the control as the first factor.
    """
    degree = transport_degree(basis) if degree is None else degree
    rule = haar_quadrature(basis.variant, degree)
    nodes = _inverse_nodes(basis, rule.nodes) if dagger else rule.nodes
    S = position_table(basis, rule.nodes)
    rot = _dense_rotations(basis, Side(side), nodes)
    g = np.einsum("q,qa,qc,qbd->abcd", rule.weights, S.conj(), S, rot, optimize=True)
    return g.reshape(basis.dim ** 2, basis.dim ** 2)


def interpolant_nodes(variant, u, v):
    """``A(U, V) = U sqrt(U^dag V)`` for raw arrays (broadcast)."""
    if variant is Group.U1:
        d = np.mod(np.asarray(v) - np.asarray(u) + np.pi, 2 * np.pi) - np.pi
        return np.asarray(u) + d / 2
    return kernels.slerp_mid(u, v)


def ci_gate(basis: TruncatedLinkBasis, degree: int | None = None, chunk: int = 32) -> np.ndarray:
    """Three-link interpolating gate on ``(U, W, V)``: ``|U>|W>|V> -> |U>|W A(U,V)>|V>``.

    ``R_{A}^dag`` acts on the middle link.  The result is a
    ``(dim^3, dim^3)`` matrix assembled by a product quadrature over both controls.
    """
    degree = default_ci_degree(basis) if degree is None else int(degree)
    rule = haar_quadrature(basis.variant, degree)
    x, w = rule.nodes, rule.weights
    S = position_table(basis, x)
    D = basis.dim
    Q = len(w)
    # second control: w_r conj(S_rc) S_rc'
    Pr = w[:, None, None] * np.einsum("rc,rd->rcd", S.conj(), S)
    out = np.zeros((D, D, D, D, D, D), dtype=complex)
    for start in range(0, Q, chunk):
        sl = slice(start, min(Q, start + chunk))
        xq = x[sl]
        a = interpolant_nodes(basis.variant, xq[:, None, ...], x[None, :, ...])
        W = _dense_rotations(basis, Side.RIGHT, _inverse_nodes(basis, a))   # (q, r, D, D)
        Y = np.einsum("qrbe,rcf->qbecf", W, Pr, optimize=True)
        Pq = w[sl, None, None] * np.einsum("qa,qd->qad", S[sl].conj(), S[sl])
        out += np.einsum("qad,qbecf->abcdef", Pq, Y, optimize=True)
    return out.reshape(D ** 3, D ** 3)


def ci_gate_u1_exact(basis: TruncatedLinkBasis) -> np.ndarray:
    """Closed-form matrix of the U(1) interpolating gate restricted to the cutoff.

    With ``A = theta + delta/2`` and ``delta`` the principal difference of the
    two control angles, the Haar integral factorises into a Kronecker delta on
    total charge and a sinc in the half-integer frequency of ``delta``.
    """
    if basis.variant is not Group.U1:
        raise ValueError("closed form is available for U(1) only")
    ns = np.array(basis.labels)
    D = len(ns)
    out = np.zeros((D,) * 6, dtype=np.float64)
    for ia, p in enumerate(ns):
        for ic, pp in enumerate(ns):
            for ib, m in enumerate(ns):
                for id_, n in enumerate(ns):
                    for if_, nn in enumerate(ns):
                        if n + nn - m != p + pp:
                            continue
                        s = (nn - pp) - m / 2
                        out[ia, ib, ic, id_, ib, if_] = np.sinc(s)
    return out.reshape(D ** 3, D ** 3).astype(complex)


def ci_reference(basis: TruncatedLinkBasis, degree: int) -> np.ndarray:
    """Reference gate used to measure quadrature error at ``degree``."""
    if basis.variant is Group.U1:
        return ci_gate_u1_exact(basis)
    return ci_gate(basis, 2 * degree + 1)


def quadrature_defect(basis: TruncatedLinkBasis, degree: int, gate: np.ndarray | None = None) -> float:
    """Twice the operator-norm distance between the degree-``degree`` gate and the reference.

    Since the reference commutes with global rotations and has norm at most one,
    a state whose symmetry defect is ``eps`` is mapped to one whose defect is at
    most ``eps`` plus this number.
    """
    g = ci_gate(basis, degree) if gate is None else gate
    return float(2 * np.linalg.norm(g - ci_reference(basis, degree), 2))


def isometry_defect(gate: np.ndarray) -> float:
    """``|| G^dag G - 1 ||`` in operator norm."""
    return float(np.linalg.norm(gate.conj().T @ gate - np.eye(gate.shape[1]), 2))
