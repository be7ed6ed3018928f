"""Finite matrix-product states and operators, with a two-site DMRG solver.

Tensor conventions: an MPS site tensor has indices ``(left, physical, right)``;
an MPO site tensor has ``(left, right, out, in)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as sla


class NonConvergence(RuntimeError):
    """Raised when an iterative solver misses its tolerance; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ------------------------------------------------------------------------ MPO

def mpo_from_terms(n_sites: int, d: int, terms) -> list[np.ndarray]:
    """Exact MPO for a sum of products of single-site operators.

    Parameters
    ----------
    terms : iterable of ``(coef, {site: op})``
        Each product may touch any set of sites; a term spanning sites ``i..j``
        occupies one channel on every bond in between.
    """
    eye = np.eye(d, dtype=complex)
    singles = [np.zeros((d, d), dtype=complex) for _ in range(n_sites)]
    spans = []
    for coef, ops in terms:
        sites = sorted(ops)
        if not sites:
            raise ValueError("empty term")
        if len(sites) == 1:
            singles[sites[0]] += coef * np.asarray(ops[sites[0]], dtype=complex)
        else:
            spans.append((coef, sites, ops))
    # channel bookkeeping: 0 = before, 1 = done, 2.. = open spans on that bond
    bond_channels = [[] for _ in range(n_sites + 1)]
    for t, (_, sites, _) in enumerate(spans):
        for b in range(sites[0] + 1, sites[-1] + 1):
            bond_channels[b].append(t)
    dims = [2 + len(ch) for ch in bond_channels]
    dims[0] = dims[-1] = 1
    out = []
    for i in range(n_sites):
        dl, dr = dims[i], dims[i + 1]
        W = np.zeros((dl, dr, d, d), dtype=complex)
        start = 0                    # row of the "before" channel
        done_l = 0 if i == 0 else 1  # row of the "done" channel on the left
        before_r = 0
        done_r = 0 if i == n_sites - 1 else 1
        if i > 0:
            W[done_l, done_r] += eye
        if i < n_sites - 1:
            W[start, before_r] += eye
        W[start, done_r] += singles[i]
        lch = {t: 2 + k for k, t in enumerate(bond_channels[i])}
        rch = {t: 2 + k for k, t in enumerate(bond_channels[i + 1])}
        for t, (coef, sites, ops) in enumerate(spans):
            first, last = sites[0], sites[-1]
            if i < first or i > last:
                continue
            op = np.asarray(ops[i], dtype=complex) if i in ops else eye
            src = start if i == first else lch[t]
            if i == last:
                W[src, done_r] += coef * op
            else:
                W[src, rch[t]] += op
        out.append(W)
    return out


def mpo_to_dense(mpo) -> np.ndarray:
    t = mpo[0]
    for W in mpo[1:]:
        t = np.einsum("abij,bckl->acikjl", t, W)
        a, c = t.shape[0], t.shape[1]
        n = t.shape[2] * t.shape[3]
        t = t.reshape(a, c, n, n)
    return t[0, 0]


# ------------------------------------------------------------------------ MPS

@dataclass
class MPS:
    tensors: list

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors])

    @classmethod
    def product(cls, vectors) -> "MPS":
        return cls([np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors])

    @classmethod
    def random(cls, n_sites: int, d: int, bond: int, rng) -> "MPS":
        ts, dl = [], 1
        for i in range(n_sites):
            dr = 1 if i == n_sites - 1 else min(bond, d ** (i + 1), d ** (n_sites - i - 1))
            ts.append(rng.standard_normal((dl, d, dr)) + 1j * rng.standard_normal((dl, d, dr)))
            dl = dr
        out = cls(ts)
        out.right_canonicalize()
        return out

    @classmethod
    def from_dense(cls, vec: np.ndarray, n_sites: int, d: int, max_bond: int | None = None) -> "MPS":
        ts, rest, dl = [], np.asarray(vec, dtype=complex).reshape(1, -1), 1
        for _ in range(n_sites - 1):
            rest = rest.reshape(dl * d, -1)
            u, s, vh = np.linalg.svd(rest, full_matrices=False)
            keep = int(np.sum(s > 1e-14 * max(s[0], 1e-300))) or 1
            if max_bond:
                keep = min(keep, max_bond)
            ts.append(u[:, :keep].reshape(dl, d, keep))
            rest = s[:keep, None] * vh[:keep]
            dl = keep
        ts.append(rest.reshape(dl, d, 1))
        return cls(ts)

    def to_dense(self) -> np.ndarray:
        t = self.tensors[0]
        for a in self.tensors[1:]:
            t = np.tensordot(t, a, axes=([-1], [0]))
        return t.reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    def right_canonicalize(self) -> float:
        """Bring every site but the first into right-canonical form; returns the norm."""
        for i in range(self.n_sites - 1, 0, -1):
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            self.tensors[i] = q.T.reshape(-1, d, dr)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=([2], [0]))
        nrm = np.linalg.norm(self.tensors[0])
        self.tensors[0] = self.tensors[0] / nrm
        return float(nrm)

    def compress(self, max_bond: int, cutoff: float = 1e-14) -> tuple[float, float]:
        """Left-orthogonalise, then truncate right to left.

        Returns the norm before compression and the discarded weight.
        """
        for i in range(self.n_sites - 1):
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            self.tensors[i] = q.reshape(dl, d, -1)
            self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=([1], [0]))
        nrm = float(np.linalg.norm(self.tensors[-1]))
        self.tensors[-1] = self.tensors[-1] / nrm
        discarded = 0.0
        for i in range(self.n_sites - 1, 0, -1):
            a = self.tensors[i]
            dl, d, dr = a.shape
            u, s, vh = np.linalg.svd(a.reshape(dl, d * dr), full_matrices=False)
            keep = max(1, min(max_bond, int(np.sum(s > cutoff * s[0]))))
            discarded += float(np.sum(s[keep:] ** 2))
            self.tensors[i] = vh[:keep].reshape(keep, d, dr)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], u[:, :keep] * s[:keep], axes=([2], [0]))
        self.tensors[0] = self.tensors[0] / np.linalg.norm(self.tensors[0])
        return nrm, discarded


def overlap(a: MPS, b: MPS) -> complex:
    """``<a|b>``."""
    if a.n_sites != b.n_sites:
        raise ValueError("MPS lengths differ")
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.tensors, b.tensors):
        env = np.einsum("ab,asc,bsd->cd", env, x.conj(), y, optimize=True)
    return complex(env[0, 0])


def expectation(mps: MPS, mpo) -> complex:
    env = np.ones((1, 1, 1), dtype=complex)
    for A, W in zip(mps.tensors, mpo):
        env = np.einsum("xay,xsz,abst,ytw->zbw", env, A.conj(), W, A, optimize=True)
    return complex(env[0, 0, 0])


def apply_mpo(mps: MPS, mpo) -> MPS:
    """Exact MPO-MPS product (bond dimensions multiply)."""
    out = []
    for A, W in zip(mps.tensors, mpo):
        t = np.einsum("abst,xty->axsby", W, A)
        a, x, s, b, y = t.shape
        out.append(t.reshape(a * x, s, b * y))
    return MPS(out)


def local_gate_mpo(gate: np.ndarray, sites, n_sites: int, d: int) -> list[np.ndarray]:
    """MPO of a gate acting on ``sites`` (any order, any spacing) of an ``n_sites`` chain.

    The gate's tensor factors follow the order of ``sites``; they are sorted
    and split by successive SVDs, with identities bridging the gaps.
    """
    sites = list(sites)
    k = len(sites)
    order = np.argsort(sites)
    g = gate.reshape([d] * (2 * k))
    perm = list(order) + [k + o for o in order]
    g = g.transpose(perm)
    ss = sorted(sites)
    # interleave (out_i, in_i) per site and split
    g = g.transpose([x for i in range(k) for x in (i, k + i)])
    factors, rest, dl = [], g.reshape(1, -1), 1
    for _ in range(k - 1):
        rest = rest.reshape(dl * d * d, -1)
        u, s, vh = np.linalg.svd(rest, full_matrices=False)
        keep = max(1, int(np.sum(s > 1e-13 * s[0])))
        factors.append(u[:, :keep].reshape(dl, d, d, keep).transpose(0, 3, 1, 2))
        rest = s[:keep, None] * vh[:keep]
        dl = keep
    factors.append(rest.reshape(dl, d, d, 1).transpose(0, 3, 1, 2))
    eye = np.eye(d, dtype=complex)
    mpo, f, bond = [], 0, 1
    for i in range(n_sites):
        if f < k and i == ss[f]:
            mpo.append(factors[f])
            bond = factors[f].shape[1]
            f += 1
        elif 0 < f < k:
            mpo.append(np.einsum("ab,st->abst", np.eye(bond), eye))
        else:
            mpo.append(eye.reshape(1, 1, d, d))
    return mpo


# ----------------------------------------------------------------------- DMRG

@dataclass
class DMRGResult:
    mps: MPS
    energy: float
    sweeps: int
    energy_change: float
    variance: float
    history: list


def _left_env(L, A, W):
    return np.einsum("xay,xsz,abst,ytw->zbw", L, A.conj(), W, A, optimize=True)


def _right_env(R, B, W):
    return np.einsum("zbw,xsz,abst,ytw->xay", R, B.conj(), W, B, optimize=True)


def _lowest(matvec, x0, n, tol=1e-12):
    if n <= 256:
        H = np.column_stack([matvec(e) for e in np.eye(n, dtype=complex)])
        H = 0.5 * (H + H.conj().T)
        w, v = np.linalg.eigh(H)
        return float(w[0]), v[:, 0]
    op = sla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    w, v = sla.eigsh(op, k=1, which="SA", v0=x0, tol=tol, maxiter=20 * n)
    return float(w[0]), v[:, 0]


def dmrg(mpo, d: int, max_bond: int, seed: int = 0, max_sweeps: int = 40,
         tol: float = 1e-9, init: MPS | None = None) -> DMRGResult:
    """Two-site DMRG for the lowest eigenstate of an MPO.

    A sweep is one left-to-right plus one right-to-left pass; iteration stops
    when the energy changes by at most ``tol`` between sweeps.
    """
    n = len(mpo)
    if n < 2:
        raise ValueError("DMRG needs at least two sites")
    rng = np.random.default_rng(seed)
    psi = init.copy() if init is not None else MPS.random(n, d, min(max_bond, 8), rng)
    psi.right_canonicalize()
    Ls = [None] * (n + 1)
    Rs = [None] * (n + 1)
    Ls[0] = np.ones((1, 1, 1), dtype=complex)
    Rs[n] = np.ones((1, 1, 1), dtype=complex)
    for i in range(n - 1, 0, -1):
        Rs[i] = _right_env(Rs[i + 1], psi.tensors[i], mpo[i])

    def solve(i):
        L, R, W1, W2 = Ls[i], Rs[i + 2], mpo[i], mpo[i + 1]
        theta = np.tensordot(psi.tensors[i], psi.tensors[i + 1], axes=([2], [0]))
        shape = theta.shape

        def mv(x):
            t = x.reshape(shape)
            t = np.einsum("xay,ystz->xastz", L, t, optimize=True)
            t = np.einsum("xastz,abus->xbutz", t, W1, optimize=True)
            t = np.einsum("xbutz,bcvt->xucvz", t, W2, optimize=True)
            t = np.einsum("xucvz,wcz->xuvw", t, R, optimize=True)
            return t.reshape(-1)

        e, v = _lowest(mv, theta.reshape(-1), theta.size)
        return e, v.reshape(shape)

    def split(theta, direction):
        dl, d1, d2, dr = theta.shape
        u, s, vh = np.linalg.svd(theta.reshape(dl * d1, d2 * dr), full_matrices=False)
        keep = max(1, min(max_bond, int(np.sum(s > 1e-13 * s[0]))))
        s = s[:keep] / np.linalg.norm(s[:keep])
        if direction == "right":
            return u[:, :keep].reshape(dl, d1, keep), (s[:, None] * vh[:keep]).reshape(keep, d2, dr)
        return (u[:, :keep] * s).reshape(dl, d1, keep), vh[:keep].reshape(keep, d2, dr)

    history = []
    energy = np.inf
    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        for i in range(n - 1):
            e, theta = solve(i)
            psi.tensors[i], psi.tensors[i + 1] = split(theta, "right")
            Ls[i + 1] = _left_env(Ls[i], psi.tensors[i], mpo[i])
        for i in range(n - 2, -1, -1):
            e, theta = solve(i)
            psi.tensors[i], psi.tensors[i + 1] = split(theta, "left")
            Rs[i + 1] = _right_env(Rs[i + 2], psi.tensors[i + 1], mpo[i + 1])
        change = abs(energy - e)
        energy = e
        history.append(e)
        if change <= tol:
            break
    else:
        raise NonConvergence(
            f"DMRG did not converge in {max_sweeps} sweeps",
            {"energy": energy, "energy_change": change, "history": history, "max_bond": max_bond})
    h2 = _h2(psi, mpo)
    return DMRGResult(psi, float(energy), sweep, float(change), float(max(h2 - energy ** 2, 0.0)), history)


def _h2(psi: MPS, mpo) -> float:
    env = np.ones((1, 1, 1, 1), dtype=complex)
    for A, W in zip(psi.tensors, mpo):
        env = np.einsum("xaby,xsz,acsu,bdut,ytw->zcdw", env, A.conj(), W, W, A, optimize=True)
    return float(env[0, 0, 0, 0].real)
