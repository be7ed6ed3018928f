"""Truncated single-link Hilbert space L^2(G) in the Fourier (irrep) basis.

A basis vector ``|l; j k>`` is the normalised wavefunction
``chi_{ljk}(U) = sqrt(d_l) t^l_{jk}(U)``.  Basis indices run over irreps in
ascending order and, inside each irrep, over the row ``j`` and column ``k`` of
the representation matrix in row-major order.  Rows follow the ordering used in
:mod:`gaugeinterp.group`, so row 0 carries ``m = +l``.

For U(1) the irreps are ``n = -n_max .. n_max`` and each block is 1x1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .group import Group, GroupElement, as_group, clebsch_gordan, twice, wigner_batch


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class TruncatedLinkBasis:
    """Irreps up to a cutoff.

    Parameters
    ----------
    variant : Group
    cutoff : int
        ``n_max`` for U(1); ``two_l_max`` (twice the spin cutoff) for SU(2).
    """

    variant: Group
    cutoff: int

    def __post_init__(self):
        object.__setattr__(self, "variant", as_group(self.variant))
        if int(self.cutoff) < 0:
            raise ValueError("cutoff must be non-negative")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @classmethod
    def u1(cls, n_max: int) -> "TruncatedLinkBasis":
        return cls(Group.U1, int(n_max))

    @classmethod
    def su2(cls, l_max) -> "TruncatedLinkBasis":
        return cls(Group.SU2, twice(l_max))

    @classmethod
    def from_cutoff(cls, variant, l_max) -> "TruncatedLinkBasis":
        """Build from a user-facing cutoff (``n_max`` or the spin ``l_max``)."""
        variant = as_group(variant)
        return cls.u1(int(l_max)) if variant is Group.U1 else cls.su2(l_max)

    @property
    def l_max(self) -> float:
        return float(self.cutoff) if self.variant is Group.U1 else self.cutoff / 2

    @cached_property
    def labels(self) -> tuple[int, ...]:
        """Irrep labels in basis order: ``n`` for U(1), ``two_l`` for SU(2)."""
        if self.variant is Group.U1:
            return tuple(range(-self.cutoff, self.cutoff + 1))
        return tuple(range(self.cutoff + 1))

    def block_dim(self, label: int) -> int:
        return 1 if self.variant is Group.U1 else label + 1

    @cached_property
    def blocks(self) -> tuple[tuple[int, int, int], ...]:
        """``(label, offset, d)`` for every irrep block."""
        out, off = [], 0
        for lab in self.labels:
            d = self.block_dim(lab)
            out.append((lab, off, d))
            off += d * d
        return tuple(out)

    @property
    def dim(self) -> int:
        lab, off, d = self.blocks[-1]
        return off + d * d

    @cached_property
    def index_table(self) -> np.ndarray:
        """Rows ``(label, j, k)`` for every basis index."""
        rows = [(lab, j, k) for lab, _, d in self.blocks for j in range(d) for k in range(d)]
        return np.array(rows, dtype=np.int64)

    def index(self, label: int, j: int = 0, k: int = 0) -> int:
        for lab, off, d in self.blocks:
            if lab == label:
                if not (0 <= j < d and 0 <= k < d):
                    raise IndexError("row/column outside the irrep")
                return off + j * d + k
        raise IndexError(f"irrep {label} outside the cutoff")

    def magnitude(self, label: int) -> float:
        """``|l|``: the spin for SU(2), ``|n|`` for U(1)."""
        return abs(label) if self.variant is Group.U1 else label / 2

    def casimir(self) -> np.ndarray:
        """Laplacian eigenvalue for every basis index."""
        lab = self.index_table[:, 0]
        if self.variant is Group.U1:
            return lab.astype(np.float64) ** 2
        return (lab + 1.0) ** 2 - 1.0

    def is_compatible(self, other: "TruncatedLinkBasis") -> bool:
        return self.variant is other.variant and self.cutoff == other.cutoff


@dataclass(frozen=True)
class LinkVector:
    basis: TruncatedLinkBasis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.dim,):
            raise ValueError(f"expected {self.basis.dim} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def vdot(self, other: "LinkVector") -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))

    def to_json(self) -> dict:
        return _entries_json(self.basis, [
            (*_doubled(self.basis, i), c) for i, c in enumerate(self.coeffs) if c != 0])

    @classmethod
    def from_json(cls, obj: dict) -> "LinkVector":
        basis = _basis_from_json(obj)
        c = np.zeros(basis.dim, dtype=complex)
        for l2, j2, k2, re, im in obj["entries"]:
            c[_undoubled(basis, l2, j2, k2)] = re + 1j * im
        return cls(basis, c)


@dataclass(frozen=True)
class LinkOperator:
    """A matrix acting on ``sites`` tensor copies of one truncated link space."""

    basis: TruncatedLinkBasis
    matrix: np.ndarray = field(repr=False)
    sites: int = 1

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.basis.dim ** self.sites
        if m.shape != (n, n):
            raise ValueError(f"operator must be {n}x{n}, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, LinkOperator):
            return LinkOperator(self.basis, self.matrix @ other.matrix, self.sites)
        if isinstance(other, LinkVector):
            return LinkVector(self.basis, self.matrix @ other.coeffs)
        return self.matrix @ other

    def dagger(self) -> "LinkOperator":
        return LinkOperator(self.basis, self.matrix.conj().T, self.sites)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0) <= tol)

    def to_json(self) -> dict:
        if self.sites != 1:
            raise ValueError("JSON export is defined for single-link operators")
        rows, cols = np.nonzero(self.matrix)
        ents = [(*_doubled(self.basis, r), *_doubled(self.basis, c), self.matrix[r, c])
                for r, c in zip(rows, cols)]
        return _entries_json(self.basis, ents)

    @classmethod
    def from_json(cls, obj: dict) -> "LinkOperator":
        basis = _basis_from_json(obj)
        m = np.zeros((basis.dim, basis.dim), dtype=complex)
        for e in obj["entries"]:
            m[_undoubled(basis, *e[0:3]), _undoubled(basis, *e[3:6])] = e[6] + 1j * e[7]
        return cls(basis, m)


# --- JSON helpers: labels and magnetic numbers are stored doubled ---------------

def _doubled(basis: TruncatedLinkBasis, i: int) -> tuple[int, int, int]:
    lab, j, k = (int(x) for x in basis.index_table[i])
    if basis.variant is Group.U1:
        return 2 * lab, 0, 0
    return lab, lab - 2 * j, lab - 2 * k


def _undoubled(basis: TruncatedLinkBasis, l2: int, j2: int, k2: int) -> int:
    if basis.variant is Group.U1:
        return basis.index(l2 // 2)
    return basis.index(l2, (l2 - j2) // 2, (l2 - k2) // 2)


def _entries_json(basis, entries) -> dict:
    two = 2 * basis.cutoff if basis.variant is Group.U1 else basis.cutoff
    out = []
    for e in entries:
        *ints, c = e
        out.append([int(x) for x in ints] + [float(np.real(c)), float(np.imag(c))])
    return {"variant": basis.variant.value, "two_l_max": two, "entries": out}


def _basis_from_json(obj: dict) -> TruncatedLinkBasis:
    variant = as_group(obj["variant"])
    two = int(obj["two_l_max"])
    return TruncatedLinkBasis(variant, two // 2 if variant is Group.U1 else two)


# --- operators -----------------------------------------------------------------

def laplacian(basis: TruncatedLinkBasis) -> LinkOperator:
    """Non-negative Laplacian: ``d_l^2 - 1`` on irrep ``l`` (SU(2)), ``n^2`` (U(1))."""
    return LinkOperator(basis, np.diag(basis.casimir()).astype(complex))


def _block_diag(basis: TruncatedLinkBasis, block_of) -> np.ndarray:
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for lab, off, d in basis.blocks:
        out[off:off + d * d, off:off + d * d] = block_of(lab, d)
    return out


def rotation_matrix(basis: TruncatedLinkBasis, side, u: GroupElement) -> np.ndarray:
    """Matrix of ``L_u`` (``|V> -> |uV>``) or ``R_u`` (``|V> -> |V u^dag>``)."""
    side = Side(side)
    if u.variant is not basis.variant:
        raise ValueError("group element and basis use different groups")
    if basis.variant is Group.U1:
        n = np.array(basis.labels, dtype=np.float64)
        sign = -1.0 if side is Side.LEFT else 1.0
        return np.diag(np.exp(sign * 1j * n * u.data[0]))
    if side is Side.LEFT:
        return _block_diag(basis, lambda lab, d: np.kron(wigner_batch(lab, u.array).conj(), np.eye(d)))
    return _block_diag(basis, lambda lab, d: np.kron(np.eye(d), wigner_batch(lab, u.array)))


def rotation_op(basis: TruncatedLinkBasis, side, u: GroupElement) -> LinkOperator:
    return LinkOperator(basis, rotation_matrix(basis, side, u))


def rotation_batch(basis: TruncatedLinkBasis, side, nodes: np.ndarray) -> np.ndarray:
    """Diagonal blocks of rotations for a batch of raw group elements.

    Returns a list-like of ``(label, offset, d, mats)`` where ``mats`` has shape
    ``(batch, d*d, d*d)``; for U(1) a single entry ``(None, 0, dim, diag)`` with
    ``diag`` of shape ``(batch, dim)`` holding the diagonal phases.
    """
    side = Side(side)
    nodes = np.asarray(nodes, dtype=np.float64)
    if basis.variant is Group.U1:
        n = np.array(basis.labels, dtype=np.float64)
        sign = -1.0 if side is Side.LEFT else 1.0
        return [(None, 0, basis.dim, np.exp(sign * 1j * nodes[..., None] * n))]
    out = []
    for lab, off, d in basis.blocks:
        D = wigner_batch(lab, nodes)
        eye = np.eye(d)
        if side is Side.LEFT:
            m = np.einsum("...ij,ab->...iajb", D.conj(), eye)
        else:
            m = np.einsum("ab,...ij->...aibj", eye, D)
        out.append((lab, off, d, m.reshape(D.shape[:-2] + (d * d, d * d))))
    return out


def position_matrix(basis: TruncatedLinkBasis, a=None, b=None) -> np.ndarray:
    """Multiplication by ``t^{1/2}_{ab}(U)`` in the Fourier basis (``e^{i theta}`` for U(1)).

    ``a`` and ``b`` are the magnetic numbers ``+-1/2``.  Couplings leaving the
    cutoff are dropped, so the truncated operator is not unitary on the top irrep.
    """
    if basis.variant is Group.U1:
        return np.diag(np.ones(basis.dim - 1, dtype=complex), -1)
    if a is None or b is None:
        raise ValueError("SU(2) position operators need indices a, b in {-1/2, +1/2}")
    a2, b2 = twice(a), twice(b)
    if a2 not in (-1, 1) or b2 not in (-1, 1):
        raise IndexError("position indices must be +-1/2")
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for lab, off, d in basis.blocks:
        for j in range(d):
            mj = lab - 2 * j
            for k in range(d):
                mk = lab - 2 * k
                col = off + j * d + k
                for L in (lab - 1, lab + 1):
                    if L < 0 or L > basis.cutoff:
                        continue
                    Mj, Mk = a2 + mj, b2 + mk
                    if abs(Mj) > L or abs(Mk) > L:
                        continue
                    c1 = clebsch_gordan(0.5, a2 / 2, lab / 2, mj / 2, L / 2, Mj / 2)
                    c2 = clebsch_gordan(0.5, b2 / 2, lab / 2, mk / 2, L / 2, Mk / 2)
                    if c1 == 0.0 or c2 == 0.0:
                        continue
                    row = basis.index(L, (L - Mj) // 2, (L - Mk) // 2)
                    out[row, col] += np.sqrt((lab + 1) / (L + 1)) * c1 * c2
    return out


def position_op(basis: TruncatedLinkBasis, a=None, b=None) -> LinkOperator:
    return LinkOperator(basis, position_matrix(basis, a, b))


def position_ops(basis: TruncatedLinkBasis) -> dict:
    """All components of the position operator keyed by row/column index ``(r, c)``.

    ``r = 0`` is ``m = +1/2``.  For U(1) the single key ``(0, 0)`` is used.
    """
    if basis.variant is Group.U1:
        return {(0, 0): position_matrix(basis)}
    half = (0.5, -0.5)
    return {(r, c): position_matrix(basis, half[r], half[c]) for r in range(2) for c in range(2)}


def truncation_defect(basis: TruncatedLinkBasis) -> float:
    """``max_{bc} || sum_a u_ab^dag u_ac - delta_bc ||``: unitarity lost at the cutoff."""
    ops = position_ops(basis)
    n = 1 if basis.variant is Group.U1 else 2
    eye = np.eye(basis.dim)
    worst = 0.0
    for b in range(n):
        for c in range(n):
            s = sum(ops[(a, b)].conj().T @ ops[(a, c)] for a in range(n))
            worst = max(worst, np.linalg.norm(s - (eye if b == c else 0), 2))
    return float(worst)


# --- distinguished states -----------------------------------------------------

def state_omega0(basis: TruncatedLinkBasis) -> LinkVector:
    """The Haar-uniform wavefunction: all weight on the trivial irrep."""
    c = np.zeros(basis.dim, dtype=complex)
    c[basis.index(0)] = 1.0
    return LinkVector(basis, c)


def identity_vector(basis: TruncatedLinkBasis, label: int) -> np.ndarray:
    """``(1/sqrt d) sum_j |j j>`` on one irrep block (the normalised character)."""
    c = np.zeros(basis.dim, dtype=complex)
    _, off, d = next(b for b in basis.blocks if b[0] == label)
    c[off + np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return c


def state_psi_lambda(basis: TruncatedLinkBasis, lam: float) -> LinkVector:
    """Conjugation-invariant loop state weighted by ``exp(-lam |l|)``.

    The top irrep (both ``|n| = n_max`` for U(1)) is left empty, so a loop
    sitting next to a position operator never leaves the cutoff.  ``lam = inf``
    gives the Haar state.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if np.isinf(lam):
        return state_omega0(basis)
    c = np.zeros(basis.dim, dtype=complex)
    top = basis.magnitude(basis.labels[-1])
    for lab in basis.labels:
        mag = basis.magnitude(lab)
        if mag >= top and mag > 0:
            continue
        c += np.exp(-lam * mag) * identity_vector(basis, lab)
    n = np.linalg.norm(c)
    return LinkVector(basis, c / n)


def position_table(basis: TruncatedLinkBasis, nodes) -> np.ndarray:
    """Wavefunction values ``S[q, i] = chi_i(U_q)`` of every basis vector at every node."""
    nodes = np.asarray(nodes, dtype=np.float64)
    if basis.variant is Group.U1:
        n = np.array(basis.labels, dtype=np.float64)
        return np.exp(1j * np.multiply.outer(nodes, n))
    parts = [np.sqrt(lab + 1) * wigner_batch(lab, nodes).reshape(nodes.shape[:-1] + (d * d,))
             for lab, _, d in basis.blocks]
    return np.concatenate(parts, axis=-1)


def sample_position_projector(basis: TruncatedLinkBasis, u: GroupElement) -> LinkVector:
    """The (unnormalised) position eigenvector ``|U>``; ``<U|psi>`` evaluates ``psi(U)``."""
    if u.variant is not basis.variant:
        raise ValueError("group element and basis use different groups")
    raw = u.data[0] if u.variant is Group.U1 else u.array
    return LinkVector(basis, position_table(basis, raw).conj())


def wavefunction(vec: LinkVector, u: GroupElement) -> complex:
    return sample_position_projector(vec.basis, u).vdot(vec)


def single_link_json(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True)
