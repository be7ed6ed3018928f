"""Group arithmetic, irreducible representations and Haar quadrature for U(1) and SU(2).

SU(2) elements are unit quaternions ``(a, b, c, d)`` standing for the matrix
``[[a+ib, c+id], [-c+id, a-ib]]``.  U(1) elements are angles in ``[0, 2pi)``.

Irrep labels are passed around as *twice* the spin, ``two_l``, so that
half-integers stay exact.  Inside an irrep of dimension ``d = two_l + 1`` the
matrix row ``r`` carries the magnetic number ``m = l - r`` (``m`` descending),
which makes ``wigner(1/2, U) == U``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels


class Group(str, Enum):
    U1 = "U1"
    SU2 = "SU2"


class VariantMismatch(ValueError):
    """Raised when U(1) and SU(2) data are mixed."""


def as_group(variant) -> Group:
    return variant if isinstance(variant, Group) else Group(str(variant).upper())


def twice(x) -> int:
    """Convert a (half-)integer given as int, float, Fraction or str to ``2*x``."""
    f = Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(2)
    t = 2 * f
    if t.denominator != 1 or abs(float(t) - 2 * float(x)) > 1e-12:
        raise ValueError(f"{x!r} is not a half-integer")
    return int(t)


@dataclass(frozen=True)
class GroupElement:
    """A point of U(1) or SU(2); the classical value of one link."""

    variant: Group
    data: tuple

    @classmethod
    def u1(cls, theta: float) -> "GroupElement":
        return cls(Group.U1, (float(theta) % (2 * np.pi),))

    @classmethod
    def su2(cls, a, b=0.0, c=0.0, d=0.0) -> "GroupElement":
        q = np.array([a, b, c, d], dtype=np.float64)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise ValueError("SU(2) payload must have unit norm")
        return cls(Group.SU2, tuple(float(x) for x in q / n))

    @classmethod
    def from_array(cls, variant, x) -> "GroupElement":
        variant = as_group(variant)
        if variant is Group.U1:
            return cls.u1(float(np.asarray(x).reshape(-1)[0]))
        return cls.su2(*np.asarray(x, dtype=np.float64).reshape(4))

    @classmethod
    def from_matrix(cls, m) -> "GroupElement":
        m = np.asarray(m, dtype=complex)
        if m.shape == (1, 1):
            return cls.u1(np.angle(m[0, 0]))
        return cls.su2(m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag)

    @classmethod
    def identity(cls, variant) -> "GroupElement":
        if as_group(variant) is Group.U1:
            return cls.u1(0.0)
        return cls.su2(1.0)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.data, dtype=np.float64)

    @property
    def angle(self) -> float:
        if self.variant is not Group.U1:
            raise VariantMismatch("angle is only defined for U(1)")
        return self.data[0]

    def matrix(self) -> np.ndarray:
        if self.variant is Group.U1:
            return np.array([[np.exp(1j * self.data[0])]])
        a, b, c, d = self.data
        return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])

    def dagger(self) -> "GroupElement":
        if self.variant is Group.U1:
            return GroupElement.u1(-self.data[0])
        a, b, c, d = self.data
        return GroupElement(Group.SU2, (a, -b, -c, -d))

    def trace(self) -> complex:
        if self.variant is Group.U1:
            return complex(np.exp(1j * self.data[0]))
        return complex(2 * self.data[0])

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __pow__(self, n: int) -> "GroupElement":
        out = GroupElement.identity(self.variant)
        base = self if n >= 0 else self.dagger()
        for _ in range(abs(int(n))):
            out = multiply(out, base)
        return out

    def distance(self, other: "GroupElement") -> float:
        """Frobenius distance between the defining matrices."""
        return float(np.linalg.norm(self.matrix() - other.matrix()))


def multiply(u: GroupElement, v: GroupElement) -> GroupElement:
    if u.variant is not v.variant:
        raise VariantMismatch(f"cannot multiply {u.variant.value} by {v.variant.value}")
    if u.variant is Group.U1:
        return GroupElement.u1(u.data[0] + v.data[0])
    q = kernels.qmul(u.array, v.array)
    return GroupElement(Group.SU2, tuple(float(x) for x in q))


def principal_angle(theta):
    """Map angles to ``(-pi, pi]``."""
    t = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    t = np.where(t <= -np.pi, np.pi, t)
    return float(t) if np.ndim(t) == 0 else t


def is_root_degenerate(u: GroupElement) -> bool:
    """True on the branch cut of the principal root (eigenphase pi)."""
    if u.variant is Group.U1:
        return abs(abs(principal_angle(u.data[0])) - np.pi) < kernels.DEGENERATE_TOL
    return 2 * u.data[0] <= -2 + kernels.DEGENERATE_TOL


def principal_root(u: GroupElement, n: int) -> GroupElement:
    """The principal ``n``-th root: eigenphases ``phi / n`` with ``phi`` in ``[0, pi]``.

    On the cut (``tr U = -2``) the root is not unique; the eigenphase is taken
    to be ``pi`` about the rotation axis of ``U`` (the ``b`` axis when ``U = -1``).
    """
    if int(n) < 1:
        raise ValueError("root order must be >= 1")
    return power(u, 1.0 / int(n))


def power(u: GroupElement, t: float) -> GroupElement:
    """Principal real power ``u**t``."""
    if u.variant is Group.U1:
        return GroupElement.u1(principal_angle(u.data[0]) * t)
    q = kernels.qpow(u.array, t)
    return GroupElement(Group.SU2, tuple(float(x) for x in q))


@dataclass(frozen=True)
class EigenphaseForm:
    eta: GroupElement
    phi: float


def eigenphase_decompose(u: GroupElement) -> EigenphaseForm:
    """Diagonalise ``u``: ``eta^dag u eta = diag(e^{i phi}, e^{-i phi})``, ``phi`` in [0, pi]."""
    if u.variant is Group.U1:
        return EigenphaseForm(GroupElement.identity(Group.U1), principal_angle(u.data[0]))
    eta, phi = kernels.eigenframe(u.array)
    return EigenphaseForm(GroupElement(Group.SU2, tuple(float(x) for x in eta)), float(phi))


# ---------------------------------------------------------------- representations

@lru_cache(maxsize=None)
def _log_factorials(n: int) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])


def _lf(k: int) -> float:
    return float(_log_factorials(max(64, k + 1))[k])


@lru_cache(maxsize=None)
def _wigner_terms(two_l: int):
    """Monomial expansion of the spin-l matrix elements in the entries of U."""
    terms = []
    for r_out in range(two_l + 1):
        for r_in in range(two_l + 1):
            lpm_out = two_l - r_out          # l + m'
            lmm_out = r_out                  # l - m'
            lpm, lmm = two_l - r_in, r_in    # l + m, l - m
            norm = 0.5 * (_lf(lpm_out) + _lf(lmm_out) - _lf(lpm) - _lf(lmm))
            for p in range(lpm + 1):
                q = lpm_out - p
                if q < 0 or q > lmm:
                    continue
                logc = (_lf(lpm) - _lf(p) - _lf(lpm - p)
                        + _lf(lmm) - _lf(q) - _lf(lmm - q) + norm)
                terms.append((r_out, r_in, math.exp(logc), p, lpm - p, q, lmm - q))
    return terms


def wigner_batch(two_l: int, quats) -> np.ndarray:
    """Spin ``two_l/2`` matrices for a batch of SU(2) quaternions, shape ``(..., d, d)``."""
    q = np.asarray(quats, dtype=np.float64)
    lead = q.shape[:-1]
    d = two_l + 1
    out = np.zeros(lead + (d, d), dtype=complex)
    upp = q[..., 0] + 1j * q[..., 1]
    upm = q[..., 2] + 1j * q[..., 3]
    ump = -q[..., 2] + 1j * q[..., 3]
    umm = q[..., 0] - 1j * q[..., 1]
    powers = {}

    def pw(base, name, k):
        key = (name, k)
        if key not in powers:
            powers[key] = base ** k
        return powers[key]

    for r_out, r_in, coef, e1, e2, e3, e4 in _wigner_terms(two_l):
        out[..., r_out, r_in] += coef * (pw(upp, "pp", e1) * pw(ump, "mp", e2)
                                         * pw(upm, "pm", e3) * pw(umm, "mm", e4))
    return out


def wigner(l, u: GroupElement) -> np.ndarray:
    """Matrix of the irrep ``l`` at ``u``; for U(1) the 1x1 value ``e^{i l theta}``."""
    if u.variant is Group.U1:
        n = int(l)
        if n != l:
            raise ValueError("U(1) irreps are labelled by integers")
        return np.array([[np.exp(1j * n * u.data[0])]])
    two_l = twice(l)
    if two_l < 0:
        raise ValueError("spin must be non-negative")
    return wigner_batch(two_l, u.array)


@lru_cache(maxsize=65536)
def _cg_twice(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    if M != m1 + m2 or J < abs(j1 - j2) or J > j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if (j1 + j2 + J) % 2 or (j1 + m1) % 2 or (j2 + m2) % 2 or (J + M) % 2:
        return 0.0
    h = lambda x: x // 2  # noqa: E731  all arguments below are even
    pref = 0.5 * (math.log(J + 1) + _lf(h(J + j1 - j2)) + _lf(h(J - j1 + j2))
                  + _lf(h(j1 + j2 - J)) - _lf(h(j1 + j2 + J) + 1)
                  + _lf(h(J + M)) + _lf(h(J - M)) + _lf(h(j1 - m1)) + _lf(h(j1 + m1))
                  + _lf(h(j2 - m2)) + _lf(h(j2 + m2)))
    kmin = max(0, h(j2 - J - m1), h(j1 - J + m2))
    kmax = min(h(j1 + j2 - J), h(j1 - m1), h(j2 + m2))
    total = 0.0
    for k in range(kmin, kmax + 1):
        den = (_lf(k) + _lf(h(j1 + j2 - J) - k) + _lf(h(j1 - m1) - k) + _lf(h(j2 + m2) - k)
               + _lf(h(J - j2 + m1) + k) + _lf(h(J - j1 - m2) + k))
        total += (-1) ** k * math.exp(pref - den)
    return total


def clebsch_gordan(l1, m1, l2, m2, L, M) -> float:
    """Condon-Shortley coefficient ``<l1 m1; l2 m2 | L M>``."""
    j1, mm1, j2, mm2, J, MM = (twice(x) for x in (l1, m1, l2, m2, L, M))
    for j, m in ((j1, mm1), (j2, mm2), (J, MM)):
        if j < 0 or (j + m) % 2:
            raise ValueError("inconsistent angular momentum labels")
        if abs(m) > j:
            raise ValueError("|m| exceeds l")
    return _cg_twice(j1, mm1, j2, mm2, J, MM)


# --------------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights approximating the Haar integral.

    ``nodes`` is an ``(n,)`` array of angles (U(1)) or ``(n, 4)`` quaternions.
    """

    variant: Group
    degree: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    def elements(self) -> list[GroupElement]:
        return [GroupElement.from_array(self.variant, x) for x in self.nodes]

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def euler_to_quat(alpha, beta, gamma) -> np.ndarray:
    """``exp(-i alpha s_z/2) exp(-i beta s_y/2) exp(-i gamma s_z/2)`` as quaternions."""
    alpha, beta, gamma = np.broadcast_arrays(alpha, beta, gamma)
    z = np.zeros_like(alpha, dtype=np.float64)
    ra = np.stack([np.cos(alpha / 2), -np.sin(alpha / 2), z, z], axis=-1)
    rb = np.stack([np.cos(beta / 2), z, -np.sin(beta / 2), z], axis=-1)
    rg = np.stack([np.cos(gamma / 2), -np.sin(gamma / 2), z, z], axis=-1)
    return kernels.qmul(kernels.qmul(ra, rb), rg)


@lru_cache(maxsize=32)
def haar_quadrature(variant, degree: int) -> QuadratureRule:
    """Product rule integrating every matrix element with ``2l <= degree`` (``|n| <= degree``) exactly.

    U(1) uses ``2*degree+1`` equispaced angles.  SU(2) uses an Euler-angle grid
    of ``(2d+1) x (d+1) x (2d+1)`` points: uniform in both azimuths over
    ``[0, 4pi)`` and Gauss-Legendre in ``cos(beta)``.
    """
    variant = as_group(variant)
    degree = int(degree)
    if degree < 1:
        raise ValueError("exactness degree must be >= 1")
    m = 2 * degree + 1
    if variant is Group.U1:
        nodes = 2 * np.pi * np.arange(m) / m
        return QuadratureRule(variant, degree, nodes, np.full(m, 1.0 / m))
    az = 4 * np.pi * np.arange(m) / m
    x, wx = np.polynomial.legendre.leggauss(degree + 1)
    beta = np.arccos(x)
    A, B, C = np.meshgrid(az, beta, az, indexing="ij")
    W = np.broadcast_to((wx / 2)[None, :, None], A.shape) / m**2
    nodes = euler_to_quat(A.ravel(), B.ravel(), C.ravel())
    return QuadratureRule(variant, degree, nodes, np.ascontiguousarray(W.ravel()))


@lru_cache(maxsize=32)
def class_quadrature(variant, n_points: int = 64) -> QuadratureRule:
    """Rule for class functions (functions of the eigenphase only).

    SU(2): Gauss-Legendre in the eigenphase with the Weyl density
    ``(2/pi) sin^2 phi``.  U(1): Gauss-Legendre on ``[0, pi]`` mirrored to
    ``-phi``, which resolves the kink of ``|theta|`` at the identity.
    """
    variant = as_group(variant)
    x, wx = np.polynomial.legendre.leggauss(int(n_points))
    phi = np.pi * (x + 1) / 2
    if variant is Group.U1:
        nodes = np.concatenate([phi, -phi]) % (2 * np.pi)
        return QuadratureRule(variant, n_points, nodes, np.concatenate([wx, wx]) / 4)
    w = wx * np.sin(phi) ** 2
    z = np.zeros_like(phi)
    nodes = np.stack([np.cos(phi), np.sin(phi), z, z], axis=-1)
    return QuadratureRule(variant, n_points, nodes, w)


def haar_random(variant, rng: np.random.Generator, size=()) -> np.ndarray:
    """Haar-distributed samples as raw arrays (angles or quaternions)."""
    variant = as_group(variant)
    if variant is Group.U1:
        return rng.uniform(0.0, 2 * np.pi, size=size)
    size = (size,) if isinstance(size, int) else tuple(size)
    q = rng.standard_normal(size + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def random_element(variant, rng: np.random.Generator) -> GroupElement:
    return GroupElement.from_array(variant, haar_random(variant, rng))


def irrep_dim(variant, label: int) -> int:
    """Dimension of the irrep with label ``n`` (U(1)) or ``two_l`` (SU(2))."""
    return 1 if as_group(variant) is Group.U1 else int(label) + 1
