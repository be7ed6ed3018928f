"""Curvature interpolation of classical gauge fields.

Conventions
-----------
A link variable ``U_e`` is the transporter ``T(e_- <- e_+)`` from the target
of the edge back to its source.  A path that steps along an edge picks up
``U_e^dag``, a step against it picks up ``U_e``.  Transporters along a path are
multiplied right to left.

On a 2D lattice, ``links[x, y, 0]`` is the horizontal edge ``(x, y) -> (x+1, y)``
and ``links[x, y, 1]`` the vertical edge ``(x, y) -> (x, y+1)``.  The holonomy
of plaquette ``(x, y)`` is ``B R T^dag L^dag`` (bottom, right, top, left edges),
the transport once around the square clockwise from its lower-left corner.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .group import Group, GroupElement, as_group, eigenphase_decompose, power, principal_angle


# ------------------------------------------------------------- batched group ops

class _U1Ops:
    payload = ()

    @staticmethod
    def mul(a, b):
        return np.mod(a + b, 2 * np.pi)

    @staticmethod
    def dag(a):
        return np.mod(-a, 2 * np.pi)

    @staticmethod
    def pow(a, t):
        return np.mod(principal_angle(a) * t, 2 * np.pi)

    @staticmethod
    def eig(a):
        return np.zeros_like(a), principal_angle(a)

    @staticmethod
    def phase(angle):
        return np.mod(angle, 2 * np.pi)

    @staticmethod
    def identity(shape):
        return np.zeros(shape)

    @staticmethod
    def flux(a):
        return np.abs(principal_angle(a))


class _SU2Ops:
    payload = (4,)

    mul = staticmethod(kernels.qmul)
    dag = staticmethod(kernels.qconj)
    pow = staticmethod(kernels.qpow)
    eig = staticmethod(kernels.eigenframe)
    flux = staticmethod(kernels.qflux)

    @staticmethod
    def phase(angle):
        angle = np.asarray(angle, dtype=np.float64)
        z = np.zeros_like(angle)
        return np.stack([np.cos(angle), np.sin(angle), z, z], axis=-1)

    @staticmethod
    def identity(shape):
        out = np.zeros(tuple(shape) + (4,))
        out[..., 0] = 1.0
        return out


def ops_for(variant):
    return _U1Ops if as_group(variant) is Group.U1 else _SU2Ops


def _to_raw(u: GroupElement):
    return u.data[0] if u.variant is Group.U1 else u.array


def _from_raw(variant, x) -> GroupElement:
    return GroupElement.from_array(variant, x)


# --------------------------------------------------------------------- SLERP

def slerp_chain(u_start: GroupElement, u_end: GroupElement, n: int) -> list[GroupElement]:
    """Interior points ``U_s (U_s^dag U_e)^{j/n}``, ``j = 1..n-1``, of the geodesic."""
    if u_start.variant is not u_end.variant:
        raise ValueError("endpoints belong to different groups")
    if n < 2:
        raise ValueError("n must be at least 2")
    step = u_start.dagger() * u_end
    return [u_start * power(step, j / n) for j in range(1, n)]


def chain_energy(points: list[GroupElement]) -> float:
    """``sum_j ||U_j - U_{j+1}||_F^2`` along a sequence of group elements."""
    return float(sum(np.linalg.norm(a.matrix() - b.matrix()) ** 2
                     for a, b in zip(points[:-1], points[1:])))


# ------------------------------------------------------------ plaquette interp

def branch_energies(phi, n: int) -> np.ndarray:
    """``4n - 4n cos((phi - 2 pi k)/n)`` for every branch ``k``, last axis."""
    k = np.arange(n)
    return 4 * n - 4 * n * np.cos((np.asarray(phi)[..., None] - 2 * np.pi * k) / n)


def select_branch(phi, n: int, tol: float = 1e-12) -> np.ndarray:
    """Branch of least energy; ties go to the smallest ``k``."""
    e = branch_energies(phi, n)
    best = e.min(axis=-1, keepdims=True)
    return np.argmax(e <= best + tol, axis=-1)


def interpolate_batch(variant, u: np.ndarray):
    """Vectorised plaquette interpolation.

    Parameters
    ----------
    u : ndarray
        Boundary transporters with the cycle index on axis ``-2`` (SU(2),
        shape ``(..., n, 4)``) or ``-1`` (U(1), shape ``(..., n)``).

    Returns
    -------
    spokes, k, energy, phi
        ``spokes`` has the shape of ``u``; ``spokes[j] = T(C <- p_{j+1})``.
    """
    ops = ops_for(variant)
    axis = -2 if ops is _SU2Ops else -1
    n = u.shape[axis]
    take = (lambda a, j: a[..., j, :]) if ops is _SU2Ops else (lambda a, j: a[..., j])
    prods = [take(u, 0)]
    for j in range(1, n):
        prods.append(ops.mul(prods[-1], take(u, j)))
    hol = ops.dag(prods[-1])
    eta, phi = ops.eig(hol)
    k = select_branch(phi, n)
    eta_dag = ops.dag(eta)
    spokes = []
    for j in range(n):
        rot = ops.phase(j * phi / n - 2 * np.pi * j * k / n)
        spokes.append(ops.mul(rot, ops.mul(eta_dag, prods[j])))
    energy = np.take_along_axis(branch_energies(phi, n), k[..., None], axis=-1)[..., 0]
    return np.stack(spokes, axis=axis), k, energy, phi


@dataclass(frozen=True)
class PlaquetteInterpolation:
    inputs: tuple
    k: int
    spokes: tuple
    energy: float
    phi: float

    def subplaquette_holonomies(self) -> list[GroupElement]:
        """``U_j A_j^dag A_{j-1}`` for each wedge, with ``A_{-1} = A_{n-1}``."""
        n = len(self.inputs)
        return [self.inputs[j] * self.spokes[j].dagger() * self.spokes[(j - 1) % n]
                for j in range(n)]


def plaquette_interpolate(u_list) -> PlaquetteInterpolation:
    """Fill a polygon of ``n`` boundary transporters with a centre vertex.

    ``u_list[j]`` is ``T(p_j <- p_{j+1})``.  The returned spokes satisfy
    ``A_j = T(C <- p_{j+1})`` and every wedge carries flux ``|phi - 2 pi k| / n``.
    """
    u_list = list(u_list)
    if len(u_list) < 2:
        raise ValueError("a plaquette needs at least two edges")
    variant = u_list[0].variant
    if any(x.variant is not variant for x in u_list):
        raise ValueError("mixed group variants")
    raw = np.stack([np.asarray(_to_raw(x)) for x in u_list])
    spokes, k, energy, phi = interpolate_batch(variant, raw)
    return PlaquetteInterpolation(
        inputs=tuple(u_list), k=int(k), spokes=tuple(_from_raw(variant, s) for s in spokes),
        energy=float(energy), phi=float(phi))


def holonomy(loop) -> GroupElement:
    """Signed ordered product ``prod U_e^{-s_e}``, right to left, of ``(U, sign)`` pairs."""
    loop = list(loop)
    if not loop:
        raise ValueError("empty loop")
    out = GroupElement.identity(loop[0][0].variant)
    for u, s in loop:
        if s not in (1, -1):
            raise ValueError("traversal signs must be +1 or -1")
        out = (u.dagger() if s > 0 else u) * out
    return out


def flux_of(u: GroupElement) -> float:
    if u.variant is Group.U1:
        return abs(principal_angle(u.data[0]))
    return eigenphase_decompose(u).phi


def plaquette_flux(loop) -> float:
    """Gauge-invariant flux ``arccos(Re tr H / 2)`` (``|angle|`` for U(1)) of a loop."""
    return flux_of(holonomy(loop))


# ------------------------------------------------------------------ 2D lattices

def plaquette_holonomies(variant, links: np.ndarray, periodic: bool) -> np.ndarray:
    """Holonomy of every plaquette, batched over leading axes."""
    ops = ops_for(variant)
    p = len(ops.payload)
    lx, ly = links.shape[-3 - p], links.shape[-2 - p]
    h = links[..., 0, :] if p else links[..., 0]
    v = links[..., 1, :] if p else links[..., 1]
    xs = np.arange(lx if periodic else lx - 1)
    ys = np.arange(ly if periodic else ly - 1)
    sel = lambda a, ix, iy: a[..., ix[:, None], iy[None, :], :] if p else a[..., ix[:, None], iy[None, :]]  # noqa: E731
    B = sel(h, xs, ys)
    R = sel(v, (xs + 1) % lx, ys)
    T = sel(h, xs, (ys + 1) % ly)
    L = sel(v, xs, ys)
    return ops.mul(ops.mul(B, R), ops.mul(ops.dag(T), ops.dag(L)))


def subdivide_links(variant, links: np.ndarray, periodic: bool) -> np.ndarray:
    """Halve the lattice spacing of batched link arrays.

    Edges are split symmetrically into ``(U^{1/2}, U^{1/2})`` and every
    plaquette receives a centre vertex whose four spokes come from
    :func:`interpolate_batch` on the cycle ``W, N, E, S`` of edge midpoints.
    """
    ops = ops_for(variant)
    p = len(ops.payload)
    lead = links.shape[:-3 - p]
    lx, ly = links.shape[-3 - p], links.shape[-2 - p]
    fx, fy = (2 * lx, 2 * ly) if periodic else (2 * lx - 1, 2 * ly - 1)
    out = ops.identity(lead + (fx, fy, 2))
    half = ops.pow(links, 0.5)

    def at(a, ix, iy, d):
        return a[..., ix, iy, d, :] if p else a[..., ix, iy, d]

    def put(ix, iy, d, val):
        if p:
            out[..., ix, iy, d, :] = val
        else:
            out[..., ix, iy, d] = val

    hx = np.arange(lx if periodic else lx - 1)
    vy = np.arange(ly if periodic else ly - 1)
    allx, ally = np.arange(lx), np.arange(ly)
    # split horizontal edges
    X, Y = np.meshgrid(hx, ally, indexing="ij")
    hh = at(half, X, Y, 0)
    put(2 * X, 2 * Y, 0, hh)
    put(2 * X + 1, 2 * Y, 0, hh)
    # split vertical edges
    X, Y = np.meshgrid(allx, vy, indexing="ij")
    vh = at(half, X, Y, 1)
    put(2 * X, 2 * Y, 1, vh)
    put(2 * X, 2 * Y + 1, 1, vh)
    # plaquette centres
    X, Y = np.meshgrid(hx, vy, indexing="ij")
    Bh = at(half, X, Y, 0)
    Th = at(half, X, (Y + 1) % ly, 0)
    Lh = at(half, X, Y, 1)
    Rh = at(half, (X + 1) % lx, Y, 1)
    Rd, Bd = ops.dag(Rh), ops.dag(Bh)
    cycle = [ops.mul(Lh, Th), ops.mul(Th, Rd), ops.mul(Rd, Bd), ops.mul(Bd, Lh)]
    spokes, *_ = interpolate_batch(variant, np.stack(cycle, axis=-2 if p else -1))
    A = [spokes[..., j, :] if p else spokes[..., j] for j in range(4)]
    put(2 * X, 2 * Y + 1, 0, ops.dag(A[3]))      # W -> C
    put(2 * X + 1, 2 * Y + 1, 0, A[1])           # C -> E
    put(2 * X + 1, 2 * Y, 1, ops.dag(A[2]))      # S -> C
    put(2 * X + 1, 2 * Y + 1, 1, A[0])           # C -> N
    return out


@dataclass(frozen=True)
class LatticeConfig:
    """A classical connection on an ``lx x ly`` vertex lattice.

    ``links`` has shape ``(lx, ly, 2)`` (U(1) angles) or ``(lx, ly, 2, 4)``
    (SU(2) quaternions).  With open boundaries the edges leaving the lattice
    are unused and held at the identity.
    """

    variant: Group
    links: np.ndarray = field(repr=False)
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", as_group(self.variant))
        a = np.asarray(self.links, dtype=np.float64)
        p = len(ops_for(self.variant).payload)
        if a.ndim != 3 + p or a.shape[2] != 2 or (p and a.shape[3] != 4):
            raise ValueError(f"unsupported lattice array shape {a.shape}")
        if a.shape[0] < 2 or a.shape[1] < 2:
            raise ValueError("lattice needs at least 2x2 vertices")
        if not self.periodic:
            a = a.copy()
            ident = ops_for(self.variant).identity(())
            a[-1, :, 0] = ident
            a[:, -1, 1] = ident
        object.__setattr__(self, "links", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.links.shape[0], self.links.shape[1]

    @classmethod
    def flat(cls, variant, lx: int, ly: int, periodic: bool = False) -> "LatticeConfig":
        return cls(variant, ops_for(variant).identity((lx, ly, 2)), periodic)

    @classmethod
    def random(cls, variant, lx, ly, rng, periodic=False) -> "LatticeConfig":
        from .group import haar_random
        return cls(variant, haar_random(variant, rng, (lx, ly, 2)), periodic)

    def link(self, x: int, y: int, d: int) -> GroupElement:
        return _from_raw(self.variant, self.links[x, y, d])

    def set_link(self, x: int, y: int, d: int, u: GroupElement) -> "LatticeConfig":
        a = self.links.copy()
        a[x, y, d] = _to_raw(u)
        return LatticeConfig(self.variant, a, self.periodic)

    def holonomies(self) -> np.ndarray:
        return plaquette_holonomies(self.variant, self.links, self.periodic)

    def fluxes(self) -> np.ndarray:
        return ops_for(self.variant).flux(self.holonomies())

    def subdivide(self, times: int = 1) -> "LatticeConfig":
        out = self
        for _ in range(int(times)):
            out = LatticeConfig(self.variant, subdivide_links(self.variant, out.links, self.periodic),
                                self.periodic)
        return out

    def gauge_transform(self, x: np.ndarray) -> "LatticeConfig":
        """Apply vertex elements ``x[i, j]``: ``U_e -> x_{e-} U_e x_{e+}^dag``."""
        ops = ops_for(self.variant)
        lx, ly = self.shape
        xr = np.roll(x, -1, axis=0)
        xu = np.roll(x, -1, axis=1)
        a = self.links.copy()
        p = len(ops.payload)
        h = a[:, :, 0, :] if p else a[:, :, 0]
        v = a[:, :, 1, :] if p else a[:, :, 1]
        new_h = ops.mul(ops.mul(x, h), ops.dag(xr))
        new_v = ops.mul(ops.mul(x, v), ops.dag(xu))
        a[:, :, 0] = new_h
        a[:, :, 1] = new_v
        return LatticeConfig(self.variant, a, self.periodic)

    def to_json(self) -> dict:
        return {"variant": self.variant.value, "shape": list(self.shape),
                "periodic": bool(self.periodic), "links": self.links.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LatticeConfig":
        links = np.asarray(obj["links"], dtype=np.float64)
        if list(links.shape[:2]) != list(obj["shape"]):
            raise ValueError("link array does not match the declared shape")
        return cls(obj["variant"], links, bool(obj.get("periodic", False)))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def flux_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "flux"])
        f = self.fluxes()
        for i in range(f.shape[0]):
            for j in range(f.shape[1]):
                w.writerow([i, j, format(float(f[i, j]), ".17g")])
        return buf.getvalue()


def subdivide_2d(config: LatticeConfig, times: int = 1) -> LatticeConfig:
    """Halve the lattice spacing ``times`` times (see :meth:`LatticeConfig.subdivide`)."""
    if not isinstance(config, LatticeConfig):
        raise TypeError("subdivide_2d needs a rectangular LatticeConfig")
    return config.subdivide(times)
