"""Plaquette observables in the iterated fine-graining ansatz.

With the ancilla links prepared at the identity (``lambda = 1``) fine-graining
acts on position eigenstates as the classical interpolation of
:mod:`gaugeinterp.classical`.  Each fine plaquette then carries a quarter of the
flux of its parent, so flux observables ascend with a factor ``1/4`` per level
and products of ``l`` fluxes with ``1/4^l``.  After ``m`` ascents every
observable is a class function of independent Haar plaquette holonomies on
the level-0 lattice, which :func:`class_quadrature` integrates.

:func:`pushforward_oracle` evaluates the same numbers independently: it draws
(or enumerates) level-0 connections, subdivides them ``m`` times and measures
the observable on the fine lattice.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .classical import ops_for, plaquette_holonomies, subdivide_links
from .group import Group, as_group, class_quadrature, haar_random, principal_angle

KINDS = ("flux", "flux_product", "trace_function")
DEFAULT_BLOCK = 4096


class UnsupportedObservable(ValueError):
    pass


@dataclass(frozen=True)
class PlaquetteObservable:
    """Flux, product of fluxes, or ``f(tr u)`` on plaquettes of the level-``m`` lattice.

    Parameters
    ----------
    kind : {"flux", "flux_product", "trace_function"}
    m : int
        Refinement level.
    plaquettes : tuple of (int, int)
        One plaquette for ``flux`` and ``trace_function``; one or more for
        ``flux_product`` (repeats allowed).
    func : callable, optional
        ``f`` for ``trace_function``; it receives traces as numpy arrays
        (real for SU(2), complex ``exp(i theta)`` for U(1)).
    power : Fraction
        Internal: the observable is ``f(tr u^power)``.  Only ascending changes it.
    """

    kind: str
    m: int
    plaquettes: tuple
    func: Callable | None = field(default=None, compare=False)
    power: Fraction = Fraction(1)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedObservable(f"unknown observable kind {self.kind!r}")
        if self.m < 0:
            raise ValueError("refinement level must be non-negative")
        pl = tuple((int(i), int(j)) for i, j in self.plaquettes)
        if not pl:
            raise ValueError("observable needs at least one plaquette")
        if self.kind != "flux_product" and len(pl) != 1:
            raise ValueError(f"{self.kind} acts on exactly one plaquette")
        if any(i < 0 or j < 0 for i, j in pl):
            raise ValueError("plaquette coordinates must be non-negative")
        if self.kind == "trace_function" and self.func is None:
            raise ValueError("trace_function needs func")
        object.__setattr__(self, "plaquettes", pl)

    @classmethod
    def flux(cls, m: int, plaquette=(0, 0)) -> "PlaquetteObservable":
        return cls("flux", m, (plaquette,))

    @classmethod
    def flux_product(cls, m: int, plaquettes) -> "PlaquetteObservable":
        return cls("flux_product", m, tuple(plaquettes))

    @classmethod
    def trace_function(cls, m: int, func, plaquette=(0, 0), label: str = "") -> "PlaquetteObservable":
        return cls("trace_function", m, (plaquette,), func=func, label=label)

    @property
    def degree(self) -> int:
        """Number of flux factors (0 for trace functions)."""
        return 0 if self.kind == "trace_function" else len(self.plaquettes)

    def describe(self) -> str:
        if self.kind == "trace_function":
            return f"f(tr u^{self.power})" + (f"[{self.label}]" if self.label else "")
        return "*".join(f"flux{p}" for p in self.plaquettes)

    def level0_extent(self) -> tuple[int, int]:
        """Vertices needed along each axis of an open level-0 lattice."""
        s = 2 ** self.m
        return (max(i for i, _ in self.plaquettes) // s + 2,
                max(j for _, j in self.plaquettes) // s + 2)


@dataclass(frozen=True)
class AscendResult:
    observable: PlaquetteObservable
    prefactor: Fraction


def _check_lambda(lam) -> None:
    if lam != 1:
        raise UnsupportedObservable(
            "closed-form ascent is only available for identity ancillas (lambda = 1)")


def ascend(obs: PlaquetteObservable, lam=1) -> AscendResult:
    """One level of the ascending channel.

    Coordinates are floor-halved.  A flux product of ``l`` factors picks up
    ``1/4^l``; a trace function keeps prefactor 1 and its argument becomes
    ``u^{1/4}``.
    """
    _check_lambda(lam)
    if obs.m == 0:
        raise ValueError("level-0 observables cannot ascend further")
    coarse = tuple((i // 2, j // 2) for i, j in obs.plaquettes)
    if obs.kind == "trace_function":
        out = PlaquetteObservable("trace_function", obs.m - 1, coarse, obs.func,
                                  obs.power / 4, obs.label)
        return AscendResult(out, Fraction(1))
    out = PlaquetteObservable(obs.kind, obs.m - 1, coarse)
    return AscendResult(out, Fraction(1, 4 ** obs.degree))


def ascend_to_level0(obs: PlaquetteObservable, lam=1) -> AscendResult:
    prefactor = Fraction(1)
    while obs.m > 0:
        r = ascend(obs, lam)
        prefactor *= r.prefactor
        obs = r.observable
    return AscendResult(obs, prefactor)


def _class_traces(variant, phases: np.ndarray, power: Fraction) -> np.ndarray:
    t = float(power) * phases
    if as_group(variant) is Group.U1:
        return np.exp(1j * t)
    return 2 * np.cos(t)


def haar_flux_moment(variant, k: int, n_points: int = 64) -> float:
    """``E[Phi^k]`` over Haar measure by class quadrature."""
    rule = class_quadrature(variant, n_points)
    phi = ops_for(variant).flux(rule.nodes)
    return float(np.sum(rule.weights * phi ** int(k)))


def expect_in_ansatz(obs: PlaquetteObservable, variant=Group.SU2, lam=1, n_points: int = 64) -> float:
    """Exact expectation value in the level-``m`` ansatz.

    Distinct level-0 plaquettes of an open lattice carry independent Haar
    holonomies, so a product of fluxes factorises into moments.
    """
    r = ascend_to_level0(obs, lam)
    o = r.observable
    if o.kind == "trace_function":
        rule = class_quadrature(variant, n_points)
        phases = principal_angle(rule.nodes) if as_group(variant) is Group.U1 else np.arccos(
            np.clip(rule.nodes[:, 0], -1, 1))
        vals = np.asarray(o.func(_class_traces(variant, phases, o.power)))
        return float(np.real(np.sum(rule.weights * vals)))
    value = float(r.prefactor)
    for _, k in sorted(Counter(o.plaquettes).items()):
        value *= haar_flux_moment(variant, k, n_points)
    return value


def expect_prefactor(obs: PlaquetteObservable) -> Fraction:
    return ascend_to_level0(obs).prefactor


# ------------------------------------------------------------- pushforward

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int
    method: str
    seed: int | None = None

    def record(self, observable: str, m: int) -> dict:
        return {"observable": observable, "m": int(m), "method": self.method,
                "value": self.value, "stderr": self.stderr, "samples": self.samples,
                "seed": self.seed}


def _evaluate_fine(variant, obs: PlaquetteObservable, fine_links: np.ndarray, origin=(0, 0)) -> np.ndarray:
    """Observable on batched fine links whose vertex ``(0, 0)`` sits at ``origin``."""
    ops = ops_for(variant)
    hol = plaquette_holonomies(variant, fine_links, periodic=False)
    ox, oy = origin
    if obs.kind == "trace_function":
        if obs.power != 1:
            raise UnsupportedObservable("pushforward evaluates fine-level observables only")
        i, j = obs.plaquettes[0]
        h = hol[:, i - ox, j - oy]
        tr = np.exp(1j * h) if as_group(variant) is Group.U1 else 2 * h[..., 0]
        return np.real(np.asarray(obs.func(tr)))
    flux = ops.flux(hol)
    out = np.ones(fine_links.shape[0])
    for i, j in obs.plaquettes:
        out = out * flux[:, i - ox, j - oy]
    return out


def _subdivide(variant, links: np.ndarray, m: int) -> np.ndarray:
    for _ in range(m):
        links = subdivide_links(variant, links, periodic=False)
    return links


def _subdivide_window(variant, links: np.ndarray, m: int, plaquettes):
    """Subdivide ``m`` times, keeping only the ancestors of ``plaquettes``.

    A fine plaquette depends only on the boundary links of its parent, so
    cropping each level to the bounding box of the ancestors gives the same
    fine values as subdividing the whole lattice.  Returns the cropped fine
    links and the absolute position of their vertex ``(0, 0)``.
    """
    ox = oy = 0
    for k in range(m):
        shift = m - k
        xs = [i >> shift for i, _ in plaquettes]
        ys = [j >> shift for _, j in plaquettes]
        x0, y0 = min(xs), min(ys)
        links = links[:, x0 - ox:max(xs) - ox + 2, y0 - oy:max(ys) - oy + 2]
        links = subdivide_links(variant, links, periodic=False)
        ox, oy = 2 * x0, 2 * y0
    return links, (ox, oy)


def _pushforward_values(variant, obs: PlaquetteObservable, links: np.ndarray) -> np.ndarray:
    fine, origin = _subdivide_window(variant, links, obs.m, obs.plaquettes)
    return _evaluate_fine(variant, obs, fine, origin)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _mc_block(args):
    variant, obs, seed, block, n = args
    rng = _block_rng(seed, block)
    lx, ly = obs.level0_extent()
    links = haar_random(variant, rng, (n, lx, ly, 2))
    vals = _pushforward_values(variant, obs, links)
    return float(np.sum(vals)), float(np.sum(vals ** 2)), n


def _mc(variant, obs, samples: int, seed: int, block_size: int, workers: int, fn=_mc_block) -> Estimate:
    samples = int(samples)
    if samples < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    jobs = []
    b = 0
    while b * block_size < samples:
        jobs.append((variant, obs, seed, b, min(block_size, samples - b * block_size)))
        b += 1
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, jobs))
    else:
        parts = [fn(j) for j in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean ** 2, 0.0) * samples / (samples - 1)
    return Estimate(mean, float(np.sqrt(var / samples)), samples, "monte_carlo", int(seed))


def _axial_config(variant, extent, assignments) -> np.ndarray:
    """Open level-0 links with prescribed plaquette holonomies.

    Vertical links and the bottom row are the identity; ``h(x, y+1) =
    P(x, y)^dag h(x, y)`` then gives plaquette ``(x, y)`` the holonomy ``P``.
    ``assignments`` maps plaquettes to raw batched holonomies of shape
    ``(batch, ...)``; unlisted plaquettes are flat.
    """
    ops = ops_for(variant)
    lx, ly = extent
    batch = len(next(iter(assignments.values())))
    links = ops.identity((batch, lx, ly, 2))
    for y in range(ly - 1):
        for x in range(lx - 1):
            P = assignments.get((x, y))
            if P is None:
                continue
            links[:, x, y + 1, 0] = ops.mul(ops.dag(P), links[:, x, y, 0])
    return links


def _quadrature(variant, obs: PlaquetteObservable, n_points: int) -> Estimate:
    """Tensor-product class quadrature over the level-0 plaquettes that matter.

    Valid because every supported observable depends on each parent
    plaquette only through the conjugacy class of its holonomy.
    """
    s = 2 ** obs.m
    parents = sorted({(i // s, j // s) for i, j in obs.plaquettes})
    rule = class_quadrature(variant, n_points)
    idx = np.stack(np.meshgrid(*[np.arange(len(rule.weights))] * len(parents), indexing="ij"),
                   axis=-1).reshape(-1, len(parents))
    w = np.prod(rule.weights[idx], axis=1)
    assign = {p: rule.nodes[idx[:, a]] for a, p in enumerate(parents)}
    links = _axial_config(variant, obs.level0_extent(), assign)
    vals = _pushforward_values(variant, obs, links)
    return Estimate(float(np.sum(w * vals)), 0.0, int(len(w)), "quadrature")


def pushforward_oracle(obs: PlaquetteObservable, variant=Group.SU2, sampler: str = "monte_carlo",
                       samples: int = 100_000, seed: int = 0, lam=1, n_points: int = 64,
                       block_size: int = DEFAULT_BLOCK, workers: int = 1) -> Estimate:
    """Evaluate ``obs`` by classically fine-graining Haar level-0 connections.

    Monte Carlo draws each block from a Philox stream keyed by ``(seed,
    block)`` and reduces blocks in index order, so the estimate does not
    depend on ``workers``.
    """
    _check_lambda(lam)
    if obs.power != 1:
        raise UnsupportedObservable("pass the fine-level observable, not an ascended one")
    variant = as_group(variant)
    if sampler == "quadrature":
        return _quadrature(variant, obs, n_points)
    if sampler == "monte_carlo":
        return _mc(variant, obs, samples, seed, block_size, workers)
    raise ValueError(f"unknown sampler {sampler!r}")


# ------------------------------------------------------------- Wilson loops

def _loop_steps(loop) -> list[tuple[int, int, int, int]]:
    """Turn a closed vertex path into ``(x, y, direction, sign)`` link steps."""
    pts = [tuple(int(c) for c in p) for p in loop]
    if len(pts) < 2:
        return []
    if pts[0] != pts[-1]:
        raise ValueError("Wilson loop path must be closed")
    steps = []
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        dx, dy = x1 - x0, y1 - y0
        if abs(dx) + abs(dy) != 1:
            raise ValueError(f"path step {(x0, y0)} -> {(x1, y1)} is not a lattice link")
        if dx:
            steps.append((min(x0, x1), y0, 0, dx))
        else:
            steps.append((x0, min(y0, y1), 1, dy))
    return steps


def reduce_loop(steps) -> list:
    """Cancel back-tracking, including across the base point."""
    out = []
    for s in steps:
        if out and out[-1][:3] == s[:3] and out[-1][3] == -s[3]:
            out.pop()
        else:
            out.append(s)
    while len(out) >= 2 and out[0][:3] == out[-1][:3] and out[0][3] == -out[-1][3]:
        out = out[1:-1]
    return out


def _loop_trace(variant, links: np.ndarray, steps) -> np.ndarray:
    ops = ops_for(variant)
    acc = ops.identity((links.shape[0],))
    for x, y, d, s in steps:
        u = links[:, x, y, d]
        acc = ops.mul(ops.dag(u) if s > 0 else u, acc)
    if as_group(variant) is Group.U1:
        return np.cos(acc)
    return 2 * acc[..., 0]


def wilson_loop_in_ansatz(loop, m: int, variant=Group.SU2, lam=1, samples: int = 100_000,
                          seed: int = 0, block_size: int = DEFAULT_BLOCK) -> Estimate:
    """``<Re tr W(loop)>`` in the level-``m`` ansatz.

    ``loop`` is a closed list of vertices on the open level-``m`` lattice.
    With ``lam=0`` (ancillas in the trivial-irrep state) every irreducible
    loop vanishes exactly.  With ``lam=1`` the value is sampled through the
    classical pushforward.
    """
    variant = as_group(variant)
    steps = reduce_loop(_loop_steps(loop))
    dim = 1.0 if variant is Group.U1 else 2.0
    if not steps:
        return Estimate(dim, 0.0, 0, "exact")
    if lam == 0:
        return Estimate(0.0, 0.0, 0, "exact")
    _check_lambda(lam)
    s = 2 ** m
    pts = np.asarray(loop, dtype=int)
    extent = (-(-int(pts[:, 0].max()) // s) + 1, -(-int(pts[:, 1].max()) // s) + 1)
    extent = (max(extent[0], 2), max(extent[1], 2))

    def block(args):
        _, _, sd, b, n = args
        rng = _block_rng(sd, b)
        links = haar_random(variant, rng, (n,) + extent + (2,))
        vals = _loop_trace(variant, _subdivide(variant, links, m), steps)
        return float(np.sum(vals)), float(np.sum(vals ** 2)), n

    return _mc(variant, None, samples, seed, block_size, 1, fn=block)
