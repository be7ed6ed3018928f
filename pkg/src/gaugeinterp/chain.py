"""The principal chiral chain: Hamiltonian, ground states and fine-graining.

The chain has one group-valued link per site.  With coupling ``g^2`` the
Hamiltonian is

    H = (g^2 / 2) sum_e Lap_e + (1 / g^2) (2 - sum_<e,e+1> Re tr(u_e u_{e+1}^dag))

with the non-negative Laplacian of :func:`gaugeinterp.link.laplacian`.

Fine-graining inserts a fresh link between every neighbouring pair and sets
it, conditioned on the two neighbours ``U`` and ``V``, to the geodesic midpoint
``A(U, V) = U sqrt(U^dag V)``.  A fine chain is ordered ``[U0, W0, U1, W1, ...]``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .gates import apply_local, ci_gate, default_ci_degree
from .group import Group, GroupElement, as_group
from .link import Side, TruncatedLinkBasis, laplacian, position_ops, rotation_matrix, state_psi_lambda
from .mps import (MPS, NonConvergence, apply_mpo, dmrg, expectation, local_gate_mpo,
                  mpo_from_terms, overlap)

log = logging.getLogger(__name__)

MAX_ED_DIM = 2 ** 20


@dataclass(frozen=True)
class ChainParams:
    n_sites: int
    g2: float
    basis: TruncatedLinkBasis
    periodic: bool = True
    solver: str = "ed"
    bond_dim: int = 22
    seed: int = 0
    max_sweeps: int = 40
    tol: float = 1e-9

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("a chain needs at least two links")
        if self.g2 <= 0:
            raise ValueError("coupling must be positive")
        if self.solver not in ("ed", "dmrg"):
            raise ValueError("solver must be 'ed' or 'dmrg'")
        if self.bond_dim < 1:
            raise ValueError("bond dimension must be positive")

    @property
    def d(self) -> int:
        return self.basis.dim

    @property
    def n_bonds(self) -> int:
        return self.n_sites if self.periodic else self.n_sites - 1


@dataclass
class ChainState:
    """Dense vector or MPS over ``n_sites`` copies of the link space."""

    basis: TruncatedLinkBasis
    n_sites: int
    periodic: bool
    dense: np.ndarray | None = field(default=None, repr=False)
    mps: MPS | None = field(default=None, repr=False)

    @property
    def kind(self) -> str:
        return "dense" if self.dense is not None else "mps"

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return self.mps.to_dense()

    def to_mps(self, max_bond: int | None = None) -> MPS:
        if self.mps is not None:
            return self.mps
        return MPS.from_dense(self.dense, self.n_sites, self.basis.dim, max_bond)

    def norm(self) -> float:
        return float(np.linalg.norm(self.dense)) if self.dense is not None else self.mps.norm()


@dataclass
class GroundStateResult:
    state: ChainState
    energy: float
    energy_density: float
    residual: float
    variance: float
    solver: str
    sweeps: int = 0


# --------------------------------------------------------------- Hamiltonian

def coupling_terms(basis: TruncatedLinkBasis) -> list[tuple[np.ndarray, np.ndarray]]:
    """Operator pairs ``(A, B)`` with ``Re tr(u u'^dag) = sum A (x) B``."""
    pairs = []
    for u in position_ops(basis).values():
        pairs.append((0.5 * u, u.conj().T))
        pairs.append((0.5 * u.conj().T, u))
    return pairs


def hamiltonian_terms(params: ChainParams) -> tuple[list, float]:
    """Term list ``(coef, {site: op})`` and the constant energy offset."""
    lap = laplacian(params.basis).matrix
    terms = [(params.g2 / 2, {e: lap}) for e in range(params.n_sites)]
    pairs = coupling_terms(params.basis)
    for e in range(params.n_bonds):
        f = (e + 1) % params.n_sites
        for A, B in pairs:
            terms.append((-1.0 / params.g2, {e: A, f: B}))
    return terms, 2.0 / params.g2


def _kron_term(ops: dict, n: int, d: int) -> sp.csr_matrix:
    out = sp.identity(1, dtype=complex, format="csr")
    for i in range(n):
        op = ops.get(i)
        m = sp.identity(d, dtype=complex, format="csr") if op is None else sp.csr_matrix(op)
        out = sp.kron(out, m, format="csr")
    return out


def build_hamiltonian(params: ChainParams):
    """Sparse matrix (``solver="ed"``) or MPO list (``solver="dmrg"``).

    The MPO form carries the constant offset on the first site.
    """
    terms, const = hamiltonian_terms(params)
    d, n = params.d, params.n_sites
    if params.solver == "dmrg":
        return mpo_from_terms(n, d, terms + [(const, {0: np.eye(d)})])
    if d ** n > MAX_ED_DIM:
        raise ValueError(f"dense Hilbert space {d}^{n} exceeds the ED guard of {MAX_ED_DIM}")
    H = const * sp.identity(d ** n, dtype=complex, format="csr")
    for coef, ops in terms:
        H = H + coef * _kron_term(ops, n, d)
    return H.tocsr()


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def ground_state(params: ChainParams, init: MPS | None = None) -> GroundStateResult:
    """Lowest eigenpair by sparse Lanczos (ED) or two-site DMRG."""
    n = params.n_sites
    if params.solver == "ed":
        H = build_hamiltonian(params)
        dim = H.shape[0]
        if dim <= 400:
            w, v = np.linalg.eigh(H.toarray())
            e, vec = float(w[0]), v[:, 0]
        else:
            v0 = np.random.default_rng(params.seed).standard_normal(dim).astype(complex)
            w, v = sla.eigsh(H, k=1, which="SA", v0=v0, tol=1e-13, ncv=min(dim - 1, 40))
            e, vec = float(w[0]), v[:, 0]
        vec = _fix_phase(vec / np.linalg.norm(vec))
        res = float(np.linalg.norm(H @ vec - e * vec))
        if res > 1e-8:
            raise NonConvergence("Lanczos residual above 1e-8", {"residual": res, "energy": e})
        state = ChainState(params.basis, n, params.periodic, dense=vec)
        return GroundStateResult(state, e, e / n, res, 0.0, "ed")
    mpo = build_hamiltonian(params)
    r = dmrg(mpo, params.d, params.bond_dim, seed=params.seed, max_sweeps=params.max_sweeps,
             tol=params.tol, init=init)
    state = ChainState(params.basis, n, params.periodic, mps=r.mps)
    return GroundStateResult(state, r.energy, r.energy / n, float(np.sqrt(r.variance)), r.variance,
                             "dmrg", r.sweeps)


def energy_of(state: ChainState, params: ChainParams) -> float:
    """``<psi|H|psi> / <psi|psi>`` for a state on ``params.n_sites`` links."""
    if state.n_sites != params.n_sites:
        raise ValueError("state and Hamiltonian sizes differ")
    if state.kind == "dense" and params.solver == "ed":
        v = state.dense
        return float(np.vdot(v, build_hamiltonian(params) @ v).real / np.vdot(v, v).real)
    mps = state.to_mps()
    mpo = build_hamiltonian(replace(params, solver="dmrg"))
    return float(expectation(mps, mpo).real / overlap(mps, mps).real)


def global_rotation(state: ChainState, left: GroupElement, right: GroupElement) -> np.ndarray:
    """``(L_x)^{(x)N} (R_y)^{(x)N}`` applied to a dense state."""
    op = rotation_matrix(state.basis, Side.LEFT, left) @ rotation_matrix(state.basis, Side.RIGHT, right)
    t = state.to_dense().reshape([state.basis.dim] * state.n_sites)
    for i in range(state.n_sites):
        t = apply_local(t, op, [i])
    return t.reshape(-1)


def symmetry_defect(vec: np.ndarray, basis: TruncatedLinkBasis, n_sites: int,
                    trials: int = 4, seed: int = 0) -> float:
    """Largest ``||T psi - psi||`` over random global left/right rotations."""
    from .group import random_element
    rng = np.random.default_rng(seed)
    st = ChainState(basis, n_sites, True, dense=vec)
    worst = 0.0
    for _ in range(trials):
        x, y = random_element(basis.variant, rng), random_element(basis.variant, rng)
        worst = max(worst, float(np.linalg.norm(global_rotation(st, x, y) - vec)))
    return worst


# --------------------------------------------------------------- fine-graining

_CI_CACHE: dict = {}


def cached_ci_gate(basis: TruncatedLinkBasis, degree: int | None = None) -> np.ndarray:
    degree = default_ci_degree(basis) if degree is None else int(degree)
    key = (basis.variant, basis.cutoff, degree)
    if key not in _CI_CACHE:
        _CI_CACHE[key] = ci_gate(basis, degree)
    return _CI_CACHE[key]


@dataclass
class FineGrainResult:
    state: ChainState
    norm: float
    discarded: float = 0.0

    @property
    def norm_defect(self) -> float:
        return abs(1.0 - self.norm)


def fine_links(n_sites: int, periodic: bool) -> int:
    return 2 * n_sites if periodic else 2 * n_sites - 1


def _gate_sites(n: int, periodic: bool):
    L = fine_links(n, periodic)
    return [(2 * e, 2 * e + 1, (2 * e + 2) % L) for e in range(n if periodic else n - 1)]


def fine_grain(state: ChainState, lam: float, degree: int | None = None,
               gate: np.ndarray | None = None, max_bond: int | None = None) -> FineGrainResult:
    """Double the chain: insert ``psi(lam)`` links and apply the interpolating gate.

    The output is normalised; the norm before normalisation is reported since
    the truncated gate is not an exact isometry.
    """
    basis, n = state.basis, state.n_sites
    d = basis.dim
    psi = state_psi_lambda(basis, lam).coeffs
    gate = cached_ci_gate(basis, degree) if gate is None else gate
    L = fine_links(n, state.periodic)
    if state.kind == "dense":
        t = state.dense.reshape([d] * n)
        for _ in range(L - n):
            t = np.multiply.outer(t, psi)
        perm = []
        for e in range(n):
            perm.append(e)
            if n + e < L:
                perm.append(n + e)
        t = np.transpose(t, perm)
        for sites in _gate_sites(n, state.periodic):
            t = apply_local(t, gate, list(sites))
        v = t.reshape(-1)
        nrm = float(np.linalg.norm(v))
        return FineGrainResult(ChainState(basis, L, state.periodic, dense=v / nrm), nrm)
    tensors = []
    for e, A in enumerate(state.mps.tensors):
        tensors.append(A)
        if len(tensors) < L:
            dr = A.shape[2]
            tensors.append(np.einsum("ab,s->asb", np.eye(dr), psi))
    mps = MPS(tensors)
    max_bond = max_bond or max(state.mps.max_bond * d, 1)
    discarded = 0.0
    nrm = 1.0
    for sites in _gate_sites(n, state.periodic):
        mps = apply_mpo(mps, local_gate_mpo(gate, sites, L, d))
        step, lost = mps.compress(max_bond)
        nrm *= step
        discarded += lost
    return FineGrainResult(ChainState(basis, L, state.periodic, mps=mps), nrm, discarded)


def fidelity_per_site(a: ChainState, b: ChainState) -> float:
    """``|<a|b>|^{1/N}`` for normalised states on ``N`` links."""
    if a.n_sites != b.n_sites or not a.basis.is_compatible(b.basis):
        raise ValueError("states live on different spaces")
    if a.kind == "dense" and b.kind == "dense":
        ov = np.vdot(a.dense, b.dense) / (np.linalg.norm(a.dense) * np.linalg.norm(b.dense))
    else:
        ma, mb = a.to_mps(), b.to_mps()
        ov = overlap(ma, mb) / np.sqrt(abs(overlap(ma, ma)) * abs(overlap(mb, mb)))
    return float(min(1.0, abs(ov)) ** (1.0 / a.n_sites))


# -------------------------------------------------------------------- sweep

SWEEP_COLUMNS = ["g0_inv2", "g_inv2", "lambda", "f_finegrained", "f_baseline", "energy_density",
                 "isometry_defect", "solver", "N", "D", "l_max"]


def _solve_job(args):
    params = args
    try:
        return ground_state(params), None
    except NonConvergence as exc:
        return None, {"message": str(exc), **{k: v for k, v in exc.diagnostics.items() if k != "history"}}


def fidelity_sweep(g0_inv2: float, g_inv2_grid, lam_grid, params: ChainParams,
                   degree: int | None = None, workers: int = 1, on_event=None) -> list[dict]:
    """Fidelity of fine-grained coarse ground states with fine ground states.

    ``params`` describes the coarse chain (its ``g2`` is ignored).  For every
    ``g^-2`` in the grid the ground state of the doubled chain is computed;
    every ``lambda`` yields a fine-grained copy of the coarse ground state at
    ``g0^-2``.  The baseline compares fine ground states at ``g0`` and ``g``.
    Cells whose solver fails are returned with NaN values and ``failed=True``.
    """
    emit = on_event or (lambda **kw: None)
    g_inv2_grid, lam_grid = list(g_inv2_grid), list(lam_grid)
    if not g_inv2_grid or not lam_grid:
        return []
    coarse = replace(params, g2=1.0 / g0_inv2)
    n_fine = fine_links(params.n_sites, params.periodic)
    fine = replace(params, n_sites=n_fine)
    jobs = [replace(fine, g2=1.0 / g0_inv2)] + [replace(fine, g2=1.0 / gi) for gi in g_inv2_grid]
    coarse_res, err = _solve_job(coarse)
    if coarse_res is None:
        emit(event="nonconvergence", stage="coarse", g_inv2=g0_inv2, **err)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(_solve_job, jobs))
    else:
        solved = [_solve_job(j) for j in jobs]
    ref, ref_err = solved[0]
    grained = {}
    if coarse_res is not None:
        for lam in lam_grid:
            fg = fine_grain(coarse_res.state, lam, degree=degree,
                            max_bond=params.bond_dim if params.solver == "dmrg" else None)
            grained[lam] = fg
            emit(event="fine_grain", g0_inv2=g0_inv2, **{"lambda": lam}, norm=fg.norm,
                 norm_defect=fg.norm_defect, discarded=fg.discarded)
    rows = []
    for gi, (res, err) in zip(g_inv2_grid, solved[1:]):
        if err is not None:
            emit(event="nonconvergence", stage="fine", g_inv2=gi, **err)
        fine_g = replace(fine, g2=1.0 / gi)
        base = fidelity_per_site(ref.state, res.state) if (res and ref) else float("nan")
        for lam in lam_grid:
            ok = res is not None and lam in grained
            f = fidelity_per_site(grained[lam].state, res.state) if ok else float("nan")
            ed = energy_of(grained[lam].state, fine_g) / n_fine if lam in grained else float("nan")
            rows.append({
                "g0_inv2": g0_inv2, "g_inv2": gi, "lambda": lam, "f_finegrained": f,
                "f_baseline": base, "energy_density": ed,
                "isometry_defect": grained[lam].norm_defect if lam in grained else float("nan"),
                "solver": params.solver, "N": params.n_sites,
                "D": params.bond_dim if params.solver == "dmrg" else "",
                "l_max": params.basis.l_max, "failed": not (ok and ref is not None),
            })
    return rows


def sweep_argmax(rows: list[dict]) -> dict:
    """Per ``lambda``: the ``g^-2`` maximising the fine-grained fidelity, with both fidelities there."""
    out = {}
    for r in rows:
        if r.get("failed"):
            continue
        best = out.get(r["lambda"])
        if best is None or r["f_finegrained"] > best["f_finegrained"]:
            out[r["lambda"]] = r
    return out


def default_basis(variant, desk: bool = True) -> TruncatedLinkBasis:
    """Desk-scale (``|n| <= 2`` or ``l <= 1``) or larger reference cutoffs."""
    if as_group(variant) is Group.U1:
        return TruncatedLinkBasis.u1(2 if desk else 5)
    return TruncatedLinkBasis.su2(1 if desk else 1.5)
