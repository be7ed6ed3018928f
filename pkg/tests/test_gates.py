import numpy as np
import pytest

from gaugeinterp.gates import (
    apply_local, ci_gate, ci_gate_u1_exact, controlled_rotation, default_ci_degree,
    interpolant_nodes, isometry_defect, quadrature_defect, transport_degree,
)
from gaugeinterp.group import Group, haar_random
from gaugeinterp.link import Side, TruncatedLinkBasis, position_table, state_omega0, state_psi_lambda


def test_apply_local_matches_kron():
    rng = np.random.default_rng(0)
    t = rng.standard_normal((2, 3, 4))
    op = rng.standard_normal((12, 12))
    full = np.kron(np.eye(2), op) @ t.reshape(-1)
    assert np.allclose(apply_local(t, op, [1, 2]).reshape(-1), full)
    # axes in reversed order act on the permuted pair
    op2 = rng.standard_normal((6, 6))
    got = apply_local(t, op2, [1, 0])
    ref = np.einsum("bacd,dcz->abz", op2.reshape(3, 2, 3, 2), t)
    assert np.allclose(got, ref)


@pytest.mark.parametrize("side", list(Side))
@pytest.mark.parametrize("dagger", [False, True])
def test_u1_controlled_rotation_closed_form(side, dagger):
    # L_U multiplies the target charge m by exp(-i m theta), i.e. shifts the control charge
    b = TruncatedLinkBasis.u1(2)
    g = controlled_rotation(b, side, dagger).reshape(5, 5, 5, 5)
    ns = np.array(b.labels)
    sign = -1 if side is Side.LEFT else 1
    if dagger:
        sign = -sign
    ref = np.zeros((5, 5, 5, 5))
    for i, n in enumerate(ns):
        for j, m in enumerate(ns):
            out = n + sign * m
            if abs(out) <= 2:
                ref[list(ns).index(out), j, i, j] = 1
    assert np.allclose(g, ref, atol=1e-12)


@pytest.mark.parametrize("basis", [TruncatedLinkBasis.u1(2), TruncatedLinkBasis.su2(0.5)], ids=["u1", "su2"])
def test_transport_gate_is_exact_at_its_degree(basis):
    d = transport_degree(basis)
    a = controlled_rotation(basis, Side.LEFT, False, d)
    b = controlled_rotation(basis, Side.LEFT, False, d + 3)
    assert np.allclose(a, b, atol=1e-12)


def test_transport_leaves_haar_states_alone():
    b = TruncatedLinkBasis.su2(0.5)
    w = state_omega0(b).coeffs
    g = controlled_rotation(b, Side.RIGHT, True)
    assert np.allclose(g @ np.kron(w, w), np.kron(w, w), atol=1e-12)


def test_interpolant_nodes_u1_midpoint():
    assert np.isclose(interpolant_nodes(Group.U1, 0.0, np.pi / 2), np.pi / 4)
    # shortest arc across the branch cut
    assert np.isclose(np.mod(interpolant_nodes(Group.U1, 0.1, 2 * np.pi - 0.1), 2 * np.pi), 0.0)


def test_u1_ci_gate_converges_to_closed_form():
    b = TruncatedLinkBasis.u1(1)
    exact = ci_gate_u1_exact(b)
    errs = [np.linalg.norm(ci_gate(b, d) - exact, 2) for d in (4, 16, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02


def test_u1_closed_form_against_direct_integral():
    # independent evaluation of one matrix element by scipy-free midpoint integration
    b = TruncatedLinkBasis.u1(1)
    exact = ci_gate_u1_exact(b).reshape((3,) * 6)
    M = 2000
    th = 2 * np.pi * (np.arange(M) + 0.5) / M
    T1, T2 = np.meshgrid(th, th, indexing="ij")
    delta = np.mod(T2 - T1 + np.pi, 2 * np.pi) - np.pi
    A = T1 + delta / 2
    # <p, m, p'| G |n, m, n'> = int int e^{i (n - p) t1} e^{i (n' - p') t2} e^{-i m A}
    cases = [(0, 1, 0, 1, 0), (0, -1, 0, 0, -1), (1, 1, -1, 1, 0), (0, 0, 0, 0, 0), (0, 1, 1, 0, 0)]
    for (p, m, pp, n, nn) in cases:
        val = np.mean(np.exp(1j * ((n - p) * T1 + (nn - pp) * T2 - m * A)))
        got = exact[p + 1, m + 1, pp + 1, n + 1, m + 1, nn + 1]
        assert abs(val - got) < 1e-3


def test_quadrature_defect_decreases():
    b = TruncatedLinkBasis.u1(2)
    qd = [quadrature_defect(b, d) for d in range(1, 8)]
    assert all(x > y for x, y in zip(qd, qd[1:]))


def test_ci_gate_on_haar_ancilla_is_identity_on_ancilla():
    b = TruncatedLinkBasis.su2(0.5)
    g = ci_gate(b, 3)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    w = state_omega0(b).coeffs
    x = np.einsum("a,b,c->abc", u, w, v).reshape(-1)
    assert np.allclose(g @ x, x, atol=1e-10)


def test_isometry_defect_reports_truncation():
    b = TruncatedLinkBasis.u1(2)
    assert isometry_defect(np.eye(4)) == 0
    assert isometry_defect(ci_gate(b)) > 0.5


def test_classical_limit_midpoint():
    """Sharp position wave packets on U, V put the new link near A(U, V)."""
    nmax = 8
    b = TruncatedLinkBasis.u1(nmax)
    ns = np.array(b.labels)
    th_u, th_v = 0.4, 2.0

    def packet(theta):
        c = np.exp(-1j * ns * theta) * (nmax + 1 - np.abs(ns))  # Fejer-like weights
        return c / np.linalg.norm(c)

    mid = state_psi_lambda(b, 0.0).coeffs
    x = np.einsum("a,b,c->abc", packet(th_u), mid, packet(th_v)).reshape(-1)
    out = (ci_gate(b, default_ci_degree(b)) @ x).reshape(b.dim, b.dim, b.dim)
    grid = np.linspace(-np.pi, np.pi, 721)
    S = position_table(b, grid)
    amp = np.einsum("gb,abc->gac", S, out)
    p = np.sum(np.abs(amp) ** 2, axis=(1, 2))
    peak = grid[np.argmax(p)]
    assert abs(peak - (th_u + th_v) / 2) < 0.15


def test_haar_random_shapes():
    rng = np.random.default_rng(0)
    assert haar_random("su2", rng, (3, 2)).shape == (3, 2, 4)
    assert haar_random("u1", rng, 5).shape == (5,)
