import numpy as np
import pytest

from gaugeinterp.group import Group, GroupElement, haar_quadrature, random_element, wigner
from gaugeinterp.link import (
    LinkOperator, LinkVector, Side, TruncatedLinkBasis, identity_vector, laplacian,
    position_matrix, position_op, position_ops, position_table, rotation_matrix, rotation_op,
    sample_position_projector, state_omega0, state_psi_lambda, truncation_defect, wavefunction,
)

SU2 = TruncatedLinkBasis.su2(1.5)
U1 = TruncatedLinkBasis.u1(3)


def rnd(variant, seed):
    return random_element(variant, np.random.default_rng(seed))


def random_vector(basis, seed, keep_top=True):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    if not keep_top:
        lab, off, d = basis.blocks[-1]
        c[off:off + d * d] = 0
        if basis.variant is Group.U1:
            c[0] = 0
    return LinkVector(basis, c / np.linalg.norm(c))


def test_dimensions():
    assert SU2.dim == 1 + 4 + 9 + 16
    assert U1.dim == 7
    assert TruncatedLinkBasis.su2(0.5).dim == 5


def test_laplacian_spectrum():
    lap = laplacian(SU2).matrix
    assert lap[SU2.index(0), SU2.index(0)] == 0
    assert lap[SU2.index(1), SU2.index(1)] == 3
    assert lap[SU2.index(2), SU2.index(2)] == 8
    assert np.allclose(np.diag(laplacian(U1).matrix), np.arange(-3, 4) ** 2)


def test_omega0_properties():
    w = state_omega0(SU2)
    assert np.isclose(w.norm(), 1)
    assert np.allclose(laplacian(SU2) @ w.coeffs, 0)
    tr = position_matrix(SU2, 0.5, 0.5) + position_matrix(SU2, -0.5, -0.5)
    assert abs(np.vdot(w.coeffs, tr @ w.coeffs)) < 1e-14
    for a in (0.5, -0.5):
        for b in (0.5, -0.5):
            assert abs(np.vdot(w.coeffs, position_matrix(SU2, a, b) @ w.coeffs)) < 1e-14


def test_position_op_lands_in_spin_half():
    out = position_op(SU2, 0.5, -0.5) @ state_omega0(SU2)
    lab, off, d = SU2.blocks[1]
    mask = np.zeros(SU2.dim, bool)
    mask[off:off + d * d] = True
    assert np.allclose(out.coeffs[~mask], 0)
    assert np.linalg.norm(out.coeffs[mask]) > 0.1


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5)])
def test_position_op_against_quadrature(a, b):
    # <i| u_ab |j> = int conj(chi_i) t_ab chi_j over an exact rule
    rule = haar_quadrature("su2", 2 * SU2.cutoff + 1)
    S = position_table(SU2, rule.nodes)
    ia, ib = int(0.5 - a), int(0.5 - b)
    t = np.array([wigner(0.5, GroupElement.from_array("su2", q))[ia, ib] for q in rule.nodes])
    ref = np.einsum("q,qi,q,qj->ij", rule.weights, S.conj(), t, S)
    # couplings to l > l_max are cut, so compare only columns below the top irrep
    top_off = SU2.blocks[-1][1]
    got = position_matrix(SU2, a, b)
    assert np.allclose(got[:, :top_off], ref[:, :top_off], atol=1e-9)


def test_position_op_is_multiplication():
    psi = random_vector(SU2, 1, keep_top=False)
    u = rnd("su2", 2)
    val = wavefunction(psi, u)
    out = position_op(SU2, -0.5, 0.5) @ psi
    assert np.isclose(wavefunction(out, u), u.matrix()[1, 0] * val)


def test_u1_position_shifts_charge():
    u = position_matrix(U1)
    assert np.allclose(u @ np.eye(7)[:, U1.index(0)], np.eye(7)[:, U1.index(1)])


def test_truncation_defect_positive_only_at_cutoff():
    assert truncation_defect(SU2) > 0.1
    assert truncation_defect(U1) > 0.1


@pytest.mark.parametrize("basis", [SU2, U1], ids=["su2", "u1"])
def test_rotation_identity_and_homomorphism(basis):
    v = basis.variant
    assert np.allclose(rotation_matrix(basis, Side.LEFT, GroupElement.identity(v)), np.eye(basis.dim))
    x, y = rnd(v, 3), rnd(v, 4)
    for side in Side:
        lhs = rotation_matrix(basis, side, x) @ rotation_matrix(basis, side, y)
        assert np.allclose(lhs, rotation_matrix(basis, side, x * y), atol=1e-10)
        m = rotation_matrix(basis, side, x)
        assert np.allclose(m @ m.conj().T, np.eye(basis.dim), atol=1e-12)
    L, R = rotation_matrix(basis, Side.LEFT, x), rotation_matrix(basis, Side.RIGHT, y)
    assert np.allclose(L @ R, R @ L, atol=1e-12)


def test_rotations_act_on_wavefunctions():
    psi = random_vector(SU2, 5)
    x, u = rnd("su2", 6), rnd("su2", 7)
    left = rotation_op(SU2, Side.LEFT, x) @ psi
    right = rotation_op(SU2, Side.RIGHT, x) @ psi
    assert np.isclose(wavefunction(left, u), wavefunction(psi, x.dagger() * u))
    assert np.isclose(wavefunction(right, u), wavefunction(psi, u * x))


def test_haar_state_is_invariant():
    w = state_omega0(SU2)
    for side in Side:
        assert np.allclose(rotation_op(SU2, side, rnd("su2", 8)) @ w.coeffs, w.coeffs)


@pytest.mark.parametrize("basis", [SU2, U1], ids=["su2", "u1"])
def test_psi_lambda(basis):
    assert np.allclose(state_psi_lambda(basis, np.inf).coeffs, state_omega0(basis).coeffs)
    big = state_psi_lambda(basis, 40.0)
    assert abs(abs(big.vdot(state_omega0(basis))) - 1) < 1e-12
    psi = state_psi_lambda(basis, 0.4)
    assert np.isclose(psi.norm(), 1)
    x = rnd(basis.variant, 9)
    conj = rotation_matrix(basis, Side.LEFT, x) @ rotation_matrix(basis, Side.RIGHT, x)
    assert np.allclose(conj @ psi.coeffs, psi.coeffs, atol=1e-12)
    top = basis.labels[-1]
    assert abs(np.vdot(identity_vector(basis, top), psi.coeffs)) == 0


def test_psi_lambda_rejects_negative():
    with pytest.raises(ValueError):
        state_psi_lambda(U1, -1)


def test_position_projector_pairings():
    u = rnd("su2", 10)
    p = sample_position_projector(SU2, u)
    assert np.isclose(p.vdot(state_omega0(SU2)), 1)
    lab, off, d = SU2.blocks[2]
    D = wigner(1, u)
    for j in range(d):
        for k in range(d):
            assert np.isclose(p.coeffs[off + j * d + k], np.sqrt(d) * np.conj(D[j, k]))


@pytest.mark.parametrize("basis", [SU2, U1], ids=["su2", "u1"])
def test_parseval(basis):
    degree = 2 * basis.cutoff
    rule = haar_quadrature(basis.variant, degree)
    psi = random_vector(basis, 11)
    vals = position_table(basis, rule.nodes) @ psi.coeffs
    assert np.isclose(np.sum(rule.weights * np.abs(vals) ** 2), 1.0, atol=1e-9)


@pytest.mark.parametrize("basis", [SU2, U1], ids=["su2", "u1"])
def test_json_round_trip(basis):
    psi = random_vector(basis, 12)
    back = LinkVector.from_json(psi.to_json())
    assert np.allclose(back.coeffs, psi.coeffs)
    op = LinkOperator(basis, rotation_matrix(basis, Side.RIGHT, rnd(basis.variant, 13)))
    assert np.allclose(LinkOperator.from_json(op.to_json()).matrix, op.matrix)


def test_json_stores_doubled_labels():
    obj = state_psi_lambda(SU2, 0.1).to_json()
    assert obj["two_l_max"] == 3
    assert {e[0] for e in obj["entries"]} == {0, 1, 2}


def test_position_ops_keys():
    assert set(position_ops(SU2)) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert set(position_ops(U1)) == {(0, 0)}


def test_bad_indices():
    with pytest.raises(IndexError):
        position_matrix(SU2, 1.5, 0.5)
    with pytest.raises(ValueError):
        LinkVector(U1, np.ones(3))
