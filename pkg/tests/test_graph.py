import json

import numpy as np
import pytest

from gaugeinterp.graph import (
    ClassicalConfig, Edge, GaugeGraph, GraphError, GraphState, apply_gates, apply_gates_to_graph,
    controlled_transport, edge_contract, edge_subdivide, gauge_invariance_defect, gauge_transform,
    gates_json, random_gauge, reduce_to_petal, spanning_tree, transporter, wilson_loop,
)
from gaugeinterp.group import Group, GroupElement, random_element
from gaugeinterp.link import TruncatedLinkBasis, identity_vector, state_omega0

U1 = TruncatedLinkBasis.u1(1)
SU2 = TruncatedLinkBasis.su2(0.5)


def loop_graph():
    return GaugeGraph.build(["a"], [("l", "a", "a")])


def plaquette_angle(th, x, y):
    return th[f"h{x},{y}"] + th[f"v{x + 1},{y}"] - th[f"h{x},{y + 1}"] - th[f"v{x},{y}"]


def invariant_grid_state(nx, ny, seed=0):
    """``1 + sum_p (c_p e^{i theta_p} + c.c.)``: gauge invariant and inside |n| <= 1."""
    g = GaugeGraph.grid(nx, ny)
    rng = np.random.default_rng(seed)
    cs = {(x, y): rng.standard_normal() + 1j * rng.standard_normal()
          for x in range(nx - 1) for y in range(ny - 1)}

    def fn(th):
        out = np.ones_like(next(iter(th.values())), dtype=complex)
        for (x, y), c in cs.items():
            a = plaquette_angle(th, x, y)
            out = out + c * np.exp(1j * a) + np.conj(c) * np.exp(-1j * a)
        return out

    st = GraphState.from_wavefunction(g, U1, fn)
    return GraphState(g, U1, st.tensor / st.norm())


def evaluate_u1(state, angles):
    """Wavefunction of a U(1) graph state at one configuration."""
    t = state.tensor
    ns = np.array(state.basis.labels)
    for name in state.graph.edge_names:
        t = np.tensordot(np.exp(1j * ns * angles[name]), t, axes=([0], [0]))
    return complex(t)


def test_grid_counts():
    g = GaugeGraph.grid(3, 3)
    assert len(g.vertices) == 9 and len(g.edges) == 12
    assert g.loop_count() == 4


def test_graph_validation():
    with pytest.raises(GraphError):
        GaugeGraph.build(["a"], [("e", "a", "b")])
    with pytest.raises(GraphError):
        GaugeGraph.build(["a", "a"], [])


def test_graph_json_round_trip():
    g = GaugeGraph.grid(2, 3)
    assert GaugeGraph.from_json(json.loads(json.dumps(g.to_json()))) == g


def test_path_endpoints():
    g = GaugeGraph.grid(2, 2)
    assert g.path_endpoints([("h0,0", 1), ("v1,0", 1)]) == ("0,0", "1,1")
    with pytest.raises(GraphError):
        g.path_endpoints([("h0,0", 1), ("h0,1", 1)])


def test_classical_wilson_loops():
    g = GaugeGraph.grid(2, 2)
    rng = np.random.default_rng(0)
    flat = ClassicalConfig(g, {e: GroupElement.identity("su2") for e in g.edge_names})
    loop = [("h0,0", 1), ("v1,0", 1), ("h0,1", -1), ("v0,0", -1)]
    assert np.isclose(wilson_loop(flat, loop), 2)
    cfg = ClassicalConfig(g, {e: random_element("su2", rng) for e in g.edge_names})
    w = wilson_loop(cfg, loop)
    assert np.isclose(w, wilson_loop(cfg, loop[1:] + loop[:1]), atol=1e-12)
    x = random_gauge(g, Group.SU2, rng)
    assert np.isclose(w, wilson_loop(gauge_transform(cfg, x), loop), atol=1e-12)
    ident = {v: GroupElement.identity("su2") for v in g.vertices}
    same = gauge_transform(cfg, ident)
    assert all(np.allclose(same.links[e].array, cfg.links[e].array) for e in g.edge_names)


def test_single_plaquette_trace():
    g = loop_graph()
    phi = 0.9
    u = GroupElement.su2(np.cos(phi), np.sin(phi))
    cfg = ClassicalConfig(g, {"l": u})
    assert np.isclose(wilson_loop(cfg, [("l", 1)]), 2 * np.cos(phi))
    assert np.allclose(transporter(cfg, [("l", -1)]).array, u.array)


def test_haar_product_is_invariant():
    g = GaugeGraph.grid(2, 2)
    st = GraphState.product(g, SU2)
    assert gauge_invariance_defect(st) <= 1e-10


def test_character_state_is_invariant_but_matrix_element_is_not():
    g = loop_graph()
    chi = GraphState(g, SU2, identity_vector(SU2, 1))
    assert gauge_invariance_defect(chi) <= 1e-10
    single = np.zeros(SU2.dim, complex)
    single[SU2.index(1, 0, 1)] = 1
    assert gauge_invariance_defect(GraphState(g, SU2, single)) > 1e-3


def test_invariant_grid_state():
    assert gauge_invariance_defect(invariant_grid_state(2, 3)) <= 1e-10


def test_empty_transport_is_identity():
    st = GraphState.product(loop_graph(), SU2)
    assert controlled_transport(st, [], "l", "source") is st


def test_transport_moves_loop_and_stays_invariant():
    g = GaugeGraph.build(["a", "b"], [("p", "a", "b"), ("l", "a", "a")])
    for vec in (state_omega0(SU2).coeffs, identity_vector(SU2, 1)):
        st = GraphState.product(g, SU2, {"l": vec})
        moved = controlled_transport(st, [("p", 1)], "l", "source")
        assert moved.graph.edge("l") == Edge("l", "b", "a")
        assert gauge_invariance_defect(moved) <= 1e-10


def test_transport_matches_classical_action():
    # psi(a, b) = 1 + e^{ib}; moving the source of l along p gives psi(a, a + b)
    g = GaugeGraph.build(["a", "b"], [("p", "a", "b"), ("l", "a", "a")])
    st = GraphState.from_wavefunction(g, U1, lambda th: 1 + np.exp(1j * th["l"]))
    moved = controlled_transport(st, [("p", 1)], "l", "source")
    rng = np.random.default_rng(1)
    for _ in range(5):
        a, b = rng.uniform(0, 2 * np.pi, 2)
        assert np.isclose(evaluate_u1(moved, {"p": a, "l": b}), 1 + np.exp(1j * (a + b)), atol=1e-10)


def test_transport_errors():
    g = GaugeGraph.build(["a", "b"], [("p", "a", "b"), ("l", "a", "a")])
    st = GraphState.product(g, U1)
    with pytest.raises(GraphError):
        controlled_transport(st, [("p", -1)], "l", "source")
    with pytest.raises(GraphError):
        controlled_transport(st, [("l", 1)], "l", "source")


def test_subdivide_fixed_point_and_inverse():
    g = GaugeGraph.grid(2, 2)
    st = GraphState.product(g, SU2)
    fine = edge_subdivide(st, "h0,0")
    assert len(fine.graph.edges) == 5
    assert np.isclose(abs(np.vdot(fine.vector(), GraphState.product(fine.graph, SU2).vector())), 1)
    back = edge_contract(fine, "h0,0", "h0,0.a")
    assert back.graph == g
    assert np.allclose(back.tensor, st.tensor, atol=1e-9)


def test_subdivide_preserves_norm_and_invariance():
    st = invariant_grid_state(2, 2, seed=3)
    # the state only uses |n| <= 1 on each edge; raise the cutoff so transport stays inside
    big = TruncatedLinkBasis.u1(2)
    t = np.zeros((5,) * 4, complex)
    t[1:4, 1:4, 1:4, 1:4] = st.tensor
    st = GraphState(st.graph, big, t)
    fine = edge_subdivide(st, "v0,0")
    assert abs(fine.norm() - 1) < 1e-9
    assert gauge_invariance_defect(fine) <= 1e-9
    assert np.allclose(edge_contract(fine, "v0,0", "v0,0.a").tensor, st.tensor, atol=1e-9)


def test_spanning_tree_is_deterministic():
    g = GaugeGraph.grid(3, 3)
    root, parent, order = spanning_tree(g)
    assert root == "0,0" and len(parent) == 8 and order[0] == "0,0"
    assert spanning_tree(g) == (root, parent, order)


def test_petal_of_single_loop_is_itself():
    gates, petal, root = reduce_to_petal(loop_graph())
    assert gates == [] and petal == loop_graph() and root == "a"


def test_petal_of_grid():
    gates, petal, root = reduce_to_petal(GaugeGraph.grid(3, 3))
    assert len(petal.edges) == 4 and petal.vertices == ("0,0",)
    assert all(e.source == e.target == root for e in petal.edges)
    assert apply_gates_to_graph(GaugeGraph.grid(3, 3), gates) == petal
    obj = json.loads(gates_json(gates, petal, root))
    assert obj["root"] == root and len(obj["gates"]) == len(gates)


def test_petal_of_tree_is_scalar():
    tree = GaugeGraph.build(["a", "b", "c"], [("e1", "a", "b"), ("e2", "b", "c")])
    gates, petal, root = reduce_to_petal(tree)
    assert len(petal.edges) == 0
    out = apply_gates(GraphState.product(tree, SU2), gates)
    assert out.tensor.shape == ()
    assert np.isclose(abs(out.tensor), 1)


def test_disconnected_graph_is_rejected():
    g = GaugeGraph.build(["a", "b"], [])
    with pytest.raises(GraphError, match="components"):
        reduce_to_petal(g)


def test_petal_reduction_preserves_norm_small_grid():
    st = invariant_grid_state(2, 3, seed=2)
    gates, petal, _ = reduce_to_petal(st.graph)
    out = apply_gates(st, gates)
    assert out.graph == petal
    assert abs(out.norm() - 1) < 1e-9
