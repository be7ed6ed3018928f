"""Directed gauge graphs, dense graph states and maximal-tree reduction.

Edges are named.  An edge ``e`` runs from ``source`` to ``target`` and its
link variable is ``T(source <- target)``.  A path is a list of
``(edge_name, sign)`` steps where ``sign = +1`` walks from source to target.

Gauge transformations act on position states as
``|U_e> -> |x_source U_e x_target^dag>``, which in the Fourier basis is
``L_{x_source} R_{x_target}`` on every link.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .gates import apply_local, controlled_rotation
from .group import Group, GroupElement, haar_random
from .link import Side, TruncatedLinkBasis, rotation_matrix, state_omega0

MAX_DENSE_COEFFS = 2 ** 26


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class GaugeGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        vs = tuple(str(v) for v in self.vertices)
        if len(set(vs)) != len(vs):
            raise GraphError("duplicate vertex names")
        es = tuple(self.edges)
        names = [e.name for e in es]
        if len(set(names)) != len(names):
            raise GraphError("duplicate edge names")
        known = set(vs)
        for e in es:
            if e.source not in known or e.target not in known:
                raise GraphError(f"edge {e.name} references an unknown vertex")
        object.__setattr__(self, "vertices", vs)
        object.__setattr__(self, "edges", es)

    @classmethod
    def build(cls, vertices, edges) -> "GaugeGraph":
        """``edges`` may be ``Edge`` objects or ``(name, source, target)`` triples."""
        return cls(tuple(vertices), tuple(e if isinstance(e, Edge) else Edge(*map(str, e)) for e in edges))

    @classmethod
    def grid(cls, nx: int, ny: int) -> "GaugeGraph":
        """Open ``nx x ny`` vertex grid with vertices ``"x,y"``."""
        vs = [f"{x},{y}" for x in range(nx) for y in range(ny)]
        es = []
        for x in range(nx):
            for y in range(ny):
                if x + 1 < nx:
                    es.append(Edge(f"h{x},{y}", f"{x},{y}", f"{x + 1},{y}"))
                if y + 1 < ny:
                    es.append(Edge(f"v{x},{y}", f"{x},{y}", f"{x},{y + 1}"))
        return cls(tuple(vs), tuple(es))

    @property
    def edge_names(self) -> list[str]:
        return [e.name for e in self.edges]

    def edge(self, name: str) -> Edge:
        for e in self.edges:
            if e.name == name:
                return e
        raise GraphError(f"no edge named {name!r}")

    def edge_index(self, name: str) -> int:
        for i, e in enumerate(self.edges):
            if e.name == name:
                return i
        raise GraphError(f"no edge named {name!r}")

    def with_edge(self, edge: Edge) -> "GaugeGraph":
        return replace(self, edges=tuple(edge if e.name == edge.name else e for e in self.edges))

    def components(self) -> list[list[str]]:
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
        seen, comps = set(), []
        for v in sorted(self.vertices):
            if v in seen:
                continue
            comp, todo = [], [v]
            seen.add(v)
            while todo:
                u = todo.pop()
                comp.append(u)
                for w in sorted(adj[u]):
                    if w not in seen:
                        seen.add(w)
                        todo.append(w)
            comps.append(sorted(comp))
        return comps

    def loop_count(self) -> int:
        return len(self.edges) - len(self.vertices) + len(self.components())

    def path_endpoints(self, path) -> tuple[str, str]:
        """Start and end vertex of a connected path; raises on a broken path."""
        path = list(path)
        if not path:
            raise GraphError("empty path has no endpoints")
        cur = start = None
        for name, s in path:
            e = self.edge(name)
            if s not in (1, -1):
                raise GraphError("traversal signs must be +1 or -1")
            a, b = (e.source, e.target) if s > 0 else (e.target, e.source)
            if cur is None:
                start = a
            elif cur != a:
                raise GraphError(f"path breaks at edge {name}")
            cur = b
        return start, cur

    def to_json(self) -> dict:
        return {"vertices": list(self.vertices),
                "edges": [{"name": e.name, "source": e.source, "target": e.target} for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "GaugeGraph":
        return cls.build(obj["vertices"], [(e["name"], e["source"], e["target"]) for e in obj["edges"]])


# ------------------------------------------------------------ classical layer

@dataclass(frozen=True)
class ClassicalConfig:
    graph: GaugeGraph
    links: dict = field(repr=False)

    def __post_init__(self):
        if set(self.links) != set(self.graph.edge_names):
            raise GraphError("configuration must assign every edge")
        variants = {u.variant for u in self.links.values()}
        if len(variants) > 1:
            raise GraphError("mixed group variants")


def transporter(config: ClassicalConfig, path) -> GroupElement:
    """``T(end <- start)`` along a signed path, multiplied right to left."""
    path = list(path)
    variant = next(iter(config.links.values())).variant
    out = GroupElement.identity(variant)
    if path:
        config.graph.path_endpoints(path)
    for name, s in path:
        u = config.links[name]
        out = (u.dagger() if s > 0 else u) * out
    return out


def wilson_loop(config: ClassicalConfig, path) -> complex:
    """Trace of the transporter around a closed path (the phase itself for U(1))."""
    path = list(path)
    if path:
        a, b = config.graph.path_endpoints(path)
        if a != b:
            raise GraphError("Wilson loop path is not closed")
    return transporter(config, path).trace()


# ------------------------------------------------------------------- states

@dataclass(frozen=True)
class GraphState:
    """Dense vector over the tensor product of one truncated link space per edge.

    ``tensor`` has one axis per edge, in the graph's edge order.
    """

    graph: GaugeGraph
    basis: TruncatedLinkBasis
    tensor: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=complex)
        want = (self.basis.dim,) * len(self.graph.edges)
        if t.shape != want:
            raise GraphError(f"state tensor has shape {t.shape}, expected {want}")
        object.__setattr__(self, "tensor", t)

    @classmethod
    def product(cls, graph: GaugeGraph, basis: TruncatedLinkBasis, vectors=None) -> "GraphState":
        """Product state; ``vectors`` maps edge names to coefficient arrays (default Haar state)."""
        check_dense(basis, len(graph.edges))
        vectors = vectors or {}
        t = np.ones(())
        for e in graph.edges:
            v = vectors.get(e.name)
            v = state_omega0(basis).coeffs if v is None else np.asarray(v, dtype=complex)
            t = np.multiply.outer(t, v)
        return cls(graph, basis, t)

    @classmethod
    def from_wavefunction(cls, graph, basis, fn) -> "GraphState":
        """Project ``fn`` (a function of a dict of edge angles, U(1) only) onto the basis.

        Uses an exact equispaced rule per edge.
        """
        if basis.variant is not Group.U1:
            raise NotImplementedError("wavefunction projection is implemented for U(1)")
        E = len(graph.edges)
        check_dense(basis, E)
        m = 2 * basis.cutoff + 1
        th = 2 * np.pi * np.arange(m) / m
        grids = np.meshgrid(*([th] * E), indexing="ij")
        vals = fn({e.name: g for e, g in zip(graph.edges, grids)})
        coef = np.fft.fftn(vals) / m ** E
        # the coefficient of exp(i n theta) sits at FFT index n mod m
        idx = [n % m for n in basis.labels]
        return cls(graph, basis, coef[np.ix_(*([idx] * E))])

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))

    def vector(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    def axis(self, edge: str) -> int:
        return self.graph.edge_index(edge)


def check_dense(basis: TruncatedLinkBasis, n_edges: int) -> None:
    if basis.dim ** n_edges > MAX_DENSE_COEFFS:
        raise GraphError(f"dense state of {basis.dim}^{n_edges} coefficients exceeds the guard")


def random_gauge(graph: GaugeGraph, variant, rng) -> dict:
    return {v: GroupElement.from_array(variant, haar_random(variant, rng)) for v in graph.vertices}


def gauge_transform(obj, x: dict):
    """Apply vertex group elements to a :class:`ClassicalConfig` or :class:`GraphState`."""
    if isinstance(obj, ClassicalConfig):
        links = {e.name: x[e.source] * obj.links[e.name] * x[e.target].dagger() for e in obj.graph.edges}
        return ClassicalConfig(obj.graph, links)
    t = obj.tensor
    for i, e in enumerate(obj.graph.edges):
        op = rotation_matrix(obj.basis, Side.LEFT, x[e.source]) @ rotation_matrix(obj.basis, Side.RIGHT, x[e.target])
        t = apply_local(t, op, [i])
    return GraphState(obj.graph, obj.basis, t)


def gauge_invariance_defect(state: GraphState, trials: int = 8, seed: int = 0) -> float:
    """Largest ``||T_x psi - psi||`` over random gauge transformations ``x``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(trials)):
        x = random_gauge(state.graph, state.basis.variant, rng)
        worst = max(worst, float(np.linalg.norm(gauge_transform(state, x).tensor - state.tensor)))
    return worst


# ----------------------------------------------------------------- transport

_GATE_CACHE: dict = {}


def _transport_gate(basis: TruncatedLinkBasis, side: Side, dagger: bool) -> np.ndarray:
    key = (basis.variant, basis.cutoff, side, dagger)
    if key not in _GATE_CACHE:
        _GATE_CACHE[key] = controlled_rotation(basis, side, dagger)
    return _GATE_CACHE[key]


def controlled_transport(state: GraphState, path, target_edge: str, end: str) -> GraphState:
    """Move one end of ``target_edge`` along ``path``, rotating its link accordingly.

    ``end`` is ``"source"`` or ``"target"``; ``path`` must start at that end.
    Each step ``(c, s)`` applies ``L_{U_c^{-s}}`` (moving the source) or
    ``R_{U_c^{-s}}`` (moving the target) to the target edge, controlled on ``c``.
    """
    path = list(path)
    g = state.graph
    e = g.edge(target_edge)
    if end not in ("source", "target"):
        raise GraphError("end must be 'source' or 'target'")
    if not path:
        return state
    start, stop = g.path_endpoints(path)
    here = e.source if end == "source" else e.target
    if start != here:
        raise GraphError(f"path starts at {start}, but the {end} of {target_edge} is {here}")
    if any(name == target_edge for name, _ in path):
        raise GraphError("a link cannot control its own transport")
    side = Side.LEFT if end == "source" else Side.RIGHT
    t = state.tensor
    ti = g.edge_index(target_edge)
    for name, s in path:
        gate = _transport_gate(state.basis, side, dagger=s > 0)
        t = apply_local(t, gate, [g.edge_index(name), ti])
    moved = Edge(e.name, stop, e.target) if end == "source" else Edge(e.name, e.source, stop)
    return GraphState(g.with_edge(moved), state.basis, t)


def add_edge(state: GraphState, edge: Edge, vector=None) -> GraphState:
    """Adjoin a new edge (with its endpoints, creating a missing vertex) in a product state."""
    g = state.graph
    vs = list(g.vertices)
    for v in (edge.source, edge.target):
        if v not in vs:
            vs.append(v)
    check_dense(state.basis, len(g.edges) + 1)
    v = state_omega0(state.basis).coeffs if vector is None else np.asarray(vector, dtype=complex)
    return GraphState(GaugeGraph(tuple(vs), g.edges + (edge,)), state.basis,
                      np.multiply.outer(state.tensor, v))


def project_edge(state: GraphState, edge_name: str, drop_vertex: str | None = None) -> GraphState:
    """Contract an edge with ``<omega_0|`` and remove it (and optionally a vertex)."""
    g = state.graph
    i = g.edge_index(edge_name)
    w = state_omega0(state.basis).coeffs.conj()
    t = np.tensordot(state.tensor, w, axes=([i], [0]))
    edges = tuple(e for e in g.edges if e.name != edge_name)
    vs = tuple(v for v in g.vertices if v != drop_vertex)
    if drop_vertex is not None and any(drop_vertex in (e.source, e.target) for e in edges):
        raise GraphError(f"vertex {drop_vertex} still has edges")
    return GraphState(GaugeGraph(vs, edges), state.basis, t)


def edge_subdivide(state: GraphState, edge_name: str, new_vertex: str | None = None,
                   new_edge: str | None = None) -> GraphState:
    """Split ``edge_name`` (``v -> w``) into ``new_edge: v -> m`` and ``edge_name: m -> w``.

    The new link starts in the Haar state and the old link's source is
    transported onto the new vertex, ``|U'>|U> -> |U'>|U'^dag U>``.
    """
    e = state.graph.edge(edge_name)
    m = new_vertex or f"{edge_name}.mid"
    ne = new_edge or f"{edge_name}.a"
    if m in state.graph.vertices:
        raise GraphError(f"vertex {m} already exists")
    grown = add_edge(state, Edge(ne, e.source, m))
    return controlled_transport(grown, [(ne, 1)], edge_name, "source")


def edge_contract(state: GraphState, edge_name: str, new_edge: str) -> GraphState:
    """Undo :func:`edge_subdivide`: glue ``new_edge`` back onto ``edge_name``."""
    g = state.graph
    ne, e = g.edge(new_edge), g.edge(edge_name)
    mid = ne.target
    if e.source != mid:
        raise GraphError("edges do not meet at a subdivision vertex")
    incident = [x for x in g.edges if mid in (x.source, x.target)]
    if len(incident) != 2:
        raise GraphError(f"vertex {mid} is not of degree two")
    back = controlled_transport(state, [(new_edge, -1)], edge_name, "source")
    return project_edge(back, new_edge, drop_vertex=mid)


# ------------------------------------------------------------ petal reduction

def spanning_tree(graph: GaugeGraph) -> tuple[str, dict, list[str]]:
    """BFS tree from the lexicographically smallest vertex.

    Returns the root, a map ``vertex -> (edge, parent)`` and the BFS order.
    """
    comps = graph.components()
    if len(comps) != 1:
        raise GraphError(f"graph is disconnected; components: {comps}")
    root = min(graph.vertices)
    parent, order = {}, [root]
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for e in graph.edges:
            if e.source == e.target:
                continue
            if e.source == u and e.target not in seen:
                w = e.target
            elif e.target == u and e.source not in seen:
                w = e.source
            else:
                continue
            seen.add(w)
            parent[w] = (e.name, u)
            order.append(w)
            queue.append(w)
    return root, parent, order


def _path_to_root(graph: GaugeGraph, parent: dict, v: str) -> list[tuple[str, int]]:
    path = []
    while v in parent:
        name, up = parent[v]
        e = graph.edge(name)
        path.append((name, 1 if e.source == v else -1))
        v = up
    return path


def reduce_to_petal(graph: GaugeGraph):
    """Gate sequence taking any state on ``graph`` to a single-vertex petal graph.

    Every off-tree edge has its source and then its target transported along
    the tree to the root; afterwards the tree edges are removed leaf by leaf.

    Returns
    -------
    gates : list of dict
        JSON-ready gate records, see :func:`apply_gates`.
    petal : GaugeGraph
    root : str
    """
    root, parent, order = spanning_tree(graph)
    tree = {name for name, _ in parent.values()}
    gates = []
    current = graph
    for e in graph.edges:
        if e.name in tree:
            continue
        for end in ("source", "target"):
            v = getattr(current.edge(e.name), end)
            path = _path_to_root(current, parent, v)
            if not path:
                continue
            gates.append({"gate": "transport", "control": [[n, s] for n, s in path],
                          "target": e.name, "end": end, "from": v, "to": root})
            moved = Edge(e.name, root, current.edge(e.name).target) if end == "source" \
                else Edge(e.name, current.edge(e.name).source, root)
            current = current.with_edge(moved)
    for v in reversed(order[1:]):
        name, _ = parent[v]
        gates.append({"gate": "remove_leaf", "edge": name, "vertex": v})
    petal = GaugeGraph((root,), tuple(current.edge(e.name) for e in graph.edges if e.name not in tree))
    return gates, petal, root


def apply_gates(state: GraphState, gates) -> GraphState:
    """Replay a gate sequence produced by :func:`reduce_to_petal`."""
    for g in gates:
        kind = g["gate"]
        if kind == "transport":
            state = controlled_transport(state, [(n, int(s)) for n, s in g["control"]], g["target"], g["end"])
        elif kind == "remove_leaf":
            state = project_edge(state, g["edge"], drop_vertex=g["vertex"])
        else:
            raise GraphError(f"unknown gate {kind!r}")
    return state


def apply_gates_to_graph(graph: GaugeGraph, gates) -> GaugeGraph:
    """Track only the graph relabelling of a gate sequence."""
    for g in gates:
        if g["gate"] == "transport":
            e = graph.edge(g["target"])
            moved = Edge(e.name, g["to"], e.target) if g["end"] == "source" else Edge(e.name, e.source, g["to"])
            graph = graph.with_edge(moved)
        else:
            edges = tuple(e for e in graph.edges if e.name != g["edge"])
            graph = GaugeGraph(tuple(v for v in graph.vertices if v != g["vertex"]), edges)
    return graph


def gates_json(gates, petal: GaugeGraph, root: str) -> str:
    return json.dumps({"root": root, "petal": petal.to_json(), "gates": gates}, indent=2)

