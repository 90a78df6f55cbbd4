"""Controllability graph over assignable equilibria: basin and transit edges,
strongly connected components, mode-switch route planning, and the recursive
box-refinement density probe.

Basin edges are exact rational tests and do not depend on the velocity
coefficients; transit edges follow simulated trajectories and do.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .dynamics import check_mode, flow_exact
from .equilibria import (
    Coords,
    EquilibriumNode,
    Region,
    RoaBox,
    assignable_equilibria,
    coords_key,
    equilibrium_coords,
    locate_roa,
    roa_box,
)


class UnreachableError(Exception):
    """No path between the requested equilibria in this graph."""


class InternalInvariantError(AssertionError):
    """A schedule or window failed its own declared guarantee."""


@dataclass(frozen=True)
class CtrlEdge:
    """Directed edge src -> dst.

    kind "basin": src lies strictly inside the mode-`mode` basin of dst.
    kind "transit": driving src with `transit_mode` puts the trajectory
    strictly inside the mode-`mode` basin of dst for every t in `window`;
    switching to `mode` anywhere in the window captures dst.
    """

    src: Coords
    dst: Coords
    kind: str
    mode: int
    transit_mode: int | None = None
    window: tuple[float, float] | None = None


@dataclass
class CtrlGraph:
    nodes: dict[Coords, EquilibriumNode]
    edges: list[CtrlEdge]
    max_mode: int
    region: Region | None = None

    def successors(self) -> dict[Coords, list[CtrlEdge]]:
        adj: dict[Coords, list[CtrlEdge]] = {c: [] for c in self.nodes}
        for e in self.edges:
            adj[e.src].append(e)
        for lst in adj.values():
            lst.sort(key=lambda e: (e.dst, e.kind, e.mode, e.transit_mode or 0))
        return adj

    def edge_pairs(self) -> set[tuple[Coords, Coords]]:
        return {(e.src, e.dst) for e in self.edges}

    def extended(self, extra: list[CtrlEdge]) -> "CtrlGraph":
        """New graph with additional edges; endpoints must already be nodes."""
        for e in extra:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"edge endpoint not in graph: {e.src} -> {e.dst}")
        return CtrlGraph(self.nodes, self.edges + list(extra), self.max_mode, self.region)


def build_basin_graph(N: int, n: int, region: Region | None = None) -> CtrlGraph:
    """Step-1 graph: edge p -> q with mode k iff p lies strictly inside R_k(q).

    Because the mode-k boxes partition the cube, each node has at most one
    basin target per mode: the midpoint of its containing cell. Self-loops
    are excluded.
    """
    nodes = {node.coords: node for node in assignable_equilibria(N, n, region)}
    edges: list[CtrlEdge] = []
    for coords in nodes:
        for k in range(1, N + 1):
            cell = locate_roa(coords, k)
            if cell is None:
                continue
            target = equilibrium_coords(k, cell)
            if target == coords or target not in nodes:
                continue
            edges.append(CtrlEdge(src=coords, dst=target, kind="basin", mode=k))
    return CtrlGraph(nodes=nodes, edges=edges, max_mode=N, region=region)


def _closure_mask(states: np.ndarray, region: Region) -> np.ndarray:
    lo = np.array([float(b[0]) for b in region.bounds])
    hi = np.array([float(b[1]) for b in region.bounds])
    ok = np.all((states >= lo) & (states <= hi), axis=1)
    if region.below_diagonal:
        ok &= np.all(states[:, :-1] >= states[:, 1:], axis=1)
    return ok


def _bisect_window_edge(x0, u, A, box_lo, box_hi, t_out, t_in, want_entry, tol=1e-9):
    """Bisect the boundary-crossing time of strict box membership."""

    def inside(t):
        x = flow_exact(x0, u, A, t)
        return bool(np.all((x > box_lo) & (x < box_hi)))

    lo, hi = (t_out, t_in) if want_entry else (t_in, t_out)
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if inside(mid) == want_entry:
            hi = mid
        else:
            lo = mid
    return hi if want_entry else lo


def discover_transit_edges(
    g: CtrlGraph,
    A,
    transit_modes,
    horizon: float | None = None,
    dt_sample: float | None = None,
    sources=None,
    refine: bool = True,
) -> list[CtrlEdge]:
    """Systematic transit-edge discovery by trajectory sampling.

    From each source node and each transit mode u, the exact flow is sampled
    on a uniform grid; every sampled state strictly inside some R_k(q) with
    q a graph node other than the source yields a transit edge whose window
    is the maximal sampled sub-interval inside that box (refined to 1e-9 by
    bisection when `refine`). With a region filter, trajectories are only
    followed while they stay inside the closed region.
    """
    A = np.asarray(A, dtype=float)
    if horizon is None:
        horizon = 12.0 / float(np.min(np.abs(A)))
    if dt_sample is None:
        dt_sample = horizon / 2000.0
    n_steps = max(2, int(round(horizon / dt_sample)))
    ts = np.arange(n_steps + 1) * dt_sample

    if sources is None:
        sources = sorted(g.nodes)
    else:
        sources = [s.coords if isinstance(s, EquilibriumNode) else tuple(s) for s in sources]

    best: dict[tuple, tuple[int, int]] = {}  # (src,dst,u,k) -> sample index window
    trajs: dict[tuple, np.ndarray] = {}
    for src in sources:
        x0 = np.array([float(c) for c in src])
        for u in sorted(set(transit_modes)):
            u = check_mode(u)
            states = flow_exact(x0, u, A, ts)
            if g.region is not None:
                ok = _closure_mask(states, g.region)
                bad = np.flatnonzero(~ok)
                if bad.size and bad[0] == 0:
                    continue
                if bad.size:
                    states = states[: bad[0]]
            trajs[(src, u)] = states
            if states.shape[0] < 2:
                continue
            body = states[1:]  # t=0 can sit exactly on cell boundaries
            for k in range(1, g.max_mode + 1):
                v = body * k
                cells = np.floor(v).astype(np.int64) + 1
                # a saturated flow can land exactly on a cell boundary, which
                # floor() would misfile as strictly inside the upper cell
                cells[np.any(v == np.floor(v), axis=1)] = 0
                breaks = np.flatnonzero(np.any(cells[1:] != cells[:-1], axis=1))
                starts = np.concatenate(([0], breaks + 1))
                ends = np.concatenate((breaks, [cells.shape[0] - 1]))
                for a, b in zip(starts, ends):
                    idx = cells[a]
                    if np.any(idx < 1) or np.any(idx > k):
                        continue
                    dst = equilibrium_coords(k, tuple(int(i) for i in idx))
                    if dst == src or dst not in g.nodes:
                        continue
                    key = (src, dst, u, k)
                    if key not in best or (b - a) > (best[key][1] - best[key][0]):
                        best[key] = (a + 1, b + 1)  # back to whole-trajectory indices

    edges = []
    for (src, dst, u, k), (ia, ib) in sorted(best.items()):
        states = trajs[(src, u)]
        t_lo, t_hi = ts[ia], ts[ib]
        if refine:
            x0 = np.array([float(c) for c in src])
            box = roa_box(k, g.nodes[dst].witness_for_mode(k))
            blo = np.array([float(v) for v in box.lower])
            bhi = np.array([float(v) for v in box.upper])
            if ia >= 1:
                prev = ts[ia - 1]
                if ia == 1 and box.contains(src):
                    t_lo = 0.0
                else:
                    t_lo = _bisect_window_edge(x0, u, A, blo, bhi, prev, ts[ia], True)
            if ib < states.shape[0] - 1:
                t_hi = _bisect_window_edge(x0, u, A, blo, bhi, ts[ib + 1], ts[ib], False)
        edges.append(
            CtrlEdge(src=src, dst=dst, kind="transit", mode=k, transit_mode=u,
                     window=(float(t_lo), float(t_hi)))
        )
    return edges


@dataclass(frozen=True)
class SccDecomposition:
    """Partition into strongly connected components plus the condensation DAG."""

    components: tuple[tuple[Coords, ...], ...]
    condensation: tuple[tuple[int, int], ...]

    @property
    def count(self) -> int:
        return len(self.components)

    def component_index(self) -> dict[Coords, int]:
        return {c: i for i, comp in enumerate(self.components) for c in comp}


def tarjan_scc(nodes, successors) -> list[list]:
    """Iterative Tarjan over hashable nodes; successors maps node -> iterable."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = itertools.count()

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def scc_decompose(g: CtrlGraph) -> SccDecomposition:
    """Maximal strongly connected components, ordered by smallest node id."""
    adj = g.successors()
    order = sorted(g.nodes)
    raw = tarjan_scc(order, lambda v: [e.dst for e in adj[v]])
    comps = sorted(tuple(sorted(c)) for c in raw)
    which = {c: i for i, comp in enumerate(comps) for c in comp}
    cond = set()
    for e in g.edges:
        a, b = which[e.src], which[e.dst]
        if a != b:
            cond.add((a, b))
    return SccDecomposition(components=tuple(comps), condensation=tuple(sorted(cond)))


@dataclass(frozen=True)
class ModeSchedule:
    """Executable realization of a graph path: dwell on each mode in turn."""

    steps: tuple[tuple[int, float], ...]
    tolerance: float

    def execute(self, x0, A) -> np.ndarray:
        x = np.asarray(x0, dtype=float)
        for u, dwell in self.steps:
            x = flow_exact(x, u, A, dwell)
        return x


def _capture_dwell(x: np.ndarray, k: int, A: np.ndarray, tol: float) -> float:
    """Closed-form time until the mode-k flow from x is within tol of its target.

    Per coordinate |x(t) - mid| <= exp(-L(t)) / (pi k), so solve for the L
    that meets a per-coordinate budget of tol/2.
    """
    y = k * x
    s = y - np.floor(y)
    moving = (s != 0.0) & (s != 0.5)
    if not np.any(moving):
        return 0.0
    budget = tol / 2.0
    log_tan = np.log(np.abs(np.tan(np.pi * np.where(moving, s, 0.25))))
    need = -np.log(np.pi * k * budget)
    dwell = (need - log_tan) / (2.0 * np.pi * A * k * k)
    return float(max(1.05 * np.max(dwell[moving]), 0.0)) + 1e-12


def plan_route(g: CtrlGraph, src: Coords, dst: Coords, A, tolerance: float = 1e-6) -> ModeSchedule:
    """BFS shortest edge path realized as an executable mode schedule.

    Basin edges dwell until the closed-form flow is within tolerance of the
    edge target; transit edges dwell to the midpoint of their switch window
    and are then captured by the edge mode.
    """
    A = np.asarray(A, dtype=float)
    src, dst = tuple(src), tuple(dst)
    if src not in g.nodes or dst not in g.nodes:
        raise KeyError("route endpoints must be graph nodes")
    if src == dst:
        return ModeSchedule(steps=(), tolerance=tolerance)

    adj = g.successors()
    prev: dict[Coords, CtrlEdge] = {}
    seen = {src}
    frontier = [src]
    while frontier and dst not in seen:
        nxt = []
        for v in frontier:
            for e in adj[v]:
                if e.dst not in seen:
                    seen.add(e.dst)
                    prev[e.dst] = e
                    nxt.append(e.dst)
        frontier = nxt
    if dst not in seen:
        raise UnreachableError(f"{coords_key(src)} cannot reach {coords_key(dst)}")

    path: list[CtrlEdge] = []
    cur = dst
    while cur != src:
        e = prev[cur]
        path.append(e)
        cur = e.src
    path.reverse()

    steps: list[tuple[int, float]] = []
    x = np.array([float(c) for c in src])
    for e in path:
        if e.kind == "transit":
            mid = 0.5 * (e.window[0] + e.window[1])
            steps.append((e.transit_mode, mid))
            x = flow_exact(x, e.transit_mode, A, mid)
        dwell = _capture_dwell(x, e.mode, A, tolerance)
        if dwell > 0.0:
            steps.append((e.mode, dwell))
            x = flow_exact(x, e.mode, A, dwell)
    target = np.array([float(c) for c in dst])
    if np.max(np.abs(x - target)) > tolerance:
        raise InternalInvariantError(
            f"schedule missed target by {np.max(np.abs(x - target)):.3e}"
        )
    return ModeSchedule(steps=tuple(steps), tolerance=tolerance)


def density_probe(
    region_box: RoaBox,
    depth: int,
    A=(1.0, 4.0),
    intra_base: int = 18,
    connector_base: int = 9,
    transit: bool = True,
) -> SccDecomposition:
    """Finite-depth reachability refinement inside one mode-2 basin cell.

    Level l splits the cell into 4^l sub-boxes; edges within a sub-box may
    use modes up to intra_base * 2^(l-1), edges across sub-boxes only modes
    up to connector_base * 2^(l-1). Transit edges are discovered from the
    diagonal nodes, which cannot leave the diagonal through basin edges
    alone. Returns the decomposition at the finest level.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    n = len(region_box.indices)
    region = Region(bounds=tuple(zip(region_box.lower, region_box.upper)))

    if depth == 0:
        return scc_decompose(build_basin_graph(connector_base, n, region))

    decomposition = None
    for level in range(1, depth + 1):
        intra = intra_base * 2 ** (level - 1)
        connector = connector_base * 2 ** (level - 1)
        splits = 2**level
        cell_w = (region_box.upper[0] - region_box.lower[0]) / splits

        def box_of(coords) -> tuple[int, ...] | None:
            idx = []
            for c, lo in zip(coords, region_box.lower):
                q = (Fraction(c) - lo) / cell_w
                if q.denominator == 1:  # on a dividing line
                    return None
                idx.append(int(q))
            return tuple(idx)

        all_nodes = assignable_equilibria(intra, n, region)
        nodes = {}
        boxes = {}
        for node in all_nodes:
            b = box_of(node.coords)
            if b is not None:
                nodes[node.coords] = node
                boxes[node.coords] = b

        edges: list[CtrlEdge] = []
        for coords in nodes:
            for k in range(1, intra + 1):
                cell = locate_roa(coords, k)
                if cell is None:
                    continue
                target = equilibrium_coords(k, cell)
                if target == coords or target not in nodes:
                    continue
                if boxes[coords] != boxes[target] and k > connector:
                    continue
                edges.append(CtrlEdge(src=coords, dst=target, kind="basin", mode=k))

        g = CtrlGraph(nodes=nodes, edges=edges, max_mode=intra, region=region)
        if transit:
            diag = [c for c, node in nodes.items() if node.is_diagonal()]
            found = discover_transit_edges(
                g, A, transit_modes=range(1, intra + 1), sources=diag, refine=False
            )
            kept = [
                e for e in found
                if boxes[e.src] == boxes[e.dst] or max(e.mode, e.transit_mode) <= connector
            ]
            g = g.extended(kept)
        decomposition = scc_decompose(g)
    return decomposition


def graph_to_dot(g: CtrlGraph) -> str:
    """DOT rendering: nodes labeled by reduced rational coordinates."""
    lines = ["digraph controllability {"]
    for coords in sorted(g.nodes):
        lines.append(f'  "{coords_key(coords)}";')
    for e in sorted(g.edges, key=lambda e: (e.src, e.dst, e.kind, e.mode, e.transit_mode or 0)):
        attrs = [f'kind="{e.kind}"', f"mode={e.mode}"]
        if e.transit_mode is not None:
            attrs.append(f"transit_mode={e.transit_mode}")
        if e.window is not None:
            attrs.append(f'window="{e.window[0]!r},{e.window[1]!r}"')
        lines.append(f'  "{coords_key(e.src)}" -> "{coords_key(e.dst)}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json_dict(g: CtrlGraph) -> dict:
    return {
        "max_mode": g.max_mode,
        "node_count": len(g.nodes),
        "edge_count": len(g.edges),
        "nodes": [
            {
                "id": coords_key(c),
                "coords": [str(v) for v in c],
                "witnesses": sorted([k, list(idx)] for k, idx in node.witnesses),
            }
            for c, node in sorted(g.nodes.items())
        ],
        "edges": [
            {
                "from": coords_key(e.src),
                "to": coords_key(e.dst),
                "kind": e.kind,
                "mode": e.mode,
                "transit_mode": e.transit_mode,
                "window": list(e.window) if e.window else None,
            }
            for e in sorted(g.edges, key=lambda e: (e.src, e.dst, e.kind, e.mode, e.transit_mode or 0))
        ],
    }


def scc_to_json_dict(d: SccDecomposition) -> dict:
    return {
        "component_count": d.count,
        "components": [[coords_key(c) for c in comp] for comp in d.components],
        "condensation": [list(pair) for pair in d.condensation],
    }
