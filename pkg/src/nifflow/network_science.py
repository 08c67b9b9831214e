"""Betweenness centrality and modularity communities on weighted graphs.

The modularity of a partition at resolution gamma is

    Q = (1/2m) * sum_ij [A_ij - (1/gamma) * k_i * k_j / (2m)] * delta(g_i, g_j)

summed over ordered node pairs. Note the resolution enters as 1/gamma, so
*lower* gamma strengthens the null model and splits the graph into more,
smaller communities; this is the inverse of the convention used by some
community-detection libraries.

Betweenness accumulates over unordered source/target pairs on undirected
graphs and ordered pairs on directed graphs. For flow graphs, strong edges
should act as short links, so the default traversal length of an edge is the
inverse of its weight; zero-weight edges are non-traversable in that mode.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WeightedGraph",
    "CommunityAssignment",
    "betweenness",
    "modularity",
    "detect_communities",
]

EDGE_LENGTH_MODES = ("inverse_weight", "unit")


@dataclass
class WeightedGraph:
    """Edge-list graph with nonnegative weights; nodes are any hashable ids."""

    nodes: list
    edges: list
    directed: bool = False

    def __post_init__(self):
        seen = set(self.nodes)
        if len(seen) != len(self.nodes):
            raise ValueError("duplicate node ids")
        for u, v, w in self.edges:
            if u not in seen or v not in seen:
                raise ValueError(f"edge ({u!r}, {v!r}) references a missing node")
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"edge ({u!r}, {v!r}) has invalid weight {w!r}")


@dataclass
class CommunityAssignment:
    """Node-to-community map with its modularity score."""

    assignment: dict
    modularity: float
    gamma: float

    @property
    def community_count(self) -> int:
        return len(set(self.assignment.values()))


# ---------------------------------------------------------------------------
# betweenness (Brandes accumulation over Dijkstra shortest-path DAGs)


def betweenness(graph: WeightedGraph, edge_length_mode: str = "inverse_weight") -> dict:
    """Shortest-path betweenness B(v): the sum over source/target pairs of the
    fraction of shortest paths passing through v."""
    if edge_length_mode not in EDGE_LENGTH_MODES:
        raise ValueError(f"unknown edge_length_mode {edge_length_mode!r}")

    adjacency: dict = {node: [] for node in graph.nodes}
    for u, v, w in graph.edges:
        if edge_length_mode == "inverse_weight":
            if w == 0.0:
                continue  # carries no flow, not traversable
            length = 1.0 / w
        else:
            length = 1.0
        adjacency[u].append((v, length))
        if not graph.directed:
            adjacency[v].append((u, length))

    scores = {node: 0.0 for node in graph.nodes}
    for source in graph.nodes:
        order, sigma, preds = _dijkstra_counts(adjacency, source)
        delta = {node: 0.0 for node in order}
        while order:
            w = order.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != source:
                scores[w] += delta[w]
    if not graph.directed:
        for node in scores:
            scores[node] /= 2.0
    return scores


def _dijkstra_counts(adjacency: dict, source):
    dist = {source: 0.0}
    sigma = {source: 1.0}
    preds = {source: []}
    order = []
    done = set()
    heap = [(0.0, 0, source)]
    counter = 1
    while heap:
        d, _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        order.append(v)
        for w, length in adjacency[v]:
            nd = d + length
            if w not in dist or nd < dist[w]:
                dist[w] = nd
                sigma[w] = sigma[v]
                preds[w] = [v]
                heapq.heappush(heap, (nd, counter, w))
                counter += 1
            elif nd == dist[w]:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, sigma, preds


# ---------------------------------------------------------------------------
# modularity and greedy (Louvain-style) community detection


def _symmetrized(graph: WeightedGraph):
    """Undirected adjacency view: A_uv sums both directions; a self-loop of
    weight w contributes A_vv = 2w. Zero-weight edges contribute nothing to
    A, degrees, or m, so they are dropped here (keeps zero-flow units
    genuinely isolated). Returns (index map, adjacency dicts, self weights,
    weighted degrees)."""
    index = {node: i for i, node in enumerate(graph.nodes)}
    n = len(graph.nodes)
    adjacency = [dict() for _ in range(n)]
    self_weight = np.zeros(n)
    for u, v, w in graph.edges:
        if w == 0.0:
            continue
        iu, iv = index[u], index[v]
        if iu == iv:
            self_weight[iu] += 2.0 * w
        else:
            adjacency[iu][iv] = adjacency[iu].get(iv, 0.0) + w
            adjacency[iv][iu] = adjacency[iv].get(iu, 0.0) + w
    degree = np.array([self_weight[i] + sum(adjacency[i].values()) for i in range(n)])
    return index, adjacency, self_weight, degree


def modularity(graph: WeightedGraph, assignment: dict, gamma: float = 1.0) -> float:
    """Direct evaluation of Q at resolution gamma for a given partition."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    for node in graph.nodes:
        if node not in assignment:
            raise ValueError(f"node {node!r} missing from the community assignment")
    index, adjacency, self_weight, degree = _symmetrized(graph)
    two_m = float(degree.sum())
    if two_m == 0.0:
        return 0.0

    labels = [assignment[node] for node in graph.nodes]
    intra = float(self_weight.sum())  # self terms always join their own community
    for i in range(len(graph.nodes)):
        for j, w in adjacency[i].items():
            if labels[i] == labels[j]:
                intra += w  # each unordered pair appears twice here
    community_degree: dict = {}
    for i, label in enumerate(labels):
        community_degree[label] = community_degree.get(label, 0.0) + degree[i]
    null = sum(s * s for s in community_degree.values())
    return intra / two_m - null / (gamma * two_m * two_m)


def detect_communities(graph: WeightedGraph, gamma: float = 1.0, seed: int = 0) -> CommunityAssignment:
    """Greedy agglomerative modularity maximization (local moving plus
    aggregation) at resolution gamma.

    Directed graphs are symmetrized first. Deterministic for a fixed seed:
    node visitation order is seeded, move ties go to the lowest community id.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not graph.nodes:
        raise ValueError("graph has no nodes")
    _, adjacency, self_weight, degree = _symmetrized(graph)
    two_m = float(degree.sum())
    n = len(graph.nodes)
    if two_m == 0.0:
        assignment = {node: i for i, node in enumerate(graph.nodes)}
        return CommunityAssignment(assignment=assignment, modularity=0.0, gamma=gamma)

    rng = np.random.default_rng(seed)
    resolution = 1.0 / gamma
    # membership[i] = current community of original node i, tracked across levels
    membership = list(range(n))
    level_adj, level_self, level_deg = adjacency, self_weight.copy(), degree.copy()

    while True:
        comm, moved = _local_moving(level_adj, level_deg, two_m, resolution, rng)
        if not moved:
            break
        relabel = _contiguous(comm)
        if len(relabel) == len(level_adj):
            break  # nothing merged, a further level would see the same graph
        membership = [relabel[comm[membership[i]]] for i in range(n)]
        level_adj, level_self, level_deg = _aggregate(
            level_adj, level_self, level_deg, [relabel[c] for c in comm]
        )
        if len(level_adj) == 1:
            break

    relabel = _contiguous(membership)
    assignment = {node: relabel[membership[i]] for i, node in enumerate(graph.nodes)}
    q = modularity(graph, assignment, gamma)
    return CommunityAssignment(assignment=assignment, modularity=q, gamma=gamma)


def _local_moving(adjacency, degree, two_m, resolution, rng):
    n = len(adjacency)
    comm = list(range(n))
    community_degree = degree.copy()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for v in rng.permutation(n):
            v = int(v)
            old = comm[v]
            # weight from v to each neighboring community
            link: dict = {}
            for w, weight in adjacency[v].items():
                link[comm[w]] = link.get(comm[w], 0.0) + weight
            community_degree[old] -= degree[v]
            base = link.get(old, 0.0) - resolution * degree[v] * community_degree[old] / two_m
            best_comm, best_gain = old, base
            for cand in sorted(link):
                if cand == old:
                    continue
                gain = link[cand] - resolution * degree[v] * community_degree[cand] / two_m
                if gain > best_gain + 1e-12 or (
                    abs(gain - best_gain) <= 1e-12 and cand < best_comm
                ):
                    best_comm, best_gain = cand, gain
            comm[v] = best_comm
            community_degree[best_comm] += degree[v]
            if best_comm != old:
                improved = True
                moved_any = True
    return comm, moved_any


def _contiguous(labels) -> dict:
    relabel: dict = {}
    for label in labels:
        if label not in relabel:
            relabel[label] = len(relabel)
    return relabel


def _aggregate(adjacency, self_weight, degree, comm):
    n_new = max(comm) + 1
    new_adj = [dict() for _ in range(n_new)]
    new_self = np.zeros(n_new)
    new_deg = np.zeros(n_new)
    for i in range(len(adjacency)):
        ci = comm[i]
        new_self[ci] += self_weight[i]
        new_deg[ci] += degree[i]
        for j, w in adjacency[i].items():
            cj = comm[j]
            if ci == cj:
                new_self[ci] += w  # both directions of the pair land here
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
    return new_adj, new_self, new_deg
