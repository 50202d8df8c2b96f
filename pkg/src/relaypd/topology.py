"""Communication graphs, relay transition matrices, and activation laws.

Agent ids are 0-based everywhere inside the library. The 1-based
convention appears only at the I/O boundary (graph files, CLI output);
see :func:`read_graph_file`.
"""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GraphError

__all__ = [
    "Graph",
    "TransitionMatrix",
    "build_graph",
    "graph_matrices",
    "transition_matrix",
    "activation_probabilities",
    "sample_next",
    "generate_topology",
    "topology_kinds",
    "read_graph_file",
]


@dataclass(frozen=True)
class Graph:
    """An undirected, connected communication graph.

    Attributes
    ----------
    n : int
        Number of agents.
    edges : tuple of (int, int)
        Unordered edges stored as sorted pairs, 0-based.
    degrees : ndarray of int
        Incident edge count per agent.
    """

    n: int
    edges: tuple
    degrees: np.ndarray


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic relay transition matrix.

    Off-diagonal entries are 1/d_i on edges and zero elsewhere, so each
    baton transfer picks a uniformly random neighbor of the active agent.
    """

    P: np.ndarray

    def __post_init__(self):
        P = self.P
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise GraphError("transition matrix must be square")
        if np.any(P < 0.0):
            raise GraphError("transition matrix has negative entries")
        rows = P.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise GraphError("transition matrix rows must sum to 1")

    @property
    def n(self):
        return self.P.shape[0]


def _check_connected(n, adjacency):
    """Breadth-first reachability from agent 0."""
    if n == 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adjacency[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def build_graph(n, edges):
    """Validate agent count and edge list, returning a :class:`Graph`.

    Parameters
    ----------
    n : int
        Number of agents, at least 1.
    edges : iterable of (int, int)
        Undirected edges, 0-based endpoints.

    Raises
    ------
    GraphError
        On self-loops, duplicate or out-of-range edges, or if the graph
        is not connected.
    """
    if n < 1:
        raise GraphError("agent count must be at least 1")
    norm = []
    seen = set()
    for e in edges:
        try:
            i, j = int(e[0]), int(e[1])
        except (TypeError, ValueError, IndexError):
            raise GraphError("edges must be pairs of agent ids, got %r" % (e,))
        if i == j:
            raise GraphError("self-loop on agent %d" % i)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError("edge (%d, %d) out of range for n=%d" % (i, j, n))
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError("duplicate edge (%d, %d)" % key)
        seen.add(key)
        norm.append(key)
    norm.sort()
    degrees = np.zeros(n, dtype=np.int64)
    adjacency = [[] for _ in range(n)]
    for i, j in norm:
        degrees[i] += 1
        degrees[j] += 1
        adjacency[i].append(j)
        adjacency[j].append(i)
    if not _check_connected(n, adjacency):
        raise GraphError("graph is not connected")
    return Graph(n=n, edges=tuple(norm), degrees=degrees)


def graph_matrices(g):
    """Return the degree matrix D and the Laplacian L = D - A."""
    n = g.n
    A = np.zeros((n, n))
    for i, j in g.edges:
        A[i, j] = 1.0
        A[j, i] = 1.0
    D = np.diag(g.degrees.astype(float))
    return D, D - A


def transition_matrix(g):
    """Relay transition matrix with uniform neighbor choice.

    Equals I - D^{-1} L; built here entrywise from the edge list, the
    matrix identity is exercised by the test suite as a second route.
    """
    if len(g.edges) == 0:
        raise GraphError("transition matrix needs at least one edge")
    n = g.n
    P = np.zeros((n, n))
    for i, j in g.edges:
        P[i, j] = 1.0 / g.degrees[i]
        P[j, i] = 1.0 / g.degrees[j]
    return TransitionMatrix(P=P)


def activation_probabilities(g):
    """Stationary activation law of the relay chain.

    Solves (D^{-1} L^2 D^{-1} + 11^T) g = 1 and cross-checks the result
    against the closed form d / sum(d); the two agree for every
    connected graph, so disagreement indicates a numerical problem and
    is asserted rather than raised.
    """
    if g.n == 1:
        # Single agent, always active. The linear system is degenerate
        # here (no edges), so the law is returned directly.
        return np.array([1.0])
    if np.any(g.degrees == 0):
        raise GraphError("isolated agent")
    D, L = graph_matrices(g)
    Dinv = np.diag(1.0 / g.degrees.astype(float))
    M = Dinv @ L @ L @ Dinv + np.ones((g.n, g.n))
    sol = np.linalg.solve(M, np.ones(g.n))
    closed = g.degrees / g.degrees.sum()
    assert np.max(np.abs(sol - closed)) <= 1e-10, "activation law self-check"
    return sol


def sample_next(P, current, rng):
    """Draw the next active agent from row `current` of the chain.

    One uniform variate is consumed per call (inverse CDF over the
    row), which keeps run trajectories reproducible regardless of how
    the caller batches sampling.
    """
    row = P.P[current]
    cdf = np.cumsum(row)
    r = rng.random()
    j = int(np.searchsorted(cdf, r, side="right"))
    return min(j, P.n - 1)


def topology_kinds():
    """Names accepted by :func:`generate_topology` (the random kind takes a parameter)."""
    return ("complete", "ring", "path", "erdos-renyi")


def generate_topology(kind, n, p=None, rng=None):
    """Build one of the standard test topologies.

    Parameters
    ----------
    kind : str
        "complete", "ring", "path", or "erdos-renyi" (requires `p` and
        `rng`; resampled until connected, up to 100 attempts).
    n : int
        Agent count.
    """
    if kind == "complete":
        return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if kind == "ring":
        if n < 3:
            # A 2-ring would duplicate its single edge; fall back to it.
            return build_graph(n, [(0, 1)] if n == 2 else [])
        return build_graph(n, [(i, (i + 1) % n) for i in range(n)])
    if kind == "path":
        return build_graph(n, [(i, i + 1) for i in range(n - 1)])
    if kind == "erdos-renyi":
        if p is None or not (0.0 < p <= 1.0):
            raise GraphError("erdos-renyi needs an edge probability in (0, 1]")
        if rng is None:
            raise GraphError("erdos-renyi needs a random source")
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for _ in range(100):
            edges = [e for e in pairs if rng.random() < p]
            try:
                return build_graph(n, edges)
            except GraphError:
                continue
        raise GraphError(
            "no connected erdos-renyi draw in 100 attempts (n=%d, p=%g)" % (n, p)
        )
    raise GraphError("unknown topology kind %r" % (kind,))


def read_graph_file(path):
    """Read a plain-text graph file.

    Format: first line ``n m``, then m lines ``i j`` with 1-based agent
    ids. Blank lines are ignored.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise GraphError("%s: empty graph file" % path)
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError("%s: header must be 'n m'" % path)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GraphError("%s: header must be two integers" % path)
    if len(lines) - 1 != m:
        raise GraphError(
            "%s: header promises %d edges, found %d" % (path, m, len(lines) - 1)
        )
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError("%s: edge line %r must be 'i j'" % (path, ln))
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError("%s: edge line %r must be two integers" % (path, ln))
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphError("%s: edge (%d, %d) out of range (ids are 1-based)" % (path, i, j))
        edges.append((i - 1, j - 1))
    return build_graph(n, edges)
