"""Leader-follower communication topology.

Node 0 is the exosystem; nodes 1..N are the agents.  The follower
sub-block of the adjacency is symmetric for undirected graphs; setting
``directed=True`` keeps arbitrary follower weights, with a_ij > 0 meaning
agent i receives from node j.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, eigenvalues, sigma_max


class RootConditionError(ValueError):
    """The graph does not anchor every follower to the exosystem node."""


@dataclass(frozen=True)
class LeaderGraph:
    adjacency: np.ndarray
    directed: bool = False

    def __post_init__(self):
        a = as_matrix(self.adjacency, "adjacency")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("graph needs node 0 plus at least one follower")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        if np.any(a < 0.0):
            raise ValueError("adjacency weights must be nonnegative")
        if not self.directed:
            f = a[1:, 1:]
            if not np.array_equal(f, f.T):
                raise ValueError(
                    "follower sub-block must be symmetric for an undirected graph"
                )
        object.__setattr__(self, "adjacency", a)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0] - 1


@dataclass(frozen=True)
class GraphDecomposition:
    L_bar: np.ndarray
    Delta: np.ndarray
    H: np.ndarray


def decompose(g: LeaderGraph) -> GraphDecomposition:
    """Follower Laplacian L_bar, leader-access diagonal Delta, and
    H = L_bar + Delta (so H @ 1 = Delta @ 1)."""
    a = g.adjacency
    w = a[1:, 1:]
    l_bar = np.diag(w.sum(axis=1)) - w
    delta = np.diag(a[1:, 0].copy())
    return GraphDecomposition(L_bar=l_bar, Delta=delta, H=l_bar + delta)


def root_reachable(g: LeaderGraph) -> bool:
    """True when every follower is reachable from node 0 by BFS over
    positive-weight edges (i -> j wherever a_ji > 0; both directions on an
    undirected follower block)."""
    a = g.adjacency
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in range(n):
            if seen[j]:
                continue
            if a[j, i] > 0.0 or (not g.directed and a[i, j] > 0.0):
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def _h_spectrum(d: GraphDecomposition):
    spec = eigenvalues(d.H)
    min_re = min(float(v.real) for v in spec.values)
    if min_re <= 0.0:
        raise RootConditionError(
            f"H has an eigenvalue with real part {min_re:.3e} <= 0; "
            "the graph is not rooted at the exosystem node"
        )
    return spec, min_re


def paper_mu_bound(d: GraphDecomposition) -> float:
    """The closed-form admissibility bound 4 min(Re lambda(H)) / sigma_max(H)^2.

    Advisory only: it can exceed the true supremum, so certificates rely
    on the direct spectral-radius test instead."""
    _, min_re = _h_spectrum(d)
    s = sigma_max(d.H)
    return 4.0 * min_re / (s * s)


def exact_mu_bound(d: GraphDecomposition) -> float:
    """The exact supremum of mu with max_i |1 - mu lambda_i(H)| < 1:
    min_i 2 Re(lambda_i) / |lambda_i|^2."""
    spec, _ = _h_spectrum(d)
    return min(2.0 * float(v.real) / float(abs(v)) ** 2 for v in spec.values)
