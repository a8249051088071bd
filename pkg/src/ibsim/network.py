"""Generators for the interbank relation network (who may trade with whom)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RelationNetwork:
    """Symmetric boolean adjacency over the banks, zero diagonal."""

    size: int
    adjacency: np.ndarray

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edge_count(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def mean_degree(self) -> float:
        return float(self.degrees().mean())

    def edge_list_lines(self) -> list[str]:
        """One '<i> <j>' line per undirected edge, 0-indexed, i < j."""
        ii, jj = np.nonzero(np.triu(self.adjacency, 1))
        return [f"{i} {j}" for i, j in zip(ii.tolist(), jj.tolist())]

    def write_edge_list(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.edge_list_lines():
                fh.write(line + "\n")


def _finalize(adj: np.ndarray) -> RelationNetwork:
    np.fill_diagonal(adj, False)
    assert (adj == adj.T).all()
    return RelationNetwork(size=adj.shape[0], adjacency=adj)


def gen_complete(n_banks: int) -> RelationNetwork:
    """Fully connected relation network."""
    if n_banks < 2:
        raise ValueError(f"complete network needs at least 2 banks, got {n_banks}")
    adj = np.ones((n_banks, n_banks), dtype=bool)
    return _finalize(adj)


def gen_er(n_banks: int, gamma: float, seed: int) -> RelationNetwork:
    """Erdos-Renyi network: each unordered pair is an edge with probability gamma.

    Deterministic for a given seed.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {gamma}")
    if n_banks < 2:
        raise ValueError(f"ER network needs at least 2 banks, got {n_banks}")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n_banks, n_banks)) < gamma, 1)
    return _finalize(upper | upper.T)


def gen_ba(n_banks: int, m: int, seed: int) -> RelationNetwork:
    """Barabasi-Albert scale-free network grown from an m-node clique.

    Each arriving node attaches m edges to distinct existing nodes chosen
    preferentially by degree; mean degree approaches 2m. Deterministic per
    seed. Edge count is exactly m*(n-m) + m*(m-1)/2.
    """
    if not 1 <= m < n_banks:
        raise ValueError(f"attachment count m must satisfy 1 <= m < B, got m={m}, B={n_banks}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n_banks, n_banks), dtype=bool)
    # seed clique
    adj[:m, :m] = True
    # pool of node ids repeated once per incident edge (degree-proportional sampling)
    pool: list[int] = []
    for v in range(m):
        pool.extend([v] * (m - 1))
    for new in range(m, n_banks):
        targets: set[int] = set()
        while len(targets) < m:
            if pool:
                targets.add(pool[int(rng.integers(len(pool)))])
            else:
                # only reachable for m=1 and the first arrival (single seed node)
                targets.add(int(rng.integers(new)))
        for v in targets:
            adj[new, v] = adj[v, new] = True
            pool.append(v)
        pool.extend([new] * m)
    return _finalize(adj)
