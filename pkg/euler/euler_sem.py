"""The Euler SEM of a system over a grid.

Primary variables are the grid values (k, i); the noise variable of every
vertex in layer k >= 1 is the driver increment Z_{t_k} - Z_{t_{k-1}}, and
layer 0 reads the initial state. Vertex (k, i) has parents (k-1, j) for j = i
and for every signature edge j -> i.
"""
from dataclasses import dataclass
import logging

import networkx as nx
import numpy as np

from euler.scheme import Grid
from intervention.sem import SemModel
from system.sde import SdeSystem
from system.signature import SignatureGraph, signature_of

logger = logging.getLogger(__name__)

INITIAL = "initial"


@dataclass(frozen=True, eq=False)
class EulerSem:
    system: SdeSystem
    grid: Grid
    signature: SignatureGraph
    sem: SemModel

    @property
    def graph(self) -> nx.DiGraph:
        return self.sem.graph

    def layer_edges(self, k: int) -> list:
        return [(u, v) for u, v in self.graph.edges if v[0] == k]

    def per_layer_edge_count(self) -> int:
        return len(self.layer_edges(1)) if self.grid.n_steps else 0

    def order(self) -> list:
        return [(k, i) for k in range(self.grid.n_steps + 1) for i in range(self.system.p)]

    def noise_values(self, increments: np.ndarray, initial: np.ndarray) -> dict:
        """Noise dict for increments (n, N, d) and initial states (n, p)."""
        noise = {k: increments[:, k - 1, :] for k in range(1, self.grid.n_steps + 1)}
        noise[INITIAL] = initial
        return noise

    def evaluate(self, increments: np.ndarray, initial: np.ndarray, sem: SemModel | None = None) -> np.ndarray:
        """Evaluates this (or an intervened) SEM; returns values (n, N + 1, p)."""
        sem = sem or self.sem
        order = [v for v in self.order() if v in sem.graph]
        # intervention may add same-layer parents; keep a valid order regardless
        if any(u[0] == v[0] for u, v in sem.graph.edges):
            order = list(nx.lexicographical_topological_sort(sem.graph))
        values = sem.evaluate(self.noise_values(increments, initial), order)
        n = initial.shape[0]
        out = np.full((n, self.grid.n_steps + 1, self.system.p), np.nan)
        for (k, i), v in values.items():
            out[:, k, i] = v
        return out

    def to_dot(self, name: str = "euler_sem") -> str:
        labels = self.system.labels
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for k, i in self.order():
            lines.append(f'  "{labels[i]}_{k}";')
        for (k1, i1), (k2, i2) in sorted(self.graph.edges):
            lines.append(f'  "{labels[i1]}_{k1}" -> "{labels[i2]}_{k2}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _initial_relationship(i: int):
    def relationship(parents, noise):
        return noise[:, i]
    return relationship


def _euler_relationship(system: SdeSystem, k: int, i: int, reference: np.ndarray):
    coeff = system.coeff

    def relationship(parents, noise):
        n = noise.shape[0]
        x = np.broadcast_to(reference, (n, system.p)).copy()
        for (_, j), value in parents.items():
            x[:, j] = value
        with np.errstate(all="ignore"):
            a = coeff.evaluate_batch(x)
            return parents[(k - 1, i)] + np.sum(a[:, i, :] * noise, axis=1)

    return relationship


def build_euler_sem(system: SdeSystem, grid: Grid, signature: SignatureGraph | None = None) -> EulerSem:
    signature = signature or signature_of(system)
    p = system.p
    reference = np.array(system.reference_point, dtype=float)
    graph = nx.DiGraph()
    relationships = {}
    noise = {}
    for i in range(p):
        graph.add_node((0, i))
        relationships[(0, i)] = _initial_relationship(i)
        noise[(0, i)] = INITIAL
    for k in range(1, grid.n_steps + 1):
        for i in range(p):
            v = (k, i)
            graph.add_node(v)
            graph.add_edge((k - 1, i), v)
            graph.add_edges_from(((k - 1, j), v) for j in signature.parents(i))
            relationships[v] = _euler_relationship(system, k, i, reference)
            noise[v] = k
    sem = SemModel(graph, relationships, noise)
    logger.info(f"Built Euler SEM for '{system.name}': {graph.number_of_nodes()} vertices, "
                f"{graph.number_of_edges()} edges")
    return EulerSem(system, grid, signature, sem)
