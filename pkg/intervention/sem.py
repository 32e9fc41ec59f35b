"""Structural equation models over a networkx DAG.

Relationships are black-box callables `f(parents, noise)` where `parents`
maps each parent vertex to its (n,) array of values and `noise` is the value
of the vertex's noise variable (or None). Evaluation is vectorized over n
independent draws and proceeds in topological order.
"""
from dataclasses import dataclass, field
from typing import Callable, Hashable
import logging

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)


class NotADagError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SemModel:
    graph: nx.DiGraph
    relationships: dict = field(repr=False)
    noise: dict = field(default_factory=dict)  # vertex -> noise key

    def __post_init__(self):
        if not nx.is_directed_acyclic_graph(self.graph):
            raise NotADagError("SEM graph is not a DAG")
        missing = set(self.graph.nodes) - set(self.relationships)
        if missing:
            raise ValueError(f"vertices without relationships: {sorted(missing, key=str)[:5]}")

    @property
    def vertices(self) -> list:
        return list(self.graph.nodes)

    def parents(self, v: Hashable) -> list:
        return list(self.graph.predecessors(v))

    def order(self) -> list:
        return list(nx.topological_sort(self.graph))

    def evaluate(self, noise_values: dict, order: list | None = None) -> dict:
        """Values of every primary variable given values of the noise variables."""
        values = {}
        for v in order or self.order():
            parents = {u: values[u] for u in self.graph.predecessors(v)}
            key = self.noise.get(v)
            values[v] = self.relationships[v](parents, None if key is None else noise_values[key])
        return values


def intervene_sem(sem: SemModel, assignments: dict) -> SemModel:
    """Post-intervention SEM.

    `assignments` maps each target vertex i to (I(i), zeta_i) with I(i) a set of
    non-target vertices and zeta_i a callable of the parent-value dict. Other
    relationships read the target's new value through the graph, which is the
    substitution of the target in every downstream relationship.
    """
    if not assignments:
        return SemModel(sem.graph.copy(), dict(sem.relationships), dict(sem.noise))
    targets = set(assignments)
    unknown = targets - set(sem.graph.nodes)
    if unknown:
        raise ValueError(f"intervention targets not in the SEM: {sorted(unknown, key=str)[:5]}")

    graph = sem.graph.copy()
    relationships = dict(sem.relationships)
    for target, (new_parents, zeta) in assignments.items():
        new_parents = set(new_parents)
        if new_parents & targets:
            raise ValueError(f"parents of intervened vertex {target} include intervened vertices")
        if not new_parents <= set(graph.nodes):
            raise ValueError(f"parents of intervened vertex {target} are not SEM vertices")
        graph.remove_edges_from(list(graph.in_edges(target)))
        graph.add_edges_from((u, target) for u in new_parents)
        relationships[target] = _intervened_relationship(zeta)

    if not nx.is_directed_acyclic_graph(graph):
        logger.error("Intervention produced a cyclic graph")
        raise NotADagError("post-intervention graph is not a DAG")
    logger.info(f"Intervened SEM on {len(targets)} vertices")
    return SemModel(graph, relationships, dict(sem.noise))


def _intervened_relationship(zeta: Callable):
    def relationship(parents, noise):
        return zeta(parents)
    return relationship


def constant_assignment(value: float, n: int | None = None):
    """(I(i), zeta_i) for a parentless constant intervention."""
    def zeta(parents):
        return value if n is None else np.full(n, value)
    return set(), zeta
