"""Signature graphs: edge i -> j when some entry of row j of a(x) depends on x_i.

Vertices are 0-based coordinate indices.
"""
from dataclasses import dataclass
import logging
import warnings

import numpy as np
from scipy.stats import qmc

from config.settings import PROBE_POINTS, PROBE_PERTURBATION, PROBE_TOL, PROBE_BOX
from system.coefficients import CoefficientOverflowError
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

SINGULAR_EXCLUSION = 1e-3
SOBOL_SEED = 12345


class SignatureViolationError(ValueError):
    pass


@dataclass(frozen=True)
class SignatureGraph:
    p: int
    edges: frozenset

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge {i}->{j} references a vertex outside 0..{self.p - 1}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_matrix(cls, dependence) -> "SignatureGraph":
        dep = np.asarray(dependence, dtype=bool)
        return cls(dep.shape[0], frozenset(zip(*np.nonzero(dep))))

    @classmethod
    def empty(cls, p: int) -> "SignatureGraph":
        return cls(p, frozenset())

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edges

    def parents(self, j: int) -> list[int]:
        return sorted(i for i, k in self.edges if k == j)

    def sorted_edges(self) -> list[tuple]:
        return sorted(self.edges)

    def to_matrix(self) -> np.ndarray:
        dep = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            dep[i, j] = True
        return dep

    def is_subgraph_of(self, other: "SignatureGraph") -> bool:
        return self.p == other.p and self.edges <= other.edges

    def edge_list(self, labels=None) -> list[list[str]]:
        names = labels or [f"x{i + 1}" for i in range(self.p)]
        return [[names[i], names[j]] for i, j in self.sorted_edges()]

    def to_dot(self, labels=None, name: str = "signature") -> str:
        names = labels or [f"x{i + 1}" for i in range(self.p)]
        lines = [f"digraph {name} {{"]
        lines += [f'  "{n}";' for n in names]
        lines += [f'  "{names[i]}" -> "{names[j]}";' for i, j in self.sorted_edges()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def is_locally_unaffected(sig: SignatureGraph, i: int, j: int) -> bool:
    """True when X^j is locally unaffected by X^i, i.e. there is no edge i -> j."""
    if not (0 <= i < sig.p and 0 <= j < sig.p):
        raise ValueError(f"vertices ({i}, {j}) out of range")
    return not sig.has_edge(i, j)


def sample_probe_points(system: SdeSystem, n_points: int, box=None) -> np.ndarray:
    """Scrambled Sobol points in the box, away from the field's singular points."""
    low, high = box or system.coeff.probe_box or (-PROBE_BOX, PROBE_BOX)
    p = system.p
    sampler = qmc.Sobol(d=p, scramble=True, seed=SOBOL_SEED)
    points = np.zeros((0, p))
    singular = np.array(system.coeff.singular_points, dtype=float).reshape(-1, p)
    while points.shape[0] < n_points:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            draw = qmc.scale(sampler.random(max(n_points, 16)), np.full(p, low), np.full(p, high))
        if singular.size:
            dist = np.linalg.norm(draw[:, None, :] - singular[None, :, :], axis=2).min(axis=1)
            draw = draw[dist > SINGULAR_EXCLUSION]
        points = np.vstack([points, draw])
    return points[:n_points]


def probe_signature(system: SdeSystem, n_points: int = PROBE_POINTS, perturbation: float = PROBE_PERTURBATION,
                    tol: float = PROBE_TOL, box=None) -> SignatureGraph:
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if not perturbation > 0:
        raise ValueError("perturbation must be positive")
    if tol < 0:
        raise ValueError("tol must be nonnegative")

    x = sample_probe_points(system, n_points, box)
    base = system.coeff.evaluate_batch(x)
    if not np.all(np.isfinite(base)):
        bad = x[~np.isfinite(base).all(axis=(1, 2))][0]
        raise CoefficientOverflowError(f"coefficient overflow at {bad.tolist()}")

    dep = np.zeros((system.p, system.p), dtype=bool)
    for i in range(system.p):
        shifted = x.copy()
        shifted[:, i] += perturbation
        moved = system.coeff.evaluate_batch(shifted)
        if not np.all(np.isfinite(moved)):
            bad = shifted[~np.isfinite(moved).all(axis=(1, 2))][0]
            raise CoefficientOverflowError(f"coefficient overflow at {bad.tolist()}")
        # dep[i, j]: row j changed when x_i moved
        dep[i] = (np.abs(moved - base) > tol).any(axis=(0, 2))

    sig = SignatureGraph.from_matrix(dep)
    logger.info(f"Probed signature of '{system.name or 'system'}' at {n_points} points: {sig.sorted_edges()}")
    return sig


def declared_signature(system: SdeSystem) -> SignatureGraph | None:
    dep = system.coeff.declared_dependence
    return None if dep is None else SignatureGraph.from_matrix(dep)


def verify_declared(system: SdeSystem, probed: SignatureGraph | None = None) -> SignatureGraph:
    """Returns the declared signature after checking that the probe finds no extra edge."""
    declared = declared_signature(system)
    if declared is None:
        raise ValueError("system has no declared signature")
    probed = probed or probe_signature(system)
    extra = probed.edges - declared.edges
    if extra:
        logger.error(f"Declared signature of '{system.name}' misses probed edges {sorted(extra)}")
        raise SignatureViolationError(f"probed edges {sorted(extra)} are not in the declared signature")
    return declared


def signature_of(system: SdeSystem, verify: bool = True) -> SignatureGraph:
    if system.coeff.declared_dependence is None:
        return probe_signature(system)
    return verify_declared(system) if verify else declared_signature(system)
