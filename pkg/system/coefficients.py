"""Coefficient fields a: R^p -> M(p, d).

Every field evaluates on batches: an (n, p) array of states maps to an
(n, p, d) array of matrices. Single-point evaluation is the batch of one.
"""
from dataclasses import dataclass, field
from typing import Callable
import logging

import numpy as np

from cli.expression import parse_expression

logger = logging.getLogger(__name__)

SOURCES = ("closure", "expression", "linear", "chem")


class CoefficientOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class CoefficientField:
    p: int
    d: int
    batch: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    source: str = "closure"
    declared_dependence: np.ndarray | None = None
    singular_points: tuple = ()
    probe_box: tuple | None = None
    description: dict = field(default_factory=dict, repr=False)
    # raises a domain error for a single bad point; batches return NaN instead
    point_check: Callable[[np.ndarray], None] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.p < 1 or self.d < 1:
            raise ValueError(f"coefficient field needs positive p and d, got ({self.p}, {self.d})")
        if self.source not in SOURCES:
            raise ValueError(f"unknown coefficient source '{self.source}'")
        if self.declared_dependence is not None:
            dep = np.array(self.declared_dependence, dtype=bool)
            if dep.shape != (self.p, self.p):
                raise ValueError(f"declared dependence must be {self.p}x{self.p}, got {dep.shape}")
            dep.setflags(write=False)
            object.__setattr__(self, "declared_dependence", dep)
        points = tuple(tuple(float(v) for v in pt) for pt in self.singular_points)
        for pt in points:
            if len(pt) != self.p:
                raise ValueError(f"singular point {pt} is not {self.p}-dimensional")
        object.__setattr__(self, "singular_points", points)

    def evaluate_batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self.batch(x), dtype=float)
        if out.shape != (x.shape[0], self.p, self.d):
            raise ValueError(f"coefficient batch returned shape {out.shape}, "
                             f"expected {(x.shape[0], self.p, self.d)}")
        return out

    def __call__(self, x) -> np.ndarray:
        return self.evaluate_batch(np.asarray(x, dtype=float).reshape(1, self.p))[0]

    # constructors

    @classmethod
    def from_closure(cls, p: int, d: int, fn: Callable, vectorized: bool = False, **kwargs) -> "CoefficientField":
        """Wraps a Python callable. Non-vectorized callables map a p-vector to a p x d matrix."""
        if vectorized:
            return cls(p, d, fn, "closure", **kwargs)

        def batch(x):
            return np.stack([np.asarray(fn(row), dtype=float).reshape(p, d) for row in x]) \
                if len(x) else np.zeros((0, p, d))

        return cls(p, d, batch, "closure", **kwargs)

    @classmethod
    def constant(cls, matrix, **kwargs) -> "CoefficientField":
        m = np.array(matrix, dtype=float)
        m.setflags(write=False)
        p, d = m.shape
        return cls(p, d, lambda x: np.broadcast_to(m, (x.shape[0], p, d)).copy(), "closure",
                   description={"constant": m.tolist()}, **kwargs)

    @classmethod
    def from_expressions(cls, entries, constants: dict | None = None, **kwargs) -> "CoefficientField":
        rows = [list(r) for r in entries]
        p = len(rows)
        if p == 0 or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("coefficient expressions must form a non-empty rectangular matrix")
        d = len(rows[0])
        parsed = [[parse_expression(str(s), n_coords=p, constants=constants) for s in r] for r in rows]

        def batch(x):
            out = np.empty((x.shape[0], p, d))
            for i in range(p):
                for j in range(d):
                    out[:, i, j] = parsed[i][j].evaluate(x)
            return out

        description = {"expressions": [[e.source for e in r] for r in parsed],
                       "constants": dict(constants or {})}
        return cls(p, d, batch, "expression", description=description, **kwargs)

    @classmethod
    def linear(cls, B, A, sigma, **kwargs) -> "CoefficientField":
        """Canonical drift+diffusion field with drift B (x - A) and constant diffusion sigma."""
        B = np.array(B, dtype=float)
        A = np.array(A, dtype=float).reshape(-1)
        sigma = np.array(sigma, dtype=float)
        p = B.shape[0]
        if B.shape != (p, p) or A.shape != (p,) or sigma.ndim != 2 or sigma.shape[0] != p:
            raise ValueError(f"inconsistent linear field shapes B{B.shape}, A{A.shape}, sigma{sigma.shape}")
        d = sigma.shape[1] + 1
        for arr in (B, A, sigma):
            arr.setflags(write=False)

        def batch(x):
            out = np.empty((x.shape[0], p, d))
            out[:, :, 0] = (x - A) @ B.T
            out[:, :, 1:] = sigma
            return out

        description = {"B": B.tolist(), "A": A.tolist(), "sigma": sigma.tolist()}
        return cls(p, d, batch, "linear", description=description, **kwargs)


def drift_diffusion(drift: Callable, diffusion: Callable, p: int, n_noise: int, **kwargs) -> CoefficientField:
    """Canonical encoding: column 0 carries the drift, columns 1.. the diffusion.

    `drift` maps (n, p) -> (n, p) and `diffusion` maps (n, p) -> (n, p, n_noise).
    """
    def batch(x):
        out = np.empty((x.shape[0], p, n_noise + 1))
        out[:, :, 0] = drift(x)
        out[:, :, 1:] = diffusion(x)
        return out

    return CoefficientField(p, n_noise + 1, batch, **kwargs)
