from dataclasses import dataclass, field
from typing import Callable
import logging

import numpy as np

logger = logging.getLogger(__name__)


def fd_step(x: np.ndarray) -> float:
    return 1e-5 * (1.0 + np.linalg.norm(x))


@dataclass(frozen=True, eq=False)
class ScalarField2:
    """`value` maps a batch (n, p) to (n,); derivatives act on single points and
    fall back to central finite differences when not supplied."""
    p: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    hess: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = "f"

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float).reshape(1, self.p))[0])

    def values(self, x) -> np.ndarray:
        return np.asarray(self.value(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.p)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float).reshape(self.p)
        h = fd_step(x)
        eye = np.eye(self.p) * h
        up = self.values(x + eye)
        down = self.values(x - eye)
        return (up - down) / (2 * h)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.p)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float).reshape(self.p, self.p)
        h = fd_step(x)
        eye = np.eye(self.p) * h
        f0 = self(x)
        out = np.empty((self.p, self.p))
        for i in range(self.p):
            for j in range(i, self.p):
                if i == j:
                    fp, fm = self.values(np.stack([x + eye[i], x - eye[i]]))
                    out[i, i] = (fp - 2 * f0 + fm) / h ** 2
                else:
                    pts = np.stack([x + eye[i] + eye[j], x + eye[i] - eye[j],
                                    x - eye[i] + eye[j], x - eye[i] - eye[j]])
                    fpp, fpm, fmp, fmm = self.values(pts)
                    out[i, j] = out[j, i] = (fpp - fpm - fmp + fmm) / (4 * h ** 2)
        return out


@dataclass(frozen=True)
class GaussianBump:
    """f(x) = q(r) exp(-|r|^2 / (2 s^2)) with r = x - center and q(r) = q0 + b.r + r.Q.r."""
    center: tuple
    scale: float = 1.0
    q0: float = 1.0
    b: tuple = ()
    Q: tuple = ()

    def _parts(self):
        c = np.asarray(self.center, dtype=float)
        p = c.size
        b = np.asarray(self.b, dtype=float) if len(self.b) else np.zeros(p)
        Q = np.asarray(self.Q, dtype=float) if len(self.Q) else np.zeros((p, p))
        return c, b, 0.5 * (Q + Q.T)

    def value(self, x: np.ndarray) -> np.ndarray:
        c, b, Q = self._parts()
        r = np.atleast_2d(x) - c
        q = self.q0 + r @ b + np.einsum("ni,ij,nj->n", r, Q, r)
        return q * np.exp(-np.sum(r * r, axis=1) / (2 * self.scale ** 2))

    def grad(self, x: np.ndarray) -> np.ndarray:
        c, b, Q = self._parts()
        r = x - c
        s2 = self.scale ** 2
        g = np.exp(-r @ r / (2 * s2))
        q = self.q0 + b @ r + r @ Q @ r
        return g * (b + 2 * Q @ r) - q * g * r / s2

    def hess(self, x: np.ndarray) -> np.ndarray:
        c, b, Q = self._parts()
        r = x - c
        s2 = self.scale ** 2
        g = np.exp(-r @ r / (2 * s2))
        q = self.q0 + b @ r + r @ Q @ r
        dq = b + 2 * Q @ r
        dg = -g * r / s2
        d2g = g * (np.outer(r, r) / s2 ** 2 - np.eye(r.size) / s2)
        return g * 2 * Q + np.outer(dq, dg) + np.outer(dg, dq) + q * d2g

    def field(self, name: str = "bump") -> ScalarField2:
        return ScalarField2(len(self.center), self.value, self.grad, self.hess, name)


def bump_battery(p: int, n_fields: int = 5, center=None, spacing: float = 0.5, seed: int = 11) -> list[ScalarField2]:
    """Gaussian bumps with degree <= 2 polynomial prefactors, centers on a lattice around `center`."""
    rng = np.random.default_rng(seed)
    base = np.zeros(p) if center is None else np.asarray(center, dtype=float)
    offsets = [np.zeros(p)]
    k = 1
    while len(offsets) < n_fields:
        for i in range(p):
            for sign in (1, -1):
                e = np.zeros(p)
                e[i] = sign * k * spacing
                offsets.append(e)
        k += 1
    fields = []
    for idx, offset in enumerate(offsets[:n_fields]):
        Q = rng.normal(scale=0.3, size=(p, p))
        bump = GaussianBump(
            center=tuple(base + offset),
            scale=float(rng.uniform(0.8, 1.5)),
            q0=float(rng.uniform(0.5, 1.5)),
            b=tuple(rng.normal(scale=0.5, size=p)) if idx % 2 else (),
            Q=tuple(map(tuple, 0.5 * (Q + Q.T))) if idx % 3 == 2 else (),
        )
        fields.append(bump.field(f"bump{idx}"))
    return fields


def gaussian_bump(center, scale: float = 1.0) -> ScalarField2:
    return GaussianBump(tuple(np.atleast_1d(np.asarray(center, dtype=float))), scale).field("gaussian")
