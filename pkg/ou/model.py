"""Ornstein-Uhlenbeck systems dX = B (X - A) dt + sigma dW."""
from dataclasses import dataclass
import logging

import numpy as np

from ou.linalg import matrix_exp, gramian
from system.coefficients import CoefficientField
from system.sde import SdeSystem, GaussianInitial
from driver.levy import LevyTriplet

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


class SingularReversionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}


@dataclass(frozen=True, eq=False)
class OuModel:
    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    initial: object = None  # p-vector or GaussianInitial; defaults to A
    labels: tuple = ()
    name: str = "ou"

    def __post_init__(self):
        B = np.atleast_2d(np.array(self.B, dtype=float))
        p = B.shape[0]
        A = np.array(self.A, dtype=float).reshape(-1)
        sigma = np.array(self.sigma, dtype=float).reshape(p, -1)
        if B.shape != (p, p) or A.shape != (p,):
            raise ValueError(f"inconsistent OU dimensions: A{A.shape}, B{B.shape}")
        initial = self.initial
        if initial is None:
            initial = A.copy()
        elif not isinstance(initial, GaussianInitial):
            initial = np.array(initial, dtype=float).reshape(-1)
            if initial.shape != (p,):
                raise ValueError(f"initial value must have length {p}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "labels", tuple(self.labels) or tuple(f"x{i + 1}" for i in range(p)))

    @property
    def p(self) -> int:
        return self.B.shape[0]

    def declared_dependence(self) -> np.ndarray:
        """Edge i -> j iff B[j, i] != 0."""
        return (self.B != 0).T


def ou_to_system(model: OuModel) -> SdeSystem:
    coeff = CoefficientField.linear(model.B, model.A, model.sigma,
                                    declared_dependence=model.declared_dependence())
    return SdeSystem(coeff, LevyTriplet.time_and_brownian(model.sigma.shape[1]), model.initial,
                     model.labels, model.name)


def _reduced(model: OuModel, m: int):
    keep = [i for i in range(model.p) if i != m]
    B_red = model.B[np.ix_(keep, keep)]
    if B_red.size and np.linalg.cond(B_red) > CONDITION_LIMIT:
        logger.error(f"Reduced reversion matrix of '{model.name}' is singular")
        raise SingularReversionError("intervened reversion matrix singular; no OU closed form")
    return keep, B_red


def ou_intervene(model: OuModel, m: int, zeta: float) -> OuModel:
    """Closed-form postintervention OU model for the constant intervention X^m := zeta."""
    if not 0 <= m < model.p or model.p < 2:
        raise ValueError(f"target {m} invalid for a {model.p}-dimensional model")
    keep, B_red = _reduced(model, m)
    alpha = model.A[keep]
    beta = model.B[keep, m] * (float(zeta) - model.A[m])
    level = alpha - np.linalg.solve(B_red, beta)
    if isinstance(model.initial, GaussianInitial):
        initial = model.initial.drop(m)
    else:
        initial = model.initial[keep]
    labels = tuple(model.labels[i] for i in keep)
    return OuModel(level, B_red, model.sigma[keep], initial, labels, f"{model.name}|do({model.labels[m]})")


def knockout(model: OuModel, m: int) -> OuModel:
    return ou_intervene(model, m, 0.0)


def zero_level_intervened_level(B, m: int, zeta: float) -> np.ndarray:
    """Postintervention level -B~^{-1} B[-m, m] zeta of a zero-level model."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    keep = [i for i in range(B.shape[0]) if i != m]
    B_red = B[np.ix_(keep, keep)]
    if np.linalg.cond(B_red) > CONDITION_LIMIT:
        raise SingularReversionError("intervened reversion matrix singular; no OU closed form")
    return -np.linalg.solve(B_red, B[keep, m] * float(zeta))


def ou_transition(model: OuModel, x, t: float) -> GaussianLaw:
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    x = np.asarray(x, dtype=float).reshape(-1)
    mean = model.A + matrix_exp(t * model.B) @ (x - model.A)
    cov = gramian(model.B, model.sigma @ model.sigma.T, t)
    return GaussianLaw(mean, cov)


def compose_transitions(model: OuModel, law: GaussianLaw, s: float) -> GaussianLaw:
    """Law after a further time s started from a Gaussian law."""
    E = matrix_exp(s * model.B)
    mean = model.A + E @ (law.mean - model.A)
    cov = E @ law.cov @ E.T + gramian(model.B, model.sigma @ model.sigma.T, s)
    return GaussianLaw(mean, 0.5 * (cov + cov.T))
