"""Pointwise generator data and generator evaluation.

D-form:
    Af(x) = grad f . a(x) alpha + 1/2 tr(a C a^T Hf)
            + sum_k lam_k [f(x + a y_k) - f(x) - 1_D(y_k) grad f . a y_k]
E-form: the same with drift beta(x) and the indicator 1_E(a y_k), where
    beta(x) = a(x) alpha + sum_k lam_k (1_E(a y_k) - 1_D(y_k)) a y_k.
"""
from dataclasses import dataclass
import logging

import numpy as np

from driver.levy import characteristic_function
from generator.fields import ScalarField2
from system.sde import SdeSystem, evaluate_coeff

logger = logging.getLogger(__name__)

D_FORM = "D"
E_FORM = "E"
DEFAULT_RADIUS_E = 1.0


@dataclass(frozen=True, eq=False)
class GeneratorTerms:
    x: np.ndarray
    beta: np.ndarray
    diffusion: np.ndarray
    rates: np.ndarray  # (K,)
    locations: np.ndarray  # (K, p), pushforward a(x) y_k
    r_D: float
    r_E: float
    drift_D: np.ndarray  # a(x) alpha
    in_D: np.ndarray  # 1_D(y_k)

    @property
    def in_E(self) -> np.ndarray:
        if not self.rates.size:
            return np.zeros(0, dtype=bool)
        return np.linalg.norm(self.locations, axis=1) <= self.r_E

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "beta": self.beta.tolist(),
            "diffusion": self.diffusion.tolist(),
            "jumps": [{"rate": float(r), "location": z.tolist()} for r, z in zip(self.rates, self.locations)],
            "r_D": self.r_D,
            "r_E": self.r_E,
        }


def compute_terms(system: SdeSystem, x, r_E: float = DEFAULT_RADIUS_E) -> GeneratorTerms:
    if not r_E > 0:
        raise ValueError(f"r_E must be positive, got {r_E}")
    x = np.asarray(x, dtype=float).reshape(-1)
    a = evaluate_coeff(system, x)
    driver = system.driver
    drift = a @ driver.alpha
    diffusion = a @ driver.cov @ a.T
    diffusion = 0.5 * (diffusion + diffusion.T)
    rates = driver.rates
    locations = driver.locations @ a.T if driver.jumps else np.zeros((0, system.p))
    in_D = driver.small_jump_mask
    beta = drift.copy()
    if driver.jumps:
        in_E = np.linalg.norm(locations, axis=1) <= r_E
        weights = rates * (in_E.astype(float) - in_D.astype(float))
        beta = beta + weights @ locations
    return GeneratorTerms(x, beta, diffusion, rates, locations, driver.trunc_radius, float(r_E), drift, in_D)


def apply_terms(terms: GeneratorTerms, f: ScalarField2, form: str = D_FORM) -> float:
    x = terms.x
    grad = f.gradient(x)
    hess = f.hessian(x)
    if form == D_FORM:
        value = grad @ terms.drift_D
        indicator = terms.in_D
    elif form == E_FORM:
        value = grad @ terms.beta
        indicator = terms.in_E
    else:
        raise ValueError(f"unknown generator form '{form}'")
    value += 0.5 * np.sum(terms.diffusion * hess)
    if terms.rates.size:
        fx = f(x)
        jumped = f.values(x + terms.locations)
        compensation = np.where(indicator, terms.locations @ grad, 0.0)
        value += np.sum(terms.rates * (jumped - fx - compensation))
    return float(value)


def apply_generator(system: SdeSystem, f: ScalarField2, x, form: str = D_FORM,
                    r_E: float = DEFAULT_RADIUS_E) -> float:
    return apply_terms(compute_terms(system, x, r_E), f, form)


def update_characteristic_function(system: SdeSystem, x, u, delta: float,
                                   r_E: float = DEFAULT_RADIUS_E) -> tuple[complex, complex]:
    """E exp(i u.G(x, U)) for the Euler update G(x, U) = x + a(x) U, in the D- and E-forms."""
    terms = compute_terms(system, x, r_E)
    u = np.asarray(u, dtype=float).reshape(-1)
    a = evaluate_coeff(system, terms.x)
    d_form = complex(np.exp(1j * u @ terms.x)) * characteristic_function(system.driver, a.T @ u, delta)

    exponent = 1j * u @ (terms.x + delta * terms.beta) - 0.5 * delta * u @ terms.diffusion @ u
    if terms.rates.size:
        proj = terms.locations @ u
        comp = np.where(terms.in_E, proj, 0.0)
        exponent = exponent + delta * np.sum(terms.rates * (np.exp(1j * proj) - 1.0 - 1j * comp))
    return d_form, complex(np.exp(exponent))
