"""Intervening on an Ito-transformed coordinate.

With X^1 = W and X^2 = f(W) written through Ito's formula as a 2-dimensional
system, the intervention X^1 := zeta yields X^2_t = f(0) + f''(zeta) t / 2 +
f'(zeta) W_t, not the constant f(zeta) a naive substitution would suggest.
"""
from dataclasses import dataclass, asdict
from typing import Callable
import logging

import numpy as np

from driver.levy import LevyTriplet
from euler.scheme import Grid, euler_paths, shared_increments
from intervention.sde_ops import InterventionSpec, intervene_sde
from system.coefficients import CoefficientField
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

CONTRADICTION_TOL = 1e-9


@dataclass
class ItoReport:
    zeta: float
    horizon: float
    delta: float
    n_paths: int
    distance_closed_form: float
    distance_constant: float
    distance_constant_at_zero: float
    median_distance_constant_at_horizon: float
    contradiction: bool

    def to_dict(self) -> dict:
        return asdict(self)


def ito_system(f: Callable, df: Callable, d2f: Callable) -> SdeSystem:
    """(X^1, X^2) = (W, f(W)) with driver (t, W): a(x) = [[0, 1], [f''(x1)/2, f'(x1)]]."""
    def batch(x):
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 1] = 1.0
        out[:, 1, 0] = 0.5 * d2f(x[:, 0])
        out[:, 1, 1] = df(x[:, 0])
        return out

    coeff = CoefficientField(2, 2, batch, "closure", declared_dependence=[[False, True], [False, False]])
    x0 = np.array([0.0, float(f(np.zeros(1))[0])])
    return SdeSystem(coeff, LevyTriplet.time_and_brownian(1), x0, ("W", "fW"), "ito")


def ito_counterexample(f: Callable, df: Callable, d2f: Callable, zeta: float, horizon: float,
                       delta: float, n_paths: int, seed: int) -> ItoReport:
    """f, df, d2f act elementwise on arrays."""
    system = ito_system(f, df, d2f)
    reduced = intervene_sde(system, InterventionSpec(0, float(zeta)))
    grid = Grid(horizon, delta)
    increments = shared_increments(system.driver, grid, n_paths, seed)
    paths = euler_paths(reduced, increments, np.tile(reduced.initial, (n_paths, 1)))[:, :, 0]

    times = grid.times
    w = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(increments[:, :, 1], axis=1)], axis=1)
    z = np.array([float(zeta)])
    f0 = float(f(np.zeros(1))[0])
    closed = f0 + 0.5 * float(d2f(z)[0]) * times + float(df(z)[0]) * w
    constant = float(f(z)[0])

    report = ItoReport(
        zeta=float(zeta),
        horizon=grid.horizon,
        delta=grid.delta,
        n_paths=n_paths,
        distance_closed_form=float(np.max(np.abs(paths - closed))),
        distance_constant=float(np.max(np.abs(paths - constant))),
        distance_constant_at_zero=float(np.max(np.abs(paths[:, 0] - constant))),
        median_distance_constant_at_horizon=float(np.median(np.abs(paths[:, -1] - constant))),
        contradiction=False,
    )
    report.contradiction = report.distance_constant > CONTRADICTION_TOL
    if report.contradiction:
        logger.info(f"Intervened Ito system departs from f(zeta)={constant} by {report.distance_constant:.3f}")
    return report


def square():
    return (lambda x: np.asarray(x, dtype=float) ** 2,
            lambda x: 2.0 * np.asarray(x, dtype=float),
            lambda x: np.full(np.shape(x), 2.0))
