import logging

import numpy as np

from euler.scheme import Grid, simulate_states
from generator.fields import ScalarField2
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

SEMIGROUP_STEPS = 64


def semigroup_estimate(system: SdeSystem, f: ScalarField2, x, t: float, n_paths: int, seed: int,
                       threads: int | None = None) -> tuple[float, float]:
    """Returns (estimate, standard error), both already divided by t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float).reshape(-1)
    started = system.with_initial(x)
    grid = Grid(t, t / SEMIGROUP_STEPS)
    final = simulate_states(started, grid, [grid.horizon], n_paths, seed, threads)[:, 0, :]
    usable = np.isfinite(final).all(axis=1)
    if not usable.all():
        logger.warning(f"semigroup_estimate excluded {int((~usable).sum())} exploded paths")
    if usable.sum() < 2:
        raise ValueError("fewer than two usable paths")
    changes = f.values(final[usable]) - f(x)
    estimate = float(np.mean(changes) / t)
    std_error = float(np.std(changes, ddof=1) / np.sqrt(usable.sum()) / t)
    return estimate, std_error
