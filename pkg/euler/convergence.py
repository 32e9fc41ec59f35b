from dataclasses import dataclass, field, asdict
from typing import Callable
import csv
import logging

import numpy as np

from euler.scheme import Grid, euler_paths, shared_increments, draw_initial_normals
from system.sde import SdeSystem

logger = logging.getLogger(__name__)


@dataclass
class ConvergenceRow:
    delta: float
    rms_error: float
    paths_used: int
    exploded: int


@dataclass
class ConvergenceTable:
    system: str
    horizon: float
    rows: list = field(default_factory=list)
    slope: float | None = None
    reference: str = "exact"

    def to_dict(self) -> dict:
        return asdict(self)

    def monotone(self, slack: float = 0.05) -> bool:
        """RMS error non-increasing as the step halves, up to relative slack per step."""
        errors = [r.rms_error for r in sorted(self.rows, key=lambda r: -r.delta)]
        return all(b <= a * (1 + slack) for a, b in zip(errors, errors[1:]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "rms_error", "paths_used", "exploded"])
            for r in self.rows:
                writer.writerow([repr(r.delta), repr(r.rms_error), r.paths_used, r.exploded])


def _factors(deltas) -> tuple[float, list[int]]:
    finest = min(deltas)
    factors = []
    for delta in deltas:
        ratio = delta / finest
        k = int(round(ratio))
        if abs(ratio - k) > 1e-9 or k & (k - 1):
            raise ValueError(f"step {delta} is not a dyadic coarsening of {finest}")
        factors.append(k)
    return finest, factors


def coarsen(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sums consecutive blocks of fine increments: (n, N, d) -> (n, N / factor, d)."""
    n, steps, d = increments.shape
    return increments.reshape(n, steps // factor, factor, d).sum(axis=2)


def fitted_slope(deltas, errors) -> float | None:
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = errors > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(deltas[ok]), np.log(errors[ok]), 1)[0])


def convergence_study(system: SdeSystem, deltas, horizon: float, n_paths: int, seed: int,
                      exact: Callable | None = None, threads: int | None = None) -> ConvergenceTable:
    """RMS sup-error per step size.

    `exact(driver_path, times, x0)` maps the cumulative driver path
    (n, N + 1, d) on the finest grid to the exact solution (n, N + 1, p).
    Without it the finest Euler approximation is the reference and is left out
    of the table.
    """
    deltas = sorted(float(d) for d in deltas)[::-1]
    finest, factors = _factors(deltas)
    fine = Grid(horizon, finest)
    increments = shared_increments(system.driver, fine, n_paths, seed, threads)
    x0 = system.initial_states(draw_initial_normals(system.p, seed, range(n_paths)))

    if exact is not None:
        driver_path = np.concatenate([np.zeros((n_paths, 1, system.d)), np.cumsum(increments, axis=1)], axis=1)
        reference = exact(driver_path, fine.times, x0)
        label = "exact"
    else:
        reference = euler_paths(system, increments, x0)
        label = "finest"

    table = ConvergenceTable(system.name, float(horizon), reference=label)
    for delta, factor in zip(deltas, factors):
        if exact is None and factor == 1:
            continue
        approx = euler_paths(system, coarsen(increments, factor), x0)
        target = reference[:, ::factor, :]
        sup = np.abs(approx - target).max(axis=(1, 2))
        usable = np.isfinite(sup)
        exploded = int((~usable).sum())
        if exploded:
            logger.warning(f"Excluded {exploded} exploded paths at delta={delta}")
        rms = float(np.sqrt(np.mean(sup[usable] ** 2))) if usable.any() else float("nan")
        table.rows.append(ConvergenceRow(delta, rms, int(usable.sum()), exploded))

    table.slope = fitted_slope([r.delta for r in table.rows], [r.rms_error for r in table.rows])
    logger.info(f"Convergence study of '{system.name}': slope {table.slope}")
    return table
