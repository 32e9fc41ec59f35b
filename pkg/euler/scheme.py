"""Euler scheme X_{t_k} = X_{t_{k-1}} + a(X_{t_{k-1}}) (Z_{t_k} - Z_{t_{k-1}}) on a uniform grid."""
from dataclasses import dataclass, field
import csv
import logging

import numpy as np

from driver.levy import sample_increments
from driver.streams import path_stream, jump_stream, initial_stream, stream_id, run_chunked, stack_chunks
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9


class GridError(ValueError):
    pass


class DriverMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    horizon: float
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise GridError(f"horizon must be positive, got {self.horizon}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise GridError(f"step must be positive, got {self.delta}")
        ratio = self.horizon / self.delta
        if abs(ratio - round(ratio)) >= GRID_TOL or round(ratio) < 1:
            raise GridError(f"horizon {self.horizon} is not an integer multiple of step {self.delta}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.delta))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta

    def index_of(self, t: float) -> int:
        k = t / self.delta
        if abs(k - round(k)) >= GRID_TOL or not 0 <= round(k) <= self.n_steps:
            raise GridError(f"time {t} is not a grid point of {self}")
        return int(round(k))

    def refine(self, factor: int) -> "Grid":
        return Grid(self.horizon, self.delta / factor)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    grid: Grid
    labels: tuple
    values: np.ndarray  # (n_paths, N + 1, p); NaN after a path explodes
    seed: int | None = None
    stream_ids: tuple = ()
    exploded_at: np.ndarray = field(default=None)  # first non-finite grid index, -1 if none

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1] != self.grid.n_steps + 1 \
                or self.values.shape[2] != len(self.labels):
            raise ValueError(f"ensemble values of shape {self.values.shape} do not match "
                             f"{self.grid.n_steps + 1} grid points and {len(self.labels)} labels")
        if self.exploded_at is None:
            object.__setattr__(self, "exploded_at", first_nonfinite(self.values))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[2]

    @property
    def exploded_mask(self) -> np.ndarray:
        return self.exploded_at >= 0

    @property
    def exploded_fraction(self) -> float:
        return float(np.mean(self.exploded_mask))

    def slice_at(self, t: float, drop_exploded: bool = True) -> np.ndarray:
        out = self.values[:, self.grid.index_of(t), :]
        return out[~self.exploded_mask] if drop_exploded else out

    def drop_column(self, m: int) -> "PathEnsemble":
        labels = tuple(label for i, label in enumerate(self.labels) if i != m)
        return PathEnsemble(self.grid, labels, np.delete(self.values, m, axis=2), self.seed,
                            self.stream_ids, self.exploded_at)

    def insert_column(self, m: int, column: np.ndarray, label: str) -> "PathEnsemble":
        values = np.insert(self.values, m, 0.0, axis=2)
        values[:, :, m] = column
        labels = self.labels[:m] + (label,) + self.labels[m:]
        return PathEnsemble(self.grid, labels, values, self.seed, self.stream_ids, self.exploded_at)

    def to_csv(self, path):
        write_ensemble_csv(self, path)


def first_nonfinite(values: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(values).all(axis=2)
    return np.where(bad.any(axis=1), bad.argmax(axis=1), -1)


def euler_step(x: np.ndarray, a: np.ndarray, dz: np.ndarray) -> np.ndarray:
    """x + a dz for a batch: x (n, p), a (n, p, d), dz (n, d)."""
    return x + np.sum(a * dz[:, None, :], axis=2)


def draw_path_increments(driver, grid: Grid, seed: int, paths: range) -> np.ndarray:
    """Driver increments (len(paths), N, d), path i drawn from the streams of (seed, i)."""
    return np.stack([sample_increments(driver, grid.delta, grid.n_steps, path_stream(seed, i), jump_stream(seed, i))
                     for i in paths])


def draw_initial_normals(p: int, seed: int, paths: range) -> np.ndarray:
    return np.stack([initial_stream(seed, i).standard_normal(p) for i in paths])


def euler_paths(system: SdeSystem, increments: np.ndarray, x0: np.ndarray,
                record: np.ndarray | None = None) -> np.ndarray:
    """Runs the recursion over given increments (n, N, d) from states x0 (n, p).

    Returns states at the recorded step indices (all N + 1 by default). A path
    whose state turns non-finite is frozen: every later recorded value is NaN.
    """
    n, n_steps, _ = increments.shape
    record = np.arange(n_steps + 1) if record is None else np.asarray(record)
    slot = {int(k): r for r, k in enumerate(record)}
    out = np.full((n, len(record), system.p), np.nan)
    x = np.array(x0, dtype=float)
    alive = np.isfinite(x).all(axis=1)
    x[~alive] = np.nan
    if 0 in slot:
        out[:, slot[0]] = x
    with np.errstate(all="ignore"):
        for k in range(1, n_steps + 1):
            if alive.any():
                idx = np.flatnonzero(alive)
                xs = x[idx]
                step = euler_step(xs, system.coeff.evaluate_batch(xs), increments[idx, k - 1])
                x[idx] = step
                died = ~np.isfinite(step).all(axis=1)
                if died.any():
                    x[idx[died]] = np.nan
                    alive[idx[died]] = False
            if k in slot:
                out[:, slot[k]] = x
    return out


def _log_explosions(name: str, exploded: np.ndarray):
    if exploded.any():
        logger.warning(f"{int(exploded.sum())} of {exploded.size} paths of '{name}' exploded "
                       f"({exploded.mean():.2%})")


def simulate(system: SdeSystem, grid: Grid, n_paths: int, seed: int, threads: int | None = None) -> PathEnsemble:
    logger.info(f"Simulating '{system.name}': {n_paths} paths, {grid.n_steps} steps, seed {seed}")

    def work(paths: range) -> np.ndarray:
        increments = draw_path_increments(system.driver, grid, seed, paths)
        x0 = system.initial_states(draw_initial_normals(system.p, seed, paths))
        return euler_paths(system, increments, x0)

    values = stack_chunks(run_chunked(work, n_paths, threads))
    ensemble = PathEnsemble(grid, system.labels, values, seed,
                            tuple(stream_id(seed, i) for i in range(n_paths)))
    _log_explosions(system.name, ensemble.exploded_mask)
    return ensemble


def simulate_states(system: SdeSystem, grid: Grid, times, n_paths: int, seed: int,
                    threads: int | None = None) -> np.ndarray:
    """States at the given grid times only, (n_paths, len(times), p); same paths as `simulate`."""
    record = np.array([grid.index_of(t) for t in times])

    def work(paths: range) -> np.ndarray:
        increments = draw_path_increments(system.driver, grid, seed, paths)
        x0 = system.initial_states(draw_initial_normals(system.p, seed, paths))
        return euler_paths(system, increments, x0, record)

    states = stack_chunks(run_chunked(work, n_paths, threads))
    _log_explosions(system.name, ~np.isfinite(states).all(axis=(1, 2)))
    return states


def check_shared_drivers(systems) -> None:
    first = systems[0].driver
    for s in systems[1:]:
        if not s.driver.identical_to(first):
            raise DriverMismatchError(f"driver of '{s.name}' differs from driver of '{systems[0].name}'")


def simulate_shared(systems: list, grid: Grid, n_paths: int, seed: int,
                    threads: int | None = None) -> list[PathEnsemble]:
    """Feeds one increment array to every system; all drivers must be identical."""
    if not systems:
        raise ValueError("simulate_shared needs at least one system")
    check_shared_drivers(systems)
    logger.info(f"Shared-noise simulation of {len(systems)} systems: {n_paths} paths, seed {seed}")

    def work(paths: range) -> list[np.ndarray]:
        increments = draw_path_increments(systems[0].driver, grid, seed, paths)
        return [euler_paths(s, increments, s.initial_states(draw_initial_normals(s.p, seed, paths)))
                for s in systems]

    parts = run_chunked(work, n_paths, threads)
    ids = tuple(stream_id(seed, i) for i in range(n_paths))
    ensembles = []
    for k, s in enumerate(systems):
        ensemble = PathEnsemble(grid, s.labels, stack_chunks([part[k] for part in parts]), seed, ids)
        _log_explosions(s.name, ensemble.exploded_mask)
        ensembles.append(ensemble)
    return ensembles


def shared_increments(driver, grid: Grid, n_paths: int, seed: int, threads: int | None = None) -> np.ndarray:
    return stack_chunks(run_chunked(lambda paths: draw_path_increments(driver, grid, seed, paths), n_paths, threads))


# --- CSV ---

def _fmt(value: float) -> str:
    return "" if np.isnan(value) else repr(float(value))


def write_ensemble_csv(ensemble: PathEnsemble, path):
    times = ensemble.grid.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "t", *ensemble.labels])
        for i in range(ensemble.n_paths):
            for k, t in enumerate(times):
                writer.writerow([i, repr(float(t)), *(_fmt(v) for v in ensemble.values[i, k])])
    logger.info(f"Wrote {ensemble.n_paths} paths to {path}")


def read_ensemble_csv(path) -> PathEnsemble:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["path", "t"]:
            raise ValueError(f"{path}: expected header 'path,t,...', got {header}")
        rows = list(reader)
    labels = tuple(header[2:])
    paths = sorted({int(r[0]) for r in rows})
    times = sorted({float(r[1]) for r in rows})
    if len(times) < 2:
        raise ValueError(f"{path}: need at least two grid times")
    grid = Grid(times[-1], times[1] - times[0])
    values = np.full((len(paths), len(times), len(labels)), np.nan)
    t_index = {t: k for k, t in enumerate(times)}
    for r in rows:
        values[int(r[0]), t_index[float(r[1])]] = [float(v) if v != "" else np.nan for v in r[2:]]
    return PathEnsemble(grid, labels, values)
