"""JSON experiment configuration.

Top-level keys (config/schema.json is the full schema, README has an example):

    system        {"kind": "builtin" | "ou" | "chem" | "expression", ...}   required
    driver        {"alpha", "cov", "jumps", "trunc_radius"}   expression systems only
    grid          {"horizon", "delta"}
    n_paths, seed
    intervention  {"target": label, "value": number | expression}
    test          {"times": [...], "alpha": float, "companion": <system declaration>}
"""
from dataclasses import dataclass, field
import json
import logging

import numpy as np

from cli.builtins import load_builtin
from cli.expression import ExpressionError
from config.settings import (DEFAULT_SEED, DEFAULT_PATHS, DEFAULT_DELTA, DEFAULT_HORIZON, DEFAULT_ALPHA,
                             CONFIG_SCHEMA_PATH)
from driver.levy import LevyTriplet, TripletError
from euler.scheme import Grid, GridError
from intervention.sde_ops import InterventionSpec, InterventionError
from ou.model import OuModel, ou_to_system
from system.chem import build_chem_system
from system.coefficients import CoefficientField
from system.sde import SdeSystem, GaussianInitial

logger = logging.getLogger(__name__)

SYSTEM_KINDS = ("builtin", "ou", "chem", "expression")
TOP_LEVEL_KEYS = {"system", "driver", "grid", "n_paths", "seed", "intervention", "test"}
_STATE_KEYS = {"kind", "name", "labels", "x0", "initial"}
KIND_KEYS = {
    "builtin": {"kind", "name"},
    "ou": _STATE_KEYS | {"A", "B", "sigma"},
    "chem": _STATE_KEYS | {"S", "rates", "constants"},
    "expression": _STATE_KEYS | {"coefficients", "constants", "declared_signature", "singular_points"},
}
SECTION_KEYS = {
    "driver": {"alpha", "cov", "jumps", "trunc_radius"},
    "grid": {"horizon", "delta"},
    "intervention": {"target", "value"},
    "test": {"times", "alpha", "companion"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    system: SdeSystem
    grid: Grid
    n_paths: int = DEFAULT_PATHS
    seed: int = DEFAULT_SEED
    intervention: InterventionSpec | None = None
    times: tuple = ()
    alpha: float = DEFAULT_ALPHA
    companion: SdeSystem | None = None
    ou_model: OuModel | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return mapping[key]


def _check_keys(mapping, allowed: set, where: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} (schema: {CONFIG_SCHEMA_PATH})")


def _matrix(value, where: str, ndim: int = 2) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a numeric array") from None
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: expected a finite {ndim}-dimensional array")
    return arr


def _initial(decl: dict, where: str, default=None):
    if "initial" in decl:
        init = decl["initial"]
        if not isinstance(init, dict):
            raise ConfigError(f"{where}.initial: expected an object with 'mean' and 'cov'")
        try:
            return GaussianInitial(_matrix(_require(init, "mean", f"{where}.initial"), f"{where}.initial.mean", 1),
                                   _matrix(_require(init, "cov", f"{where}.initial"), f"{where}.initial.cov"))
        except (ValueError, TripletError) as e:
            raise ConfigError(f"{where}.initial: {e}") from None
    if "x0" in decl:
        return _matrix(decl["x0"], f"{where}.x0", 1)
    if default is not None:
        return default
    raise ConfigError(f"{where}: missing required key 'x0'")


def parse_driver(decl: dict, where: str = "driver") -> LevyTriplet:
    _check_keys(decl, SECTION_KEYS["driver"], where)
    try:
        alpha = _matrix(_require(decl, "alpha", where), f"{where}.alpha", 1)
        cov = _matrix(decl.get("cov", np.zeros((alpha.size, alpha.size))), f"{where}.cov")
        jumps = tuple((j["rate"], tuple(j["location"])) for j in decl.get("jumps", []))
        return LevyTriplet(alpha.size, alpha, cov, jumps, float(decl.get("trunc_radius", 1.0)))
    except (KeyError, TypeError) as e:
        raise ConfigError(f"{where}.jumps: each jump needs 'rate' and 'location' ({e})") from None
    except TripletError as e:
        raise ConfigError(f"{where}: {e}") from None


def parse_system(decl: dict, driver_decl: dict | None, where: str = "system"):
    """Returns (system, default intervention or None, companion or None, ou model or None)."""
    if not isinstance(decl, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = _require(decl, "kind", where)
    if kind not in SYSTEM_KINDS:
        raise ConfigError(f"{where}.kind: expected one of {SYSTEM_KINDS}, got '{kind}'")
    _check_keys(decl, KIND_KEYS[kind], where)
    labels = tuple(decl.get("labels", ()))
    name = decl.get("name", kind)
    try:
        if kind == "builtin":
            try:
                builtin = load_builtin(_require(decl, "name", where))
            except KeyError as e:
                raise ConfigError(f"{where}.name: {e.args[0]}") from None
            return builtin.system, builtin.spec, builtin.companion, builtin.model

        if kind == "ou":
            B = _matrix(_require(decl, "B", where), f"{where}.B")
            A = _matrix(decl.get("A", np.zeros(B.shape[0])), f"{where}.A", 1)
            sigma = _matrix(_require(decl, "sigma", where), f"{where}.sigma")
            model = OuModel(A, B, sigma, _initial(decl, where, A), labels, name)
            return ou_to_system(model), None, None, model

        if kind == "chem":
            S = _matrix(_require(decl, "S", where), f"{where}.S")
            system = build_chem_system(S, list(_require(decl, "rates", where)), _initial(decl, where),
                                       decl.get("constants", {}), labels, name)
            return system, None, None, None

        entries = _require(decl, "coefficients", where)
        declared = decl.get("declared_signature")
        dependence = None
        if declared is not None:
            p = len(entries)
            dependence = np.zeros((p, p), dtype=bool)
            for edge in declared:
                i, j = (int(v) - 1 for v in edge)
                dependence[i, j] = True
        coeff = CoefficientField.from_expressions(
            entries, decl.get("constants", {}),
            declared_dependence=dependence,
            singular_points=tuple(tuple(pt) for pt in decl.get("singular_points", ())),
        )
        if driver_decl:
            driver = parse_driver(driver_decl)
        elif coeff.d > 1:
            driver = LevyTriplet.time_and_brownian(coeff.d - 1)
        else:
            driver = LevyTriplet(1, [1.0], [[0.0]])
        return SdeSystem(coeff, driver, _initial(decl, where), labels, name), None, None, None
    except ConfigError:
        raise
    except (ExpressionError, ValueError, IndexError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    _check_keys(doc, TOP_LEVEL_KEYS, "config")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    system, default_spec, companion, model = parse_system(_require(doc, "system", "config"), doc.get("driver"))

    grid_decl = doc.get("grid", {})
    _check_keys(grid_decl, SECTION_KEYS["grid"], "grid")
    try:
        grid = Grid(float(overrides.get("horizon", grid_decl.get("horizon", DEFAULT_HORIZON))),
                    float(overrides.get("delta", grid_decl.get("delta", DEFAULT_DELTA))))
    except (GridError, TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from None

    n_paths = int(overrides.get("paths", doc.get("n_paths", DEFAULT_PATHS)))
    if n_paths < 1:
        raise ConfigError("n_paths: must be at least 1")
    seed = int(overrides.get("seed", doc.get("seed", DEFAULT_SEED)))

    spec = default_spec
    if "intervention" in doc:
        decl = doc["intervention"]
        _check_keys(decl, SECTION_KEYS["intervention"], "intervention")
        try:
            spec = InterventionSpec.parse(system, _require(decl, "target", "intervention"),
                                          _require(decl, "value", "intervention"))
        except (InterventionError, ExpressionError) as e:
            raise ConfigError(f"intervention: {e}") from None

    test = doc.get("test", {})
    _check_keys(test, SECTION_KEYS["test"], "test")
    alpha = float(overrides.get("alpha", test.get("alpha", DEFAULT_ALPHA)))
    if not 0 < alpha < 1:
        raise ConfigError("test.alpha: must lie in (0, 1)")
    times = tuple(float(t) for t in test.get("times", (grid.horizon,)))
    for t in times:
        try:
            grid.index_of(t)
        except GridError as e:
            raise ConfigError(f"test.times: {e}") from None
    if "companion" in test:
        companion = parse_system(test["companion"], doc.get("driver"), "test.companion")[0]

    return ExperimentConfig(system, grid, n_paths, seed, spec, times, alpha, companion, model, doc)


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    config = parse_config(doc, overrides)
    logger.info(f"Loaded config {path}: system '{config.system.name}', {config.n_paths} paths, seed {config.seed}")
    return config
