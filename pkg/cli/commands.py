"""Subcommand handlers. Each handler returns a process exit code."""
from dataclasses import dataclass
import json
import logging
import os

import numpy as np

from cli.builtins import load_builtin, BUILTINS
from cli.experiment import ConfigError, ExperimentConfig, load_config
from cli.expression import ExpressionError
from cli.utils import write_json, write_text, dumps
from config.settings import DEFAULT_SEED, DEFAULT_ALPHA
from euler.commutation import check_commutation
from euler.convergence import convergence_study
from euler.euler_sem import build_euler_sem
from euler.scheme import Grid, simulate
from generator.compare import compare_generators, intervened_generator_report, geometric_brownian_generator
from generator.fields import bump_battery
from generator.terms import compute_terms, apply_terms, D_FORM, E_FORM
from intervention.ito import ito_counterexample, square
from intervention.sde_ops import intervene_sde
from ou.model import ou_intervene, ou_transition
from stats.identifiability import identifiability_check
from stats.tests import CONSISTENT, HYPOTHESIS_VIOLATED
from system.signature import probe_signature, declared_signature, verify_declared, sample_probe_points

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VERDICT = 3

GENERATOR_POINTS = 16
CONVERGENCE_LEVELS = 6
Z_LIMIT = 4.0


@dataclass
class Invocation:
    command: str
    config: str | None = None
    out: str = "out"
    name: str | None = None
    seed: int | None = None
    paths: int | None = None
    delta: float | None = None
    horizon: float | None = None
    alpha: float | None = None

    @property
    def overrides(self) -> dict:
        return {"seed": self.seed, "paths": self.paths, "delta": self.delta,
                "horizon": self.horizon, "alpha": self.alpha}

    def pick(self, key: str, default):
        value = self.overrides.get(key)
        return default if value is None else value


def _config(inv: Invocation) -> ExperimentConfig:
    if not inv.config:
        raise ConfigError(f"'{inv.command}' needs --config")
    return load_config(inv.config, inv.overrides)


def _require_spec(config: ExperimentConfig):
    if config.intervention is None:
        raise ConfigError("config has no 'intervention'")
    return config.intervention


# --- handlers ---

def simulate_command(inv: Invocation) -> int:
    config = _config(inv)
    ensemble = simulate(config.system, config.grid, config.n_paths, config.seed)
    ensemble.to_csv(os.path.join(_out(inv), "paths.csv"))
    write_json(inv.out, "simulation.json", {
        "system": config.system.summary(),
        "n_paths": config.n_paths,
        "seed": config.seed,
        "horizon": config.grid.horizon,
        "delta": config.grid.delta,
        "exploded_fraction": ensemble.exploded_fraction,
    })
    return EXIT_OK


def intervene_command(inv: Invocation) -> int:
    config = _config(inv)
    spec = _require_spec(config)
    reduced = intervene_sde(config.system, spec)
    summary = {"intervention": spec.describe(config.system.labels), "system": reduced.summary()}
    print(dumps(summary), end="")
    write_json(inv.out, "intervened.json", summary)
    if "grid" in config.raw:
        ensemble = simulate(reduced, config.grid, config.n_paths, config.seed)
        ensemble.to_csv(os.path.join(_out(inv), "intervened_paths.csv"))
    return EXIT_OK


def signature_command(inv: Invocation) -> int:
    config = _config(inv)
    system = config.system
    probed = probe_signature(system)
    declared = declared_signature(system)
    if declared is not None:
        verify_declared(system, probed)
    sig = declared if declared is not None else probed
    write_json(inv.out, "signature.json", {
        "system": system.name,
        "edges": sig.edge_list(list(system.labels)),
        "probed_edges": probed.edge_list(list(system.labels)),
        "declared": declared is not None,
    })
    write_text(inv.out, "signature.dot", sig.to_dot(list(system.labels)))
    return EXIT_OK


def generator_command(inv: Invocation) -> int:
    config = _config(inv)
    system = config.system
    fields = bump_battery(system.p, center=system.reference_point)
    rows = []
    for x in sample_probe_points(system, GENERATOR_POINTS):
        terms = compute_terms(system, x)
        rows.append({
            "terms": terms.to_dict(),
            "values": [{"field": f.name, "D": apply_terms(terms, f, D_FORM), "E": apply_terms(terms, f, E_FORM)}
                       for f in fields],
        })
    write_json(inv.out, "generator.json", {"system": system.name, "points": rows})
    return EXIT_OK


def check_commute_command(inv: Invocation) -> int:
    config = _config(inv)
    spec = _require_spec(config)
    # an expression zeta reads the other coordinates of the same layer, as the intervened SDE does
    lagged = spec.is_constant
    logger.info(f"Checking commutation with {'lagged' if lagged else 'same-layer'} intervention assignments")
    report = check_commutation(config.system, spec, config.grid, config.n_paths, config.seed, lagged=lagged)
    write_json(inv.out, "commutation.json", report)
    return EXIT_OK if report.passed else EXIT_VERDICT


def check_identify_command(inv: Invocation) -> int:
    config = _config(inv)
    if config.companion is None:
        raise ConfigError("check-identify needs a companion system (test.companion or a builtin pair)")
    report = identifiability_check(config.system, config.companion, _require_spec(config), config.times,
                                   config.n_paths, config.grid.delta, config.seed, config.alpha)
    write_json(inv.out, "identifiability.json", report)
    return _verdict_code(report.verdict)


def convergence_command(inv: Invocation) -> int:
    config = _config(inv)
    deltas = [config.grid.delta * 2 ** k for k in range(CONVERGENCE_LEVELS)
              if config.grid.delta * 2 ** k <= config.grid.horizon]
    table = convergence_study(config.system, deltas, config.grid.horizon, config.n_paths, config.seed)
    table.to_csv(os.path.join(_out(inv), "convergence.csv"))
    write_json(inv.out, "convergence.json", table)
    return EXIT_OK


def demo_command(inv: Invocation) -> int:
    if inv.name not in BUILTINS:
        raise ConfigError(f"unknown demo '{inv.name}' (known: {', '.join(BUILTINS)})")
    return DEMOS[inv.name](inv)


# --- demos ---

def _verdict_code(verdict: str) -> int:
    if verdict == HYPOTHESIS_VIOLATED:
        logger.warning("Generators differ; the identifiability verdict does not apply")
        return EXIT_OK
    return EXIT_OK if verdict == CONSISTENT else EXIT_VERDICT


def _out(inv: Invocation) -> str:
    os.makedirs(inv.out, exist_ok=True)
    return inv.out


def _commutation_demo(inv: Invocation, builtin) -> dict:
    grid = Grid(inv.pick("horizon", 1.0), inv.pick("delta", 2.0 ** -8))
    report = check_commutation(builtin.system, builtin.spec, grid, inv.pick("paths", 100),
                               inv.pick("seed", DEFAULT_SEED))
    return report.to_dict()


def chem_demo(inv: Invocation) -> int:
    builtin = load_builtin(inv.name)
    system = builtin.system
    sig = probe_signature(system)
    reduced = intervene_sde(system, builtin.spec)
    commutation = _commutation_demo(inv, builtin)
    write_text(inv.out, "signature.dot", sig.to_dot(list(system.labels)))
    write_text(inv.out, "euler_sem.dot", build_euler_sem(system, Grid(4 * 2.0 ** -8, 2.0 ** -8), sig).to_dot())
    write_json(inv.out, f"demo_{inv.name}.json", {
        "system": system.summary(),
        "signature": sig.edge_list(list(system.labels)),
        "intervened": reduced.summary(),
        "commutation": commutation,
    })
    return EXIT_OK if commutation["passed"] else EXIT_VERDICT


def ou_demo(inv: Invocation) -> int:
    builtin = load_builtin("ou")
    model, spec = builtin.model, builtin.spec
    closed = ou_intervene(model, spec.target, spec.zeta)
    horizon = inv.pick("horizon", 1.0)
    law = ou_transition(closed, closed.initial, horizon)
    reduced = intervene_sde(builtin.system, spec)
    grid = Grid(horizon, inv.pick("delta", 1e-3))
    ensemble = simulate(reduced, grid, inv.pick("paths", 10_000), inv.pick("seed", DEFAULT_SEED))
    final = ensemble.slice_at(horizon)
    mean_z = (final.mean(axis=0) - law.mean) / np.sqrt(np.diag(law.cov) / len(final))
    commutation = _commutation_demo(inv, builtin)
    passed = bool(np.all(np.abs(mean_z) <= Z_LIMIT)) and commutation["passed"]
    write_json(inv.out, "demo_ou.json", {
        "model": {"A": model.A, "B": model.B, "sigma": model.sigma},
        "intervened": {"A": closed.A, "B": closed.B, "sigma": closed.sigma},
        "transition": law.to_dict(),
        "simulated_mean": final.mean(axis=0),
        "simulated_cov": np.atleast_2d(np.cov(final.T)),
        "mean_z": mean_z,
        "commutation": commutation,
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_VERDICT


def two_signatures_demo(inv: Invocation) -> int:
    builtin = load_builtin("two-signatures")
    system, companion, spec = builtin.system, builtin.companion, builtin.spec
    points = sample_probe_points(system, 1000)
    structure = compare_generators(system, companion, points, [])
    intervened = intervened_generator_report(system, companion, spec, sample_probe_points(
        intervene_sde(system, spec), 32, box=(0.1, 3.0)), bump_battery(1, center=(1.0,)),
        closed_form=geometric_brownian_generator)
    report = identifiability_check(system, companion, spec, (0.5, 1.0), inv.pick("paths", 10_000),
                                   inv.pick("delta", 1e-3), inv.pick("seed", DEFAULT_SEED),
                                   inv.pick("alpha", DEFAULT_ALPHA))
    report.details["signatures"] = {
        system.name: probe_signature(system).edge_list(list(system.labels)),
        companion.name: probe_signature(companion).edge_list(list(companion.labels)),
    }
    report.details["max_diffusion_distance"] = structure.max_diffusion_distance
    report.details["intervened_generator"] = {
        "max_functional_difference": intervened.max_functional_difference,
        "closed_form_difference": intervened.closed_form_difference,
    }
    write_json(inv.out, "identifiability.json", report)
    return _verdict_code(report.verdict)


def ito_demo(inv: Invocation) -> int:
    builtin = load_builtin("ito-counterexample")
    report = ito_counterexample(*square(), zeta=builtin.spec.zeta, horizon=inv.pick("horizon", 1.0),
                                delta=inv.pick("delta", 2.0 ** -8), n_paths=inv.pick("paths", 1000),
                                seed=inv.pick("seed", DEFAULT_SEED))
    write_json(inv.out, "demo_ito-counterexample.json", report)
    return EXIT_OK


DEMOS = {
    "chem": chem_demo,
    "chem-network": chem_demo,
    "ou": ou_demo,
    "two-signatures": two_signatures_demo,
    "ito-counterexample": ito_demo,
}

COMMANDS = {
    "simulate": simulate_command,
    "intervene": intervene_command,
    "signature": signature_command,
    "generator": generator_command,
    "check-commute": check_commute_command,
    "check-identify": check_identify_command,
    "convergence": convergence_command,
    "demo": demo_command,
}


def run(inv: Invocation) -> int:
    """Dispatches a subcommand and maps failures to exit codes."""
    handler = COMMANDS.get(inv.command)
    if handler is None:
        logger.error(f"Unknown subcommand '{inv.command}'")
        return EXIT_CONFIG
    logger.info(f"Running '{inv.command}' (config={inv.config}, out={inv.out})")
    try:
        code = handler(inv)
    except (ConfigError, ExpressionError, json.JSONDecodeError) as e:
        logger.error(f"Config error in '{inv.command}': {e}")
        print(f"config error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"Runtime error in '{inv.command}': {e}")
        print(f"runtime error: {e}")
        return EXIT_RUNTIME
    logger.info(f"'{inv.command}' finished with exit code {code}")
    return code
