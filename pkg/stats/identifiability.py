import logging

import numpy as np

from config.settings import ENERGY_PERMUTATIONS, PROBE_POINTS
from euler.scheme import Grid, simulate_states
from generator.compare import compare_generators
from generator.fields import bump_battery
from intervention.sde_ops import InterventionSpec, intervene_sde
from stats.tests import (TestReport, SampleError, ks_two_sample, energy_distance_test, combine,
                         HYPOTHESIS_VIOLATED)
from system.sde import SdeSystem
from system.signature import sample_probe_points

logger = logging.getLogger(__name__)

MIN_KS_SAMPLES = 1000
# seeds for the two systems' path streams stay disjoint
SEED_OFFSET = 0x5EED


def generator_hypothesis(sysA: SdeSystem, sysB: SdeSystem, n_points: int = PROBE_POINTS):
    points = sample_probe_points(sysA, n_points)
    return compare_generators(sysA, sysB, points, bump_battery(sysA.p, 2, center=sysA.reference_point))


def identifiability_check(sysA: SdeSystem, sysB: SdeSystem, spec: InterventionSpec, times, n_paths: int,
                          delta: float, seed: int, alpha: float = 0.01, check_hypothesis: bool = True,
                          n_permutations: int = ENERGY_PERMUTATIONS) -> TestReport:
    """KS per coordinate and time plus one energy test on the stacked slices, Holm-corrected.

    When `check_hypothesis` is set and the generators differ structurally the
    verdict is "hypothesis violated"; the tests still run and are reported.
    """
    if n_paths < MIN_KS_SAMPLES:
        raise SampleError(f"asymptotic KS p-values need at least {MIN_KS_SAMPLES} paths, got {n_paths}")
    times = sorted(float(t) for t in times)
    hypothesis = None
    if check_hypothesis:
        hypothesis = generator_hypothesis(sysA, sysB)
        if not hypothesis.structurally_equal:
            logger.warning(f"Generators of '{sysA.name}' and '{sysB.name}' differ; equal-generator hypothesis violated")

    reduced_a = intervene_sde(sysA, spec)
    reduced_b = intervene_sde(sysB, spec)
    grid = Grid(max(times), delta)
    states_a = simulate_states(reduced_a, grid, times, n_paths, seed)
    states_b = simulate_states(reduced_b, grid, times, n_paths, seed + SEED_OFFSET)
    keep_a = np.isfinite(states_a).all(axis=(1, 2))
    keep_b = np.isfinite(states_b).all(axis=(1, 2))
    states_a, states_b = states_a[keep_a], states_b[keep_b]
    if min(len(states_a), len(states_b)) < MIN_KS_SAMPLES:
        logger.warning(f"Only {min(len(states_a), len(states_b))} usable paths after exclusions")

    entries = []
    for k, t in enumerate(times):
        for i, label in enumerate(reduced_a.labels):
            d, p = ks_two_sample(states_a[:, k, i], states_b[:, k, i])
            entries.append({"test": "ks", "time": t, "coordinate": label, "statistic": d, "p_value": p})
    stacked_a = states_a.reshape(len(states_a), -1)
    stacked_b = states_b.reshape(len(states_b), -1)
    e, p = energy_distance_test(stacked_a, stacked_b, n_permutations, seed)
    entries.append({"test": "energy", "time": None, "coordinate": None, "statistic": e, "p_value": p})

    details = {
        "systems": [sysA.name, sysB.name],
        "intervention": spec.describe(sysA.labels),
        "times": times,
        "n_paths": n_paths,
        "delta": delta,
        "seeds": [seed, seed + SEED_OFFSET],
        "exploded": [int((~keep_a).sum()), int((~keep_b).sum())],
    }
    if hypothesis is not None:
        details["generator"] = {
            "structurally_equal": hypothesis.structurally_equal,
            "max_beta_distance": hypothesis.max_beta_distance,
            "max_diffusion_distance": hypothesis.max_diffusion_distance,
            "max_jump_distance": hypothesis.max_jump_distance,
        }
    report = combine("identifiability", entries, alpha, details)
    if hypothesis is not None and not hypothesis.structurally_equal:
        report.verdict = HYPOTHESIS_VIOLATED
    return report
