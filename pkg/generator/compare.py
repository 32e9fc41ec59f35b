"""Functional and structural comparison of two generators."""
from dataclasses import dataclass, field, asdict
from typing import Callable
import logging

import numpy as np

from generator.fields import ScalarField2
from generator.terms import (GeneratorTerms, compute_terms, apply_terms, update_characteristic_function,
                             D_FORM, DEFAULT_RADIUS_E)
from intervention.sde_ops import InterventionSpec, intervene_sde
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

ATOM_MATCH_TOL = 1e-9
STRUCTURE_TOL = 1e-12


@dataclass
class PointComparison:
    x: list
    beta_distance: float
    diffusion_distance: float
    jump_distance: float
    max_functional_difference: float
    cf_distance: float | None = None


@dataclass
class GeneratorReport:
    max_functional_difference: float
    max_beta_distance: float
    max_diffusion_distance: float
    max_jump_distance: float
    structurally_equal: bool
    tol: float
    points: list = field(default_factory=list)
    closed_form_difference: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _merged_atoms(rates: np.ndarray, locations: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """Drops atoms at the origin and merges atoms with matching locations."""
    merged = []
    for rate, loc in zip(rates, locations):
        if not np.any(loc):
            continue
        for k, (other, total) in enumerate(merged):
            if np.max(np.abs(other - loc)) <= ATOM_MATCH_TOL:
                merged[k] = (other, total + rate)
                break
        else:
            merged.append((loc, float(rate)))
    return merged


def jump_measure_distance(a: GeneratorTerms, b: GeneratorTerms) -> float:
    """Total variation style distance between two finite pushforward measures."""
    left = _merged_atoms(a.rates, a.locations)
    right = _merged_atoms(b.rates, b.locations)
    unmatched = list(right)
    distance = 0.0
    for loc, rate in left:
        for k, (other, other_rate) in enumerate(unmatched):
            if np.max(np.abs(other - loc)) <= ATOM_MATCH_TOL:
                distance += abs(rate - other_rate)
                unmatched.pop(k)
                break
        else:
            distance += rate
    return distance + sum(rate for _, rate in unmatched)


def compare_generators(sysA: SdeSystem, sysB: SdeSystem, points, fields: list[ScalarField2],
                       r_E: float = DEFAULT_RADIUS_E, tol: float = STRUCTURE_TOL,
                       cf_args: tuple | None = None,
                       closed_form: Callable | None = None) -> GeneratorReport:
    """`cf_args = (u_grid, delta)` adds the Euler-update CF distance per point;
    `closed_form(f, x)` adds the largest deviation of sysA's generator from it."""
    if sysA.p != sysB.p:
        raise ValueError(f"dimension mismatch: {sysA.p} vs {sysB.p}")
    rows = []
    closed = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        ta = compute_terms(sysA, x, r_E)
        tb = compute_terms(sysB, x, r_E)
        values_a = [apply_terms(ta, f, D_FORM) for f in fields]
        values_b = [apply_terms(tb, f, D_FORM) for f in fields]
        functional = max((abs(va - vb) for va, vb in zip(values_a, values_b)), default=0.0)
        cf = None
        if cf_args is not None:
            us, delta = cf_args
            cf = max(abs(update_characteristic_function(sysA, x, u, delta, r_E)[0]
                         - update_characteristic_function(sysB, x, u, delta, r_E)[0]) for u in us)
        if closed_form is not None:
            closed = max([closed] + [abs(va - closed_form(f, x)) for f, va in zip(fields, values_a)])
        rows.append(PointComparison(
            x=x.tolist(),
            beta_distance=float(np.linalg.norm(ta.beta - tb.beta)),
            diffusion_distance=float(np.linalg.norm(ta.diffusion - tb.diffusion)),
            jump_distance=jump_measure_distance(ta, tb),
            max_functional_difference=float(functional),
            cf_distance=cf,
        ))

    def worst(attr):
        return max((getattr(r, attr) for r in rows), default=0.0)

    report = GeneratorReport(
        max_functional_difference=worst("max_functional_difference"),
        max_beta_distance=worst("beta_distance"),
        max_diffusion_distance=worst("diffusion_distance"),
        max_jump_distance=worst("jump_distance"),
        structurally_equal=False,
        tol=tol,
        points=[asdict(r) for r in rows],
        closed_form_difference=closed if closed_form is not None else None,
    )
    report.structurally_equal = max(report.max_beta_distance, report.max_diffusion_distance,
                                    report.max_jump_distance) <= tol
    logger.info(f"Compared generators of '{sysA.name}' and '{sysB.name}' at {len(rows)} points: "
                f"structural equality {report.structurally_equal}")
    return report


def intervened_generator_report(sysA: SdeSystem, sysB: SdeSystem, spec: InterventionSpec, points,
                                fields: list[ScalarField2], r_E: float = DEFAULT_RADIUS_E,
                                closed_form: Callable | None = None) -> GeneratorReport:
    return compare_generators(intervene_sde(sysA, spec), intervene_sde(sysB, spec), points, fields,
                              r_E, closed_form=closed_form)


def geometric_brownian_generator(f: ScalarField2, x) -> float:
    """x^2 f''(x) / 2 in one dimension."""
    x = np.asarray(x, dtype=float).reshape(1)
    return float(0.5 * x[0] ** 2 * f.hessian(x)[0, 0])
